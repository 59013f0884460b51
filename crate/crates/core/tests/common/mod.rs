#![allow(dead_code)]

use rfprint::channel::{synth_pass, MacSchedule, NoiseModel, PassWindow, RssiTrace};
use rfprint::scenario::{build_links, DeploymentConfig, Direction, LinkGeometry, Segment, VehicleClass, VehicleProfile};

pub struct Rig {
    pub cfg: DeploymentConfig,
    pub links: Vec<LinkGeometry>,
    pub sched: MacSchedule,
}

pub fn rig() -> Rig {
    let cfg = DeploymentConfig::default();
    Rig { links: build_links(&cfg).unwrap(), sched: MacSchedule::from_config(&cfg), cfg }
}

/// Box-shaped vehicle at constant speed on the lane centreline.
pub fn boxcar(length: f64, height: f64, speed: f64, direction: Direction) -> VehicleProfile {
    VehicleProfile {
        vehicle_id: 0,
        class: if length > 8.0 { VehicleClass::Truck } else { VehicleClass::Car },
        length,
        silhouette: vec![Segment { length, height }],
        lateral_offset: 3.5,
        entry_velocity: speed,
        acceleration: 0.0,
        entry_time: 2.0,
        direction,
    }
}

pub fn traces(r: &Rig, v: &VehicleProfile, noise: &NoiseModel, seed: u64) -> Vec<RssiTrace> {
    let w = PassWindow::around(v, &r.cfg, 1.5, 1.0).unwrap();
    synth_pass(v, &r.links, &r.cfg, &r.sched, noise, w, seed).unwrap()
}
