//! RSSI trace synthesis for a vehicle passing the post array.
//!
//! Idle levels follow free-space path loss. A vehicle shadows a link while
//! its silhouette rises above the line of sight at the lane crossing; the
//! penetration depth maps to attenuation through a saturating exponential.
//! Transmitters beacon in token order, and the three receivers measure each
//! beacon at the same instant, so one round yields one sample per link.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{self, DeploymentConfig, LinkGeometry, VehicleProfile};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowingModel {
    /// Attenuation of a fully blocked link.
    pub max_attenuation_db: f64,
    /// Penetration depth at which attenuation reaches `1 - 1/e` of the maximum.
    pub decay_length: f64,
}

impl Default for ShadowingModel {
    fn default() -> Self {
        Self { max_attenuation_db: 30.0, decay_length: 0.5 }
    }
}

impl ShadowingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_attenuation_db >= 0.0) || !(self.decay_length > 0.0) {
            return Err(Error::InvalidConfig(
                "shadowing needs max_attenuation_db >= 0 and decay_length > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacSchedule {
    /// Transmitter beacon order within a round (a permutation of 1, 2, 3).
    pub token_order: [u8; 3],
    pub slot_duration: f64,
}

impl Default for MacSchedule {
    fn default() -> Self {
        Self::from_config(&DeploymentConfig::default())
    }
}

impl MacSchedule {
    /// Schedule whose round matches the configured sampling rate.
    pub fn from_config(config: &DeploymentConfig) -> Self {
        Self { token_order: [1, 2, 3], slot_duration: config.round_duration() / 3.0 }
    }

    pub fn round_duration(&self) -> f64 {
        3.0 * self.slot_duration
    }

    pub fn validate(&self, config: &DeploymentConfig) -> Result<()> {
        let mut order = self.token_order;
        order.sort_unstable();
        if order != [1, 2, 3] {
            return Err(Error::InvalidConfig(format!(
                "token_order {:?} is not a permutation of 1..=3",
                self.token_order
            )));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::InvalidConfig("slot_duration must be > 0".into()));
        }
        let expected = config.round_duration();
        if (self.round_duration() - expected).abs() > 1e-9 * expected {
            return Err(Error::InvalidConfig(format!(
                "round duration {} s does not match sample rate ({} s)",
                self.round_duration(),
                expected
            )));
        }
        Ok(())
    }

    /// Offset of a transmitter's slot from the start of the round.
    pub fn slot_offset(&self, tx_index: u8) -> f64 {
        let pos = self.token_order.iter().position(|&t| t == tx_index).unwrap_or(0);
        pos as f64 * self.slot_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub time: f64,
    pub link_id: u8,
    pub rssi: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiTrace {
    pub link_id: u8,
    pub samples: Vec<RssiSample>,
    /// Noise-free quantised baseline known to the generator; for test oracles.
    pub idle_level_true: f64,
}

impl RssiTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min_rssi(&self) -> Option<i32> {
        self.samples.iter().map(|s| s.rssi).min()
    }

    /// Same trace with every sample shifted by `offset_db`.
    pub fn shifted(&self, offset_db: i32) -> RssiTrace {
        RssiTrace {
            link_id: self.link_id,
            samples: self.samples.iter().map(|s| RssiSample { rssi: s.rssi + offset_db, ..*s }).collect(),
            idle_level_true: self.idle_level_true + f64::from(offset_db),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-sample Gaussian noise, dB.
    pub sigma: f64,
    /// Reporting granularity, a whole number of dB.
    pub quantization_step: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: 1.0, quantization_step: 1.0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig("noise sigma must be >= 0".into()));
        }
        if !(self.quantization_step >= 1.0) || self.quantization_step.fract() != 0.0 {
            return Err(Error::InvalidConfig("quantization_step must be a whole number of dB".into()));
        }
        Ok(())
    }

    pub fn quantize(&self, dbm: f64) -> i32 {
        ((dbm / self.quantization_step).round() * self.quantization_step) as i32
    }
}

pub fn free_space_path_loss(distance: f64, frequency: f64) -> f64 {
    20.0 * distance.log10()
        + 20.0 * frequency.log10()
        + 20.0 * (4.0 * std::f64::consts::PI / SPEED_OF_LIGHT).log10()
}

/// Received power of an unobstructed link.
pub fn idle_rssi(link: &LinkGeometry, config: &DeploymentConfig) -> f64 {
    config.tx_power_dbm - free_space_path_loss(link.distance(), config.carrier_frequency_hz)
}

/// How far the vehicle body rises above the link's line of sight at time `t`.
pub fn occlusion_depth(link: &LinkGeometry, vehicle: &VehicleProfile, t: f64, config: &DeploymentConfig) -> f64 {
    if t < vehicle.entry_time {
        return 0.0;
    }
    let crossing = link.crossing_x(vehicle.lateral_offset);
    let los_height = link.crossing_z(vehicle.lateral_offset);
    let front = scenario::front_x(vehicle, t, config);
    let behind_front = vehicle.direction.sign() * (front - crossing);
    match vehicle.height_at(behind_front) {
        Some(h) => (h - los_height).max(0.0),
        None => 0.0,
    }
}

pub fn attenuation_db(depth: f64, model: &ShadowingModel) -> f64 {
    model.max_attenuation_db * (1.0 - (-depth / model.decay_length).exp())
}

/// Deepest attenuation the vehicle causes on `link` during its pass.
pub fn peak_attenuation_db(link: &LinkGeometry, vehicle: &VehicleProfile, config: &DeploymentConfig) -> f64 {
    let los_height = link.crossing_z(vehicle.lateral_offset);
    vehicle
        .silhouette
        .iter()
        .map(|s| attenuation_db((s.height - los_height).max(0.0), &config.shadowing))
        .fold(0.0, f64::max)
}

/// Per-class mean peak attenuation on the direct links at one antenna height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightSpread {
    pub antenna_height: f64,
    /// Car first.
    pub class_mean_db: [f64; 2],
    /// Largest minus smallest class mean.
    pub spread_db: f64,
}

/// Evaluates [`HeightSpread`] for each antenna height over a fleet.
pub fn antenna_height_spread(
    config: &DeploymentConfig,
    fleet: &[VehicleProfile],
    heights: &[f64],
) -> Result<Vec<HeightSpread>> {
    heights
        .iter()
        .map(|&h| {
            let cfg = DeploymentConfig { antenna_height: h, ..config.clone() };
            let links = scenario::build_links(&cfg)?;
            let direct: Vec<&LinkGeometry> = links.iter().filter(|l| l.is_direct).collect();
            let mut sum = [0.0; 2];
            let mut count = [0usize; 2];
            for v in fleet {
                let c = v.class.index();
                sum[c] += direct.iter().map(|l| peak_attenuation_db(l, v, &cfg)).sum::<f64>() / direct.len() as f64;
                count[c] += 1;
            }
            if count.contains(&0) {
                return Err(Error::InvalidConfig("height spread needs both vehicle classes".into()));
            }
            let class_mean_db = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
            let spread_db = (class_mean_db[0] - class_mean_db[1]).abs();
            Ok(HeightSpread { antenna_height: h, class_mean_db, spread_db })
        })
        .collect()
}

/// Synthesis time window, in absolute seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassWindow {
    pub start: f64,
    pub end: f64,
}

impl PassWindow {
    /// Window from `lead` seconds before entry to `tail` seconds after the
    /// rear clears the last link.
    pub fn around(vehicle: &VehicleProfile, config: &DeploymentConfig, lead: f64, tail: f64) -> Result<Self> {
        let clear = scenario::clear_time(vehicle, config)?;
        Ok(Self { start: vehicle.entry_time - lead, end: clear + tail })
    }

    pub fn rounds(&self, round: f64) -> usize {
        if self.end < self.start {
            return 0;
        }
        ((self.end - self.start) / round).floor() as usize + 1
    }
}

/// Draws the nine traces for one pass over `window`.
pub fn synth_pass(
    vehicle: &VehicleProfile,
    links: &[LinkGeometry],
    config: &DeploymentConfig,
    schedule: &MacSchedule,
    noise: &NoiseModel,
    window: PassWindow,
    seed: u64,
) -> Result<Vec<RssiTrace>> {
    vehicle.validate()?;
    if !(vehicle.lateral_offset > 0.0 && vehicle.lateral_offset < config.road_width) {
        return Err(Error::InvalidConfig(format!(
            "vehicle {} drives outside the road (lateral offset {})",
            vehicle.vehicle_id, vehicle.lateral_offset
        )));
    }
    let clear = scenario::clear_time(vehicle, config)?;
    if window.start > vehicle.entry_time || window.end < clear || window.start < 0.0 {
        return Err(Error::WindowTooShort {
            start: window.start,
            end: window.end,
            entry: vehicle.entry_time,
            clear,
        });
    }
    synth_traces(Some(vehicle), links, config, schedule, noise, window, seed)
}

/// Draws traces with an optional vehicle; `None` yields idle-only traces.
pub fn synth_traces(
    vehicle: Option<&VehicleProfile>,
    links: &[LinkGeometry],
    config: &DeploymentConfig,
    schedule: &MacSchedule,
    noise: &NoiseModel,
    window: PassWindow,
    seed: u64,
) -> Result<Vec<RssiTrace>> {
    config.validate()?;
    schedule.validate(config)?;
    noise.validate()?;
    if links.len() != 9 {
        return Err(Error::InvalidConfig(format!("expected 9 links, got {}", links.len())));
    }
    let round = schedule.round_duration();
    let rounds = window.rounds(round);
    let idle: Vec<f64> = links.iter().map(|l| idle_rssi(l, config)).collect();
    let mut traces: Vec<RssiTrace> = links
        .iter()
        .zip(&idle)
        .map(|(l, &p)| RssiTrace {
            link_id: l.link_id,
            samples: Vec::with_capacity(rounds),
            idle_level_true: f64::from(noise.quantize(p)),
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..rounds {
        let round_start = window.start + k as f64 * round;
        for &tx in &schedule.token_order {
            let t = round_start + schedule.slot_offset(tx);
            for rx in 1..=3u8 {
                let idx = usize::from(3 * (tx - 1) + rx - 1);
                let link = &links[idx];
                let mut p = idle[idx];
                if let Some(v) = vehicle {
                    p -= attenuation_db(occlusion_depth(link, v, t, config), &config.shadowing);
                }
                if noise.sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    p += noise.sigma * z;
                }
                traces[idx].samples.push(RssiSample { time: t, link_id: link.link_id, rssi: noise.quantize(p) });
            }
        }
    }
    Ok(traces)
}

/// Merges per-link traces into the single time-ordered stream a gateway
/// receives (time, then link id).
pub fn interleave(traces: &[RssiTrace]) -> Vec<RssiSample> {
    let mut all: Vec<RssiSample> = traces.iter().flat_map(|t| t.samples.iter().copied()).collect();
    all.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.link_id.cmp(&b.link_id)));
    all
}

/// Splits a merged stream back into nine per-link traces.
pub fn split_by_link(samples: &[RssiSample]) -> Result<Vec<RssiTrace>> {
    let mut traces: Vec<RssiTrace> = (1..=9u8)
        .map(|id| RssiTrace { link_id: id, samples: Vec::new(), idle_level_true: f64::NAN })
        .collect();
    for s in samples {
        if !(1..=9).contains(&s.link_id) {
            return Err(Error::UnknownLink(s.link_id));
        }
        traces[usize::from(s.link_id - 1)].samples.push(*s);
    }
    Ok(traces)
}

/// Mixes a master seed with a pass identifier (splitmix64 finaliser).
pub fn derive_seed(master: u64, id: u64) -> u64 {
    let mut z = master ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
