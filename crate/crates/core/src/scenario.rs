//! Deployment geometry and ground-truth vehicle fleets.
//!
//! Three transmitter posts stand on one side of the road (y = 0) and three
//! receiver posts on the other (y = road width), at longitudinal positions
//! 0, s and 2s. Every transmitter/receiver pair forms one of nine links,
//! numbered `3 * (tx - 1) + rx`, so the perpendicular ("direct") links are
//! 1, 5 and 9.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ShadowingModel;
use crate::error::{Error, Result};

/// Links whose transmitter and receiver face each other across the road.
pub const DIRECT_LINKS: [u8; 3] = [1, 5, 9];

/// Distance in front of the first crossed link at which a vehicle enters.
pub const ENTRY_GAP: f64 = 0.5;

/// Lowest speed a vehicle may have when it leaves the array.
const MIN_EXIT_SPEED: f64 = 1.0;

/// Normal draws are truncated to this many standard deviations.
pub const NORMAL_TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    pub tx_power_dbm: f64,
    pub carrier_frequency_hz: f64,
    pub antenna_height: f64,
    /// Lateral TX-to-RX separation.
    pub road_width: f64,
    /// Longitudinal spacing between neighbouring posts.
    pub post_spacing: f64,
    /// Nominal lane centreline, measured from the transmitter side.
    pub lane_offset: f64,
    /// Full token rounds per second; each round samples all nine links once.
    pub sample_rounds_per_second: f64,
    pub shadowing: ShadowingModel,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 2.5,
            carrier_frequency_hz: 2.4e9,
            antenna_height: 1.0,
            road_width: 7.0,
            post_spacing: 5.0,
            lane_offset: 3.5,
            sample_rounds_per_second: 1000.0 / 9.0,
            shadowing: ShadowingModel::default(),
        }
    }
}

impl DeploymentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.antenna_height > 0.0) {
            return bad("antenna_height must be > 0");
        }
        if !(self.road_width > 0.0) {
            return bad("road_width must be > 0");
        }
        if !(self.post_spacing > 0.0) {
            return bad("post_spacing must be > 0");
        }
        if !(self.lane_offset > 0.0 && self.lane_offset < self.road_width) {
            return bad("lane_offset must lie strictly between 0 and road_width");
        }
        if !(self.carrier_frequency_hz > 0.0) {
            return bad("carrier_frequency_hz must be > 0");
        }
        if !(self.sample_rounds_per_second > 0.0) {
            return bad("sample_rounds_per_second must be > 0");
        }
        if !self.tx_power_dbm.is_finite() {
            return bad("tx_power_dbm must be finite");
        }
        self.shadowing.validate()
    }

    /// Time for one full token round.
    pub fn round_duration(&self) -> f64 {
        1.0 / self.sample_rounds_per_second
    }

    /// Longitudinal position of the last post row.
    pub fn array_span(&self) -> f64 {
        2.0 * self.post_spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub link_id: u8,
    pub tx_index: u8,
    pub rx_index: u8,
    pub tx_position: [f64; 3],
    pub rx_position: [f64; 3],
    pub is_direct: bool,
    /// x where the line of sight crosses the nominal lane centreline.
    pub longitudinal_ref: f64,
}

impl LinkGeometry {
    pub fn distance(&self) -> f64 {
        let [dx, dy, dz] = [0, 1, 2].map(|i| self.rx_position[i] - self.tx_position[i]);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// x coordinate of the line of sight at lateral position `y`.
    pub fn crossing_x(&self, y: f64) -> f64 {
        let [tx, ty, _] = self.tx_position;
        let [rx, ry, _] = self.rx_position;
        tx + (rx - tx) * (y - ty) / (ry - ty)
    }

    /// Height of the line of sight at lateral position `y`.
    pub fn crossing_z(&self, y: f64) -> f64 {
        let [_, ty, tz] = self.tx_position;
        let [_, ry, rz] = self.rx_position;
        tz + (rz - tz) * (y - ty) / (ry - ty)
    }
}

/// Builds the nine links in `link_id` order.
pub fn build_links(config: &DeploymentConfig) -> Result<Vec<LinkGeometry>> {
    config.validate()?;
    let s = config.post_spacing;
    let h = config.antenna_height;
    let mut links = Vec::with_capacity(9);
    for tx in 1..=3u8 {
        for rx in 1..=3u8 {
            let tx_x = f64::from(tx - 1) * s;
            let rx_x = f64::from(rx - 1) * s;
            let mut link = LinkGeometry {
                link_id: 3 * (tx - 1) + rx,
                tx_index: tx,
                rx_index: rx,
                tx_position: [tx_x, 0.0, h],
                rx_position: [rx_x, config.road_width, h],
                is_direct: tx == rx,
                longitudinal_ref: 0.0,
            };
            link.longitudinal_ref = if link.is_direct {
                tx_x
            } else {
                link.crossing_x(config.lane_offset)
            };
            links.push(link);
        }
    }
    Ok(links)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 2] = [VehicleClass::Car, VehicleClass::Truck];

    pub fn index(self) -> usize {
        match self {
            VehicleClass::Car => 0,
            VehicleClass::Truck => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            VehicleClass::Car
        } else {
            VehicleClass::Truck
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Truck => "truck",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "car" => Ok(VehicleClass::Car),
            "truck" => Ok(VehicleClass::Truck),
            other => Err(format!("unknown vehicle class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One piece of a vehicle's side silhouette, front to back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleProfile {
    pub vehicle_id: u64,
    pub class: VehicleClass,
    pub length: f64,
    pub silhouette: Vec<Segment>,
    pub lateral_offset: f64,
    pub entry_velocity: f64,
    pub acceleration: f64,
    pub entry_time: f64,
    pub direction: Direction,
}

impl VehicleProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(format!("vehicle {}: {what}", self.vehicle_id)));
        if self.silhouette.is_empty() {
            return bad("empty silhouette".into());
        }
        if self.silhouette.iter().any(|s| !(s.height > 0.0) || !(s.length > 0.0)) {
            return bad("silhouette segments need positive length and height".into());
        }
        let total: f64 = self.silhouette.iter().map(|s| s.length).sum();
        if (total - self.length).abs() > 1e-9 * self.length.max(1.0) {
            return bad(format!("segment lengths sum to {total}, length is {}", self.length));
        }
        if !(self.entry_velocity > 0.0) {
            return bad("entry_velocity must be > 0".into());
        }
        if !self.acceleration.is_finite() || !self.entry_time.is_finite() {
            return bad("non-finite kinematics".into());
        }
        Ok(())
    }

    /// Silhouette height at `offset` metres behind the front, or `None` off the body.
    pub fn height_at(&self, offset: f64) -> Option<f64> {
        if !(0.0..=self.length).contains(&offset) {
            return None;
        }
        let mut start = 0.0;
        for seg in &self.silhouette {
            let end = start + seg.length;
            if offset < end {
                return Some(seg.height);
            }
            start = end;
        }
        self.silhouette.last().map(|s| s.height)
    }

    pub fn max_height(&self) -> f64 {
        self.silhouette.iter().map(|s| s.height).fold(0.0, f64::max)
    }

    /// Speed at time `t` (clamped at zero if the vehicle would stop).
    pub fn velocity_at(&self, t: f64) -> f64 {
        (self.entry_velocity + self.acceleration * (t - self.entry_time)).max(0.0)
    }

    /// Time after entry at which the vehicle has covered `distance` metres.
    pub fn time_to_travel(&self, distance: f64) -> Option<f64> {
        let (v, a) = (self.entry_velocity, self.acceleration);
        if a == 0.0 {
            return Some(distance / v);
        }
        let disc = v * v + 2.0 * a * distance;
        if disc < 0.0 {
            return None;
        }
        // Rationalised root; stable for small |a|.
        Some(2.0 * distance / (v + disc.sqrt()))
    }
}

/// Signed displacement of the vehicle front since `entry_time`.
pub fn position_at(vehicle: &VehicleProfile, t: f64) -> f64 {
    let dt = t - vehicle.entry_time;
    vehicle.direction.sign() * (vehicle.entry_velocity * dt + 0.5 * vehicle.acceleration * dt * dt)
}

/// Front x at entry: just before the first link the vehicle meets.
pub fn entry_x(direction: Direction, config: &DeploymentConfig) -> f64 {
    match direction {
        Direction::Forward => -ENTRY_GAP,
        Direction::Reverse => config.array_span() + ENTRY_GAP,
    }
}

/// Absolute x of the vehicle front at time `t`.
pub fn front_x(vehicle: &VehicleProfile, t: f64, config: &DeploymentConfig) -> f64 {
    entry_x(vehicle.direction, config) + position_at(vehicle, t)
}

/// Time at which the vehicle rear has passed every link crossing.
pub fn clear_time(vehicle: &VehicleProfile, config: &DeploymentConfig) -> Result<f64> {
    let distance = config.array_span() + ENTRY_GAP + vehicle.length;
    vehicle
        .time_to_travel(distance)
        .map(|dt| vehicle.entry_time + dt)
        .ok_or(Error::VehicleStalls { vehicle_id: vehicle.vehicle_id })
}

/// A scalar distribution used by [`FleetSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Constant(f64),
    Uniform { low: f64, high: f64 },
    /// Truncated at `NORMAL_TRUNCATION` standard deviations.
    Normal { mean: f64, std: f64 },
}

impl Distribution {
    /// Closed support of the distribution.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Constant(c) => (c, c),
            Distribution::Uniform { low, high } => (low, high),
            Distribution::Normal { mean, std } => {
                (mean - NORMAL_TRUNCATION * std, mean + NORMAL_TRUNCATION * std)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant(c) => c,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
            Distribution::Normal { mean, .. } => mean,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let reason = match *self {
            Distribution::Constant(c) if !c.is_finite() => Some("non-finite constant"),
            Distribution::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low <= high) => {
                Some("uniform needs finite low <= high")
            }
            Distribution::Normal { mean, std } if !(mean.is_finite() && std.is_finite() && std >= 0.0) => {
                Some("normal needs finite mean and std >= 0")
            }
            _ => None,
        };
        match reason {
            Some(r) => Err(Error::InvalidDistribution { field: field.into(), reason: r.into() }),
            None => Ok(()),
        }
    }

    fn validate_positive(&self, field: &str) -> Result<()> {
        self.validate(field)?;
        let (lo, _) = self.support();
        if lo <= 0.0 {
            return Err(Error::InvalidDistribution {
                field: field.into(),
                reason: format!("support reaches {lo}, values must be positive"),
            });
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant(c) => c,
            Distribution::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    rng.random_range(low..high)
                }
            }
            Distribution::Normal { mean, std } => {
                if std == 0.0 {
                    return mean;
                }
                loop {
                    let z: f64 = StandardNormal.sample(rng);
                    if z.abs() <= NORMAL_TRUNCATION {
                        return mean + std * z;
                    }
                }
            }
        }
    }
}

/// One silhouette segment in a class template: a share of the vehicle length
/// and a height distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub fraction: f64,
    pub height: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassModel {
    pub length: Distribution,
    pub segments: Vec<SegmentSpec>,
    pub velocity: Distribution,
    pub acceleration: Distribution,
    pub lateral_offset: Distribution,
}

impl ClassModel {
    pub fn default_car() -> Self {
        let normal = |mean, std| Distribution::Normal { mean, std };
        Self {
            length: normal(4.5, 0.3),
            segments: vec![
                SegmentSpec { fraction: 0.25, height: normal(0.8, 0.05) },
                SegmentSpec { fraction: 0.5, height: normal(1.5, 0.1) },
                SegmentSpec { fraction: 0.25, height: normal(0.9, 0.05) },
            ],
            velocity: normal(20.0, 3.0),
            acceleration: Distribution::Constant(0.0),
            lateral_offset: normal(3.5, 0.2),
        }
    }

    pub fn default_truck() -> Self {
        let normal = |mean, std| Distribution::Normal { mean, std };
        Self {
            length: normal(12.0, 2.0),
            segments: vec![
                SegmentSpec { fraction: 0.2, height: normal(2.5, 0.15) },
                SegmentSpec { fraction: 0.8, height: normal(3.5, 0.2) },
            ],
            velocity: normal(18.0, 2.0),
            acceleration: Distribution::Constant(0.0),
            lateral_offset: normal(3.5, 0.2),
        }
    }

    fn validate(&self, class: &str) -> Result<()> {
        self.length.validate_positive(&format!("{class}.length"))?;
        self.velocity.validate_positive(&format!("{class}.velocity"))?;
        self.lateral_offset.validate_positive(&format!("{class}.lateral_offset"))?;
        self.acceleration.validate(&format!("{class}.acceleration"))?;
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig(format!("{class}: silhouette needs at least one segment")));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.fraction > 0.0) {
                return Err(Error::InvalidConfig(format!("{class}.segments[{i}]: fraction must be > 0")));
            }
            seg.height.validate_positive(&format!("{class}.segments[{i}].height"))?;
        }
        let total: f64 = self.segments.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("{class}: segment fractions sum to {total}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetSpec {
    pub truck_fraction: f64,
    /// Share of wrong-way (reverse) passes.
    pub reverse_fraction: f64,
    pub car: ClassModel,
    pub truck: ClassModel,
    pub rng_seed: u64,
    /// Entry time of the first vehicle.
    pub first_entry: f64,
    /// Time between consecutive entries; passes never overlap.
    pub headway: f64,
    /// Distance over which kinematics must stay valid (no stopping).
    pub travel_distance: f64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self {
            truck_fraction: 0.3,
            reverse_fraction: 0.0,
            car: ClassModel::default_car(),
            truck: ClassModel::default_truck(),
            rng_seed: 0,
            first_entry: 2.0,
            headway: 30.0,
            travel_distance: 40.0,
        }
    }
}

impl FleetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.truck_fraction) {
            return Err(Error::InvalidConfig("truck_fraction must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.reverse_fraction) {
            return Err(Error::InvalidConfig("reverse_fraction must lie in [0, 1]".into()));
        }
        if !(self.headway > 0.0) || !(self.first_entry >= 0.0) || !(self.travel_distance > 0.0) {
            return Err(Error::InvalidConfig("headway and travel_distance must be > 0, first_entry >= 0".into()));
        }
        self.car.validate("car")?;
        self.truck.validate("truck")
    }

    pub fn class_model(&self, class: VehicleClass) -> &ClassModel {
        match class {
            VehicleClass::Car => &self.car,
            VehicleClass::Truck => &self.truck,
        }
    }
}

/// Draws `n` vehicles. The result depends only on `(spec, n)`.
pub fn sample_fleet(spec: &FleetSpec, n: usize) -> Result<Vec<VehicleProfile>> {
    if n == 0 {
        return Err(Error::InvalidConfig("fleet size must be >= 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut fleet = Vec::with_capacity(n);
    for i in 0..n {
        let class = if rng.random::<f64>() < spec.truck_fraction {
            VehicleClass::Truck
        } else {
            VehicleClass::Car
        };
        let direction = if rng.random::<f64>() < spec.reverse_fraction {
            Direction::Reverse
        } else {
            Direction::Forward
        };
        let model = spec.class_model(class);
        let length = model.length.sample(&mut rng);
        let silhouette = model
            .segments
            .iter()
            .map(|seg| Segment { length: seg.fraction * length, height: seg.height.sample(&mut rng) })
            .collect::<Vec<_>>();
        let entry_velocity = model.velocity.sample(&mut rng);
        let acceleration = sample_feasible_acceleration(model, entry_velocity, spec.travel_distance, &mut rng)?;
        let lateral_offset = model.lateral_offset.sample(&mut rng);
        let mut vehicle = VehicleProfile {
            vehicle_id: i as u64,
            class,
            length,
            silhouette,
            lateral_offset,
            entry_velocity,
            acceleration,
            entry_time: spec.first_entry + i as f64 * spec.headway,
            direction,
        };
        // Fractions sum to 1 only up to rounding.
        vehicle.length = vehicle.silhouette.iter().map(|s| s.length).sum();
        vehicle.validate()?;
        fleet.push(vehicle);
    }
    Ok(fleet)
}

fn sample_feasible_acceleration<R: Rng>(model: &ClassModel, v0: f64, distance: f64, rng: &mut R) -> Result<f64> {
    for _ in 0..10_000 {
        let a = model.acceleration.sample(rng);
        if v0 * v0 + 2.0 * a * distance >= MIN_EXIT_SPEED * MIN_EXIT_SPEED {
            return Ok(a);
        }
    }
    Err(Error::InvalidDistribution {
        field: "acceleration".into(),
        reason: format!("no draw keeps a vehicle entering at {v0} m/s moving for {distance} m"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn car(v: f64, a: f64, direction: Direction) -> VehicleProfile {
        VehicleProfile {
            vehicle_id: 0,
            class: VehicleClass::Car,
            length: 4.0,
            silhouette: vec![Segment { length: 4.0, height: 1.5 }],
            lateral_offset: 3.5,
            entry_velocity: v,
            acceleration: a,
            entry_time: 2.0,
            direction,
        }
    }

    #[test]
    fn link_numbering_and_direct_set() {
        let links = build_links(&DeploymentConfig::default()).unwrap();
        assert_eq!(links.len(), 9);
        for (i, l) in links.iter().enumerate() {
            assert_eq!(l.link_id as usize, i + 1);
            assert_eq!(l.link_id, 3 * (l.tx_index - 1) + l.rx_index);
            assert_eq!(l.tx_position[2], 1.0);
            assert_eq!(l.rx_position[2], 1.0);
        }
        let direct: Vec<u8> = links.iter().filter(|l| l.is_direct).map(|l| l.link_id).collect();
        assert_eq!(direct, DIRECT_LINKS);
    }

    #[test]
    fn longitudinal_refs() {
        let links = build_links(&DeploymentConfig::default()).unwrap();
        assert_eq!(links[0].longitudinal_ref, 0.0);
        assert_eq!(links[4].longitudinal_ref, 5.0);
        assert_eq!(links[8].longitudinal_ref, 10.0);
        // (0,0) -> (5,7) at y = 3.5
        assert_abs_diff_eq!(links[1].longitudinal_ref, 5.0 * 3.5 / 7.0, epsilon = 1e-12);
        // (0,0) -> (10,7)
        assert_abs_diff_eq!(links[2].longitudinal_ref, 5.0, epsilon = 1e-12);
        // (5,0) -> (0,7)
        assert_abs_diff_eq!(links[3].longitudinal_ref, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        let cfg = DeploymentConfig { lane_offset: 7.0, ..Default::default() };
        assert!(build_links(&cfg).is_err());
        let cfg = DeploymentConfig { antenna_height: 0.0, ..Default::default() };
        assert!(build_links(&cfg).is_err());
    }

    #[test]
    fn kinematics() {
        assert_abs_diff_eq!(position_at(&car(10.0, 0.0, Direction::Forward), 3.0), 10.0);
        assert_abs_diff_eq!(position_at(&car(10.0, 2.0, Direction::Forward), 3.0), 11.0);
        assert_abs_diff_eq!(position_at(&car(10.0, 0.0, Direction::Reverse), 3.0), -10.0);
        let v = car(10.0, 2.0, Direction::Forward);
        assert_abs_diff_eq!(v.time_to_travel(11.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(car(2.0, -1.0, Direction::Forward).time_to_travel(10.0).is_none());
    }

    #[test]
    fn silhouette_lookup() {
        let mut v = car(10.0, 0.0, Direction::Forward);
        v.silhouette = vec![Segment { length: 1.0, height: 0.8 }, Segment { length: 3.0, height: 1.5 }];
        assert_eq!(v.height_at(0.5), Some(0.8));
        assert_eq!(v.height_at(1.0), Some(1.5));
        assert_eq!(v.height_at(4.0), Some(1.5));
        assert_eq!(v.height_at(-0.1), None);
        assert_eq!(v.height_at(4.1), None);
    }

    #[test]
    fn all_cars_when_mix_is_zero() {
        let spec = FleetSpec { truck_fraction: 0.0, ..Default::default() };
        let fleet = sample_fleet(&spec, 10).unwrap();
        assert!(fleet.iter().all(|v| v.class == VehicleClass::Car));
    }

    #[test]
    fn fleet_is_deterministic() {
        let spec = FleetSpec { rng_seed: 99, ..Default::default() };
        assert_eq!(sample_fleet(&spec, 50).unwrap(), sample_fleet(&spec, 50).unwrap());
        let other = FleetSpec { rng_seed: 100, ..Default::default() };
        assert_ne!(sample_fleet(&spec, 50).unwrap(), sample_fleet(&other, 50).unwrap());
    }

    #[test]
    fn truck_count_within_binomial_bound() {
        let spec = FleetSpec::default();
        let n = 3000;
        let fleet = sample_fleet(&spec, n).unwrap();
        let trucks = fleet.iter().filter(|v| v.class == VehicleClass::Truck).count() as f64;
        let p = spec.truck_fraction;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((trucks - mean).abs() <= 3.0 * sigma, "{trucks} vs {mean} ± {}", 3.0 * sigma);
    }

    #[test]
    fn fleet_respects_invariants() {
        let spec = FleetSpec {
            car: ClassModel { acceleration: Distribution::Normal { mean: 0.0, std: 1.0 }, ..ClassModel::default_car() },
            truck: ClassModel { acceleration: Distribution::Normal { mean: 0.0, std: 1.0 }, ..ClassModel::default_truck() },
            reverse_fraction: 0.5,
            ..Default::default()
        };
        let cfg = DeploymentConfig::default();
        for v in sample_fleet(&spec, 500).unwrap() {
            v.validate().unwrap();
            assert!(clear_time(&v, &cfg).is_ok());
            let sum: f64 = v.silhouette.iter().map(|s| s.length).sum();
            assert_eq!(sum, v.length);
        }
    }

    #[test]
    fn rejects_distributions_reaching_non_positive_values() {
        let mut spec = FleetSpec::default();
        spec.car.length = Distribution::Normal { mean: 1.0, std: 0.5 };
        assert!(matches!(sample_fleet(&spec, 1), Err(Error::InvalidDistribution { .. })));
        let mut spec = FleetSpec::default();
        spec.truck.velocity = Distribution::Uniform { low: 0.0, high: 10.0 };
        assert!(sample_fleet(&spec, 1).is_err());
        assert!(sample_fleet(&FleetSpec::default(), 0).is_err());
    }
}
