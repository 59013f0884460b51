//! Attenuation-event detection and the fingerprint feature set.
//!
//! A pass is summarised by `{v, l, t_drop, b, m, m_l, n}`: velocity from the
//! drop-onset times of the three direct links, length from velocity and the
//! direct-link drop durations, and per-event shape statistics (duration,
//! kurtosis, global and local magnitude, count of deep local minima).

use serde::{Deserialize, Serialize};

use crate::channel::{RssiSample, RssiTrace};
use crate::error::{Error, Result};
use crate::scenario::{Direction, LinkGeometry, DIRECT_LINKS};

/// Local minima deeper than this share of the global magnitude are counted.
pub const DEEP_MINIMA_FACTOR: f64 = 0.8;

/// Default length of the resampled raw-data representation.
pub const RAW_VECTOR_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// dB below idle that counts as a drop.
    pub drop_threshold: f64,
    /// Consecutive samples needed to open or close an event.
    pub min_consecutive: usize,
    /// Leading span used for the idle estimate, seconds.
    pub idle_window: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { drop_threshold: 6.0, min_consecutive: 3, idle_window: 1.0 }
    }
}

impl DetectorConfig {
    pub fn deep_minima_factor(&self) -> f64 {
        DEEP_MINIMA_FACTOR
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drop_threshold > 0.0) || self.min_consecutive < 1 || !(self.idle_window > 0.0) {
            return Err(Error::InvalidConfig(
                "detector needs drop_threshold > 0, min_consecutive >= 1, idle_window > 0".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn is_drop(&self, rssi: i32, idle: f64) -> bool {
        f64::from(rssi) < idle - self.drop_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationEvent {
    pub link_id: u8,
    pub t_start: f64,
    pub t_end: f64,
    pub t_drop: f64,
    pub idle_level: f64,
    pub min_rssi: f64,
    pub magnitude: f64,
    pub local_magnitude: f64,
    pub deep_minima: u32,
    pub bulge: f64,
    /// Samples from onset through the first recovered sample.
    pub samples: Vec<RssiSample>,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of the samples in the leading idle window.
pub fn estimate_idle(trace: &RssiTrace, cfg: &DetectorConfig) -> Result<f64> {
    let unusable = |reason: &str| Error::UnusableTrace { link_id: trace.link_id, reason: reason.into() };
    let first = trace.samples.first().ok_or_else(|| unusable("empty trace"))?;
    let last = trace.samples.last().unwrap_or(first);
    if last.time - first.time < cfg.idle_window {
        return Err(unusable("shorter than the idle window"));
    }
    let mut window: Vec<f64> = trace
        .samples
        .iter()
        .take_while(|s| s.time - first.time < cfg.idle_window)
        .map(|s| f64::from(s.rssi))
        .collect();
    Ok(median(&mut window))
}

/// Finds the first attenuation event of a trace.
///
/// Onset is the first sample of a run of `k` drops; the event ends at the
/// first sample of the next run of `k` recovered samples. Returns `Ok(None)`
/// when the trace never drops, and an incomplete-pass error when the trace
/// ends before the event closes.
pub fn detect_event(trace: &RssiTrace, idle: f64, cfg: &DetectorConfig) -> Result<Option<AttenuationEvent>> {
    cfg.validate()?;
    let k = cfg.min_consecutive;
    let s = &trace.samples;
    let truncated = || Error::IncompletePass(format!("event on link {} runs past the end of the trace", trace.link_id));

    let mut onset = None;
    let mut run = 0;
    for (i, sample) in s.iter().enumerate() {
        if cfg.is_drop(sample.rssi, idle) {
            run += 1;
            if run == k {
                onset = Some(i + 1 - k);
                break;
            }
        } else {
            run = 0;
        }
    }
    let onset = match onset {
        Some(i) => i,
        None if run > 0 => return Err(truncated()),
        None => return Ok(None),
    };

    let mut end = None;
    let mut run = 0;
    for (i, sample) in s.iter().enumerate().skip(onset + k) {
        if cfg.is_drop(sample.rssi, idle) {
            run = 0;
        } else {
            run += 1;
            if run == k {
                end = Some(i + 1 - k);
                break;
            }
        }
    }
    let end = end.ok_or_else(truncated)?;
    summarize_event(trace.link_id, idle, s[onset..=end].to_vec()).map(Some)
}

/// Computes the event statistics for samples spanning `[onset, end]`.
pub fn summarize_event(link_id: u8, idle: f64, samples: Vec<RssiSample>) -> Result<AttenuationEvent> {
    if samples.len() < 2 {
        return Err(Error::DegenerateEvent(format!("link {link_id}: fewer than two samples")));
    }
    // Levels relative to idle keep every statistic exactly offset-invariant.
    let relative: Vec<f64> = samples.iter().map(|s| f64::from(s.rssi) - idle).collect();
    let min = relative.iter().copied().fold(f64::INFINITY, f64::min);
    let max = relative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let magnitude = -min;
    let deep = count_deep_minima(&relative, -DEEP_MINIMA_FACTOR * magnitude);
    let b = bulge(&relative)?;
    let t_start = samples[0].time;
    let t_end = samples[samples.len() - 1].time;
    Ok(AttenuationEvent {
        link_id,
        t_start,
        t_end,
        t_drop: t_end - t_start,
        idle_level: idle,
        min_rssi: idle + min,
        magnitude,
        local_magnitude: max - min,
        deep_minima: deep,
        bulge: b,
        samples,
    })
}

/// Counts local minima (plateaus merged) at or below `threshold`.
pub fn count_deep_minima(values: &[f64], threshold: f64) -> u32 {
    let mut count = 0;
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == v {
            j += 1;
        }
        let left = if i > 0 { values[i - 1] } else { f64::INFINITY };
        let right = if j + 1 < values.len() { values[j + 1] } else { f64::INFINITY };
        if left > v && right > v && v <= threshold {
            count += 1;
        }
        i = j + 1;
    }
    count
}

/// Fourth standardised moment with the population standard deviation.
pub fn bulge(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::DegenerateEvent("bulge needs at least two samples".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::DegenerateEvent("constant samples have no bulge".into()));
    }
    Ok(m4 / (m2 * m2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    pub speed: f64,
    pub direction: Direction,
}

/// Mean of the three pairwise speeds between direct-link drop onsets.
///
/// `events` are the events of links 1, 5 and 9 in that order.
pub fn estimate_velocity(events: [&AttenuationEvent; 3], links: &[LinkGeometry]) -> Result<VelocityEstimate> {
    let onsets = events.map(|e| e.t_start);
    let refs = events.map(|e| longitudinal_ref(links, e.link_id));
    let [r1, r5, r9] = refs;
    let (r1, r5, r9) = (r1?, r5?, r9?);
    let [t1, t5, t9] = onsets;
    if t1 == t5 || t1 == t9 || t5 == t9 {
        return Err(Error::UnorderedOnsets(onsets));
    }
    let direction = if t1 < t5 && t5 < t9 {
        Direction::Forward
    } else if t1 > t5 && t5 > t9 {
        Direction::Reverse
    } else {
        return Err(Error::UnorderedOnsets(onsets));
    };
    let pair = |ra: f64, rb: f64, ta: f64, tb: f64| (ra - rb).abs() / (ta - tb).abs();
    let speed = (pair(r1, r5, t1, t5) + pair(r1, r9, t1, t9) + pair(r5, r9, t5, t9)) / 3.0;
    Ok(VelocityEstimate { speed, direction })
}

fn longitudinal_ref(links: &[LinkGeometry], link_id: u8) -> Result<f64> {
    links
        .iter()
        .find(|l| l.link_id == link_id)
        .map(|l| l.longitudinal_ref)
        .ok_or(Error::UnknownLink(link_id))
}

pub fn estimate_length(v_est: f64, t_drops: [f64; 3]) -> f64 {
    v_est / 3.0 * (t_drops[0] + t_drops[1] + t_drops[2])
}

/// Where the per-event scalars of a feature vector come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarSource {
    /// Taken from a single link (link 1 by default).
    Reference(u8),
    /// Averaged over the three direct links.
    DirectMean,
}

impl Default for ScalarSource {
    fn default() -> Self {
        ScalarSource::Reference(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub v_est: f64,
    pub l_est: f64,
    pub t_drop: f64,
    pub bulge: f64,
    pub magnitude: f64,
    pub local_magnitude: f64,
    /// Integral except in `DirectMean` mode.
    pub deep_minima: f64,
    pub vehicle_id: Option<u64>,
    pub links: Vec<u8>,
}

impl FeatureVector {
    pub const DIM: usize = 7;
    pub const NAMES: [&'static str; 7] = ["v_est", "l_est", "t_drop", "b", "m", "m_l", "n"];

    pub fn to_array(&self) -> [f64; 7] {
        [self.v_est, self.l_est, self.t_drop, self.bulge, self.magnitude, self.local_magnitude, self.deep_minima]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    fn from_event(v_est: f64, l_est: f64, e: &AttenuationEvent) -> Self {
        Self {
            v_est,
            l_est,
            t_drop: e.t_drop,
            bulge: e.bulge,
            magnitude: e.magnitude,
            local_magnitude: e.local_magnitude,
            deep_minima: f64::from(e.deep_minima),
            vehicle_id: None,
            links: vec![e.link_id],
        }
    }
}

/// Events of links 1, 5, 9 out of a per-link slot array.
fn direct_events(events: &[Option<AttenuationEvent>]) -> Result<[&AttenuationEvent; 3]> {
    let get = |id: u8| {
        events
            .iter()
            .flatten()
            .find(|e| e.link_id == id)
            .ok_or_else(|| Error::IncompletePass(format!("no attenuation event on direct link {id}")))
    };
    Ok([get(DIRECT_LINKS[0])?, get(DIRECT_LINKS[1])?, get(DIRECT_LINKS[2])?])
}

/// Builds the pass feature vector from detected events.
pub fn assemble_features(
    events: &[Option<AttenuationEvent>],
    links: &[LinkGeometry],
    source: ScalarSource,
) -> Result<(FeatureVector, Direction)> {
    let direct = direct_events(events)?;
    let velocity = estimate_velocity(direct, links)?;
    let l_est = estimate_length(velocity.speed, direct.map(|e| e.t_drop));
    let fv = match source {
        ScalarSource::Reference(id) => {
            let e = events
                .iter()
                .flatten()
                .find(|e| e.link_id == id)
                .ok_or_else(|| Error::IncompletePass(format!("no attenuation event on reference link {id}")))?;
            FeatureVector::from_event(velocity.speed, l_est, e)
        }
        ScalarSource::DirectMean => {
            let mean = |f: fn(&AttenuationEvent) -> f64| direct.iter().map(|e| f(e)).sum::<f64>() / 3.0;
            FeatureVector {
                v_est: velocity.speed,
                l_est,
                t_drop: mean(|e| e.t_drop),
                bulge: mean(|e| e.bulge),
                magnitude: mean(|e| e.magnitude),
                local_magnitude: mean(|e| e.local_magnitude),
                deep_minima: mean(|e| f64::from(e.deep_minima)),
                vehicle_id: None,
                links: DIRECT_LINKS.to_vec(),
            }
        }
    };
    if !fv.is_finite() || !(fv.v_est > 0.0) || !(fv.l_est > 0.0) {
        return Err(Error::DegenerateEvent(format!("non-physical feature vector {:?}", fv.to_array())));
    }
    Ok((fv, velocity.direction))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVector {
    pub link_id: u8,
    pub values: Vec<f64>,
}

/// Resamples the event onto `len` uniform points over `[t_start, t_end]` by
/// linear interpolation, then z-normalises (population std).
pub fn raw_vector(event: &AttenuationEvent, len: usize) -> Result<RawVector> {
    let s = &event.samples;
    if s.len() < 2 || len < 2 {
        return Err(Error::DegenerateEvent("raw vector needs at least two samples and points".into()));
    }
    let (t0, t1) = (s[0].time, s[s.len() - 1].time);
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::DegenerateEvent("event has zero duration".into()));
    }
    let level = |i: usize| f64::from(s[i].rssi) - event.idle_level;
    let mut values = Vec::with_capacity(len);
    let mut seg = 0;
    for j in 0..len {
        let u = if j + 1 == len { t1 } else { t0 + j as f64 * span / (len - 1) as f64 };
        while seg + 2 < s.len() && s[seg + 1].time <= u {
            seg += 1;
        }
        let (ta, tb) = (s[seg].time, s[seg + 1].time);
        let frac = ((u - ta) / (tb - ta)).clamp(0.0, 1.0);
        values.push(level(seg) + (level(seg + 1) - level(seg)) * frac);
    }
    let n = len as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateEvent(format!("link {}: constant event", event.link_id)));
    }
    let std = var.sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
    Ok(RawVector { link_id: event.link_id, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub detector: DetectorConfig,
    pub scalars: ScalarSource,
    /// Link whose event feeds the raw-data representation.
    pub raw_link: u8,
    pub raw_length: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { detector: DetectorConfig::default(), scalars: ScalarSource::default(), raw_link: 1, raw_length: RAW_VECTOR_LEN }
    }
}

/// Everything the batch path derives from one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PassExtraction {
    pub features: FeatureVector,
    pub direction: Direction,
    /// One slot per link, in link order.
    pub events: Vec<Option<AttenuationEvent>>,
    /// Link-local scalars with the shared velocity and length, per link.
    pub link_features: Vec<Option<FeatureVector>>,
    pub raw: RawVector,
}

/// Batch extraction over the nine traces of one pass.
pub fn extract_pass(traces: &[RssiTrace], links: &[LinkGeometry], cfg: &ExtractConfig) -> Result<PassExtraction> {
    cfg.detector.validate()?;
    let mut events = Vec::with_capacity(traces.len());
    for trace in traces {
        let is_direct = DIRECT_LINKS.contains(&trace.link_id);
        let detected = estimate_idle(trace, &cfg.detector).and_then(|idle| detect_event(trace, idle, &cfg.detector));
        match detected {
            Ok(e) => events.push(e),
            Err(e) if is_direct => return Err(e),
            Err(_) => events.push(None),
        }
    }
    let (features, direction) = assemble_features(&events, links, cfg.scalars)?;
    let link_features = events
        .iter()
        .map(|e| e.as_ref().map(|e| FeatureVector::from_event(features.v_est, features.l_est, e)))
        .collect();
    let raw_event = events
        .iter()
        .flatten()
        .find(|e| e.link_id == cfg.raw_link)
        .ok_or_else(|| Error::IncompletePass(format!("no attenuation event on raw-data link {}", cfg.raw_link)))?;
    let raw = raw_vector(raw_event, cfg.raw_length)?;
    Ok(PassExtraction { features, direction, events, link_features, raw })
}

/// Feature vector for one link's event alongside shared pass estimates.
pub fn link_feature_vector(v_est: f64, l_est: f64, event: &AttenuationEvent) -> FeatureVector {
    FeatureVector::from_event(v_est, l_est, event)
}
