//! Online classification over the merged sample stream of all nine links.
//!
//! Each link runs a small state machine: it learns an idle level from the
//! leading `idle_window` of every idle segment, then watches for `k`
//! consecutive drops (onset) and `k` consecutive recovered samples (end).
//! The detector and the event statistics are the batch ones, sample for
//! sample, so a pass streamed through the gateway yields the same features
//! as batch extraction of its traces.
//!
//! A pass opens at the first direct-link onset once every link is back to
//! idle, and is classified as soon as the third direct-link event closes.

use std::collections::VecDeque;
use std::mem;

use serde::{Deserialize, Serialize};

use crate::channel::RssiSample;
use crate::error::{Error, Result};
use crate::features::{
    assemble_features, median, raw_vector, summarize_event, AttenuationEvent, ExtractConfig, FeatureVector,
    ScalarSource,
};
use crate::learn::{Label, Representation, TrainedModel};
use crate::scenario::{Direction, LinkGeometry, DIRECT_LINKS};

/// A per-link gap longer than this many rounds restarts idle learning.
pub const DISCONTINUITY_ROUNDS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayConfig {
    pub extract: ExtractConfig,
    pub round_duration: f64,
    /// Events longer than this are dropped, bounding the per-link buffer.
    pub max_event_duration: f64,
    /// Open passes not completed within this many seconds are abandoned.
    pub pass_timeout: f64,
}

impl GatewayConfig {
    pub fn new(extract: ExtractConfig, round_duration: f64) -> Self {
        Self { extract, round_duration, max_event_duration: 10.0, pass_timeout: 15.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.extract.detector.validate()?;
        if !(self.round_duration > 0.0) || !(self.max_event_duration > 0.0) || !(self.pass_timeout > 0.0) {
            return Err(Error::InvalidConfig("gateway durations must be positive".into()));
        }
        Ok(())
    }

    fn max_event_samples(&self) -> usize {
        (self.max_event_duration / self.round_duration).ceil() as usize + self.extract.detector.min_consecutive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub pass_id: u64,
    /// Stream time of the sample that completed the pass.
    pub timestamp: f64,
    pub label: Label,
    pub features: FeatureVector,
    pub direction: Direction,
    /// Seconds from the last direct-link event end to emission.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub pass_id: Option<u64>,
    pub time: f64,
    pub reason: String,
}

#[derive(Debug)]
enum Phase {
    Learning { window: Vec<RssiSample> },
    Armed { idle: f64, run: Vec<RssiSample> },
    InEvent { idle: f64, samples: Vec<RssiSample>, recovered: usize },
}

impl Phase {
    fn buffered(&self) -> usize {
        match self {
            Phase::Learning { window } => window.len(),
            Phase::Armed { run, .. } => run.len(),
            Phase::InEvent { samples, .. } => samples.len(),
        }
    }
}

enum LinkOutput {
    Onset,
    Closed(AttenuationEvent),
    Aborted(String),
}

#[derive(Debug)]
struct LinkState {
    link_id: u8,
    last_time: Option<f64>,
    phase: Phase,
}

impl LinkState {
    fn in_event(&self) -> bool {
        matches!(self.phase, Phase::InEvent { .. })
    }

    fn feed(&mut self, sample: RssiSample, cfg: &GatewayConfig, out: &mut Vec<LinkOutput>) -> Result<()> {
        let det = &cfg.extract.detector;
        let k = det.min_consecutive;
        let mut queue = VecDeque::from([sample]);
        while let Some(s) = queue.pop_front() {
            match &mut self.phase {
                Phase::Learning { window } => {
                    if window.first().is_none_or(|f| s.time - f.time < det.idle_window) {
                        window.push(s);
                        continue;
                    }
                    let replay = mem::take(window);
                    let mut levels: Vec<f64> = replay.iter().map(|x| f64::from(x.rssi)).collect();
                    let idle = median(&mut levels);
                    self.phase = Phase::Armed { idle, run: Vec::with_capacity(k) };
                    queue.push_front(s);
                    for x in replay.into_iter().rev() {
                        queue.push_front(x);
                    }
                }
                Phase::Armed { idle, run } => {
                    if det.is_drop(s.rssi, *idle) {
                        run.push(s);
                        if run.len() == k {
                            let samples = mem::take(run);
                            self.phase = Phase::InEvent { idle: *idle, samples, recovered: 0 };
                            out.push(LinkOutput::Onset);
                        }
                    } else {
                        run.clear();
                    }
                }
                Phase::InEvent { idle, samples, recovered } => {
                    samples.push(s);
                    if det.is_drop(s.rssi, *idle) {
                        *recovered = 0;
                    } else {
                        *recovered += 1;
                    }
                    if *recovered == k {
                        let rest = samples.split_off(samples.len() + 1 - k);
                        let event = summarize_event(self.link_id, *idle, mem::take(samples))?;
                        self.phase = Phase::Learning { window: Vec::new() };
                        out.push(LinkOutput::Closed(event));
                        for x in rest.into_iter().rev() {
                            queue.push_front(x);
                        }
                    } else if samples.len() > cfg.max_event_samples() {
                        self.phase = Phase::Learning { window: Vec::new() };
                        out.push(LinkOutput::Aborted(format!("event on link {} exceeds the maximum duration", self.link_id)));
                    }
                }
            }
        }
        Ok(())
    }
}

struct OpenPass {
    id: u64,
    opened_at: f64,
    events: Vec<Option<AttenuationEvent>>,
}

/// Streaming classifier state. One owner mutates it; the model is read-only.
pub struct Gateway {
    cfg: GatewayConfig,
    links: Vec<LinkGeometry>,
    model: TrainedModel,
    states: Vec<LinkState>,
    last_time: Option<f64>,
    pass: Option<OpenPass>,
    next_pass_id: u64,
    quiet_required: bool,
    diagnostics: Vec<Diagnostic>,
    link_events: [u64; 9],
    peak_buffered: usize,
}

impl Gateway {
    pub fn new(cfg: GatewayConfig, links: Vec<LinkGeometry>, model: TrainedModel) -> Result<Self> {
        cfg.validate()?;
        if links.len() != 9 || links.iter().enumerate().any(|(i, l)| usize::from(l.link_id) != i + 1) {
            return Err(Error::InvalidConfig("gateway needs the nine links in link order".into()));
        }
        let expected = match model.representation {
            Representation::FeatureVector => FeatureVector::DIM,
            Representation::RawData => cfg.extract.raw_length,
        };
        if model.dim() != expected {
            return Err(Error::DimensionMismatch { expected, got: model.dim() });
        }
        let states = (1..=9u8)
            .map(|link_id| LinkState { link_id, last_time: None, phase: Phase::Learning { window: Vec::new() } })
            .collect();
        Ok(Self {
            cfg,
            links,
            model,
            states,
            last_time: None,
            pass: None,
            next_pass_id: 0,
            quiet_required: false,
            diagnostics: Vec::new(),
            link_events: [0; 9],
            peak_buffered: 0,
        })
    }

    /// Closed events per link since start, including ones outside any pass.
    pub fn link_event_counts(&self) -> [u64; 9] {
        self.link_events
    }

    /// Largest number of samples held across all links at any time.
    pub fn peak_buffered(&self) -> usize {
        self.peak_buffered
    }

    pub fn push_sample(&mut self, s: RssiSample) -> Result<Vec<ClassificationRecord>> {
        if !(1..=9).contains(&s.link_id) {
            return Err(Error::UnknownLink(s.link_id));
        }
        if !s.time.is_finite() {
            return Err(Error::NonFiniteInput(0));
        }
        let idx = usize::from(s.link_id - 1);
        let round = self.cfg.round_duration;
        if let Some(last) = self.last_time {
            if s.time < last - round {
                return Err(Error::StreamOrder { link_id: s.link_id, time: s.time, last });
            }
        }
        let link_last = self.states[idx].last_time;
        if let Some(last) = link_last {
            if s.time <= last {
                return Err(Error::StreamOrder { link_id: s.link_id, time: s.time, last });
            }
        }
        self.last_time = Some(self.last_time.map_or(s.time, |t| t.max(s.time)));
        self.states[idx].last_time = Some(s.time);

        if let Some(p) = &self.pass {
            if s.time - p.opened_at > self.cfg.pass_timeout {
                let id = p.id;
                self.abandon(id, s.time, "timed out before all direct links closed".into());
            }
        }
        if self.quiet_required && !self.states.iter().any(LinkState::in_event) {
            self.quiet_required = false;
        }

        let mut outputs = Vec::new();
        if link_last.is_some_and(|last| s.time - last > DISCONTINUITY_ROUNDS * round) {
            if self.states[idx].in_event() {
                outputs.push(LinkOutput::Aborted(format!("stream gap on link {} during an event", s.link_id)));
            }
            self.states[idx].phase = Phase::Learning { window: Vec::new() };
        }
        self.states[idx].feed(s, &self.cfg, &mut outputs)?;

        let buffered: usize = self.states.iter().map(|l| l.phase.buffered()).sum();
        self.peak_buffered = self.peak_buffered.max(buffered);

        let mut records = Vec::new();
        for o in outputs {
            match o {
                LinkOutput::Onset => {
                    if self.pass.is_none() && !self.quiet_required && DIRECT_LINKS.contains(&s.link_id) {
                        self.pass = Some(OpenPass { id: self.next_pass_id, opened_at: s.time, events: vec![None; 9] });
                        self.next_pass_id += 1;
                    }
                }
                LinkOutput::Closed(event) => {
                    self.link_events[idx] += 1;
                    if let Some(r) = self.attach(event, s.time) {
                        records.push(r);
                    }
                }
                LinkOutput::Aborted(reason) => {
                    let blocking = self.pass.as_ref().filter(|p| DIRECT_LINKS.contains(&s.link_id) && p.events[idx].is_none());
                    if let Some(p) = blocking {
                        let id = p.id;
                        self.abandon(id, s.time, reason);
                    }
                }
            }
        }
        Ok(records)
    }

    fn abandon(&mut self, pass_id: u64, time: f64, reason: String) {
        self.pass = None;
        self.quiet_required = true;
        self.diagnostics.push(Diagnostic { pass_id: Some(pass_id), time, reason });
    }

    fn attach(&mut self, event: AttenuationEvent, time: f64) -> Option<ClassificationRecord> {
        let pass = self.pass.as_mut()?;
        let slot = &mut pass.events[usize::from(event.link_id - 1)];
        if slot.is_some() {
            return None;
        }
        *slot = Some(event);
        let direct_done = DIRECT_LINKS.iter().all(|&id| pass.events[usize::from(id - 1)].is_some());
        if !direct_done {
            return None;
        }
        let pass = self.pass.take()?;
        self.quiet_required = true;
        match self.classify(&pass, time) {
            Ok(r) => Some(r),
            Err(e) => {
                self.diagnostics.push(Diagnostic { pass_id: Some(pass.id), time, reason: e.to_string() });
                None
            }
        }
    }

    fn classify(&self, pass: &OpenPass, time: f64) -> Result<ClassificationRecord> {
        let ex = &self.cfg.extract;
        let (features, direction) = assemble_features(&pass.events, &self.links, ex.scalars)?;
        let label = match self.model.representation {
            Representation::FeatureVector => self.model.predict(&features.to_array())?,
            Representation::RawData => {
                let event = pass.events[usize::from(ex.raw_link.clamp(1, 9) - 1)]
                    .as_ref()
                    .ok_or_else(|| Error::IncompletePass(format!("no event on raw-data link {}", ex.raw_link)))?;
                self.model.predict(&raw_vector(event, ex.raw_length)?.values)?
            }
        };
        let last_end = DIRECT_LINKS
            .iter()
            .filter_map(|&id| pass.events[usize::from(id - 1)].as_ref())
            .map(|e| e.t_end)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(ClassificationRecord { pass_id: pass.id, timestamp: time, label, features, direction, latency: time - last_end })
    }

    /// Ends the stream: returns every diagnostic so far plus one for a pass
    /// still waiting on direct-link events.
    pub fn flush(&mut self) -> Vec<Diagnostic> {
        if let Some(p) = self.pass.take() {
            let missing: Vec<String> = DIRECT_LINKS
                .iter()
                .filter(|&&id| p.events[usize::from(id - 1)].is_none())
                .map(u8::to_string)
                .collect();
            self.diagnostics.push(Diagnostic {
                pass_id: Some(p.id),
                time: self.last_time.unwrap_or(p.opened_at),
                reason: format!("incomplete pass: no closed event on direct links {}", missing.join(",")),
            });
        }
        for st in &mut self.states {
            st.phase = Phase::Learning { window: Vec::new() };
            st.last_time = None;
        }
        self.last_time = None;
        self.quiet_required = false;
        mem::take(&mut self.diagnostics)
    }

    pub fn scalar_source(&self) -> ScalarSource {
        self.cfg.extract.scalars
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{interleave, synth_pass, MacSchedule, NoiseModel, PassWindow};
    use crate::features::extract_pass;
    use crate::learn::{train, Dataset, Family, ModelSpec};
    use crate::scenario::{build_links, sample_fleet, DeploymentConfig, FleetSpec, VehicleProfile};

    struct Rig {
        cfg: DeploymentConfig,
        links: Vec<LinkGeometry>,
        sched: MacSchedule,
    }

    fn rig() -> Rig {
        let cfg = DeploymentConfig::default();
        Rig { links: build_links(&cfg).unwrap(), sched: MacSchedule::from_config(&cfg), cfg }
    }

    fn samples(r: &Rig, v: &VehicleProfile, noise: &NoiseModel) -> Vec<RssiSample> {
        let w = PassWindow::around(v, &r.cfg, 1.5, 1.0).unwrap();
        interleave(&synth_pass(v, &r.links, &r.cfg, &r.sched, noise, w, v.vehicle_id).unwrap())
    }

    fn fleet(n: usize, reverse: f64) -> Vec<VehicleProfile> {
        sample_fleet(&FleetSpec { reverse_fraction: reverse, rng_seed: 11, ..FleetSpec::default() }, n).unwrap()
    }

    fn model(r: &Rig) -> TrainedModel {
        let ex = ExtractConfig::default();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for v in fleet(40, 0.0) {
            let w = PassWindow::around(&v, &r.cfg, 1.5, 1.0).unwrap();
            let t = synth_pass(&v, &r.links, &r.cfg, &r.sched, &NoiseModel::default(), w, v.vehicle_id).unwrap();
            x.push(extract_pass(&t, &r.links, &ex).unwrap().features.to_array().to_vec());
            y.push(v.class);
        }
        train(&ModelSpec::new(Family::Knn), &Dataset::new(x, y, Representation::FeatureVector).unwrap()).unwrap()
    }

    fn gateway(r: &Rig) -> Gateway {
        let cfg = GatewayConfig::new(ExtractConfig::default(), r.sched.round_duration());
        Gateway::new(cfg, r.links.clone(), model(r)).unwrap()
    }

    #[test]
    fn one_record_per_pass_matching_batch() {
        let r = rig();
        let mut g = gateway(&r);
        let noise = NoiseModel::default();
        let vs = fleet(6, 0.5);
        let mut records = Vec::new();
        for v in &vs {
            for s in samples(&r, v, &noise) {
                records.extend(g.push_sample(s).unwrap());
            }
        }
        assert_eq!(records.len(), vs.len());
        assert!(g.flush().is_empty());
        for (rec, v) in records.iter().zip(&vs) {
            let w = PassWindow::around(v, &r.cfg, 1.5, 1.0).unwrap();
            let t = synth_pass(v, &r.links, &r.cfg, &r.sched, &noise, w, v.vehicle_id).unwrap();
            let batch = extract_pass(&t, &r.links, &ExtractConfig::default()).unwrap();
            assert_eq!(rec.features, batch.features);
            assert_eq!(rec.direction, v.direction);
            assert!(rec.latency >= 0.0 && rec.latency <= 3.0 * r.sched.round_duration());
        }
    }

    #[test]
    fn idle_stream_emits_nothing() {
        let r = rig();
        let mut g = gateway(&r);
        for k in 0..2000u32 {
            for link_id in 1..=9 {
                let s = RssiSample { time: f64::from(k) * 0.009, link_id, rssi: -55 };
                assert!(g.push_sample(s).unwrap().is_empty());
            }
        }
        assert!(g.flush().is_empty());
    }

    #[test]
    fn cut_stream_gives_one_diagnostic() {
        let r = rig();
        let mut g = gateway(&r);
        let v = &fleet(1, 0.0)[0];
        let all = samples(&r, v, &NoiseModel::noiseless());
        let cut = all.iter().position(|s| s.time > v.entry_time + 0.4).unwrap();
        for s in &all[..cut] {
            assert!(g.push_sample(*s).unwrap().is_empty());
        }
        let d = g.flush();
        assert_eq!(d.len(), 1);
        assert!(d[0].reason.contains("incomplete"));
    }

    #[test]
    fn order_and_link_errors() {
        let r = rig();
        let mut g = gateway(&r);
        g.push_sample(RssiSample { time: 1.0, link_id: 1, rssi: -55 }).unwrap();
        assert!(matches!(
            g.push_sample(RssiSample { time: 0.5, link_id: 2, rssi: -55 }),
            Err(Error::StreamOrder { .. })
        ));
        assert!(matches!(
            g.push_sample(RssiSample { time: 1.0, link_id: 1, rssi: -55 }),
            Err(Error::StreamOrder { .. })
        ));
        // within one round on another link is fine
        g.push_sample(RssiSample { time: 0.995, link_id: 2, rssi: -55 }).unwrap();
        assert!(matches!(g.push_sample(RssiSample { time: 2.0, link_id: 10, rssi: -55 }), Err(Error::UnknownLink(10))));
    }

    #[test]
    fn buffer_stays_bounded() {
        let r = rig();
        let mut g = gateway(&r);
        for v in &fleet(8, 0.0) {
            for s in samples(&r, v, &NoiseModel::default()) {
                g.push_sample(s).unwrap();
            }
        }
        let per_link_rate = 1.0 / r.sched.round_duration();
        let bound = 9.0 * (g.cfg.max_event_duration + 1.0) * per_link_rate;
        assert!((g.peak_buffered() as f64) <= bound);
        // one pass worth, not eight
        assert!(g.peak_buffered() < 9 * 200);
    }
}
