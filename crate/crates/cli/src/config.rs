use std::path::Path;

use rfprint::channel::{MacSchedule, NoiseModel};
use rfprint::features::{DetectorConfig, ExtractConfig, ScalarSource, RAW_VECTOR_LEN};
use rfprint::gateway::GatewayConfig;
use rfprint::learn::{Family, Hyperparameters, ModelSpec, Representation};
use rfprint::scenario::{DeploymentConfig, FleetSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub token_order: [u8; 3],
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { token_order: [1, 2, 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub scalars: ScalarSource,
    pub raw_link: u8,
    pub raw_length: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { scalars: ScalarSource::default(), raw_link: 1, raw_length: RAW_VECTOR_LEN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub passes: usize,
    /// Idle time recorded before each vehicle enters, seconds.
    pub lead: f64,
    /// Idle time recorded after the rear clears the last link, seconds.
    pub tail: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { passes: 3000, lead: 1.5, tail: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    pub families: Vec<Family>,
    pub representations: Vec<Representation>,
    pub folds: usize,
    /// Family used for the per-link table.
    pub per_link_family: Family,
    pub hyper: Hyperparameters,
}

impl Default for ModelsSection {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            representations: Representation::ALL.to_vec(),
            folds: 5,
            per_link_family: Family::Knn,
            hyper: Hyperparameters::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub inferences: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self { inferences: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub max_event_duration: f64,
    pub pass_timeout: f64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self { max_event_duration: 10.0, pass_timeout: 15.0 }
    }
}

/// Everything a run needs. One seed drives fleet sampling, noise, fold
/// assignment and model initialisation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub deployment: DeploymentConfig,
    pub schedule: ScheduleSection,
    pub noise: NoiseModel,
    pub detector: DetectorConfig,
    pub features: FeatureSection,
    pub fleet: FleetSpec,
    pub synth: SynthSection,
    pub models: ModelsSection,
    pub profile: ProfileSection,
    pub gateway: GatewaySection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses a TOML document layered over the defaults, so nested sections
    /// such as `[fleet.car.acceleration]` can be overridden on their own.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let invalid = |m: &str| CliError::Usage(format!("invalid config: {m}"));
        let user: toml::Table = toml::from_str(text).map_err(|e| invalid(e.message()))?;
        let mut merged = toml::Table::try_from(RunConfig::default()).map_err(|e| CliError::Internal(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| invalid(e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: rfprint::Error| CliError::Usage(e.to_string());
        self.deployment.validate().map_err(usage)?;
        self.schedule().validate(&self.deployment).map_err(usage)?;
        self.noise.validate().map_err(usage)?;
        self.detector.validate().map_err(usage)?;
        self.fleet.validate().map_err(usage)?;
        self.models.hyper.validate().map_err(usage)?;
        if !(1..=9).contains(&self.features.raw_link) || self.features.raw_length < 2 {
            return Err(CliError::Usage("features.raw_link must be 1..=9 and raw_length >= 2".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.synth.lead >= self.detector.idle_window) || !(self.synth.tail >= 0.0) {
            return Err(CliError::Usage("synth.lead must cover the idle window and synth.tail must be >= 0".into()));
        }
        if self.models.folds < 2 {
            return Err(CliError::Usage("models.folds must be >= 2".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> MacSchedule {
        MacSchedule { token_order: self.schedule.token_order, slot_duration: self.deployment.round_duration() / 3.0 }
    }

    /// Fleet spec with the run seed applied.
    pub fn fleet(&self) -> FleetSpec {
        FleetSpec { rng_seed: self.seed, ..self.fleet.clone() }
    }

    pub fn extract(&self) -> ExtractConfig {
        ExtractConfig {
            detector: self.detector,
            scalars: self.features.scalars,
            raw_link: self.features.raw_link,
            raw_length: self.features.raw_length,
        }
    }

    pub fn gateway(&self) -> GatewayConfig {
        GatewayConfig {
            max_event_duration: self.gateway.max_event_duration,
            pass_timeout: self.gateway.pass_timeout,
            ..GatewayConfig::new(self.extract(), self.schedule().round_duration())
        }
    }

    pub fn model_spec(&self, family: Family) -> ModelSpec {
        ModelSpec { family, hyper: self.models.hyper, seed: self.seed }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !switches_variant(b, &o) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// A one-key table replacing a different one-key table selects another enum
/// variant, e.g. `{ constant = 0.0 }` over `{ normal = { .. } }`.
fn switches_variant(base: &toml::Table, over: &toml::Table) -> bool {
    base.len() == 1 && over.len() == 1 && base.keys().next() != over.keys().next()
}
