//! In-memory building blocks shared by the subcommands and the tests.

use std::fmt::Write as _;

use rfprint::channel::{derive_seed, synth_pass, PassWindow, RssiTrace};
use rfprint::features::{extract_pass, PassExtraction};
use rfprint::io::{FeatureRow, LinkFeatureRow, ManifestEntry, RawRow};
use rfprint::learn::{cross_validate, per_link_eval, Dataset, EvalReport, Family, Representation};
use rfprint::scenario::{build_links, sample_fleet, LinkGeometry};
use rfprint::{Exec, Result};

use crate::config::RunConfig;

/// Samples the fleet and fixes each pass's window and noise seed.
pub fn plan(cfg: &RunConfig, n: usize) -> Result<Vec<ManifestEntry>> {
    let fleet = sample_fleet(&cfg.fleet(), n)?;
    fleet
        .into_iter()
        .enumerate()
        .map(|(i, vehicle)| {
            let window = PassWindow::around(&vehicle, &cfg.deployment, cfg.synth.lead, cfg.synth.tail)?;
            let seed = derive_seed(cfg.seed, i as u64);
            Ok(ManifestEntry { pass_id: i as u64, vehicle, window, seed })
        })
        .collect()
}

pub fn links(cfg: &RunConfig) -> Result<Vec<LinkGeometry>> {
    build_links(&cfg.deployment)
}

pub fn synth_one(cfg: &RunConfig, links: &[LinkGeometry], entry: &ManifestEntry) -> Result<Vec<RssiTrace>> {
    synth_pass(&entry.vehicle, links, &cfg.deployment, &cfg.schedule(), &cfg.noise, entry.window, entry.seed)
}

/// Tables produced by batch extraction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extracted {
    pub features: Vec<FeatureRow>,
    pub links: Vec<LinkFeatureRow>,
    pub raw: Vec<RawRow>,
    pub rejects: Vec<(u64, String)>,
}

impl Extracted {
    pub fn push(&mut self, entry: &ManifestEntry, result: Result<PassExtraction>) {
        let id = entry.pass_id;
        let label = entry.vehicle.class;
        match result {
            Ok(p) => {
                for lf in p.link_features.into_iter().flatten() {
                    self.links.push(LinkFeatureRow { vehicle_id: id, link_id: lf.links[0], features: lf, label });
                }
                self.features.push(FeatureRow { vehicle_id: id, features: p.features, label });
                self.raw.push(RawRow { vehicle_id: id, raw: p.raw, label });
            }
            Err(e) => self.rejects.push((id, e.to_string())),
        }
    }

    pub fn feature_dataset(&self) -> Result<Dataset> {
        Dataset::new(
            self.features.iter().map(|r| r.features.to_array().to_vec()).collect(),
            self.features.iter().map(|r| r.label).collect(),
            Representation::FeatureVector,
        )
    }

    pub fn raw_dataset(&self) -> Result<Dataset> {
        Dataset::new(
            self.raw.iter().map(|r| r.raw.values.clone()).collect(),
            self.raw.iter().map(|r| r.label).collect(),
            Representation::RawData,
        )
    }

    /// Nine datasets, link 1 first.
    pub fn link_datasets(&self) -> Result<Vec<Dataset>> {
        (1..=9u8)
            .map(|id| {
                let rows: Vec<&LinkFeatureRow> = self.links.iter().filter(|r| r.link_id == id).collect();
                Dataset::new(
                    rows.iter().map(|r| r.features.to_array().to_vec()).collect(),
                    rows.iter().map(|r| r.label).collect(),
                    Representation::FeatureVector,
                )
            })
            .collect()
    }
}

/// Synthesis and extraction without touching disk; traces are dropped as
/// soon as each pass is summarised.
pub fn synth_extract(cfg: &RunConfig, n: usize, exec: Exec) -> Result<(Vec<ManifestEntry>, Extracted)> {
    let plan = plan(cfg, n)?;
    let links = links(cfg)?;
    let ex = cfg.extract();
    let results = exec.map(&plan, |entry| {
        synth_one(cfg, &links, entry).and_then(|t| extract_pass(&t, &links, &ex))
    });
    let mut out = Extracted::default();
    for (entry, r) in plan.iter().zip(results) {
        out.push(entry, r);
    }
    Ok((plan, out))
}

/// Table of cross-validated CSRs over families and representations.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub folds: usize,
    pub seed: u64,
    pub families: Vec<Family>,
    pub reports: Vec<EvalReport>,
}

impl GridReport {
    pub fn cell(&self, family: Family, repr: Representation) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.family == family && r.representation == repr)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# rfprint-eval v1");
        let _ = writeln!(s, "folds {}\nseed {}", self.folds, self.seed);
        let names: Vec<&str> = self.families.iter().map(|f| f.as_str()).collect();
        let _ = writeln!(s, "\n[grid]\nrepresentation {}", names.join(" "));
        for repr in Representation::ALL {
            let cells: Vec<String> = self
                .families
                .iter()
                .filter_map(|&f| self.cell(f, repr))
                .map(|r| format!("{:.6}", r.csr()))
                .collect();
            if !cells.is_empty() {
                let _ = writeln!(s, "{repr} {}", cells.join(" "));
            }
        }
        for r in &self.reports {
            let _ = write!(s, "\n[cell {} {}]\n{}", r.representation, r.family, r.to_text(false));
        }
        s
    }
}

pub fn eval_grid(cfg: &RunConfig, datasets: &[Dataset], exec: Exec) -> Result<GridReport> {
    let mut reports = Vec::new();
    for d in datasets {
        for &family in &cfg.models.families {
            reports.push(cross_validate(&cfg.model_spec(family), d, cfg.models.folds, cfg.seed, exec)?);
        }
    }
    Ok(GridReport { folds: cfg.models.folds, seed: cfg.seed, families: cfg.models.families.clone(), reports })
}

pub fn per_link(cfg: &RunConfig, datasets: &[Dataset], exec: Exec) -> Result<Vec<(u8, f64)>> {
    per_link_eval(&cfg.model_spec(cfg.models.per_link_family), datasets, cfg.models.folds, cfg.seed, exec)
}

pub fn per_link_text(family: Family, table: &[(u8, f64)]) -> String {
    let mut s = format!("# rfprint-per-link v1\nmodel {family}\nlink csr\n");
    for (id, csr) in table {
        let _ = writeln!(s, "{id} {csr:.6}");
    }
    s
}
