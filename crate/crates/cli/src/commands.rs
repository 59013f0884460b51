use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rfprint::channel::{antenna_height_spread, interleave, split_by_link, RssiTrace};
use rfprint::features::extract_pass;
use rfprint::gateway::{ClassificationRecord, Diagnostic, Gateway};
use rfprint::io::{
    read_features, read_link_features, read_manifest, read_raw, write_features, write_link_features, write_manifest,
    write_raw, write_trace_header, write_trace_rows, ManifestEntry, TraceReader, TraceRow,
};
use rfprint::learn::{parse_model, train, write_model, Dataset, Family, Representation, Timing};
use rfprint::Exec;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{self, eval_grid, per_link, per_link_text, Extracted, GridReport};

pub const TRACES_FILE: &str = "traces.csv";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FEATURES_FILE: &str = "features.csv";
pub const LINK_FEATURES_FILE: &str = "features_links.csv";
pub const RAW_FILE: &str = "raw.csv";
pub const REJECTS_FILE: &str = "rejects.csv";
pub const EVAL_FILE: &str = "eval.txt";
pub const PER_LINK_FILE: &str = "per_link.txt";
pub const PROFILE_FILE: &str = "profile.txt";
pub const HEIGHT_SPREAD_FILE: &str = "height_spread.txt";

/// Antenna heights of the height-spread table.
pub const SPREAD_HEIGHTS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Passes synthesized or extracted per parallel batch.
const CHUNK: usize = 256;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn data<T>(r: rfprint::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub passes: usize,
    pub cars: usize,
    pub trucks: usize,
}

/// Writes `traces.csv` (all passes, time ordered) and `manifest.jsonl`.
pub fn cmd_synth(cfg: &RunConfig, n: usize, out: &Path, exec: Exec) -> Result<SynthSummary, CliError> {
    create_dir(out)?;
    let plan = data(pipeline::plan(cfg, n))?;
    let links = data(pipeline::links(cfg))?;
    let trace_path = out.join(TRACES_FILE);
    let mut w = create(&trace_path)?;
    write_trace_header(&mut w).map_err(|e| CliError::io(&trace_path, e))?;
    for chunk in plan.chunks(CHUNK) {
        let traces = exec.try_map(chunk, |e| pipeline::synth_one(cfg, &links, e)).map_err(CliError::Data)?;
        for (entry, t) in chunk.iter().zip(traces) {
            write_trace_rows(&mut w, entry.pass_id, &interleave(&t)).map_err(|e| CliError::io(&trace_path, e))?;
        }
    }
    finish(w, &trace_path)?;
    let manifest_path = out.join(MANIFEST_FILE);
    let mut w = create(&manifest_path)?;
    write_manifest(&mut w, &plan).map_err(|e| CliError::io(&manifest_path, e))?;
    finish(w, &manifest_path)?;
    let trucks = plan.iter().filter(|e| e.vehicle.class == rfprint::scenario::VehicleClass::Truck).count();
    if trucks > 0 && trucks < n {
        let fleet: Vec<_> = plan.iter().map(|e| e.vehicle.clone()).collect();
        let spread = data(antenna_height_spread(&cfg.deployment, &fleet, &SPREAD_HEIGHTS))?;
        let mut text = String::from("# rfprint-height-spread v1\nantenna_height car_mean_db truck_mean_db spread_db\n");
        for s in spread {
            let _ = writeln!(text, "{} {:.6} {:.6} {:.6}", s.antenna_height, s.class_mean_db[0], s.class_mean_db[1], s.spread_db);
        }
        let p = out.join(HEIGHT_SPREAD_FILE);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
    }
    Ok(SynthSummary { passes: n, cars: n - trucks, trucks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub passes: usize,
    pub rejects: usize,
}

/// Reads `input/traces.csv` and `input/manifest.jsonl`; writes the feature,
/// per-link feature, raw-vector and reject tables to `out`.
pub fn cmd_extract(cfg: &RunConfig, input: &Path, out: &Path, exec: Exec) -> Result<ExtractSummary, CliError> {
    let trace_path = input.join(TRACES_FILE);
    let manifest_path = input.join(MANIFEST_FILE);
    require(&trace_path)?;
    require(&manifest_path)?;
    create_dir(out)?;
    let manifest: BTreeMap<u64, ManifestEntry> =
        data(read_manifest(open(&manifest_path)?))?.into_iter().map(|e| (e.pass_id, e)).collect();
    let links = data(pipeline::links(cfg))?;
    let ex = cfg.extract();

    let mut extracted = Extracted::default();
    let mut batch: Vec<(u64, Vec<TraceRow>)> = Vec::new();
    let mut seen = HashSet::new();
    let flush_batch = |batch: &mut Vec<(u64, Vec<TraceRow>)>, extracted: &mut Extracted| -> Result<(), CliError> {
        let results = exec.map(batch, |(_, rows)| {
            let samples: Vec<_> = rows.iter().map(|r| r.sample).collect();
            split_by_link(&samples).and_then(|t: Vec<RssiTrace>| extract_pass(&t, &links, &ex))
        });
        for ((id, _), r) in batch.iter().zip(results) {
            let entry = manifest
                .get(id)
                .ok_or_else(|| CliError::Data(rfprint::Error::InvalidDataset(format!("pass {id} is not in the manifest"))))?;
            extracted.push(entry, r);
        }
        batch.clear();
        Ok(())
    };
    for row in TraceReader::new(open(&trace_path)?) {
        let row = data(row)?;
        match batch.last_mut() {
            Some((id, rows)) if *id == row.pass_id => rows.push(row),
            _ => {
                if !seen.insert(row.pass_id) {
                    return Err(CliError::Data(rfprint::Error::InvalidDataset(format!(
                        "rows of pass {} are not contiguous",
                        row.pass_id
                    ))));
                }
                if batch.len() == CHUNK {
                    flush_batch(&mut batch, &mut extracted)?;
                }
                batch.push((row.pass_id, vec![row]));
            }
        }
    }
    flush_batch(&mut batch, &mut extracted)?;
    write_tables(&extracted, out)?;
    Ok(ExtractSummary { passes: extracted.features.len(), rejects: extracted.rejects.len() })
}

pub fn write_tables(x: &Extracted, out: &Path) -> Result<(), CliError> {
    let p = out.join(FEATURES_FILE);
    let mut w = create(&p)?;
    write_features(&mut w, &x.features).map_err(|e| CliError::io(&p, e))?;
    finish(w, &p)?;
    let p = out.join(LINK_FEATURES_FILE);
    let mut w = create(&p)?;
    write_link_features(&mut w, &x.links).map_err(|e| CliError::io(&p, e))?;
    finish(w, &p)?;
    let p = out.join(RAW_FILE);
    let mut w = create(&p)?;
    write_raw(&mut w, &x.raw).map_err(|e| CliError::io(&p, e))?;
    finish(w, &p)?;
    let p = out.join(REJECTS_FILE);
    let mut w = create(&p)?;
    let mut text = String::from("# rfprint-rejects v1\nvehicle_id,reason\n");
    for (id, reason) in &x.rejects {
        let _ = writeln!(text, "{id},{}", reason.replace([',', '\n'], ";"));
    }
    w.write_all(text.as_bytes()).map_err(|e| CliError::io(&p, e))?;
    finish(w, &p)
}

fn load_dataset(input: &Path, repr: Representation) -> Result<Dataset, CliError> {
    let path = input.join(match repr {
        Representation::FeatureVector => FEATURES_FILE,
        Representation::RawData => RAW_FILE,
    });
    require(&path)?;
    let reader = open(&path)?;
    let (_, d) = data(match repr {
        Representation::FeatureVector => read_features(reader),
        Representation::RawData => read_raw(reader),
    })?;
    Ok(d)
}

pub fn model_file_name(family: Family, repr: Representation) -> String {
    format!("model-{family}-{repr}.txt")
}

/// Trains each configured (family, representation) cell on the full table
/// and writes one model file per cell.
pub fn cmd_train(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    create_dir(out)?;
    let mut written = Vec::new();
    for &repr in &cfg.models.representations {
        let d = load_dataset(input, repr)?;
        for &family in &cfg.models.families {
            let m = data(train(&cfg.model_spec(family), &d))?;
            let p = out.join(model_file_name(family, repr));
            fs::write(&p, write_model(&m)).map_err(|e| CliError::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Cross-validates the configured grid; with `per_link` also the per-link table.
pub fn cmd_eval(cfg: &RunConfig, input: &Path, out: &Path, per_link_mode: bool, exec: Exec) -> Result<GridReport, CliError> {
    let datasets = cfg.models.representations.iter().map(|&r| load_dataset(input, r)).collect::<Result<Vec<_>, _>>()?;
    let link_path = input.join(LINK_FEATURES_FILE);
    if per_link_mode {
        require(&link_path)?;
    }
    create_dir(out)?;
    let grid = data(eval_grid(cfg, &datasets, exec))?;
    let p = out.join(EVAL_FILE);
    fs::write(&p, grid.to_text()).map_err(|e| CliError::io(&p, e))?;
    if per_link_mode {
        let per = data(read_link_features(open(&link_path)?))?;
        let table = data(per_link(cfg, &per, exec))?;
        let p = out.join(PER_LINK_FILE);
        fs::write(&p, per_link_text(cfg.models.per_link_family, &table)).map_err(|e| CliError::io(&p, e))?;
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamSummary {
    pub samples: usize,
    pub records: Vec<ClassificationRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Feeds trace rows through the gateway, writing one JSON record per line
/// to `records` as passes complete.
pub fn cmd_stream<R: BufRead, W: Write>(
    cfg: &RunConfig,
    model_path: &Path,
    input: R,
    records: &mut W,
) -> Result<StreamSummary, CliError> {
    require(model_path)?;
    let text = fs::read_to_string(model_path).map_err(|e| CliError::io(model_path, e))?;
    let model = data(parse_model(&text))?;
    let mut gw = data(Gateway::new(cfg.gateway(), data(pipeline::links(cfg))?, model))?;
    let mut summary = StreamSummary::default();
    for row in TraceReader::new(input) {
        let row = data(row)?;
        summary.samples += 1;
        for rec in data(gw.push_sample(row.sample))? {
            let line = serde_json::to_string(&rec).map_err(|e| CliError::Internal(e.to_string()))?;
            writeln!(records, "{line}").map_err(|e| CliError::io(Path::new("<records>"), e))?;
            summary.records.push(rec);
        }
    }
    records.flush().map_err(|e| CliError::io(Path::new("<records>"), e))?;
    summary.diagnostics = gw.flush();
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub family: Family,
    pub representation: Representation,
    pub training_samples: usize,
    pub training_time_s: f64,
    pub parameters: usize,
    pub inference: Timing,
    pub p95_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub hardware: String,
    pub entries: Vec<ProfileEntry>,
}

impl ProfileReport {
    pub fn entry(&self, family: Family, repr: Representation) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.family == family && e.representation == repr)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# rfprint-profile v1\n");
        let _ = writeln!(s, "hardware {}", self.hardware);
        let _ = writeln!(s, "energy unsupported");
        let _ = writeln!(
            s,
            "representation model train_samples train_s params inferences mean_s median_s p95_s"
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{} {} {} {:.6} {} {} {:.9} {:.9} {:.9}",
                e.representation,
                e.family,
                e.training_samples,
                e.training_time_s,
                e.parameters,
                e.inference.predictions,
                e.inference.mean_s,
                e.inference.median_s,
                e.p95_s
            );
        }
        s
    }
}

/// CPU model and logical core count, best effort.
pub fn hardware_description() -> String {
    let cpu = fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|t| t.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split(':').nth(1)).map(|s| s.trim().to_string()))
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cpu} ({cores} logical cores, {})", std::env::consts::OS)
}

/// Trains each cell on the full table and times single-sample inference
/// sequentially, cycling through the training inputs.
pub fn profile_datasets(cfg: &RunConfig, datasets: &[Dataset]) -> Result<ProfileReport, CliError> {
    let mut entries = Vec::new();
    let n_inf = cfg.profile.inferences.max(1000);
    for d in datasets {
        for &family in &cfg.models.families {
            let t0 = Instant::now();
            let m = data(train(&cfg.model_spec(family), d))?;
            let training_time_s = t0.elapsed().as_secs_f64();
            let mut times = Vec::with_capacity(n_inf);
            for i in 0..n_inf {
                let x = &d.inputs[i % d.len()];
                let t = Instant::now();
                let label = data(m.predict(x))?;
                times.push(t.elapsed().as_secs_f64());
                std::hint::black_box(label);
            }
            let mut sorted = times.clone();
            sorted.sort_by(f64::total_cmp);
            let p95_s = sorted[((0.95 * n_inf as f64).ceil() as usize).clamp(1, n_inf) - 1];
            entries.push(ProfileEntry {
                family,
                representation: d.representation,
                training_samples: d.len(),
                training_time_s,
                parameters: m.parameter_count(),
                inference: Timing::from_samples(times),
                p95_s,
            });
        }
    }
    Ok(ProfileReport { hardware: hardware_description(), entries })
}

pub fn cmd_profile(cfg: &RunConfig, input: &Path, out: &Path) -> Result<ProfileReport, CliError> {
    let datasets = cfg.models.representations.iter().map(|&r| load_dataset(input, r)).collect::<Result<Vec<_>, _>>()?;
    create_dir(out)?;
    let report = profile_datasets(cfg, &datasets)?;
    let p = out.join(PROFILE_FILE);
    fs::write(&p, report.to_text()).map_err(|e| CliError::io(&p, e))?;
    Ok(report)
}
