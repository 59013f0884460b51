use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{train, Dataset, Family, Label, ModelSpec, Representation, TrainedModel};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Counts indexed `[actual][predicted]`, car first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

impl Confusion {
    pub fn record(&mut self, actual: Label, predicted: Label) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn add(&mut self, other: &Confusion) {
        for a in 0..2 {
            for p in 0..2 {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    /// Correct-classification rate.
    pub fn csr(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn class_stats(&self, class: Label) -> ClassStats {
        let c = class.index();
        let tp = self.counts[c][c] as f64;
        let predicted = (self.counts[0][c] + self.counts[1][c]) as f64;
        let actual = (self.counts[c][0] + self.counts[c][1]) as f64;
        ClassStats {
            precision: (predicted > 0.0).then(|| tp / predicted),
            recall: (actual > 0.0).then(|| tp / actual),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Per-prediction wall-clock time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub mean_s: f64,
    pub median_s: f64,
    pub predictions: usize,
}

impl Timing {
    pub fn from_samples(mut s: Vec<f64>) -> Self {
        let n = s.len();
        if n == 0 {
            return Self { mean_s: 0.0, median_s: 0.0, predictions: 0 };
        }
        s.sort_by(f64::total_cmp);
        let median_s = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        Self { mean_s: s.iter().sum::<f64>() / n as f64, median_s, predictions: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub family: Family,
    pub representation: Representation,
    pub folds: Vec<Confusion>,
    pub total: Confusion,
    pub timing: Timing,
}

impl EvalReport {
    pub fn csr(&self) -> f64 {
        self.total.csr()
    }

    pub fn fold_csr(&self) -> Vec<f64> {
        self.folds.iter().map(Confusion::csr).collect()
    }

    /// Line-oriented `key value` document. Timing is wall-clock and therefore
    /// left out unless asked for.
    pub fn to_text(&self, include_timing: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model {}", self.family);
        let _ = writeln!(s, "representation {}", self.representation);
        let _ = writeln!(s, "folds {}", self.folds.len());
        let _ = writeln!(s, "samples {}", self.total.total());
        let _ = writeln!(s, "csr {:.6}", self.csr());
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(s, "fold {} csr {:.6} confusion {}", i, f.csr(), fmt_confusion(f));
        }
        let _ = writeln!(s, "confusion {}", fmt_confusion(&self.total));
        for class in Label::ALL {
            let st = self.total.class_stats(class);
            let _ = writeln!(s, "class {} precision {} recall {}", class, fmt_opt(st.precision), fmt_opt(st.recall));
        }
        if include_timing {
            let _ = writeln!(
                s,
                "inference_mean_s {:.9}\ninference_median_s {:.9}",
                self.timing.mean_s, self.timing.median_s
            );
        }
        s
    }
}

fn fmt_confusion(c: &Confusion) -> String {
    format!("{} {} {} {}", c.counts[0][0], c.counts[0][1], c.counts[1][0], c.counts[1][1])
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |v| format!("{v:.6}"))
}

/// Fold index for every sample. Each class is shuffled with `seed` and then
/// dealt round-robin, so fold class counts differ by at most one.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    if labels.len() < folds {
        return Err(Error::InvalidDataset(format!("{} samples cannot fill {folds} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Trains on every sample outside `fold`.
pub fn train_fold(spec: &ModelSpec, data: &Dataset, assignment: &[usize], fold: usize) -> Result<TrainedModel> {
    let train_idx: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != fold).collect();
    train(spec, &data.subset(&train_idx))
}

/// Stratified k-fold cross-validation; normalisation is refitted per fold.
pub fn cross_validate(spec: &ModelSpec, data: &Dataset, folds: usize, seed: u64, exec: Exec) -> Result<EvalReport> {
    let assignment = stratified_folds(&data.labels, folds, seed)?;
    let per_fold = exec.try_map_range(folds, |fold| -> Result<(Confusion, Vec<f64>)> {
        let model = train_fold(spec, data, &assignment, fold)?;
        let mut conf = Confusion::default();
        let mut times = Vec::new();
        for i in (0..data.len()).filter(|&i| assignment[i] == fold) {
            let t0 = Instant::now();
            let p = model.predict(&data.inputs[i])?;
            times.push(t0.elapsed().as_secs_f64());
            conf.record(data.labels[i], p);
        }
        Ok((conf, times))
    })?;
    let mut total = Confusion::default();
    let mut times = Vec::new();
    let mut fold_conf = Vec::with_capacity(folds);
    for (c, t) in per_fold {
        total.add(&c);
        fold_conf.push(c);
        times.extend(t);
    }
    Ok(EvalReport {
        family: spec.family,
        representation: data.representation,
        folds: fold_conf,
        total,
        timing: Timing::from_samples(times),
    })
}

/// Cross-validated CSR of one model per link, `datasets[i]` being link i+1.
pub fn per_link_eval(spec: &ModelSpec, datasets: &[Dataset], folds: usize, seed: u64, exec: Exec) -> Result<Vec<(u8, f64)>> {
    if datasets.is_empty() {
        return Err(Error::InvalidDataset("no per-link datasets".into()));
    }
    datasets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d.is_empty() {
                return Err(Error::InvalidDataset(format!("link {} has no samples", i + 1)));
            }
            cross_validate(spec, d, folds, seed, exec).map(|r| (i as u8 + 1, r.csr()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::Standardizer;

    fn labels(cars: usize, trucks: usize) -> Vec<Label> {
        let mut v = vec![Label::Car; cars];
        v.extend(vec![Label::Truck; trucks]);
        v
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let l = labels(23, 11);
        let a = stratified_folds(&l, 5, 9).unwrap();
        for class in Label::ALL {
            let mut per = [0; 5];
            for (i, &f) in a.iter().enumerate() {
                if l[i] == class {
                    per[f] += 1;
                }
            }
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            assert!(hi - lo <= 1, "{per:?}");
        }
        assert_eq!(a, stratified_folds(&l, 5, 9).unwrap());
        assert_ne!(a, stratified_folds(&l, 5, 10).unwrap());
        assert!(stratified_folds(&l, 1, 0).is_err());
    }

    #[test]
    fn fold_model_never_sees_test_samples() {
        // Test samples carry a huge offset; if they leaked into the fit the
        // fold standardiser's mean would move.
        let n = 40;
        let l: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { Label::Car } else { Label::Truck }).collect();
        let a = stratified_folds(&l, 4, 1).unwrap();
        let inputs: Vec<Vec<f64>> =
            (0..n).map(|i| vec![if a[i] == 0 { 1e6 } else { i as f64 }, (i % 2) as f64]).collect();
        let data = Dataset::new(inputs.clone(), l, Representation::FeatureVector).unwrap();
        let m = train_fold(&ModelSpec::new(Family::Knn), &data, &a, 0).unwrap();
        let train_only: Vec<Vec<f64>> = (0..n).filter(|&i| a[i] != 0).map(|i| inputs[i].clone()).collect();
        assert_eq!(m.standardizer, Standardizer::fit(&train_only));
        assert!(m.standardizer.mean[0] < 1e3);
    }

    #[test]
    fn confusion_arithmetic() {
        let mut c = Confusion::default();
        c.record(Label::Car, Label::Car);
        c.record(Label::Car, Label::Truck);
        c.record(Label::Truck, Label::Truck);
        c.record(Label::Truck, Label::Truck);
        assert_eq!(c.csr(), 0.75);
        let s = c.class_stats(Label::Truck);
        assert_eq!(s.precision, Some(2.0 / 3.0));
        assert_eq!(s.recall, Some(1.0));
        let empty = Confusion::default().class_stats(Label::Car);
        assert_eq!(empty.precision, None);
    }

    #[test]
    fn cross_validation_is_exec_independent() {
        let n = 60;
        let l: Vec<Label> = (0..n).map(|i| if i % 3 == 0 { Label::Truck } else { Label::Car }).collect();
        let inputs: Vec<Vec<f64>> =
            (0..n).map(|i| vec![if l[i] == Label::Truck { 3.0 } else { 0.0 } + ((i * 7) % 5) as f64 * 0.3]).collect();
        let d = Dataset::new(inputs, l, Representation::FeatureVector).unwrap();
        for family in Family::ALL {
            let spec = ModelSpec::new(family).with_seed(4);
            let a = cross_validate(&spec, &d, 5, 2, Exec::Sequential).unwrap();
            let b = cross_validate(&spec, &d, 5, 2, Exec::Parallel).unwrap();
            assert_eq!(a.to_text(false), b.to_text(false));
            assert_eq!(a.total.total(), n as u64);
            assert_eq!(a.csr(), 1.0, "{family}");
        }
    }

    #[test]
    fn per_link_rejects_empty_input() {
        assert!(per_link_eval(&ModelSpec::new(Family::Knn), &[], 5, 0, Exec::Sequential).is_err());
    }
}
