//! Car/truck classifiers: k-NN, CART decision tree, linear SVM and a
//! one-hidden-layer perceptron, plus stratified cross-validation.
//!
//! Every trained model carries the standardisation fitted on its training
//! data, so callers always pass raw (unscaled) inputs.

mod ann;
mod cv;
mod knn;
mod persist;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::VehicleClass;

pub use ann::{gradient_check, Mlp};
pub use cv::{
    cross_validate, per_link_eval, stratified_folds, train_fold, ClassStats, Confusion, EvalReport, Timing,
};
pub use knn::KnnModel;
pub use persist::{parse_model, write_model};
pub use svm::LinearSvm;
pub use tree::{Node, TreeModel};

pub type Label = VehicleClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    FeatureVector,
    RawData,
}

impl Representation {
    pub const ALL: [Representation; 2] = [Representation::RawData, Representation::FeatureVector];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::FeatureVector => "feature_vector",
            Representation::RawData => "raw_data",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "feature_vector" | "features" | "feature" => Ok(Representation::FeatureVector),
            "raw_data" | "raw" => Ok(Representation::RawData),
            other => Err(format!("unknown representation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub representation: Representation,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<Label>, representation: Representation) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidDataset(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if let Some(first) = inputs.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(Error::InvalidDataset("zero-dimensional inputs".into()));
            }
            for x in &inputs {
                if x.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
                }
                if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteInput(i));
                }
            }
        }
        Ok(Self { inputs, labels, representation })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            representation: self.representation,
        }
    }
}

/// Per-dimension affine scaling fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn fit(inputs: &[Vec<f64>]) -> Self {
        let dim = inputs.first().map_or(0, Vec::len);
        let n = inputs.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for x in inputs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Knn,
    #[serde(rename = "dt", alias = "decision_tree")]
    DecisionTree,
    Svm,
    Ann,
}

impl Family {
    /// Column order of the evaluation grid.
    pub const ALL: [Family; 4] = [Family::DecisionTree, Family::Knn, Family::Svm, Family::Ann];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Knn => "knn",
            Family::DecisionTree => "dt",
            Family::Svm => "svm",
            Family::Ann => "ann",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "knn" | "k-nn" => Ok(Family::Knn),
            "dt" | "decision_tree" | "tree" => Ok(Family::DecisionTree),
            "svm" => Ok(Family::Svm),
            "ann" | "mlp" | "nn" => Ok(Family::Ann),
            other => Err(format!("unknown model family {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub ann_hidden: usize,
    pub ann_learning_rate: f64,
    pub ann_epochs: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            knn_k: 3,
            tree_max_depth: 8,
            tree_min_leaf: 5,
            svm_lambda: 1e-3,
            svm_epochs: 200,
            ann_hidden: 16,
            ann_learning_rate: 0.01,
            ann_epochs: 300,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let ok = self.knn_k >= 1
            && self.tree_max_depth >= 1
            && self.tree_min_leaf >= 1
            && self.svm_lambda > 0.0
            && self.svm_epochs >= 1
            && self.ann_hidden >= 1
            && self.ann_learning_rate > 0.0
            && self.ann_epochs >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("hyperparameters out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub hyper: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, hyper: Hyperparameters::default(), seed: 0 }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Knn(KnnModel),
    Tree(TreeModel),
    Svm(LinearSvm),
    Ann(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub family: Family,
    pub representation: Representation,
    pub standardizer: Standardizer,
    pub model: Model,
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    pub fn predict(&self, input: &[f64]) -> Result<Label> {
        if input.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: input.len() });
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        let x = self.standardizer.apply(input);
        Ok(match &self.model {
            Model::Knn(m) => m.predict(&x),
            Model::Tree(m) => m.predict(&x),
            Model::Svm(m) => m.predict(&x),
            Model::Ann(m) => m.predict(&x),
        })
    }

    /// Number of stored scalars (for k-NN, the whole training set).
    pub fn parameter_count(&self) -> usize {
        let d = self.dim();
        2 * d
            + match &self.model {
                Model::Knn(m) => m.points.len() * (d + 1),
                Model::Tree(m) => m.root.node_count() * 2,
                Model::Svm(m) => m.weights.len() + 1,
                Model::Ann(m) => m.parameter_count(),
            }
    }
}

/// Fits a model of the requested family.
pub fn train(spec: &ModelSpec, data: &Dataset) -> Result<TrainedModel> {
    spec.hyper.validate()?;
    let counts = data.class_counts();
    if counts[0] < 2 || counts[1] < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least two samples per class, got {} cars and {} trucks",
            counts[0], counts[1]
        )));
    }
    let standardizer = Standardizer::fit(&data.inputs);
    let inputs: Vec<Vec<f64>> = data.inputs.iter().map(|x| standardizer.apply(x)).collect();
    let h = &spec.hyper;
    let model = match spec.family {
        Family::Knn => Model::Knn(KnnModel::fit(h.knn_k, inputs, data.labels.clone())),
        Family::DecisionTree => Model::Tree(TreeModel::fit(&inputs, &data.labels, h.tree_max_depth, h.tree_min_leaf)),
        Family::Svm => Model::Svm(LinearSvm::fit(&inputs, &data.labels, h.svm_lambda, h.svm_epochs, spec.seed)),
        Family::Ann => {
            Model::Ann(Mlp::fit(&inputs, &data.labels, h.ann_hidden, h.ann_learning_rate, h.ann_epochs, spec.seed))
        }
    };
    Ok(TrainedModel { family: spec.family, representation: data.representation, standardizer, model })
}

pub fn predict(model: &TrainedModel, input: &[f64]) -> Result<Label> {
    model.predict(input)
}
