//! Plain-text model files.
//!
//! ```text
//! rfprint-model 1
//! family knn
//! representation feature_vector
//! mean <d values>
//! std <d values>
//! ...family-specific lines...
//! ```
//!
//! Floats are written in shortest round-trip form, so a parsed model is
//! bit-identical to the one written.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Family, KnnModel, Label, LinearSvm, Mlp, Model, Node, Representation, Standardizer, TrainedModel, TreeModel};
use crate::error::{Error, Result};

const MAGIC: &str = "rfprint-model";
const VERSION: u32 = 1;

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_model(m: &TrainedModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "family {}", m.family);
    let _ = writeln!(s, "representation {}", m.representation);
    let _ = writeln!(s, "mean {}", join(&m.standardizer.mean));
    let _ = writeln!(s, "std {}", join(&m.standardizer.std));
    match &m.model {
        Model::Knn(k) => {
            let _ = writeln!(s, "k {}", k.k);
            let _ = writeln!(s, "points {}", k.points.len());
            for (p, l) in k.points.iter().zip(&k.labels) {
                let _ = writeln!(s, "{l} {}", join(p));
            }
        }
        Model::Tree(t) => {
            let _ = writeln!(s, "nodes {}", t.root.node_count());
            write_node(&mut s, &t.root);
        }
        Model::Svm(v) => {
            let _ = writeln!(s, "bias {:?}", v.bias);
            let _ = writeln!(s, "weights {}", join(&v.weights));
        }
        Model::Ann(a) => {
            let _ = writeln!(s, "hidden {}", a.hidden);
            let _ = writeln!(s, "w1 {}", join(&a.w1));
            let _ = writeln!(s, "b1 {}", join(&a.b1));
            let _ = writeln!(s, "w2 {}", join(&a.w2));
            let _ = writeln!(s, "b2 {}", join(&a.b2));
        }
    }
    s
}

fn write_node(s: &mut String, n: &Node) {
    match n {
        Node::Leaf { label, counts } => {
            let _ = writeln!(s, "leaf {label} {} {}", counts[0], counts[1]);
        }
        Node::Split { feature, threshold, left, right } => {
            let _ = writeln!(s, "split {feature} {threshold:?}");
            write_node(s, left);
            write_node(s, right);
        }
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse { line: self.line, reason: reason.into() }
    }

    /// Next non-blank line split into whitespace tokens.
    fn next(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t.split_whitespace().collect());
            }
        }
        Err(Error::Parse { line: self.line + 1, reason: "unexpected end of model file".into() })
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next()?;
        if toks[0] != key {
            return Err(self.err(format!("expected {key:?}, found {:?}", toks[0])));
        }
        Ok(toks[1..].to_vec())
    }

    fn value<T: FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("cannot parse {tok:?}")))
    }

    fn single<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let toks = self.keyed(key)?;
        if toks.len() != 1 {
            return Err(self.err(format!("{key} takes one value")));
        }
        self.value(toks[0])
    }

    fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let toks = self.keyed(key)?;
        self.parse_floats(&toks, len)
    }

    fn parse_floats(&self, toks: &[&str], len: usize) -> Result<Vec<f64>> {
        if toks.len() != len {
            return Err(self.err(format!("expected {len} values, found {}", toks.len())));
        }
        let v = toks.iter().map(|t| self.value::<f64>(t)).collect::<Result<Vec<_>>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.err("non-finite value"));
        }
        Ok(v)
    }
}

pub fn parse_model(text: &str) -> Result<TrainedModel> {
    let mut r = Lines { inner: text.lines().enumerate(), line: 0 };
    let head = r.next()?;
    if head.len() != 2 || head[0] != MAGIC {
        return Err(r.err("not a model file"));
    }
    let version: u32 = r.value(head[1])?;
    if version != VERSION {
        return Err(r.err(format!("unsupported model version {version}")));
    }
    let family: Family = r.single::<String>("family")?.parse().map_err(|e: String| r.err(e))?;
    let representation: Representation = r.single::<String>("representation")?.parse().map_err(|e: String| r.err(e))?;
    let mean_toks = r.keyed("mean")?;
    let dim = mean_toks.len();
    if dim == 0 {
        return Err(r.err("empty mean"));
    }
    let mean = r.parse_floats(&mean_toks, dim)?;
    let std = r.floats("std", dim)?;
    if std.iter().any(|&s| s <= 0.0) {
        return Err(r.err("std must be positive"));
    }
    let model = match family {
        Family::Knn => {
            let k: usize = r.single("k")?;
            let n: usize = r.single("points")?;
            let mut points = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let toks = r.next()?;
                let label: Label = toks[0].parse().map_err(|e: String| r.err(e))?;
                points.push(r.parse_floats(&toks[1..], dim)?);
                labels.push(label);
            }
            if k == 0 || n == 0 {
                return Err(r.err("empty k-NN model"));
            }
            Model::Knn(KnnModel { k, points, labels })
        }
        Family::DecisionTree => {
            let n: usize = r.single("nodes")?;
            let mut read = 0;
            let root = parse_node(&mut r, dim, &mut read)?;
            if read != n {
                return Err(r.err(format!("expected {n} nodes, read {read}")));
            }
            Model::Tree(TreeModel { root })
        }
        Family::Svm => {
            let bias: f64 = r.single("bias")?;
            let weights = r.floats("weights", dim)?;
            Model::Svm(LinearSvm { weights, bias })
        }
        Family::Ann => {
            let hidden: usize = r.single("hidden")?;
            if hidden == 0 {
                return Err(r.err("hidden layer is empty"));
            }
            let w1 = r.floats("w1", hidden * dim)?;
            let b1 = r.floats("b1", hidden)?;
            let w2 = r.floats("w2", 2 * hidden)?;
            let b2 = r.floats("b2", 2)?;
            Model::Ann(Mlp { input: dim, hidden, w1, b1, w2, b2: [b2[0], b2[1]] })
        }
    };
    if let Ok(extra) = r.next() {
        return Err(r.err(format!("trailing content {:?}", extra[0])));
    }
    Ok(TrainedModel { family, representation, standardizer: Standardizer { mean, std }, model })
}

fn parse_node(r: &mut Lines<'_>, dim: usize, read: &mut usize) -> Result<Node> {
    let toks = r.next()?;
    *read += 1;
    match toks.as_slice() {
        ["leaf", label, a, b] => {
            let label: Label = label.parse().map_err(|e: String| r.err(e))?;
            Ok(Node::Leaf { label, counts: [r.value(a)?, r.value(b)?] })
        }
        ["split", f, t] => {
            let feature: usize = r.value(f)?;
            if feature >= dim {
                return Err(r.err(format!("feature {feature} out of range")));
            }
            let threshold: f64 = r.value(t)?;
            let left = Box::new(parse_node(r, dim, read)?);
            let right = Box::new(parse_node(r, dim, read)?);
            Ok(Node::Split { feature, threshold, left, right })
        }
        _ => Err(r.err("expected a leaf or split node")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{train, Dataset, ModelSpec};

    fn data() -> Dataset {
        let inputs: Vec<Vec<f64>> =
            (0..30).map(|i| vec![(i as f64 * 0.77).sin() + (i % 2) as f64 * 2.0, i as f64 / 7.0, 0.1]).collect();
        let labels = (0..30).map(|i| if i % 2 == 0 { Label::Car } else { Label::Truck }).collect();
        Dataset::new(inputs, labels, Representation::RawData).unwrap()
    }

    #[test]
    fn every_family_round_trips_exactly() {
        let d = data();
        for family in Family::ALL {
            let mut spec = ModelSpec::new(family).with_seed(5);
            spec.hyper.ann_epochs = 5;
            spec.hyper.tree_min_leaf = 2;
            let m = train(&spec, &d).unwrap();
            let text = write_model(&m);
            let back = parse_model(&text).unwrap();
            assert_eq!(back, m, "{family}");
            assert_eq!(write_model(&back), text);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let m = train(&ModelSpec::new(Family::Svm), &data()).unwrap();
        let text = write_model(&m).replace("weights ", "weights x ");
        match parse_model(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_model("rfprint-model 9\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_model(""), Err(Error::Parse { .. })));
    }
}
