use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Label;

/// Linear soft-margin SVM trained by stochastic subgradient descent on the
/// regularised hinge loss. Trucks are the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn target(label: Label) -> f64 {
    match label {
        Label::Car => -1.0,
        Label::Truck => 1.0,
    }
}

impl LinearSvm {
    pub fn fit(inputs: &[Vec<f64>], labels: &[Label], lambda: f64, epochs: usize, seed: u64) -> Self {
        let dim = inputs.first().map_or(0, Vec::len);
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64 + 1.0);
                let y = target(labels[i]);
                let x = &inputs[i];
                let margin = y * (dot(&w, x) + b);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|wi| *wi *= shrink);
                if margin < 1.0 {
                    for (wi, xi) in w.iter_mut().zip(x) {
                        *wi += eta * y * xi;
                    }
                    b += eta * y;
                }
            }
        }
        Self { weights: w, bias: b }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.decision(x) > 0.0 {
            Label::Truck
        } else {
            Label::Car
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_shifted_clusters() {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..50 {
            let j = (i as f64 * 0.37).sin();
            inputs.push(vec![-2.0 + j, 1.0 + 0.5 * j]);
            labels.push(Label::Car);
            inputs.push(vec![2.0 - j, -1.0 + 0.5 * j]);
            labels.push(Label::Truck);
        }
        let m = LinearSvm::fit(&inputs, &labels, 1e-3, 50, 7);
        for (x, l) in inputs.iter().zip(&labels) {
            assert_eq!(m.predict(x), *l);
        }
        assert_eq!(m, LinearSvm::fit(&inputs, &labels, 1e-3, 50, 7));
    }
}
