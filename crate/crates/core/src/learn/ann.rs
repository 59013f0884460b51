use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Label;

/// One hidden ReLU layer feeding a two-way softmax, trained with per-sample
/// SGD on cross-entropy. Output 0 is car, output 1 is truck.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    /// hidden x input, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// 2 x hidden, row-major.
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    prob: [f64; 2],
}

impl Mlp {
    /// He-uniform initial weights, zero biases.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / input as f64).sqrt();
        let a2 = (6.0 / hidden as f64).sqrt();
        let w1 = (0..hidden * input).map(|_| rng.random_range(-a1..a1)).collect();
        let w2 = (0..2 * hidden).map(|_| rng.random_range(-a2..a2)).collect();
        Self { input, hidden, w1, b1: vec![0.0; hidden], w2, b2: [0.0; 2] }
    }

    pub fn fit(inputs: &[Vec<f64>], labels: &[Label], hidden: usize, lr: f64, epochs: usize, seed: u64) -> Self {
        let input = inputs.first().map_or(0, Vec::len);
        let mut m = Self::init(input, hidden, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f5a_dd1e);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut grad = m.zeros();
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                m.backprop(&inputs[i], labels[i], &mut grad);
                m.step(&grad, lr);
            }
        }
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 2
    }

    fn zeros(&self) -> Mlp {
        Mlp {
            input: self.input,
            hidden: self.hidden,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.w2.len()],
            b2: [0.0; 2],
        }
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let mut pre = self.b1.clone();
        for (h, p) in pre.iter_mut().enumerate() {
            let row = &self.w1[h * self.input..(h + 1) * self.input];
            *p += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let act: Vec<f64> = pre.iter().map(|&p| p.max(0.0)).collect();
        let mut z = self.b2;
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            *zo += row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
        }
        let top = z[0].max(z[1]);
        let e = [(z[0] - top).exp(), (z[1] - top).exp()];
        let s = e[0] + e[1];
        Forward { pre, act, prob: [e[0] / s, e[1] / s] }
    }

    pub fn probabilities(&self, x: &[f64]) -> [f64; 2] {
        self.forward(x).prob
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let p = self.probabilities(x);
        if p[1] > p[0] {
            Label::Truck
        } else {
            Label::Car
        }
    }

    /// Cross-entropy of one sample.
    pub fn loss(&self, x: &[f64], label: Label) -> f64 {
        let f = self.forward(x);
        -f.prob[label.index()].max(f64::MIN_POSITIVE).ln()
    }

    /// Writes the loss gradient for one sample into `g`.
    fn backprop(&self, x: &[f64], label: Label, g: &mut Mlp) {
        let f = self.forward(x);
        let mut dz = f.prob;
        dz[label.index()] -= 1.0;
        g.b2 = dz;
        for (o, d) in dz.iter().enumerate() {
            for h in 0..self.hidden {
                g.w2[o * self.hidden + h] = d * f.act[h];
            }
        }
        for h in 0..self.hidden {
            let back = dz[0] * self.w2[h] + dz[1] * self.w2[self.hidden + h];
            let d = if f.pre[h] > 0.0 { back } else { 0.0 };
            g.b1[h] = d;
            let row = &mut g.w1[h * self.input..(h + 1) * self.input];
            for (gw, xi) in row.iter_mut().zip(x) {
                *gw = d * xi;
            }
        }
    }

    pub fn gradient(&self, x: &[f64], label: Label) -> Mlp {
        let mut g = self.zeros();
        self.backprop(x, label, &mut g);
        g
    }

    fn step(&mut self, g: &Mlp, lr: f64) {
        let pairs = [(&mut self.w1, &g.w1), (&mut self.b1, &g.b1), (&mut self.w2, &g.w2)];
        for (p, d) in pairs {
            p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        }
        self.b2[0] -= lr * g.b2[0];
        self.b2[1] -= lr * g.b2[1];
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
            .collect()
    }
}

/// Largest relative error between the backprop gradient and a central
/// difference with step `eps`, over all parameters. Entries where both
/// gradients are below 1e-10 in magnitude count as exact.
pub fn gradient_check(model: &Mlp, x: &[f64], label: Label, eps: f64) -> f64 {
    let analytic = model.gradient(x, label).params();
    let n = analytic.len();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.into_iter().enumerate().take(n) {
        let mut plus = model.clone();
        *plus.params_mut()[i] += eps;
        let mut minus = model.clone();
        *minus.params_mut()[i] -= eps;
        let numeric = (plus.loss(x, label) - minus.loss(x, label)) / (2.0 * eps);
        let scale = a.abs().max(numeric.abs());
        if scale < 1e-10 {
            continue;
        }
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(input: usize, hidden: usize) -> Mlp {
        let m = Mlp::init(input, hidden, 0);
        m.zeros()
    }

    #[test]
    fn zero_weights_give_even_odds() {
        let m = zero_model(3, 4);
        assert_eq!(m.probabilities(&[1.0, 2.0, 3.0]), [0.5, 0.5]);
        let g = m.gradient(&[1.0, 2.0, 3.0], Label::Truck);
        // Only the output bias sees a gradient: p - y.
        assert_eq!(g.b2, [0.5, -0.5]);
        assert!(g.w1.iter().chain(&g.b1).chain(&g.w2).all(|&v| v == 0.0));
        assert!((m.loss(&[0.0; 3], Label::Car) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_central_differences() {
        let x = [0.3, -1.2, 0.7, 2.0];
        for seed in 0..5 {
            let m = Mlp::init(4, 6, seed);
            for label in [Label::Car, Label::Truck] {
                let err = gradient_check(&m, &x, label, 1e-5);
                assert!(err < 1e-4, "seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn learns_xor_like_problem() {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let j = 0.1 * ((i as f64) * 1.7).sin();
            for (a, b) in [(-1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (1.0, -1.0)] {
                inputs.push(vec![a + j, b - j]);
                labels.push(if a * b > 0.0 { Label::Car } else { Label::Truck });
            }
        }
        let m = Mlp::fit(&inputs, &labels, 16, 0.05, 200, 3);
        let correct = inputs.iter().zip(&labels).filter(|(x, l)| m.predict(x) == **l).count();
        assert_eq!(correct, inputs.len());
    }
}
