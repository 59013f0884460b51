use super::Label;

/// CART tree with axis-aligned splits; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        label: Label,
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn node_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub root: Node,
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[0] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn count(labels: &[Label], idx: &[usize]) -> [usize; 2] {
    let mut c = [0; 2];
    for &i in idx {
        c[labels[i].index()] += 1;
    }
    c
}

struct Best {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl TreeModel {
    pub fn fit(inputs: &[Vec<f64>], labels: &[Label], max_depth: usize, min_leaf: usize) -> Self {
        let idx: Vec<usize> = (0..inputs.len()).collect();
        Self { root: grow(inputs, labels, idx, 0, max_depth, min_leaf.max(1)) }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return *label,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

fn leaf(counts: [usize; 2]) -> Node {
    // ties go to car
    let label = if counts[1] > counts[0] { Label::Truck } else { Label::Car };
    Node::Leaf { label, counts }
}

fn grow(inputs: &[Vec<f64>], labels: &[Label], idx: Vec<usize>, depth: usize, max_depth: usize, min_leaf: usize) -> Node {
    let counts = count(labels, &idx);
    if depth >= max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * min_leaf {
        return leaf(counts);
    }
    let parent = gini(counts);
    let Some(best) = best_split(inputs, labels, &idx, counts, min_leaf) else {
        return leaf(counts);
    };
    if best.impurity >= parent {
        return leaf(counts);
    }
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| inputs[i][best.feature] <= best.threshold);
    Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: Box::new(grow(inputs, labels, l, depth + 1, max_depth, min_leaf)),
        right: Box::new(grow(inputs, labels, r, depth + 1, max_depth, min_leaf)),
    }
}

/// Lowest weighted Gini; ties keep the lowest feature, then the lowest threshold.
#[allow(clippy::needless_range_loop)]
fn best_split(inputs: &[Vec<f64>], labels: &[Label], idx: &[usize], counts: [usize; 2], min_leaf: usize) -> Option<Best> {
    let n = idx.len();
    let dim = inputs[idx[0]].len();
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for f in 0..dim {
        order.sort_by(|&a, &b| inputs[a][f].total_cmp(&inputs[b][f]).then(a.cmp(&b)));
        let mut left = [0usize; 2];
        for pos in 0..n - 1 {
            left[labels[order[pos]].index()] += 1;
            let (lo, hi) = (inputs[order[pos]][f], inputs[order[pos + 1]][f]);
            let nl = pos + 1;
            if lo == hi || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let impurity = (nl as f64 * gini(left) + (n - nl) as f64 * gini(right)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mut threshold = 0.5 * (lo + hi);
                // midpoint of adjacent floats can round up to `hi`
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best { impurity, feature: f, threshold });
            }
        }
    }
    best
}
