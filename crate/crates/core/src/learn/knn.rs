use super::Label;

/// k-nearest-neighbour classifier over standardised inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn fit(k: usize, points: Vec<Vec<f64>>, labels: Vec<Label>) -> Self {
        Self { k, points, labels }
    }

    /// Majority vote among the k nearest points; an even split goes to the
    /// single nearest neighbour. Distance ties resolve to the lower index.
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut dist: Vec<(f64, usize)> =
            self.points.iter().enumerate().map(|(i, p)| (squared_distance(p, x), i)).collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_unstable_by(cmp);
        let mut votes = [0usize; 2];
        for &(_, i) in &dist {
            votes[self.labels[i].index()] += 1;
        }
        match votes[0].cmp(&votes[1]) {
            std::cmp::Ordering::Greater => Label::Car,
            std::cmp::Ordering::Less => Label::Truck,
            std::cmp::Ordering::Equal => self.labels[dist[0].1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbour() {
        let m = KnnModel::fit(1, vec![vec![0.0], vec![10.0]], vec![Label::Car, Label::Truck]);
        assert_eq!(m.predict(&[1.0]), Label::Car);
        assert_eq!(m.predict(&[6.0]), Label::Truck);
    }

    #[test]
    fn even_vote_goes_to_nearest() {
        let m = KnnModel::fit(
            2,
            vec![vec![0.0], vec![3.0], vec![100.0]],
            vec![Label::Truck, Label::Car, Label::Car],
        );
        assert_eq!(m.predict(&[1.0]), Label::Truck);
        assert_eq!(m.predict(&[2.0]), Label::Car);
    }

    #[test]
    fn majority_wins() {
        let m = KnnModel::fit(
            3,
            vec![vec![0.0], vec![1.0], vec![1.5], vec![2.0]],
            vec![Label::Truck, Label::Car, Label::Car, Label::Truck],
        );
        assert_eq!(m.predict(&[0.9]), Label::Car);
    }

    #[test]
    fn k_larger_than_training_set() {
        let m = KnnModel::fit(10, vec![vec![0.0], vec![1.0], vec![2.0]], vec![Label::Truck, Label::Car, Label::Car]);
        assert_eq!(m.predict(&[0.0]), Label::Car);
    }
}
