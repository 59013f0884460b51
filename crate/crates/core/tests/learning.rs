use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfprint::learn::{
    cross_validate, gradient_check, parse_model, stratified_folds, train, train_fold, write_model, Dataset, Family,
    Label, LinearSvm, Mlp, Model, ModelSpec, Representation,
};
use rfprint::Exec;

/// Two Gaussian blobs, trucks shifted by `gap` along every axis.
fn blobs(n: usize, dim: usize, gap: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Car } else { Label::Truck };
        let c = if label == Label::Truck { gap } else { 0.0 };
        x.push((0..dim).map(|d| c + z.sample(&mut rng) * (1.0 + d as f64)).collect());
        y.push(label);
    }
    Dataset::new(x, y, Representation::FeatureVector).unwrap()
}

fn training_accuracy(spec: &ModelSpec, d: &Dataset) -> f64 {
    let m = train(spec, d).unwrap();
    let hits = d.inputs.iter().zip(&d.labels).filter(|(x, y)| m.predict(x).unwrap() == **y).count();
    hits as f64 / d.len() as f64
}

#[test]
fn one_nn_memorises_training_set() {
    let d = blobs(300, 5, 0.5, 1);
    let mut spec = ModelSpec::new(Family::Knn);
    spec.hyper.knn_k = 1;
    assert_eq!(training_accuracy(&spec, &d), 1.0);
}

#[test]
fn separable_blobs_score_high_for_every_family() {
    let d = blobs(400, 4, 4.0, 2);
    for family in Family::ALL {
        let r = cross_validate(&ModelSpec::new(family), &d, 5, 0, Exec::default()).unwrap();
        assert!(r.csr() > 0.9, "{family}: {}", r.csr());
    }
}

#[test]
fn shuffled_labels_score_near_chance() {
    let mut d = blobs(1000, 7, 3.0, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    d.labels.shuffle(&mut rng);
    for family in [Family::Knn, Family::DecisionTree, Family::Svm] {
        let csr = cross_validate(&ModelSpec::new(family), &d, 5, 0, Exec::default()).unwrap().csr();
        assert!((csr - 0.5).abs() <= 0.05, "{family}: {csr}");
    }
}

#[test]
fn test_fold_labels_do_not_reach_training() {
    let d = blobs(200, 3, 1.0, 4);
    let assignment = stratified_folds(&d.labels, 5, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for family in Family::ALL {
        let spec = ModelSpec::new(family);
        let base = train_fold(&spec, &d, &assignment, 2).unwrap();
        let mut tampered = d.clone();
        for i in (0..d.len()).filter(|&i| assignment[i] == 2) {
            tampered.labels[i] = if rng.random() { Label::Car } else { Label::Truck };
            tampered.inputs[i].iter_mut().for_each(|v| *v = rng.random_range(-100.0..100.0));
        }
        assert_eq!(train_fold(&spec, &tampered, &assignment, 2).unwrap(), base, "{family}");
    }
}

#[test]
fn stratified_folds_balance_classes() {
    let labels: Vec<Label> = (0..103).map(|i| if i % 3 == 0 { Label::Truck } else { Label::Car }).collect();
    let a = stratified_folds(&labels, 5, 1).unwrap();
    for class in Label::ALL {
        let counts: Vec<usize> =
            (0..5).map(|f| (0..labels.len()).filter(|&i| a[i] == f && labels[i] == class).count()).collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{class}: {counts:?}");
    }
    assert!(stratified_folds(&labels[..3], 5, 1).is_err());
}

#[test]
fn training_is_deterministic_and_exec_independent() {
    let d = blobs(150, 4, 1.5, 6);
    for family in Family::ALL {
        let spec = ModelSpec::new(family).with_seed(3);
        assert_eq!(train(&spec, &d).unwrap(), train(&spec, &d).unwrap());
        let a = cross_validate(&spec, &d, 4, 1, Exec::Sequential).unwrap();
        let b = cross_validate(&spec, &d, 4, 1, Exec::Parallel).unwrap();
        assert_eq!(a.folds, b.folds);
    }
}

#[test]
fn models_survive_text_round_trip() {
    let d = blobs(80, 3, 2.0, 8);
    for family in Family::ALL {
        let m = train(&ModelSpec::new(family), &d).unwrap();
        let back = parse_model(&write_model(&m)).unwrap();
        assert_eq!(back, m, "{family}");
    }
}

#[test]
fn single_class_training_rejected() {
    let d = Dataset::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![Label::Car; 3], Representation::RawData).unwrap();
    assert!(train(&ModelSpec::new(Family::Knn), &d).is_err());
}

#[test]
fn dimension_and_finiteness_checked_at_predict() {
    let m = train(&ModelSpec::new(Family::Svm), &blobs(40, 3, 2.0, 9)).unwrap();
    assert!(m.predict(&[0.0, 0.0]).is_err());
    assert!(m.predict(&[0.0, f64::NAN, 0.0]).is_err());
}

#[test]
fn hand_set_svm() {
    let svm = LinearSvm { weights: vec![1.0], bias: 0.0 };
    assert_eq!(svm.predict(&[-5.0]), Label::Car);
    assert_eq!(svm.predict(&[5.0]), Label::Truck);
}

#[test]
fn hand_set_mlp_threshold() {
    // Truck logit is 10 * relu(x - 0.5); the car logit is fixed at 1.
    let mlp = Mlp { input: 1, hidden: 1, w1: vec![1.0], b1: vec![-0.5], w2: vec![0.0, 10.0], b2: [1.0, 0.0] };
    assert_eq!(mlp.predict(&[0.0]), Label::Car);
    assert_eq!(mlp.predict(&[0.55]), Label::Car);
    assert_eq!(mlp.predict(&[1.0]), Label::Truck);
}

#[test]
fn gradient_check_error_grows_with_step() {
    let m = Mlp::init(7, 16, 2);
    let x = [0.3, -1.2, 0.8, 0.1, -0.4, 1.5, -0.9];
    let small = gradient_check(&m, &x, Label::Truck, 1e-5);
    let large = gradient_check(&m, &x, Label::Truck, 1e-1);
    assert!(small < 1e-6, "{small}");
    assert!(large > small);
}

fn squash(x: f64, i: usize) -> f64 {
    match i % 3 {
        0 => x.powi(3),
        1 => (x / 4.0).exp(),
        _ => 5.0 * x - 2.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_invariant_under_monotone_maps(seed in any::<u64>(), gap in 0.0f64..3.0) {
        let d = blobs(120, 3, gap, seed);
        let mapped = Dataset::new(
            d.inputs.iter().map(|x| x.iter().enumerate().map(|(i, v)| squash(*v, i)).collect()).collect(),
            d.labels.clone(),
            d.representation,
        ).unwrap();
        let spec = ModelSpec::new(Family::DecisionTree);
        let a = train(&spec, &d).unwrap();
        let b = train(&spec, &mapped).unwrap();
        for (x, y) in d.inputs.iter().zip(&mapped.inputs) {
            prop_assert_eq!(a.predict(x).unwrap(), b.predict(y).unwrap());
        }
        if let (Model::Tree(ta), Model::Tree(tb)) = (&a.model, &b.model) {
            prop_assert_eq!(ta.root.node_count(), tb.root.node_count());
        }
    }

    #[test]
    fn knn_single_neighbour_reproduces_labels(seed in any::<u64>()) {
        let d = blobs(60, 4, 0.0, seed);
        let mut spec = ModelSpec::new(Family::Knn);
        spec.hyper.knn_k = 1;
        prop_assert_eq!(training_accuracy(&spec, &d), 1.0);
    }
}
