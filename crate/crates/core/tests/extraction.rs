mod common;

use common::{boxcar, rig, traces};
use proptest::prelude::*;
use rfprint::channel::NoiseModel;
use rfprint::features::{bulge, count_deep_minima, estimate_length, extract_pass, ExtractConfig};
use rfprint::scenario::{sample_fleet, Direction, FleetSpec};
use rfprint::Error;

fn kurtosis_two_pass(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    v.iter().map(|x| ((x - mean) / var.sqrt()).powi(4)).sum::<f64>() / n
}

#[test]
fn bulge_of_two_point_distribution_is_one() {
    assert!((bulge(&[-1.0, 1.0, -1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bulge_rejects_constant_and_short_input() {
    assert!(matches!(bulge(&[3.0, 3.0, 3.0]), Err(Error::DegenerateEvent(_))));
    assert!(matches!(bulge(&[3.0]), Err(Error::DegenerateEvent(_))));
}

#[test]
fn deep_minima_merge_plateaus() {
    // Two separate dips below -8, one of them a flat plateau.
    let v = [-1.0, -9.0, -9.0, -2.0, -10.0, -3.0, -5.0, -1.0];
    assert_eq!(count_deep_minima(&v, -8.0), 2);
}

#[test]
fn length_formula() {
    assert!((estimate_length(20.0, [0.3, 0.3, 0.3]) - 6.0).abs() < 1e-12);
}

#[test]
fn velocity_within_one_sample_bound() {
    let r = rig();
    let round = r.sched.round_duration();
    for v_true in [5.0, 15.0, 30.0] {
        let v = boxcar(4.5, 1.5, v_true, Direction::Forward);
        let t = traces(&r, &v, &NoiseModel::noiseless(), 0);
        let p = extract_pass(&t, &r.links, &ExtractConfig::default()).unwrap();
        let bound = v_true * v_true * round / r.cfg.post_spacing;
        assert!((p.features.v_est - v_true).abs() <= bound, "v={v_true} est={}", p.features.v_est);
    }
}

#[test]
fn length_estimate_increases_with_length() {
    let r = rig();
    let mut last = f64::NEG_INFINITY;
    for i in 0..12 {
        let len = 3.5 + i as f64 * 1.25;
        let v = boxcar(len, 1.5, 18.0, Direction::Forward);
        let p = extract_pass(&traces(&r, &v, &NoiseModel::noiseless(), 0), &r.links, &ExtractConfig::default()).unwrap();
        assert!(p.features.l_est > last, "length {len}: {} after {last}", p.features.l_est);
        last = p.features.l_est;
    }
}

#[test]
fn reverse_passes_detected_without_noise() {
    let r = rig();
    let spec = FleetSpec { reverse_fraction: 1.0, rng_seed: 21, ..FleetSpec::default() };
    for v in sample_fleet(&spec, 40).unwrap() {
        let p = extract_pass(&traces(&r, &v, &NoiseModel::noiseless(), 0), &r.links, &ExtractConfig::default()).unwrap();
        assert_eq!(p.direction, Direction::Reverse);
        let on: Vec<f64> = [0usize, 4, 8].iter().map(|&i| p.events[i].as_ref().unwrap().t_start).collect();
        assert!(on[0] > on[1] && on[1] > on[2]);
    }
}

#[test]
fn empty_road_is_incomplete() {
    let r = rig();
    let mut v = boxcar(4.5, 1.5, 20.0, Direction::Forward);
    // Too low to cut any line of sight.
    v.silhouette[0].height = 0.2;
    let err = extract_pass(&traces(&r, &v, &NoiseModel::noiseless(), 0), &r.links, &ExtractConfig::default());
    assert!(matches!(err, Err(Error::IncompletePass(_))), "{err:?}");
}

#[test]
fn raw_vector_is_normalised() {
    let r = rig();
    let v = boxcar(12.0, 3.5, 15.0, Direction::Forward);
    let p = extract_pass(&traces(&r, &v, &NoiseModel::default(), 4), &r.links, &ExtractConfig::default()).unwrap();
    let n = p.raw.values.len() as f64;
    assert_eq!(p.raw.values.len(), 64);
    let mean = p.raw.values.iter().sum::<f64>() / n;
    let var = p.raw.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-9);
    assert!((var - 1.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn bulge_at_least_one(v in prop::collection::vec(-50.0f64..50.0, 2..200)) {
        if let Ok(b) = bulge(&v) {
            prop_assert!(b >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn bulge_matches_two_pass_oracle(v in prop::collection::vec(-40.0f64..0.0, 4..120)) {
        prop_assume!(v.iter().any(|x| *x != v[0]));
        let b = bulge(&v).unwrap();
        let o = kurtosis_two_pass(&v);
        prop_assert!((b - o).abs() <= 1e-9 * o);
    }

    #[test]
    fn bulge_affine_invariant(
        v in prop::collection::vec(-40.0f64..0.0, 4..60),
        scale in 0.1f64..10.0,
        shift in -30.0f64..30.0,
    ) {
        prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-3));
        let w: Vec<f64> = v.iter().map(|x| scale * x + shift).collect();
        let (a, b) = (bulge(&v).unwrap(), bulge(&w).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn features_ignore_global_offset(seed in any::<u64>(), offset in -40i32..40, truck in any::<bool>()) {
        let r = rig();
        let v = if truck { boxcar(12.0, 3.5, 16.0, Direction::Forward) } else { boxcar(4.5, 1.5, 21.0, Direction::Forward) };
        let t = traces(&r, &v, &NoiseModel::default(), seed);
        let shifted: Vec<_> = t.iter().map(|tr| tr.shifted(offset)).collect();
        let ex = ExtractConfig::default();
        let a = extract_pass(&t, &r.links, &ex);
        let b = extract_pass(&shifted, &r.links, &ex);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.features.to_array(), b.features.to_array());
                prop_assert_eq!(a.raw.values, b.raw.values);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }
}
