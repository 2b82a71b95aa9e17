//! Metric implementations against independently written references.

use physaug::metrics::{cohen_kappa, confusion_stats, mmd2_unbiased, t_metric, t_test_one_tailed, ConfusionMatrix};
use physaug::signal::{Label, Window};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::oracles::{kappa_reference, mmd_reference, t_sf_simpson};

fn win(values: Vec<f64>) -> Window {
    Window { recording_id: "r".into(), index: 0, values, label: Label::NonApneic }
}

#[test]
fn kappa_and_rates_match_reference_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let cm = ConfusionMatrix::new(
            rng.random_range(1..500),
            rng.random_range(1..500),
            rng.random_range(0..200),
            rng.random_range(0..200),
        );
        assert!((cohen_kappa(&cm).unwrap() - kappa_reference(&cm)).abs() <= 1e-9, "{cm:?}");
        let r = confusion_stats(&cm).unwrap();
        let n = cm.total() as f64;
        assert!((r.accuracy - (cm.tp + cm.tn) as f64 / n).abs() <= 1e-12);
        assert!((r.sensitivity - cm.tp as f64 / (cm.tp + cm.fn_) as f64).abs() <= 1e-12);
        assert!((r.specificity - cm.tn as f64 / (cm.tn + cm.fp) as f64).abs() <= 1e-12);
    }
}

#[test]
fn t_metric_is_harmonic_mean() {
    assert!((t_metric(0.5, 1.0) - 2.0 / 3.0).abs() < 5e-4);
}

#[test]
fn mmd_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (n, m, d) = (rng.random_range(2..=64), rng.random_range(2..=64), rng.random_range(1..=12));
        let shift: f64 = rng.random_range(0.0..1.0);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0) + shift).collect()).collect();
        let sigma = rng.random_range(0.2..3.0);
        let xw: Vec<Window> = x.iter().cloned().map(win).collect();
        let yw: Vec<Window> = y.iter().cloned().map(win).collect();
        let got = mmd2_unbiased(&xw, &yw, sigma).unwrap();
        assert!((got - mmd_reference(&x, &y, sigma)).abs() <= 1e-12);
    }
}

#[test]
fn point_mass_against_itself_is_zero() {
    let x = vec![win(vec![0.25, -0.5, 0.75]); 4];
    assert_eq!(mmd2_unbiased(&x, &x, 0.7).unwrap(), 0.0);
}

#[test]
fn welch_test_matches_direct_formula_and_quadrature() {
    let a = [2.1, 2.5, 2.3, 2.2];
    let b = [1.9, 2.0, 1.8, 2.1];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (sa, sb) = (var(&a) / 4.0, var(&b) / 4.0);
    let t = (mean(&a) - mean(&b)) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / 3.0 + sb * sb / 3.0);
    let got = t_test_one_tailed(&a, &b).unwrap();
    assert!((got.t - t).abs() < 1e-12);
    assert!((got.df - df).abs() < 1e-12);
    assert!((got.p_value - t_sf_simpson(t, df)).abs() < 1e-6, "{} vs {}", got.p_value, t_sf_simpson(t, df));
    assert!(got.p_value < 0.05);
}

proptest! {
    #[test]
    fn kappa_is_bounded_and_label_symmetric(tp in 0u64..300, tn in 0u64..300, fp in 0u64..300, fn_ in 0u64..300) {
        prop_assume!(tp + tn + fp + fn_ > 0);
        let cm = ConfusionMatrix::new(tp, tn, fp, fn_);
        let k = cohen_kappa(&cm).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        prop_assert!((k - cohen_kappa(&cm.swapped()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mmd_is_symmetric(seed in 0u64..1000, n in 2usize..12, m in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Window> = (0..n).map(|_| win((0..4).map(|_| rng.random_range(-1.0..1.0)).collect())).collect();
        let y: Vec<Window> = (0..m).map(|_| win((0..4).map(|_| rng.random_range(-1.0..1.0)).collect())).collect();
        prop_assert_eq!(mmd2_unbiased(&x, &y, 1.0).unwrap(), mmd2_unbiased(&y, &x, 1.0).unwrap());
    }

    #[test]
    fn t_metric_lies_between_min_and_max(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let t = t_metric(a, b);
        prop_assert!(t >= a.min(b) - 1e-12 && t <= a.max(b) + 1e-12);
    }
}
