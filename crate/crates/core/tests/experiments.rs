//! Small end-to-end experiment runs on oracle corpora.

use physaug::classifiers::ClassifierKind;
use physaug::experiment::{emit_report, run_experiment, Arm, DataSource, ExperimentConfig, ExperimentKind};
use physaug::gan::GanConfig;
use physaug::oracle::{OracleRecordingSpec, OracleSpec};
use physaug::Error;

fn tiny_gan() -> GanConfig {
    GanConfig { hidden_size: 4, epochs: 2, checkpoint_every: 1, ..GanConfig::desk(60) }
}

fn oracle(recordings: Vec<OracleRecordingSpec>) -> DataSource {
    DataSource::Oracle(OracleSpec { seed: 21, sample_rate_hz: 2, window_seconds: 60, recordings })
}

fn config(kind: ExperimentKind, recordings: Vec<OracleRecordingSpec>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, oracle(recordings));
    cfg.iterations = Some(2);
    cfg.gan = tiny_gan();
    cfg.classifiers = vec![ClassifierKind::Knn, ClassifierKind::Rf];
    cfg.selection.classifiers = vec![ClassifierKind::Knn];
    cfg.selection.quality_classifiers = vec![ClassifierKind::Knn];
    cfg.seed = 4;
    cfg
}

fn exp1_config() -> ExperimentConfig {
    config(
        ExperimentKind::Exp1,
        vec![OracleRecordingSpec::new("r0", 1.0, 0.4), OracleRecordingSpec::new("r1", 1.0, 0.3)],
    )
}

#[test]
fn exp1_is_reproducible_and_leak_free() {
    let cfg = exp1_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.leakage_violations, 0);
    assert_eq!(a.iterations.len(), 2);
    for it in &a.iterations {
        assert_eq!(it.arms.len(), 3);
        assert!(it.leakage.training_sets >= 3);
        assert!(it.arms.iter().all(|arm| arm.test_digest == it.split.test_digest));
        let synth = it.arm(Arm::Synth).unwrap();
        assert_eq!(synth.real_windows, 0);
        assert_eq!(synth.synthetic_windows, it.split.train_windows / 2 * 2);
        assert_eq!(it.gans[0].trajectory.len(), 2);
    }
    assert_ne!(a.iterations[0].split.test_digest, a.iterations[1].split.test_digest);
}

#[test]
fn report_files_are_written() {
    let report = run_experiment(&exp1_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&report, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["report.json", "summary.csv", "trajectory.svg"]);
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    // 3 arms × 2 classifiers plus the header.
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn exp1_rejects_test_ids() {
    let mut cfg = exp1_config();
    cfg.test_ids = vec!["r0".into()];
    assert!(matches!(run_experiment(&cfg), Err(Error::Invalid(_))));
}

fn exp2_recordings(train_fraction: f64) -> Vec<OracleRecordingSpec> {
    vec![
        OracleRecordingSpec::new("t0", 0.5, 0.5),
        OracleRecordingSpec::new("t1", 0.5, 0.5),
        OracleRecordingSpec::new("x0", 1.0, train_fraction),
        OracleRecordingSpec::new("x1", 1.0, train_fraction),
    ]
}

fn exp2_config(train_fraction: f64) -> ExperimentConfig {
    let mut cfg = config(ExperimentKind::Exp2, exp2_recordings(train_fraction));
    cfg.test_ids = vec!["t0".into(), "t1".into()];
    cfg
}

#[test]
fn exp2_rebalances_to_exactly_half() {
    let report = run_experiment(&exp2_config(0.2)).unwrap();
    for it in &report.iterations {
        assert_eq!(it.augmented_ratio.apneic, 0.5);
        assert_eq!(it.synthetic_ratio.unwrap().apneic, 1.0);
        assert_eq!(it.gans.len(), 1);
        assert!(it.arm(Arm::Synth).is_none());
    }
    assert_eq!(report.leakage_violations, 0);
}

#[test]
fn exp2_on_balanced_training_set_adds_nothing() {
    let report = run_experiment(&exp2_config(0.5)).unwrap();
    for it in &report.iterations {
        assert_eq!(it.synthetic_windows, 0);
        assert!(it.gans.is_empty());
        let (base, augm) = (it.arm(Arm::Baseline).unwrap(), it.arm(Arm::Augm).unwrap());
        assert_eq!(base.classifiers, augm.classifiers);
    }
}

#[test]
fn exp2_with_apneic_majority_is_infeasible() {
    assert!(matches!(run_experiment(&exp2_config(0.8)), Err(Error::Infeasible(_))));
}

#[test]
fn exp2_without_apneic_training_windows_is_infeasible() {
    assert!(matches!(run_experiment(&exp2_config(0.0)), Err(Error::Infeasible(_))));
}

#[test]
fn exp3_records_draws_and_a_personalized_choice() {
    let mut recs = vec![OracleRecordingSpec::new("t0", 0.5, 0.5), OracleRecordingSpec::new("t1", 0.5, 0.1)];
    for i in 0..3 {
        recs.push(OracleRecordingSpec::new(format!("a{i}"), 1.0, 0.6));
        recs.push(OracleRecordingSpec::new(format!("b{i}"), 1.0, 0.05));
    }
    let mut cfg = config(ExperimentKind::Exp3, recs);
    cfg.iterations = Some(1);
    cfg.test_ids = vec!["t0".into(), "t1".into()];
    let report = run_experiment(&cfg).unwrap();
    let it = &report.iterations[0];
    assert_eq!(it.gans.len(), 3);
    assert!(it.selected_gan.unwrap() < 3);
    assert!(it.personalization_sigma.unwrap() > 0.0);
    for g in &it.gans {
        assert!(g.validation_mmd2.is_some());
        assert_eq!(g.draws.as_ref().unwrap().len(), 3);
    }
    let augm_p = it.arm(Arm::AugmP).unwrap();
    assert_eq!(augm_p.synthetic_windows, augm_p.real_windows);
    assert!((it.synthetic_ratio.unwrap().apneic - 0.5).abs() < 0.02);
    assert_eq!(report.leakage_violations, 0);
}
