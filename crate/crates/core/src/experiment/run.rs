use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::select::{CheckpointSelector, Selection, SelectionContext};
use super::{
    derive_seed, window_digest, Arm, ArmResult, ArmSummary, ClassifierResult, ClassifierSummary, Comparison,
    ExperimentReport, GanRecord, IterationRecord, LeakageAudit, SplitRecord,
};
use crate::classifiers::fit;
use crate::error::{Error, Result};
use crate::gan::{generate_labels, train, GanConfig, GanModel};
use crate::metrics::{aggregate, cohen_kappa, confusion_stats, median_heuristic_vectors, mmd2_unbiased, t_test_one_tailed};
use crate::mixture::{make_plan, train_mixture_with, MixturePlan};
use crate::signal::{
    split_by_events, split_by_recordings, ClassRatio, Label, Recording, Split, SplitFractions, Window, WindowedDataset,
};

const ITER_STREAM: u64 = 1;
const GAN_STREAM: u64 = 2;
const SD_STREAM: u64 = 3;
const CLF_STREAM: u64 = 4;
const SELECT_STREAM: u64 = 5;
const HOLDOUT_STREAM: u64 = 6;
const MMD_STREAM: u64 = 7;
const PERSONAL_STREAM: u64 = 8;

/// Probe windows per validation window when ranking GANs for AugmP.
const PROBE_FACTOR: usize = 4;

/// `AUGMENT_DETERMINISTIC=1` runs iterations sequentially in a fixed order.
pub fn deterministic_mode() -> bool {
    std::env::var("AUGMENT_DETERMINISTIC").is_ok_and(|v| v == "1")
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        ExperimentKind::Exp1 => run_exp1(cfg),
        ExperimentKind::Exp2 => run_exp2(cfg),
        ExperimentKind::Exp3 => run_exp3(cfg),
    }
}

/// Iterations are independent; results come back in iteration order either
/// way, so parallel and sequential runs produce the same report.
fn for_iterations<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if deterministic_mode() {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != kind {
        return Err(Error::invalid(format!("config is for {:?}, not {kind:?}", cfg.experiment)));
    }
    Ok(())
}

fn check_ids(recs: &[Recording], ids: &[String]) -> Result<()> {
    let known: BTreeSet<&str> = recs.iter().map(|r| r.id.as_str()).collect();
    match ids.iter().find(|id| !known.contains(id.as_str())) {
        Some(id) => Err(Error::UnknownId(id.clone())),
        None => Ok(()),
    }
}

fn window_len(windows: &[Window]) -> Result<usize> {
    windows.first().map(Window::len).ok_or_else(|| Error::empty("no training windows"))
}

fn gan_config(cfg: &ExperimentConfig, seed: u64, window_len: usize) -> Result<GanConfig> {
    if cfg.gan.sequence_length != window_len {
        return Err(Error::invalid(format!(
            "gan.sequence_length is {} but windows have {window_len} samples",
            cfg.gan.sequence_length
        )));
    }
    Ok(GanConfig { seed, ..cfg.gan.clone() })
}

/// Alternating apneic / non-apneic labels; exactly balanced for even `n`.
fn balanced_labels(n: usize) -> Vec<Label> {
    (0..n).map(|i| if i % 2 == 0 { Label::Apneic } else { Label::NonApneic }).collect()
}

fn count_apneic(windows: &[Window]) -> usize {
    windows.iter().filter(|w| w.label.is_apneic()).count()
}

/// Splits `windows` into `(validation, rest)` with `fraction` of each class
/// in validation. Original order is kept within both parts.
pub fn stratified_holdout(windows: &[Window], fraction: f64, seed: u64) -> Result<(Vec<Window>, Vec<Window>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("holdout fraction must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut take = vec![false; windows.len()];
    for apneic in [true, false] {
        let mut idx: Vec<usize> = (0..windows.len()).filter(|&i| windows[i].label.is_apneic() == apneic).collect();
        idx.shuffle(&mut rng);
        let k = (fraction * idx.len() as f64).round() as usize;
        for &i in &idx[..k] {
            take[i] = true;
        }
    }
    let (mut val, mut rest) = (Vec::new(), Vec::new());
    for (w, t) in windows.iter().zip(take) {
        if t { val.push(w.clone()) } else { rest.push(w.clone()) }
    }
    if val.is_empty() || rest.is_empty() {
        return Err(Error::empty("holdout leaves an empty validation or test set"));
    }
    Ok((val, rest))
}

fn split_record(train: &[Window], validation: &[Window], test: &[Window]) -> Result<SplitRecord> {
    Ok(SplitRecord {
        train_windows: train.len(),
        validation_windows: validation.len(),
        test_windows: test.len(),
        train_ratio: ClassRatio::of(train)?,
        test_ratio: ClassRatio::of(test)?,
        test_digest: window_digest(test),
        validation_digest: window_digest(validation),
    })
}

fn evaluate_arm(
    arm: Arm,
    real: &[Window],
    synth: &[Window],
    test: &[Window],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ArmResult> {
    let mut train_set = real.to_vec();
    train_set.extend_from_slice(synth);
    let class_ratio = ClassRatio::of(&train_set)?;
    let mut classifiers = Vec::with_capacity(cfg.classifiers.len());
    for &kind in &cfg.classifiers {
        // Seeds depend on the classifier only, so arms with equal data agree.
        let spec = kind.default_spec(derive_seed(seed, CLF_STREAM, kind as u64));
        let confusion = fit(&spec, &train_set)?.evaluate(test)?;
        let rates = confusion_stats(&confusion)?;
        classifiers.push(ClassifierResult {
            classifier: kind,
            kappa: cohen_kappa(&confusion)?,
            accuracy: rates.accuracy,
            sensitivity: rates.sensitivity,
            specificity: rates.specificity,
            confusion,
        });
    }
    Ok(ArmResult {
        arm,
        real_windows: real.len(),
        synthetic_windows: synth.len(),
        class_ratio,
        test_digest: window_digest(test),
        classifiers,
    })
}

fn gan_record(index: usize, seed: u64, training_windows: usize, sel: &Selection) -> GanRecord {
    GanRecord {
        index,
        seed,
        training_windows,
        selected_epoch: sel.score.epoch,
        fell_back: sel.fell_back,
        validation_kappa: sel.score.validation_kappa,
        quality: sel.score.quality,
        trajectory: sel.trajectory.clone(),
        draws: None,
        validation_mmd2: None,
    }
}

fn fallback_warning(iteration: usize, gan: usize, sel: &Selection, cfg: &ExperimentConfig) -> Option<String> {
    sel.fell_back.then(|| {
        let th = cfg.selection.thresholds;
        format!(
            "iteration {iteration}, gan {gan}: no checkpoint met T >= {}{}; using epoch {} (T {:.3}, MMD² {:.4})",
            th.min_t_metric,
            th.max_mmd2.map(|m| format!(" and MMD² <= {m}")).unwrap_or_default(),
            sel.score.epoch,
            sel.score.quality.t_metric,
            sel.score.quality.mmd2
        )
    })
}

/// Offers the final model when training ended off a checkpoint boundary.
fn offer_final(sel: &mut CheckpointSelector, model: &GanModel) -> Result<()> {
    if sel.offered() == 0 || model.epoch % model.config.checkpoint_every != 0 {
        sel.offer(model)?;
    }
    Ok(())
}

fn train_selected(gan_cfg: GanConfig, windows: &[Window], ctx: SelectionContext) -> Result<Selection> {
    let epochs = gan_cfg.epochs;
    let model = GanModel::new(gan_cfg)?;
    let mut sel = CheckpointSelector::new(ctx);
    let outcome = train(model, windows, epochs, |m| sel.offer_deferred(m))?;
    offer_final(&mut sel, &outcome.model)?;
    sel.finish()
}

fn generate_or_empty(model: &GanModel, labels: &[Label], seed: u64) -> Result<Vec<Window>> {
    if labels.is_empty() { Ok(Vec::new()) } else { generate_labels(model, labels, seed) }
}

pub fn run_exp1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::Exp1)?;
    let recs = cfg.source.load()?;
    check_ids(&recs, &cfg.excluded_ids)?;
    let excluded = cfg.excluded_set();
    let kept: Vec<Recording> = recs.into_iter().filter(|r| !excluded.contains(&r.id)).collect();
    let ds = WindowedDataset::from_recordings(&kept, Split::Train)?;
    let iterations = for_iterations(cfg.iterations(), |i| exp1_iteration(cfg, &ds, i))?;
    finish_report(cfg, iterations, &[Arm::Synth, Arm::Augm])
}

fn exp1_iteration(cfg: &ExperimentConfig, ds: &WindowedDataset, i: usize) -> Result<IterationRecord> {
    let seed = derive_seed(cfg.seed, ITER_STREAM, i as u64);
    let split = split_by_events(ds, SplitFractions::HALF_QUARTER_QUARTER, seed)?;
    let (train_w, test, val) =
        (split.tagged_vec(Split::Train), split.tagged_vec(Split::Test), split.tagged_vec(Split::Validation));
    let (mut leakage, held) = LeakageAudit::new(&[&test, &val]);

    let sd_labels = balanced_labels(train_w.len() / 2 * 2);
    let gan_seed = derive_seed(seed, GAN_STREAM, 0);
    let ctx = SelectionContext {
        train: &train_w,
        validation: &val,
        sd_labels: &sd_labels,
        config: &cfg.selection,
        seed: derive_seed(seed, SELECT_STREAM, 0),
    };
    leakage.check(&held, &train_w);
    let sel = train_selected(gan_config(cfg, gan_seed, window_len(&train_w)?)?, &train_w, ctx)?;
    let sd = generate_or_empty(&sel.model, &sd_labels, derive_seed(seed, SD_STREAM, 0))?;

    let mut arms = Vec::new();
    for (arm, real, synth) in [(Arm::Baseline, &train_w[..], &[][..]), (Arm::Synth, &[][..], &sd[..]), (Arm::Augm, &train_w[..], &sd[..])] {
        leakage.check(&held, real);
        arms.push(evaluate_arm(arm, real, synth, &test, cfg, seed)?);
    }
    let warnings = fallback_warning(i, 0, &sel, cfg).into_iter().collect();
    Ok(IterationRecord {
        iteration: i,
        seed,
        split: split_record(&train_w, &val, &test)?,
        gans: vec![gan_record(0, gan_seed, train_w.len(), &sel)],
        selected_gan: None,
        personalization_sigma: None,
        synthetic_windows: sd.len(),
        synthetic_ratio: ClassRatio::of(&sd).ok(),
        augmented_ratio: ClassRatio::of(train_w.iter().chain(&sd))?,
        arms,
        leakage,
        warnings,
    })
}

/// Per-recording split shared by exp2 and exp3: (train, test pair).
fn recording_split(cfg: &ExperimentConfig, recs: &[Recording]) -> Result<(Vec<Window>, Vec<Window>)> {
    let rd = split_by_recordings(recs, &cfg.test_set(), &cfg.excluded_set())?;
    let (train_w, pair) = (rd.tagged_vec(Split::Train), rd.tagged_vec(Split::Test));
    if train_w.is_empty() {
        return Err(Error::empty("no training recordings left after removing test and excluded ids"));
    }
    Ok((train_w, pair))
}

pub fn run_exp2(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::Exp2)?;
    let recs = cfg.source.load()?;
    let (train_w, pair) = recording_split(cfg, &recs)?;
    let n_a = count_apneic(&train_w);
    if n_a == 0 {
        return Err(Error::Infeasible("removing the excluded recordings leaves no apneic training windows".into()));
    }
    if n_a * 2 > train_w.len() {
        return Err(Error::Infeasible(format!(
            "training set is {n_a}/{} apneic; rebalancing only adds apneic windows",
            train_w.len()
        )));
    }
    let iterations = for_iterations(cfg.iterations(), |i| exp2_iteration(cfg, &train_w, &pair, i))?;
    finish_report(cfg, iterations, &[Arm::Augm])
}

fn exp2_iteration(cfg: &ExperimentConfig, train_w: &[Window], pair: &[Window], i: usize) -> Result<IterationRecord> {
    let seed = derive_seed(cfg.seed, ITER_STREAM, i as u64);
    let (val, test) = stratified_holdout(pair, cfg.validation_fraction, derive_seed(seed, HOLDOUT_STREAM, 0))?;
    let (mut leakage, held) = LeakageAudit::new(&[&test, &val]);
    let n_a = count_apneic(train_w);
    let needed = train_w.len() - 2 * n_a;
    let sd_labels = vec![Label::Apneic; needed];
    let gan_seed = derive_seed(seed, GAN_STREAM, 0);

    let mut gans = Vec::new();
    let mut warnings = Vec::new();
    let sd = if needed == 0 {
        Vec::new()
    } else {
        let ctx = SelectionContext {
            train: train_w,
            validation: &val,
            sd_labels: &sd_labels,
            config: &cfg.selection,
            seed: derive_seed(seed, SELECT_STREAM, 0),
        };
        leakage.check(&held, train_w);
        let sel = train_selected(gan_config(cfg, gan_seed, window_len(train_w)?)?, train_w, ctx)?;
        warnings.extend(fallback_warning(i, 0, &sel, cfg));
        gans.push(gan_record(0, gan_seed, train_w.len(), &sel));
        generate_labels(&sel.model, &sd_labels, derive_seed(seed, SD_STREAM, 0))?
    };
    if 2 * (n_a + count_apneic(&sd)) != train_w.len() + sd.len() {
        return Err(Error::invalid("rebalanced set is not exactly 50/50"));
    }

    let mut arms = Vec::new();
    for (arm, synth) in [(Arm::Baseline, &[][..]), (Arm::Augm, &sd[..])] {
        leakage.check(&held, train_w);
        arms.push(evaluate_arm(arm, train_w, synth, &test, cfg, seed)?);
    }
    Ok(IterationRecord {
        iteration: i,
        seed,
        split: split_record(train_w, &val, &test)?,
        gans,
        selected_gan: None,
        personalization_sigma: None,
        synthetic_windows: sd.len(),
        synthetic_ratio: ClassRatio::of(&sd).ok(),
        augmented_ratio: ClassRatio::of(train_w.iter().chain(&sd))?,
        arms,
        leakage,
        warnings,
    })
}

pub fn run_exp3(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::Exp3)?;
    let recs = cfg.source.load()?;
    let (train_w, pair) = recording_split(cfg, &recs)?;
    let (test_ids, excluded) = (cfg.test_set(), cfg.excluded_set());
    let train_recs: Vec<Recording> =
        recs.into_iter().filter(|r| !test_ids.contains(&r.id) && !excluded.contains(&r.id)).collect();
    let plan = match &cfg.mixture.plan {
        Some(p) => p.clone(),
        None => make_plan(&train_recs, cfg.mixture.k_sub, cfg.mixture.p, cfg.mixture.pairing)?,
    };
    plan.validate()?;
    plan.validate_against(train_recs.iter().map(|r| r.id.as_str()))?;
    let iterations = for_iterations(cfg.iterations(), |i| exp3_iteration(cfg, &plan, &train_w, &pair, i))?;
    finish_report(cfg, iterations, &[Arm::Augm, Arm::AugmP])
}

/// `n` split into `k` shares differing by at most one.
fn equal_shares(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|j| n / k + usize::from(j < n % k)).collect()
}

fn exp3_iteration(
    cfg: &ExperimentConfig,
    plan: &MixturePlan,
    train_w: &[Window],
    pair: &[Window],
    i: usize,
) -> Result<IterationRecord> {
    let seed = derive_seed(cfg.seed, ITER_STREAM, i as u64);
    let (val, test) = stratified_holdout(pair, cfg.validation_fraction, derive_seed(seed, HOLDOUT_STREAM, 0))?;
    let (mut leakage, held) = LeakageAudit::new(&[&test, &val]);
    let n = train_w.len();
    let k = plan.k_sub();
    let sd_labels = balanced_labels(n);
    let gan_seed = derive_seed(seed, GAN_STREAM, 0);
    let gan_cfg = gan_config(cfg, gan_seed, window_len(train_w)?)?;

    let mut selectors: Vec<CheckpointSelector> = (0..k)
        .map(|j| {
            CheckpointSelector::new(SelectionContext {
                train: train_w,
                validation: &val,
                sd_labels: &sd_labels,
                config: &cfg.selection,
                seed: derive_seed(seed, SELECT_STREAM, j as u64),
            })
        })
        .collect();
    leakage.check(&held, train_w);
    let trained = train_mixture_with(plan, train_w, &gan_cfg, |j, m| selectors[j].offer_deferred(m))?;
    for (sel, g) in selectors.iter_mut().zip(&trained) {
        offer_final(sel, &g.outcome.model)?;
    }
    let selections: Vec<Selection> = selectors.into_iter().map(CheckpointSelector::finish).collect::<Result<_>>()?;

    // Augm: equal shares from every GAN.
    let mut sd_aug = Vec::with_capacity(n);
    for (j, (sel, share)) in selections.iter().zip(equal_shares(n, k)).enumerate() {
        sd_aug.extend(generate_or_empty(&sel.model, &balanced_labels(share), derive_seed(seed, SD_STREAM, j as u64))?);
    }

    // AugmP: the GAN closest to validation under one shared bandwidth.
    let probe_labels: Vec<Label> = val.iter().map(|w| w.label).cycle().take(PROBE_FACTOR * val.len()).collect();
    let probes: Vec<Vec<Window>> = selections
        .iter()
        .enumerate()
        .map(|(j, s)| generate_labels(&s.model, &probe_labels, derive_seed(seed, MMD_STREAM, j as u64)))
        .collect::<Result<_>>()?;
    let pool: Vec<&[f64]> = val.iter().chain(probes.iter().flatten()).map(|w| w.values.as_slice()).collect();
    let sigma = median_heuristic_vectors(&pool)?;
    let mmds: Vec<f64> = probes.iter().map(|p| mmd2_unbiased(&val, p, sigma)).collect::<Result<_>>()?;
    let best = (0..k).fold(0, |b, j| if mmds[j] < mmds[b] { j } else { b });
    let sd_p = generate_labels(&selections[best].model, &sd_labels, derive_seed(seed, PERSONAL_STREAM, best as u64))?;

    let mut arms = Vec::new();
    for (arm, synth) in [(Arm::Baseline, &[][..]), (Arm::Augm, &sd_aug[..]), (Arm::AugmP, &sd_p[..])] {
        leakage.check(&held, train_w);
        arms.push(evaluate_arm(arm, train_w, synth, &test, cfg, seed)?);
    }

    let mut warnings = Vec::new();
    let mut gans = Vec::with_capacity(k);
    for (j, (sel, g)) in selections.iter().zip(&trained).enumerate() {
        warnings.extend(fallback_warning(i, j, sel, cfg));
        let mut rec = gan_record(j, gan_seed.wrapping_add(j as u64), n, sel);
        rec.draws = Some(g.draws.clone());
        rec.validation_mmd2 = Some(mmds[j]);
        gans.push(rec);
    }
    Ok(IterationRecord {
        iteration: i,
        seed,
        split: split_record(train_w, &val, &test)?,
        gans,
        selected_gan: Some(best),
        personalization_sigma: Some(sigma),
        synthetic_windows: sd_aug.len(),
        synthetic_ratio: ClassRatio::of(&sd_aug).ok(),
        augmented_ratio: ClassRatio::of(train_w.iter().chain(&sd_aug))?,
        arms,
        leakage,
        warnings,
    })
}

fn finish_report(cfg: &ExperimentConfig, iterations: Vec<IterationRecord>, compared: &[Arm]) -> Result<ExperimentReport> {
    for it in &iterations {
        if it.arms.iter().any(|a| a.test_digest != it.split.test_digest) {
            return Err(Error::invalid(format!("iteration {}: arms saw different test sets", it.iteration)));
        }
    }
    let arm_order: Vec<Arm> = iterations.first().map(|it| it.arms.iter().map(|a| a.arm).collect()).unwrap_or_default();
    let mut per: BTreeMap<(Arm, usize), Vec<&ClassifierResult>> = BTreeMap::new();
    for it in &iterations {
        for a in &it.arms {
            for (c, r) in a.classifiers.iter().enumerate() {
                per.entry((a.arm, c)).or_default().push(r);
            }
        }
    }
    let stat = |rs: &[&ClassifierResult], f: fn(&ClassifierResult) -> f64| aggregate(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
    let mut summary = Vec::new();
    for &arm in &arm_order {
        let mut classifiers = Vec::new();
        for (c, &kind) in cfg.classifiers.iter().enumerate() {
            let rs = per.get(&(arm, c)).map(Vec::as_slice).unwrap_or(&[]);
            classifiers.push(ClassifierSummary {
                classifier: kind,
                kappa: stat(rs, |r| r.kappa)?,
                accuracy: stat(rs, |r| r.accuracy)?,
                sensitivity: stat(rs, |r| r.sensitivity)?,
                specificity: stat(rs, |r| r.specificity)?,
            });
        }
        summary.push(ArmSummary { arm, classifiers });
    }

    let kappas = |arm: Arm, c: usize| -> Vec<f64> {
        per.get(&(arm, c)).map(|rs| rs.iter().map(|r| r.kappa).collect()).unwrap_or_default()
    };
    let mut comparisons = Vec::new();
    for &arm in compared {
        for (c, &kind) in cfg.classifiers.iter().enumerate() {
            let (test, note) = match t_test_one_tailed(&kappas(arm, c), &kappas(Arm::Baseline, c)) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            comparisons.push(Comparison { arm, classifier: kind, test, note });
        }
    }

    let leakage_violations = iterations.iter().map(|it| it.leakage.violations).sum();
    let mut warnings: Vec<String> = iterations.iter().flat_map(|it| it.warnings.iter().cloned()).collect();
    if leakage_violations > 0 {
        warnings.push(format!("{leakage_violations} held-out windows found in training sets"));
    }
    Ok(ExperimentReport {
        experiment: cfg.experiment,
        config: cfg.clone(),
        iterations,
        summary,
        comparisons,
        leakage_violations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(id: &str, i: usize, label: Label) -> Window {
        Window { recording_id: id.into(), index: i, values: vec![i as f64], label }
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let ws: Vec<Window> =
            (0..40).map(|i| win("a", i, if i < 12 { Label::Apneic } else { Label::NonApneic })).collect();
        let (val, rest) = stratified_holdout(&ws, 0.25, 1).unwrap();
        assert_eq!(count_apneic(&val), 3);
        assert_eq!(val.len(), 10);
        assert_eq!(rest.len(), 30);
        let ids: BTreeSet<_> = val.iter().map(Window::id).collect();
        assert!(rest.iter().all(|w| !ids.contains(&w.id())));
    }

    #[test]
    fn shares_cover_total() {
        assert_eq!(equal_shares(900, 3), vec![300, 300, 300]);
        assert_eq!(equal_shares(10, 3), vec![4, 3, 3]);
        assert_eq!(equal_shares(10, 3).iter().sum::<usize>(), 10);
    }

    #[test]
    fn balanced_labels_are_exact_for_even_counts() {
        let l = balanced_labels(10);
        assert_eq!(l.iter().filter(|l| l.is_apneic()).count(), 5);
    }
}
