use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SelectionConfig};
use super::derive_seed;
use crate::classifiers::fit;
use crate::error::{Error, Result};
use crate::gan::{generate_labels, GanModel};
use crate::metrics::{cohen_kappa, mmd_test, t_metric, trts, tstr, QualityReport};
use crate::signal::{Label, Window};

/// Scores of one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointScore {
    pub epoch: usize,
    pub validation_kappa: f64,
    pub quality: QualityReport,
    pub passes: bool,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub model: GanModel,
    pub score: CheckpointScore,
    /// No checkpoint met the thresholds; the best overall was taken.
    pub fell_back: bool,
    pub trajectory: Vec<CheckpointScore>,
}

/// What a checkpoint is judged against.
#[derive(Clone, Copy, Debug)]
pub struct SelectionContext<'a> {
    /// Real training windows the synthetic set is added to.
    pub train: &'a [Window],
    pub validation: &'a [Window],
    /// Labels of the synthetic windows added to `train`.
    pub sd_labels: &'a [Label],
    pub config: &'a SelectionConfig,
    pub seed: u64,
}

impl SelectionContext<'_> {
    fn generated_classes(&self) -> (bool, bool) {
        let a = self.sd_labels.iter().any(|l| l.is_apneic());
        let n = self.sd_labels.iter().any(|l| !l.is_apneic());
        if a || n { (a, n) } else { (true, true) }
    }
}

/// Mean validation kappa of classifiers trained on `train ∪ synth`.
fn validation_kappa(ctx: &SelectionContext, synth: &[Window], seed: u64) -> Result<f64> {
    let mut ad = ctx.train.to_vec();
    ad.extend_from_slice(synth);
    let specs = ExperimentConfig::specs(&ctx.config.classifiers, seed);
    let mut total = 0.0;
    for spec in &specs {
        let cm = fit(spec, &ad)?.evaluate(ctx.validation)?;
        total += cohen_kappa(&cm)?;
    }
    Ok(total / specs.len() as f64)
}

/// TSTR, TRTS and MMD against the validation windows of the generated
/// classes. A class the model does not generate is filled from the real
/// training windows for TSTR.
pub fn checkpoint_quality(model: &GanModel, ctx: &SelectionContext, seed: u64) -> Result<QualityReport> {
    let (gen_a, gen_n) = ctx.generated_classes();
    let wanted = |l: Label| if l.is_apneic() { gen_a } else { gen_n };
    let real: Vec<Window> = ctx.validation.iter().filter(|w| wanted(w.label)).cloned().collect();
    if real.is_empty() {
        return Err(Error::empty("validation set has no windows of the generated class"));
    }
    let labels: Vec<Label> = real.iter().map(|w| w.label).collect();
    let synth = generate_labels(model, &labels, derive_seed(seed, 1, 0))?;
    let mut synth_train = synth.clone();
    synth_train.extend(ctx.train.iter().filter(|w| !wanted(w.label)).cloned());

    let specs = ExperimentConfig::specs(&ctx.config.quality_classifiers, seed);
    let s = tstr(&synth_train, ctx.validation, &specs, ctx.config.metric)?;
    let r = trts(ctx.validation, &synth, &specs, ctx.config.metric)?;
    let mmd = mmd_test(&real, &synth, derive_seed(seed, 2, 0))?;
    Ok(QualityReport {
        tstr: s,
        trts: r,
        t_metric: t_metric(s, r),
        mmd2: mmd.mmd2,
        kernel_sigma: mmd.sigma,
        mmd_t_stat: mmd.t_stat,
    })
}

pub fn score_checkpoint(model: &GanModel, ctx: &SelectionContext) -> Result<CheckpointScore> {
    if ctx.validation.is_empty() {
        return Err(Error::empty("checkpoint selection needs validation windows"));
    }
    let seed = derive_seed(ctx.seed, 10, model.epoch as u64);
    let synth = if ctx.sd_labels.is_empty() {
        Vec::new()
    } else {
        generate_labels(model, ctx.sd_labels, seed)?
    };
    let validation_kappa = validation_kappa(ctx, &synth, seed)?;
    let quality = checkpoint_quality(model, ctx, seed)?;
    let th = ctx.config.thresholds;
    let passes = quality.t_metric >= th.min_t_metric && th.max_mmd2.is_none_or(|m| quality.mmd2 <= m);
    Ok(CheckpointScore { epoch: model.epoch, validation_kappa, quality, passes })
}

/// Incremental selection: checkpoints are scored as training emits them and
/// only the current leaders are kept.
pub struct CheckpointSelector<'a> {
    ctx: SelectionContext<'a>,
    best_passing: Option<(CheckpointScore, GanModel)>,
    best_overall: Option<(CheckpointScore, GanModel)>,
    trajectory: Vec<CheckpointScore>,
    error: Option<Error>,
}

impl<'a> CheckpointSelector<'a> {
    pub fn new(ctx: SelectionContext<'a>) -> Self {
        CheckpointSelector { ctx, best_passing: None, best_overall: None, trajectory: Vec::new(), error: None }
    }

    pub fn offer(&mut self, model: &GanModel) -> Result<()> {
        let score = score_checkpoint(model, &self.ctx)?;
        let better = |slot: &Option<(CheckpointScore, GanModel)>| {
            slot.as_ref().is_none_or(|(s, _)| score.validation_kappa > s.validation_kappa)
        };
        if score.passes && better(&self.best_passing) {
            self.best_passing = Some((score.clone(), model.clone()));
        }
        if better(&self.best_overall) {
            self.best_overall = Some((score.clone(), model.clone()));
        }
        self.trajectory.push(score);
        Ok(())
    }

    /// Like `offer`, but keeps the first error for `finish` so it can run
    /// inside a training callback.
    pub fn offer_deferred(&mut self, model: &GanModel) {
        if self.error.is_none() {
            if let Err(e) = self.offer(model) {
                self.error = Some(e);
            }
        }
    }

    pub fn offered(&self) -> usize {
        self.trajectory.len()
    }

    pub fn finish(self) -> Result<Selection> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let (fell_back, (score, model)) = match (self.best_passing, self.best_overall) {
            (Some(p), _) => (false, p),
            (None, Some(o)) => (true, o),
            (None, None) => return Err(Error::empty("no checkpoints to select from")),
        };
        Ok(Selection { model, score, fell_back, trajectory: self.trajectory })
    }
}

/// Best checkpoint by validation kappa among those meeting the thresholds,
/// or the best overall with `fell_back` set.
pub fn select_checkpoint(checkpoints: &[GanModel], ctx: SelectionContext) -> Result<Selection> {
    if checkpoints.is_empty() {
        return Err(Error::empty("no checkpoints to select from"));
    }
    if ctx.validation.is_empty() {
        return Err(Error::empty("checkpoint selection needs validation windows"));
    }
    let mut sel = CheckpointSelector::new(ctx);
    for m in checkpoints {
        sel.offer(m)?;
    }
    sel.finish()
}
