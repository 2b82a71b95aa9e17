use serde::{Deserialize, Serialize};

use super::confusion::t_metric;
use super::mmd::mmd_test;
use crate::classifiers::{auroc, fit, ClassifierSpec};
use crate::error::{Error, Result};
use crate::signal::{Label, Window};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMetric {
    #[default]
    Accuracy,
    Auroc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub tstr: f64,
    pub trts: f64,
    pub t_metric: f64,
    pub mmd2: f64,
    pub kernel_sigma: f64,
    pub mmd_t_stat: f64,
}

/// Trains every classifier on `train`, scores it on `eval`, and returns the
/// unweighted mean.
fn cross_score(train: &[Window], eval: &[Window], specs: &[ClassifierSpec], metric: ScoreMetric) -> Result<f64> {
    if specs.is_empty() {
        return Err(Error::invalid("no classifiers given"));
    }
    if eval.is_empty() {
        return Err(Error::empty("evaluation set is empty"));
    }
    let truth: Vec<Label> = eval.iter().map(|w| w.label).collect();
    let mut total = 0.0;
    for spec in specs {
        let clf = fit(spec, train)?;
        total += match metric {
            ScoreMetric::Accuracy => {
                let cm = clf.evaluate(eval)?;
                (cm.tp + cm.tn) as f64 / cm.total() as f64
            }
            ScoreMetric::Auroc => auroc(&clf.score(eval)?, &truth)?,
        };
    }
    Ok(total / specs.len() as f64)
}

/// Train on synthetic, test on real.
pub fn tstr(synth_train: &[Window], real_eval: &[Window], specs: &[ClassifierSpec], metric: ScoreMetric) -> Result<f64> {
    cross_score(synth_train, real_eval, specs, metric)
}

/// Train on real, test on synthetic.
pub fn trts(real_train: &[Window], synth_eval: &[Window], specs: &[ClassifierSpec], metric: ScoreMetric) -> Result<f64> {
    cross_score(real_train, synth_eval, specs, metric)
}

pub fn evaluate_quality(
    real: &[Window],
    synth: &[Window],
    specs: &[ClassifierSpec],
    metric: ScoreMetric,
    seed: u64,
) -> Result<QualityReport> {
    let s = tstr(synth, real, specs, metric)?;
    let r = trts(real, synth, specs, metric)?;
    let mmd = mmd_test(real, synth, seed)?;
    Ok(QualityReport {
        tstr: s,
        trts: r,
        t_metric: t_metric(s, r),
        mmd2: mmd.mmd2,
        kernel_sigma: mmd.sigma,
        mmd_t_stat: mmd.t_stat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testdata::blobs;
    use crate::classifiers::ClassifierKind;

    fn cheap() -> Vec<ClassifierSpec> {
        vec![ClassifierKind::Knn.default_spec(0), ClassifierKind::Rf.default_spec(0)]
    }

    #[test]
    fn identical_sets_are_symmetric() {
        let w = blobs(40, 4, 0.5, 1);
        let a = tstr(&w, &w, &cheap(), ScoreMetric::Accuracy).unwrap();
        let b = trts(&w, &w, &cheap(), ScoreMetric::Accuracy).unwrap();
        assert_eq!(a, b);
        assert!(a >= 0.95);
    }

    #[test]
    fn flipped_labels_score_low() {
        let real = blobs(40, 4, 0.5, 2);
        let flipped: Vec<Window> = blobs(40, 4, 0.5, 3)
            .into_iter()
            .map(|mut w| {
                w.label = w.label.flipped();
                w
            })
            .collect();
        assert!(tstr(&flipped, &real, &cheap(), ScoreMetric::Accuracy).unwrap() <= 0.5);
        assert!(tstr(&flipped, &real, &cheap(), ScoreMetric::Auroc).unwrap() <= 0.5);
    }

    #[test]
    fn single_class_training_rejected() {
        let real = blobs(20, 3, 0.5, 4);
        let one: Vec<Window> = real.iter().filter(|w| w.label.is_apneic()).cloned().collect();
        assert!(tstr(&one, &real, &cheap(), ScoreMetric::Accuracy).is_err());
    }

    #[test]
    fn report_is_consistent() {
        let real = blobs(40, 4, 0.5, 5);
        let synth = blobs(40, 4, 0.5, 6);
        let q = evaluate_quality(&real, &synth, &cheap(), ScoreMetric::Accuracy, 1).unwrap();
        assert_eq!(q.t_metric, t_metric(q.tstr, q.trts));
        assert!(q.kernel_sigma > 0.0);
    }
}
