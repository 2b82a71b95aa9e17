//! Front-end classifiers on raw window values.

pub mod forest;
pub mod knn;
pub mod mlp;
pub mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::signal::{Label, Window};

pub use forest::{Forest, ForestParams};
pub use knn::{Knn, KnnParams};
pub use mlp::{Mlp, MlpParams};
pub use svm::{Svm, SvmParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    Rf,
    Mlp,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [ClassifierKind::Knn, ClassifierKind::Rf, ClassifierKind::Mlp, ClassifierKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Svm => "svm",
        }
    }

    pub fn default_spec(self, seed: u64) -> ClassifierSpec {
        let params = match self {
            ClassifierKind::Knn => ClassifierParams::Knn(KnnParams::default()),
            ClassifierKind::Rf => ClassifierParams::Rf(ForestParams::default()),
            ClassifierKind::Mlp => ClassifierParams::Mlp(MlpParams::default()),
            ClassifierKind::Svm => ClassifierParams::Svm(SvmParams::default()),
        };
        ClassifierSpec { params, seed }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierParams {
    Knn(KnnParams),
    Rf(ForestParams),
    Mlp(MlpParams),
    Svm(SvmParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub params: ClassifierParams,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            ClassifierParams::Knn(_) => ClassifierKind::Knn,
            ClassifierParams::Rf(_) => ClassifierKind::Rf,
            ClassifierParams::Mlp(_) => ClassifierKind::Mlp,
            ClassifierParams::Svm(_) => ClassifierKind::Svm,
        }
    }

    /// The four classifiers with their default parameters.
    pub fn all(seed: u64) -> Vec<ClassifierSpec> {
        ClassifierKind::ALL.iter().map(|k| k.default_spec(seed)).collect()
    }
}

/// Row-major feature matrix plus targets (`true` = apneic).
pub(crate) struct Design {
    pub x: Vec<f64>,
    pub y: Vec<bool>,
    pub n: usize,
    pub d: usize,
}

impl Design {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

pub(crate) fn features(windows: &[Window], expect_len: Option<usize>) -> Result<(Vec<f64>, usize)> {
    let Some(first) = windows.first() else {
        return Err(Error::empty("no windows"));
    };
    let d = expect_len.unwrap_or(first.len());
    if d == 0 {
        return Err(Error::shape("windows have zero length"));
    }
    let mut x = Vec::with_capacity(windows.len() * d);
    for w in windows {
        if w.len() != d {
            return Err(Error::shape(format!(
                "window {}/{} has length {}, expected {d}",
                w.recording_id,
                w.index,
                w.len()
            )));
        }
        x.extend_from_slice(&w.values);
    }
    Ok((x, d))
}

pub(crate) fn design(windows: &[Window]) -> Result<Design> {
    let (x, d) = features(windows, None)?;
    let y: Vec<bool> = windows.iter().map(|w| w.label.is_apneic()).collect();
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::invalid("classifier training data contains a single class"));
    }
    Ok(Design { x, y, n: windows.len(), d })
}

fn label(apneic: bool) -> Label {
    if apneic {
        Label::Apneic
    } else {
        Label::NonApneic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Knn(Knn),
    Rf(Forest),
    Mlp(Mlp),
    Svm(Svm),
}

pub fn fit(spec: &ClassifierSpec, windows: &[Window]) -> Result<TrainedClassifier> {
    let data = design(windows)?;
    Ok(match &spec.params {
        ClassifierParams::Knn(p) => TrainedClassifier::Knn(Knn::fit(p.clone(), &data)?),
        ClassifierParams::Rf(p) => TrainedClassifier::Rf(Forest::fit(p.clone(), &data, spec.seed)?),
        ClassifierParams::Mlp(p) => TrainedClassifier::Mlp(Mlp::fit(p.clone(), &data, spec.seed)?),
        ClassifierParams::Svm(p) => TrainedClassifier::Svm(Svm::fit(p.clone(), &data)?),
    })
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::Knn(_) => ClassifierKind::Knn,
            TrainedClassifier::Rf(_) => ClassifierKind::Rf,
            TrainedClassifier::Mlp(_) => ClassifierKind::Mlp,
            TrainedClassifier::Svm(_) => ClassifierKind::Svm,
        }
    }

    /// Effective parameters of the fitted model.
    pub fn params(&self) -> ClassifierParams {
        match self {
            TrainedClassifier::Knn(m) => ClassifierParams::Knn(m.params.clone()),
            TrainedClassifier::Rf(m) => ClassifierParams::Rf(m.params.clone()),
            TrainedClassifier::Mlp(m) => ClassifierParams::Mlp(m.params.clone()),
            TrainedClassifier::Svm(m) => ClassifierParams::Svm(m.params.clone()),
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            TrainedClassifier::Knn(m) => m.d,
            TrainedClassifier::Rf(m) => m.d,
            TrainedClassifier::Mlp(m) => m.d,
            TrainedClassifier::Svm(m) => m.d,
        }
    }

    /// Higher means more apneic; thresholds differ per kind.
    pub fn score(&self, windows: &[Window]) -> Result<Vec<f64>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let d = self.input_len();
        let (x, _) = features(windows, Some(d))?;
        let rows = x.chunks_exact(d);
        Ok(match self {
            TrainedClassifier::Knn(m) => rows.map(|r| m.score_row(r)).collect(),
            TrainedClassifier::Rf(m) => rows.map(|r| m.score_row(r)).collect(),
            TrainedClassifier::Mlp(m) => m.score_rows(&x),
            TrainedClassifier::Svm(m) => m.decision_rows(&x),
        })
    }

    pub fn predict(&self, windows: &[Window]) -> Result<Vec<Label>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let d = self.input_len();
        let (x, _) = features(windows, Some(d))?;
        let rows = x.chunks_exact(d);
        let flags: Vec<bool> = match self {
            TrainedClassifier::Knn(m) => rows.map(|r| m.predict_row(r)).collect(),
            TrainedClassifier::Rf(m) => rows.map(|r| m.predict_row(r)).collect(),
            TrainedClassifier::Mlp(m) => m.score_rows(&x).into_iter().map(|p| p >= 0.5).collect(),
            TrainedClassifier::Svm(m) => m.decision_rows(&x).into_iter().map(|f| f > 0.0).collect(),
        };
        Ok(flags.into_iter().map(label).collect())
    }

    pub fn evaluate(&self, windows: &[Window]) -> Result<ConfusionMatrix> {
        let predicted = self.predict(windows)?;
        let truth: Vec<Label> = windows.iter().map(|w| w.label).collect();
        ConfusionMatrix::from_labels(&truth, &predicted)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), msg: e.to_string() })
    }
}

/// Area under the ROC curve with tied scores counted as half.
pub fn auroc(scores: &[f64], truth: &[Label]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::shape("score and label counts differ"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let pos = truth.iter().filter(|l| l.is_apneic()).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedRate("auroc"));
    }
    let rank_sum: f64 = ranks.iter().zip(truth).filter(|(_, l)| l.is_apneic()).map(|(r, _)| r).sum();
    Ok((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64)
}
