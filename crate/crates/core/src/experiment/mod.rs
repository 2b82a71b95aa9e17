//! End-to-end experiments: splits, GAN training with checkpoint selection,
//! dataset assembly, classifier evaluation and report emission.

mod config;
mod report;
mod run;
mod select;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use config::{DataSource, ExperimentConfig, ExperimentKind, MixtureSettings, SelectionConfig, Thresholds};
pub use report::{emit_report, summary_csv, trajectory_svg, CSV_HEADER};
pub use run::{run_exp1, run_exp2, run_exp3, run_experiment, stratified_holdout};
pub use select::{
    checkpoint_quality, score_checkpoint, select_checkpoint, CheckpointScore, CheckpointSelector, Selection,
    SelectionContext,
};

use crate::classifiers::ClassifierKind;
use crate::metrics::{Aggregate, ConfusionMatrix, QualityReport, TTest};
use crate::signal::{ClassRatio, Window, WindowId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    Baseline,
    Synth,
    Augm,
    AugmP,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "Baseline",
            Arm::Synth => "Synth",
            Arm::Augm => "Augm",
            Arm::AugmP => "AugmP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResult {
    pub classifier: ClassifierKind,
    pub kappa: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub real_windows: usize,
    pub synthetic_windows: usize,
    pub class_ratio: ClassRatio,
    pub test_digest: String,
    pub classifiers: Vec<ClassifierResult>,
}

impl ArmResult {
    pub fn mean_kappa(&self) -> f64 {
        self.classifiers.iter().map(|c| c.kappa).sum::<f64>() / self.classifiers.len() as f64
    }

    pub fn mean_sensitivity(&self) -> f64 {
        self.classifiers.iter().map(|c| c.sensitivity).sum::<f64>() / self.classifiers.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train_windows: usize,
    pub validation_windows: usize,
    pub test_windows: usize,
    pub train_ratio: ClassRatio,
    pub test_ratio: ClassRatio,
    pub test_digest: String,
    pub validation_digest: String,
}

/// One trained GAN and the checkpoint chosen from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanRecord {
    pub index: usize,
    pub seed: u64,
    pub training_windows: usize,
    pub selected_epoch: usize,
    pub fell_back: bool,
    pub validation_kappa: f64,
    pub quality: QualityReport,
    pub trajectory: Vec<CheckpointScore>,
    /// Minibatches drawn per subset (mixture training only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<usize>>,
    /// MMD² to the validation set under the shared bandwidth (exp3 only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_mmd2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub training_sets: usize,
    pub held_out_windows: usize,
    pub violations: usize,
}

impl LeakageAudit {
    fn new(held_out: &[&[Window]]) -> (Self, BTreeSet<WindowId>) {
        let ids: BTreeSet<WindowId> = held_out.iter().flat_map(|s| s.iter().map(Window::id)).collect();
        (LeakageAudit { training_sets: 0, held_out_windows: ids.len(), violations: 0 }, ids)
    }

    fn check(&mut self, held: &BTreeSet<WindowId>, training: &[Window]) {
        self.training_sets += 1;
        self.violations += training.iter().filter(|w| held.contains(&w.id())).count();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub seed: u64,
    pub split: SplitRecord,
    pub gans: Vec<GanRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_gan: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub personalization_sigma: Option<f64>,
    pub synthetic_windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic_ratio: Option<ClassRatio>,
    pub augmented_ratio: ClassRatio,
    pub arms: Vec<ArmResult>,
    pub leakage: LeakageAudit,
    pub warnings: Vec<String>,
}

impl IterationRecord {
    pub fn arm(&self, arm: Arm) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSummary {
    pub classifier: ClassifierKind,
    pub kappa: Aggregate,
    pub accuracy: Aggregate,
    pub sensitivity: Aggregate,
    pub specificity: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub classifiers: Vec<ClassifierSummary>,
}

/// One-tailed test that `arm` beats Baseline on per-iteration kappa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub arm: Arm,
    pub classifier: ClassifierKind,
    pub test: Option<TTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub iterations: Vec<IterationRecord>,
    pub summary: Vec<ArmSummary>,
    pub comparisons: Vec<Comparison>,
    pub leakage_violations: usize,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }

    pub fn arm_summary(&self, arm: Arm) -> Option<&ArmSummary> {
        self.summary.iter().find(|s| s.arm == arm)
    }

    /// Mean over classifiers of the mean kappa of `arm`.
    pub fn mean_kappa(&self, arm: Arm) -> Option<f64> {
        let s = self.arm_summary(arm)?;
        Some(s.classifiers.iter().map(|c| c.kappa.mean).sum::<f64>() / s.classifiers.len() as f64)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mixes `(base, stream, index)` into a seed with splitmix64 finalization.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-independent FNV-1a digest of window ids.
pub fn window_digest(windows: &[Window]) -> String {
    let ids: BTreeSet<WindowId> = windows.iter().map(Window::id).collect();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for id in &ids {
        for b in id.recording_id.bytes().chain([0]).chain((id.index as u64).to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}
