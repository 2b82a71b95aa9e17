use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, ClassifierSpec};
use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::metrics::ScoreMetric;
use crate::mixture::{MixturePlan, PairingRule};
use crate::oracle::{generate_corpus, OracleSpec};
use crate::signal::{load_recordings_dir, preprocess, Recording};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Exp1,
    Exp2,
    Exp3,
}

impl ExperimentKind {
    pub fn default_iterations(self) -> usize {
        match self {
            ExperimentKind::Exp1 => 15,
            ExperimentKind::Exp2 | ExperimentKind::Exp3 => 5,
        }
    }
}

/// Where recordings come from. Corpus directories hold one Recording JSON
/// per file, at any sample rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Oracle(OracleSpec),
    Corpus(PathBuf),
}

impl DataSource {
    /// Loads and preprocesses every recording, sorted by id.
    pub fn load(&self) -> Result<Vec<Recording>> {
        let raw = match self {
            DataSource::Oracle(spec) => generate_corpus(spec)?,
            DataSource::Corpus(dir) => load_recordings_dir(dir)?,
        };
        let mut recs: Vec<Recording> = raw.iter().map(preprocess).collect();
        recs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = recs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::invalid(format!("duplicate recording id {}", w[0].id)));
        }
        if recs.is_empty() {
            return Err(Error::empty("data source has no recordings"));
        }
        Ok(recs)
    }
}

/// Acceptance bounds a checkpoint must meet to be preferred.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub min_t_metric: f64,
    pub max_mmd2: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { min_t_metric: 0.7, max_mmd2: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Classifiers whose mean validation kappa ranks checkpoints.
    pub classifiers: Vec<ClassifierKind>,
    /// Classifiers behind TSTR and TRTS.
    pub quality_classifiers: Vec<ClassifierKind>,
    pub metric: ScoreMetric,
    pub thresholds: Thresholds,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            classifiers: ClassifierKind::ALL.to_vec(),
            quality_classifiers: ClassifierKind::ALL.to_vec(),
            metric: ScoreMetric::Accuracy,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureSettings {
    pub p: f64,
    pub k_sub: usize,
    pub pairing: PairingRule,
    /// Explicit subsets; built from `pairing` when absent.
    pub plan: Option<MixturePlan>,
}

impl Default for MixtureSettings {
    fn default() -> Self {
        MixtureSettings { p: 0.4, k_sub: 3, pairing: PairingRule::SevereNormal, plan: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub iterations: Option<usize>,
    pub source: DataSource,
    #[serde(default)]
    pub gan: GanConfig,
    #[serde(default)]
    pub mixture: MixtureSettings,
    #[serde(default)]
    pub test_ids: Vec<String>,
    #[serde(default)]
    pub excluded_ids: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Classifiers evaluated on the test set for every arm.
    #[serde(default = "all_kinds")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub selection: SelectionConfig,
    /// Share of the test-pair windows held out for validation (exp2, exp3).
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn all_kinds() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_validation_fraction() -> f64 {
    0.25
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, source: DataSource) -> Self {
        ExperimentConfig {
            experiment,
            iterations: None,
            source,
            gan: GanConfig::default(),
            mixture: MixtureSettings::default(),
            test_ids: Vec::new(),
            excluded_ids: Vec::new(),
            seed: 0,
            classifiers: all_kinds(),
            selection: SelectionConfig::default(),
            validation_fraction: default_validation_fraction(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or(self.experiment.default_iterations())
    }

    pub fn test_set(&self) -> BTreeSet<String> {
        self.test_ids.iter().cloned().collect()
    }

    pub fn excluded_set(&self) -> BTreeSet<String> {
        self.excluded_ids.iter().cloned().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations() == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        self.gan.validate()?;
        if self.classifiers.is_empty() || self.selection.classifiers.is_empty() || self.selection.quality_classifiers.is_empty() {
            return Err(Error::invalid("classifier lists must be non-empty"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must lie in (0, 1)"));
        }
        match self.experiment {
            ExperimentKind::Exp1 => {
                if !self.test_ids.is_empty() {
                    return Err(Error::invalid("exp1 splits by event; test_ids must be empty"));
                }
            }
            ExperimentKind::Exp2 | ExperimentKind::Exp3 => {
                if self.test_ids.is_empty() {
                    return Err(Error::invalid("exp2 and exp3 need test_ids"));
                }
            }
        }
        if self.experiment == ExperimentKind::Exp3 && self.mixture.k_sub == 0 {
            return Err(Error::invalid("k_sub must be at least 1"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn specs(kinds: &[ClassifierKind], seed: u64) -> Vec<ClassifierSpec> {
        kinds.iter().map(|k| k.default_spec(seed)).collect()
    }
}
