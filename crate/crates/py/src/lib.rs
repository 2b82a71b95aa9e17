//! Python bindings. Windows and reports cross the boundary as JSON text.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use physaug::experiment::{run_experiment as run, ExperimentConfig};
use physaug::gan::{self, GanConfig};
use physaug::classifiers::ClassifierSpec;
use physaug::metrics::{self, ConfusionMatrix, ScoreMetric};
use physaug::oracle::{generate_corpus, OracleSpec};
use physaug::signal::{preprocess, windowize, Label, Window};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(err)
}

fn label(s: &str) -> PyResult<Label> {
    match s {
        "A" | "a" | "apneic" => Ok(Label::Apneic),
        "N" | "n" | "non_apneic" => Ok(Label::NonApneic),
        other => Err(PyValueError::new_err(format!("label must be A or N, got {other:?}"))),
    }
}

/// Conditional recurrent GAN.
#[pyclass(name = "GanModel")]
struct PyGanModel {
    inner: gan::GanModel,
}

#[pymethods]
impl PyGanModel {
    /// `config` is a GanConfig JSON object; omitted fields take the full-size
    /// defaults. `desk=True` starts from the small configuration instead.
    #[new]
    #[pyo3(signature = (config=None, desk=false, sequence_length=60))]
    fn new(config: Option<&str>, desk: bool, sequence_length: usize) -> PyResult<Self> {
        let cfg = match config {
            Some(text) => parse::<GanConfig>(text)?,
            None if desk => GanConfig::desk(sequence_length),
            None => GanConfig { sequence_length, ..GanConfig::default() },
        };
        Ok(PyGanModel { inner: gan::GanModel::new(cfg).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyGanModel { inner: gan::GanModel::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.epoch
    }

    #[getter]
    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.config).map_err(err)
    }

    fn num_params(&self) -> usize {
        self.inner.generator.num_params() + self.inner.discriminator.num_params()
    }

    /// Trains in place on a JSON list of windows; returns per-epoch
    /// `(d_loss, g_loss)`.
    fn train(&mut self, py: Python<'_>, windows: &str, epochs: usize) -> PyResult<Vec<(f64, f64)>> {
        let windows: Vec<Window> = parse(windows)?;
        let model = self.inner.clone();
        let outcome = py.detach(|| gan::train(model, &windows, epochs, |_| {})).map_err(err)?;
        self.inner = outcome.model;
        Ok(outcome.history.iter().map(|h| (h.d_loss, h.g_loss)).collect())
    }

    /// `count` windows of label `A` or `N` as lists of values.
    fn generate(&self, label: &str, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let w = gan::generate(&self.inner, self::label(label)?, count, seed).map_err(err)?;
        Ok(w.into_iter().map(|w| w.values).collect())
    }

    /// Same as `generate`, as a JSON list of windows.
    fn generate_json(&self, label: &str, count: usize, seed: u64) -> PyResult<String> {
        let w = gan::generate(&self.inner, self::label(label)?, count, seed).map_err(err)?;
        serde_json::to_string(&w).map_err(err)
    }
}

/// Preprocessed windows of an oracle corpus as a JSON list.
#[pyfunction]
fn oracle_windows(spec: &str) -> PyResult<String> {
    let spec: OracleSpec = parse(spec)?;
    let mut out = Vec::new();
    for r in generate_corpus(&spec).map_err(err)? {
        out.extend(windowize(&preprocess(&r)).map_err(err)?);
    }
    serde_json::to_string(&out).map_err(err)
}

#[pyfunction]
fn cohen_kappa(tp: u64, tn: u64, fp: u64, fn_: u64) -> PyResult<f64> {
    metrics::cohen_kappa(&ConfusionMatrix::new(tp, tn, fp, fn_)).map_err(err)
}

#[pyfunction]
fn t_metric(tstr: f64, trts: f64) -> f64 {
    metrics::t_metric(tstr, trts)
}

#[pyfunction]
fn mmd2_unbiased(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, sigma: f64) -> PyResult<f64> {
    let xs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    let ys: Vec<&[f64]> = y.iter().map(Vec::as_slice).collect();
    metrics::mmd2_unbiased_vectors(&xs, &ys, sigma).map_err(err)
}

/// QualityReport JSON for JSON lists of real and synthetic windows.
#[pyfunction]
#[pyo3(signature = (real, synth, seed=0))]
fn evaluate_quality(py: Python<'_>, real: &str, synth: &str, seed: u64) -> PyResult<String> {
    let (real, synth): (Vec<Window>, Vec<Window>) = (parse(real)?, parse(synth)?);
    let specs = ClassifierSpec::all(seed);
    let q = py.detach(|| metrics::evaluate_quality(&real, &synth, &specs, ScoreMetric::Accuracy, seed)).map_err(err)?;
    serde_json::to_string(&q).map_err(err)
}

/// Runs an experiment from its JSON config; returns the report JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg: ExperimentConfig = parse(config)?;
    cfg.validate().map_err(err)?;
    let report = py.detach(|| run(&cfg)).map_err(err)?;
    report.to_json().map_err(err)
}

#[pymodule]
#[pyo3(name = "physaug")]
fn physaug_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGanModel>()?;
    m.add_function(wrap_pyfunction!(oracle_windows, m)?)?;
    m.add_function(wrap_pyfunction!(cohen_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(t_metric, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2_unbiased, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_quality, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
