use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Mean and standard error `s / sqrt(n)`; the error is 0 for one value.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::empty("aggregate of no values"));
    }
    let n = values.len();
    let se = if n == 1 { 0.0 } else { (variance(values) / n as f64).sqrt() };
    Ok(Aggregate { mean: mean(values), se, n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Welch's t-test, one-tailed with alternative `mean(a) > mean(b)`.
pub fn t_test_one_tailed(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("t-test needs at least two values per sample"));
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::invalid("t-test with zero variance in both samples"));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(format!("t distribution: {e}")))?;
    Ok(TTest { t, df, p_value: dist.sf(t) })
}
