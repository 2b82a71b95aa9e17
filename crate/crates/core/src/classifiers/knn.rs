use serde::{Deserialize, Serialize};

use super::Design;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    /// Votes weighted by inverse distance rather than uniformly.
    pub distance_weighted: bool,
    pub metric: Metric,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5, distance_weighted: true, metric: Metric::Euclidean }
    }
}

/// Stores the training set verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub params: KnnParams,
    pub d: usize,
    pub x: Vec<f64>,
    pub y: Vec<bool>,
}

impl Knn {
    pub(crate) fn fit(params: KnnParams, data: &Design) -> Result<Self> {
        if params.k == 0 {
            return Err(Error::invalid("knn k must be positive"));
        }
        Ok(Knn { params, d: data.d, x: data.x.clone(), y: data.y.clone() })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `(distance, index)` of the k nearest training points, nearest first.
    fn neighbours(&self, row: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .chunks_exact(self.d)
            .enumerate()
            .map(|(i, t)| (t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let k = self.params.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d
    }

    /// Weighted apneic vote share, and the label a tie would fall back to.
    fn vote(&self, row: &[f64]) -> (f64, f64, bool) {
        let nb = self.neighbours(row);
        let nearest = self.y[nb[0].1];
        let exact: Vec<usize> = nb.iter().filter(|(d, _)| *d == 0.0).map(|&(_, i)| i).collect();
        if !exact.is_empty() {
            let pos = exact.iter().filter(|&&i| self.y[i]).count() as f64;
            return (pos, exact.len() as f64 - pos, nearest);
        }
        let (mut pos, mut neg) = (0.0, 0.0);
        for &(d, i) in &nb {
            let w = if self.params.distance_weighted { 1.0 / d } else { 1.0 };
            if self.y[i] {
                pos += w;
            } else {
                neg += w;
            }
        }
        (pos, neg, nearest)
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        let (pos, neg, nearest) = self.vote(row);
        if pos == neg {
            nearest
        } else {
            pos > neg
        }
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let (pos, neg, _) = self.vote(row);
        pos / (pos + neg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{design, fit, testdata::blobs, ClassifierParams, ClassifierSpec, TrainedClassifier};
    use crate::signal::{Label, Window};

    fn w(values: Vec<f64>, apneic: bool) -> Window {
        Window {
            recording_id: "k".into(),
            index: 0,
            values,
            label: if apneic { Label::Apneic } else { Label::NonApneic },
        }
    }

    #[test]
    fn stores_training_set() {
        let train = blobs(30, 4, 0.5, 1);
        let TrainedClassifier::Knn(m) = fit(&ClassifierSpec { params: ClassifierParams::Knn(KnnParams::default()), seed: 0 }, &train).unwrap() else {
            unreachable!()
        };
        let data = design(&train).unwrap();
        assert_eq!(m.x, data.x);
        assert_eq!(m.y, data.y);
    }

    #[test]
    fn zero_distance_dominates() {
        // One apneic point surrounded by four closer-on-average non-apneic ones.
        let train = vec![
            w(vec![0.0, 0.0], true),
            w(vec![0.1, 0.0], false),
            w(vec![-0.1, 0.0], false),
            w(vec![0.0, 0.1], false),
            w(vec![0.0, -0.1], false),
        ];
        let data = design(&train).unwrap();
        for k in [1, 3, 5] {
            let m = Knn::fit(KnnParams { k, ..KnnParams::default() }, &data).unwrap();
            assert!(m.predict_row(&[0.0, 0.0]));
        }
    }

    #[test]
    fn tie_goes_to_nearest() {
        let train = vec![w(vec![1.0], true), w(vec![-1.0], false), w(vec![3.0], false)];
        let data = design(&train).unwrap();
        let m = Knn::fit(KnnParams { k: 2, distance_weighted: false, metric: Metric::Euclidean }, &data).unwrap();
        assert!(m.predict_row(&[0.9]));
        assert!(!m.predict_row(&[-0.9]));
    }

    #[test]
    fn distance_weights_beat_majority() {
        let train = vec![w(vec![0.0], true), w(vec![1.0], false), w(vec![1.1], false), w(vec![5.0], true)];
        let data = design(&train).unwrap();
        let m = Knn::fit(KnnParams { k: 3, ..KnnParams::default() }, &data).unwrap();
        // weights: 1/0.05 apneic vs 1/0.95 + 1/1.05 non-apneic
        assert!(m.predict_row(&[0.05]));
    }
}
