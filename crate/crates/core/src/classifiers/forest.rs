use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Design;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { apneic: bool },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { apneic } => return apneic,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub d: usize,
    pub trees: Vec<Tree>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    data: &'a Design,
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, pos: usize, n: usize) -> usize {
        // Ties go to non-apneic.
        self.nodes.push(Node::Leaf { apneic: 2 * pos > n });
        self.nodes.len() - 1
    }

    /// Best `(weighted child impurity, threshold)` for one feature.
    fn best_threshold(&self, idx: &[usize], f: usize, buf: &mut Vec<(f64, bool)>) -> Option<(f64, f64)> {
        buf.clear();
        buf.extend(idx.iter().map(|&i| (self.data.x[i * self.data.d + f], self.data.y[i])));
        buf.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = buf.len();
        let total_pos = buf.iter().filter(|v| v.1).count();
        let mut left_pos = 0;
        let mut best: Option<(f64, f64)> = None;
        for s in 1..n {
            if buf[s - 1].1 {
                left_pos += 1;
            }
            if buf[s - 1].0 == buf[s].0 {
                continue;
            }
            let (nl, nr) = (s, n - s);
            let score = nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr);
            if best.is_none_or(|(b, _)| score < b) {
                let mut thr = 0.5 * (buf[s - 1].0 + buf[s].0);
                if thr >= buf[s].0 {
                    thr = buf[s - 1].0;
                }
                best = Some((score, thr));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.data.y[i]).count();
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        if pos == 0 || pos == n || n < self.params.min_samples_split || depth_capped {
            return self.leaf(pos, n);
        }
        let mut order: Vec<usize> = (0..self.data.d).collect();
        order.shuffle(rng);
        let mut buf = Vec::with_capacity(n);
        let mut best: Option<(f64, usize, f64)> = None;
        // Like the usual implementation, keep drawing features past `mtry`
        // while every feature seen so far is constant on this node.
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.mtry && best.is_some() {
                break;
            }
            if let Some((score, thr)) = self.best_threshold(&idx, f, &mut buf) {
                if best.is_none_or(|(b, _, _)| score < b) {
                    best = Some((score, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(pos, n);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.data.x[i * self.data.d + feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { apneic: false });
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

impl Forest {
    pub(crate) fn fit(params: ForestParams, data: &Design, seed: u64) -> Result<Self> {
        if params.n_trees == 0 || params.min_samples_split < 2 {
            return Err(Error::invalid("forest needs n_trees ≥ 1 and min_samples_split ≥ 2"));
        }
        let mtry = match params.max_features {
            MaxFeatures::Sqrt => ((data.d as f64).sqrt() as usize).max(1),
            MaxFeatures::All => data.d,
        };
        let mut trees = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = if params.bootstrap {
                (0..data.n).map(|_| rng.random_range(0..data.n)).collect()
            } else {
                (0..data.n).collect()
            };
            let mut b = Builder { data, params: &params, mtry, nodes: Vec::new() };
            b.grow(idx, 0, &mut rng);
            trees.push(Tree { nodes: b.nodes });
        }
        Ok(Forest { params, d: data.d, trees })
    }

    pub fn votes(&self, row: &[f64]) -> Vec<bool> {
        self.trees.iter().map(|t| t.predict_row(row)).collect()
    }

    /// Majority vote; ties go to non-apneic.
    pub fn predict_row(&self, row: &[f64]) -> bool {
        let pos = self.votes(row).iter().filter(|&&v| v).count();
        2 * pos > self.trees.len()
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.votes(row).iter().filter(|&&v| v).count() as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{design, testdata::{blobs, xor}};
    use crate::signal::Label;

    #[test]
    fn deterministic_per_seed() {
        let data = design(&xor(120, 1)).unwrap();
        let a = Forest::fit(ForestParams::default(), &data, 7).unwrap();
        let b = Forest::fit(ForestParams::default(), &data, 7).unwrap();
        let c = Forest::fit(ForestParams::default(), &data, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.trees.len(), 50);
    }

    #[test]
    fn prediction_is_majority_of_votes() {
        let train = xor(200, 2);
        let data = design(&train).unwrap();
        let f = Forest::fit(ForestParams::default(), &data, 1).unwrap();
        for w in xor(100, 3) {
            let v = f.votes(&w.values);
            let pos = v.iter().filter(|&&x| x).count();
            assert_eq!(f.predict_row(&w.values), pos > v.len() - pos);
        }
    }

    #[test]
    fn constant_features_give_majority_leaf() {
        let mut train = blobs(9, 3, 0.5, 1);
        for (i, w) in train.iter_mut().enumerate() {
            w.values = vec![1.0; 3];
            w.label = if i < 3 { Label::Apneic } else { Label::NonApneic };
        }
        let data = design(&train).unwrap();
        let f = Forest::fit(ForestParams { bootstrap: false, ..ForestParams::default() }, &data, 0).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(!f.predict_row(&[1.0, 1.0, 1.0]));
        assert!(!f.predict_row(&[5.0, -3.0, 0.0]));
    }

    #[test]
    fn learns_xor() {
        let data = design(&xor(400, 4)).unwrap();
        let f = Forest::fit(ForestParams::default(), &data, 2).unwrap();
        let test = xor(200, 5);
        let correct = test.iter().filter(|w| f.predict_row(&w.values) == w.label.is_apneic()).count();
        assert!(correct >= 180, "{correct}");
    }
}
