//! Several GANs, each fed mostly from its own subset of recordings.
//!
//! GAN `j` draws every minibatch from subset `J`, where `J` follows the
//! probability vector with `p` on `j` and `(1 - p)/(k - 1)` elsewhere. The
//! sequence of minibatches it sees is then a sample of the mixture
//! `Σ_i w_i p_sub_i` with `w = effective_mixture(plan, j)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{train_with_source, BatchSource, GanConfig, GanModel, PoolCursor, TrainOutcome};
use crate::signal::{compute_ahi, AhiCategory, Recording, Window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub subsets: Vec<Vec<String>>,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingRule {
    /// Each subset receives one AHI-severe and one AHI-normal recording.
    SevereNormal,
    /// Round-robin over recordings sorted by id, ignoring AHI.
    RoundRobin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    pub weights: Vec<f64>,
}

impl MixturePlan {
    pub fn new(subsets: Vec<Vec<String>>, p: f64) -> Result<Self> {
        let plan = MixturePlan { subsets, p };
        plan.validate()?;
        Ok(plan)
    }

    pub fn k_sub(&self) -> usize {
        self.subsets.len()
    }

    /// Disjoint, non-empty subsets and `p` in (0, 1]; with one subset `p`
    /// must be 1.
    pub fn validate(&self) -> Result<()> {
        if self.subsets.is_empty() {
            return Err(Error::invalid("mixture plan has no subsets"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("mixture p must lie in (0, 1], got {}", self.p)));
        }
        if self.k_sub() == 1 && self.p != 1.0 {
            return Err(Error::invalid("a single-subset plan needs p = 1"));
        }
        let mut seen = BTreeSet::new();
        for (i, s) in self.subsets.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::empty(format!("subset {i} is empty")));
            }
            for id in s {
                if !seen.insert(id.as_str()) {
                    return Err(Error::invalid(format!("recording {id} appears in more than one subset")));
                }
            }
        }
        Ok(())
    }

    /// Checks that the subsets cover exactly `ids`.
    pub fn validate_against<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        self.validate()?;
        let planned: BTreeSet<&str> = self.subsets.iter().flatten().map(String::as_str).collect();
        let given: BTreeSet<&str> = ids.into_iter().collect();
        if let Some(id) = given.difference(&planned).next() {
            return Err(Error::invalid(format!("recording {id} is not in any subset")));
        }
        if let Some(id) = planned.difference(&given).next() {
            return Err(Error::UnknownId(id.to_string()));
        }
        Ok(())
    }

    /// Probability vector of GAN `j` over subsets.
    pub fn probability_vector(&self, j: usize) -> Vec<f64> {
        let k = self.k_sub();
        if k == 1 {
            return vec![1.0];
        }
        let other = (1.0 - self.p) / (k - 1) as f64;
        (0..k).map(|i| if i == j { self.p } else { other }).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: MixturePlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

pub fn make_plan(recordings: &[Recording], k_sub: usize, p: f64, rule: PairingRule) -> Result<MixturePlan> {
    if k_sub == 0 {
        return Err(Error::invalid("k_sub must be positive"));
    }
    let mut ids: Vec<&Recording> = recordings.iter().collect();
    ids.sort_by(|a, b| a.id.cmp(&b.id));
    let mut subsets = vec![Vec::new(); k_sub];
    match rule {
        PairingRule::RoundRobin => {
            if ids.len() < k_sub {
                return Err(Error::Infeasible(format!("{} recordings cannot fill {k_sub} subsets", ids.len())));
            }
            for (i, r) in ids.iter().enumerate() {
                subsets[i % k_sub].push(r.id.clone());
            }
        }
        PairingRule::SevereNormal => {
            let (mut severe, mut normal) = (Vec::new(), Vec::new());
            for r in ids {
                match compute_ahi(r)?.category {
                    AhiCategory::Severe => severe.push(r.id.clone()),
                    AhiCategory::Normal => normal.push(r.id.clone()),
                    AhiCategory::Moderate => {
                        return Err(Error::Infeasible(format!(
                            "recording {} is AHI-moderate and fits neither side of a pair",
                            r.id
                        )))
                    }
                }
            }
            if severe.len() != normal.len() || severe.len() < k_sub {
                return Err(Error::Infeasible(format!(
                    "{} severe and {} normal recordings cannot form {k_sub} severe/normal subsets",
                    severe.len(),
                    normal.len()
                )));
            }
            for (i, id) in severe.into_iter().enumerate() {
                subsets[i % k_sub].push(id);
            }
            for (i, id) in normal.into_iter().enumerate() {
                subsets[i % k_sub].push(id);
            }
        }
    }
    MixturePlan::new(subsets, if k_sub == 1 { 1.0 } else { p })
}

/// Draws the subset that supplies GAN `j`'s next minibatch.
pub fn sample_subset(plan: &MixturePlan, j: usize, rng: &mut impl Rng) -> usize {
    let probs = plan.probability_vector(j);
    if probs.len() == 1 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in probs.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn effective_mixture(plan: &MixturePlan, j: usize) -> MixtureWeights {
    MixtureWeights { weights: plan.probability_vector(j) }
}

/// Draws one subset per minibatch, then serves the next minibatch from that
/// subset's own reshuffled passes.
struct DiceSource<'a, 'p> {
    plan: &'p MixturePlan,
    gan: usize,
    cursors: Vec<PoolCursor<'a>>,
    batches_per_epoch: usize,
    draws: Vec<usize>,
}

impl BatchSource for DiceSource<'_, '_> {
    fn batches_per_epoch(&self) -> usize {
        self.batches_per_epoch
    }

    fn next_batch(&mut self, rng: &mut ChaCha8Rng) -> Vec<&Window> {
        let i = sample_subset(self.plan, self.gan, rng);
        self.draws[i] += 1;
        self.cursors[i].next(rng)
    }
}

#[derive(Clone, Debug)]
pub struct MixtureGan {
    pub outcome: TrainOutcome,
    /// Minibatches drawn from each subset.
    pub draws: Vec<usize>,
}

/// Windows of `windows` grouped by subset membership of their recording.
pub fn subset_pools<'a>(plan: &MixturePlan, windows: &'a [Window]) -> Result<Vec<Vec<&'a Window>>> {
    let owner: BTreeMap<&str, usize> = plan
        .subsets
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.iter().map(move |id| (id.as_str(), i)))
        .collect();
    let mut pools = vec![Vec::new(); plan.k_sub()];
    for w in windows {
        match owner.get(w.recording_id.as_str()) {
            Some(&i) => pools[i].push(w),
            None => return Err(Error::invalid(format!("window from recording {} is not in the plan", w.recording_id))),
        }
    }
    for (i, pool) in pools.iter().enumerate() {
        if pool.is_empty() {
            return Err(Error::empty(format!("subset {i} has no training windows")));
        }
    }
    Ok(pools)
}

/// Trains one GAN per subset. GAN `j` is seeded with `config.seed + j`; an
/// epoch is `ceil(total windows / minibatch)` minibatches.
pub fn train_mixture(plan: &MixturePlan, windows: &[Window], config: &GanConfig) -> Result<Vec<MixtureGan>> {
    train_mixture_with(plan, windows, config, |_, _| {})
}

pub fn train_mixture_with(
    plan: &MixturePlan,
    windows: &[Window],
    config: &GanConfig,
    mut on_checkpoint: impl FnMut(usize, &GanModel),
) -> Result<Vec<MixtureGan>> {
    plan.validate()?;
    let pools = subset_pools(plan, windows)?;
    let batches_per_epoch = windows.len().div_ceil(config.minibatch_size);
    let mut out = Vec::with_capacity(plan.k_sub());
    for j in 0..plan.k_sub() {
        let cfg = GanConfig { seed: config.seed.wrapping_add(j as u64), ..config.clone() };
        let mut source = DiceSource {
            plan,
            gan: j,
            cursors: pools.iter().map(|p| PoolCursor::new(p.clone(), cfg.minibatch_size)).collect(),
            batches_per_epoch,
            draws: vec![0; plan.k_sub()],
        };
        let model = GanModel::new(cfg.clone())?;
        let outcome = train_with_source(model, &mut source, cfg.epochs, |m| on_checkpoint(j, m))?;
        out.push(MixtureGan { outcome, draws: source.draws });
    }
    Ok(out)
}
