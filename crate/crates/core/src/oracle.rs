//! Synthetic breathing corpus with known class-conditional structure.
//!
//! Non-apneic windows are noisy sinusoids. Apneic windows additionally
//! have the amplitude damped over one contiguous stretch, a flat-airflow
//! analog of airway collapse.

use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{save_recording, Label, Recording, Window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecordingSpec {
    pub id: String,
    pub hours: f64,
    pub apneic_fraction: f64,
    pub breathing_freq_hz: f64,
    pub apnea_amp_drop: f64,
    pub noise_std: f64,
    pub subject_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: u32,
    #[serde(default = "default_window")]
    pub window_seconds: u32,
    pub recordings: Vec<OracleRecordingSpec>,
}

fn default_rate() -> u32 {
    10
}

fn default_window() -> u32 {
    60
}

impl OracleRecordingSpec {
    pub fn new(id: impl Into<String>, hours: f64, apneic_fraction: f64) -> Self {
        OracleRecordingSpec {
            id: id.into(),
            hours,
            apneic_fraction,
            breathing_freq_hz: 0.05,
            apnea_amp_drop: 0.85,
            noise_std: 0.15,
            subject_phase: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apneic_fraction) {
            return Err(Error::invalid(format!(
                "oracle recording {}: apneic_fraction {} outside [0, 1]",
                self.id, self.apneic_fraction
            )));
        }
        if !(self.hours > 0.0) {
            return Err(Error::invalid(format!("oracle recording {}: hours must be positive", self.id)));
        }
        if !(self.apnea_amp_drop > 0.0 && self.apnea_amp_drop <= 1.0) {
            return Err(Error::invalid(format!(
                "oracle recording {}: apnea_amp_drop must lie in (0, 1]",
                self.id
            )));
        }
        if !(self.noise_std >= 0.0) || !(self.breathing_freq_hz > 0.0) {
            return Err(Error::invalid(format!(
                "oracle recording {}: noise_std must be >= 0 and breathing_freq_hz > 0",
                self.id
            )));
        }
        Ok(())
    }
}

impl OracleSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

/// Generates one raw-rate Recording per entry. Deterministic per seed.
pub fn generate_corpus(spec: &OracleSpec) -> Result<Vec<Recording>> {
    if spec.sample_rate_hz == 0 || spec.window_seconds == 0 {
        return Err(Error::invalid("oracle sample_rate_hz and window_seconds must be positive"));
    }
    spec.recordings
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.validate()?;
            let seed = spec.seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            generate_recording(r, spec.sample_rate_hz, spec.window_seconds, seed)
        })
        .collect()
}

fn generate_recording(spec: &OracleRecordingSpec, rate: u32, window_seconds: u32, seed: u64) -> Result<Recording> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_windows = (spec.hours * 3600.0 / window_seconds as f64).floor() as usize;
    let n_apneic = (spec.apneic_fraction * n_windows as f64).round() as usize;

    let mut labels = vec![Label::NonApneic; n_windows];
    let mut order: Vec<usize> = (0..n_windows).collect();
    order.shuffle(&mut rng);
    for &i in &order[..n_apneic] {
        labels[i] = Label::Apneic;
    }

    let per_window = rate as usize * window_seconds as usize;
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut samples = Vec::with_capacity(n_windows * per_window);
    for (w, label) in labels.iter().enumerate() {
        // Damped stretch covers 40-80% of the window at a random offset.
        let (lo, hi) = if label.is_apneic() {
            let len = rng.random_range(0.4..0.8) * window_seconds as f64;
            let start = rng.random_range(0.0..(window_seconds as f64 - len));
            (start, start + len)
        } else {
            (0.0, 0.0)
        };
        for s in 0..per_window {
            let local = s as f64 / rate as f64;
            let t = (w * window_seconds as usize) as f64 + local;
            let mut v = (TAU * spec.breathing_freq_hz * t + spec.subject_phase).sin();
            if local >= lo && local < hi {
                v *= 1.0 - spec.apnea_amp_drop;
            }
            if spec.noise_std > 0.0 {
                v += noise.sample(&mut rng);
            }
            samples.push(v);
        }
    }
    Recording::new(spec.id.clone(), rate, window_seconds, samples, labels)
}

/// Writes one Recording document per recording into `dir`.
pub fn write_corpus(recs: &[Recording], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in recs {
        save_recording(r, dir.join(format!("{}.json", r.id)))?;
    }
    Ok(())
}

const BINS: usize = 16;

fn histograms(windows: &[Window], len: usize) -> Vec<[f64; BINS]> {
    let mut hist = vec![[0.0; BINS]; len];
    for w in windows {
        for (t, &v) in w.values.iter().enumerate() {
            let b = (((v.clamp(-1.0, 1.0) + 1.0) / 2.0) * BINS as f64).floor() as usize;
            hist[t][b.min(BINS - 1)] += 1.0;
        }
    }
    let n = windows.len() as f64;
    for h in &mut hist {
        h.iter_mut().for_each(|c| *c /= n);
    }
    hist
}

/// Mean over time steps of the L1 distance between 16-bin histograms on
/// `[-1, 1]`. Ranges from 0 (identical histograms) to 2 (disjoint support).
pub fn oracle_density_distance(a: &[Window], b: &[Window]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::empty("density distance needs two non-empty window sets"));
    }
    let len = a[0].len();
    if a.iter().chain(b).any(|w| w.len() != len) || len == 0 {
        return Err(Error::shape("density distance needs windows of one common non-zero length"));
    }
    let (ha, hb) = (histograms(a, len), histograms(b, len));
    let total: f64 = ha
        .iter()
        .zip(&hb)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .sum();
    Ok(total / len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{preprocess, windowize};

    fn spec(fraction: f64, hours: f64, noise: f64) -> OracleSpec {
        let mut r = OracleRecordingSpec::new("o1", hours, fraction);
        r.noise_std = noise;
        OracleSpec { seed: 11, sample_rate_hz: 4, window_seconds: 60, recordings: vec![r] }
    }

    #[test]
    fn zero_fraction_is_all_non_apneic() {
        let recs = generate_corpus(&spec(0.0, 1.0, 0.1)).unwrap();
        assert!(recs[0].labels.iter().all(|l| *l == Label::NonApneic));
    }

    #[test]
    fn fraction_sets_exact_label_count() {
        // 1000 minute windows.
        let recs = generate_corpus(&spec(0.378, 1000.0 / 60.0, 0.1)).unwrap();
        assert_eq!(recs[0].labels.len(), 1000);
        assert_eq!(recs[0].apneic_windows(), 378);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_corpus(&spec(0.3, 0.5, 0.2)).unwrap();
        let b = generate_corpus(&spec(0.3, 0.5, 0.2)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(0.3, 0.5, 0.2);
        other.seed = 12;
        assert_ne!(generate_corpus(&other).unwrap()[0].samples, a[0].samples);
    }

    #[test]
    fn rejects_invalid_fraction() {
        assert!(generate_corpus(&spec(1.5, 1.0, 0.1)).is_err());
        assert!(generate_corpus(&spec(-0.1, 1.0, 0.1)).is_err());
    }

    fn flat(value: f64, n: usize) -> Vec<Window> {
        (0..n)
            .map(|i| Window { recording_id: "w".into(), index: i, values: vec![value; 8], label: Label::NonApneic })
            .collect()
    }

    #[test]
    fn density_distance_bounds() {
        let a = flat(-0.9, 5);
        assert_eq!(oracle_density_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(oracle_density_distance(&a, &flat(0.9, 3)).unwrap(), 2.0);
    }

    #[test]
    fn noiseless_one_nn_separates_classes() {
        let mut s = spec(0.4, 2.0, 0.0);
        s.recordings[0].apnea_amp_drop = 0.9;
        let ws = windowize(&preprocess(&generate_corpus(&s).unwrap()[0])).unwrap();
        let (train, test) = ws.split_at(ws.len() / 2);
        let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let correct = test
            .iter()
            .filter(|q| {
                let nn = train
                    .iter()
                    .min_by(|a, b| d2(&a.values, &q.values).total_cmp(&d2(&b.values, &q.values)))
                    .unwrap();
                nn.label == q.label
            })
            .count();
        assert_eq!(correct, test.len());
    }

    #[test]
    fn subject_phase_changes_mean_waveform() {
        let mut s = spec(0.0, 0.5, 0.1);
        let mut second = s.recordings[0].clone();
        second.id = "o2".into();
        second.subject_phase = 1.3;
        s.recordings.push(second);
        let recs = generate_corpus(&s).unwrap();
        let mean = |r: &Recording| {
            let ws = windowize(&preprocess(r)).unwrap();
            let mut m = vec![0.0; 60];
            for w in &ws {
                for (a, v) in m.iter_mut().zip(&w.values) {
                    *a += v / ws.len() as f64;
                }
            }
            m
        };
        let (m1, m2) = (mean(&recs[0]), mean(&recs[1]));
        let l2: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(l2 > 0.0);
    }
}
