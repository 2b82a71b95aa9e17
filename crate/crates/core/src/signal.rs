//! Recordings, windows, and dataset splits.
//!
//! A [`Recording`] is one subject's continuous airflow signal with one label
//! per consecutive window. [`preprocess`] mean-pools it to 1 Hz and min-max
//! rescales it to `[-1, 1]`; [`windowize`] then cuts it into labeled
//! [`Window`]s that the GAN and the classifiers consume.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window class. Apneic is the positive class everywhere in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "A")]
    Apneic,
    #[serde(rename = "N")]
    NonApneic,
}

impl Label {
    /// Conditioning value fed to the GAN: apneic 1.0, non-apneic 0.0.
    pub fn condition(self) -> f64 {
        match self {
            Label::Apneic => 1.0,
            Label::NonApneic => 0.0,
        }
    }

    pub fn is_apneic(self) -> bool {
        self == Label::Apneic
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Apneic => Label::NonApneic,
            Label::NonApneic => Label::Apneic,
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s {
            "A" | "a" | "apneic" => Ok(Label::Apneic),
            "N" | "n" | "non_apneic" => Ok(Label::NonApneic),
            other => Err(Error::invalid(format!("unknown label `{other}` (expected A or N)"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Apneic => "A",
            Label::NonApneic => "N",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recording {
    pub id: String,
    pub sample_rate_hz: u32,
    pub window_seconds: u32,
    pub samples: Vec<f64>,
    pub labels: Vec<Label>,
}

#[derive(Deserialize)]
struct RecordingDoc {
    id: String,
    sample_rate_hz: i64,
    window_seconds: i64,
    samples: Vec<f64>,
    labels: Vec<Label>,
}

impl Recording {
    pub fn new(
        id: impl Into<String>,
        sample_rate_hz: u32,
        window_seconds: u32,
        samples: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let rec = Recording {
            id: id.into(),
            sample_rate_hz,
            window_seconds,
            samples,
            labels,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::invalid(format!("recording {}: sample_rate_hz must be positive", self.id)));
        }
        if self.window_seconds == 0 {
            return Err(Error::invalid(format!("recording {}: window_seconds must be positive", self.id)));
        }
        let expected = self.samples.len() / self.samples_per_window();
        if self.labels.len() != expected {
            return Err(Error::invalid(format!(
                "recording {}: label count mismatch ({} labels, samples cover {} windows)",
                self.id,
                self.labels.len(),
                expected
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("recording {}: sample {i} is not finite", self.id)));
        }
        Ok(())
    }

    pub fn samples_per_window(&self) -> usize {
        self.sample_rate_hz as usize * self.window_seconds as usize
    }

    /// Labeled duration in hours.
    pub fn labeled_hours(&self) -> f64 {
        self.labels.len() as f64 * self.window_seconds as f64 / 3600.0
    }

    pub fn apneic_windows(&self) -> usize {
        self.labels.iter().filter(|l| l.is_apneic()).count()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: RecordingDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: RecordingDoc) -> Result<Self> {
        let rate = u32::try_from(doc.sample_rate_hz)
            .ok()
            .filter(|r| *r > 0)
            .ok_or_else(|| Error::invalid(format!("recording {}: sample_rate_hz must be positive", doc.id)))?;
        let ws = u32::try_from(doc.window_seconds)
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| Error::invalid(format!("recording {}: window_seconds must be positive", doc.id)))?;
        Recording::new(doc.id, rate, ws, doc.samples, doc.labels)
    }
}

/// Reads one Recording document.
pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: RecordingDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Recording::from_doc(doc).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn save_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(rec)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every `*.json` Recording document in `dir`, sorted by file name.
pub fn load_recordings_dir(dir: impl AsRef<Path>) -> Result<Vec<Recording>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths.iter().map(load_recording).collect()
}

/// Mean-pools to 1 Hz and min-max rescales to `[-1, 1]`.
///
/// Trailing samples that do not fill a whole second are dropped. A constant
/// signal maps to all zeros.
pub fn preprocess(rec: &Recording) -> Recording {
    let rate = rec.sample_rate_hz as usize;
    let pooled: Vec<f64> = rec
        .samples
        .chunks_exact(rate)
        .map(|sec| sec.iter().sum::<f64>() / rate as f64)
        .collect();
    Recording {
        id: rec.id.clone(),
        sample_rate_hz: 1,
        window_seconds: rec.window_seconds,
        samples: rescale_unit(&pooled),
        labels: rec.labels.clone(),
    }
}

fn rescale_unit(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    let span = hi - lo;
    values
        .iter()
        .map(|&v| (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0))
        .collect()
}

/// Stable identity of a window across datasets, used for leakage audits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowId {
    pub recording_id: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub recording_id: String,
    pub index: usize,
    pub values: Vec<f64>,
    pub label: Label,
}

impl Window {
    pub fn id(&self) -> WindowId {
        WindowId {
            recording_id: self.recording_id.clone(),
            index: self.index,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cuts a 1 Hz recording into one window per label.
pub fn windowize(rec: &Recording) -> Result<Vec<Window>> {
    if rec.sample_rate_hz != 1 {
        return Err(Error::invalid(format!(
            "recording {} must be preprocessed to 1 Hz before windowing (found {} Hz)",
            rec.id, rec.sample_rate_hz
        )));
    }
    let ws = rec.window_seconds as usize;
    Ok(rec
        .labels
        .iter()
        .zip(rec.samples.chunks_exact(ws))
        .enumerate()
        .map(|(index, (&label, values))| Window {
            recording_id: rec.id.clone(),
            index,
            values: values.to_vec(),
            label,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Fraction of apneic and non-apneic windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub apneic: f64,
    pub non_apneic: f64,
}

impl ClassRatio {
    pub fn of<'a>(windows: impl IntoIterator<Item = &'a Window>) -> Result<ClassRatio> {
        let (mut apneic, mut total) = (0usize, 0usize);
        for w in windows {
            total += 1;
            apneic += usize::from(w.label.is_apneic());
        }
        if total == 0 {
            return Err(Error::empty("class ratio of an empty window set"));
        }
        let a = apneic as f64 / total as f64;
        Ok(ClassRatio {
            apneic: a,
            non_apneic: (total - apneic) as f64 / total as f64,
        })
    }
}

/// Flat collection of labeled windows, each carrying exactly one split tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    windows: Vec<Window>,
    tags: Vec<Split>,
    class_ratio: ClassRatio,
}

impl WindowedDataset {
    /// Builds a dataset with every window tagged `tag`.
    pub fn new(windows: Vec<Window>, tag: Split) -> Result<Self> {
        let tags = vec![tag; windows.len()];
        Self::with_tags(windows, tags)
    }

    pub fn with_tags(windows: Vec<Window>, tags: Vec<Split>) -> Result<Self> {
        if windows.len() != tags.len() {
            return Err(Error::invalid(format!(
                "{} windows but {} split tags",
                windows.len(),
                tags.len()
            )));
        }
        let class_ratio = if windows.is_empty() {
            ClassRatio { apneic: 0.0, non_apneic: 0.0 }
        } else {
            ClassRatio::of(&windows)?
        };
        Ok(WindowedDataset {
            windows,
            tags,
            class_ratio,
        })
    }

    pub fn from_recordings(recs: &[Recording], tag: Split) -> Result<Self> {
        let mut windows = Vec::new();
        for r in recs {
            windows.extend(windowize(r)?);
        }
        Self::new(windows, tag)
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn tags(&self) -> &[Split] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Global class ratio over all windows regardless of tag.
    pub fn global_ratio(&self) -> ClassRatio {
        self.class_ratio
    }

    pub fn tagged(&self, tag: Split) -> impl Iterator<Item = &Window> + '_ {
        self.windows
            .iter()
            .zip(&self.tags)
            .filter(move |(_, t)| **t == tag)
            .map(|(w, _)| w)
    }

    pub fn tagged_vec(&self, tag: Split) -> Vec<Window> {
        self.tagged(tag).cloned().collect()
    }

    pub fn count(&self, tag: Split) -> usize {
        self.tags.iter().filter(|t| **t == tag).count()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ds: WindowedDataset = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        // The stored ratio is derived data; recompute rather than trust it.
        Self::with_tags(ds.windows, ds.tags)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Fractions for an event-level split, in `(train, test, validation)` order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl SplitFractions {
    pub const HALF_QUARTER_QUARTER: SplitFractions = SplitFractions {
        train: 0.5,
        test: 0.25,
        validation: 0.25,
    };

    pub fn new(train: f64, test: f64, validation: f64) -> Self {
        SplitFractions { train, test, validation }
    }
}

/// Random window-level split with a seeded shuffle.
pub fn split_by_events(ds: &WindowedDataset, fractions: SplitFractions, seed: u64) -> Result<WindowedDataset> {
    let SplitFractions { train, test, validation } = fractions;
    if !(train > 0.0 && test > 0.0 && validation > 0.0) {
        return Err(Error::invalid("split fractions must be positive"));
    }
    if ((train + test + validation) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "fractions must sum to 1 (got {})",
            train + test + validation
        )));
    }
    if ds.is_empty() {
        return Err(Error::empty("cannot split an empty dataset"));
    }
    let n = ds.len();
    let n_train = ((train * n as f64).round() as usize).min(n);
    let n_test = ((test * n as f64).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut tags = vec![Split::Validation; n];
    for (rank, &i) in order.iter().enumerate() {
        tags[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_test {
            Split::Test
        } else {
            Split::Validation
        };
    }
    WindowedDataset::with_tags(ds.windows.clone(), tags)
}

/// Recording-level split: test recordings form the test tag, excluded
/// recordings are dropped, and everything else is train.
pub fn split_by_recordings(
    recs: &[Recording],
    test_ids: &BTreeSet<String>,
    excluded_ids: &BTreeSet<String>,
) -> Result<WindowedDataset> {
    let known: BTreeSet<&str> = recs.iter().map(|r| r.id.as_str()).collect();
    for id in test_ids.iter().chain(excluded_ids) {
        if !known.contains(id.as_str()) {
            return Err(Error::UnknownId(id.clone()));
        }
    }
    if let Some(both) = test_ids.intersection(excluded_ids).next() {
        return Err(Error::invalid(format!("recording {both} is both test and excluded")));
    }
    let mut windows = Vec::new();
    let mut tags = Vec::new();
    for rec in recs {
        if excluded_ids.contains(&rec.id) {
            continue;
        }
        let tag = if test_ids.contains(&rec.id) { Split::Test } else { Split::Train };
        let ws = windowize(rec)?;
        tags.extend(std::iter::repeat_n(tag, ws.len()));
        windows.extend(ws);
    }
    WindowedDataset::with_tags(windows, tags)
}

/// Exact empirical class fractions of the `tag` subset.
pub fn class_ratio(ds: &WindowedDataset, tag: Split) -> Result<ClassRatio> {
    ClassRatio::of(ds.tagged(tag)).map_err(|_| Error::empty(format!("no windows tagged {tag:?}")))
}

/// Per-recording window counts of the `tag` subset, keyed by recording id.
pub fn recording_counts(ds: &WindowedDataset, tag: Split) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for w in ds.tagged(tag) {
        *out.entry(w.recording_id.clone()).or_insert(0) += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AhiCategory {
    Normal,
    Moderate,
    Severe,
}

impl AhiCategory {
    pub fn from_events_per_hour(ahi: f64) -> Self {
        if ahi < 15.0 {
            AhiCategory::Normal
        } else if ahi < 30.0 {
            AhiCategory::Moderate
        } else {
            AhiCategory::Severe
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AhiReport {
    pub events_per_hour: f64,
    pub category: AhiCategory,
}

/// Apnea index with the apneic-window count standing in for the event count.
pub fn compute_ahi(rec: &Recording) -> Result<AhiReport> {
    let hours = rec.labeled_hours();
    if rec.labels.is_empty() || hours <= 0.0 {
        return Err(Error::invalid(format!("recording {} has zero labeled duration", rec.id)));
    }
    let events_per_hour = rec.apneic_windows() as f64 / hours;
    Ok(AhiReport {
        events_per_hour,
        category: AhiCategory::from_events_per_hour(events_per_hour),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(a: usize, n: usize) -> Vec<Label> {
        let mut v = vec![Label::Apneic; a];
        v.extend(vec![Label::NonApneic; n]);
        v
    }

    fn one_hz(id: &str, ws: u32, values: Vec<f64>, labels: Vec<Label>) -> Recording {
        Recording::new(id, 1, ws, values, labels).unwrap()
    }

    #[test]
    fn parses_single_window_document() {
        let samples: Vec<String> = (0..6000).map(|i| format!("{}.5", i % 7)).collect();
        let doc = format!(
            r#"{{"id":"a01","sample_rate_hz":100,"window_seconds":60,"samples":[{}],"labels":["A"]}}"#,
            samples.join(",")
        );
        let rec = Recording::from_json_str(&doc).unwrap();
        assert_eq!(rec.labels.len(), 1);
        assert_eq!(rec.samples.len(), 6000);
    }

    #[test]
    fn rejects_label_count_mismatch_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let samples = vec!["0.0"; 6000].join(",");
        std::fs::write(
            &path,
            format!(r#"{{"id":"x","sample_rate_hz":100,"window_seconds":60,"samples":[{samples}],"labels":["A","N"]}}"#),
        )
        .unwrap();
        let err = load_recording(&path).unwrap_err().to_string();
        assert!(err.contains("label count mismatch"), "{err}");
        assert!(err.contains("bad.json"), "{err}");
    }

    #[test]
    fn rejects_zero_sample_rate() {
        let doc = r#"{"id":"x","sample_rate_hz":0,"window_seconds":60,"samples":[],"labels":[]}"#;
        assert!(Recording::from_json_str(doc).is_err());
        assert!(Recording::new("x", 0, 60, vec![], vec![]).is_err());
    }

    #[test]
    fn preprocess_means_each_second() {
        // Every 100 Hz sample in second k equals c_k.
        let c = [1.0, 3.0, 2.0, 5.0];
        let samples: Vec<f64> = c.iter().flat_map(|&v| std::iter::repeat_n(v, 100)).collect();
        let rec = Recording::new("r", 100, 2, samples, labels(1, 1)).unwrap();
        let out = preprocess(&rec);
        assert_eq!(out.sample_rate_hz, 1);
        assert_eq!(out.labels, rec.labels);
        // min 1, max 5
        let expect: Vec<f64> = c.iter().map(|v| 2.0 * (v - 1.0) / 4.0 - 1.0).collect();
        assert_eq!(out.samples, expect);
    }

    #[test]
    fn preprocess_midpoint_maps_to_zero() {
        let rec = one_hz("r", 3, vec![0.0, 5.0, 10.0], labels(0, 1));
        assert_eq!(preprocess(&rec).samples, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_signal_maps_to_zero() {
        let rec = Recording::new("r", 10, 2, vec![4.2; 40], labels(1, 1)).unwrap();
        assert!(preprocess(&rec).samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn windowize_counts() {
        let seven_hours = one_hz("r", 60, vec![0.1; 7 * 3600], labels(0, 420));
        assert_eq!(windowize(&seven_hours).unwrap().len(), 420);

        let thirty = one_hz("r", 30, vec![0.0; 60], labels(1, 1));
        let ws = windowize(&thirty).unwrap();
        assert_eq!(ws.len(), 2);
        assert!(ws.iter().all(|w| w.len() == 30));

        let short = one_hz("r", 60, vec![0.0; 59], vec![]);
        assert!(windowize(&short).unwrap().is_empty());
    }

    #[test]
    fn windowize_requires_one_hz() {
        let rec = Recording::new("r", 2, 1, vec![0.0; 4], labels(1, 1)).unwrap();
        assert!(windowize(&rec).is_err());
    }

    fn dataset(n: usize) -> WindowedDataset {
        let windows = (0..n)
            .map(|i| Window {
                recording_id: "r".into(),
                index: i,
                values: vec![i as f64],
                label: if i % 3 == 0 { Label::Apneic } else { Label::NonApneic },
            })
            .collect();
        WindowedDataset::new(windows, Split::Train).unwrap()
    }

    #[test]
    fn split_by_events_fractions() {
        let ds = split_by_events(&dataset(100), SplitFractions::HALF_QUARTER_QUARTER, 7).unwrap();
        assert_eq!(ds.count(Split::Train), 50);
        assert_eq!(ds.count(Split::Test), 25);
        assert_eq!(ds.count(Split::Validation), 25);
        let again = split_by_events(&dataset(100), SplitFractions::HALF_QUARTER_QUARTER, 7).unwrap();
        assert_eq!(ds.tags(), again.tags());
    }

    #[test]
    fn split_by_events_rejects_bad_fractions() {
        let err = split_by_events(&dataset(10), SplitFractions::new(0.5, 0.5, 0.1), 0).unwrap_err();
        assert!(err.to_string().contains("fractions must sum to 1"));
        let empty = WindowedDataset::new(vec![], Split::Train).unwrap();
        assert!(split_by_events(&empty, SplitFractions::HALF_QUARTER_QUARTER, 0).is_err());
    }

    fn recs(ids: &[&str]) -> Vec<Recording> {
        ids.iter()
            .map(|id| one_hz(id, 2, vec![0.0; 4], labels(1, 1)))
            .collect()
    }

    fn ids(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn split_by_recordings_partitions() {
        let all = recs(&["a01", "a02", "a03", "a04", "b01", "c01", "c02", "c03"]);
        let ds = split_by_recordings(&all, &ids(&["a01", "b01"]), &ids(&["a04"])).unwrap();
        let train = recording_counts(&ds, Split::Train);
        assert_eq!(train.len(), 5);
        assert!(!train.contains_key("a04"));
        let test = recording_counts(&ds, Split::Test);
        assert_eq!(test.keys().cloned().collect::<Vec<_>>(), vec!["a01", "b01"]);
        assert!(ds.windows().iter().all(|w| w.recording_id != "a04"));

        let ds = split_by_recordings(&all, &ids(&["a01", "b01"]), &ids(&[])).unwrap();
        assert_eq!(recording_counts(&ds, Split::Train).len(), 6);

        let err = split_by_recordings(&all, &ids(&["zz9"]), &ids(&[])).unwrap_err();
        assert!(matches!(err, Error::UnknownId(_)));
    }

    fn ratio_of(a: usize, n: usize) -> ClassRatio {
        let windows = labels(a, n)
            .into_iter()
            .enumerate()
            .map(|(i, label)| Window { recording_id: "r".into(), index: i, values: vec![0.0], label })
            .collect();
        class_ratio(&WindowedDataset::new(windows, Split::Train).unwrap(), Split::Train).unwrap()
    }

    #[test]
    fn class_ratio_examples() {
        let r = ratio_of(378, 622);
        assert_eq!((r.apneic, r.non_apneic), (0.378, 0.622));
        let r = ratio_of(10, 0);
        assert_eq!((r.apneic, r.non_apneic), (1.0, 0.0));
        let r = ratio_of(278, 722);
        assert_eq!((r.apneic, r.non_apneic), (0.278, 0.722));
        assert!(class_ratio(&dataset(4), Split::Test).is_err());
    }

    #[test]
    fn ahi_examples() {
        let hour = |a: usize, n: usize| one_hz("r", 60, vec![0.0; (a + n) * 60], labels(a, n));
        let r = compute_ahi(&hour(0, 60)).unwrap();
        assert_eq!((r.events_per_hour, r.category), (0.0, AhiCategory::Normal));
        let r = compute_ahi(&hour(40, 20)).unwrap();
        assert_eq!((r.events_per_hour, r.category), (40.0, AhiCategory::Severe));
        let r = compute_ahi(&hour(30, 90)).unwrap();
        assert_eq!((r.events_per_hour, r.category), (15.0, AhiCategory::Moderate));
        assert!(compute_ahi(&one_hz("r", 60, vec![], vec![])).is_err());
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(values in prop::collection::vec(-50.0f64..50.0, 8..64), rate in 1u32..4) {
            let n = values.len() / rate as usize * rate as usize;
            let rec = Recording::new("p", rate, 1, values[..n].to_vec(), vec![Label::NonApneic; n / rate as usize]).unwrap();
            let once = preprocess(&rec);
            let twice = preprocess(&once);
            prop_assert!(once.samples.iter().all(|v| (-1.0..=1.0).contains(v)));
            for (a, b) in once.samples.iter().zip(&twice.samples) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn windowize_preserves_labels(bits in prop::collection::vec(any::<bool>(), 0..40), ws in 1u32..5) {
            let labels: Vec<Label> = bits.iter().map(|&b| if b { Label::Apneic } else { Label::NonApneic }).collect();
            let rec = one_hz("p", ws, vec![0.0; labels.len() * ws as usize + ws as usize - 1], labels.clone());
            let got: Vec<Label> = windowize(&rec).unwrap().iter().map(|w| w.label).collect();
            prop_assert_eq!(got, labels);
        }

        #[test]
        fn event_split_partitions(n in 4usize..300, seed in any::<u64>()) {
            let ds = dataset(n);
            let split = split_by_events(&ds, SplitFractions::HALF_QUARTER_QUARTER, seed).unwrap();
            prop_assert_eq!(split.windows(), ds.windows());
            let (tr, te, va) = (split.count(Split::Train), split.count(Split::Test), split.count(Split::Validation));
            prop_assert_eq!(tr + te + va, n);
            let nf = n as f64;
            prop_assert!((tr as f64 - 0.5 * nf).abs() <= 1.0);
            prop_assert!((te as f64 - 0.25 * nf).abs() <= 1.0);
            prop_assert!((va as f64 - 0.25 * nf).abs() <= 1.0);
            // Weighted per-split ratios recompose the global ratio.
            let mut recomposed = 0.0;
            for tag in [Split::Train, Split::Test, Split::Validation] {
                let k = split.count(tag);
                if k > 0 {
                    recomposed += class_ratio(&split, tag).unwrap().apneic * k as f64 / nf;
                }
            }
            prop_assert!((recomposed - ds.global_ratio().apneic).abs() < 1e-12);
        }
    }
}
