use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Label;

/// Apneic is the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!("{} truths vs {} predictions", truth.len(), predicted.len())));
        }
        let mut cm = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t.is_apneic(), p.is_apneic()) {
                (true, true) => cm.tp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fp += 1,
                (true, false) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same counts with the positive class switched to non-apneic.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix { tp: self.tn, tn: self.tp, fp: self.fn_, fn_: self.fp }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

fn ratio(num: u64, den: u64, what: &'static str) -> Result<f64> {
    if den == 0 {
        Err(Error::UndefinedRate(what))
    } else {
        Ok(num as f64 / den as f64)
    }
}

pub fn confusion_stats(cm: &ConfusionMatrix) -> Result<Rates> {
    Ok(Rates {
        accuracy: ratio(cm.tp + cm.tn, cm.total(), "accuracy")?,
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_, "sensitivity")?,
        specificity: ratio(cm.tn, cm.tn + cm.fp, "specificity")?,
    })
}

/// Cohen's kappa; 0 when chance agreement is already perfect.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::empty("kappa of an empty confusion matrix"));
    }
    let n = n as f64;
    let p_o = (cm.tp + cm.tn) as f64 / n;
    let truth_pos = (cm.tp + cm.fn_) as f64 / n;
    let pred_pos = (cm.tp + cm.fp) as f64 / n;
    let p_e = truth_pos * pred_pos + (1.0 - truth_pos) * (1.0 - pred_pos);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(0.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Harmonic mean of TSTR and TRTS.
pub fn t_metric(tstr: f64, trts: f64) -> f64 {
    if tstr + trts == 0.0 {
        0.0
    } else {
        2.0 * tstr * trts / (tstr + trts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_forty_ten_ten() {
        let cm = ConfusionMatrix::new(40, 40, 10, 10);
        let r = confusion_stats(&cm).unwrap();
        assert_eq!((r.accuracy, r.sensitivity, r.specificity), (0.8, 0.8, 0.8));
        assert!((cohen_kappa(&cm).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn edge_rates() {
        assert_eq!(confusion_stats(&ConfusionMatrix::new(5, 3, 2, 0)).unwrap().sensitivity, 1.0);
        let all_negative = ConfusionMatrix::new(0, 30, 0, 20);
        let r = confusion_stats(&all_negative).unwrap();
        assert_eq!(r.sensitivity, 0.0);
        assert_eq!(r.specificity, 1.0);
        assert!(matches!(
            confusion_stats(&ConfusionMatrix::new(0, 5, 1, 0)),
            Err(Error::UndefinedRate("sensitivity"))
        ));
    }

    #[test]
    fn kappa_cases() {
        assert_eq!(cohen_kappa(&ConfusionMatrix::new(10, 7, 0, 0)).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&ConfusionMatrix::new(25, 25, 25, 25)).unwrap(), 0.0);
        assert_eq!(cohen_kappa(&ConfusionMatrix::new(0, 9, 0, 0)).unwrap(), 0.0);
        assert!(cohen_kappa(&ConfusionMatrix::default()).is_err());
        let cm = ConfusionMatrix::new(13, 21, 4, 9);
        assert!((cohen_kappa(&cm).unwrap() - cohen_kappa(&cm.swapped()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn t_metric_cases() {
        assert!((t_metric(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((t_metric(0.73, 0.73) - 0.73).abs() < 1e-15);
        assert_eq!(t_metric(0.0, 1.0), 0.0);
        assert_eq!(t_metric(0.0, 0.0), 0.0);
    }

    #[test]
    fn from_labels_counts() {
        use Label::*;
        let cm = ConfusionMatrix::from_labels(&[Apneic, Apneic, NonApneic, NonApneic], &[Apneic, NonApneic, Apneic, NonApneic]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 1));
        assert!(ConfusionMatrix::from_labels(&[Apneic], &[]).is_err());
    }
}
