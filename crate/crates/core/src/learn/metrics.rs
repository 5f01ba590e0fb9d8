use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Binary classification summary with the anomaly class (+1) as positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub roc_points: Vec<RocPoint>,
    pub auc: f64,
}

impl EvalReport {
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("FPR,TPR\n");
        for p in &self.roc_points {
            out.push_str(&format!("{},{}\n", p.fpr, p.tpr));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Score at threshold 0 and sweep every distinct score for the ROC curve.
pub fn evaluate(scores: &[f64], truth: &[f64]) -> Result<EvalReport> {
    if scores.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(bad) = truth.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::argument(format!("labels must be ±1, got {bad}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::argument("scores contain NaN"));
    }
    let pos = truth.iter().filter(|&&y| y > 0.0).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::argument("evaluation needs both classes in truth"));
    }

    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(truth) {
        match (s > 0.0, y > 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let accuracy = ratio(tp + tn, truth.len());

    let roc_points = roc_curve(scores, truth, pos, neg);
    let auc = roc_points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();

    Ok(EvalReport {
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f1,
        accuracy,
        roc_points,
        auc,
    })
}

fn roc_curve(scores: &[f64], truth: &[f64], pos: usize, neg: usize) -> Vec<RocPoint> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        let s = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == s {
            if truth[order[idx]] > 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Probability that a random positive outscores a random negative, ties ½.
    fn auc_mann_whitney(scores: &[f64], truth: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0usize;
        for (sp, _) in scores.iter().zip(truth).filter(|(_, &y)| y > 0.0) {
            for (sn, _) in scores.iter().zip(truth).filter(|(_, &y)| y <= 0.0) {
                pairs += 1;
                if sp > sn {
                    wins += 1.0;
                } else if sp == sn {
                    wins += 0.5;
                }
            }
        }
        wins / pairs as f64
    }

    #[test]
    fn confusion_example() {
        let scores = [vec![1.0; 9], vec![-1.0; 9]].concat();
        let mut truth = vec![1.0; 8];
        truth.extend([-1.0, 1.0]);
        truth.extend(vec![-1.0; 8]);
        let r = evaluate(&scores, &truth).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (8, 1, 1, 8));
        assert!((r.precision - 8.0 / 9.0).abs() < 1e-12);
        assert!((r.recall - 8.0 / 9.0).abs() < 1e-12);
        assert!((r.f1 - 0.8889).abs() < 1e-4);
        assert!((r.accuracy - 16.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn auc_examples() {
        let truth = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(evaluate(&[0.9, 0.8, 0.3, 0.1], &truth).unwrap().auc, 1.0);
        // Concordant pairs: 0.9 beats 0.2 and 0.8, 0.1 beats neither, so 2 of 4.
        let r = evaluate(&[0.1, 0.9, 0.2, 0.8], &truth).unwrap();
        assert!((r.auc - 0.5).abs() < 1e-12);
        let r = evaluate(&[0.1, 0.9, 0.2, 0.8], &[-1.0, 1.0, 1.0, -1.0]).unwrap();
        assert!((r.auc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_strict() {
        // A score of exactly zero predicts the normal class.
        let r = evaluate(&[0.0, 0.5], &[1.0, -1.0]).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (0, 1, 0, 1));
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.precision, 0.0);
    }

    #[test]
    fn tied_scores_make_one_vertex() {
        let r = evaluate(&[0.5, 0.5, 0.5, 0.5], &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(r.roc_points.len(), 2);
        assert!((r.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            evaluate(&[1.0, 2.0], &[1.0, 1.0]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            evaluate(&[1.0], &[1.0, -1.0]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            evaluate(&[1.0, 2.0], &[1.0, 0.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn serialization() {
        let r = evaluate(&[0.9, -0.2, 0.4], &[1.0, -1.0, -1.0]).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["fn"], 0);
        assert_eq!(json["tp"], 1);
        let csv = r.roc_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("FPR,TPR"));
        assert_eq!(lines.next(), Some("0,0"));
        assert_eq!(csv.lines().last(), Some("1,1"));
    }

    fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((-5i32..5, any::<bool>()), 2..60).prop_map(|v| {
            let scores: Vec<f64> = v.iter().map(|p| p.0 as f64 / 2.0).collect();
            let mut truth: Vec<f64> = v.iter().map(|p| if p.1 { 1.0 } else { -1.0 }).collect();
            truth[0] = 1.0;
            truth[1] = -1.0;
            (scores, truth)
        })
    }

    proptest! {
        #[test]
        fn trapezoid_matches_pair_counting((scores, truth) in scored_labels()) {
            let r = evaluate(&scores, &truth).unwrap();
            prop_assert!((r.auc - auc_mann_whitney(&scores, &truth)).abs() < 1e-10);
        }

        #[test]
        fn report_invariants((scores, truth) in scored_labels()) {
            let r = evaluate(&scores, &truth).unwrap();
            let first = r.roc_points[0];
            let last = *r.roc_points.last().unwrap();
            prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for w in r.roc_points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            let p = if r.tp + r.fp == 0 { 0.0 } else { r.tp as f64 / (r.tp + r.fp) as f64 };
            let rc = r.tp as f64 / (r.tp + r.fn_) as f64;
            prop_assert!((r.precision - p).abs() <= 1e-12);
            prop_assert!((r.recall - rc).abs() <= 1e-12);
            let f1 = if r.tp == 0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            prop_assert!((r.f1 - f1).abs() <= 1e-12);
            for v in [r.precision, r.recall, r.f1, r.accuracy, r.auc] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn label_swap_symmetry((scores, truth) in scored_labels()) {
            let a = evaluate(&scores, &truth).unwrap().auc;
            let neg_s: Vec<f64> = scores.iter().map(|s| -s).collect();
            let neg_t: Vec<f64> = truth.iter().map(|y| -y).collect();
            let b = evaluate(&neg_s, &neg_t).unwrap().auc;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
