//! Binary classification metrics, PR/ROC curves, and ordinal evaluation.
//!
//! "Dangerous" is the positive class. A sample is predicted positive when its
//! score is strictly greater than the threshold.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geolabel::OrdinalClass;

/// Confusion cell tallies. Counts or fractions of a total both work.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

impl ConfusionCounts {
    pub fn new(tp: f64, fp: f64, tn: f64, fn_: f64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn recall(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fn_, "recall")
    }

    pub fn precision(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fp, "precision")
    }

    pub fn accuracy(&self) -> Result<f64> {
        ratio(self.tp + self.tn, self.total(), "accuracy")
    }

    pub fn false_positive_rate(&self) -> Result<f64> {
        ratio(self.fp, self.fp + self.tn, "false positive rate")
    }

    pub fn f1(&self) -> Result<f64> {
        f1_score(self.precision()?, self.recall()?)
    }
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::domain(format!("{what} undefined: zero denominator")))
    }
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> Result<f64> {
    ratio(2.0 * precision * recall, precision + recall, "F1")
}

pub fn confusion_from_pairs(pairs: &[(bool, f64)], threshold: f64) -> Result<ConfusionCounts> {
    if pairs.is_empty() {
        return Err(Error::domain("confusion counts of an empty sample"));
    }
    let mut c = ConfusionCounts::default();
    for &(truth, score) in pairs {
        match (truth, score > threshold) {
            (true, true) => c.tp += 1.0,
            (false, true) => c.fp += 1.0,
            (false, false) => c.tn += 1.0,
            (true, false) => c.fn_ += 1.0,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Confusion counts at every distinct score used as a threshold, plus a
/// `-inf` sentinel that predicts everything positive. Ascending threshold.
fn sweep(pairs: &[(bool, f64)]) -> Result<Vec<(f64, ConfusionCounts)>> {
    let positives = pairs.iter().filter(|p| p.0).count();
    if positives == 0 || positives == pairs.len() {
        return Err(Error::domain("curve needs both classes present"));
    }
    if pairs.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::domain("non-finite score"));
    }
    let mut sorted: Vec<(bool, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));

    let n_pos = positives as f64;
    let n_neg = (pairs.len() - positives) as f64;
    // Everything is positive at the sentinel; each threshold t = s then
    // turns every sample scoring <= s negative.
    let mut c = ConfusionCounts::new(n_pos, n_neg, 0.0, 0.0);
    let mut out = vec![(f64::NEG_INFINITY, c)];
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].1;
        while i < sorted.len() && sorted[i].1 == s {
            if sorted[i].0 {
                c.tp -= 1.0;
                c.fn_ += 1.0;
            } else {
                c.fp -= 1.0;
                c.tn += 1.0;
            }
            i += 1;
        }
        out.push((s, c));
    }
    Ok(out)
}

/// `(x = FPR, y = TPR)` per threshold.
pub fn roc_curve(pairs: &[(bool, f64)]) -> Result<Vec<CurvePoint>> {
    sweep(pairs)?
        .into_iter()
        .map(|(threshold, c)| {
            Ok(CurvePoint {
                threshold,
                x: c.false_positive_rate()?,
                y: c.recall()?,
            })
        })
        .collect()
}

/// `(x = recall, y = precision)` per threshold. Where nothing is predicted
/// positive the precision is taken as 1.
pub fn pr_curve(pairs: &[(bool, f64)]) -> Result<Vec<CurvePoint>> {
    sweep(pairs)?
        .into_iter()
        .map(|(threshold, c)| {
            Ok(CurvePoint {
                threshold,
                x: c.recall()?,
                y: c.precision().unwrap_or(1.0),
            })
        })
        .collect()
}

/// Trapezoidal area under a curve ordered by threshold. Both curves above
/// have `x` non-increasing in threshold, so integration runs from the
/// highest threshold down.
pub fn auc(curve: &[CurvePoint]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::domain("area needs at least two curve points"));
    }
    let mut pts: Vec<&CurvePoint> = curve.iter().collect();
    pts.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
    let mut area = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.x < a.x {
            return Err(Error::domain("curve x is not monotone in threshold"));
        }
        area += (b.x - a.x) * (a.y + b.y) / 2.0;
    }
    Ok(area)
}

pub fn roc_auc(pairs: &[(bool, f64)]) -> Result<f64> {
    auc(&roc_curve(pairs)?)
}

pub fn pr_auc(pairs: &[(bool, f64)]) -> Result<f64> {
    auc(&pr_curve(pairs)?)
}

/// Class probabilities of an ordinal prediction, lowest class first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrdinalProbabilities {
    pub class_probs: Vec<f64>,
}

impl OrdinalProbabilities {
    /// Most probable class; ties go to the lower class.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Most probable of the four accident-count classes.
    pub fn predicted_class(&self) -> Option<OrdinalClass> {
        OrdinalClass::from_rank(u8::try_from(self.argmax() + 1).ok()?)
    }
}

/// Combines K-1 cumulative binary probabilities `p_k = P(y > k)` into K
/// class probabilities. Differences that come out negative (the binary
/// models disagree on ordering) are clamped to zero and the vector is
/// renormalized.
pub fn frank_hall_compose(exceedance: &[f64]) -> Result<OrdinalProbabilities> {
    if exceedance.is_empty() {
        return Err(Error::domain("need at least one exceedance probability"));
    }
    if let Some(bad) = exceedance.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("exceedance probability {bad} outside [0,1]")));
    }
    let k = exceedance.len() + 1;
    let mut probs = Vec::with_capacity(k);
    probs.push(1.0 - exceedance[0]);
    for w in exceedance.windows(2) {
        probs.push(w[0] - w[1]);
    }
    probs.push(exceedance[k - 2]);
    if probs.iter().any(|&p| p < 0.0) {
        for p in &mut probs {
            *p = p.max(0.0);
        }
        let s: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= s;
        }
    }
    Ok(OrdinalProbabilities { class_probs: probs })
}

/// Mean per-class recall over the four ordinal classes.
pub fn balanced_accuracy(truths: &[OrdinalClass], predictions: &[OrdinalClass]) -> Result<f64> {
    if truths.len() != predictions.len() {
        return Err(Error::domain(format!(
            "{} truths but {} predictions",
            truths.len(),
            predictions.len()
        )));
    }
    let mut support = [0usize; 4];
    let mut hits = [0usize; 4];
    for (t, p) in truths.iter().zip(predictions) {
        let i = usize::from(t.rank() - 1);
        support[i] += 1;
        if t == p {
            hits[i] += 1;
        }
    }
    if let Some(missing) = support.iter().position(|&n| n == 0) {
        return Err(Error::domain(format!(
            "class {:?} absent from truths",
            OrdinalClass::ALL[missing]
        )));
    }
    let sum: f64 = hits
        .iter()
        .zip(support)
        .map(|(&h, n)| h as f64 / n as f64)
        .sum();
    Ok(sum / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Pairwise Mann-Whitney statistic, ties count one half.
    fn mann_whitney(pairs: &[(bool, f64)]) -> f64 {
        let pos: Vec<f64> = pairs.iter().filter(|p| p.0).map(|p| p.1).collect();
        let neg: Vec<f64> = pairs.iter().filter(|p| !p.0).map(|p| p.1).collect();
        let mut u = 0.0;
        for &p in &pos {
            for &n in &neg {
                u += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        u / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn confusion_examples() {
        let c = confusion_from_pairs(&[(true, 0.9), (false, 0.1), (true, 0.6)], 0.5).unwrap();
        assert_eq!((c.fp, c.fn_), (0.0, 0.0));
        let c = confusion_from_pairs(&[(true, 0.4)], 0.5).unwrap();
        assert_eq!(c.fn_, 1.0);
        // ties go negative
        let c = confusion_from_pairs(&[(true, 0.5)], 0.5).unwrap();
        assert_eq!(c.fn_, 1.0);
        assert!(confusion_from_pairs(&[], 0.5).is_err());
    }

    #[test]
    fn confusion_matches_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pairs: Vec<(bool, f64)> = (0..200).map(|_| (rng.random_bool(0.4), rng.random())).collect();
        let c = confusion_from_pairs(&pairs, 0.5).unwrap();
        let tally = |t: bool, p: bool| pairs.iter().filter(|(x, s)| *x == t && (*s > 0.5) == p).count() as f64;
        assert_eq!(c, ConfusionCounts::new(tally(true, true), tally(false, true), tally(false, false), tally(true, false)));
        assert_eq!(c.total(), 200.0);
    }

    #[test]
    fn fraction_form_metrics() {
        let c = ConfusionCounts::new(45.4, 17.8, 29.8, 7.0);
        assert!((c.recall().unwrap() - 0.866).abs() < 1e-3);
        assert!((c.precision().unwrap() - 0.718).abs() < 1e-3);
        assert!((c.accuracy().unwrap() - 0.752).abs() < 1e-12);
        assert!((f1_score(0.72, 0.87).unwrap() - 0.787_924_528).abs() < 1e-9);
        assert_eq!(f1_score(0.6, 0.6).unwrap(), 0.6);
        assert!(ConfusionCounts::new(0.0, 0.0, 1.0, 0.0).precision().is_err());
        assert!(ConfusionCounts::default().accuracy().is_err());
    }

    #[test]
    fn roc_examples() {
        let perfect = [(false, 0.1), (false, 0.2), (true, 0.8), (true, 0.9)];
        assert_eq!(roc_auc(&perfect).unwrap(), 1.0);
        let flat = [(false, 0.5), (true, 0.5), (true, 0.5)];
        assert_eq!(roc_auc(&flat).unwrap(), 0.5);
        let curve = roc_curve(&flat).unwrap();
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[0].x, curve[0].y), (1.0, 1.0));
        assert_eq!((curve[1].x, curve[1].y), (0.0, 0.0));
        assert!(roc_auc(&[(true, 0.5), (true, 0.4)]).is_err());
    }

    #[test]
    fn roc_matches_mann_whitney_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let pairs: Vec<(bool, f64)> = (0..50)
            .map(|_| (rng.random_bool(0.5), f64::from(rng.random_range(0..10u8)) / 10.0))
            .collect();
        assert!((roc_auc(&pairs).unwrap() - mann_whitney(&pairs)).abs() < 1e-9);
    }

    #[test]
    fn pr_examples() {
        let perfect = [(false, 0.1), (false, 0.2), (true, 0.8), (true, 0.9)];
        assert_eq!(pr_auc(&perfect).unwrap(), 1.0);
        let c = pr_curve(&perfect).unwrap();
        assert!(c.windows(2).all(|w| w[0].threshold < w[1].threshold));
        assert_eq!(c.last().unwrap().x, 0.0);
        assert_eq!(c.first().unwrap().x, 1.0);
    }

    #[test]
    fn frank_hall_examples() {
        let p = frank_hall_compose(&[0.9, 0.6, 0.2]).unwrap();
        for (got, want) in p.class_probs.iter().zip([0.1, 0.3, 0.4, 0.2]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert_eq!(p.predicted_class(), Some(OrdinalClass::Danger));
        assert_eq!(frank_hall_compose(&[0.0, 0.0, 0.0]).unwrap().class_probs, vec![1.0, 0.0, 0.0, 0.0]);

        let p = frank_hall_compose(&[0.2, 0.8, 0.1]).unwrap();
        // raw (0.8, -0.6, 0.7, 0.1) -> clamp -> (0.8, 0, 0.7, 0.1) / 1.6
        let want = [0.5, 0.0, 0.4375, 0.0625];
        for (got, want) in p.class_probs.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(frank_hall_compose(&[1.2]).is_err());
    }

    #[test]
    fn balanced_accuracy_examples() {
        use OrdinalClass::*;
        let truths = [NoDanger, MildDanger, Danger, HighDanger, Danger];
        assert_eq!(balanced_accuracy(&truths, &truths).unwrap(), 1.0);
        let constant = [NoDanger; 8];
        let balanced = [NoDanger, MildDanger, Danger, HighDanger, NoDanger, MildDanger, Danger, HighDanger];
        assert_eq!(balanced_accuracy(&balanced, &constant).unwrap(), 0.25);
        assert!(balanced_accuracy(&[NoDanger, Danger], &[NoDanger, Danger]).is_err());
        assert!(balanced_accuracy(&balanced, &constant[..3]).is_err());
    }

    #[test]
    fn balanced_accuracy_matches_per_class_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draw = |rng: &mut ChaCha8Rng| OrdinalClass::ALL[rng.random_range(0..4)];
        let truths: Vec<_> = (0..300).map(|_| draw(&mut rng)).collect();
        let preds: Vec<_> = (0..300).map(|_| draw(&mut rng)).collect();
        let mut recalls = Vec::new();
        for class in OrdinalClass::ALL {
            let idx: Vec<usize> = (0..300).filter(|&i| truths[i] == class).collect();
            let hit = idx.iter().filter(|&&i| preds[i] == class).count();
            recalls.push(hit as f64 / idx.len() as f64);
        }
        let want = recalls.iter().sum::<f64>() / 4.0;
        assert!((balanced_accuracy(&truths, &preds).unwrap() - want).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn roc_auc_is_mann_whitney(
            pairs in prop::collection::vec((any::<bool>(), 0u8..20), 2..200)
        ) {
            let pairs: Vec<(bool, f64)> = pairs.into_iter().map(|(t, s)| (t, f64::from(s) / 20.0)).collect();
            let pos = pairs.iter().filter(|p| p.0).count();
            prop_assume!(pos > 0 && pos < pairs.len());
            prop_assert!((roc_auc(&pairs).unwrap() - mann_whitney(&pairs)).abs() < 1e-9);
        }

        #[test]
        fn recall_non_increasing_in_threshold(
            pairs in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 1..100),
            t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
        ) {
            prop_assume!(pairs.iter().any(|p| p.0) && t1 <= t2);
            let r1 = confusion_from_pairs(&pairs, t1).unwrap().recall().unwrap();
            let r2 = confusion_from_pairs(&pairs, t2).unwrap().recall().unwrap();
            prop_assert!(r2 <= r1);
        }

        #[test]
        fn fraction_accuracy_algebra(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.01f64..1.0) {
            let s = a + b + c + d;
            let cc = ConfusionCounts::new(a / s, b / s, c / s, d / s);
            prop_assert!((cc.accuracy().unwrap() - (cc.tp + cc.tn)).abs() < 1e-15);
        }

        #[test]
        fn frank_hall_simplex(p in prop::collection::vec(0.0f64..=1.0, 1..8)) {
            let out = frank_hall_compose(&p).unwrap();
            prop_assert_eq!(out.class_probs.len(), p.len() + 1);
            prop_assert!((out.class_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(out.class_probs.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
