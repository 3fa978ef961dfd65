//! Evaluation criteria, the score-to-cost conversion, and the isotonic
//! transform applied to costs before they are embedded as distances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Exponent of the isotonic transform; fixed so that squared embedded
/// distances bound costs directly.
pub const ISOTONIC_EXPONENT: f64 = 0.5;

/// The evaluation criteria supported by the pipeline.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Hamming,
    F1,
    Accuracy,
    RankLoss,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Hamming,
        Criterion::F1,
        Criterion::Accuracy,
        Criterion::RankLoss,
    ];

    /// True when lower values are better (losses); false for scores.
    pub fn is_loss(self) -> bool {
        matches!(self, Criterion::Hamming | Criterion::RankLoss)
    }

    /// Raw criterion value: a score in [0,1] for F1/Accuracy, a loss for
    /// Hamming/RankLoss.
    pub fn evaluate(self, truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
        match self {
            Criterion::Hamming => hamming_loss(truth, pred),
            Criterion::F1 => f1_score(truth, pred),
            Criterion::Accuracy => accuracy_score(truth, pred),
            Criterion::RankLoss => rank_loss(truth, pred),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Hamming => "hamming",
            Criterion::F1 => "f1",
            Criterion::Accuracy => "accuracy",
            Criterion::RankLoss => "rank_loss",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hamming" => Ok(Criterion::Hamming),
            "f1" => Ok(Criterion::F1),
            "accuracy" | "acc" => Ok(Criterion::Accuracy),
            "rank_loss" | "rankloss" | "rank" => Ok(Criterion::RankLoss),
            other => Err(Error::Validation(format!("unknown criterion `{other}`"))),
        }
    }
}

/// A criterion viewed as a nonnegative cost function, together with the
/// isotonic transform used when embedding the costs.
///
/// Scores are converted to costs as `1 - score`; losses pass through.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSpec {
    pub criterion: Criterion,
}

impl CostSpec {
    pub fn new(criterion: Criterion) -> Self {
        CostSpec { criterion }
    }

    /// Nonnegative cost of predicting `pred` when the truth is `truth`;
    /// zero iff the criterion cannot distinguish them.
    pub fn cost(&self, truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
        let value = self.criterion.evaluate(truth, pred)?;
        Ok(if self.criterion.is_loss() {
            value
        } else {
            1.0 - value
        })
    }

    /// Isotonic cost `delta(cost)`, the dissimilarity embedded as a distance.
    pub fn dissimilarity(&self, truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
        isotonic_delta(self.cost(truth, pred)?)
    }
}

/// Fraction of label components on which the two vectors disagree.
pub fn hamming_loss(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    truth.check_same_len(pred)?;
    let mismatches = truth
        .bits()
        .iter()
        .zip(pred.bits())
        .filter(|(a, b)| a != b)
        .count();
    Ok(mismatches as f64 / truth.len() as f64)
}

/// F1 score `2|y ∩ ŷ| / (|y| + |ŷ|)`; 1 when both vectors are all-zero.
pub fn f1_score(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    truth.check_same_len(pred)?;
    let intersection = truth
        .bits()
        .iter()
        .zip(pred.bits())
        .filter(|(&a, &b)| a == 1 && b == 1)
        .count();
    let denom = truth.count_ones() + pred.count_ones();
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * intersection as f64 / denom as f64)
}

/// Jaccard score `|y ∩ ŷ| / |y ∪ ŷ|`; 1 when both vectors are all-zero.
pub fn accuracy_score(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    truth.check_same_len(pred)?;
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (&a, &b) in truth.bits().iter().zip(pred.bits()) {
        if a == 1 && b == 1 {
            intersection += 1;
        }
        if a == 1 || b == 1 {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(intersection as f64 / union as f64)
}

/// Rank loss: over index pairs with `truth[i] > truth[j]`, counts 1 for each
/// inverted prediction pair and 1/2 for each tied one.
///
/// For binary predictions this reduces to counting over the positive set P
/// (truth 1) and negative set N (truth 0): inversions are pairs predicted
/// (0,1), ties are pairs predicted (0,0) or (1,1).
pub fn rank_loss(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    truth.check_same_len(pred)?;
    let mut pos_pred0 = 0.0f64; // truth 1, pred 0
    let mut pos_pred1 = 0.0f64; // truth 1, pred 1
    let mut neg_pred0 = 0.0f64; // truth 0, pred 0
    let mut neg_pred1 = 0.0f64; // truth 0, pred 1
    for (&y, &p) in truth.bits().iter().zip(pred.bits()) {
        match (y, p) {
            (1, 0) => pos_pred0 += 1.0,
            (1, _) => pos_pred1 += 1.0,
            (0, 0) => neg_pred0 += 1.0,
            _ => neg_pred1 += 1.0,
        }
    }
    Ok(pos_pred0 * neg_pred1 + 0.5 * (pos_pred0 * neg_pred0 + pos_pred1 * neg_pred1))
}

/// The isotonic transform `delta(c) = sqrt(c)` applied to costs before they
/// are used as target dissimilarities.
pub fn isotonic_delta(cost: f64) -> Result<f64> {
    if !(cost >= 0.0) {
        return Err(Error::Domain(format!(
            "isotonic transform requires a nonnegative cost, got {cost}"
        )));
    }
    Ok(cost.powf(ISOTONIC_EXPONENT))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(bits: &[u8]) -> LabelVector {
        LabelVector::new(bits.to_vec()).unwrap()
    }

    /// Literal transcription of the rank-loss definition, used as an oracle
    /// for the counting implementation.
    fn rank_loss_pairwise(truth: &LabelVector, pred: &LabelVector) -> f64 {
        let mut total = 0.0;
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                if truth.bit(i) > truth.bit(j) {
                    if pred.bit(i) < pred.bit(j) {
                        total += 1.0;
                    } else if pred.bit(i) == pred.bit(j) {
                        total += 0.5;
                    }
                }
            }
        }
        total
    }

    #[test]
    fn hamming_worked_examples() {
        assert_eq!(hamming_loss(&lv(&[1, 0, 1]), &lv(&[1, 0, 1])).unwrap(), 0.0);
        assert!(
            (hamming_loss(&lv(&[1, 0, 1]), &lv(&[1, 1, 1])).unwrap() - 1.0 / 3.0).abs() < 1e-15
        );
        assert_eq!(hamming_loss(&lv(&[0, 0, 0]), &lv(&[1, 1, 1])).unwrap(), 1.0);
        assert!(hamming_loss(&lv(&[1, 0]), &lv(&[1, 0, 1])).is_err());
    }

    #[test]
    fn f1_worked_examples() {
        assert!((f1_score(&lv(&[1, 1, 0]), &lv(&[1, 0, 0])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(&lv(&[1, 0, 1]), &lv(&[1, 0, 1])).unwrap(), 1.0);
        assert_eq!(f1_score(&lv(&[0, 0]), &lv(&[0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_worked_examples() {
        assert_eq!(
            accuracy_score(&lv(&[1, 1, 0]), &lv(&[1, 0, 0])).unwrap(),
            0.5
        );
        assert_eq!(accuracy_score(&lv(&[1, 0, 1]), &lv(&[1, 0, 1])).unwrap(), 1.0);
        assert_eq!(accuracy_score(&lv(&[1, 0]), &lv(&[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn rank_loss_worked_examples() {
        assert_eq!(rank_loss(&lv(&[1, 0]), &lv(&[0, 0])).unwrap(), 0.5);
        assert_eq!(rank_loss(&lv(&[1, 0]), &lv(&[0, 1])).unwrap(), 1.0);
        assert_eq!(rank_loss(&lv(&[1, 0]), &lv(&[1, 0])).unwrap(), 0.0);
        assert_eq!(rank_loss(&lv(&[0, 0, 0]), &lv(&[1, 0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn rank_loss_asymmetry_witness() {
        // Values from the pairwise definition itself.
        let a = lv(&[1, 0]);
        let b = lv(&[1, 1]);
        assert_eq!(rank_loss(&a, &b).unwrap(), rank_loss_pairwise(&a, &b));
        assert_eq!(rank_loss(&b, &a).unwrap(), rank_loss_pairwise(&b, &a));
        assert_eq!(rank_loss(&a, &b).unwrap(), 0.5);
        assert_eq!(rank_loss(&b, &a).unwrap(), 0.0);
        assert_ne!(rank_loss(&a, &b).unwrap(), rank_loss(&b, &a).unwrap());
    }

    #[test]
    fn cost_of_worked_examples() {
        let f1 = CostSpec::new(Criterion::F1);
        assert_eq!(f1.cost(&lv(&[1, 1, 0]), &lv(&[1, 1, 0])).unwrap(), 0.0);
        assert!((f1.cost(&lv(&[1, 1, 0]), &lv(&[1, 0, 0])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let rank = CostSpec::new(Criterion::RankLoss);
        assert_eq!(rank.cost(&lv(&[1, 0]), &lv(&[0, 1])).unwrap(), 1.0);
    }

    #[test]
    fn isotonic_delta_worked_examples() {
        assert_eq!(isotonic_delta(0.0).unwrap(), 0.0);
        assert_eq!(isotonic_delta(1.0).unwrap(), 1.0);
        assert_eq!(isotonic_delta(0.25).unwrap(), 0.5);
        assert!(isotonic_delta(-1e-9).is_err());
        assert!(isotonic_delta(f64::NAN).is_err());
    }

    #[test]
    fn criterion_round_trips_through_str() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
        }
        assert!("nope".parse::<Criterion>().is_err());
    }

    proptest! {
        #[test]
        fn identity_has_zero_cost(bits in proptest::collection::vec(0u8..=1, 1..12)) {
            let y = LabelVector::new(bits).unwrap();
            for c in Criterion::ALL {
                prop_assert_eq!(CostSpec::new(c).cost(&y, &y).unwrap(), 0.0);
            }
        }

        #[test]
        fn ranges_hold(
            a in proptest::collection::vec(0u8..=1, 1..12),
            b in proptest::collection::vec(0u8..=1, 1..12),
        ) {
            let k = a.len().min(b.len());
            let y = LabelVector::new(a[..k].to_vec()).unwrap();
            let p = LabelVector::new(b[..k].to_vec()).unwrap();
            let f1 = f1_score(&y, &p).unwrap();
            let acc = accuracy_score(&y, &p).unwrap();
            let ham = hamming_loss(&y, &p).unwrap();
            let rank = rank_loss(&y, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&f1));
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert!((0.0..=1.0).contains(&ham));
            prop_assert!(rank >= 0.0 && rank <= (k * k) as f64 / 4.0);
        }

        #[test]
        fn symmetric_criteria_are_symmetric(
            a in proptest::collection::vec(0u8..=1, 1..12),
            b in proptest::collection::vec(0u8..=1, 1..12),
        ) {
            let k = a.len().min(b.len());
            let y = LabelVector::new(a[..k].to_vec()).unwrap();
            let p = LabelVector::new(b[..k].to_vec()).unwrap();
            prop_assert_eq!(hamming_loss(&y, &p).unwrap(), hamming_loss(&p, &y).unwrap());
            prop_assert_eq!(f1_score(&y, &p).unwrap(), f1_score(&p, &y).unwrap());
            prop_assert_eq!(accuracy_score(&y, &p).unwrap(), accuracy_score(&p, &y).unwrap());
        }

        #[test]
        fn rank_loss_matches_pairwise_definition(
            a in proptest::collection::vec(0u8..=1, 1..12),
            b in proptest::collection::vec(0u8..=1, 1..12),
        ) {
            let k = a.len().min(b.len());
            let y = LabelVector::new(a[..k].to_vec()).unwrap();
            let p = LabelVector::new(b[..k].to_vec()).unwrap();
            prop_assert_eq!(rank_loss(&y, &p).unwrap(), rank_loss_pairwise(&y, &p));
        }

        #[test]
        fn isotonic_delta_is_monotone(c1 in 0.0f64..10.0, c2 in 0.0f64..10.0) {
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            prop_assert!(isotonic_delta(lo).unwrap() <= isotonic_delta(hi).unwrap());
        }
    }
}
