//! Empirical performance metrics computed from classifier scores.
//!
//! Class 1 is the "positive" class: a higher score means more class-1-like,
//! and the AUC is the probability that a class-1 score exceeds a class-2
//! score. Scores are compared with exact floating equality; near-ties are not
//! snapped.

use crate::error::{invalid, Result};

/// Scores of the class-1 and class-2 cases.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub scores1: Vec<f64>,
    pub scores2: Vec<f64>,
}

impl ScoreSet {
    pub fn new(scores1: Vec<f64>, scores2: Vec<f64>) -> Result<Self> {
        let s = Self { scores1, scores2 };
        s.check_finite()?;
        Ok(s)
    }

    pub fn n1(&self) -> usize {
        self.scores1.len()
    }

    pub fn n2(&self) -> usize {
        self.scores2.len()
    }

    /// The same scores with the class roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            scores1: self.scores2.clone(),
            scores2: self.scores1.clone(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        if self
            .scores1
            .iter()
            .chain(&self.scores2)
            .all(|s| s.is_finite())
        {
            Ok(())
        } else {
            Err(invalid("scores must be finite"))
        }
    }

    fn check_both_nonempty(&self) -> Result<()> {
        if self.scores1.is_empty() || self.scores2.is_empty() {
            return Err(invalid(format!(
                "both classes need at least one score (got n1={}, n2={})",
                self.n1(),
                self.n2()
            )));
        }
        self.check_finite()
    }
}

/// Empirical ROC curve, stored as exact integer counts.
///
/// Point `k` classifies a case as class 1 when its score exceeds
/// `thresholds[k]`; `true_pos[k]` counts class-1 cases above the threshold and
/// `false_pos[k]` class-2 cases above it.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub n1: u64,
    pub n2: u64,
    pub thresholds: Vec<f64>,
    pub true_pos: Vec<u64>,
    pub false_pos: Vec<u64>,
}

/// One (FPF, TPF) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpf: f64,
    pub tpf: f64,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn points(&self) -> Vec<RocPoint> {
        self.true_pos
            .iter()
            .zip(&self.false_pos)
            .map(|(&tp, &fp)| RocPoint {
                fpf: fp as f64 / self.n2 as f64,
                tpf: tp as f64 / self.n1 as f64,
            })
            .collect()
    }
}

/// Misclassification costs and class priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Cost of calling a class-1 case class 2.
    pub c12: f64,
    /// Cost of calling a class-2 case class 1.
    pub c21: f64,
    pub p1: f64,
    pub p2: f64,
}

impl CostModel {
    pub fn new(c12: f64, c21: f64, p1: f64, p2: f64) -> Result<Self> {
        if !(c12 >= 0.0 && c21 >= 0.0) {
            return Err(invalid("costs must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) || (p1 + p2 - 1.0).abs() > 1e-12
        {
            return Err(invalid(format!(
                "priors must lie in [0,1] and sum to 1 (got {p1}, {p2})"
            )));
        }
        Ok(Self { c12, c21, p1, p2 })
    }

    /// Unit costs with priors estimated from the class counts.
    pub fn unit_from_counts(n1: usize, n2: usize) -> Self {
        let n = (n1 + n2) as f64;
        Self {
            c12: 1.0,
            c21: 1.0,
            p1: n1 as f64 / n,
            p2: n2 as f64 / n,
        }
    }
}

/// Decision rule shared by every error computation: class 1 iff the score
/// exceeds the threshold.
#[inline]
pub fn predicts_class1(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// 0-1 loss of a class-1 (`is_class1`) or class-2 case.
#[inline]
pub fn zero_one_loss(is_class1: bool, score: f64, threshold: f64) -> f64 {
    if predicts_class1(score, threshold) == is_class1 {
        0.0
    } else {
        1.0
    }
}

/// Mann-Whitney kernel: 1, 1/2 or 0 as `a` is above, tied with, or below `b`.
#[inline]
pub fn psi(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Empirical ROC over every threshold between successive distinct scores,
/// with the (0,0) and (1,1) endpoints from the ±∞ sentinels.
pub fn empirical_roc(s: &ScoreSet) -> Result<RocCurve> {
    s.check_both_nonempty()?;
    let mut pooled: Vec<(f64, bool)> = s
        .scores1
        .iter()
        .map(|&v| (v, true))
        .chain(s.scores2.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds = vec![f64::INFINITY];
    let mut true_pos = vec![0u64];
    let mut false_pos = vec![0u64];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < pooled.len() {
        let value = pooled[k].0;
        while k < pooled.len() && pooled[k].0 == value {
            if pooled[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let threshold = match pooled.get(k) {
            Some(&(next, _)) => value / 2.0 + next / 2.0,
            None => f64::NEG_INFINITY,
        };
        thresholds.push(threshold);
        true_pos.push(tp);
        false_pos.push(fp);
    }
    Ok(RocCurve {
        n1: s.n1() as u64,
        n2: s.n2() as u64,
        thresholds,
        true_pos,
        false_pos,
    })
}

/// Trapezoid-rule area under an empirical ROC curve.
///
/// Evaluated in integer arithmetic (twice the area times `n1·n2`) so the
/// result is the correctly rounded rational value.
pub fn auc_trapezoid(roc: &RocCurve) -> f64 {
    let doubled: u128 = roc
        .false_pos
        .windows(2)
        .zip(roc.true_pos.windows(2))
        .map(|(fp, tp)| (fp[1] - fp[0]) as u128 * (tp[1] + tp[0]) as u128)
        .sum();
    doubled as f64 / (2 * roc.n1 as u128 * roc.n2 as u128) as f64
}

/// Mann-Whitney estimate of `Pr[class-1 score > class-2 score]` with ties
/// counted one half.
pub fn auc_mann_whitney(s: &ScoreSet) -> Result<f64> {
    s.check_both_nonempty()?;
    Ok(mann_whitney(&s.scores1, &s.scores2))
}

/// Slice form of [`auc_mann_whitney`]; callers guarantee both slices are
/// nonempty.
pub fn mann_whitney(scores1: &[f64], scores2: &[f64]) -> f64 {
    let (greater, ties) = pair_counts(scores1, scores2);
    let pairs = scores1.len() as u128 * scores2.len() as u128;
    (2 * greater + ties) as f64 / (2 * pairs) as f64
}

/// Counts of (class-1, class-2) pairs with the class-1 score strictly
/// greater, and tied.
pub fn pair_counts(scores1: &[f64], scores2: &[f64]) -> (u128, u128) {
    if scores1.len() * scores2.len() <= 4096 {
        let mut greater = 0u128;
        let mut ties = 0u128;
        for &a in scores1 {
            for &b in scores2 {
                if a > b {
                    greater += 1;
                } else if a == b {
                    ties += 1;
                }
            }
        }
        return (greater, ties);
    }
    let mut sorted2 = scores2.to_vec();
    sorted2.sort_by(f64::total_cmp);
    let mut sorted1 = scores1.to_vec();
    sorted1.sort_by(f64::total_cmp);
    let (mut below, mut not_above) = (0usize, 0usize);
    let mut greater = 0u128;
    let mut ties = 0u128;
    for &a in &sorted1 {
        while below < sorted2.len() && sorted2[below] < a {
            below += 1;
        }
        if not_above < below {
            not_above = below;
        }
        while not_above < sorted2.len() && sorted2[not_above] <= a {
            not_above += 1;
        }
        greater += below as u128;
        ties += (not_above - below) as u128;
    }
    (greater, ties)
}

/// Empirical risk `c12·p1·FNF + c21·p2·FPF` at a fixed threshold.
pub fn error_rate(s: &ScoreSet, threshold: f64, costs: &CostModel) -> Result<f64> {
    s.check_both_nonempty()?;
    let misses = s
        .scores1
        .iter()
        .filter(|&&v| !predicts_class1(v, threshold))
        .count();
    let false_alarms = s
        .scores2
        .iter()
        .filter(|&&v| predicts_class1(v, threshold))
        .count();
    let fnf = misses as f64 / s.n1() as f64;
    let fpf = false_alarms as f64 / s.n2() as f64;
    Ok(costs.c12 * costs.p1 * fnf + costs.c21 * costs.p2 * fpf)
}
