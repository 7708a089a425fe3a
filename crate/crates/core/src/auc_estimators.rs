//! AUC estimators built on the shared replicate ensemble.

use crate::classifiers::ScoringRule;
use crate::dataset::{Class, LabeledDataset};
use crate::ensemble::ReplicateEnsemble;
use crate::error::{invalid, Error, Result};
use crate::metrics::{empirical_roc, mann_whitney, psi, RocCurve, ScoreSet};
use crate::{W_APPARENT, W_OUT_OF_BAG};

/// AUC of a rule whose labels carry no information about its scores.
pub fn gamma_auc() -> f64 {
    0.5
}

fn split_scores(labels: &[Class], scores: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for (&c, &s) in labels.iter().zip(scores) {
        if c.is_one() {
            s1.push(s);
        } else {
            s2.push(s);
        }
    }
    (s1, s2)
}

/// Mann-Whitney AUC of `scores` split by `labels`.
pub fn auc_of(labels: &[Class], scores: &[f64]) -> f64 {
    let (s1, s2) = split_scores(labels, scores);
    mann_whitney(&s1, &s2)
}

/// Resubstitution AUC of `model` on its training data.
pub fn apparent_auc<M: ScoringRule>(model: &M, data: &LabeledDataset) -> Result<f64> {
    let s = ScoreSet::new(
        model.score_rows(data, data.class_indices(Class::One)),
        model.score_rows(data, data.class_indices(Class::Two)),
    )?;
    crate::metrics::auc_mann_whitney(&s)
}

/// Mean over replicates of the replicate model's AUC on the full data.
pub fn sb_auc(ens: &ReplicateEnsemble) -> f64 {
    ens.scores
        .iter()
        .map(|s| auc_of(&ens.labels, s))
        .sum::<f64>()
        / ens.bootstraps() as f64
}

/// Mean over replicates of the AUC on the replicate's excluded cases, and the
/// count of replicates dropped for excluding no case of some class.
pub fn auc_star(ens: &ReplicateEnsemble) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut used = 0usize;
    for (rep, scores) in ens.replicates.iter().zip(&ens.scores) {
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for i in rep.excluded() {
            if ens.labels[i].is_one() {
                s1.push(scores[i]);
            } else {
                s2.push(scores[i]);
            }
        }
        if !s1.is_empty() && !s2.is_empty() {
            total += mann_whitney(&s1, &s2);
            used += 1;
        }
    }
    let dropped = ens.bootstraps() - used;
    if used == 0 {
        return Err(Error::NoUsableReplicates { dropped });
    }
    Ok((total / used as f64, dropped))
}

/// Leave-pair-out bootstrap: each (class-1, class-2) pair's kernel averaged
/// over the replicates excluding both, then averaged over pairs. Pairs no
/// replicate excludes use their conditioned supplements.
pub fn lpob_auc(ens: &ReplicateEnsemble) -> Result<f64> {
    let c1 = ens.class_indices(Class::One);
    let c2 = ens.class_indices(Class::Two);
    if c1.is_empty() || c2.is_empty() {
        return Err(invalid("both classes need at least one case"));
    }
    let n2 = c2.len();
    let mut sums = vec![0.0; c1.len() * n2];
    let mut counts = vec![0u32; c1.len() * n2];
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for (rep, scores) in ens.replicates.iter().zip(&ens.scores) {
        e1.clear();
        e2.clear();
        e1.extend((0..c1.len()).filter(|&a| rep.is_excluded(c1[a])));
        e2.extend((0..n2).filter(|&b| rep.is_excluded(c2[b])));
        for &a in &e1 {
            let sa = scores[c1[a]];
            let row = a * n2;
            for &b in &e2 {
                sums[row + b] += psi(sa, scores[c2[b]]);
                counts[row + b] += 1;
            }
        }
    }
    let pos1 = position_map(&c1, ens.n());
    let pos2 = position_map(&c2, ens.n());
    for sup in &ens.pair_supplements {
        let k = pos1[sup.case1] * n2 + pos2[sup.case2];
        if counts[k] == 0 {
            sums[k] = psi(sup.score1, sup.score2);
            counts[k] = u32::MAX;
        }
    }
    let mut total = 0.0;
    for (k, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
        total += match c {
            0 => {
                let (a, b) = (k / n2, k % n2);
                return Err(invalid(format!(
                    "pair ({}, {}) is excluded by no replicate and has no supplement",
                    c1[a], c2[b]
                )));
            }
            u32::MAX => s,
            c => s / c as f64,
        };
    }
    Ok(total / sums.len() as f64)
}

fn position_map(indices: &[usize], n: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in indices.iter().enumerate() {
        pos[i] = p;
    }
    pos
}

pub fn dot632_auc(apparent: f64, star: f64) -> f64 {
    W_APPARENT * apparent + W_OUT_OF_BAG * star
}

/// Relative overfitting rate for the AUC. Nonzero only under the overfit
/// ordering `apparent > star > 0.5`, where it lies strictly inside (0, 1).
pub fn auc_overfitting_rate(apparent: f64, star: f64) -> f64 {
    let gamma = gamma_auc();
    if apparent > star && star > gamma {
        (star - apparent) / (gamma - apparent)
    } else {
        0.0
    }
}

/// .632+ AUC estimate and the overfitting rate it used. The correction is
/// never positive.
pub fn dot632plus_auc(apparent: f64, star: f64) -> (f64, f64) {
    let r = auc_overfitting_rate(apparent, star);
    let floored = star.max(gamma_auc());
    let value = dot632_auc(apparent, star)
        + (floored - apparent) * W_APPARENT * W_OUT_OF_BAG * r / (1.0 - W_APPARENT * r);
    (value, r)
}

/// ROC of the no-information sample: every score paired with every label,
/// `n²` cases in all.
pub fn no_info_roc_check(labels: &[Class], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let n1 = labels.iter().filter(|c| c.is_one()).count();
    let n2 = labels.len() - n1;
    let mut s1 = Vec::with_capacity(n1 * scores.len());
    let mut s2 = Vec::with_capacity(n2 * scores.len());
    for &label in labels {
        let target = if label.is_one() { &mut s1 } else { &mut s2 };
        target.extend_from_slice(scores);
    }
    empirical_roc(&ScoreSet::new(s1, s2)?)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AucDiagnostics {
    /// Replicates without excluded cases of both classes.
    pub dropped_replicates: usize,
    /// Pairs whose LPOB term came from conditioned supplements.
    pub supplemented_pairs: usize,
    pub redraws: usize,
}

/// All AUC estimates for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct AucEstimateBundle {
    pub apparent_auc: f64,
    pub sb_auc: f64,
    pub auc_star: f64,
    pub dot632_auc: f64,
    pub dot632plus_auc: f64,
    /// `None` when the pair-level estimator was not requested.
    pub lpob_auc: Option<f64>,
    pub gamma_auc: f64,
    pub r_hat_prime: f64,
    pub bootstraps: usize,
    pub diagnostics: AucDiagnostics,
}

impl AucEstimateBundle {
    pub fn from_ensemble(ens: &ReplicateEnsemble, with_lpob: bool) -> Result<Self> {
        let apparent = auc_of(&ens.labels, &ens.apparent_scores);
        let (star, dropped) = auc_star(ens)?;
        let (plus, r) = dot632plus_auc(apparent, star);
        let lpob = if with_lpob {
            Some(lpob_auc(ens)?)
        } else {
            None
        };
        Ok(Self {
            apparent_auc: apparent,
            sb_auc: sb_auc(ens),
            auc_star: star,
            dot632_auc: dot632_auc(apparent, star),
            dot632plus_auc: plus,
            lpob_auc: lpob,
            gamma_auc: gamma_auc(),
            r_hat_prime: r,
            bootstraps: ens.bootstraps(),
            diagnostics: AucDiagnostics {
                dropped_replicates: dropped,
                supplemented_pairs: if with_lpob {
                    ens.pair_supplements.len()
                } else {
                    0
                },
                redraws: ens.redraws,
            },
        })
    }

    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("apparent_auc", self.apparent_auc),
            ("sb_auc", self.sb_auc),
            ("auc_star", self.auc_star),
            ("dot632_auc", self.dot632_auc),
            ("dot632plus_auc", self.dot632plus_auc),
        ];
        if let Some(l) = self.lpob_auc {
            v.push(("lpob_auc", l));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ClassifierKind, DiscriminantTrainer, Trainer};
    use crate::ensemble::test_support::*;
    use crate::ensemble::EnsembleOptions;
    use crate::metrics::auc_trapezoid;
    use crate::resampling::BootstrapReplicate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn apparent_auc_examples() {
        let d = one_dim(&[0.0, 1.0, 2.0], &[0.5, 1.5, 2.5]);
        let memo = Memorizer.fit_all(&d).unwrap();
        assert_eq!(apparent_auc(&memo, &d).unwrap(), 1.0);
        let same = one_dim(&[0.0, 1.0], &[0.0, 1.0]);
        let lda = DiscriminantTrainer::new(ClassifierKind::Lda)
            .fit_all(&same)
            .unwrap();
        assert_eq!(apparent_auc(&lda, &same).unwrap(), 0.5);
        let d = one_dim(&[0.0, 0.9, 0.3], &[0.5, 1.5, 2.5, 0.1]);
        let m = DiscriminantTrainer::new(ClassifierKind::Lda)
            .fit_all(&d)
            .unwrap();
        let s = ScoreSet::new(
            m.score_rows(&d, d.class_indices(Class::One)),
            m.score_rows(&d, d.class_indices(Class::Two)),
        )
        .unwrap();
        assert_eq!(
            apparent_auc(&m, &d).unwrap(),
            crate::metrics::auc_mann_whitney(&s).unwrap()
        );
    }

    #[test]
    fn sb_auc_with_original_replicate_is_apparent() {
        let d = one_dim(&[0.0, 0.7, 1.1], &[0.6, 1.4, 2.0]);
        let t = DiscriminantTrainer::new(ClassifierKind::Lda);
        let rep = BootstrapReplicate::from_rows(6, (0..6).collect());
        let ens =
            ReplicateEnsemble::from_replicates(&d, &t, vec![rep], &EnsembleOptions::new(1, 0))
                .unwrap();
        assert_eq!(sb_auc(&ens), auc_of(&ens.labels, &ens.apparent_scores));
    }

    #[test]
    fn auc_star_hand_trace_four_by_three() {
        // 6 class-1 and 5 class-2 cases; the replicate excludes 4 of class 1
        // and 3 of class 2. Scores are the feature itself.
        let c1 = [0.9, 0.2, 0.5, 0.7, 0.4, 0.8];
        let c2 = [0.3, 0.6, 0.1, 0.5, 0.0];
        let d = one_dim(&c1, &c2);
        let rule = FixedRule(|x| x);
        // Include class-1 cases 0,1 and class-2 cases 9,10 (indices 6..11).
        let rep = BootstrapReplicate::from_rows(11, vec![0, 0, 1, 1, 0, 1, 9, 10, 9, 9, 10]);
        let ens =
            ReplicateEnsemble::from_replicates(&d, &rule, vec![rep], &EnsembleOptions::new(1, 0))
                .unwrap();
        // Excluded class 1: 0.5, 0.7, 0.4, 0.8; class 2: 0.3, 0.6, 0.1.
        // 0.5: >0.3,<0.6,>0.1 → 2; 0.7: 3; 0.4: 2; 0.8: 3. Total 10/12.
        let (v, dropped) = auc_star(&ens).unwrap();
        assert!(close(v, 10.0 / 12.0, 1e-15));
        assert_eq!(dropped, 0);
    }

    #[test]
    fn auc_star_drops_one_sided_replicates() {
        let d = one_dim(&[0.0, 1.0], &[0.5, 1.5]);
        let reps = vec![
            BootstrapReplicate::from_rows(4, vec![0, 0, 2, 3]),
            BootstrapReplicate::from_rows(4, vec![0, 0, 3, 3]),
        ];
        let ens = ReplicateEnsemble::from_replicates(
            &d,
            &FixedRule(|x| x),
            reps,
            &EnsembleOptions::new(2, 0),
        )
        .unwrap();
        let (v, dropped) = auc_star(&ens).unwrap();
        assert_eq!(dropped, 1);
        // Second replicate: case 1 (1.0) vs case 2 (0.5).
        assert_eq!(v, 1.0);
    }

    #[test]
    fn lpob_two_replicate_trace() {
        // Scores depend on the replicate: memorizer trained on different rows.
        let d = one_dim(&[0.0, 2.0], &[1.0, 3.0]);
        let reps = vec![
            // Excludes 1 and 3: model points 0(+), 1(−).
            BootstrapReplicate::from_rows(4, vec![0, 0, 2, 2]),
            // Excludes 1 and 2: model points 0(+), 3(−).
            BootstrapReplicate::from_rows(4, vec![0, 0, 3, 3]),
        ];
        let ens =
            ReplicateEnsemble::from_replicates(&d, &Memorizer, reps, &EnsembleOptions::new(2, 11))
                .unwrap();
        // Pair (1,3) under rep 1: x=2 → nearest 1 (−), x=3 → nearest 1 (−): tie 0.5.
        // Pair (1,2) under rep 2: x=2 → 3 (−) at distance 1 vs 0 at 2: −;
        //   x=1 → 0 (+): ψ(−1, +1) = 0.
        // Pairs (0,2) and (0,3) are never jointly excluded: supplements.
        let sup: Vec<(usize, usize)> = ens
            .pair_supplements
            .iter()
            .map(|p| (p.case1, p.case2))
            .collect();
        assert_eq!(sup, vec![(0, 2), (0, 3)]);
        let sup_terms: f64 = ens
            .pair_supplements
            .iter()
            .map(|p| psi(p.score1, p.score2))
            .sum();
        let expected = (0.5 + 0.0 + sup_terms) / 4.0;
        assert!(close(lpob_auc(&ens).unwrap(), expected, 1e-15));
    }

    #[test]
    fn dot632_auc_examples() {
        assert!(close(dot632_auc(1.0, 0.5), 0.684, 1e-15));
        assert!(close(dot632_auc(0.7, 0.7), 0.7, 1e-15));
        assert!(close(dot632_auc(0.8897, 0.5914), 0.7012, 1e-4));
    }

    #[test]
    fn dot632plus_auc_examples() {
        // Out-of-bag AUC below chance breaks the overfit ordering: no correction.
        let (v, r) = dot632plus_auc(0.9, 0.45);
        assert_eq!(r, 0.0);
        assert_eq!(v, dot632_auc(0.9, 0.45));
        // apparent .9, star .6: R = (.6-.9)/(.5-.9) = .75.
        let (v, r) = dot632plus_auc(0.9, 0.6);
        assert!(close(r, 0.75, 1e-15));
        let correction = v - dot632_auc(0.9, 0.6);
        assert!(close(
            correction,
            (0.6 - 0.9) * 0.368 * 0.632 * 0.75 / (1.0 - 0.368 * 0.75),
            1e-15
        ));
        assert!(close(correction, -0.072278, 1e-6));
        // Star at chance sits on the boundary.
        assert_eq!(dot632plus_auc(0.9, 0.5).1, 0.0);
        let (v, r) = dot632plus_auc(0.8, 0.8);
        assert_eq!(r, 0.0);
        assert_eq!(v, dot632_auc(0.8, 0.8));
        // Apparent at chance: guarded.
        assert_eq!(dot632plus_auc(0.5, 0.4).1, 0.0);
        let (plus, _) = dot632plus_auc(0.8897, 0.5914);
        assert!(plus < dot632_auc(0.8897, 0.5914));
    }

    #[test]
    fn no_info_roc_examples() {
        let roc = no_info_roc_check(&[Class::One, Class::Two], &[3.0, -1.0]).unwrap();
        assert_eq!((roc.n1, roc.n2), (2, 2));
        for p in roc.points() {
            assert_eq!(p.tpf, p.fpf);
        }
        assert_eq!(auc_trapezoid(&roc), 0.5);
        assert_eq!(gamma_auc(), 0.5);
    }

    proptest! {
        #[test]
        fn no_info_roc_is_diagonal(seed in any::<u64>(), n1 in 1usize..12, n2 in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = n1 + n2;
            let labels: Vec<Class> = (0..n).map(|i| if i < n1 { Class::One } else { Class::Two }).collect();
            let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..6) as f64) * 0.5).collect();
            let roc = no_info_roc_check(&labels, &scores).unwrap();
            for k in 0..roc.len() {
                prop_assert_eq!(roc.true_pos[k] * roc.n2, roc.false_pos[k] * roc.n1);
                // Fraction of original cases above the threshold.
                let above = scores.iter().filter(|&&s| s > roc.thresholds[k]).count() as u64;
                prop_assert_eq!(roc.true_pos[k], above * n1 as u64);
            }
            prop_assert_eq!(auc_trapezoid(&roc), 0.5);
        }

        #[test]
        fn dot632plus_auc_never_exceeds_dot632(app in 0.0f64..1.0, star in 0.0f64..1.0) {
            let (v, r) = dot632plus_auc(app, star);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(v <= dot632_auc(app, star) + 1e-15);
            prop_assert!((0.0..=1.0).contains(&v));
            if r == 0.0 {
                prop_assert_eq!(v, dot632_auc(app, star));
            }
        }

        #[test]
        fn label_swap_mirrors_estimates(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..12).map(|i| rng.random::<f64>() + if i < 6 { 0.0 } else { 0.6 }).collect();
            let d = one_dim(&xs[..6], &xs[6..]);
            let t = DiscriminantTrainer::new(ClassifierKind::Lda);
            let ens = ReplicateEnsemble::build(&d, &t, &EnsembleOptions::new(20, seed)).unwrap();
            // Same replicates and models, class roles exchanged.
            let mut mirrored = ens.clone();
            mirrored.labels = ens.labels.iter().map(|c| c.other()).collect();
            let a = AucEstimateBundle::from_ensemble(&ens, true).unwrap();
            let b = AucEstimateBundle::from_ensemble(&mirrored, false).unwrap();
            prop_assert!((a.apparent_auc + b.apparent_auc - 1.0).abs() < 1e-12);
            prop_assert!((a.sb_auc + b.sb_auc - 1.0).abs() < 1e-12);
            prop_assert!((a.auc_star + b.auc_star - 1.0).abs() < 1e-12);
            prop_assert!((a.dot632_auc - (0.368 * a.apparent_auc + 0.632 * a.auc_star)).abs() <= 1e-15);
        }
    }
}
