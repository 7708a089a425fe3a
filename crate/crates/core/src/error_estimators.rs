//! Error-rate estimators.
//!
//! All bootstrap estimators read the scores of a [`ReplicateEnsemble`] and use
//! the 0-1 loss at a fixed decision threshold.

use rayon::prelude::*;

use crate::classifiers::{ScoringRule, Trainer};
use crate::dataset::{Class, LabeledDataset};
use crate::ensemble::ReplicateEnsemble;
use crate::error::{invalid, Error, Result};
use crate::metrics::{error_rate, predicts_class1, zero_one_loss, CostModel, ScoreSet};
use crate::resampling::cv_folds;
use crate::{W_APPARENT, W_OUT_OF_BAG};

fn loss(label: Class, score: f64, threshold: f64) -> f64 {
    zero_one_loss(label.is_one(), score, threshold)
}

/// Training-set risk of `model` under `costs`.
pub fn apparent_error<M: ScoringRule>(
    model: &M,
    data: &LabeledDataset,
    threshold: f64,
    costs: &CostModel,
) -> Result<f64> {
    let s = ScoreSet::new(
        model.score_rows(data, data.class_indices(Class::One)),
        model.score_rows(data, data.class_indices(Class::Two)),
    )?;
    error_rate(&s, threshold, costs)
}

/// Mean 0-1 loss of the given scores.
pub fn mean_loss(labels: &[Class], scores: &[f64], threshold: f64) -> f64 {
    labels
        .iter()
        .zip(scores)
        .map(|(&c, &s)| loss(c, s, threshold))
        .sum::<f64>()
        / labels.len() as f64
}

/// Outcome of leave-one-out cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct LoocvOutcome {
    /// Mean loss over the cases whose leave-one-out model trained.
    pub value: f64,
    /// Cases skipped because the reduced data could not be trained.
    pub skipped: Vec<(usize, Error)>,
}

pub fn loocv_error<T: Trainer>(
    data: &LabeledDataset,
    trainer: &T,
    threshold: f64,
) -> Result<LoocvOutcome> {
    let n = data.n();
    let per_case: Vec<std::result::Result<f64, Error>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rows: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let model = trainer.fit(data, &rows)?;
            Ok(loss(data.label(i), model.score(data.row(i)), threshold))
        })
        .collect();
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for (i, r) in per_case.into_iter().enumerate() {
        match r {
            Ok(l) => {
                total += l;
                used += 1;
            }
            Err(e) => skipped.push((i, e)),
        }
    }
    if used == 0 {
        return Err(invalid("no leave-one-out subset could be trained"));
    }
    Ok(LoocvOutcome {
        value: total / used as f64,
        skipped,
    })
}

/// Stratified k-fold cross-validation error.
pub fn kfold_cv_error<T: Trainer, R: rand::Rng + ?Sized>(
    data: &LabeledDataset,
    trainer: &T,
    k: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<f64> {
    let plan = cv_folds(data, k, rng)?;
    let mut total = 0.0;
    for f in 0..k {
        let model = trainer.fit(data, &plan.training_rows(f))?;
        for i in plan.fold(f) {
            total += loss(data.label(i), model.score(data.row(i)), threshold);
        }
    }
    Ok(total / data.n() as f64)
}

/// Average over replicates of the replicate model's loss on the full data.
pub fn simple_bootstrap_error(ens: &ReplicateEnsemble, threshold: f64) -> f64 {
    let b = ens.bootstraps() as f64;
    ens.scores
        .iter()
        .map(|s| mean_loss(&ens.labels, s, threshold))
        .sum::<f64>()
        / b
}

/// Per-case averages of the loss over the replicates excluding that case.
/// Cases no replicate excludes use their conditioned supplements.
pub fn loob_case_terms(ens: &ReplicateEnsemble, threshold: f64) -> Result<Vec<f64>> {
    let n = ens.n();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (rep, scores) in ens.replicates.iter().zip(&ens.scores) {
        for i in rep.excluded() {
            sums[i] += loss(ens.labels[i], scores[i], threshold);
            counts[i] += 1;
        }
    }
    for sup in &ens.case_supplements {
        if counts[sup.case] == 0 || ens.exclusion_count(sup.case) == 0 {
            sums[sup.case] += loss(ens.labels[sup.case], sup.score, threshold);
            counts[sup.case] += 1;
        }
    }
    (0..n)
        .map(|i| {
            if counts[i] == 0 {
                Err(invalid(format!(
                    "case {i} is excluded by no replicate and has no supplement"
                )))
            } else {
                Ok(sums[i] / counts[i] as f64)
            }
        })
        .collect()
}

/// Leave-one-out bootstrap: mean of the per-case out-of-bag losses.
pub fn loob_error(ens: &ReplicateEnsemble, threshold: f64) -> Result<f64> {
    let terms = loob_case_terms(ens, threshold)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Replicate-major out-of-bag error and the number of replicates dropped for
/// excluding no case.
pub fn err_star(ens: &ReplicateEnsemble, threshold: f64) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut used = 0usize;
    for (rep, scores) in ens.replicates.iter().zip(&ens.scores) {
        let mut sum = 0.0;
        let mut m = 0usize;
        for i in rep.excluded() {
            sum += loss(ens.labels[i], scores[i], threshold);
            m += 1;
        }
        if m > 0 {
            total += sum / m as f64;
            used += 1;
        }
    }
    let dropped = ens.bootstraps() - used;
    if used == 0 {
        return Err(Error::NoUsableReplicates { dropped });
    }
    Ok((total / used as f64, dropped))
}

/// Apparent error plus the mean optimism of the replicate models.
pub fn refined_bootstrap_error(ens: &ReplicateEnsemble, threshold: f64) -> f64 {
    let apparent = mean_loss(&ens.labels, &ens.apparent_scores, threshold);
    let b = ens.bootstraps() as f64;
    let optimism: f64 = ens
        .replicates
        .iter()
        .zip(&ens.scores)
        .map(|(rep, scores)| {
            let on_full = mean_loss(&ens.labels, scores, threshold);
            let on_own = rep
                .rows
                .iter()
                .map(|&r| loss(ens.labels[r], scores[r], threshold))
                .sum::<f64>()
                / rep.rows.len() as f64;
            on_full - on_own
        })
        .sum::<f64>()
        / b;
    apparent + optimism
}

/// No-information error rate from the class-1 label share `p1` and the
/// share `q1` of cases classified as class 1.
pub fn gamma_hat_from_shares(p1: f64, q1: f64) -> f64 {
    p1 * (1.0 - q1) + (1.0 - p1) * q1
}

/// No-information error rate of a rule producing `scores` on cases with
/// `labels`.
pub fn gamma_hat(labels: &[Class], scores: &[f64], threshold: f64) -> f64 {
    let n = labels.len() as f64;
    let p1 = labels.iter().filter(|c| c.is_one()).count() as f64 / n;
    let q1 = scores
        .iter()
        .filter(|&&s| predicts_class1(s, threshold))
        .count() as f64
        / n;
    gamma_hat_from_shares(p1, q1)
}

pub fn dot632_error(apparent: f64, loob: f64) -> f64 {
    W_APPARENT * apparent + W_OUT_OF_BAG * loob
}

/// Relative overfitting rate, clamped to [0, 1]. Zero unless both the
/// out-of-bag error and the no-information rate exceed the apparent error.
pub fn relative_overfitting_rate(apparent: f64, loob: f64, gamma: f64) -> f64 {
    if gamma > apparent && loob > apparent {
        ((loob.min(gamma) - apparent) / (gamma - apparent)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// .632+ estimate and the overfitting rate it used.
pub fn dot632plus_error(apparent: f64, loob: f64, gamma: f64) -> (f64, f64) {
    let r = relative_overfitting_rate(apparent, loob, gamma);
    let capped = loob.min(gamma);
    let value = dot632_error(apparent, loob)
        + (capped - apparent) * W_APPARENT * W_OUT_OF_BAG * r / (1.0 - W_APPARENT * r);
    (value, r)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrDiagnostics {
    /// Replicates without excluded cases, left out of Err(*).
    pub dropped_replicates: usize,
    /// Cases whose out-of-bag term came from conditioned supplements.
    pub supplemented_cases: usize,
    /// Cases left out of LOOCV because their reduced data did not train.
    pub loocv_skipped: usize,
    pub redraws: usize,
}

/// All error estimates for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrEstimateBundle {
    pub apparent: f64,
    /// `None` when LOOCV was not requested.
    pub loocv: Option<f64>,
    pub simple_boot: f64,
    pub loob: f64,
    pub err_star: f64,
    pub refined: f64,
    pub dot632: f64,
    pub dot632plus: f64,
    pub gamma_hat: f64,
    pub r_hat_prime: f64,
    pub bootstraps: usize,
    pub diagnostics: ErrDiagnostics,
}

impl ErrEstimateBundle {
    /// Computes every bootstrap estimator from `ens`; LOOCV is added when
    /// `loocv` is given.
    pub fn from_ensemble(
        ens: &ReplicateEnsemble,
        threshold: f64,
        loocv: Option<&LoocvOutcome>,
    ) -> Result<Self> {
        let apparent = mean_loss(&ens.labels, &ens.apparent_scores, threshold);
        let loob = loob_error(ens, threshold)?;
        let (star, dropped) = err_star(ens, threshold)?;
        let gamma = gamma_hat(&ens.labels, &ens.apparent_scores, threshold);
        let (plus, r) = dot632plus_error(apparent, loob, gamma);
        let supplemented = (0..ens.n())
            .filter(|&i| ens.exclusion_count(i) == 0)
            .count();
        Ok(Self {
            apparent,
            loocv: loocv.map(|o| o.value),
            simple_boot: simple_bootstrap_error(ens, threshold),
            loob,
            err_star: star,
            refined: refined_bootstrap_error(ens, threshold),
            dot632: dot632_error(apparent, loob),
            dot632plus: plus,
            gamma_hat: gamma,
            r_hat_prime: r,
            bootstraps: ens.bootstraps(),
            diagnostics: ErrDiagnostics {
                dropped_replicates: dropped,
                supplemented_cases: supplemented,
                loocv_skipped: loocv.map_or(0, |o| o.skipped.len()),
                redraws: ens.redraws,
            },
        })
    }

    /// `(name, value)` for every estimate that was computed.
    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("apparent", self.apparent)];
        if let Some(l) = self.loocv {
            v.push(("loocv", l));
        }
        v.extend([
            ("simple_boot", self.simple_boot),
            ("loob", self.loob),
            ("err_star", self.err_star),
            ("refined", self.refined),
            ("dot632", self.dot632),
            ("dot632plus", self.dot632plus),
        ]);
        v
    }
}
