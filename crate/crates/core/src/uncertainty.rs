//! Bias and standard-error estimates for statistics of a sample, and the
//! influence-function variance of the leave-one-out bootstrap error.
//!
//! A statistic is evaluated on a list of cases together with probability
//! masses over them. Plain samples use uniform masses `1/n`; influence
//! values come from perturbing one case's mass.

use rand::Rng;
use rayon::prelude::*;

use crate::classifiers::Trainer;
use crate::dataset::LabeledDataset;
use crate::ensemble::{EnsembleOptions, ReplicateEnsemble};
use crate::error::{invalid, Error, Result};
use crate::error_estimators::loob_case_terms;
use crate::metrics::zero_one_loss;
use crate::resampling::Scheme;
use crate::rng::stream;

/// Real-valued statistic of a weighted sample. `weights` has one entry per
/// case and sums to 1.
pub trait Statistic<T>: Sync {
    fn evaluate(&self, data: &[T], weights: &[f64]) -> f64;
}

impl<T, F> Statistic<T> for F
where
    F: Fn(&[T], &[f64]) -> f64 + Sync,
{
    fn evaluate(&self, data: &[T], weights: &[f64]) -> f64 {
        self(data, weights)
    }
}

/// Weighted mean of real values.
pub fn weighted_mean(data: &[f64], weights: &[f64]) -> f64 {
    data.iter().zip(weights).map(|(x, w)| x * w).sum()
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Masses after moving `epsilon` of the total mass onto case `i`.
pub fn perturbed_masses(n: usize, i: usize, epsilon: f64) -> Vec<f64> {
    let base = (1.0 - epsilon) / n as f64;
    let mut w = vec![base; n];
    w[i] += epsilon;
    w
}

/// Perturbation that removes case `i` entirely (mass zero), turning the
/// perturbed statistic into the jackknife deletion value.
pub fn deletion_epsilon(n: usize) -> f64 {
    -1.0 / (n as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSe {
    pub bias: f64,
    pub se: f64,
}

fn evaluate_uniform<T, S: Statistic<T> + ?Sized>(stat: &S, data: &[T]) -> f64 {
    stat.evaluate(data, &uniform_weights(data.len()))
}

/// Bootstrap bias and standard error (SE with a `B − 1` denominator).
pub fn bootstrap_bias_se<T: Clone, S: Statistic<T> + ?Sized, R: Rng + ?Sized>(
    stat: &S,
    data: &[T],
    bootstraps: usize,
    rng: &mut R,
) -> Result<BiasSe> {
    let n = data.len();
    if n == 0 || bootstraps < 2 {
        return Err(invalid("bootstrap SE needs a nonempty sample and B ≥ 2"));
    }
    let theta = evaluate_uniform(stat, data);
    let mut replicates = Vec::with_capacity(bootstraps);
    let mut sample = Vec::with_capacity(n);
    for _ in 0..bootstraps {
        sample.clear();
        sample.extend((0..n).map(|_| data[rng.random_range(0..n)].clone()));
        replicates.push(evaluate_uniform(stat, &sample));
    }
    // Centering on θ̂ first keeps a constant statistic exactly at zero.
    let bias = replicates.iter().map(|v| v - theta).sum::<f64>() / bootstraps as f64;
    let var = replicates
        .iter()
        .map(|v| (v - theta - bias).powi(2))
        .sum::<f64>()
        / (bootstraps as f64 - 1.0);
    Ok(BiasSe {
        bias,
        se: var.sqrt(),
    })
}

/// Jackknife deletion values, one per case.
pub fn jackknife_values<T: Clone, S: Statistic<T> + ?Sized>(
    stat: &S,
    data: &[T],
) -> Result<Vec<f64>> {
    let n = data.len();
    if n < 2 {
        return Err(invalid(format!("jackknife needs n ≥ 2 (got {n})")));
    }
    Ok((0..n)
        .map(|i| {
            let reduced: Vec<T> = data
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| x.clone())
                .collect();
            evaluate_uniform(stat, &reduced)
        })
        .collect())
}

/// Jackknife bias `(n−1)(θ̄₍·₎ − θ̂)` and SE `√((n−1)/n · Σ(θ₍ᵢ₎ − θ̄₍·₎)²)`.
pub fn jackknife_bias_se<T: Clone, S: Statistic<T> + ?Sized>(
    stat: &S,
    data: &[T],
) -> Result<BiasSe> {
    let n = data.len() as f64;
    let values = jackknife_values(stat, data)?;
    let theta = evaluate_uniform(stat, data);
    let shift = values.iter().map(|v| v - theta).sum::<f64>() / n;
    let ss = values
        .iter()
        .map(|v| (v - theta - shift).powi(2))
        .sum::<f64>();
    Ok(BiasSe {
        bias: (n - 1.0) * shift,
        se: ((n - 1.0) / n * ss).sqrt(),
    })
}

/// Rejects statistics whose value changes when every case is duplicated.
pub fn check_functional<T: Clone, S: Statistic<T> + ?Sized>(stat: &S, data: &[T]) -> Result<()> {
    let original = evaluate_uniform(stat, data);
    let doubled: Vec<T> = data.iter().chain(data).cloned().collect();
    let duplicated = evaluate_uniform(stat, &doubled);
    if (original - duplicated).abs() <= 1e-9 * (1.0 + original.abs()) {
        Ok(())
    } else {
        Err(Error::NotFunctional {
            original,
            duplicated,
        })
    }
}

/// Step sizes for the numerical derivative, each half the previous one.
pub const DEFAULT_EPSILONS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Central differences at each step, combined by Richardson extrapolation.
fn richardson_derivative(f: impl Fn(f64) -> f64, steps: &[f64]) -> Result<f64> {
    if steps.is_empty() || steps.iter().any(|h| h.is_nan() || *h <= 0.0) {
        return Err(invalid("derivative steps must be positive"));
    }
    if steps
        .windows(2)
        .any(|w| (w[1] * 2.0 - w[0]).abs() > 1e-12 * w[0])
    {
        return Err(invalid("derivative steps must halve successively"));
    }
    let mut table: Vec<f64> = steps.iter().map(|&h| (f(h) - f(-h)) / (2.0 * h)).collect();
    let mut factor = 4.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    Ok(table[0])
}

/// Derivative at zero of `eps ↦ stat(masses perturbed towards case i)`.
/// No functionality check.
pub fn perturbation_derivative(
    evaluate: impl Fn(&[f64]) -> f64,
    n: usize,
    i: usize,
    steps: &[f64],
) -> Result<f64> {
    if i >= n {
        return Err(invalid(format!("case {i} out of range for n={n}")));
    }
    richardson_derivative(|eps| evaluate(&perturbed_masses(n, i, eps)), steps)
}

/// Per-case influence values with their variance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceReport {
    pub values: Vec<f64>,
    /// `Σ U_i² / n²`.
    pub variance: f64,
    /// Mean of the influence values; near zero for smooth statistics.
    pub residual_mean: f64,
}

impl InfluenceReport {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        Self {
            variance: if_variance(&values),
            residual_mean: values.iter().sum::<f64>() / n,
            values,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `(1/n²) Σ U_i²`.
pub fn if_variance(influence: &[f64]) -> f64 {
    let n = influence.len() as f64;
    influence.iter().map(|u| u * u).sum::<f64>() / (n * n)
}

/// Empirical influence of case `i`.
pub fn empirical_influence<T: Clone, S: Statistic<T> + ?Sized>(
    stat: &S,
    data: &[T],
    i: usize,
    steps: &[f64],
) -> Result<f64> {
    check_functional(stat, data)?;
    perturbation_derivative(|w| stat.evaluate(data, w), data.len(), i, steps)
}

/// Empirical influence of every case.
pub fn empirical_influences<T: Clone + Sync, S: Statistic<T> + ?Sized>(
    stat: &S,
    data: &[T],
    steps: &[f64],
) -> Result<InfluenceReport> {
    check_functional(stat, data)?;
    let n = data.len();
    let values = (0..n)
        .into_par_iter()
        .map(|i| perturbation_derivative(|w| stat.evaluate(data, w), n, i, steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(InfluenceReport::from_values(values))
}

/// Influence-function variance of a functional statistic.
pub fn if_variance_of<T: Clone + Sync, S: Statistic<T> + ?Sized>(
    stat: &S,
    data: &[T],
    steps: &[f64],
) -> Result<f64> {
    Ok(empirical_influences(stat, data, steps)?.variance)
}

fn loss_matrix(ens: &ReplicateEnsemble, threshold: f64) -> Vec<Vec<f64>> {
    ens.scores
        .iter()
        .map(|s| {
            ens.labels
                .iter()
                .zip(s)
                .map(|(c, &v)| zero_one_loss(c.is_one(), v, threshold))
                .collect()
        })
        .collect()
}

/// Closed-form influence values of the leave-one-out bootstrap error:
///
/// `U_i = (2 + 1/(n−1))(Ê_i − LOOB) + n Σ_b (N_i^b − N̄_i) l^b / Σ_b I_i^b`,
///
/// with `Ê_i` the per-case out-of-bag loss, `l^b = (1/n) Σ_j I_j^b L_j^b`
/// and `N̄_i` the mean inclusion count. Derived for the ordinary bootstrap.
/// A case no replicate excludes gets no covariance term.
pub fn loob_influence(ens: &ReplicateEnsemble, threshold: f64) -> Result<InfluenceReport> {
    let n = ens.n();
    if n < 2 {
        return Err(invalid("need at least two cases"));
    }
    let nf = n as f64;
    let terms = loob_case_terms(ens, threshold)?;
    let loob = terms.iter().sum::<f64>() / nf;
    let losses = loss_matrix(ens, threshold);
    let l_dot: Vec<f64> = ens
        .replicates
        .iter()
        .zip(&losses)
        .map(|(rep, l)| rep.excluded().map(|j| l[j]).sum::<f64>() / nf)
        .collect();
    let b = ens.bootstraps() as f64;
    let factor = 2.0 + 1.0 / (nf - 1.0);
    let values = (0..n)
        .map(|i| {
            let n_bar = ens
                .replicates
                .iter()
                .map(|r| r.counts[i] as f64)
                .sum::<f64>()
                / b;
            let excluded = ens.exclusion_count(i);
            let cov = if excluded == 0 {
                0.0
            } else {
                let s: f64 = ens
                    .replicates
                    .iter()
                    .zip(&l_dot)
                    .map(|(r, &l)| (r.counts[i] as f64 - n_bar) * l)
                    .sum();
                nf * s / excluded as f64
            };
            factor * (terms[i] - loob) + cov
        })
        .collect();
    Ok(InfluenceReport::from_values(values))
}

/// Influence-function variance of the LOOB error from a fresh ordinary
/// bootstrap ensemble of size `bootstraps`.
pub fn if_variance_loob_error<T: Trainer>(
    data: &LabeledDataset,
    trainer: &T,
    bootstraps: usize,
    seed: u64,
    threshold: f64,
) -> Result<InfluenceReport> {
    let opts = EnsembleOptions::new(
        bootstraps,
        crate::rng::derive_seed(seed, stream::INFLUENCE_BOOTSTRAP),
    )
    .scheme(Scheme::Ordinary)
    .without_pairs();
    let ens = ReplicateEnsemble::build(data, trainer, &opts)?;
    loob_influence(&ens, threshold)
}

/// The LOOB error as a function of case masses over a fixed replicate set:
/// replicate `b` is reweighted by `Π_k (n w_k)^{N_k^b}`, its probability
/// under the masses relative to uniform ones.
pub struct WeightedLoob {
    counts: Vec<Vec<u32>>,
    losses: Vec<Vec<f64>>,
}

impl WeightedLoob {
    pub fn new(ens: &ReplicateEnsemble, threshold: f64) -> Self {
        Self {
            counts: ens.replicates.iter().map(|r| r.counts.clone()).collect(),
            losses: loss_matrix(ens, threshold),
        }
    }

    pub fn n(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn evaluate(&self, weights: &[f64]) -> f64 {
        let n = self.n();
        let nf = n as f64;
        let pi: Vec<f64> = self
            .counts
            .iter()
            .map(|c| {
                c.iter()
                    .zip(weights)
                    .map(|(&k, &w)| (nf * w).powi(k as i32))
                    .product()
            })
            .collect();
        (0..n)
            .map(|j| {
                let mut num = 0.0;
                let mut den = 0.0;
                for ((c, l), &p) in self.counts.iter().zip(&self.losses).zip(&pi) {
                    if c[j] == 0 {
                        num += p * l[j];
                        den += p;
                    }
                }
                if den == 0.0 {
                    0.0
                } else {
                    weights[j] * num / den
                }
            })
            .sum()
    }

    /// Numerical influence values of this functional.
    pub fn influences(&self, steps: &[f64]) -> Result<InfluenceReport> {
        let n = self.n();
        let values = (0..n)
            .into_par_iter()
            .map(|i| perturbation_derivative(|w| self.evaluate(w), n, i, steps))
            .collect::<Result<Vec<_>>>()?;
        Ok(InfluenceReport::from_values(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(2.0, 1.5).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn biased_variance(x: &[f64], w: &[f64]) -> f64 {
        let m = weighted_mean(x, w);
        x.iter().zip(w).map(|(v, wi)| wi * (v - m).powi(2)).sum()
    }

    fn unbiased_variance(x: &[f64], w: &[f64]) -> f64 {
        let n = x.len() as f64;
        biased_variance(x, w) * n / (n - 1.0)
    }

    #[test]
    fn bootstrap_mean_bias_and_se() {
        let x = sample(40, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = bootstrap_bias_se(&weighted_mean, &x, 2000, &mut rng).unwrap();
        let sd = biased_variance(&x, &uniform_weights(40)).sqrt();
        assert!(
            r.bias.abs() < 3.0 * sd / 40f64.sqrt() / 2000f64.sqrt() * 2.0 + 1e-3,
            "{r:?}"
        );
        let classical = (unbiased_variance(&x, &uniform_weights(40)) / 40.0).sqrt();
        assert!(
            (r.se / classical - 1.0).abs() < 0.1,
            "{} vs {}",
            r.se,
            classical
        );
    }

    #[test]
    fn constant_statistic_has_no_bias_or_spread() {
        let x = sample(10, 3);
        let c = |_: &[f64], _: &[f64]| 4.2;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            bootstrap_bias_se(&c, &x, 50, &mut rng).unwrap(),
            BiasSe { bias: 0.0, se: 0.0 }
        );
        assert_eq!(
            jackknife_bias_se(&c, &x).unwrap(),
            BiasSe { bias: 0.0, se: 0.0 }
        );
        assert_eq!(if_variance_of(&c, &x, &DEFAULT_EPSILONS).unwrap(), 0.0);
    }

    #[test]
    fn jackknife_mean_and_variance() {
        let x = sample(25, 4);
        let r = jackknife_bias_se(&weighted_mean, &x).unwrap();
        assert!(r.bias.abs() < 1e-12);
        // Jackknife SE of the mean is exactly s/√n (unbiased s).
        let s = unbiased_variance(&x, &uniform_weights(25)).sqrt();
        assert!((r.se - s / 5.0).abs() < 1e-12);
        // Biased variance: jackknife bias equals −s²/n exactly.
        let r = jackknife_bias_se(&biased_variance, &x).unwrap();
        assert!((r.bias + s * s / 25.0).abs() < 1e-10, "{}", r.bias);
    }

    #[test]
    fn functionality_gate() {
        let x = sample(12, 5);
        assert!(check_functional(&biased_variance, &x).is_ok());
        assert!(matches!(
            check_functional(&unbiased_variance, &x),
            Err(Error::NotFunctional { .. })
        ));
        assert!(empirical_influence(&unbiased_variance, &x, 0, &DEFAULT_EPSILONS).is_err());
        // The median is functional even though it is not smooth.
        let median = |x: &[f64], w: &[f64]| {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
            let mut acc = 0.0;
            for &i in &idx {
                acc += w[i];
                if acc >= 0.5 - 1e-12 {
                    return x[i];
                }
            }
            x[idx[idx.len() - 1]]
        };
        assert!(check_functional(&median, &x).is_ok());
    }

    #[test]
    fn mean_influence_is_centered_value() {
        let x = sample(30, 6);
        let xbar = x.iter().sum::<f64>() / 30.0;
        let report = empirical_influences(&weighted_mean, &x, &DEFAULT_EPSILONS).unwrap();
        for (u, v) in report.values.iter().zip(&x) {
            assert!((u - (v - xbar)).abs() < 1e-8);
        }
        assert!(report.residual_mean.abs() < 1e-8);
        let biased = biased_variance(&x, &uniform_weights(30));
        assert!((report.variance - biased / 30.0).abs() < 1e-8);
    }

    #[test]
    fn deletion_epsilon_reproduces_jackknife() {
        let x = sample(15, 7);
        let jack = jackknife_values(&biased_variance, &x).unwrap();
        let eps = deletion_epsilon(15);
        for i in 0..15 {
            let w = perturbed_masses(15, i, eps);
            assert!(w[i].abs() < 1e-16);
            assert!((biased_variance(&x, &w) - jack[i]).abs() < 1e-12);
        }
        // The step −1/(n+1) leaves mass 2/(n(n+1)) on the case.
        let w = perturbed_masses(15, 0, -1.0 / 16.0);
        assert!((w[0] - 2.0 / (15.0 * 16.0)).abs() < 1e-15);
    }

    #[test]
    fn trimmed_mean_influence_sums_to_zero() {
        let x = sample(20, 8);
        // Smooth trimmed mean: Gaussian downweighting of values far from the mean.
        let stat = |x: &[f64], w: &[f64]| {
            let m = weighted_mean(x, w);
            let k: Vec<f64> = x.iter().map(|v| (-(v - m).powi(2) / 8.0).exp()).collect();
            let num: f64 = x
                .iter()
                .zip(w)
                .zip(&k)
                .map(|((v, wi), ki)| v * wi * ki)
                .sum();
            let den: f64 = w.iter().zip(&k).map(|(wi, ki)| wi * ki).sum();
            num / den
        };
        let r = empirical_influences(&stat, &x, &DEFAULT_EPSILONS).unwrap();
        assert!(r.residual_mean.abs() < 1e-8, "{}", r.residual_mean);
    }

    #[test]
    fn if_variance_matches_bootstrap_for_mean() {
        let x = sample(50, 9);
        let ifv = if_variance_of(&weighted_mean, &x, &DEFAULT_EPSILONS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let boot = bootstrap_bias_se(&weighted_mean, &x, 4000, &mut rng).unwrap();
        assert!(
            (ifv / boot.se.powi(2) - 1.0).abs() < 0.15,
            "{ifv} vs {}",
            boot.se.powi(2)
        );
    }

    #[test]
    fn jackknife_and_bootstrap_se_linkage() {
        let x = sample(30, 11);
        let jack = jackknife_bias_se(&weighted_mean, &x).unwrap().se;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let boot = bootstrap_bias_se(&weighted_mean, &x, 2000, &mut rng)
            .unwrap()
            .se;
        let ratio = jack / boot;
        let expected = (30.0f64 / 29.0).sqrt();
        assert!(
            (ratio / expected - 1.0).abs() < 0.05,
            "{ratio} vs {expected}"
        );
    }

    #[test]
    fn richardson_is_exact_for_quintics() {
        let d = richardson_derivative(
            |e| 1.0 + 2.0 * e + 3.0 * e.powi(3) + 5.0 * e.powi(5),
            &DEFAULT_EPSILONS,
        )
        .unwrap();
        assert!((d - 2.0).abs() < 1e-10);
        assert!(richardson_derivative(|e| e, &[1e-2, 4e-3]).is_err());
    }

    proptest! {
        #[test]
        fn if_variance_ignores_case_order(seed in any::<u64>()) {
            let x = sample(12, seed);
            let mut y = x.clone();
            y.reverse();
            let a = if_variance_of(&biased_variance, &x, &DEFAULT_EPSILONS).unwrap();
            let b = if_variance_of(&biased_variance, &y, &DEFAULT_EPSILONS).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
            prop_assert!(a >= 0.0);
        }
    }
}
