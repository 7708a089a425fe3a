//! Perturbation sweeps: how estimators respond when one case's probability
//! mass or one of its features changes.
//!
//! Replicate index patterns stay frozen across a sweep, so every change in
//! a curve comes from the swept quantity and none from resampling.

use rayon::prelude::*;

use crate::classifiers::{ClassifierKind, DiscriminantTrainer, ScoringRule, Trainer};
use crate::dataset::{Class, LabeledDataset};
use crate::ensemble::{score_all, EnsembleOptions, ReplicateEnsemble};
use crate::error::{invalid, Error, Result};
use crate::metrics::{mann_whitney, psi, zero_one_loss};
use crate::resampling::{BootstrapReplicate, Scheme};
use crate::table::{fmt_f64, CsvTable};
use crate::{auc_estimators, error_estimators};

pub const DEFAULT_GRID_POINTS: usize = 50;
/// Half-width of the default feature grid in standard deviations.
pub const DEFAULT_GRID_SPAN: f64 = 3.0;

/// Column names of a feature sweep, in output order.
pub const FEATURE_SWEEP_COLUMNS: [&str; 6] = [
    "single_component",
    "err_star",
    "loob",
    "single_component_auc",
    "auc_star",
    "lpob",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptQuantity {
    Mass,
    Feature { coordinate: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSweep {
    pub case: usize,
    pub quantity: SweptQuantity,
    pub grid: Vec<f64>,
    pub curves: Vec<Curve>,
    /// Replicate behind the single-replicate component curves.
    pub component_replicate: usize,
}

impl PerturbationSweep {
    fn new(
        case: usize,
        quantity: SweptQuantity,
        grid: Vec<f64>,
        curves: Vec<Curve>,
        component_replicate: usize,
    ) -> Result<Self> {
        for c in &curves {
            if c.values.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    got: c.values.len(),
                });
            }
            if let Some(k) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!(
                    "{} is not finite at grid point {k}",
                    c.name
                )));
            }
        }
        Ok(Self {
            case,
            quantity,
            grid,
            curves,
            component_replicate,
        })
    }

    pub fn curve(&self, name: &str) -> Option<&[f64]> {
        self.curves
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    /// One row per grid point: `grid_value` then one column per curve.
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            std::iter::once("grid_value".to_string())
                .chain(self.curves.iter().map(|c| c.name.clone())),
        );
        for (k, &g) in self.grid.iter().enumerate() {
            let row = std::iter::once(g).chain(self.curves.iter().map(|c| c.values[k]));
            t.rows.push(row.map(fmt_f64).collect());
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessMetric {
    pub max_jump: f64,
    /// Adjacent-point jumps strictly larger than the threshold.
    pub jumps_above: usize,
}

pub fn smoothness_metric(values: &[f64], threshold: f64) -> SmoothnessMetric {
    let mut max_jump = 0.0f64;
    let mut jumps_above = 0;
    for w in values.windows(2) {
        let jump = (w[1] - w[0]).abs();
        max_jump = max_jump.max(jump);
        if jump > threshold {
            jumps_above += 1;
        }
    }
    SmoothnessMetric {
        max_jump,
        jumps_above,
    }
}

/// Probability of one ordered draw of `n_k` cases that contains the
/// perturbed case `count` times, when that case carries mass
/// `(1-ε)/n_k + ε` and every other case `(1-ε)/n_k`.
///
/// For a two-class stratified draw multiply by `(1/n_other)^n_other`.
pub fn perturbed_bootstrap_weight(n_k: usize, count: u32, epsilon: f64) -> f64 {
    let nk = n_k as f64;
    (1.0 - epsilon).powi(n_k as i32)
        * boost(n_k, epsilon).powi(count as i32)
        * nk.powi(-(n_k as i32))
}

/// Per-appearance factor `1 + n_k ε/(1−ε)`, snapped to zero at the
/// deletion value where rounding would leave a tiny residue.
fn boost(n_k: usize, epsilon: f64) -> f64 {
    let b = 1.0 + n_k as f64 * epsilon / (1.0 - epsilon);
    if b.abs() < 1e-12 {
        0.0
    } else {
        b
    }
}

/// Number of cases the perturbed case competes with for mass: the class
/// size under a stratified scheme, `n` otherwise.
pub fn perturbation_pool(ens: &ReplicateEnsemble, case: usize) -> usize {
    match ens.scheme {
        Scheme::Stratified => ens
            .labels
            .iter()
            .filter(|&&c| c == ens.labels[case])
            .count(),
        Scheme::Ordinary => ens.n(),
    }
}

fn check_epsilon(epsilon: f64, pool: usize) -> Result<()> {
    let lower = -1.0 / (pool as f64 - 1.0);
    if !epsilon.is_finite() || epsilon >= 1.0 || epsilon < lower * (1.0 + 1e-12) {
        return Err(invalid(format!("epsilon {epsilon} outside [{lower}, 1)")));
    }
    Ok(())
}

/// Replicate weights after perturbing the mass of `case`, normalized to sum
/// to one. `ε = 0` gives equal weights; the deletion value `−1/(pool−1)`
/// gives zero weight to every replicate containing the case.
pub fn perturbed_replicate_weights(
    ens: &ReplicateEnsemble,
    case: usize,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let pool = perturbation_pool(ens, case);
    check_epsilon(epsilon, pool)?;
    let boost = boost(pool, epsilon);
    // The factors common to every replicate cancel in the normalization.
    let raw: Vec<f64> = ens
        .replicates
        .iter()
        .map(|r| boost.powi(r.counts[case] as i32))
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NoUsableReplicates {
            dropped: ens.bootstraps(),
        });
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Case masses after the perturbation, summing to one. Under a stratified
/// scheme only the perturbed case's class is reweighted and the class
/// shares stay fixed.
pub fn perturbed_case_masses(
    ens: &ReplicateEnsemble,
    case: usize,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let pool = perturbation_pool(ens, case);
    check_epsilon(epsilon, pool)?;
    let n = ens.n() as f64;
    let own = ens.labels[case];
    let mut w: Vec<f64> = ens
        .labels
        .iter()
        .map(|&c| {
            if ens.scheme == Scheme::Ordinary || c == own {
                (1.0 - epsilon) / n
            } else {
                1.0 / n
            }
        })
        .collect();
    w[case] += epsilon * pool as f64 / n;
    if w[case].abs() < 1e-15 {
        w[case] = 0.0;
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbedMetric {
    ErrStar,
    AucStar,
    Loob,
    Lpob,
}

/// An estimator evaluated under a mass perturbation of `case`: replicates
/// are reweighted by their perturbed probability and test cases by their
/// perturbed masses. At `ε = 0` this reproduces the plain estimator.
pub fn perturbed_estimator_value(
    ens: &ReplicateEnsemble,
    case: usize,
    epsilon: f64,
    metric: PerturbedMetric,
    threshold: f64,
) -> Result<f64> {
    if case >= ens.n() {
        return Err(invalid(format!("case {case} out of range")));
    }
    let g = perturbed_replicate_weights(ens, case, epsilon)?;
    let w = perturbed_case_masses(ens, case, epsilon)?;
    match metric {
        PerturbedMetric::ErrStar => {
            replicate_major(ens, &g, |b| replicate_error(ens, b, &w, threshold))
        }
        PerturbedMetric::AucStar => replicate_major(ens, &g, |b| replicate_auc(ens, b, &w)),
        PerturbedMetric::Loob => Ok(weighted_loob(ens, &g, &w, threshold)),
        PerturbedMetric::Lpob => weighted_lpob(ens, &g, &w),
    }
}

fn loss(ens: &ReplicateEnsemble, b: usize, j: usize, threshold: f64) -> f64 {
    zero_one_loss(ens.labels[j].is_one(), ens.scores[b][j], threshold)
}

fn replicate_major(
    ens: &ReplicateEnsemble,
    g: &[f64],
    value: impl Fn(usize) -> Option<f64>,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0;
    for (b, &gb) in g.iter().enumerate() {
        if let Some(v) = value(b) {
            num += gb * v;
            den += gb;
            used += 1;
        }
    }
    if used == 0 || den <= 0.0 {
        return Err(Error::NoUsableReplicates {
            dropped: ens.bootstraps() - used,
        });
    }
    Ok(num / den)
}

/// Mass-weighted error of replicate `b` on its excluded cases.
fn replicate_error(ens: &ReplicateEnsemble, b: usize, w: &[f64], threshold: f64) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in ens.replicates[b].excluded() {
        num += w[j] * loss(ens, b, j, threshold);
        den += w[j];
    }
    (den > 0.0).then(|| num / den)
}

/// Mass-weighted Mann-Whitney AUC of replicate `b` on its excluded cases.
fn replicate_auc(ens: &ReplicateEnsemble, b: usize, w: &[f64]) -> Option<f64> {
    let (e1, e2): (Vec<usize>, Vec<usize>) = ens.replicates[b]
        .excluded()
        .partition(|&j| ens.labels[j].is_one());
    let w1: f64 = e1.iter().map(|&a| w[a]).sum();
    let w2: f64 = e2.iter().map(|&c| w[c]).sum();
    if w1 <= 0.0 || w2 <= 0.0 {
        return None;
    }
    let s = &ens.scores[b];
    let mut num = 0.0;
    for &a in &e1 {
        for &c in &e2 {
            num += w[a] * w[c] * psi(s[a], s[c]);
        }
    }
    Some(num / (w1 * w2))
}

fn weighted_loob(ens: &ReplicateEnsemble, g: &[f64], w: &[f64], threshold: f64) -> f64 {
    let mut num = vec![0.0; ens.n()];
    let mut den = vec![0.0; ens.n()];
    for (b, rep) in ens.replicates.iter().enumerate() {
        for j in rep.excluded() {
            num[j] += g[b] * loss(ens, b, j, threshold);
            den[j] += g[b];
        }
    }
    for sup in &ens.case_supplements {
        if den[sup.case] == 0.0 {
            num[sup.case] = zero_one_loss(ens.labels[sup.case].is_one(), sup.score, threshold);
            den[sup.case] = 1.0;
        }
    }
    let mut total = 0.0;
    let mut mass = 0.0;
    for j in 0..ens.n() {
        if den[j] > 0.0 {
            total += w[j] * num[j] / den[j];
            mass += w[j];
        }
    }
    total / mass
}

fn weighted_lpob(ens: &ReplicateEnsemble, g: &[f64], w: &[f64]) -> Result<f64> {
    let c1 = ens.class_indices(Class::One);
    let c2 = ens.class_indices(Class::Two);
    let n2 = c2.len();
    let mut num = vec![0.0; c1.len() * n2];
    let mut den = vec![0.0; c1.len() * n2];
    for (b, rep) in ens.replicates.iter().enumerate() {
        let e1: Vec<usize> = (0..c1.len()).filter(|&a| rep.is_excluded(c1[a])).collect();
        let e2: Vec<usize> = (0..n2).filter(|&c| rep.is_excluded(c2[c])).collect();
        let s = &ens.scores[b];
        for &a in &e1 {
            for &c in &e2 {
                num[a * n2 + c] += g[b] * psi(s[c1[a]], s[c2[c]]);
                den[a * n2 + c] += g[b];
            }
        }
    }
    for sup in &ens.pair_supplements {
        let a = c1
            .binary_search(&sup.case1)
            .map_err(|_| invalid("pair supplement with a non-class-1 case"))?;
        let c = c2
            .binary_search(&sup.case2)
            .map_err(|_| invalid("pair supplement with a non-class-2 case"))?;
        if den[a * n2 + c] == 0.0 {
            num[a * n2 + c] = psi(sup.score1, sup.score2);
            den[a * n2 + c] = 1.0;
        }
    }
    let mut total = 0.0;
    let mut mass = 0.0;
    for (a, &i) in c1.iter().enumerate() {
        for (c, &j) in c2.iter().enumerate() {
            let k = a * n2 + c;
            if den[k] > 0.0 {
                total += w[i] * w[j] * num[k] / den[k];
                mass += w[i] * w[j];
            }
        }
    }
    if mass <= 0.0 {
        return Err(invalid(
            "no (class-1, class-2) pair is excluded by any replicate",
        ));
    }
    Ok(total / mass)
}

/// Mass sweep of `case` over the `epsilon` grid on a fixed ensemble.
pub fn mass_sweep(
    ens: &ReplicateEnsemble,
    case: usize,
    grid: &[f64],
    threshold: f64,
) -> Result<PerturbationSweep> {
    check_grid(grid)?;
    let component = component_replicate(ens, case)?;
    let rows: Vec<[f64; 6]> = grid
        .par_iter()
        .map(|&eps| {
            let g = perturbed_replicate_weights(ens, case, eps)?;
            let w = perturbed_case_masses(ens, case, eps)?;
            let single = replicate_error(ens, component, &w, threshold).unwrap_or(0.0);
            let single_auc = replicate_auc(ens, component, &w).unwrap_or(0.5);
            Ok([
                single,
                replicate_major(ens, &g, |b| replicate_error(ens, b, &w, threshold))?,
                weighted_loob(ens, &g, &w, threshold),
                single_auc,
                replicate_major(ens, &g, |b| replicate_auc(ens, b, &w))?,
                weighted_lpob(ens, &g, &w)?,
            ])
        })
        .collect::<Result<_>>()?;
    PerturbationSweep::new(
        case,
        SweptQuantity::Mass,
        grid.to_vec(),
        curves_from_rows(&rows),
        component,
    )
}

fn curves_from_rows(rows: &[[f64; 6]]) -> Vec<Curve> {
    FEATURE_SWEEP_COLUMNS
        .iter()
        .enumerate()
        .map(|(k, name)| Curve {
            name: name.to_string(),
            values: rows.iter().map(|r| r[k]).collect(),
        })
        .collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("empty sweep grid"));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("sweep grid value {v} is not finite")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("sweep grid must be strictly increasing"));
    }
    Ok(())
}

/// First replicate that excludes `case` together with at least one case of
/// each class, so both single-replicate curves are defined.
fn component_replicate(ens: &ReplicateEnsemble, case: usize) -> Result<usize> {
    ens.replicates
        .iter()
        .position(|r| {
            r.is_excluded(case)
                && r.excluded().any(|j| ens.labels[j].is_one())
                && r.excluded().any(|j| !ens.labels[j].is_one())
        })
        .ok_or_else(|| {
            invalid(format!(
                "no replicate excludes case {case} and cases of both classes"
            ))
        })
}

/// `points` values spanning the case's current coordinate value plus and
/// minus `span` sample standard deviations of that coordinate.
pub fn default_grid(
    data: &LabeledDataset,
    case: usize,
    coordinate: usize,
    points: usize,
    span: f64,
) -> Result<Vec<f64>> {
    if case >= data.n() || coordinate >= data.p() {
        return Err(invalid(format!(
            "case {case} / coordinate {coordinate} out of range"
        )));
    }
    if points < 2 {
        return Err(invalid("a grid needs at least two points"));
    }
    let col: Vec<f64> = (0..data.n()).map(|i| data.row(i)[coordinate]).collect();
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    let sd =
        (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() as f64 - 1.0)).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(invalid(format!("coordinate {coordinate} has no spread")));
    }
    let centre = data.row(case)[coordinate];
    let step = 2.0 * span * sd / (points - 1) as f64;
    Ok((0..points)
        .map(|k| centre - span * sd + k as f64 * step)
        .collect())
}

/// Moves feature `coordinate` of `case` along `grid` and re-evaluates the
/// estimators on a frozen set of replicates. Models of replicates that
/// exclude the case are trained once; the others are retrained at every
/// grid point.
pub fn feature_sweep<T: Trainer>(
    data: &LabeledDataset,
    trainer: &T,
    case: usize,
    coordinate: usize,
    grid: &[f64],
    opts: &EnsembleOptions,
    threshold: f64,
) -> Result<PerturbationSweep> {
    check_grid(grid)?;
    if case >= data.n() || coordinate >= data.p() {
        return Err(invalid(format!(
            "case {case} / coordinate {coordinate} out of range"
        )));
    }
    let base = ReplicateEnsemble::build(data, trainer, opts)?;
    let component = component_replicate(&base, case)?;
    let cached: Vec<Option<T::Model>> = base
        .replicates
        .par_iter()
        .map(|r| {
            if r.is_excluded(case) {
                trainer.fit(data, &r.rows).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let rows: Vec<[f64; 6]> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            sweep_point(
                data, trainer, &base, &cached, case, coordinate, v, opts, threshold, component,
            )
            .map_err(|e| invalid(format!("grid point {k} (value {v}): {e}")))
        })
        .collect::<Result<_>>()?;
    PerturbationSweep::new(
        case,
        SweptQuantity::Feature { coordinate },
        grid.to_vec(),
        curves_from_rows(&rows),
        component,
    )
}

#[allow(clippy::too_many_arguments)]
fn sweep_point<T: Trainer>(
    data: &LabeledDataset,
    trainer: &T,
    base: &ReplicateEnsemble,
    cached: &[Option<T::Model>],
    case: usize,
    coordinate: usize,
    value: f64,
    opts: &EnsembleOptions,
    threshold: f64,
    component: usize,
) -> Result<[f64; 6]> {
    let moved = data.with_feature(case, coordinate, value)?;
    let scores = base
        .replicates
        .iter()
        .zip(cached)
        .zip(&base.scores)
        .map(|((rep, model), old)| match model {
            Some(m) => {
                let mut s = old.clone();
                s[case] = m.score(moved.row(case));
                Ok(s)
            }
            None => trainer
                .fit(&moved, &rep.rows)
                .map(|m| score_all(&m, &moved)),
        })
        .collect::<Result<Vec<_>>>()?;
    let apparent = score_all(&trainer.fit_all(&moved)?, &moved);
    let mut ens = ReplicateEnsemble::assemble(
        &moved,
        base.scheme,
        base.replicates.clone(),
        scores,
        apparent,
    );
    ens.supplement(&moved, trainer, opts)?;

    let rep = &ens.replicates[component];
    let excluded: Vec<usize> = rep.excluded().collect();
    let single = excluded
        .iter()
        .map(|&j| loss(&ens, component, j, threshold))
        .sum::<f64>()
        / excluded.len() as f64;
    let (e1, e2): (Vec<usize>, Vec<usize>) =
        excluded.iter().partition(|&&j| ens.labels[j].is_one());
    let s = &ens.scores[component];
    let single_auc = mann_whitney(
        &e1.iter().map(|&j| s[j]).collect::<Vec<_>>(),
        &e2.iter().map(|&j| s[j]).collect::<Vec<_>>(),
    );
    Ok([
        single,
        error_estimators::err_star(&ens, threshold)?.0,
        error_estimators::loob_error(&ens, threshold)?,
        single_auc,
        auc_estimators::auc_star(&ens)?.0,
        auc_estimators::lpob_auc(&ens)?,
    ])
}

/// Linear decision surfaces `w·x + b = 0` of LDA trained on the full data
/// and on the first `count` replicates, for external plotting. Columns:
/// `model, bias, w1..wp`.
pub fn decision_surfaces(
    data: &LabeledDataset,
    replicates: &[BootstrapReplicate],
    count: usize,
) -> Result<CsvTable> {
    let trainer = DiscriminantTrainer::new(ClassifierKind::Lda);
    let mut header = vec!["model".to_string(), "bias".to_string()];
    header.extend((1..=data.p()).map(|k| format!("w{k}")));
    let mut t = CsvTable::new(header);
    let full = trainer.fit_all(data)?;
    let mut models = vec![("full".to_string(), full)];
    for (b, r) in replicates.iter().take(count).enumerate() {
        models.push((format!("replicate_{b}"), trainer.fit(data, &r.rows)?));
    }
    for (name, m) in models {
        let (w, bias) = m
            .linear_coefficients()
            .ok_or_else(|| invalid("decision surfaces need a linear rule"))?;
        let mut row = vec![name, fmt_f64(bias)];
        row.extend(w.iter().map(|&v| fmt_f64(v)));
        t.push(row)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::test_support::{one_dim, FixedRule};
    use crate::uncertainty::deletion_epsilon;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_feature(seed: u64, n: usize) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |shift: f64| -> Vec<f64> {
            (0..2)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + shift
                })
                .collect()
        };
        let r1: Vec<Vec<f64>> = (0..n).map(|_| draw(0.0)).collect();
        let r2: Vec<Vec<f64>> = (0..n).map(|_| draw(1.0)).collect();
        LabeledDataset::from_classes(&r1, &r2).unwrap()
    }

    fn lda() -> DiscriminantTrainer {
        DiscriminantTrainer::new(ClassifierKind::Lda)
    }

    #[test]
    fn metric_examples() {
        assert_eq!(
            smoothness_metric(&[0.3; 10], 0.0),
            SmoothnessMetric {
                max_jump: 0.0,
                jumps_above: 0
            }
        );
        let step = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(
            smoothness_metric(&step, 0.5),
            SmoothnessMetric {
                max_jump: 1.0,
                jumps_above: 1
            }
        );
        let ramp: Vec<f64> = (0..=20).map(|k| (k as f64 / 20.0).powi(2)).collect();
        // Convex ramp: the largest step is the last one, at most twice the average.
        let m = smoothness_metric(&ramp, 1.0);
        assert!(m.max_jump <= 2.0 * 1.0 / 20.0 + 1e-15);
        assert_eq!(m.jumps_above, 0);
    }

    #[test]
    fn literal_weight_reduces_to_draw_probability() {
        let n = 7;
        let p = perturbed_bootstrap_weight(n, 3, 0.0);
        assert!((p - (1.0 / n as f64).powi(n as i32)).abs() < 1e-20);
        // Deletion: zero for draws containing the case, and those that do
        // not are spread over the remaining n-1 cases.
        let eps = deletion_epsilon(n);
        assert_eq!(perturbed_bootstrap_weight(n, 1, eps), 0.0);
        let q = perturbed_bootstrap_weight(n, 0, eps);
        assert!((q - (1.0 / (n as f64 - 1.0)).powi(n as i32)).abs() < 1e-15 * q);
    }

    #[test]
    fn replicate_weights_normalize_and_delete() {
        let d = two_feature(1, 10);
        let ens = ReplicateEnsemble::build(&d, &lda(), &EnsembleOptions::new(50, 3)).unwrap();
        let g = perturbed_replicate_weights(&ens, 4, 0.0).unwrap();
        assert!(g.iter().all(|&w| (w - 1.0 / 50.0).abs() < 1e-15));
        let g = perturbed_replicate_weights(&ens, 4, 0.1).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let eps = deletion_epsilon(perturbation_pool(&ens, 4));
        let g = perturbed_replicate_weights(&ens, 4, eps).unwrap();
        for (r, &w) in ens.replicates.iter().zip(&g) {
            assert_eq!(w == 0.0, r.counts[4] > 0);
        }
        assert!(perturbed_replicate_weights(&ens, 4, eps * 1.01).is_err());
        let m = perturbed_case_masses(&ens, 4, eps).unwrap();
        assert!(m[4].abs() < 1e-15);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_perturbation_reproduces_estimators() {
        let d = two_feature(2, 12);
        for scheme in [Scheme::Stratified, Scheme::Ordinary] {
            let ens =
                ReplicateEnsemble::build(&d, &lda(), &EnsembleOptions::new(40, 9).scheme(scheme))
                    .unwrap();
            let th = 0.0;
            let want = [
                (
                    PerturbedMetric::ErrStar,
                    error_estimators::err_star(&ens, th).unwrap().0,
                ),
                (
                    PerturbedMetric::AucStar,
                    auc_estimators::auc_star(&ens).unwrap().0,
                ),
                (
                    PerturbedMetric::Loob,
                    error_estimators::loob_error(&ens, th).unwrap(),
                ),
                (
                    PerturbedMetric::Lpob,
                    auc_estimators::lpob_auc(&ens).unwrap(),
                ),
            ];
            for (metric, v) in want {
                let got = perturbed_estimator_value(&ens, 3, 0.0, metric, th).unwrap();
                assert!((got - v).abs() < 1e-12, "{metric:?}: {got} vs {v}");
            }
        }
    }

    #[test]
    fn loob_under_mass_perturbation_matches_weighted_functional() {
        let d = two_feature(5, 8);
        let opts = EnsembleOptions::new(60, 4).scheme(Scheme::Ordinary);
        let ens = ReplicateEnsemble::build(&d, &lda(), &opts).unwrap();
        let f = crate::uncertainty::WeightedLoob::new(&ens, 0.0);
        for eps in [-0.05, 0.02, 0.2] {
            let masses = crate::uncertainty::perturbed_masses(d.n(), 6, eps);
            let a = perturbed_estimator_value(&ens, 6, eps, PerturbedMetric::Loob, 0.0).unwrap();
            assert!((a - f.evaluate(&masses)).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_surface_gives_single_steps() {
        // Every replicate shares the surface x = 0.5, so moving a case across
        // it flips its loss in every replicate that tests it.
        let d = one_dim(&[0.0, 0.1, 0.2, 0.3], &[0.9, 1.0, 1.1, 1.2]);
        let t = FixedRule(|x| 0.5 - x);
        let grid: Vec<f64> = (0..20).map(|k| -0.45 + 0.1 * k as f64).collect();
        let s = feature_sweep(&d, &t, 0, 0, &grid, &EnsembleOptions::new(30, 2), 0.0).unwrap();
        let single = s.curve("single_component").unwrap();
        let m = s.replicates_excluded_count(&d, 30, 2);
        let jumps: Vec<f64> = single
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|j| *j != 0.0)
            .collect();
        assert_eq!(jumps.len(), 1);
        assert!((jumps[0] - 1.0 / m as f64).abs() < 1e-12);
        let loob = s.curve("loob").unwrap();
        assert_eq!(smoothness_metric(loob, 1e-12).jumps_above, 1);
        assert!((loob[19] - loob[0] - 1.0 / 8.0).abs() < 1e-12);
    }

    impl PerturbationSweep {
        fn replicates_excluded_count(&self, d: &LabeledDataset, b: usize, seed: u64) -> usize {
            let ens =
                ReplicateEnsemble::build(d, &FixedRule(|x| x), &EnsembleOptions::new(b, seed))
                    .unwrap();
            ens.replicates[self.component_replicate].n_excluded()
        }
    }

    #[test]
    fn far_from_every_surface_is_flat() {
        let d = one_dim(&[0.0, 0.1, 0.2, 0.3], &[0.9, 1.0, 1.1, 1.2]);
        let t = FixedRule(|x| 0.5 - x);
        let grid: Vec<f64> = (0..10).map(|k| -5.0 + 0.3 * k as f64).collect();
        let s = feature_sweep(&d, &t, 1, 0, &grid, &EnsembleOptions::new(25, 8), 0.0).unwrap();
        for c in &s.curves {
            assert_eq!(
                smoothness_metric(&c.values, 0.0).max_jump,
                0.0,
                "{}",
                c.name
            );
        }
    }

    #[test]
    fn grid_and_target_are_validated() {
        let d = two_feature(3, 6);
        let opts = EnsembleOptions::new(10, 1);
        assert!(feature_sweep(&d, &lda(), 0, 0, &[0.0, f64::NAN], &opts, 0.0).is_err());
        assert!(feature_sweep(&d, &lda(), 0, 0, &[1.0, 0.0], &opts, 0.0).is_err());
        assert!(feature_sweep(&d, &lda(), 0, 2, &[0.0, 1.0], &opts, 0.0).is_err());
        assert!(feature_sweep(&d, &lda(), 99, 0, &[0.0, 1.0], &opts, 0.0).is_err());
    }

    #[test]
    fn default_grid_spans_three_sd() {
        let d = one_dim(&[0.0, 1.0, 2.0], &[3.0, 4.0]);
        let g = default_grid(&d, 1, 0, 50, 3.0).unwrap();
        let sd = 2.5f64.sqrt();
        assert_eq!(g.len(), 50);
        assert!((g[0] - (1.0 - 3.0 * sd)).abs() < 1e-12);
        assert!((g[49] - (1.0 + 3.0 * sd)).abs() < 1e-12);
    }

    #[test]
    fn sweep_table_has_declared_columns() {
        let d = two_feature(4, 8);
        let grid = default_grid(&d, 0, 0, 6, 3.0).unwrap();
        let s = feature_sweep(&d, &lda(), 0, 0, &grid, &EnsembleOptions::new(40, 2), 0.0).unwrap();
        let t = s.to_table();
        t.validate().unwrap();
        assert_eq!(t.header[0], "grid_value");
        assert_eq!(&t.header[1..], &FEATURE_SWEEP_COLUMNS);
        assert_eq!(t.rows.len(), 6);
    }

    #[test]
    fn surfaces_are_emitted_for_lda() {
        let d = two_feature(6, 10);
        let ens = ReplicateEnsemble::build(&d, &lda(), &EnsembleOptions::new(8, 1)).unwrap();
        let t = decision_surfaces(&d, &ens.replicates, 5).unwrap();
        assert_eq!(t.header, ["model", "bias", "w1", "w2"]);
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[0][0], "full");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn averaged_curves_are_smoother_than_one_replicate(seed in 0u64..1000) {
            let d = two_feature(seed, 12);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let case = rng.random_range(0..d.n());
            let grid = default_grid(&d, case, 0, 30, 3.0).unwrap();
            let s = feature_sweep(&d, &lda(), case, 0, &grid, &EnsembleOptions::new(200, seed), 0.0).unwrap();
            let loob = smoothness_metric(s.curve("loob").unwrap(), 0.0).max_jump;
            let star = smoothness_metric(s.curve("err_star").unwrap(), 0.0).max_jump;
            let single = smoothness_metric(s.curve("single_component").unwrap(), 0.0).max_jump;
            // No averaged curve moves by more than two cases' worth of loss.
            prop_assert!(loob <= 2.0 / d.n() as f64 + 1e-12, "loob jump {loob}");
            prop_assert!(star <= 2.0 / d.n() as f64 + 1e-12, "star jump {star}");
            prop_assert!(single == 0.0 || single >= star || single >= loob);
        }
    }
}
