//! Linear and quadratic discriminant scoring rules.
//!
//! A score above the decision threshold means "class 1". Both rules use the
//! Gaussian log-likelihood ratio with priors taken from the training counts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Class, LabeledDataset};
use crate::error::{invalid, Error, Result};

/// Smallest covariance eigenvalue accepted without regularization.
pub const RIDGE_EIGEN_FLOOR: f64 = 1e-8;
/// Ridge size relative to the average variance `trace / p`.
pub const RIDGE_SCALE: f64 = 1e-6;

/// Anything that maps a feature vector to a scalar score.
pub trait ScoringRule: Send + Sync {
    fn score(&self, x: &[f64]) -> f64;

    fn score_rows(&self, data: &LabeledDataset, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| self.score(data.row(r))).collect()
    }
}

/// Fits a scoring rule on a multiset of rows of a dataset.
pub trait Trainer: Send + Sync {
    type Model: ScoringRule;

    /// `rows` may repeat indices (bootstrap replicates).
    fn fit(&self, data: &LabeledDataset, rows: &[usize]) -> Result<Self::Model>;

    fn fit_all(&self, data: &LabeledDataset) -> Result<Self::Model> {
        let rows: Vec<usize> = (0..data.n()).collect();
        self.fit(data, &rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lda,
    Qda,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Lda => "lda",
            ClassifierKind::Qda => "qda",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lda" => Ok(ClassifierKind::Lda),
            "qda" => Ok(ClassifierKind::Qda),
            other => Err(invalid(format!(
                "unknown classifier {other:?} (expected lda or qda)"
            ))),
        }
    }
}

/// Trainer for [`TrainedClassifier`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscriminantTrainer {
    pub kind: ClassifierKind,
}

impl DiscriminantTrainer {
    pub fn new(kind: ClassifierKind) -> Self {
        Self { kind }
    }
}

impl Trainer for DiscriminantTrainer {
    type Model = TrainedClassifier;

    fn fit(&self, data: &LabeledDataset, rows: &[usize]) -> Result<TrainedClassifier> {
        fit_discriminant(data, rows, self.kind)
    }
}

/// Fitted LDA or QDA rule.
///
/// Covariance matrices are stored row-major, `p × p`, after the ridge (if any)
/// was added. For LDA both entries of `covariances` hold the pooled matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    pub p: usize,
    pub means: [Vec<f64>; 2],
    pub covariances: [Vec<f64>; 2],
    /// Ridge added to each covariance, 0 when none was needed.
    pub ridge: [f64; 2],
    /// Training-count priors of class 1 and class 2.
    pub priors: [f64; 2],
    #[serde(skip)]
    rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Default)]
enum Rule {
    #[default]
    Unset,
    Linear {
        w: Vec<f64>,
        b: f64,
    },
    Quadratic {
        inverses: [Vec<f64>; 2],
        offset: f64,
    },
}

/// Fits LDA (`ClassifierKind::Lda`) or QDA on the whole dataset.
pub fn train(data: &LabeledDataset, kind: ClassifierKind) -> Result<TrainedClassifier> {
    DiscriminantTrainer::new(kind).fit_all(data)
}

/// Checked scoring of one feature vector.
pub fn score(model: &TrainedClassifier, x: &[f64]) -> Result<f64> {
    if x.len() != model.p {
        return Err(Error::DimensionMismatch {
            expected: model.p,
            got: x.len(),
        });
    }
    Ok(model.score(x))
}

impl TrainedClassifier {
    /// `(w, b)` with score `w·x + b`; `None` for QDA.
    pub fn linear_coefficients(&self) -> Option<(&[f64], f64)> {
        match &self.rule {
            Rule::Linear { w, b } => Some((w, *b)),
            _ => None,
        }
    }

    /// Rebuilds the derived scoring coefficients, e.g. after deserializing.
    pub fn rebuild(mut self) -> Result<Self> {
        self.rule = derive_rule(
            self.kind,
            self.p,
            &self.means,
            &self.covariances,
            self.priors,
        )?;
        Ok(self)
    }
}

impl ScoringRule for TrainedClassifier {
    fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.p);
        match &self.rule {
            Rule::Linear { w, b } => w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b,
            Rule::Quadratic { inverses, offset } => {
                let d1 = mahalanobis(&inverses[0], &self.means[0], x);
                let d2 = mahalanobis(&inverses[1], &self.means[1], x);
                -0.5 * d1 + 0.5 * d2 + offset
            }
            Rule::Unset => {
                panic!("classifier coefficients missing; call rebuild() after deserializing")
            }
        }
    }
}

fn mahalanobis(inv: &[f64], mean: &[f64], x: &[f64]) -> f64 {
    let p = mean.len();
    let mut total = 0.0;
    for r in 0..p {
        let dr = x[r] - mean[r];
        let mut acc = 0.0;
        for c in 0..p {
            acc += inv[r * p + c] * (x[c] - mean[c]);
        }
        total += dr * acc;
    }
    total
}

fn fit_discriminant(
    data: &LabeledDataset,
    rows: &[usize],
    kind: ClassifierKind,
) -> Result<TrainedClassifier> {
    let p = data.p();
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    for &r in rows {
        let k = class_slot(data.label(r));
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(data.row(r)) {
            *s += v;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        if c < 2 {
            return Err(Error::TooFewCases {
                class: k as u8 + 1,
                got: c,
                min: 2,
            });
        }
    }
    let means = [0, 1].map(|k| {
        sums[k]
            .iter()
            .map(|s| s / counts[k] as f64)
            .collect::<Vec<f64>>()
    });

    let mut scatter = [DMatrix::<f64>::zeros(p, p), DMatrix::<f64>::zeros(p, p)];
    for &r in rows {
        let k = class_slot(data.label(r));
        let x = data.row(r);
        let m = &means[k];
        let s = &mut scatter[k];
        for a in 0..p {
            let da = x[a] - m[a];
            for b in 0..=a {
                s[(a, b)] += da * (x[b] - m[b]);
            }
        }
    }
    for s in &mut scatter {
        for a in 0..p {
            for b in 0..a {
                s[(b, a)] = s[(a, b)];
            }
        }
    }

    let n = (counts[0] + counts[1]) as f64;
    let priors = [counts[0] as f64 / n, counts[1] as f64 / n];
    let (covariances, ridge) = match kind {
        ClassifierKind::Lda => {
            let pooled = (&scatter[0] + &scatter[1]) / (n - 2.0);
            let (cov, lambda) = regularize(pooled);
            let flat = to_row_major(&cov);
            ([flat.clone(), flat], [lambda, lambda])
        }
        ClassifierKind::Qda => {
            let (c1, l1) = regularize(&scatter[0] / (counts[0] as f64 - 1.0));
            let (c2, l2) = regularize(&scatter[1] / (counts[1] as f64 - 1.0));
            ([to_row_major(&c1), to_row_major(&c2)], [l1, l2])
        }
    };
    let rule = derive_rule(kind, p, &means, &covariances, priors)?;
    Ok(TrainedClassifier {
        kind,
        p,
        means,
        covariances,
        ridge,
        priors,
        rule,
    })
}

fn class_slot(c: Class) -> usize {
    match c {
        Class::One => 0,
        Class::Two => 1,
    }
}

/// Adds `λI` when the smallest eigenvalue falls below the floor.
fn regularize(cov: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let p = cov.nrows();
    let min_eig = cov.clone().symmetric_eigenvalues().min();
    if min_eig >= RIDGE_EIGEN_FLOOR {
        return (cov, 0.0);
    }
    let mut lambda = (RIDGE_SCALE * cov.trace() / p as f64).max(RIDGE_EIGEN_FLOOR);
    // Rounding can leave a tiny negative eigenvalue larger than the ridge.
    if min_eig + lambda <= 0.0 {
        lambda += -min_eig;
    }
    let mut out = cov;
    for i in 0..p {
        out[(i, i)] += lambda;
    }
    (out, lambda)
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut v = Vec::with_capacity(p * p);
    for r in 0..p {
        for c in 0..p {
            v.push(m[(r, c)]);
        }
    }
    v
}

fn inverse_and_logdet(flat: &[f64], p: usize) -> Result<(Vec<f64>, f64)> {
    let m = DMatrix::from_row_slice(p, p, flat);
    let chol = m.cholesky().ok_or_else(|| {
        Error::Training("covariance is not positive definite after regularization".into())
    })?;
    let logdet = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    Ok((to_row_major(&chol.inverse()), logdet))
}

fn derive_rule(
    kind: ClassifierKind,
    p: usize,
    means: &[Vec<f64>; 2],
    covs: &[Vec<f64>; 2],
    priors: [f64; 2],
) -> Result<Rule> {
    let log_prior = (priors[0] / priors[1]).ln();
    match kind {
        ClassifierKind::Lda => {
            let (inv, _) = inverse_and_logdet(&covs[0], p)?;
            let inv = DMatrix::from_row_slice(p, p, &inv);
            let diff =
                DVector::from_iterator(p, means[0].iter().zip(&means[1]).map(|(a, b)| a - b));
            let mid = DVector::from_iterator(
                p,
                means[0].iter().zip(&means[1]).map(|(a, b)| 0.5 * (a + b)),
            );
            let w = &inv * diff;
            let b = -w.dot(&mid) + log_prior;
            Ok(Rule::Linear {
                w: w.iter().copied().collect(),
                b,
            })
        }
        ClassifierKind::Qda => {
            let (inv1, ld1) = inverse_and_logdet(&covs[0], p)?;
            let (inv2, ld2) = inverse_and_logdet(&covs[1], p)?;
            Ok(Rule::Quadratic {
                inverses: [inv1, inv2],
                offset: -0.5 * ld1 + 0.5 * ld2 + log_prior,
            })
        }
    }
}
