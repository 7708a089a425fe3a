//! Bootstrap replicates, jackknife deletions and cross-validation folds.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::dataset::{Class, LabeledDataset};
use crate::error::{invalid, Result};

/// A resampled multiset of case indices with per-case inclusion counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapReplicate {
    /// Drawn indices, class 1 first.
    pub rows: Vec<usize>,
    /// `counts[i]` is how often case `i` was drawn.
    pub counts: Vec<u32>,
}

impl BootstrapReplicate {
    pub fn from_rows(n: usize, rows: Vec<usize>) -> Self {
        let mut counts = vec![0u32; n];
        for &r in &rows {
            counts[r] += 1;
        }
        Self { rows, counts }
    }

    pub fn is_excluded(&self, i: usize) -> bool {
        self.counts[i] == 0
    }

    pub fn excluded(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
    }

    pub fn n_excluded(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }
}

/// Which population a replicate is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// n draws from all cases; class sizes vary between replicates.
    Ordinary,
    /// n_k draws within each class k.
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Ordered,
    Unordered,
}

fn check_classes(data: &LabeledDataset) -> Result<()> {
    if data.n1() == 0 || data.n2() == 0 {
        return Err(invalid(format!(
            "both classes need at least one case (got n1={}, n2={})",
            data.n1(),
            data.n2()
        )));
    }
    Ok(())
}

/// n_k draws with replacement inside each class.
pub fn stratified_bootstrap<R: Rng + ?Sized>(
    data: &LabeledDataset,
    rng: &mut R,
) -> Result<BootstrapReplicate> {
    check_classes(data)?;
    let mut rows = Vec::with_capacity(data.n());
    for class in [Class::One, Class::Two] {
        let idx = data.class_indices(class);
        rows.extend((0..idx.len()).map(|_| idx[rng.random_range(0..idx.len())]));
    }
    Ok(BootstrapReplicate::from_rows(data.n(), rows))
}

/// n draws with replacement from all cases, ignoring class. Rows are
/// reordered class 1 first.
pub fn ordinary_bootstrap<R: Rng + ?Sized>(
    data: &LabeledDataset,
    rng: &mut R,
) -> Result<BootstrapReplicate> {
    check_classes(data)?;
    let n = data.n();
    let mut drawn: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    drawn.sort_by_key(|&r| data.label(r));
    Ok(BootstrapReplicate::from_rows(n, drawn))
}

/// Uniform draw over multisets of size n_k within each class.
pub fn unordered_bootstrap<R: Rng + ?Sized>(
    data: &LabeledDataset,
    rng: &mut R,
) -> Result<BootstrapReplicate> {
    check_classes(data)?;
    let mut rows = Vec::with_capacity(data.n());
    for class in [Class::One, Class::Two] {
        let idx = data.class_indices(class);
        rows.extend(uniform_multiset(idx.len(), rng).into_iter().map(|j| idx[j]));
    }
    Ok(BootstrapReplicate::from_rows(data.n(), rows))
}

/// Uniform multiset of size `n` over `0..n`: choose the star positions among
/// `2n − 1` slots; the k-th star (0-based, sorted) at slot `c` stands for
/// element `c − k`.
pub fn uniform_multiset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut stars = index::sample(rng, 2 * n - 1, n).into_vec();
    stars.sort_unstable();
    stars.iter().enumerate().map(|(k, &c)| c - k).collect()
}

/// Replicate drawn conditionally on excluding every case in `excluded`.
/// Draws come from the remaining cases: per class for the stratified scheme,
/// pooled for the ordinary one.
pub fn conditioned_bootstrap<R: Rng + ?Sized>(
    data: &LabeledDataset,
    excluded: &[usize],
    scheme: Scheme,
    rng: &mut R,
) -> Result<BootstrapReplicate> {
    let keep = |i: &usize| !excluded.contains(i);
    let mut rows = Vec::with_capacity(data.n());
    match scheme {
        Scheme::Stratified => {
            for class in [Class::One, Class::Two] {
                let pool: Vec<usize> = data
                    .class_indices(class)
                    .iter()
                    .copied()
                    .filter(keep)
                    .collect();
                if pool.is_empty() {
                    return Err(invalid(format!(
                        "class {} has no case left after exclusion",
                        class.number()
                    )));
                }
                let nk = data.n_class(class);
                rows.extend((0..nk).map(|_| pool[rng.random_range(0..pool.len())]));
            }
        }
        Scheme::Ordinary => {
            let pool: Vec<usize> = (0..data.n()).filter(keep).collect();
            if pool.is_empty() {
                return Err(invalid("no case left after exclusion"));
            }
            rows.extend((0..data.n()).map(|_| pool[rng.random_range(0..pool.len())]));
            rows.sort_by_key(|&r| data.label(r));
        }
    }
    Ok(BootstrapReplicate::from_rows(data.n(), rows))
}

/// Draws one replicate under `scheme`.
pub fn draw_replicate<R: Rng + ?Sized>(
    data: &LabeledDataset,
    scheme: Scheme,
    rng: &mut R,
) -> Result<BootstrapReplicate> {
    match scheme {
        Scheme::Stratified => stratified_bootstrap(data, rng),
        Scheme::Ordinary => ordinary_bootstrap(data, rng),
    }
}

/// Probability that a fixed case appears in a replicate of size `n`.
pub fn appearance_probability(n: usize, mode: SamplingMode) -> Result<f64> {
    if n < 1 {
        return Err(invalid("appearance probability needs n ≥ 1"));
    }
    let nf = n as f64;
    Ok(match mode {
        SamplingMode::Ordered => 1.0 - (1.0 - 1.0 / nf).powf(nf),
        SamplingMode::Unordered => nf / (2.0 * nf - 1.0),
    })
}

/// Leave-one-out index sets; the i-th omits case i.
pub fn jackknife_samples(data: &LabeledDataset) -> Result<Vec<Vec<usize>>> {
    let n = data.n();
    if n < 2 {
        return Err(invalid(format!("jackknife needs n ≥ 2 (got {n})")));
    }
    Ok((0..n)
        .map(|i| (0..n).filter(|&j| j != i).collect())
        .collect())
}

/// Assignment of cases to folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldPlan {
    pub fn fold(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == f)
            .collect()
    }

    pub fn training_rows(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != f)
            .collect()
    }
}

/// Stratified k-fold split: each class is shuffled and dealt round-robin,
/// class 2 continuing where class 1 stopped so overall sizes stay balanced.
pub fn cv_folds<R: Rng + ?Sized>(data: &LabeledDataset, k: usize, rng: &mut R) -> Result<FoldPlan> {
    let n = data.n();
    if k < 2 || k > n {
        return Err(invalid(format!(
            "fold count must satisfy 2 ≤ k ≤ n (got k={k}, n={n})"
        )));
    }
    let mut fold_of = vec![0usize; n];
    let mut start = 0;
    for class in [Class::One, Class::Two] {
        let mut idx = data.class_indices(class).to_vec();
        idx.shuffle(rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = (start + pos) % k;
        }
        start = (start + idx.len()) % k;
    }
    Ok(FoldPlan { k, fold_of })
}
