//! A trained set of bootstrap replicates shared by all estimators.
//!
//! Every replicate model scores every original case once. The error and AUC
//! estimators then only differ in which scores they average, so estimator
//! differences within one dataset carry no resampling noise.

use rayon::prelude::*;

use crate::classifiers::{ScoringRule, Trainer};
use crate::dataset::{Class, LabeledDataset};
use crate::error::{invalid, Error, Result};
use crate::resampling::{conditioned_bootstrap, draw_replicate, BootstrapReplicate, Scheme};
use crate::rng::{stream, stream_rng};

/// Attempts per replicate before a training failure is reported.
pub const MAX_ATTEMPTS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleOptions {
    pub bootstraps: usize,
    pub scheme: Scheme,
    pub seed: u64,
    /// Draw conditioned replicates for cases no replicate excludes.
    pub supplement_cases: bool,
    /// Same for (class-1, class-2) pairs no replicate excludes jointly.
    pub supplement_pairs: bool,
}

impl EnsembleOptions {
    pub fn new(bootstraps: usize, seed: u64) -> Self {
        Self {
            bootstraps,
            scheme: Scheme::Stratified,
            seed,
            supplement_cases: true,
            supplement_pairs: true,
        }
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn without_pairs(mut self) -> Self {
        self.supplement_pairs = false;
        self
    }
}

/// Score of a case under a model trained on a replicate conditioned to
/// exclude it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSupplement {
    pub case: usize,
    pub score: f64,
}

/// Scores of a class-1 and a class-2 case under a model trained on a
/// replicate conditioned to exclude both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSupplement {
    pub case1: usize,
    pub case2: usize,
    pub score1: f64,
    pub score2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateEnsemble {
    pub scheme: Scheme,
    pub labels: Vec<Class>,
    pub replicates: Vec<BootstrapReplicate>,
    /// `scores[b][i]`: model of replicate `b` applied to case `i`.
    pub scores: Vec<Vec<f64>>,
    /// Model trained on the full data applied to each case.
    pub apparent_scores: Vec<f64>,
    pub case_supplements: Vec<CaseSupplement>,
    pub pair_supplements: Vec<PairSupplement>,
    /// Replicates redrawn because their model could not be trained.
    pub redraws: usize,
}

impl ReplicateEnsemble {
    /// Draws `opts.bootstraps` replicates from `opts.seed` and trains them.
    pub fn build<T: Trainer>(
        data: &LabeledDataset,
        trainer: &T,
        opts: &EnsembleOptions,
    ) -> Result<Self> {
        if opts.bootstraps == 0 {
            return Err(invalid("need at least one bootstrap replicate"));
        }
        let apparent = score_all(&trainer.fit_all(data)?, data);
        let drawn: Vec<Result<(BootstrapReplicate, Vec<f64>, usize)>> = (0..opts.bootstraps)
            .into_par_iter()
            .map(|b| {
                let mut last = None;
                for attempt in 0..MAX_ATTEMPTS {
                    let mut rng = stream_rng(opts.seed, &[stream::BOOTSTRAP, b as u64, attempt]);
                    let rep = draw_replicate(data, opts.scheme, &mut rng)?;
                    match trainer.fit(data, &rep.rows) {
                        Ok(model) => {
                            let scores = score_all(&model, data);
                            return Ok((rep, scores, attempt as usize));
                        }
                        Err(e) => last = Some(e),
                    }
                }
                Err(retry_failure(format!("replicate {b}"), last))
            })
            .collect();
        let mut replicates = Vec::with_capacity(opts.bootstraps);
        let mut scores = Vec::with_capacity(opts.bootstraps);
        let mut redraws = 0;
        for d in drawn {
            let (rep, s, extra) = d?;
            replicates.push(rep);
            scores.push(s);
            redraws += extra;
        }
        let mut ens = Self::assemble(data, opts.scheme, replicates, scores, apparent);
        ens.redraws = redraws;
        ens.supplement(data, trainer, opts)?;
        Ok(ens)
    }

    /// Trains the given replicates. Supplements follow `opts` (its
    /// `bootstraps` field is ignored).
    pub fn from_replicates<T: Trainer>(
        data: &LabeledDataset,
        trainer: &T,
        replicates: Vec<BootstrapReplicate>,
        opts: &EnsembleOptions,
    ) -> Result<Self> {
        if replicates.is_empty() {
            return Err(invalid("need at least one bootstrap replicate"));
        }
        if let Some(r) = replicates.iter().find(|r| r.counts.len() != data.n()) {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                got: r.counts.len(),
            });
        }
        let apparent = score_all(&trainer.fit_all(data)?, data);
        let scores: Vec<Result<Vec<f64>>> = replicates
            .par_iter()
            .map(|rep| trainer.fit(data, &rep.rows).map(|m| score_all(&m, data)))
            .collect();
        let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
        let mut ens = Self::assemble(data, opts.scheme, replicates, scores, apparent);
        ens.supplement(data, trainer, opts)?;
        Ok(ens)
    }

    pub(crate) fn assemble(
        data: &LabeledDataset,
        scheme: Scheme,
        replicates: Vec<BootstrapReplicate>,
        scores: Vec<Vec<f64>>,
        apparent_scores: Vec<f64>,
    ) -> Self {
        Self {
            scheme,
            labels: data.labels().to_vec(),
            replicates,
            scores,
            apparent_scores,
            case_supplements: Vec::new(),
            pair_supplements: Vec::new(),
            redraws: 0,
        }
    }

    pub(crate) fn supplement<T: Trainer>(
        &mut self,
        data: &LabeledDataset,
        trainer: &T,
        opts: &EnsembleOptions,
    ) -> Result<()> {
        if opts.supplement_cases {
            let uncovered: Vec<usize> = (0..self.n())
                .filter(|&i| self.exclusion_count(i) == 0)
                .collect();
            self.case_supplements = uncovered
                .par_iter()
                .map(|&i| {
                    let mut last = None;
                    for attempt in 0..MAX_ATTEMPTS {
                        let mut rng =
                            stream_rng(opts.seed, &[stream::SUPPLEMENT_CASE, i as u64, attempt]);
                        let rep = conditioned_bootstrap(data, &[i], opts.scheme, &mut rng)?;
                        match trainer.fit(data, &rep.rows) {
                            Ok(m) => {
                                return Ok(CaseSupplement {
                                    case: i,
                                    score: m.score(data.row(i)),
                                })
                            }
                            Err(e) => last = Some(e),
                        }
                    }
                    Err(retry_failure(format!("supplement for case {i}"), last))
                })
                .collect::<Result<Vec<_>>>()?;
        }
        if opts.supplement_pairs {
            let uncovered = self.uncovered_pairs();
            self.pair_supplements = uncovered
                .par_iter()
                .map(|&(i, j)| {
                    let mut last = None;
                    for attempt in 0..MAX_ATTEMPTS {
                        let mut rng = stream_rng(
                            opts.seed,
                            &[stream::SUPPLEMENT_PAIR, i as u64, j as u64, attempt],
                        );
                        let rep = conditioned_bootstrap(data, &[i, j], opts.scheme, &mut rng)?;
                        match trainer.fit(data, &rep.rows) {
                            Ok(m) => {
                                return Ok(PairSupplement {
                                    case1: i,
                                    case2: j,
                                    score1: m.score(data.row(i)),
                                    score2: m.score(data.row(j)),
                                })
                            }
                            Err(e) => last = Some(e),
                        }
                    }
                    Err(retry_failure(
                        format!("supplement for pair ({i}, {j})"),
                        last,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn bootstraps(&self) -> usize {
        self.replicates.len()
    }

    pub fn class_indices(&self, class: Class) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Number of replicates excluding case `i`.
    pub fn exclusion_count(&self, i: usize) -> usize {
        self.replicates.iter().filter(|r| r.is_excluded(i)).count()
    }

    /// Class-1/class-2 pairs that no replicate excludes jointly.
    pub fn uncovered_pairs(&self) -> Vec<(usize, usize)> {
        let c1 = self.class_indices(Class::One);
        let c2 = self.class_indices(Class::Two);
        let mut covered = vec![false; c1.len() * c2.len()];
        for r in &self.replicates {
            let e1: Vec<usize> = (0..c1.len()).filter(|&a| r.is_excluded(c1[a])).collect();
            let e2: Vec<usize> = (0..c2.len()).filter(|&b| r.is_excluded(c2[b])).collect();
            for &a in &e1 {
                for &b in &e2 {
                    covered[a * c2.len() + b] = true;
                }
            }
        }
        let mut out = Vec::new();
        for (a, &i) in c1.iter().enumerate() {
            for (b, &j) in c2.iter().enumerate() {
                if !covered[a * c2.len() + b] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub(crate) fn score_all<M: ScoringRule>(model: &M, data: &LabeledDataset) -> Vec<f64> {
    (0..data.n()).map(|i| model.score(data.row(i))).collect()
}

fn retry_failure(what: String, last: Option<Error>) -> Error {
    let reason = last.map_or_else(|| "unknown".to_string(), |e| e.to_string());
    Error::Training(format!(
        "{what}: no trainable draw in {MAX_ATTEMPTS} attempts ({reason})"
    ))
}
