//! Seeded Monte-Carlo experiments on two multinormal classes.
//!
//! Class 1 is `N(0, I_p)` and class 2 is `N(c·1, I_p)`. Every trial draws a
//! training set, trains once, scores a large pseudo-test set for the true
//! conditional performance, and evaluates all estimators on one shared
//! replicate ensemble. Trial `t` uses seed `derive_seed(master, t)`; within a
//! trial the training data, pseudo-test set and bootstrap replicates read
//! separate streams, so results do not depend on thread scheduling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auc_estimators::{auc_of, AucEstimateBundle};
use crate::classifiers::{ClassifierKind, DiscriminantTrainer, ScoringRule, Trainer};
use crate::dataset::{Class, LabeledDataset};
use crate::ensemble::{EnsembleOptions, ReplicateEnsemble};
use crate::error::{invalid, Error, Result};
use crate::error_estimators::{loocv_error, mean_loss, ErrEstimateBundle};
use crate::rng::{derive_path, derive_seed, stream, stream_rng};
use crate::table::{fmt_f64, CsvTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    /// Mahalanobis distance between the class means.
    pub delta: f64,
    /// Per-coordinate mean of class 2. Overrides `delta` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    pub trials: usize,
    pub bootstraps: usize,
    pub classifier: ClassifierKind,
    /// Competitor in classifier comparisons.
    pub second_classifier: ClassifierKind,
    /// Pseudo-test cases per class.
    pub test_size: usize,
    pub seed: u64,
    pub threshold: f64,
    pub loocv: bool,
    pub lpob: bool,
    /// Per-class training sizes for the support-size study.
    pub sizes: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 5,
            n1: 20,
            n2: 20,
            delta: 0.8,
            shift: None,
            trials: 200,
            bootstraps: 100,
            classifier: ClassifierKind::Lda,
            second_classifier: ClassifierKind::Qda,
            test_size: 1000,
            seed: 1,
            threshold: 0.0,
            loocv: true,
            lpob: true,
            sizes: vec![20, 40, 80],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let at_least = |name: &str, v: usize, min: usize| {
            if v < min {
                Err(invalid(format!("{name} must be at least {min}, got {v}")))
            } else {
                Ok(())
            }
        };
        at_least("p", self.p, 1)?;
        at_least("n1", self.n1, 2)?;
        at_least("n2", self.n2, 2)?;
        at_least("trials", self.trials, 1)?;
        at_least("bootstraps", self.bootstraps, 1)?;
        at_least("test_size", self.test_size, 1)?;
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!(
                "delta must be finite and non-negative, got {}",
                self.delta
            )));
        }
        if let Some(c) = self.shift {
            if !c.is_finite() {
                return Err(invalid(format!("shift must be finite, got {c}")));
            }
        }
        if !self.threshold.is_finite() {
            return Err(invalid("threshold must be finite"));
        }
        for &n in &self.sizes {
            at_least("sizes entry", n, 2)?;
        }
        Ok(())
    }

    /// Per-coordinate class-2 mean `c`, so that `c·√p` is the Mahalanobis
    /// distance.
    pub fn shift(&self) -> f64 {
        self.shift.unwrap_or(self.delta / (self.p as f64).sqrt())
    }

    fn with_sizes(&self, n1: usize, n2: usize) -> Self {
        Self {
            n1,
            n2,
            ..self.clone()
        }
    }
}

/// `n1` draws from `N(0, I_p)` followed by `n2` from `N(shift·1, I_p)`.
pub fn multinormal<R: Rng + ?Sized>(
    p: usize,
    n1: usize,
    n2: usize,
    shift: f64,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let mut features = Vec::with_capacity((n1 + n2) * p);
    let mut labels = Vec::with_capacity(n1 + n2);
    for (class, n, mean) in [(Class::One, n1, 0.0), (Class::Two, n2, shift)] {
        for _ in 0..n {
            for _ in 0..p {
                let z: f64 = StandardNormal.sample(rng);
                features.push(mean + z);
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(features, p, labels)
}

pub fn gen_multinormal<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<LabeledDataset> {
    multinormal(config.p, config.n1, config.n2, config.shift(), rng)
}

/// Performance of a fixed model on a pseudo-test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueMetrics {
    pub auc: f64,
    /// Mean 0-1 loss; equal class sizes make this the equal-prior error.
    pub error: f64,
}

/// A large fresh sample standing in for the population.
pub struct PseudoTestSet {
    pub data: LabeledDataset,
}

impl PseudoTestSet {
    pub fn draw<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            data: multinormal(
                config.p,
                config.test_size,
                config.test_size,
                config.shift(),
                rng,
            )?,
        })
    }

    pub fn evaluate<M: ScoringRule>(&self, model: &M, threshold: f64) -> TrueMetrics {
        let scores: Vec<f64> = (0..self.data.n())
            .map(|i| model.score(self.data.row(i)))
            .collect();
        TrueMetrics {
            auc: auc_of(self.data.labels(), &scores),
            error: mean_loss(self.data.labels(), &scores, threshold),
        }
    }
}

pub fn true_conditional_metric<M: ScoringRule, R: Rng + ?Sized>(
    model: &M,
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<TrueMetrics> {
    Ok(PseudoTestSet::draw(config, rng)?.evaluate(model, config.threshold))
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64)
}

/// Runs `trials` independent jobs in parallel and returns them in trial
/// order. The first failure (by trial index) is reported with its seed.
fn run_trials<T: Send>(
    trials: usize,
    seed_of: impl Fn(usize) -> u64 + Sync,
    job: impl Fn(usize, u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = seed_of(t);
            job(t, seed).map_err(|e| Error::TrialFailed {
                trial: t,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Which truth an estimator is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Auc,
    Error,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Auc => "auc",
            Target::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub truth: TrueMetrics,
    /// In the order of [`MCExperimentReport::estimators`].
    pub estimates: Vec<f64>,
    pub redraws: usize,
}

/// Aggregates of one estimator over the trials. All spreads use `1/G`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub name: String,
    pub target: Target,
    pub mean: f64,
    pub sd: f64,
    /// Root mean squared difference from the per-trial truth.
    pub rms: f64,
    /// Root mean squared difference from the mean truth.
    pub rms_around_mean: f64,
    pub corr: f64,
    /// Set when either series is constant and `corr` is reported as 0.
    pub corr_degenerate: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population (1/G) standard deviation.
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn rms(estimates: &[f64], truth: &[f64]) -> f64 {
    (estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).powi(2))
        .sum::<f64>()
        / estimates.len() as f64)
        .sqrt()
}

pub fn rms_around_mean(estimates: &[f64], truth: &[f64]) -> f64 {
    let m = mean(truth);
    (estimates.iter().map(|e| (e - m).powi(2)).sum::<f64>() / estimates.len() as f64).sqrt()
}

/// Sample correlation, or `(0, true)` when either series is constant.
pub fn corr_coef(x: &[f64], y: &[f64]) -> (f64, bool) {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, true);
    }
    ((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0), false)
}

pub fn summarize(name: &str, target: Target, estimates: &[f64], truth: &[f64]) -> EstimatorSummary {
    let (corr, corr_degenerate) = corr_coef(estimates, truth);
    EstimatorSummary {
        name: name.to_string(),
        target,
        mean: mean(estimates),
        sd: sd(estimates),
        rms: rms(estimates, truth),
        rms_around_mean: rms_around_mean(estimates, truth),
        corr,
        corr_degenerate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCExperimentReport {
    pub config: ExperimentConfig,
    pub estimators: Vec<(String, Target)>,
    pub trials: Vec<TrialRecord>,
    /// The two truths first (`true_auc`, `true_error`), then one row per estimator.
    pub summaries: Vec<EstimatorSummary>,
}

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "estimator",
    "target",
    "mean",
    "sd",
    "rms",
    "rms_around_mean",
    "corr",
    "corr_degenerate",
];

impl MCExperimentReport {
    pub fn summary(&self, name: &str) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    /// Per-trial values of the named estimator or truth.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        match name {
            "true_auc" => Some(self.trials.iter().map(|t| t.truth.auc).collect()),
            "true_error" => Some(self.trials.iter().map(|t| t.truth.error).collect()),
            _ => {
                let k = self.estimators.iter().position(|(n, _)| n == name)?;
                Some(self.trials.iter().map(|t| t.estimates[k]).collect())
            }
        }
    }

    pub fn trial_table(&self) -> CsvTable {
        let mut header = vec![
            "trial".to_string(),
            "seed".into(),
            "true_auc".into(),
            "true_error".into(),
        ];
        header.extend(self.estimators.iter().map(|(n, _)| n.clone()));
        header.push("redraws".into());
        let mut t = CsvTable::new(header);
        for r in &self.trials {
            let mut row = vec![
                r.trial.to_string(),
                r.seed.to_string(),
                fmt_f64(r.truth.auc),
                fmt_f64(r.truth.error),
            ];
            row.extend(r.estimates.iter().map(|&v| fmt_f64(v)));
            row.push(r.redraws.to_string());
            t.rows.push(row);
        }
        t
    }

    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new(SUMMARY_COLUMNS);
        for s in &self.summaries {
            t.rows.push(vec![
                s.name.clone(),
                s.target.name().to_string(),
                fmt_f64(s.mean),
                fmt_f64(s.sd),
                fmt_f64(s.rms),
                fmt_f64(s.rms_around_mean),
                fmt_f64(s.corr),
                u8::from(s.corr_degenerate).to_string(),
            ]);
        }
        t
    }
}

fn ensemble_options(config: &ExperimentConfig, seed: u64) -> EnsembleOptions {
    EnsembleOptions {
        supplement_pairs: config.lpob,
        ..EnsembleOptions::new(config.bootstraps, seed)
    }
}

/// One trial of [`run_mc_experiment`], reproducible from its seed alone.
pub fn run_trial(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialRecord> {
    let data = gen_multinormal(config, &mut stream_rng(seed, &[stream::TRAINING_DATA]))?;
    let trainer = DiscriminantTrainer::new(config.classifier);
    let model = trainer.fit_all(&data)?;
    let truth = PseudoTestSet::draw(config, &mut stream_rng(seed, &[stream::PSEUDO_TEST]))?
        .evaluate(&model, config.threshold);
    let ens = ReplicateEnsemble::build(&data, &trainer, &ensemble_options(config, seed))?;
    let loocv = if config.loocv {
        Some(loocv_error(&data, &trainer, config.threshold)?)
    } else {
        None
    };
    let auc = AucEstimateBundle::from_ensemble(&ens, config.lpob)?;
    let err = ErrEstimateBundle::from_ensemble(&ens, config.threshold, loocv.as_ref())?;
    let estimates = auc
        .named_values()
        .into_iter()
        .chain(err.named_values())
        .map(|(_, v)| v)
        .collect();
    Ok(TrialRecord {
        trial,
        seed,
        truth,
        estimates,
        redraws: ens.redraws,
    })
}

/// Estimator columns produced by [`run_trial`] under `config`.
pub fn estimator_names(config: &ExperimentConfig) -> Vec<(String, Target)> {
    let mut names: Vec<(String, Target)> = [
        "apparent_auc",
        "sb_auc",
        "auc_star",
        "dot632_auc",
        "dot632plus_auc",
    ]
    .iter()
    .map(|n| (n.to_string(), Target::Auc))
    .collect();
    if config.lpob {
        names.push(("lpob_auc".into(), Target::Auc));
    }
    names.push(("err_apparent".into(), Target::Error));
    if config.loocv {
        names.push(("err_loocv".into(), Target::Error));
    }
    for n in [
        "err_simple_boot",
        "err_loob",
        "err_star",
        "err_refined",
        "err_dot632",
        "err_dot632plus",
    ] {
        names.push((n.into(), Target::Error));
    }
    names
}

pub fn run_mc_experiment(config: &ExperimentConfig) -> Result<MCExperimentReport> {
    config.validate()?;
    let trials = run_trials(
        config.trials,
        |t| trial_seed(config.seed, t),
        |t, seed| run_trial(config, t, seed),
    )?;
    let estimators = estimator_names(config);
    let true_auc: Vec<f64> = trials.iter().map(|t| t.truth.auc).collect();
    let true_error: Vec<f64> = trials.iter().map(|t| t.truth.error).collect();
    let mut summaries = vec![
        summarize("true_auc", Target::Auc, &true_auc, &true_auc),
        summarize("true_error", Target::Error, &true_error, &true_error),
    ];
    for (k, (name, target)) in estimators.iter().enumerate() {
        let est: Vec<f64> = trials.iter().map(|t| t.estimates[k]).collect();
        let truth = match target {
            Target::Auc => &true_auc,
            Target::Error => &true_error,
        };
        summaries.push(summarize(name, *target, &est, truth));
    }
    Ok(MCExperimentReport {
        config: config.clone(),
        estimators,
        trials,
        summaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonTrial {
    pub trial: usize,
    pub seed: u64,
    pub true_auc: [f64; 2],
    pub lpob_auc: [f64; 2],
}

impl ComparisonTrial {
    pub fn true_difference(&self) -> f64 {
        self.true_auc[0] - self.true_auc[1]
    }

    pub fn lpob_difference(&self) -> f64 {
        self.lpob_auc[0] - self.lpob_auc[1]
    }
}

/// Mean and SD over trials of one quantity, for each classifier and for
/// their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub first: f64,
    pub second: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub kinds: [ClassifierKind; 2],
    pub trials: Vec<ComparisonTrial>,
    pub mean_true: ComparisonRow,
    pub sd_true: ComparisonRow,
    pub mean_lpob: ComparisonRow,
    pub sd_lpob: ComparisonRow,
}

impl ComparisonReport {
    pub fn trial_table(&self) -> CsvTable {
        let (a, b) = (self.kinds[0].name(), self.kinds[1].name());
        let mut t = CsvTable::new([
            "trial".to_string(),
            "seed".into(),
            format!("true_{a}"),
            format!("true_{b}"),
            "true_diff".into(),
            format!("lpob_{a}"),
            format!("lpob_{b}"),
            "lpob_diff".into(),
        ]);
        for r in &self.trials {
            let mut row = vec![r.trial.to_string(), r.seed.to_string()];
            row.extend(
                [
                    r.true_auc[0],
                    r.true_auc[1],
                    r.true_difference(),
                    r.lpob_auc[0],
                    r.lpob_auc[1],
                    r.lpob_difference(),
                ]
                .map(fmt_f64),
            );
            t.rows.push(row);
        }
        t
    }

    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "quantity",
            self.kinds[0].name(),
            self.kinds[1].name(),
            "difference",
        ]);
        for (name, r) in [
            ("mean_true_auc", self.mean_true),
            ("sd_true_auc", self.sd_true),
            ("mean_lpob_auc", self.mean_lpob),
            ("sd_lpob_auc", self.sd_lpob),
        ] {
            t.rows.push(vec![
                name.to_string(),
                fmt_f64(r.first),
                fmt_f64(r.second),
                fmt_f64(r.difference),
            ]);
        }
        t
    }
}

/// Trains both classifier kinds on each trial's data and scores them on a
/// shared pseudo-test set and a shared set of replicates.
pub fn compare_classifiers(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let kinds = [config.classifier, config.second_classifier];
    let trials = run_trials(
        config.trials,
        |t| trial_seed(config.seed, t),
        |trial, seed| {
            let data = gen_multinormal(config, &mut stream_rng(seed, &[stream::TRAINING_DATA]))?;
            let test = PseudoTestSet::draw(config, &mut stream_rng(seed, &[stream::PSEUDO_TEST]))?;
            let opts = EnsembleOptions {
                supplement_pairs: true,
                ..EnsembleOptions::new(config.bootstraps, seed)
            };
            let mut true_auc = [0.0; 2];
            let mut lpob_auc = [0.0; 2];
            for (k, &kind) in kinds.iter().enumerate() {
                let trainer = DiscriminantTrainer::new(kind);
                true_auc[k] = test
                    .evaluate(&trainer.fit_all(&data)?, config.threshold)
                    .auc;
                let ens = ReplicateEnsemble::build(&data, &trainer, &opts)?;
                lpob_auc[k] = crate::auc_estimators::lpob_auc(&ens)?;
            }
            Ok(ComparisonTrial {
                trial,
                seed,
                true_auc,
                lpob_auc,
            })
        },
    )?;
    let row = |f: &dyn Fn(&ComparisonTrial) -> [f64; 3], agg: fn(&[f64]) -> f64| {
        let cols: Vec<[f64; 3]> = trials.iter().map(f).collect();
        let pick = |k: usize| agg(&cols.iter().map(|c| c[k]).collect::<Vec<_>>());
        ComparisonRow {
            first: pick(0),
            second: pick(1),
            difference: pick(2),
        }
    };
    let truth = |t: &ComparisonTrial| [t.true_auc[0], t.true_auc[1], t.true_difference()];
    let lpob = |t: &ComparisonTrial| [t.lpob_auc[0], t.lpob_auc[1], t.lpob_difference()];
    Ok(ComparisonReport {
        config: config.clone(),
        kinds,
        mean_true: row(&truth, mean),
        sd_true: row(&truth, sd),
        mean_lpob: row(&lpob, mean),
        sd_lpob: row(&lpob, sd),
        trials,
    })
}

/// Per-class size a replicate-based estimator at `n` is compared against.
pub fn support_size(n: usize, fraction: f64) -> usize {
    (n as f64 / fraction).ceil() as usize
}

/// Mean and standard error over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    fn of(x: &[f64]) -> Self {
        let g = x.len() as f64;
        let m = mean(x);
        let var = if x.len() > 1 {
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (g - 1.0)
        } else {
            0.0
        };
        Self {
            mean: m,
            se: (var / g).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRow {
    pub n: usize,
    pub true_auc: MeanSe,
    pub n_632: usize,
    pub auc_star_632: MeanSe,
    pub n_half: usize,
    pub auc_star_half: MeanSe,
}

pub const SUPPORT_COLUMNS: [&str; 9] = [
    "n",
    "true_auc",
    "true_auc_se",
    "n_632",
    "auc_star_632",
    "auc_star_632_se",
    "n_half",
    "auc_star_half",
    "auc_star_half_se",
];

pub fn support_table(rows: &[SupportRow]) -> CsvTable {
    let mut t = CsvTable::new(SUPPORT_COLUMNS);
    for r in rows {
        t.rows.push(vec![
            r.n.to_string(),
            fmt_f64(r.true_auc.mean),
            fmt_f64(r.true_auc.se),
            r.n_632.to_string(),
            fmt_f64(r.auc_star_632.mean),
            fmt_f64(r.auc_star_632.se),
            r.n_half.to_string(),
            fmt_f64(r.auc_star_half.mean),
            fmt_f64(r.auc_star_half.se),
        ]);
    }
    t
}

/// For each per-class size `n`: the mean true AUC of the classifier trained
/// on `n` cases per class, and the mean AUC(*) on training sets of
/// `⌈n/.632⌉` and `⌈n/.5⌉` cases per class. Every cell uses its own trials.
pub fn support_size_study(config: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<SupportRow>> {
    config.validate()?;
    if sizes.is_empty() {
        return Err(invalid("support-size study needs at least one size"));
    }
    let trainer = DiscriminantTrainer::new(config.classifier);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n < 2 {
            return Err(invalid(format!("sizes entry must be at least 2, got {n}")));
        }
        let cell_seed =
            |column: u64| move |t: usize| derive_path(config.seed, &[n as u64, column, t as u64]);
        let at_n = config.with_sizes(n, n);
        let truth = run_trials(config.trials, cell_seed(0), |_, seed| {
            let data = gen_multinormal(&at_n, &mut stream_rng(seed, &[stream::TRAINING_DATA]))?;
            let model = trainer.fit_all(&data)?;
            Ok(
                PseudoTestSet::draw(&at_n, &mut stream_rng(seed, &[stream::PSEUDO_TEST]))?
                    .evaluate(&model, config.threshold)
                    .auc,
            )
        })?;
        let star_at = |m: usize, column: u64| -> Result<Vec<f64>> {
            let cfg = config.with_sizes(m, m);
            run_trials(config.trials, cell_seed(column), |_, seed| {
                let data = gen_multinormal(&cfg, &mut stream_rng(seed, &[stream::TRAINING_DATA]))?;
                let opts = EnsembleOptions {
                    supplement_cases: false,
                    supplement_pairs: false,
                    ..EnsembleOptions::new(config.bootstraps, seed)
                };
                let ens = ReplicateEnsemble::build(&data, &trainer, &opts)?;
                Ok(crate::auc_estimators::auc_star(&ens)?.0)
            })
        };
        let (n_632, n_half) = (support_size(n, 0.632), support_size(n, 0.5));
        rows.push(SupportRow {
            n,
            true_auc: MeanSe::of(&truth),
            n_632,
            auc_star_632: MeanSe::of(&star_at(n_632, 1)?),
            n_half,
            auc_star_half: MeanSe::of(&star_at(n_half, 2)?),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn phi(x: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    fn small(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            trials,
            bootstraps: 20,
            test_size: 300,
            loocv: false,
            ..Default::default()
        }
    }

    #[test]
    fn shift_follows_mahalanobis_distance() {
        let c = ExperimentConfig::default();
        assert!((c.shift() - 0.8 / 5f64.sqrt()).abs() < 1e-15);
        assert!((c.shift() - 0.357_77).abs() < 1e-5);
        let direct = ExperimentConfig {
            shift: Some(0.25),
            ..c
        };
        assert_eq!(direct.shift(), 0.25);
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = ExperimentConfig {
            n2: 1,
            ..Default::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("n2"));
        let bad = ExperimentConfig {
            delta: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("delta"));
        let bad = ExperimentConfig {
            trials: 0,
            ..Default::default()
        };
        assert!(run_mc_experiment(&bad)
            .unwrap_err()
            .to_string()
            .contains("trials"));
    }

    #[test]
    fn class_mean_difference_matches_shift() {
        let cfg = ExperimentConfig {
            n1: 10_000,
            n2: 10_000,
            ..Default::default()
        };
        let d = gen_multinormal(&cfg, &mut rng_from_seed(3)).unwrap();
        let se = (2.0 / 10_000f64).sqrt();
        for k in 0..cfg.p {
            let m =
                |c: Class| d.class_indices(c).iter().map(|&i| d.row(i)[k]).sum::<f64>() / 10_000.0;
            let diff = m(Class::Two) - m(Class::One);
            assert!(
                (diff - cfg.shift()).abs() < 3.0 * se,
                "coordinate {k}: {diff}"
            );
        }
    }

    /// Projects onto the direction from class 1 to class 2, flipped so that
    /// class 1 scores high.
    struct BayesRule;
    impl ScoringRule for BayesRule {
        fn score(&self, x: &[f64]) -> f64 {
            -x.iter().sum::<f64>()
        }
    }

    struct Oracle(f64);
    impl ScoringRule for Oracle {
        fn score(&self, x: &[f64]) -> f64 {
            if x[0] < self.0 {
                1.0
            } else {
                -1.0
            }
        }
    }

    #[test]
    fn bayes_direction_reaches_closed_form_auc() {
        let cfg = ExperimentConfig::default();
        let m = true_conditional_metric(&BayesRule, &cfg, &mut rng_from_seed(11)).unwrap();
        // Unit-variance projections whose means differ by delta.
        let want = phi(cfg.delta / 2f64.sqrt());
        assert!((m.auc - want).abs() < 0.02, "{} vs {want}", m.auc);
        let other = true_conditional_metric(&BayesRule, &cfg, &mut rng_from_seed(12)).unwrap();
        assert!((m.auc - other.auc).abs() <= 0.03);
    }

    #[test]
    fn separated_classes_give_perfect_oracle() {
        let cfg = ExperimentConfig {
            p: 1,
            shift: Some(100.0),
            ..Default::default()
        };
        let m = true_conditional_metric(&Oracle(50.0), &cfg, &mut rng_from_seed(1)).unwrap();
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.error, 0.0);
    }

    #[test]
    fn summary_statistics_by_hand() {
        let est = [0.6, 0.7, 0.8];
        let truth = [0.65, 0.65, 0.71];
        let s = summarize("x", Target::Auc, &est, &truth);
        assert!((s.mean - 0.7).abs() < 1e-15);
        assert!((s.sd - (0.02f64 / 3.0).sqrt()).abs() < 1e-15);
        // Squared deviations from truth: .0025, .0025, .0081.
        assert!((s.rms - (0.0131f64 / 3.0).sqrt()).abs() < 1e-15);
        // Mean truth .67: .0049, .0009, .0169.
        assert!((s.rms_around_mean - (0.0227f64 / 3.0).sqrt()).abs() < 1e-15);
        // Centred products: (-.1)(-.02) + 0 + (.1)(.04) = .006; norms .02 and .0024.
        assert!((s.corr - 0.006 / (0.02f64 * 0.0024).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_constant_estimators() {
        let truth = [0.6, 0.62, 0.7, 0.66];
        let s = summarize("x", Target::Auc, &truth, &truth);
        assert_eq!(s.rms, 0.0);
        assert!((s.corr - 1.0).abs() < 1e-12);
        let s = summarize("x", Target::Auc, &[0.5; 4], &truth);
        assert_eq!((s.corr, s.corr_degenerate), (0.0, true));
    }

    proptest! {
        #[test]
        fn rms_decomposes_into_bias_and_spread(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60)
        ) {
            let (est, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let s = summarize("x", Target::Auc, &est, &truth);
            let diff: Vec<f64> = est.iter().zip(&truth).map(|(e, t)| e - t).collect();
            let bias = mean(&est) - mean(&truth);
            prop_assert!((s.rms.powi(2) - (bias.powi(2) + sd(&diff).powi(2))).abs() < 1e-10);
            prop_assert!((-1.0..=1.0).contains(&s.corr));
        }
    }

    #[test]
    fn experiment_is_deterministic_and_complete() {
        let cfg = ExperimentConfig {
            loocv: true,
            ..small(6)
        };
        let a = run_mc_experiment(&cfg).unwrap();
        let b = run_mc_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials.len(), 6);
        let names: Vec<&str> = a.estimators.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"lpob_auc") && names.contains(&"err_loocv"));
        for t in &a.trials {
            assert_eq!(t.estimates.len(), a.estimators.len());
            assert!(t.estimates.iter().all(|v| v.is_finite()));
        }
        let table = a.trial_table();
        table.validate().unwrap();
        a.summary_table().validate().unwrap();
        // A single trial reruns from its seed alone.
        let t3 = &a.trials[3];
        assert_eq!(&run_trial(&cfg, 3, t3.seed).unwrap(), t3);
    }

    #[test]
    fn no_separation_centres_auc_estimates_on_half() {
        let cfg = ExperimentConfig {
            delta: 0.0,
            ..small(40)
        };
        let r = run_mc_experiment(&cfg).unwrap();
        for name in ["true_auc", "auc_star", "lpob_auc"] {
            let m = r.summary(name).unwrap().mean;
            assert!((m - 0.5).abs() < 0.05, "{name}: {m}");
        }
    }

    #[test]
    fn identical_kinds_have_zero_difference() {
        let cfg = ExperimentConfig {
            second_classifier: ClassifierKind::Lda,
            ..small(5)
        };
        let r = compare_classifiers(&cfg).unwrap();
        for t in &r.trials {
            assert_eq!(t.true_difference(), 0.0);
            assert_eq!(t.lpob_difference(), 0.0);
        }
        assert_eq!(r.sd_lpob.difference, 0.0);
    }

    #[test]
    fn difference_is_exact_per_trial() {
        let cfg = ExperimentConfig { p: 4, ..small(4) };
        let r = compare_classifiers(&cfg).unwrap();
        for t in &r.trials {
            assert_eq!(t.true_difference(), t.true_auc[0] - t.true_auc[1]);
        }
        let table = r.trial_table();
        table.validate().unwrap();
        assert_eq!(table.header[2], "true_lda");
        r.summary_table().validate().unwrap();
    }

    #[test]
    fn support_sizes_round_up() {
        assert_eq!(support_size(20, 0.632), 32);
        assert_eq!(support_size(40, 0.632), 64);
        assert_eq!(support_size(80, 0.632), 127);
        assert_eq!(support_size(20, 0.5), 40);
    }

    #[test]
    fn support_study_without_separation_sits_at_half() {
        let cfg = ExperimentConfig {
            delta: 0.0,
            ..small(30)
        };
        let rows = support_size_study(&cfg, &[10]).unwrap();
        let r = rows[0];
        assert_eq!((r.n_632, r.n_half), (16, 20));
        for v in [r.true_auc, r.auc_star_632, r.auc_star_half] {
            assert!((v.mean - 0.5).abs() < 4.0 * v.se + 0.01, "{v:?}");
        }
        support_table(&rows).validate().unwrap();
    }

    #[test]
    fn first_failing_trial_is_reported_with_its_seed() {
        let err = run_trials(
            8,
            |t| 100 + t as u64,
            |t, _| if t >= 5 { Err(invalid("boom")) } else { Ok(t) },
        )
        .unwrap_err();
        match err {
            Error::TrialFailed {
                trial,
                seed,
                source,
            } => {
                assert_eq!((trial, seed), (5, 105));
                assert!(source.to_string().contains("boom"));
            }
            e => panic!("unexpected error {e}"),
        }
        assert_eq!(
            run_trials(3, |t| t as u64, |t, _| Ok(t)).unwrap(),
            vec![0, 1, 2]
        );
    }
}
