//! Nonparametric resampling estimators of classifier performance.
//!
//! The crate covers the error rate (a one-sample statistic) and the AUC (a
//! two-sample Mann-Whitney statistic) under a single framework:
//!
//! - [`metrics`]: empirical ROC, trapezoid and Mann-Whitney AUC, risk.
//! - [`classifiers`]: LDA / QDA scoring rules and the [`Trainer`] abstraction.
//! - [`resampling`]: stratified, ordinary and unordered bootstrap replicates,
//!   jackknife samples and cross-validation folds.
//! - [`ensemble`]: one set of bootstrap replicates, trained and scored once,
//!   shared by every estimator.
//! - [`error_estimators`]: apparent, LOOCV, SB, LOOB, Err(*), refined, .632, .632+.
//! - [`auc_estimators`]: the AUC analogues plus the leave-pair-out bootstrap.
//! - [`uncertainty`]: bootstrap/jackknife bias and SE, empirical influence
//!   functions and the influence-function variance of the LOOB.
//! - [`smoothness`]: perturbation sweeps that expose (non-)smooth estimators.
//! - [`harness`]: seeded Monte-Carlo experiments on multinormal data.

pub mod auc_estimators;
pub mod classifiers;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod error_estimators;
pub mod harness;
pub mod metrics;
pub mod resampling;
pub mod rng;
pub mod smoothness;
pub mod table;
pub mod uncertainty;

pub use classifiers::{
    ClassifierKind, DiscriminantTrainer, ScoringRule, TrainedClassifier, Trainer,
};
pub use dataset::{Class, LabeledDataset};
pub use ensemble::ReplicateEnsemble;
pub use error::{Error, Result};
pub use metrics::{CostModel, RocCurve, ScoreSet};
pub use resampling::BootstrapReplicate;

/// Weight of the apparent (resubstitution) term in the .632 family.
pub const W_APPARENT: f64 = 0.368;
/// Weight of the out-of-bootstrap term in the .632 family.
pub const W_OUT_OF_BAG: f64 = 0.632;
