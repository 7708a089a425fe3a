//! Subcommand bodies. Each writes its tables into `out` and returns the
//! file names it wrote, in order.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use aucboot::auc_estimators::AucEstimateBundle;
use aucboot::ensemble::EnsembleOptions;
use aucboot::error_estimators::{loocv_error, ErrEstimateBundle};
use aucboot::harness::{self, ExperimentConfig};
use aucboot::rng::{stream, stream_rng};
use aucboot::smoothness::{self, smoothness_metric};
use aucboot::table::{fmt_f64, CsvTable};
use aucboot::uncertainty::if_variance_loob_error;
use aucboot::{ClassifierKind, DiscriminantTrainer, LabeledDataset, ReplicateEnsemble};

use crate::config::{EstimateConfig, SmoothnessConfig};

/// Jumps at or below this size count as flat in the smoothness summary.
const FLAT_JUMP: f64 = 1e-12;

fn write(out: &Path, name: &str, table: &CsvTable, written: &mut Vec<String>) -> Result<()> {
    table
        .write_atomic(&out.join(name))
        .with_context(|| format!("writing {name}"))?;
    written.push(name.to_string());
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    LabeledDataset::from_csv_reader(f).with_context(|| format!("parsing {}", path.display()))
}

pub fn dataset_table(data: &LabeledDataset) -> CsvTable {
    let mut header = vec!["label".to_string()];
    header.extend((1..=data.p()).map(|k| format!("x{k}")));
    let mut t = CsvTable::new(header);
    for i in 0..data.n() {
        let mut row = vec![data.label(i).number().to_string()];
        row.extend(data.row(i).iter().map(|&v| fmt_f64(v)));
        t.rows.push(row);
    }
    t
}

pub fn estimate(dataset: &Path, cfg: &EstimateConfig, out: &Path) -> Result<Vec<String>> {
    let data = read_dataset(dataset)?;
    let trainer = DiscriminantTrainer::new(cfg.classifier);
    let mut opts = EnsembleOptions::new(cfg.bootstraps, cfg.seed);
    opts.supplement_pairs = cfg.lpob;
    let ens = ReplicateEnsemble::build(&data, &trainer, &opts)?;
    // Leaving a case out of a two-case class leaves nothing trainable.
    let loocv_possible = data.n1().min(data.n2()) > 2;
    if cfg.loocv && !loocv_possible {
        eprintln!("warning: a class has only two cases; skipping leave-one-out cross-validation");
    }
    let loocv = if cfg.loocv && loocv_possible {
        Some(loocv_error(&data, &trainer, cfg.threshold)?)
    } else {
        None
    };
    let err = ErrEstimateBundle::from_ensemble(&ens, cfg.threshold, loocv.as_ref())?;
    let auc = AucEstimateBundle::from_ensemble(&ens, cfg.lpob)?;

    let mut est = CsvTable::new(["estimator", "target", "value"]);
    for (name, v) in err.named_values() {
        let name = if name.starts_with("err_") {
            name.to_string()
        } else {
            format!("err_{name}")
        };
        est.push(vec![name, "error".into(), fmt_f64(v)])?;
    }
    est.push(vec![
        "gamma_hat".into(),
        "error".into(),
        fmt_f64(err.gamma_hat),
    ])?;
    est.push(vec![
        "r_hat_prime".into(),
        "error".into(),
        fmt_f64(err.r_hat_prime),
    ])?;
    if cfg.influence {
        let report =
            if_variance_loob_error(&data, &trainer, cfg.bootstraps, cfg.seed, cfg.threshold)?;
        est.push(vec![
            "err_loob_if_se".into(),
            "error".into(),
            fmt_f64(report.sd()),
        ])?;
    }
    for (name, v) in auc.named_values() {
        est.push(vec![name.to_string(), "auc".into(), fmt_f64(v)])?;
    }
    est.push(vec![
        "gamma_auc".into(),
        "auc".into(),
        fmt_f64(auc.gamma_auc),
    ])?;
    est.push(vec![
        "r_hat_prime_auc".into(),
        "auc".into(),
        fmt_f64(auc.r_hat_prime),
    ])?;

    let mut diag = CsvTable::new(["item", "value"]);
    let d = &err.diagnostics;
    for (name, v) in [
        ("n1", data.n1()),
        ("n2", data.n2()),
        ("bootstraps", cfg.bootstraps),
        ("redraws", d.redraws),
        ("err_star_dropped_replicates", d.dropped_replicates),
        ("supplemented_cases", d.supplemented_cases),
        ("loocv_computed", usize::from(loocv.is_some())),
        ("loocv_skipped", d.loocv_skipped),
        (
            "auc_star_dropped_replicates",
            auc.diagnostics.dropped_replicates,
        ),
        ("supplemented_pairs", auc.diagnostics.supplemented_pairs),
    ] {
        diag.push(vec![name.to_string(), v.to_string()])?;
    }

    let mut written = Vec::new();
    write(out, "estimates.csv", &est, &mut written)?;
    write(out, "diagnostics.csv", &diag, &mut written)?;
    Ok(written)
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let report = harness::run_mc_experiment(cfg)?;
    let mut written = Vec::new();
    write(out, "trials.csv", &report.trial_table(), &mut written)?;
    write(out, "summary.csv", &report.summary_table(), &mut written)?;
    Ok(written)
}

pub fn smoothness(cfg: &SmoothnessConfig, out: &Path) -> Result<Vec<String>> {
    let exp = cfg.experiment();
    exp.validate()?;
    let data = harness::gen_multinormal(&exp, &mut stream_rng(cfg.seed, &[stream::TRAINING_DATA]))?;
    let trainer = DiscriminantTrainer::new(cfg.classifier);
    let grid = smoothness::default_grid(
        &data,
        cfg.case,
        cfg.coordinate,
        cfg.grid_points,
        cfg.grid_span,
    )?;
    let opts = EnsembleOptions::new(cfg.bootstraps, cfg.seed);
    let sweep = smoothness::feature_sweep(
        &data,
        &trainer,
        cfg.case,
        cfg.coordinate,
        &grid,
        &opts,
        cfg.threshold,
    )?;

    let mut metrics = CsvTable::new(["curve", "max_jump", "jumps_above"]);
    for c in &sweep.curves {
        let m = smoothness_metric(&c.values, FLAT_JUMP);
        metrics.push(vec![
            c.name.clone(),
            fmt_f64(m.max_jump),
            m.jumps_above.to_string(),
        ])?;
    }

    let mut written = Vec::new();
    write(out, "sweep.csv", &sweep.to_table(), &mut written)?;
    write(out, "smoothness.csv", &metrics, &mut written)?;
    write(out, "data.csv", &dataset_table(&data), &mut written)?;
    if cfg.classifier == ClassifierKind::Lda && cfg.surfaces > 0 {
        // Replicate b depends only on the seed and b, so a short ensemble
        // reproduces the sweep's first replicates.
        let head = EnsembleOptions {
            supplement_cases: false,
            supplement_pairs: false,
            ..EnsembleOptions::new(cfg.surfaces, cfg.seed)
        };
        let ens = ReplicateEnsemble::build(&data, &trainer, &head)?;
        let surfaces = smoothness::decision_surfaces(&data, &ens.replicates, cfg.surfaces)?;
        write(out, "surfaces.csv", &surfaces, &mut written)?;
    }
    Ok(written)
}

pub fn compare(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let report = harness::compare_classifiers(cfg)?;
    let mut written = Vec::new();
    write(
        out,
        "comparison_trials.csv",
        &report.trial_table(),
        &mut written,
    )?;
    write(
        out,
        "comparison_summary.csv",
        &report.summary_table(),
        &mut written,
    )?;
    Ok(written)
}

pub fn support_study(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let rows = harness::support_size_study(cfg, &cfg.sizes)?;
    let mut written = Vec::new();
    write(
        out,
        "support.csv",
        &harness::support_table(&rows),
        &mut written,
    )?;
    Ok(written)
}
