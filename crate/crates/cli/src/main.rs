//! `aucboot`: bootstrap estimates of classifier error rate and AUC, and the
//! Monte-Carlo experiments that compare them.
//!
//! Every run writes its CSV outputs plus `manifest.toml`, which records the
//! resolved configuration and is enough to re-run the command with
//! `aucboot rerun --manifest <file>`.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use aucboot::harness::ExperimentConfig;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::{EstimateConfig, Overrides, RunConfig, SmoothnessConfig};

#[derive(Parser)]
#[command(
    name = "aucboot",
    version,
    about = "Bootstrap estimators of classifier error rate and AUC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML file of run settings; unset keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of bootstrap replicates.
    #[arg(long = "B", value_name = "B", global = true)]
    bootstraps: Option<usize>,

    /// Number of Monte-Carlo trials.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Directory receiving the CSV outputs and the manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Apply every estimator to a labeled dataset (header, then `label,x1..xp`).
    Estimate { dataset: PathBuf },
    /// Monte-Carlo comparison of the estimators against the true conditional performance.
    Simulate,
    /// Sweep one feature of one case and trace the estimators.
    Smoothness,
    /// Compare two classifiers by true and estimated AUC.
    Compare,
    /// True AUC at n against AUC(*) at n/.632 and n/.5.
    SupportStudy,
    /// Re-run a previous command from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunManifest {
    command: String,
    version: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<PathBuf>,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
    config: toml::Table,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring worker threads")?;
    }
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let overrides = Overrides {
        seed: cli.seed,
        bootstraps: cli.bootstraps,
        trials: cli.trials,
    };
    let cfg_path = cli.config.as_deref();
    match &cli.command {
        Command::Estimate { dataset } => {
            let dataset = std::fs::canonicalize(dataset)
                .with_context(|| format!("dataset {}", dataset.display()))?;
            let cfg: EstimateConfig = config::load(cfg_path, &overrides)?;
            run("estimate", &cfg, Some(&dataset), &cli.out_dir, |c, out| {
                commands::estimate(&dataset, c, out)
            })
        }
        Command::Simulate => run_experiment(
            "simulate",
            cfg_path,
            &overrides,
            &cli.out_dir,
            commands::simulate,
        ),
        Command::Compare => run_experiment(
            "compare",
            cfg_path,
            &overrides,
            &cli.out_dir,
            commands::compare,
        ),
        Command::SupportStudy => run_experiment(
            "support-study",
            cfg_path,
            &overrides,
            &cli.out_dir,
            commands::support_study,
        ),
        Command::Smoothness => {
            let cfg: SmoothnessConfig = config::load(cfg_path, &overrides)?;
            run("smoothness", &cfg, None, &cli.out_dir, commands::smoothness)
        }
        Command::Rerun { manifest } => {
            if cli.config.is_some()
                || cli.seed.is_some()
                || cli.bootstraps.is_some()
                || cli.trials.is_some()
            {
                bail!(
                    "rerun takes its settings from the manifest; drop --config/--seed/--B/--trials"
                );
            }
            rerun(manifest, &cli.out_dir)
        }
    }
}

fn run_experiment(
    name: &str,
    path: Option<&Path>,
    overrides: &Overrides,
    out: &Path,
    body: fn(&ExperimentConfig, &Path) -> Result<Vec<String>>,
) -> Result<()> {
    let cfg: ExperimentConfig = config::load(path, overrides)?;
    cfg.validate()?;
    run(name, &cfg, None, out, body)
}

fn run<C: RunConfig>(
    name: &str,
    cfg: &C,
    dataset: Option<&Path>,
    out: &Path,
    body: impl FnOnce(&C, &Path) -> Result<Vec<String>>,
) -> Result<()> {
    let start = Instant::now();
    let outputs = body(cfg, out)?;
    let manifest = RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed(),
        dataset: dataset.map(Path::to_path_buf),
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config: toml::Table::try_from(cfg).context("serializing config")?,
    };
    let text = toml::to_string(&manifest).context("serializing manifest")?;
    aucboot::table::write_atomic(&out.join(MANIFEST), text.as_bytes())?;
    for f in &manifest.outputs {
        println!("{}", out.join(f).display());
    }
    Ok(())
}

fn typed<C: RunConfig>(m: &RunManifest) -> Result<C> {
    toml::Value::Table(m.config.clone())
        .try_into()
        .context("manifest config")
}

fn rerun(path: &Path, out: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: RunManifest =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, running {}",
            m.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    match m.command.as_str() {
        "estimate" => {
            let dataset = m
                .dataset
                .clone()
                .context("estimate manifest has no dataset path")?;
            let cfg: EstimateConfig = typed(&m)?;
            run("estimate", &cfg, Some(&dataset), out, |c, o| {
                commands::estimate(&dataset, c, o)
            })
        }
        "simulate" => run(
            "simulate",
            &typed::<ExperimentConfig>(&m)?,
            None,
            out,
            commands::simulate,
        ),
        "compare" => run(
            "compare",
            &typed::<ExperimentConfig>(&m)?,
            None,
            out,
            commands::compare,
        ),
        "support-study" => run(
            "support-study",
            &typed::<ExperimentConfig>(&m)?,
            None,
            out,
            commands::support_study,
        ),
        "smoothness" => run(
            "smoothness",
            &typed::<SmoothnessConfig>(&m)?,
            None,
            out,
            commands::smoothness,
        ),
        other => bail!("unknown command {other:?} in manifest"),
    }
}
