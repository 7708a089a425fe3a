//! Flat TOML run configurations. Unknown keys are rejected by name.

use std::path::Path;

use anyhow::{Context, Result};
use aucboot::harness::ExperimentConfig;
use aucboot::ClassifierKind;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub classifier: ClassifierKind,
    pub bootstraps: usize,
    pub seed: u64,
    pub threshold: f64,
    pub loocv: bool,
    pub lpob: bool,
    /// Also report the influence-function standard error of the LOOB error.
    pub influence: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierKind::Lda,
            bootstraps: 100,
            seed: 1,
            threshold: 0.0,
            loocv: true,
            lpob: true,
            influence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothnessConfig {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    pub bootstraps: usize,
    pub classifier: ClassifierKind,
    pub seed: u64,
    pub threshold: f64,
    /// Case whose feature is swept.
    pub case: usize,
    pub coordinate: usize,
    pub grid_points: usize,
    /// Half-width of the grid in standard deviations of the coordinate.
    pub grid_span: f64,
    /// Replicates whose decision surfaces are written out.
    pub surfaces: usize,
}

impl Default for SmoothnessConfig {
    fn default() -> Self {
        Self {
            p: 2,
            n1: 20,
            n2: 20,
            delta: 0.8,
            shift: None,
            bootstraps: 1000,
            classifier: ClassifierKind::Lda,
            seed: 1,
            threshold: 0.0,
            case: 0,
            coordinate: 0,
            grid_points: aucboot::smoothness::DEFAULT_GRID_POINTS,
            grid_span: aucboot::smoothness::DEFAULT_GRID_SPAN,
            surfaces: 5,
        }
    }
}

impl SmoothnessConfig {
    /// The data-generating part, in harness terms.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            p: self.p,
            n1: self.n1,
            n2: self.n2,
            delta: self.delta,
            shift: self.shift,
            bootstraps: self.bootstraps,
            classifier: self.classifier,
            seed: self.seed,
            threshold: self.threshold,
            trials: 1,
            ..ExperimentConfig::default()
        }
    }
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub bootstraps: Option<usize>,
    pub trials: Option<usize>,
}

pub trait RunConfig: Serialize + DeserializeOwned + Default {
    fn apply(&mut self, o: &Overrides) -> Result<()>;
    fn seed(&self) -> u64;
}

fn no_trials(o: &Overrides, command: &str) -> Result<()> {
    if o.trials.is_some() {
        anyhow::bail!("--trials does not apply to {command}");
    }
    Ok(())
}

impl RunConfig for ExperimentConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.bootstraps {
            self.bootstraps = b;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

impl RunConfig for EstimateConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        no_trials(o, "estimate")?;
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.bootstraps {
            self.bootstraps = b;
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

impl RunConfig for SmoothnessConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        no_trials(o, "smoothness")?;
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.bootstraps {
            self.bootstraps = b;
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

pub fn parse<T: RunConfig>(text: &str) -> Result<T> {
    Ok(toml::from_str(text)?)
}

/// Defaults, then the file (if any), then command-line overrides.
pub fn load<T: RunConfig>(path: Option<&Path>, overrides: &Overrides) -> Result<T> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            parse(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => T::default(),
    };
    cfg.apply(overrides)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = parse::<ExperimentConfig>("trials = 3\nbogus_field = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("bogus_field"));
    }

    #[test]
    fn overrides_win_over_file() {
        let mut c: ExperimentConfig = parse("seed = 3\nbootstraps = 7\n").unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            bootstraps: None,
            trials: Some(2),
        })
        .unwrap();
        assert_eq!((c.seed, c.bootstraps, c.trials), (9, 7, 2));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = SmoothnessConfig {
            shift: Some(0.5),
            ..Default::default()
        };
        let back: SmoothnessConfig = parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let e = ExperimentConfig::default();
        assert_eq!(
            parse::<ExperimentConfig>(&toml::to_string(&e).unwrap()).unwrap(),
            e
        );
    }

    #[test]
    fn trials_flag_rejected_where_meaningless() {
        let mut c = EstimateConfig::default();
        assert!(c
            .apply(&Overrides {
                trials: Some(3),
                ..Default::default()
            })
            .is_err());
    }
}
