//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use vsnngp::bench::FitSettings;
use vsnngp::mcmc::HmcConfig;
use vsnngp::selection::SizeWeight;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Training CSV (header row, all numeric).
    pub data: Option<PathBuf>,
    pub target: String,
    pub output_dir: PathBuf,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Neighbors per row.
    pub m: usize,
    pub p_h: f64,
    pub epsilon: f64,
    pub leapfrog_steps: usize,
    pub mass_rho: f64,
    pub mass_gamma: f64,
    /// `reciprocal` or `tbinom3`.
    pub size_weight: String,
    /// Center and scale predictors and target before fitting.
    pub standardize: bool,
    /// Folds for `bench sine`.
    pub folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            target: "y".into(),
            output_dir: PathBuf::from("out"),
            iterations: 6000,
            burn_in: 1000,
            thin: 1,
            seed: 1,
            m: 10,
            p_h: 0.6,
            epsilon: 0.3,
            leapfrog_steps: 2,
            mass_rho: 1.0,
            mass_gamma: 1.0,
            size_weight: "reciprocal".into(),
            standardize: true,
            folds: 5,
        }
    }
}

/// Flags that override config-file values.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML config file; flags below take precedence over it.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub target: Option<String>,
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub thin: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub p_h: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub leapfrog_steps: Option<usize>,
    #[arg(long, global = true)]
    pub mass_rho: Option<f64>,
    #[arg(long, global = true)]
    pub mass_gamma: Option<f64>,
    #[arg(long, global = true)]
    pub size_weight: Option<String>,
    /// Fit on the raw scale.
    #[arg(long, global = true)]
    pub no_standardize: bool,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident, $($field:ident),*) => {
        $(if let Some(v) = $ov.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Core(vsnngp::Error::FileNotFound(path.display().to_string())),
            _ => CliError::Core(e.into()),
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(ov: &Overrides) -> CliResult<Self> {
        let mut cfg = match &ov.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if ov.data.is_some() {
            cfg.data = ov.data.clone();
        }
        apply!(
            cfg, ov, target, output_dir, iterations, burn_in, thin, seed, m, p_h, epsilon, leapfrog_steps, mass_rho,
            mass_gamma, size_weight, folds
        );
        if ov.no_standardize {
            cfg.standardize = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return bad(format!(
                "need iterations > burn_in, got {} and {}",
                self.iterations, self.burn_in
            ));
        }
        if self.thin == 0 || self.m == 0 || self.folds < 2 {
            return bad("thin and m must be at least 1 and folds at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.p_h) {
            return bad(format!("p_h must lie in [0, 1], got {}", self.p_h));
        }
        self.size_weight()?;
        self.hmc().validate()?;
        Ok(())
    }

    pub fn size_weight(&self) -> CliResult<SizeWeight> {
        Ok(self.size_weight.parse()?)
    }

    pub fn hmc(&self) -> HmcConfig {
        HmcConfig {
            epsilon: self.epsilon,
            steps: self.leapfrog_steps,
            mass_rho: self.mass_rho,
            mass_gamma: self.mass_gamma,
            ..Default::default()
        }
    }

    pub fn fit_settings(&self) -> CliResult<FitSettings> {
        Ok(FitSettings {
            m: self.m,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            p_h: self.p_h,
            size_weight: self.size_weight()?,
            hmc: self.hmc(),
        })
    }

    pub fn data_path(&self) -> CliResult<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Config("no training data given (set `data` or pass --data)".into()))
    }

    /// Writes the resolved configuration next to the run's outputs.
    pub fn echo(&self, dir: &Path) -> CliResult<()> {
        let text = toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(dir.join("config.toml"), text).map_err(vsnngp::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "iterations = 300\nburn_in = 100\nepsilon = 0.2\nsize_weight = \"tbinom3\"\n").unwrap();
        let ov = Overrides {
            config: Some(path),
            epsilon: Some(0.4),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&ov).unwrap();
        assert_eq!((cfg.iterations, cfg.burn_in, cfg.m), (300, 100, 10));
        assert_eq!(cfg.epsilon, 0.4);
        assert_eq!(cfg.size_weight().unwrap(), SizeWeight::TruncBinomCubed);
    }

    #[test]
    fn echo_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            data: Some("train.csv".into()),
            seed: 42,
            ..Default::default()
        };
        cfg.echo(dir.path()).unwrap();
        assert_eq!(RunConfig::from_file(&dir.path().join("config.toml")).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["burn_in = 7000", "p_h = 1.5", "epsilon = -1.0", "size_weight = \"flat\"", "unknown = 1"] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("bad.toml");
            std::fs::write(&path, text).unwrap();
            let ov = Overrides {
                config: Some(path),
                ..Default::default()
            };
            let err = RunConfig::resolve(&ov).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}
