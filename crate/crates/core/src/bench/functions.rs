//! Test functions and synthetic data generators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::dataset::{Dataset, StandardizeOptions};
use super::design::maximin_lhd;
use crate::error::{Error, Result};

/// `4(x₁ - 2 + 8x₂ - 8x₂²)² + (3 - 4x₂)² + 16√(x₃ + 1)(2x₃ - 1)²` on `[0, 1]³`.
pub fn pepelyshev(x: &[f64]) -> Result<f64> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch {
            what: "Pepelyshev input",
            expected: 3,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!("Pepelyshev input {x:?} outside [0, 1]³")));
    }
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let a = x1 - 2.0 + 8.0 * x2 - 8.0 * x2 * x2;
    let b = 3.0 - 4.0 * x2;
    let c = 2.0 * x3 - 1.0;
    Ok(4.0 * a * a + b * b + 16.0 * (x3 + 1.0).sqrt() * c * c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PepelyshevConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Total predictors; all but the first three are inert.
    pub d_total: usize,
    pub lhd_restarts: usize,
}

impl Default for PepelyshevConfig {
    fn default() -> Self {
        Self {
            n_train: 31,
            n_test: 100,
            d_total: 20,
            lhd_restarts: 20,
        }
    }
}

fn pepelyshev_on(design: DMatrix<f64>) -> Result<Dataset> {
    let y = (0..design.nrows())
        .map(|i| pepelyshev(&[design[(i, 0)], design[(i, 1)], design[(i, 2)]]))
        .collect::<Result<Vec<_>>>()?;
    Dataset::with_default_names(design, y)
}

/// Training and test sets on independent maximin LHDs, both in raw units.
pub fn pepelyshev_raw(config: &PepelyshevConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    if config.d_total < 3 {
        return Err(Error::InvalidInput("the Pepelyshev function needs at least 3 inputs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = maximin_lhd(config.n_train, config.d_total, rng.random(), config.lhd_restarts)?;
    let test = maximin_lhd(config.n_test, config.d_total, rng.random(), config.lhd_restarts)?;
    Ok((pepelyshev_on(train)?, pepelyshev_on(test)?))
}

/// As [`pepelyshev_raw`], then both sets standardized (predictors and
/// target) with the training means and standard deviations.
pub fn pepelyshev_dataset(config: &PepelyshevConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = pepelyshev_raw(config, seed)?;
    let step = train.fit_scaling(StandardizeOptions::all());
    Ok((train.transformed(&step)?, test.transformed(&step)?))
}

/// `y = sin(x₃) + sin(5x₄) + ε` with correlated Gaussian predictors.
#[derive(Clone, Debug, PartialEq)]
pub struct SineSimConfig {
    pub n: usize,
    pub noise_variance: f64,
    covariance: DMatrix<f64>,
    cholesky_l: DMatrix<f64>,
}

impl SineSimConfig {
    /// Twenty predictors with unit variances, correlations 0.4 for
    /// (x₃, x₁₃) and (x₄, x₁₄), 0.3 for (x₃, x₁₂) and (x₄, x₁₅), and noise
    /// variance 0.0025.
    pub fn new(n: usize) -> Result<Self> {
        let mut s = DMatrix::<f64>::identity(20, 20);
        for (i, j, v) in [(3, 13, 0.4), (3, 12, 0.3), (4, 14, 0.4), (4, 15, 0.3)] {
            s[(i - 1, j - 1)] = v;
            s[(j - 1, i - 1)] = v;
        }
        Self::with_covariance(n, s, 0.0025)
    }

    pub fn with_covariance(n: usize, covariance: DMatrix<f64>, noise_variance: f64) -> Result<Self> {
        if covariance.ncols() < 4 || covariance.nrows() != covariance.ncols() {
            return Err(Error::InvalidInput("predictor covariance must be square with at least 4 columns".into()));
        }
        if covariance != covariance.transpose() {
            return Err(Error::InvalidInput("predictor covariance must be symmetric".into()));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("predictor covariance is not positive definite".into()))?;
        if !(noise_variance >= 0.0) || n < 2 {
            return Err(Error::InvalidInput("need n >= 2 and a nonnegative noise variance".into()));
        }
        Ok(Self {
            n,
            noise_variance,
            cholesky_l: chol.l(),
            covariance,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn d(&self) -> usize {
        self.covariance.ncols()
    }
}

/// Draws the raw (unstandardized) sample.
pub fn simulate_sine_raw(config: &SineSimConfig, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.d();
    let mut x = DMatrix::zeros(config.n, d);
    let mut y = Vec::with_capacity(config.n);
    let noise_sd = config.noise_variance.sqrt();
    for i in 0..config.n {
        let z = nalgebra::DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let row = &config.cholesky_l * z;
        x.row_mut(i).copy_from(&row.transpose());
        let eps: f64 = rng.sample(StandardNormal);
        y.push(row[2].sin() + (5.0 * row[3]).sin() + noise_sd * eps);
    }
    Dataset::with_default_names(x, y)
}

/// Simulated sample with predictors standardized and the target centered
/// and scaled.
pub fn simulate_sine(config: &SineSimConfig, seed: u64) -> Result<Dataset> {
    Ok(simulate_sine_raw(config, seed)?.standardize(StandardizeOptions::all()))
}
