//! Active-set distance, the Matérn-5/2 kernel and the nugget-mixed
//! correlation `𝓚(x, x') = δ(x = x')(1 - γ) + γ K(d_A(x, x'), ρ)`.
//!
//! Distances and ranges are in the units of the (already standardized)
//! predictors; nothing here rescales.

use std::fmt;

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Sorted set of distinct, zero-based predictor indices with `1 <= len <= d`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ActiveSet {
    indices: Vec<usize>,
    d: usize,
}

impl ActiveSet {
    pub fn new(mut indices: Vec<usize>, d: usize) -> Result<Self> {
        indices.sort_unstable();
        let len = indices.len();
        indices.dedup();
        if indices.len() != len {
            return Err(Error::InvalidInput("active set contains duplicates".into()));
        }
        if indices.is_empty() {
            return Err(Error::InvalidInput("active set must not be empty".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= d {
                return Err(Error::InvalidInput(format!(
                    "active index {last} out of range for d = {d}"
                )));
            }
        }
        Ok(Self { indices, d })
    }

    /// All predictors `{0, .., d-1}`.
    pub fn full(d: usize) -> Result<Self> {
        Self::new((0..d).collect(), d)
    }

    pub fn singleton(index: usize, d: usize) -> Result<Self> {
        Self::new(vec![index], d)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Total number of predictors.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// The set with `index` added if absent or removed if present.
    /// Fails if the result would be empty.
    pub fn toggled(&self, index: usize) -> Result<Self> {
        let mut indices = self.indices.clone();
        match indices.binary_search(&index) {
            Ok(pos) => {
                indices.remove(pos);
            }
            Err(pos) => indices.insert(pos, index),
        }
        Self::new(indices, self.d)
    }

    /// Number of indices in the symmetric difference.
    pub fn symmetric_difference_len(&self, other: &ActiveSet) -> usize {
        let a = &self.indices;
        let b = &other.indices;
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    count += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    count += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        count + (a.len() - i) + (b.len() - j)
    }
}

impl fmt::Debug for ActiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActiveSet({:?} of {})", self.indices, self.d)
    }
}

/// Process variance `σ²`, signal fraction `γ` and range `ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceParams {
    pub sigma2: f64,
    pub gamma: f64,
    pub rho: f64,
}

impl CovarianceParams {
    pub fn new(sigma2: f64, gamma: f64, rho: f64) -> Result<Self> {
        let p = Self { sigma2, gamma, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        validate_corr_params(self.gamma, self.rho)
    }

    /// Variance of the smooth component, `γσ²`.
    pub fn signal_variance(&self) -> f64 {
        self.gamma * self.sigma2
    }

    /// Variance of the i.i.d. noise, `(1-γ)σ²`.
    pub fn noise_variance(&self) -> f64 {
        (1.0 - self.gamma) * self.sigma2
    }
}

pub(crate) fn validate_corr_params(gamma: f64, rho: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Euclidean distance restricted to the coordinates in `active`.
pub fn active_distance(x1: &[f64], x2: &[f64], active: &ActiveSet) -> Result<f64> {
    check_len("x1", active.dim(), x1.len())?;
    check_len("x2", active.dim(), x2.len())?;
    Ok(active_distance_unchecked(x1, x2, active.indices()))
}

pub(crate) fn active_distance_unchecked(x1: &[f64], x2: &[f64], indices: &[usize]) -> f64 {
    indices
        .iter()
        .map(|&i| {
            let diff = x1[i] - x2[i];
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

fn check_dist(dist: f64) -> Result<()> {
    if !(dist >= 0.0) {
        return Err(Error::Domain(format!("distance must be nonnegative, got {dist}")));
    }
    Ok(())
}

/// Matérn-5/2 correlation `(1 + √5 r/ρ + 5r²/(3ρ²)) exp(-√5 r/ρ)`.
pub fn matern52(dist: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    check_dist(dist)?;
    Ok(matern(dist, rho))
}

/// `∂K/∂ρ` of [`matern52`].
pub fn matern52_drho(dist: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    check_dist(dist)?;
    Ok(matern_drho(dist, rho))
}

#[inline]
pub(crate) fn matern(dist: f64, rho: f64) -> f64 {
    let s = SQRT5 * dist / rho;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[inline]
pub(crate) fn matern_drho(dist: f64, rho: f64) -> f64 {
    matern_with_drho(dist, rho).1
}

/// `(K, ∂K/∂ρ)` sharing one exponential; `∂K/∂ρ = (5r²/(3ρ³))(1 + s)e^{-s}`
/// with `s = √5 r/ρ`.
#[inline]
pub(crate) fn matern_with_drho(dist: f64, rho: f64) -> (f64, f64) {
    let s = SQRT5 * dist / rho;
    let e = (-s).exp();
    let k = (1.0 + s + s * s / 3.0) * e;
    let dk = s * s / (3.0 * rho) * (1.0 + s) * e;
    (k, dk)
}

/// Correlation between two points given their active distance and whether
/// they are the same measurement.
#[inline]
pub(crate) fn corr_from_dist(dist: f64, same: bool, gamma: f64, rho: f64) -> f64 {
    let nugget = if same { 1.0 - gamma } else { 0.0 };
    nugget + gamma * matern(dist, rho)
}

/// `(∂𝓚/∂ρ, ∂𝓚/∂γ)` given the active distance and the identity flag.
#[inline]
pub(crate) fn corr_grad_from_dist(dist: f64, same: bool, gamma: f64, rho: f64) -> (f64, f64) {
    let (k, dk) = matern_with_drho(dist, rho);
    (gamma * dk, k - if same { 1.0 } else { 0.0 })
}

fn identical(x1: &[f64], x2: &[f64]) -> bool {
    x1.iter().zip(x2).all(|(a, b)| a == b)
}

/// Nugget-mixed correlation between two coordinate vectors. The nugget is
/// attached when the vectors are identical in every coordinate (not merely
/// at distance zero under `d_A`).
pub fn corr(x1: &[f64], x2: &[f64], gamma: f64, rho: f64, active: &ActiveSet) -> Result<f64> {
    validate_corr_params(gamma, rho)?;
    let dist = active_distance(x1, x2, active)?;
    Ok(corr_from_dist(dist, identical(x1, x2), gamma, rho))
}

/// `∂𝓚/∂γ = K(d_A, ρ) - δ(x1 = x2)`.
pub fn corr_dgamma(x1: &[f64], x2: &[f64], rho: f64, active: &ActiveSet) -> Result<f64> {
    check_rho(rho)?;
    let dist = active_distance(x1, x2, active)?;
    Ok(corr_grad_from_dist(dist, identical(x1, x2), 0.5, rho).1)
}

/// `∂𝓚/∂ρ = γ ∂K/∂ρ`.
pub fn corr_drho(x1: &[f64], x2: &[f64], gamma: f64, rho: f64, active: &ActiveSet) -> Result<f64> {
    validate_corr_params(gamma, rho)?;
    let dist = active_distance(x1, x2, active)?;
    Ok(corr_grad_from_dist(dist, identical(x1, x2), gamma, rho).0)
}
