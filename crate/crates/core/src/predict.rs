//! Posterior-predictive means and inclusion probabilities.
//!
//! For one posterior sample the NNGP conditional mean at a new point `u` is
//! `uᵀβ + b_u·(y - Xβ)_{N(u)}` with `b_u = 𝓚_{N(u)}⁻¹ 𝓚_{N(u),u}` and `N(u)`
//! the `m` training rows closest to `u` under `d_A`. The cross-covariance of
//! the process factors through `B_u`, so no n×n block is ever formed.
//! Predictions average this mean over the retained samples.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::covariance::corr_from_dist;
use crate::error::{Error, Result};
use crate::linalg::{point_distance, row_equals, row_vec, rows_distance};
use crate::mcmc::{Chain, Sample};
use crate::neighbors::test_neighbors;
use crate::nngp::residual;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub yhat: Vec<f64>,
    /// Number of posterior samples averaged.
    pub samples: usize,
}

/// Conditional mean at each row of `x_star` for a single posterior sample.
pub fn sample_mean(sample: &Sample, x_star: &DMatrix<f64>, y: &[f64], x: &DMatrix<f64>, m: usize) -> Result<Vec<f64>> {
    if x_star.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "test columns",
            expected: x.ncols(),
            got: x_star.ncols(),
        });
    }
    let active = &sample.active;
    let idx = active.indices();
    let r = residual(y, x, &sample.beta, active)?;
    let (gamma, rho) = (sample.gamma, sample.rho);
    let mut out = Vec::with_capacity(x_star.nrows());
    for row in 0..x_star.nrows() {
        let u = row_vec(x_star, row);
        let nbrs = test_neighbors(&u, x, active, m)?;
        let q = nbrs.len();
        let local = DMatrix::from_fn(q, q, |a, b| {
            corr_from_dist(rows_distance(x, nbrs[a], nbrs[b], idx), a == b, gamma, rho)
        });
        let cross = DVector::from_iterator(
            q,
            nbrs.iter()
                .map(|&j| corr_from_dist(point_distance(&u, x, j, idx), row_equals(&u, x, j), gamma, rho)),
        );
        let chol = local.cholesky().ok_or_else(|| {
            Error::Numerical(format!("neighbor correlation of test row {row} is not positive definite"))
        })?;
        let weights = chol.solve(&cross);
        let trend: f64 = idx.iter().map(|&a| u[a] * sample.beta[a]).sum();
        let krig: f64 = nbrs.iter().zip(weights.iter()).map(|(&j, w)| w * r[j]).sum();
        out.push(trend + krig);
    }
    Ok(out)
}

/// Running sum of per-sample means.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionAccumulator {
    sum: Vec<f64>,
    count: usize,
}

impl PredictionAccumulator {
    pub fn new(v: usize) -> Self {
        Self {
            sum: vec![0.0; v],
            count: 0,
        }
    }

    pub fn add(&mut self, mean: &[f64]) {
        for (s, m) in self.sum.iter_mut().zip(mean) {
            *s += m;
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &PredictionAccumulator) {
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        self.count += other.count;
    }

    pub fn finish(self) -> Result<PredictionResult> {
        if self.count == 0 {
            return Err(Error::InvalidInput("no posterior samples retained for prediction".into()));
        }
        let c = self.count as f64;
        Ok(PredictionResult {
            yhat: self.sum.into_iter().map(|s| s / c).collect(),
            samples: self.count,
        })
    }
}

/// Monte Carlo estimate of the posterior-predictive mean at the rows of
/// `x_star`, skipping `burn_in` samples and keeping every `thin`-th.
pub fn predict_mean(
    chain: &Chain,
    x_star: &DMatrix<f64>,
    y: &[f64],
    x: &DMatrix<f64>,
    m: usize,
    burn_in: usize,
    thin: usize,
) -> Result<PredictionResult> {
    let mut acc = PredictionAccumulator::new(x_star.nrows());
    for s in chain.retained(burn_in, thin) {
        acc.add(&sample_mean(s, x_star, y, x, m)?);
    }
    acc.finish()
}

/// Fraction of retained samples whose active set contains each predictor.
pub fn inclusion_probabilities(chain: &Chain, burn_in: usize) -> Result<Vec<f64>> {
    let d = chain.dim();
    let mut counts = vec![0usize; d];
    let mut total = 0usize;
    for s in chain.retained(burn_in, 1) {
        for &i in s.active.indices() {
            counts[i] += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(Error::InvalidInput("no posterior samples retained".into()));
    }
    Ok(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// Writes `row,yhat` with one-based row numbers.
pub fn write_predictions_csv<W: Write>(yhat: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "yhat"])?;
    for (i, v) in yhat.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ActiveSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(active: Vec<usize>, beta: Vec<f64>, gamma: f64, rho: f64) -> Sample {
        let d = beta.len();
        Sample {
            beta,
            sigma2: 1.0,
            gamma,
            rho,
            active: ActiveSet::new(active, d).unwrap(),
            accepted_selection: false,
            accepted_hmc: false,
        }
    }

    fn data(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0f64));
        let y = (0..n).map(|i| (2.0 * x[(i, 0)]).sin() + 0.5 * x[(i, d - 1)]).collect();
        let xs = DMatrix::from_fn(7, d, |_, _| rng.random_range(-1.0..1.0f64));
        (x, y, xs)
    }

    #[test]
    fn zero_residual_gives_linear_trend() {
        let (x, _, xs) = data(12, 3, 1);
        let beta = vec![0.5, 0.0, -2.0];
        let y: Vec<f64> = (0..12).map(|i| 0.5 * x[(i, 0)] - 2.0 * x[(i, 2)]).collect();
        let chain = Chain {
            samples: vec![sample(vec![0, 2], beta.clone(), 0.8, 0.6)],
            burn_in: 0,
        };
        let p = predict_mean(&chain, &xs, &y, &x, 5, 0, 1).unwrap();
        for (i, v) in p.yhat.iter().enumerate() {
            let expected = 0.5 * xs[(i, 0)] - 2.0 * xs[(i, 2)];
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn full_neighborhood_matches_dense_kriging() {
        let (x, y, xs) = data(10, 2, 2);
        let s = sample(vec![0, 1], vec![0.3, 0.0], 0.7, 0.9);
        let got = sample_mean(&s, &xs, &y, &x, 10).unwrap();
        let a = &s.active;
        let k = DMatrix::from_fn(10, 10, |i, j| {
            corr_from_dist(rows_distance(&x, i, j, a.indices()), i == j, 0.7, 0.9)
        });
        let r = DVector::from_iterator(10, (0..10).map(|i| y[i] - 0.3 * x[(i, 0)]));
        let alpha = k.cholesky().unwrap().solve(&r);
        for u in 0..7 {
            let urow = row_vec(&xs, u);
            let kx = DVector::from_iterator(10, (0..10).map(|j| corr_from_dist(point_distance(&urow, &x, j, a.indices()), false, 0.7, 0.9)));
            let expected = 0.3 * urow[0] + kx.dot(&alpha);
            assert!((got[u] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn predictions_are_affine_in_y() {
        let (x, y1, xs) = data(15, 3, 3);
        let y2: Vec<f64> = (0..15).map(|i| x[(i, 1)].cos()).collect();
        let chain = Chain {
            samples: vec![
                sample(vec![0], vec![0.4, 0.0, 0.0], 0.6, 0.5),
                sample(vec![1, 2], vec![0.0, -0.3, 0.2], 0.9, 1.1),
            ],
            burn_in: 0,
        };
        let a = 0.3;
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + (1.0 - a) * v).collect();
        let p1 = predict_mean(&chain, &xs, &y1, &x, 4, 0, 1).unwrap().yhat;
        let p2 = predict_mean(&chain, &xs, &y2, &x, 4, 0, 1).unwrap().yhat;
        let pm = predict_mean(&chain, &xs, &mix, &x, 4, 0, 1).unwrap().yhat;
        for i in 0..xs.nrows() {
            assert!((pm[i] - (a * p1[i] + (1.0 - a) * p2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn chunked_accumulation_matches_single_pass() {
        let (x, y, xs) = data(14, 2, 4);
        let samples: Vec<Sample> = (0..6)
            .map(|i| sample(vec![i % 2], if i % 2 == 0 { vec![0.1 * i as f64, 0.0] } else { vec![0.0, -0.2] }, 0.5 + 0.05 * i as f64, 0.7))
            .collect();
        let chain = Chain { samples: samples.clone(), burn_in: 0 };
        let whole = predict_mean(&chain, &xs, &y, &x, 4, 0, 1).unwrap();
        let mut a = PredictionAccumulator::new(xs.nrows());
        let mut b = PredictionAccumulator::new(xs.nrows());
        for (i, s) in samples.iter().enumerate() {
            let m = sample_mean(s, &xs, &y, &x, 4).unwrap();
            if i < 2 { a.add(&m) } else { b.add(&m) }
        }
        a.merge(&b);
        let chunked = a.finish().unwrap();
        assert_eq!(chunked.samples, 6);
        for i in 0..xs.nrows() {
            assert!((chunked.yhat[i] - whole.yhat[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn training_point_interpolation_tightens_with_gamma() {
        let x = DMatrix::from_column_slice(6, 1, &[0.0, 0.4, 0.9, 1.5, 2.2, 3.0]);
        let y = vec![0.3, -0.5, 1.2, 0.8, -0.9, 0.1];
        let u = DMatrix::from_column_slice(1, 1, &[0.9 + 1e-3]);
        let mut last = f64::INFINITY;
        for gamma in [0.5, 0.7, 0.9, 0.99, 0.999] {
            let s = sample(vec![0], vec![0.0], gamma, 0.8);
            let gap = (sample_mean(&s, &u, &y, &x, 6).unwrap()[0] - y[2]).abs();
            assert!(gap < last, "gamma {gamma}: {gap} >= {last}");
            last = gap;
        }
        let exact = DMatrix::from_column_slice(1, 1, &[0.9]);
        let s = sample(vec![0], vec![0.0], 0.6, 0.8);
        assert!((sample_mean(&s, &exact, &y, &x, 3).unwrap()[0] - y[2]).abs() < 1e-12);
    }

    #[test]
    fn inclusion_frequencies() {
        let s = |a: Vec<usize>| sample(a, vec![0.0; 5], 0.5, 1.0);
        let chain = Chain {
            samples: vec![s(vec![2]), s(vec![2, 4]), s(vec![0, 2]), s(vec![2, 3])],
            burn_in: 0,
        };
        let p = inclusion_probabilities(&chain, 0).unwrap();
        assert_eq!(p, vec![0.25, 0.0, 1.0, 0.25, 0.25]);
        assert!(inclusion_probabilities(&chain, 4).is_err());
        let (x, y, xs) = data(6, 5, 5);
        assert!(predict_mean(&chain, &xs, &y, &x, 3, 4, 1).is_err());
    }

    #[test]
    fn prediction_csv_layout() {
        let mut buf = Vec::new();
        write_predictions_csv(&[1.5, -0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,yhat\n1,1.5\n2,-0.25\n");
    }
}
