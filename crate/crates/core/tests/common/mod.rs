//! Dense Gaussian-process oracles written independently of the library's
//! sparse code paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SQRT5: f64 = 2.23606797749979;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matern(d: f64, rho: f64) -> f64 {
    let s = SQRT5 * d / rho;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

pub fn matern_drho(d: f64, rho: f64) -> f64 {
    let s = SQRT5 * d / rho;
    5.0 * d * d / (3.0 * rho.powi(3)) * (1.0 + s) * (-s).exp()
}

pub fn dist(a: &[f64], b: &[f64], active: &[usize]) -> f64 {
    active.iter().map(|&i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

pub fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// `𝓚 = (1-γ)I + γK` over the training rows.
pub fn corr_matrix(x: &DMatrix<f64>, active: &[usize], gamma: f64, rho: f64) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let k = matern(dist(&row(x, i), &row(x, j), active), rho);
        if i == j {
            1.0
        } else {
            gamma * k
        }
    })
}

pub fn corr_dgamma(x: &DMatrix<f64>, active: &[usize], rho: f64) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            matern(dist(&row(x, i), &row(x, j), active), rho)
        }
    })
}

pub fn corr_drho(x: &DMatrix<f64>, active: &[usize], gamma: f64, rho: f64) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| gamma * matern_drho(dist(&row(x, i), &row(x, j), active), rho))
}

pub fn columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

pub fn log_det(k: &DMatrix<f64>) -> f64 {
    let c = k.clone().cholesky().expect("SPD");
    c.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum()
}

pub fn solve(k: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let c = k.clone().cholesky().expect("SPD");
    c.solve(&DVector::from_column_slice(v)).as_slice().to_vec()
}

pub fn log_likelihood(y: &[f64], x: &DMatrix<f64>, beta: &[f64], sigma2: f64, k: &DMatrix<f64>) -> f64 {
    let n = y.len();
    let r: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let kr = solve(k, &r);
    let quad: f64 = r.iter().zip(&kr).map(|(a, b)| a * b).sum();
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln() - 0.5 * log_det(k) - quad / (2.0 * sigma2)
}

/// `Q = K⁻¹ - K⁻¹X(XᵀK⁻¹X)⁻¹XᵀK⁻¹`.
pub fn projector(xa: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    let kinv = k.clone().try_inverse().expect("invertible");
    let g = xa.transpose() * &kinv * xa;
    let ginv = g.try_inverse().expect("invertible");
    &kinv - &kinv * xa * ginv * xa.transpose() * &kinv
}

pub fn gls_s2(y: &[f64], xa: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let yv = DVector::from_column_slice(y);
    (yv.transpose() * projector(xa, k) * &yv)[(0, 0)]
}

/// Fisher matrix of the marginal experiment built from explicit dense
/// products.
pub fn fisher(xa: &DMatrix<f64>, k: &DMatrix<f64>, dk_rho: &DMatrix<f64>, dk_gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let q = projector(xa, k);
    let wr = dk_rho * &q;
    let wg = dk_gamma * &q;
    let n = k.nrows() - xa.ncols();
    let tr = |m: DMatrix<f64>| m.trace();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            n as f64,
            wr.trace(),
            wg.trace(),
            wr.trace(),
            tr(&wr * &wr),
            tr(&wr * &wg),
            wg.trace(),
            tr(&wg * &wr),
            tr(&wg * &wg),
        ],
    )
}

/// Classical GP conditional mean `uᵀβ + 𝓚_{u,S}𝓚_S⁻¹(y - Xβ)`.
pub fn predictive_mean(
    u: &[f64],
    x: &DMatrix<f64>,
    y: &[f64],
    beta: &[f64],
    active: &[usize],
    gamma: f64,
    rho: f64,
) -> f64 {
    let n = x.nrows();
    let k = corr_matrix(x, active, gamma, rho);
    let r: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let alpha = solve(&k, &r);
    let cross: Vec<f64> = (0..n)
        .map(|j| {
            let xj = row(x, j);
            let same = xj.iter().zip(u).all(|(a, b)| a == b);
            let nugget = if same { 1.0 - gamma } else { 0.0 };
            nugget + gamma * matern(dist(u, &xj, active), rho)
        })
        .collect();
    let trend: f64 = u.iter().zip(beta).map(|(a, b)| a * b).sum();
    trend + cross.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>()
}

pub fn random_design(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5))
}

pub fn random_subset(d: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() && s.len() <= max {
            return s;
        }
    }
}

/// `|a - b| <= tol · max(|a|, |b|)`, with an absolute floor of `tol · 1e-3`
/// for values near zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let diff = (a - b).abs();
    diff <= tol * a.abs().max(b.abs()) || diff <= tol * 1e-3
}

/// Batch-means standard error of the mean of `xs`.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

pub fn report(name: &str, ok: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}
