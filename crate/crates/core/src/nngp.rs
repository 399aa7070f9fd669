//! Sparse NNGP factorization of the training correlation matrix.
//!
//! For row `i` with neighbor set `N(i)` the factors hold
//!
//! ```text
//! b_i = 𝓚_{N(i)}⁻¹ 𝓚_{N(i),i}        f_i = 1 - b_i · 𝓚_{N(i),i}
//! ```
//!
//! which define the unit lower-triangular `B` (row `i` is `e_i - b_i` placed on
//! the columns `N(i)`) and `F = diag(f)`, with `𝓚̃ = B⁻¹ F B⁻ᵀ`. The factors do
//! not depend on `σ²`. Every operation here except [`dktilde`] and
//! [`NngpFactors::dense_ktilde`] runs in `O(n·m)` or `O(n·m³)` without forming
//! an `n×n` matrix.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::covariance::{matern_with_drho, validate_corr_params, ActiveSet, CovarianceParams};
use crate::error::{Error, Result};
use crate::linalg::rows_distance;
use crate::neighbors::NeighborGraph;

/// Conditional variances below this are reported as a conditioning failure.
pub const MIN_COND_VAR: f64 = 1e-12;

/// Correlation parameter with respect to which a derivative is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrParam {
    Rho,
    Gamma,
}

impl CorrParam {
    fn slot(self) -> usize {
        match self {
            CorrParam::Rho => 0,
            CorrParam::Gamma => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NngpFactors {
    weights: Vec<Vec<f64>>,
    cond_var: Vec<f64>,
    graph: Arc<NeighborGraph>,
    gamma: f64,
    rho: f64,
}

/// Derivatives of the rows `b_i` and of `f_i` with respect to `ρ` and `γ`.
#[derive(Clone, Debug)]
pub struct FactorDerivatives {
    d_weights: [Vec<Vec<f64>>; 2],
    d_cond_var: [Vec<f64>; 2],
}

struct LocalRow {
    weights: Vec<f64>,
    cond_var: f64,
    grads: Option<[(Vec<f64>, f64); 2]>,
}

fn local_row(
    x: &DMatrix<f64>,
    i: usize,
    nbrs: &[usize],
    idx: &[usize],
    gamma: f64,
    rho: f64,
    with_grads: bool,
) -> Result<LocalRow> {
    let q = nbrs.len();
    if q == 0 {
        return Ok(LocalRow {
            weights: Vec::new(),
            cond_var: 1.0,
            grads: with_grads.then(|| [(Vec::new(), 0.0), (Vec::new(), 0.0)]),
        });
    }
    // kernel values and ρ-derivatives, one exponential per pair
    let mut kern = DMatrix::<f64>::identity(q, q);
    let mut dkern = DMatrix::<f64>::zeros(q, q);
    for a in 0..q {
        for b in 0..a {
            let (k, dk) = matern_with_drho(rows_distance(x, nbrs[a], nbrs[b], idx), rho);
            kern[(a, b)] = k;
            kern[(b, a)] = k;
            dkern[(a, b)] = dk;
            dkern[(b, a)] = dk;
        }
    }
    let (cross_k, cross_dk): (Vec<f64>, Vec<f64>) =
        nbrs.iter().map(|&j| matern_with_drho(rows_distance(x, i, j, idx), rho)).unzip();

    // Neighbors are distinct training rows, so the nugget sits on the diagonal only.
    let mut local = &kern * gamma;
    local.fill_diagonal(1.0);
    let cross = DVector::from_iterator(q, cross_k.iter().map(|k| gamma * k));
    let chol = local.cholesky().ok_or(Error::Conditioning {
        row: i,
        value: f64::NAN,
    })?;
    let weights = chol.solve(&cross);
    let cond_var = 1.0 - weights.dot(&cross);
    if !(cond_var > MIN_COND_VAR) {
        return Err(Error::Conditioning { row: i, value: cond_var });
    }

    let grads = if with_grads {
        // ∂/∂ρ: γ·∂K/∂ρ off the diagonal. ∂/∂γ: K off the diagonal, 0 on it.
        let mut d_gamma_local = kern;
        d_gamma_local.fill_diagonal(0.0);
        let pairs = [
            (dkern * gamma, DVector::from_iterator(q, cross_dk.iter().map(|d| gamma * d))),
            (d_gamma_local, DVector::from_vec(cross_k)),
        ];
        let mut out: [(Vec<f64>, f64); 2] = [(Vec::new(), 0.0), (Vec::new(), 0.0)];
        for (grad, (d_local, d_cross)) in out.iter_mut().zip(pairs) {
            let rhs = &d_cross - &d_local * &weights;
            let d_weights = chol.solve(&rhs);
            // ∂𝓚_ii = 0 for both parameters
            let d_cond = -(d_weights.dot(&cross) + weights.dot(&d_cross));
            *grad = (d_weights.as_slice().to_vec(), d_cond);
        }
        Some(out)
    } else {
        None
    };

    Ok(LocalRow {
        weights: weights.as_slice().to_vec(),
        cond_var,
        grads,
    })
}

fn check_graph(x: &DMatrix<f64>, active: &ActiveSet, graph: &NeighborGraph) -> Result<()> {
    if graph.active() != active {
        return Err(Error::InvalidInput("neighbor graph was built for a different active set".into()));
    }
    if graph.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "neighbor graph rows",
            expected: x.nrows(),
            got: graph.len(),
        });
    }
    Ok(())
}

fn build(
    x: &DMatrix<f64>,
    active: &ActiveSet,
    gamma: f64,
    rho: f64,
    graph: &Arc<NeighborGraph>,
    with_grads: bool,
) -> Result<(NngpFactors, Option<FactorDerivatives>)> {
    validate_corr_params(gamma, rho)?;
    check_graph(x, active, graph)?;
    let n = x.nrows();
    let idx = active.indices();
    let mut weights = Vec::with_capacity(n);
    let mut cond_var = Vec::with_capacity(n);
    let mut d_weights = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut d_cond_var = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let row = local_row(x, i, graph.neighbors(i), idx, gamma, rho, with_grads)?;
        weights.push(row.weights);
        cond_var.push(row.cond_var);
        if let Some(grads) = row.grads {
            for (slot, (dw, df)) in grads.into_iter().enumerate() {
                d_weights[slot].push(dw);
                d_cond_var[slot].push(df);
            }
        }
    }
    let factors = NngpFactors {
        weights,
        cond_var,
        graph: Arc::clone(graph),
        gamma,
        rho,
    };
    let derivs = with_grads.then_some(FactorDerivatives { d_weights, d_cond_var });
    Ok((factors, derivs))
}

/// Builds `(B, F)` for correlation parameters `(γ, ρ)` on the rows of `x`.
pub fn build_factors(
    x: &DMatrix<f64>,
    active: &ActiveSet,
    gamma: f64,
    rho: f64,
    graph: &Arc<NeighborGraph>,
) -> Result<NngpFactors> {
    build(x, active, gamma, rho, graph, false).map(|(f, _)| f)
}

/// Like [`build_factors`], also returning the row derivatives w.r.t. `ρ` and `γ`.
pub fn build_factors_with_derivatives(
    x: &DMatrix<f64>,
    active: &ActiveSet,
    gamma: f64,
    rho: f64,
    graph: &Arc<NeighborGraph>,
) -> Result<(NngpFactors, FactorDerivatives)> {
    build(x, active, gamma, rho, graph, true).map(|(f, d)| (f, d.expect("derivatives requested")))
}

impl NngpFactors {
    pub fn n(&self) -> usize {
        self.cond_var.len()
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn cond_var(&self, i: usize) -> f64 {
        self.cond_var[i]
    }

    pub fn cond_vars(&self) -> &[f64] {
        &self.cond_var
    }

    pub fn graph(&self) -> &Arc<NeighborGraph> {
        &self.graph
    }

    pub fn active(&self) -> &ActiveSet {
        self.graph.active()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Exact (bitwise) match of the generating active set and parameters.
    pub fn matches(&self, active: &ActiveSet, gamma: f64, rho: f64) -> bool {
        self.gamma.to_bits() == gamma.to_bits() && self.rho.to_bits() == rho.to_bits() && self.active() == active
    }

    pub fn ensure_matches(&self, active: &ActiveSet, gamma: f64, rho: f64) -> Result<()> {
        if self.matches(active, gamma, rho) {
            Ok(())
        } else {
            Err(Error::StaleFactors)
        }
    }

    /// `log|𝓚̃| = Σ log f_i`.
    pub fn logdet(&self) -> f64 {
        self.cond_var.iter().map(|f| f.ln()).sum()
    }

    /// `B v`.
    pub fn apply_b(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let nb = self.graph.neighbors(i);
                v[i] - self.weights[i].iter().zip(nb).map(|(w, &j)| w * v[j]).sum::<f64>()
            })
            .collect()
    }

    /// `Bᵀ v`.
    pub fn apply_bt(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for i in 0..self.n() {
            for (w, &j) in self.weights[i].iter().zip(self.graph.neighbors(i)) {
                out[j] -= w * v[i];
            }
        }
        out
    }

    /// `B⁻¹ v` by forward substitution.
    pub fn solve_b(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.solve_b_in_place(&mut out);
        out
    }

    fn solve_b_in_place(&self, out: &mut [f64]) {
        for i in 0..self.n() {
            let s: f64 = self.weights[i]
                .iter()
                .zip(self.graph.neighbors(i))
                .map(|(w, &j)| w * out[j])
                .sum();
            out[i] += s;
        }
    }

    /// `B⁻ᵀ v` by backward substitution.
    pub fn solve_bt(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.solve_bt_in_place(&mut out);
        out
    }

    fn solve_bt_in_place(&self, out: &mut [f64]) {
        for i in (0..self.n()).rev() {
            let oi = out[i];
            for (w, &j) in self.weights[i].iter().zip(self.graph.neighbors(i)) {
                out[j] += w * oi;
            }
        }
    }

    /// `𝓚̃⁻¹ v = Bᵀ F⁻¹ B v`.
    pub fn inv_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut w = self.apply_b(v);
        for (wi, f) in w.iter_mut().zip(&self.cond_var) {
            *wi /= f;
        }
        self.apply_bt(&w)
    }

    /// `vᵀ 𝓚̃⁻¹ v = Σ (Bv)_i² / f_i`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.apply_b(v)
            .iter()
            .zip(&self.cond_var)
            .map(|(e, f)| e * e / f)
            .sum()
    }

    /// `B⁻¹` as a dense lower-triangular matrix.
    pub fn dense_b_inverse(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            out.set_column(c, &DVector::from_vec(self.solve_b(&e)));
        }
        out
    }

    /// The implied correlation matrix `𝓚̃ = B⁻¹ F B⁻ᵀ`, dense.
    pub fn dense_ktilde(&self) -> DMatrix<f64> {
        let binv = self.dense_b_inverse();
        let mut scaled = binv.clone();
        for (c, f) in self.cond_var.iter().enumerate() {
            scaled.column_mut(c).scale_mut(*f);
        }
        &scaled * binv.transpose()
    }

    /// Applies `B` to every column of `m`.
    pub(crate) fn apply_b_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        map_columns(m, |c| self.apply_b(c))
    }

    pub(crate) fn solve_b_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for mut c in out.column_iter_mut() {
            self.solve_b_in_place(c.as_mut_slice());
        }
        out
    }

    pub(crate) fn solve_bt_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for mut c in out.column_iter_mut() {
            self.solve_bt_in_place(c.as_mut_slice());
        }
        out
    }
}

fn map_columns(m: &DMatrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        let col = f(m.column(c).as_slice());
        out.column_mut(c).copy_from_slice(&col);
    }
    out
}

impl FactorDerivatives {
    pub fn d_weights(&self, wrt: CorrParam, i: usize) -> &[f64] {
        &self.d_weights[wrt.slot()][i]
    }

    pub fn d_cond_var(&self, wrt: CorrParam, i: usize) -> f64 {
        self.d_cond_var[wrt.slot()][i]
    }

    /// `∂B · m` for a dense `m` (n×c); row `i` of `∂B` holds `-∂b_i` on `N(i)`.
    pub(crate) fn apply_db(&self, factors: &NngpFactors, wrt: CorrParam, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = factors.n();
        let mut out = DMatrix::<f64>::zeros(n, m.ncols());
        let dw = &self.d_weights[wrt.slot()];
        for (src, mut dst) in m.column_iter().zip(out.column_iter_mut()) {
            for i in 0..n {
                let s: f64 = dw[i].iter().zip(factors.graph.neighbors(i)).map(|(w, &j)| w * src[j]).sum();
                dst[i] = -s;
            }
        }
        out
    }

    /// `∂Bᵀ · m`.
    pub(crate) fn apply_dbt(&self, factors: &NngpFactors, wrt: CorrParam, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = factors.n();
        let mut out = DMatrix::<f64>::zeros(n, m.ncols());
        let dw = &self.d_weights[wrt.slot()];
        for (src, mut dst) in m.column_iter().zip(out.column_iter_mut()) {
            for i in 0..n {
                let si = src[i];
                for (w, &j) in dw[i].iter().zip(factors.graph.neighbors(i)) {
                    dst[j] -= w * si;
                }
            }
        }
        out
    }

    /// `∂𝓚̃/∂θ = -B⁻¹ {A + Aᵀ - ∂F} B⁻ᵀ` with `A = ∂B B⁻¹ F`, dense.
    pub fn dktilde(&self, factors: &NngpFactors, wrt: CorrParam) -> DMatrix<f64> {
        let binv = factors.dense_b_inverse();
        let mut a = self.apply_db(factors, wrt, &binv);
        for (c, f) in factors.cond_var.iter().enumerate() {
            a.column_mut(c).scale_mut(*f);
        }
        let mut middle = &a + a.transpose();
        for i in 0..factors.n() {
            middle[(i, i)] -= self.d_cond_var(wrt, i);
        }
        let mut out = -(&binv * middle * binv.transpose());
        // enforce exact symmetry lost to rounding in the two products
        let n = out.nrows();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// `log|𝓚̃|`.
pub fn logdet_ktilde(factors: &NngpFactors) -> f64 {
    factors.logdet()
}

/// `𝓚̃⁻¹ v` in `O(n·m)`.
pub fn ktilde_inv_mul(factors: &NngpFactors, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != factors.n() {
        return Err(Error::DimensionMismatch {
            what: "vector",
            expected: factors.n(),
            got: v.len(),
        });
    }
    Ok(factors.inv_mul(v))
}

/// Residual `y - Xβ`, after checking that `β` vanishes outside `active`.
pub fn residual(y: &[f64], x: &DMatrix<f64>, beta: &[f64], active: &ActiveSet) -> Result<Vec<f64>> {
    if beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "beta",
            expected: x.ncols(),
            got: beta.len(),
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    for (index, &value) in beta.iter().enumerate() {
        if value != 0.0 && !active.contains(index) {
            return Err(Error::BetaSupport { index, value });
        }
    }
    let mut r = y.to_vec();
    for &a in active.indices() {
        let b = beta[a];
        if b != 0.0 {
            for (i, ri) in r.iter_mut().enumerate() {
                *ri -= x[(i, a)] * b;
            }
        }
    }
    Ok(r)
}

/// Full Gaussian log-density of `y ~ N(Xβ, σ² 𝓚̃)`, including `-(n/2) log 2π`.
pub fn log_likelihood(
    y: &[f64],
    x: &DMatrix<f64>,
    beta: &[f64],
    params: &CovarianceParams,
    factors: &NngpFactors,
) -> Result<f64> {
    params.validate()?;
    factors.ensure_matches(factors.active(), params.gamma, params.rho)?;
    let r = residual(y, x, beta, factors.active())?;
    Ok(log_likelihood_from_residual(&r, params.sigma2, factors))
}

pub(crate) fn log_likelihood_from_residual(r: &[f64], sigma2: f64, factors: &NngpFactors) -> f64 {
    let n = r.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - 0.5 * factors.logdet() - factors.quad_form(r) / (2.0 * sigma2)
}

/// `(∂/∂ρ, ∂/∂γ)` of the log-likelihood at residual `r`, using the sparse
/// row derivatives only.
pub fn log_likelihood_gradient(r: &[f64], sigma2: f64, factors: &NngpFactors, derivs: &FactorDerivatives) -> [f64; 2] {
    let e = factors.apply_b(r);
    let mut grad = [0.0; 2];
    for wrt in [CorrParam::Rho, CorrParam::Gamma] {
        let mut d_logdet = 0.0;
        let mut d_quad = 0.0;
        for i in 0..factors.n() {
            let f = factors.cond_var[i];
            let df = derivs.d_cond_var(wrt, i);
            let de: f64 = -derivs
                .d_weights(wrt, i)
                .iter()
                .zip(factors.graph.neighbors(i))
                .map(|(w, &j)| w * r[j])
                .sum::<f64>();
            d_logdet += df / f;
            d_quad += 2.0 * e[i] * de / f - e[i] * e[i] * df / (f * f);
        }
        grad[wrt.slot()] = -0.5 * d_logdet - d_quad / (2.0 * sigma2);
    }
    grad
}

/// Dense `∂𝓚̃/∂θ` (n×n). Intended for desk-scale problems only.
pub fn dktilde(factors: &NngpFactors, x: &DMatrix<f64>, wrt: CorrParam) -> Result<DMatrix<f64>> {
    let (_, derivs) = build_factors_with_derivatives(x, factors.active(), factors.gamma, factors.rho, factors.graph())?;
    Ok(derivs.dktilde(factors, wrt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::build_neighbor_graph;
    use crate::covariance::corr_from_dist;

    fn factors_for(x: &DMatrix<f64>, active: &ActiveSet, m: usize, gamma: f64, rho: f64) -> NngpFactors {
        let g = Arc::new(build_neighbor_graph(x, active, m).unwrap());
        build_factors(x, active, gamma, rho, &g).unwrap()
    }

    fn dense_corr(x: &DMatrix<f64>, active: &ActiveSet, gamma: f64, rho: f64) -> DMatrix<f64> {
        let n = x.nrows();
        DMatrix::from_fn(n, n, |i, j| {
            let d = rows_distance(x, i, j, active.indices());
            corr_from_dist(d, i == j, gamma, rho)
        })
    }

    fn sample_x(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn single_row_factors() {
        let x = DMatrix::from_row_slice(1, 2, &[0.5, 0.1]);
        let f = factors_for(&x, &ActiveSet::full(2).unwrap(), 3, 0.4, 1.0);
        assert!(f.weights(0).is_empty());
        assert_eq!(f.cond_var(0), 1.0);
        assert_eq!(f.logdet(), 0.0);
        assert_eq!(ktilde_inv_mul(&f, &[2.5]).unwrap(), vec![2.5]);
    }

    #[test]
    fn duplicate_pair() {
        let x = DMatrix::from_row_slice(2, 1, &[0.3, 0.3]);
        let f = factors_for(&x, &ActiveSet::full(1).unwrap(), 1, 0.8, 1.0);
        assert!((f.weights(1)[0] - 0.8).abs() < 1e-15);
        assert!((f.cond_var(1) - 0.36).abs() < 1e-15);
        assert!((f.logdet() - 0.36f64.ln()).abs() < 1e-14);
        let dense = dense_corr(&x, &ActiveSet::full(1).unwrap(), 0.8, 1.0);
        assert!((f.dense_ktilde() - dense).amax() < 1e-15);
    }

    #[test]
    fn full_conditioning_reproduces_dense_matrix() {
        let x = sample_x(12, 3, 7);
        let a = ActiveSet::new(vec![0, 2], 3).unwrap();
        let f = factors_for(&x, &a, 11, 0.7, 0.9);
        let dense = dense_corr(&x, &a, 0.7, 0.9);
        assert!((f.dense_ktilde() - &dense).amax() < 1e-10);
        let chol = dense.clone().cholesky().unwrap();
        let ld: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        assert!((f.logdet() - ld).abs() < 1e-10);
        let v: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let expected = chol.solve(&DVector::from_column_slice(&v));
        let got = ktilde_inv_mul(&f, &v).unwrap();
        for i in 0..12 {
            assert!((got[i] - expected[i]).abs() < 1e-8);
        }
        assert!(ktilde_inv_mul(&f, &[0.0; 12]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn triangular_helpers_are_inverses() {
        let x = sample_x(15, 2, 3);
        let f = factors_for(&x, &ActiveSet::full(2).unwrap(), 4, 0.6, 0.5);
        let v: Vec<f64> = (0..15).map(|i| (i as f64).cos()).collect();
        let back = f.solve_b(&f.apply_b(&v));
        let back_t = f.solve_bt(&f.apply_bt(&v));
        for i in 0..15 {
            assert!((back[i] - v[i]).abs() < 1e-12);
            assert!((back_t[i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn factors_do_not_depend_on_sigma2() {
        let x = sample_x(10, 2, 11);
        let a = ActiveSet::full(2).unwrap();
        let f1 = factors_for(&x, &a, 3, 0.5, 0.8);
        let f2 = factors_for(&x, &a, 3, 0.5, 0.8);
        assert_eq!(f1.cond_vars(), f2.cond_vars());
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let beta = vec![0.0, 0.0];
        let l1 = log_likelihood(&y, &x, &beta, &CovarianceParams::new(1.0, 0.5, 0.8).unwrap(), &f1).unwrap();
        let l2 = log_likelihood(&y, &x, &beta, &CovarianceParams::new(2.0, 0.5, 0.8).unwrap(), &f1).unwrap();
        assert!(l1 != l2);
    }

    #[test]
    fn likelihood_special_cases() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let f = factors_for(&x, &ActiveSet::full(1).unwrap(), 1, 0.5, 1.0);
        let p = CovarianceParams::new(1.0, 0.5, 1.0).unwrap();
        let l = log_likelihood(&[0.0], &x, &[0.0], &p, &f).unwrap();
        assert!((l + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);

        let x = sample_x(8, 2, 5);
        let a = ActiveSet::singleton(1, 2).unwrap();
        let f = factors_for(&x, &a, 3, 0.5, 1.0);
        let beta = [0.0, 1.7];
        let y: Vec<f64> = (0..8).map(|i| 1.7 * x[(i, 1)]).collect();
        let p = CovarianceParams::new(0.8, 0.5, 1.0).unwrap();
        let l = log_likelihood(&y, &x, &beta, &p, &f).unwrap();
        let expected = -4.0 * (2.0 * std::f64::consts::PI * 0.8).ln() - 0.5 * f.logdet();
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn likelihood_rejects_off_support_beta_and_stale_factors() {
        let x = sample_x(6, 2, 9);
        let a = ActiveSet::singleton(0, 2).unwrap();
        let f = factors_for(&x, &a, 3, 0.5, 1.0);
        let y = vec![0.0; 6];
        let p = CovarianceParams::new(1.0, 0.5, 1.0).unwrap();
        let err = log_likelihood(&y, &x, &[0.1, 0.2], &p, &f).unwrap_err();
        assert!(matches!(err, Error::BetaSupport { index: 1, .. }));
        let p2 = CovarianceParams::new(1.0, 0.6, 1.0).unwrap();
        let err = log_likelihood(&y, &x, &[0.1, 0.0], &p2, &f).unwrap_err();
        assert!(matches!(err, Error::StaleFactors));
    }

    #[test]
    fn likelihood_gradient_matches_finite_differences() {
        let x = sample_x(14, 3, 21);
        let a = ActiveSet::new(vec![0, 1], 3).unwrap();
        let g = Arc::new(build_neighbor_graph(&x, &a, 4).unwrap());
        let r: Vec<f64> = (0..14).map(|i| (i as f64 * 0.9).sin()).collect();
        let (gamma, rho, sigma2) = (0.65, 0.8, 1.3);
        let (f, d) = build_factors_with_derivatives(&x, &a, gamma, rho, &g).unwrap();
        let grad = log_likelihood_gradient(&r, sigma2, &f, &d);
        let ll = |gm: f64, rh: f64| {
            let f = build_factors(&x, &a, gm, rh, &g).unwrap();
            log_likelihood_from_residual(&r, sigma2, &f)
        };
        let h = 1e-6;
        let fd_rho = (ll(gamma, rho + h) - ll(gamma, rho - h)) / (2.0 * h);
        let fd_gamma = (ll(gamma + h, rho) - ll(gamma - h, rho)) / (2.0 * h);
        assert!((grad[0] - fd_rho).abs() < 1e-6 * fd_rho.abs().max(1.0));
        assert!((grad[1] - fd_gamma).abs() < 1e-6 * fd_gamma.abs().max(1.0));
    }

    #[test]
    fn near_unit_gamma_with_duplicates_fails_loudly() {
        let x = DMatrix::from_row_slice(2, 1, &[0.3, 0.3]);
        let a = ActiveSet::full(1).unwrap();
        let g = Arc::new(build_neighbor_graph(&x, &a, 1).unwrap());
        let err = build_factors(&x, &a, 1.0 - 1e-15, 1.0, &g).unwrap_err();
        assert!(matches!(err, Error::Conditioning { row: 1, .. }));
    }
}
