//! Reference prior for `(σ², γ, ρ)` given the active set.
//!
//! With `β_A` integrated out under a flat prior, the prior is
//! `p(σ², ρ, γ) ∝ |Ĩ(ρ, γ)|^{1/2} / σ²` where
//!
//! ```text
//!       ⎡ n-|A|    tr W_ρ       tr W_γ      ⎤
//! Ĩ  =  ⎢ tr W_ρ   tr W_ρ²      tr W_ρ W_γ  ⎥     W_θ = (∂𝓚̃/∂θ) Q,
//!       ⎣ tr W_γ   tr W_ρ W_γ   tr W_γ²     ⎦     Q = 𝓚̃⁻¹ P,
//! P = I - X_A (X_Aᵀ 𝓚̃⁻¹ X_A)⁻¹ X_Aᵀ 𝓚̃⁻¹.
//! ```
//!
//! The `1/σ²` factor is not part of [`log_reference_prior`]; the sampler
//! accounts for it in the `σ²` update, and it is constant in `(γ, ρ)`.
//!
//! Two routes compute `Ĩ`. [`build_workspace`] forms `Q`, `P` and both `W`
//! matrices densely. [`fisher_matrix`] uses that traces are invariant under
//! `W ↦ B W B⁻¹`: with `Z = B X_A` and
//! `Q' = B⁻ᵀ Q B⁻¹ = F⁻¹ - F⁻¹ Z (Zᵀ F⁻¹ Z)⁻¹ Zᵀ F⁻¹`,
//! `B W_θ B⁻¹ = -(A_θ + A_θᵀ - ∂F_θ) Q'` with `A_θ = ∂B B⁻¹ F`, and every
//! product only needs sparse solves with `B`. That route costs `O(n²(m+|A|))`
//! and is the one the sampler uses.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::covariance::ActiveSet;
use crate::error::{Error, Result};
use crate::linalg::{gram_cholesky, ldl_log_det, select_columns};
use crate::neighbors::NeighborGraph;
use crate::nngp::{build_factors_with_derivatives, CorrParam, FactorDerivatives, NngpFactors};

/// Dense intermediates of the reference prior at one `(γ, ρ, A)`.
#[derive(Clone, Debug)]
pub struct RefPriorWorkspace {
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub s2: f64,
    pub w_rho: DMatrix<f64>,
    pub w_gamma: DMatrix<f64>,
    pub fisher: DMatrix<f64>,
}

fn check_size(n: usize, k: usize) -> Result<()> {
    if k >= n {
        return Err(Error::InvalidInput(format!(
            "active set size {k} must be smaller than the sample size {n}"
        )));
    }
    Ok(())
}

/// The generalized least-squares system `X_Aᵀ 𝓚̃⁻¹ X_A` in factored form.
pub(crate) struct Gls {
    /// `Z = B X_A`, n×k.
    pub z: DMatrix<f64>,
    /// Cholesky factor of `G = Zᵀ F⁻¹ Z`.
    pub gram: Cholesky<f64, Dyn>,
}

impl Gls {
    pub fn new(x: &DMatrix<f64>, factors: &NngpFactors) -> Result<Self> {
        let active = factors.active();
        check_size(factors.n(), active.len())?;
        let xa = select_columns(x, active.indices());
        let z = factors.apply_b_columns(&xa);
        let mut zf = z.clone();
        for (i, f) in factors.cond_vars().iter().enumerate() {
            zf.row_mut(i).scale_mut(1.0 / f);
        }
        let g = z.transpose() * &zf;
        let gram = gram_cholesky(g).ok_or_else(|| Error::Singular("X_Aᵀ 𝓚̃⁻¹ X_A is not positive definite".into()))?;
        Ok(Self { z, gram })
    }

    /// `log |X_Aᵀ 𝓚̃⁻¹ X_A|`.
    pub fn log_det(&self) -> f64 {
        self.gram.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum()
    }

    /// `X_Aᵀ 𝓚̃⁻¹ v` given `B v`.
    pub fn project(&self, bv: &[f64], factors: &NngpFactors) -> DVector<f64> {
        let scaled = DVector::from_iterator(bv.len(), bv.iter().zip(factors.cond_vars()).map(|(v, f)| v / f));
        self.z.transpose() * scaled
    }
}

/// Dense route: `P`, `Q`, `S² = yᵀQy`, `W_ρ`, `W_γ` and `Ĩ`.
pub fn build_workspace(y: &[f64], x: &DMatrix<f64>, factors: &NngpFactors) -> Result<RefPriorWorkspace> {
    let n = factors.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: n,
            got: y.len(),
        });
    }
    let active = factors.active();
    check_size(n, active.len())?;
    let xa = select_columns(x, active.indices());
    let mut kinv_xa = DMatrix::<f64>::zeros(n, xa.ncols());
    for c in 0..xa.ncols() {
        let col = factors.inv_mul(xa.column(c).as_slice());
        kinv_xa.column_mut(c).copy_from_slice(&col);
    }
    let gram = gram_cholesky(xa.transpose() * &kinv_xa).ok_or_else(|| Error::Singular("X_Aᵀ 𝓚̃⁻¹ X_A is not positive definite".into()))?;
    let p = DMatrix::<f64>::identity(n, n) - &xa * gram.solve(&kinv_xa.transpose());
    let mut q = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let col = factors.inv_mul(p.column(c).as_slice());
        q.column_mut(c).copy_from_slice(&col);
    }
    let yv = DVector::from_column_slice(y);
    let s2 = (yv.transpose() * &q * &yv)[(0, 0)];

    let (_, derivs) = build_factors_with_derivatives(x, active, factors.gamma(), factors.rho(), factors.graph())?;
    let w_rho = derivs.dktilde(factors, CorrParam::Rho) * &q;
    let w_gamma = derivs.dktilde(factors, CorrParam::Gamma) * &q;
    let fisher = assemble_fisher(n - active.len(), &w_rho, &w_gamma);
    Ok(RefPriorWorkspace {
        q,
        p,
        s2,
        w_rho,
        w_gamma,
        fisher,
    })
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(AB) = Σ_ij A_ij B_ji
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

fn assemble_fisher(dof: usize, w_rho: &DMatrix<f64>, w_gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let t_r = w_rho.trace();
    let t_g = w_gamma.trace();
    let t_rr = trace_product(w_rho, w_rho);
    let t_gg = trace_product(w_gamma, w_gamma);
    let t_rg = trace_product(w_rho, w_gamma);
    DMatrix::from_row_slice(3, 3, &[dof as f64, t_r, t_g, t_r, t_rr, t_rg, t_g, t_rg, t_gg])
}

/// Fast route for `Ĩ(ρ, γ)` (see module docs).
pub fn fisher_matrix(x: &DMatrix<f64>, factors: &NngpFactors, derivs: &FactorDerivatives) -> Result<DMatrix<f64>> {
    let n = factors.n();
    let gls = Gls::new(x, factors)?;
    let f = factors.cond_vars();
    let mut u = gls.z.clone();
    for i in 0..n {
        u.row_mut(i).scale_mut(1.0 / f[i]);
    }
    let mut q_sim = -(&u * gls.gram.solve(&u.transpose()));
    for i in 0..n {
        q_sim[(i, i)] += 1.0 / f[i];
    }

    let mut fq = q_sim.clone();
    for i in 0..n {
        fq.row_mut(i).scale_mut(f[i]);
    }
    let binv_fq = factors.solve_b_columns(&fq);

    let mut w = Vec::with_capacity(2);
    for wrt in [CorrParam::Rho, CorrParam::Gamma] {
        let a_q = derivs.apply_db(factors, wrt, &binv_fq);
        let mut at_q = factors.solve_bt_columns(&derivs.apply_dbt(factors, wrt, &q_sim));
        for i in 0..n {
            at_q.row_mut(i).scale_mut(f[i]);
        }
        let mut df_q = q_sim.clone();
        for i in 0..n {
            df_q.row_mut(i).scale_mut(derivs.d_cond_var(wrt, i));
        }
        w.push(-(a_q + at_q - df_q));
    }
    Ok(assemble_fisher(n - factors.active().len(), &w[0], &w[1]))
}

/// `½ log |Ĩ|`, or `-∞` when `Ĩ` has a pivot `<= 1e-12`.
pub fn log_reference_prior_from(x: &DMatrix<f64>, factors: &NngpFactors, derivs: &FactorDerivatives) -> Result<f64> {
    let fisher = fisher_matrix(x, factors, derivs)?;
    Ok(match ldl_log_det(&fisher) {
        Some(ld) => 0.5 * ld,
        None => f64::NEG_INFINITY,
    })
}

/// Log reference prior of `(γ, ρ)` given `A`, up to an additive constant.
pub fn log_reference_prior(
    x: &DMatrix<f64>,
    active: &ActiveSet,
    gamma: f64,
    rho: f64,
    graph: &Arc<NeighborGraph>,
) -> Result<f64> {
    let (factors, derivs) = build_factors_with_derivatives(x, active, gamma, rho, graph)?;
    log_reference_prior_from(x, &factors, &derivs)
}

/// Log of the likelihood integrated over `β_A`:
/// `-((n-|A|)/2) log σ² - ½ log|𝓚̃| - ½ log|X_Aᵀ𝓚̃⁻¹X_A| - S²/(2σ²)`.
pub fn integrated_log_likelihood(sigma2: f64, y: &[f64], x: &DMatrix<f64>, factors: &NngpFactors) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if y.len() != factors.n() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: factors.n(),
            got: y.len(),
        });
    }
    let gls = Gls::new(x, factors)?;
    let s2 = generalized_residual_ss(y, factors, &gls);
    let n = factors.n() as f64;
    let k = factors.active().len() as f64;
    Ok(-0.5 * (n - k) * sigma2.ln() - 0.5 * factors.logdet() - 0.5 * gls.log_det() - s2 / (2.0 * sigma2))
}

/// `S² = yᵀ𝓚̃⁻¹y - yᵀ𝓚̃⁻¹X_A (X_Aᵀ𝓚̃⁻¹X_A)⁻¹ X_Aᵀ𝓚̃⁻¹y`.
pub(crate) fn generalized_residual_ss(y: &[f64], factors: &NngpFactors, gls: &Gls) -> f64 {
    let by = factors.apply_b(y);
    let proj = gls.project(&by, factors);
    let quad: f64 = by.iter().zip(factors.cond_vars()).map(|(e, f)| e * e / f).sum();
    (quad - proj.dot(&gls.gram.solve(&proj))).max(0.0)
}
