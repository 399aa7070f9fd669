//! HMC update of `(γ, ρ)` in unconstrained coordinates
//! `γ = logistic(γ̃)`, `ρ = softplus(ρ̃)`.
//!
//! Coordinates are stored as `[ρ̃, γ̃]` throughout.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::ActiveSet;
use crate::error::{Error, Result};
use crate::neighbors::NeighborGraph;
use crate::nngp::{build_factors_with_derivatives, log_likelihood_from_residual, log_likelihood_gradient};
use crate::refprior::log_reference_prior_from;

#[derive(Clone, Debug, PartialEq)]
pub struct HmcConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub mass_rho: f64,
    pub mass_gamma: f64,
    /// Relative step of the central differences used for the prior gradient.
    pub fd_step: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            steps: 2,
            mass_rho: 1.0,
            mass_gamma: 1.0,
            fd_step: 1e-5,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.epsilon.is_finite()
            && self.steps >= 1
            && self.mass_rho > 0.0
            && self.mass_gamma > 0.0
            && self.fd_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid HMC settings: {self:?}")))
        }
    }

    fn masses(&self) -> [f64; 2] {
        [self.mass_rho, self.mass_gamma]
    }
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn softplus_inv(x: f64) -> f64 {
    x + (-(-x).exp_m1()).ln()
}

/// `(γ, ρ)` to `[ρ̃, γ̃]`.
pub fn to_unconstrained(gamma: f64, rho: f64) -> [f64; 2] {
    [softplus_inv(rho), logit(gamma)]
}

/// `[ρ̃, γ̃]` to `(γ, ρ)`.
pub fn to_constrained(q: [f64; 2]) -> (f64, f64) {
    (logistic(q[1]), softplus(q[0]))
}

/// Log-Jacobian of the map from `[ρ̃, γ̃]` to `(ρ, γ)`.
pub fn log_jacobian(q: [f64; 2]) -> f64 {
    let [rt, gt] = q;
    rt - gt - 2.0 * (-gt).exp().ln_1p() - softplus(rt)
}

fn log_jacobian_grad(q: [f64; 2]) -> [f64; 2] {
    [1.0 - logistic(q[0]), 1.0 - 2.0 * logistic(q[1])]
}

/// Potential energy `E = -(log L + log prior + log J)` of `(ρ̃, γ̃)` with
/// `β`, `σ²` and `A` held fixed.
pub struct Potential<'a> {
    x: &'a DMatrix<f64>,
    residual: &'a [f64],
    sigma2: f64,
    active: &'a ActiveSet,
    graph: &'a Arc<NeighborGraph>,
    fd_step: f64,
}

impl<'a> Potential<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        residual: &'a [f64],
        sigma2: f64,
        active: &'a ActiveSet,
        graph: &'a Arc<NeighborGraph>,
        fd_step: f64,
    ) -> Self {
        Self {
            x,
            residual,
            sigma2,
            active,
            graph,
            fd_step,
        }
    }

    fn log_prior(&self, gamma: f64, rho: f64) -> Result<f64> {
        let (factors, derivs) = build_factors_with_derivatives(self.x, self.active, gamma, rho, self.graph)?;
        log_reference_prior_from(self.x, &factors, &derivs)
    }

    fn log_prior_at(&self, q: [f64; 2]) -> f64 {
        let (gamma, rho) = to_constrained(q);
        self.log_prior(gamma, rho).unwrap_or(f64::NEG_INFINITY)
    }

    /// `+∞` wherever the target density vanishes or cannot be evaluated.
    pub fn energy(&self, q: [f64; 2]) -> f64 {
        let (gamma, rho) = to_constrained(q);
        let Ok((factors, derivs)) = build_factors_with_derivatives(self.x, self.active, gamma, rho, self.graph) else {
            return f64::INFINITY;
        };
        let lp = log_reference_prior_from(self.x, &factors, &derivs).unwrap_or(f64::NEG_INFINITY);
        let ll = log_likelihood_from_residual(self.residual, self.sigma2, &factors);
        let e = -(ll + lp + log_jacobian(q));
        if e.is_finite() {
            e
        } else {
            f64::INFINITY
        }
    }

    /// `∇E`; analytic for the likelihood and Jacobian, central differences for
    /// the prior. Non-finite components signal an invalid trajectory.
    pub fn gradient(&self, q: [f64; 2]) -> [f64; 2] {
        let (gamma, rho) = to_constrained(q);
        let Ok((factors, derivs)) = build_factors_with_derivatives(self.x, self.active, gamma, rho, self.graph) else {
            return [f64::NAN; 2];
        };
        let [dl_drho, dl_dgamma] = log_likelihood_gradient(self.residual, self.sigma2, &factors, &derivs);
        let chain = [logistic(q[0]), gamma * (1.0 - gamma)];
        let dj = log_jacobian_grad(q);
        let mut grad = [0.0; 2];
        let dl = [dl_drho, dl_dgamma];
        for c in 0..2 {
            let h = self.fd_step * q[c].abs().max(1.0);
            let mut up = q;
            let mut down = q;
            up[c] += h;
            down[c] -= h;
            let dprior = (self.log_prior_at(up) - self.log_prior_at(down)) / (2.0 * h);
            grad[c] = -(dl[c] * chain[c] + dprior + dj[c]);
        }
        grad
    }
}

/// `L` leapfrog steps; each step is a half momentum update, a full position
/// update and another half momentum update. The gradient at the end of one
/// step is reused at the start of the next.
pub fn leapfrog<G>(q: [f64; 2], v: [f64; 2], epsilon: f64, steps: usize, masses: [f64; 2], mut grad: G) -> ([f64; 2], [f64; 2])
where
    G: FnMut([f64; 2]) -> [f64; 2],
{
    let mut q = q;
    let mut v = v;
    let mut g = grad(q);
    for _ in 0..steps {
        for c in 0..2 {
            v[c] -= 0.5 * epsilon * g[c];
        }
        for c in 0..2 {
            q[c] += epsilon * v[c] / masses[c];
        }
        g = grad(q);
        for c in 0..2 {
            v[c] -= 0.5 * epsilon * g[c];
        }
    }
    (q, v)
}

pub fn kinetic_energy(v: [f64; 2], masses: [f64; 2]) -> f64 {
    0.5 * (v[0] * v[0] / masses[0] + v[1] * v[1] / masses[1])
}

/// Outcome of one HMC transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmcMove {
    pub gamma: f64,
    pub rho: f64,
    pub accepted: bool,
    pub log_ratio: f64,
}

/// One HMC transition from `(gamma, rho)`.
pub fn hmc_transition<R: Rng + ?Sized>(
    potential: &Potential<'_>,
    gamma: f64,
    rho: f64,
    config: &HmcConfig,
    rng: &mut R,
) -> HmcMove {
    let masses = config.masses();
    let q0 = to_unconstrained(gamma, rho);
    let v0 = [
        masses[0].sqrt() * rng.sample::<f64, _>(StandardNormal),
        masses[1].sqrt() * rng.sample::<f64, _>(StandardNormal),
    ];
    let u: f64 = rng.random();
    let (q1, v1) = leapfrog(q0, v0, config.epsilon, config.steps, masses, |q| potential.gradient(q));
    let stay = HmcMove {
        gamma,
        rho,
        accepted: false,
        log_ratio: f64::NEG_INFINITY,
    };
    if !(q1.iter().chain(&v1).all(|v| v.is_finite())) {
        return stay;
    }
    let e0 = potential.energy(q0);
    let e1 = potential.energy(q1);
    let log_ratio = kinetic_energy(v0, masses) + e0 - kinetic_energy(v1, masses) - e1;
    if !log_ratio.is_finite() && log_ratio != f64::INFINITY {
        return stay;
    }
    let (g1, r1) = to_constrained(q1);
    if !(g1 > 0.0 && g1 < 1.0 && r1 > 0.0) {
        return stay;
    }
    if u.ln() < log_ratio {
        HmcMove {
            gamma: g1,
            rho: r1,
            accepted: true,
            log_ratio,
        }
    } else {
        HmcMove { log_ratio, ..stay }
    }
}
