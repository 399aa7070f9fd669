//! Metropolis-within-Gibbs sampler over `(A, β, σ², γ, ρ)`.
//!
//! Each iteration runs, in order:
//!
//! 1. a joint MH move on `(A, β)`: toggle one index of `A`, then draw `β_A`
//!    from its conditional GLS posterior under the proposed set;
//! 2. a conjugate draw `σ² ~ IG(n/2, ½ rᵀ𝓚̃⁻¹r)`;
//! 3. an HMC move on `(γ, ρ)` (see [`hmc`]).
//!
//! The improper priors on `β` (flat) and `σ²` (`1/σ²`) contribute ratios of
//! one inside their support and never appear numerically. The `1/σ²` part of
//! the reference prior is already folded into step 2.

mod export;
pub mod hmc;

use std::sync::Arc;

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::covariance::{ActiveSet, CovarianceParams};
use crate::error::{Error, Result};
use crate::linalg::rows_distance;
use crate::neighbors::{build_neighbor_graph, NeighborGraph};
use crate::nngp::{build_factors, log_likelihood_from_residual, residual, NngpFactors};
use crate::refprior::Gls;
use crate::selection::{log_prior_a, propose_a, ProposalConfig, SelectionPrior};

pub use export::{read_chain_csv, read_chain_file, write_chain_csv};
pub use hmc::HmcConfig;

/// Observed data and the neighbor count shared by every model evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub y: &'a [f64],
    pub x: &'a DMatrix<f64>,
    pub m: usize,
}

impl<'a> Problem<'a> {
    pub fn new(y: &'a [f64], x: &'a DMatrix<f64>, m: usize) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "response",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidInput("need at least two training rows".into()));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("need at least one predictor".into()));
        }
        if m == 0 {
            return Err(Error::InvalidInput("neighbor count m must be at least 1".into()));
        }
        Ok(Self { y, x, m })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }
}

/// Current sampler position together with the factors built for it.
#[derive(Clone, Debug)]
pub struct ChainState {
    beta: Vec<f64>,
    sigma2: f64,
    factors: NngpFactors,
}

impl ChainState {
    /// Builds the neighbor graph and factors for `(active, gamma, rho)`.
    pub fn new(problem: &Problem<'_>, beta: Vec<f64>, params: CovarianceParams, active: ActiveSet) -> Result<Self> {
        params.validate()?;
        let graph = Arc::new(build_neighbor_graph(problem.x, &active, problem.m)?);
        let factors = build_factors(problem.x, &active, params.gamma, params.rho, &graph)?;
        residual(problem.y, problem.x, &beta, &active)?;
        Ok(Self {
            beta,
            sigma2: params.sigma2,
            factors,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma(&self) -> f64 {
        self.factors.gamma()
    }

    pub fn rho(&self) -> f64 {
        self.factors.rho()
    }

    pub fn active(&self) -> &ActiveSet {
        self.factors.active()
    }

    pub fn factors(&self) -> &NngpFactors {
        &self.factors
    }

    pub fn graph(&self) -> &Arc<NeighborGraph> {
        self.factors.graph()
    }

    pub fn params(&self) -> CovarianceParams {
        CovarianceParams {
            sigma2: self.sigma2,
            gamma: self.gamma(),
            rho: self.rho(),
        }
    }

    pub fn log_likelihood(&self, problem: &Problem<'_>) -> Result<f64> {
        let r = residual(problem.y, problem.x, &self.beta, self.active())?;
        Ok(log_likelihood_from_residual(&r, self.sigma2, &self.factors))
    }
}

/// Conditional posterior of `β_A` given `(σ², γ, ρ, A)` under a flat prior:
/// `N(G⁻¹X_Aᵀ𝓚̃⁻¹y, σ²G⁻¹)` with `G = X_Aᵀ𝓚̃⁻¹X_A`; zero off `A`.
pub struct BetaConditional {
    mean: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
    log_det_gram: f64,
    sigma2: f64,
    active: ActiveSet,
}

impl BetaConditional {
    pub fn new(y: &[f64], x: &DMatrix<f64>, sigma2: f64, factors: &NngpFactors) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
        }
        let gls = Gls::new(x, factors)?;
        let proj = gls.project(&factors.apply_b(y), factors);
        let mean = gls.gram.solve(&proj);
        let log_det_gram = gls.log_det();
        Ok(Self {
            mean,
            gram: gls.gram,
            log_det_gram,
            sigma2,
            active: factors.active().clone(),
        })
    }

    /// Full-length mean vector (zeros off the active set).
    pub fn mean(&self) -> Vec<f64> {
        self.embed(&self.mean)
    }

    fn embed(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.active.dim()];
        for (c, &a) in self.active.indices().iter().enumerate() {
            out[a] = v[c];
        }
        out
    }

    /// `μ + σ L⁻ᵀ z` for standard-normal `z` of length `|A|`.
    pub fn draw_with(&self, z: &[f64]) -> Vec<f64> {
        let z = DVector::from_column_slice(z);
        let step = self
            .gram
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        self.embed(&(&self.mean + step * self.sigma2.sqrt()))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.active.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.draw_with(&z)
    }

    /// Normal log-density of `β_A`; `-∞` if `β` is nonzero off the active set.
    pub fn log_density(&self, beta: &[f64]) -> f64 {
        if beta.iter().enumerate().any(|(i, b)| *b != 0.0 && !self.active.contains(i)) {
            return f64::NEG_INFINITY;
        }
        let k = self.active.len() as f64;
        let diff = DVector::from_iterator(
            self.active.len(),
            self.active.indices().iter().enumerate().map(|(c, &a)| beta[a] - self.mean[c]),
        );
        // (β-μ)ᵀ Σ⁻¹ (β-μ) = |Lᵀ(β-μ)|² / σ²
        let lt = self.gram.l().transpose() * diff;
        let log_det_cov = k * self.sigma2.ln() - self.log_det_gram;
        -0.5 * k * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_cov - 0.5 * lt.norm_squared() / self.sigma2
    }
}

/// How step 1 scores a proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Evidence {
    /// The NNGP likelihood.
    #[default]
    Likelihood,
    /// Replaces `L(β, A)` by the `β` proposal density `q(β | A)`, so the MH
    /// ratio on `A` only sees the prior and the proposal. Used to check that
    /// the sampler recovers `p(A)`.
    Flat,
}

/// Which of the three updates run each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Steps {
    pub selection: bool,
    pub sigma2: bool,
    pub hmc: bool,
}

impl Default for Steps {
    fn default() -> Self {
        Self {
            selection: true,
            sigma2: true,
            hmc: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub prior: SelectionPrior,
    pub proposal: ProposalConfig,
    pub hmc: HmcConfig,
    pub steps: Steps,
    pub evidence: Evidence,
    /// Initial state; drawn by the default rule when `None`.
    pub init: Option<InitialState>,
}

impl McmcConfig {
    /// Defaults: `p_h = 0.6`, uniform weights, `p̃(k) = 1/k`, `ε = 0.3`, `L = 2`.
    pub fn new(d: usize, iterations: usize, burn_in: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            iterations,
            burn_in,
            seed,
            prior: SelectionPrior::uniform(d, Default::default())?,
            proposal: ProposalConfig::default_for(d)?,
            hmc: HmcConfig::default(),
            steps: Steps::default(),
            evidence: Evidence::Likelihood,
            init: None,
        })
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::InvalidInput(format!(
                "need iterations > burn_in, got {} and {}",
                self.iterations, self.burn_in
            )));
        }
        if self.prior.dim() != d || self.proposal.move_weights().len() != d {
            return Err(Error::DimensionMismatch {
                what: "selection weights",
                expected: d,
                got: self.prior.dim(),
            });
        }
        self.hmc.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub active: ActiveSet,
    pub beta: Option<Vec<f64>>,
    pub params: CovarianceParams,
}

/// One stored iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub gamma: f64,
    pub rho: f64,
    pub active: ActiveSet,
    pub accepted_selection: bool,
    pub accepted_hmc: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub samples: Vec<Sample>,
    pub burn_in: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.active.dim())
    }

    pub fn selection_accepted(&self) -> usize {
        self.samples.iter().filter(|s| s.accepted_selection).count()
    }

    pub fn hmc_accepted(&self) -> usize {
        self.samples.iter().filter(|s| s.accepted_hmc).count()
    }

    pub fn selection_acceptance_rate(&self) -> f64 {
        self.selection_accepted() as f64 / self.len().max(1) as f64
    }

    pub fn hmc_acceptance_rate(&self) -> f64 {
        self.hmc_accepted() as f64 / self.len().max(1) as f64
    }

    /// Samples after the first `burn_in`, keeping every `thin`-th.
    pub fn retained(&self, burn_in: usize, thin: usize) -> impl Iterator<Item = &Sample> {
        self.samples.iter().skip(burn_in).step_by(thin.max(1))
    }
}

/// Terms of the step-1 acceptance ratio, all on the log scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionTerms {
    pub log_evidence: f64,
    pub log_prior_a: f64,
    /// `log q(β | A)` of this state's `β` under its own set.
    pub log_q_beta: f64,
    /// `log q(this A | other A)`.
    pub log_q_a: f64,
}

/// `log r` for moving from `current` to `proposed`.
pub fn selection_log_ratio(current: &SelectionTerms, proposed: &SelectionTerms) -> f64 {
    let num = proposed.log_evidence + proposed.log_prior_a + current.log_q_beta + current.log_q_a;
    let den = current.log_evidence + current.log_prior_a + proposed.log_q_beta + proposed.log_q_a;
    num - den
}

struct SelectionCandidate {
    beta: Vec<f64>,
    factors: NngpFactors,
    terms: SelectionTerms,
}

fn propose_selection<R: Rng + ?Sized>(
    state: &ChainState,
    problem: &Problem<'_>,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<(SelectionTerms, SelectionCandidate)> {
    let current_active = state.active();
    let proposal = propose_a(current_active, &config.proposal, rng)?;
    let factors = if proposal.proposed == *current_active {
        state.factors.clone()
    } else {
        let graph = Arc::new(build_neighbor_graph(problem.x, &proposal.proposed, problem.m)?);
        build_factors(problem.x, &proposal.proposed, state.gamma(), state.rho(), &graph)?
    };
    let cond_new = BetaConditional::new(problem.y, problem.x, state.sigma2, &factors)?;
    let beta = cond_new.draw(rng);
    let cond_cur = BetaConditional::new(problem.y, problem.x, state.sigma2, &state.factors)?;

    let q_beta_new = cond_new.log_density(&beta);
    let q_beta_cur = cond_cur.log_density(&state.beta);
    let (ev_new, ev_cur) = match config.evidence {
        Evidence::Likelihood => {
            let r_new = residual(problem.y, problem.x, &beta, &proposal.proposed)?;
            let r_cur = residual(problem.y, problem.x, &state.beta, current_active)?;
            (
                log_likelihood_from_residual(&r_new, state.sigma2, &factors),
                log_likelihood_from_residual(&r_cur, state.sigma2, &state.factors),
            )
        }
        Evidence::Flat => (q_beta_new, q_beta_cur),
    };
    let current = SelectionTerms {
        log_evidence: ev_cur,
        log_prior_a: log_prior_a(current_active, &config.prior),
        log_q_beta: q_beta_cur,
        log_q_a: proposal.log_q_reverse,
    };
    let terms = SelectionTerms {
        log_evidence: ev_new,
        log_prior_a: log_prior_a(&proposal.proposed, &config.prior),
        log_q_beta: q_beta_new,
        log_q_a: proposal.log_q_forward,
    };
    Ok((current, SelectionCandidate { beta, factors, terms }))
}

/// Step 1. Returns whether the proposal was accepted; numerical failures in
/// the proposal count as rejections.
pub fn step_selection<R: Rng + ?Sized>(
    state: &mut ChainState,
    problem: &Problem<'_>,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<bool> {
    let (current, candidate) = match propose_selection(state, problem, config, rng) {
        Ok(v) => v,
        Err(e @ Error::Proposal(_)) => return Err(e),
        Err(e) => {
            warn!("selection proposal rejected: {e}");
            return Ok(false);
        }
    };
    let log_r = selection_log_ratio(&current, &candidate.terms);
    let u: f64 = rng.random();
    if log_r.is_nan() || u.ln() >= log_r {
        return Ok(false);
    }
    state.beta = candidate.beta;
    state.factors = candidate.factors;
    Ok(true)
}

/// Draw from `IG(shape, scale)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(format!("inverse-gamma shape {shape}: {e}")))?;
    Ok(scale / g.sample(rng))
}

/// Step 2: `σ² ~ IG(n/2, ½ rᵀ𝓚̃⁻¹r)`.
pub fn step_sigma2<R: Rng + ?Sized>(state: &mut ChainState, problem: &Problem<'_>, rng: &mut R) -> Result<()> {
    let r = residual(problem.y, problem.x, &state.beta, state.active())?;
    let mut scale = 0.5 * state.factors.quad_form(&r);
    if !(scale > 0.0) {
        warn!("inverse-gamma scale {scale} is not positive, using 1e-12");
        scale = 1e-12;
    }
    state.sigma2 = sample_inverse_gamma(problem.n() as f64 / 2.0, scale, rng)?;
    Ok(())
}

/// Step 3: HMC on `(γ, ρ)`. Returns whether the move was accepted.
pub fn step_hmc<R: Rng + ?Sized>(
    state: &mut ChainState,
    problem: &Problem<'_>,
    config: &HmcConfig,
    rng: &mut R,
) -> Result<bool> {
    let r = residual(problem.y, problem.x, &state.beta, state.active())?;
    let graph = state.graph().clone();
    let potential = hmc::Potential::new(problem.x, &r, state.sigma2, state.active(), &graph, config.fd_step);
    let mv = hmc::hmc_transition(&potential, state.gamma(), state.rho(), config, rng);
    if !mv.accepted {
        return Ok(false);
    }
    match build_factors(problem.x, state.active(), mv.gamma, mv.rho, &graph) {
        Ok(f) => {
            state.factors = f;
            Ok(true)
        }
        Err(e) => {
            warn!("HMC proposal rejected: {e}");
            Ok(false)
        }
    }
}

/// Median pairwise `d_A` distance over the training rows, or 1 if it is 0.
pub fn median_distance(x: &DMatrix<f64>, active: &ActiveSet) -> f64 {
    let n = x.nrows();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| rows_distance(x, i, j, active.indices()))
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Default start: a random singleton `A`, `γ = 0.5`, `ρ` the median pairwise
/// distance, `σ²` the sample variance of `y` and `β` the GLS mean.
pub fn initial_state<R: Rng + ?Sized>(problem: &Problem<'_>, init: Option<&InitialState>, rng: &mut R) -> Result<ChainState> {
    let d = problem.d();
    let (active, params, beta) = match init {
        Some(s) => (s.active.clone(), s.params, s.beta.clone()),
        None => {
            let active = ActiveSet::singleton(rng.random_range(0..d), d)?;
            let sigma2 = sample_variance(problem.y);
            if !(sigma2 > 0.0) {
                return Err(Error::InvalidInput("response has zero variance".into()));
            }
            let params = CovarianceParams::new(sigma2, 0.5, median_distance(problem.x, &active))?;
            (active, params, None)
        }
    };
    let placeholder = vec![0.0; d];
    let mut state = ChainState::new(problem, placeholder, params, active)?;
    state.beta = match beta {
        Some(b) => {
            residual(problem.y, problem.x, &b, state.active())?;
            b
        }
        None => BetaConditional::new(problem.y, problem.x, state.sigma2, &state.factors)?.mean(),
    };
    Ok(state)
}

const AUDIT_EVERY: usize = 100;

fn audit(state: &ChainState, problem: &Problem<'_>) -> Result<()> {
    let fresh = ChainState::new(problem, state.beta.clone(), state.params(), state.active().clone())?;
    let a = state.log_likelihood(problem)?;
    let b = fresh.log_likelihood(problem)?;
    if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
        return Err(Error::Numerical(format!("cached likelihood {a} differs from rebuilt {b}")));
    }
    Ok(())
}

/// Runs the sampler and stores every iteration.
pub fn run_chain(problem: &Problem<'_>, config: &McmcConfig) -> Result<Chain> {
    config.validate(problem.d())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = initial_state(problem, config.init.as_ref(), &mut rng)?;
    let mut samples = Vec::with_capacity(config.iterations);
    for it in 1..=config.iterations {
        let accepted_selection = if config.steps.selection {
            step_selection(&mut state, problem, config, &mut rng)?
        } else {
            false
        };
        if config.steps.sigma2 {
            step_sigma2(&mut state, problem, &mut rng)?;
        }
        let accepted_hmc = if config.steps.hmc {
            step_hmc(&mut state, problem, &config.hmc, &mut rng)?
        } else {
            false
        };
        if it % AUDIT_EVERY == 0 {
            audit(&state, problem)?;
        }
        samples.push(Sample {
            beta: state.beta.clone(),
            sigma2: state.sigma2,
            gamma: state.gamma(),
            rho: state.rho(),
            active: state.active().clone(),
            accepted_selection,
            accepted_hmc,
        });
    }
    Ok(Chain {
        samples,
        burn_in: config.burn_in,
    })
}
