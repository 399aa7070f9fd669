//! Prior over the active set and the single-toggle proposal on it.
//!
//! The prior is `p(A) ∝ (Σ_{i∈A} p_i) · p̃(|A|) / |A|`. A proposal first draws
//! whether the model size changes (probability `p_h`); if it does, one index
//! is drawn from [`pmf_alpha`] and its membership toggled. Moves that change
//! two or more indices at once are never proposed.

use rand::Rng;

use crate::covariance::ActiveSet;
use crate::error::{Error, Result};

/// Weight `p̃(k)` placed on model size `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SizeWeight {
    /// `p̃(k) = 1/k`.
    #[default]
    Reciprocal,
    /// Cube of the zero-truncated Binomial(d, 1/d) pmf.
    TruncBinomCubed,
}

impl SizeWeight {
    /// `log p̃(k)` for `1 <= k <= d`, up to a constant.
    pub fn log_weight(self, k: usize, d: usize) -> f64 {
        if k == 0 || k > d {
            return f64::NEG_INFINITY;
        }
        match self {
            SizeWeight::Reciprocal => -(k as f64).ln(),
            SizeWeight::TruncBinomCubed => 3.0 * log_binom_pmf(k, d, 1.0 / d as f64),
        }
    }
}

impl std::str::FromStr for SizeWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reciprocal" => Ok(SizeWeight::Reciprocal),
            "tbinom3" => Ok(SizeWeight::TruncBinomCubed),
            other => Err(Error::InvalidInput(format!(
                "unknown size weight '{other}', expected 'reciprocal' or 'tbinom3'"
            ))),
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

// The truncation constant does not depend on k and is dropped.
fn log_binom_pmf(k: usize, n: usize, p: f64) -> f64 {
    let choose = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let fail = if n == k { 0.0 } else { (n - k) as f64 * (1.0 - p).ln() };
    choose + k as f64 * p.ln() + fail
}

fn check_weights(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must not be empty")));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(format!("{what} must be finite and nonnegative")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("{what} must sum to 1, got {s}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionPrior {
    importance: Vec<f64>,
    size_weight: SizeWeight,
}

impl SelectionPrior {
    pub fn new(importance: Vec<f64>, size_weight: SizeWeight) -> Result<Self> {
        check_weights(&importance, "importance weights")?;
        Ok(Self {
            importance,
            size_weight,
        })
    }

    /// Equal importance `1/d` for every predictor.
    pub fn uniform(d: usize, size_weight: SizeWeight) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d], size_weight)
    }

    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn size_weight(&self) -> SizeWeight {
        self.size_weight
    }

    pub fn dim(&self) -> usize {
        self.importance.len()
    }
}

/// `log p(A)` up to a global constant; `-∞` when the prior mass is zero.
pub fn log_prior_a(active: &ActiveSet, prior: &SelectionPrior) -> f64 {
    let k = active.len();
    let mass: f64 = active.indices().iter().map(|&i| prior.importance[i]).sum();
    if mass <= 0.0 {
        return f64::NEG_INFINITY;
    }
    mass.ln() - (k as f64).ln() + prior.size_weight.log_weight(k, prior.dim())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProposalConfig {
    p_h: f64,
    move_weights: Vec<f64>,
}

impl ProposalConfig {
    pub fn new(p_h: f64, move_weights: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_h) {
            return Err(Error::InvalidInput(format!("p_h must lie in [0, 1], got {p_h}")));
        }
        check_weights(&move_weights, "move weights")?;
        Ok(Self { p_h, move_weights })
    }

    /// `p_h = 0.6` and move weights `1/d`.
    pub fn default_for(d: usize) -> Result<Self> {
        Self::with_p_h(0.6, d)
    }

    pub fn with_p_h(p_h: f64, d: usize) -> Result<Self> {
        Self::new(p_h, vec![1.0 / d as f64; d])
    }

    pub fn p_h(&self) -> f64 {
        self.p_h
    }

    pub fn move_weights(&self) -> &[f64] {
        &self.move_weights
    }
}

/// Probability of picking index `alpha` to toggle, given the current set.
pub fn pmf_alpha(alpha: usize, active: &ActiveSet, weights: &[f64]) -> f64 {
    let k = active.len();
    let w = weights[alpha];
    let inside = active.contains(alpha);
    if k > 1 {
        if !inside {
            return w;
        }
        if w == 0.0 {
            return 0.0;
        }
        let mut sum_w = 0.0;
        let mut sum_inv = 0.0;
        for &i in active.indices() {
            if weights[i] == 0.0 {
                return 0.0;
            }
            sum_w += weights[i];
            sum_inv += 1.0 / weights[i];
        }
        sum_w / (w * sum_inv)
    } else if inside {
        0.0
    } else {
        let outside: f64 = (0..weights.len())
            .filter(|i| !active.contains(*i))
            .map(|i| weights[i])
            .sum();
        if outside > 0.0 {
            w / outside
        } else {
            0.0
        }
    }
}

// Total mass of pmf_alpha over all indices; 1 unless zero weights block moves.
fn toggle_mass(active: &ActiveSet, weights: &[f64]) -> f64 {
    (0..weights.len()).map(|a| pmf_alpha(a, active, weights)).sum()
}

/// `q(to | from)` of the composite proposal.
///
/// When zero move weights leave some toggle mass unassigned the index
/// distribution is renormalized; when no toggle is possible at all the chain
/// stays put with probability one.
pub fn proposal_log_density(to: &ActiveSet, from: &ActiveSet, config: &ProposalConfig) -> f64 {
    let mass = toggle_mass(from, &config.move_weights);
    if mass <= 0.0 {
        return if to == from { 0.0 } else { f64::NEG_INFINITY };
    }
    if to == from {
        return (1.0 - config.p_h).ln();
    }
    if to.symmetric_difference_len(from) != 1 {
        return f64::NEG_INFINITY;
    }
    let alpha = toggled_index(to, from);
    (config.p_h * pmf_alpha(alpha, from, &config.move_weights) / mass).ln()
}

fn toggled_index(a: &ActiveSet, b: &ActiveSet) -> usize {
    (0..a.dim())
        .find(|&i| a.contains(i) != b.contains(i))
        .expect("sets differ in exactly one index")
}

/// A proposed active set with `log q(proposed | current)` and
/// `log q(current | proposed)`.
#[derive(Clone, Debug)]
pub struct ActiveSetProposal {
    pub proposed: ActiveSet,
    pub log_q_forward: f64,
    pub log_q_reverse: f64,
}

pub fn propose_a<R: Rng + ?Sized>(current: &ActiveSet, config: &ProposalConfig, rng: &mut R) -> Result<ActiveSetProposal> {
    let weights = &config.move_weights;
    if weights.len() != current.dim() {
        return Err(Error::DimensionMismatch {
            what: "move weights",
            expected: current.dim(),
            got: weights.len(),
        });
    }
    let mass = toggle_mass(current, weights);
    let stay = ActiveSetProposal {
        proposed: current.clone(),
        log_q_forward: 0.0,
        log_q_reverse: 0.0,
    };
    if mass <= 0.0 {
        if config.p_h >= 1.0 {
            return Err(Error::Proposal(format!(
                "no legal toggle from {current:?} while p_h = 1"
            )));
        }
        return Ok(stay);
    }
    let change = config.p_h > 0.0 && rng.random::<f64>() < config.p_h;
    if !change {
        let lq = (1.0 - config.p_h).ln();
        return Ok(ActiveSetProposal {
            log_q_forward: lq,
            log_q_reverse: lq,
            ..stay
        });
    }
    let u = rng.random::<f64>() * mass;
    let mut acc = 0.0;
    let mut alpha = None;
    for a in 0..weights.len() {
        let p = pmf_alpha(a, current, weights);
        if p <= 0.0 {
            continue;
        }
        alpha = Some(a);
        acc += p;
        if u < acc {
            break;
        }
    }
    let alpha = alpha.expect("positive toggle mass");
    let proposed = current.toggled(alpha)?;
    let log_q_forward = proposal_log_density(&proposed, current, config);
    let log_q_reverse = proposal_log_density(current, &proposed, config);
    Ok(ActiveSetProposal {
        proposed,
        log_q_forward,
        log_q_reverse,
    })
}
