//! Maximin Latin hypercube designs on `[0, 1]^d`.
//!
//! Each restart draws a random LHD (a random permutation of the `n` strata
//! per column, uniformly jittered inside each stratum) and improves it by
//! swapping entries within a column whenever that increases the minimum
//! pairwise distance. The best design over all restarts is returned.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Minimum pairwise Euclidean distance between rows.
pub fn min_distance(x: &DMatrix<f64>) -> f64 {
    let sq = squared_distances(x);
    min_pair(&sq).0.sqrt()
}

fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut sq = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        for j in 0..i {
            let d: f64 = (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
            sq[(i, j)] = d;
            sq[(j, i)] = d;
        }
    }
    sq
}

fn min_pair(sq: &DMatrix<f64>) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..sq.nrows() {
        for j in 0..i {
            if sq[(i, j)] < best.0 {
                best = (sq[(i, j)], i, j);
            }
        }
    }
    best
}

fn random_lhd(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for c in 0..d {
        perm.shuffle(rng);
        for i in 0..n {
            x[(i, c)] = (perm[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    x
}

// Swap entries (i, c) and (j, c) and patch the squared distances of rows i, j.
fn swap_entries(x: &mut DMatrix<f64>, sq: &mut DMatrix<f64>, i: usize, j: usize, c: usize) {
    let (old_i, old_j) = (x[(i, c)], x[(j, c)]);
    x[(i, c)] = old_j;
    x[(j, c)] = old_i;
    for k in 0..x.nrows() {
        if k == i || k == j {
            continue;
        }
        let xk = x[(k, c)];
        let di = (old_j - xk).powi(2) - (old_i - xk).powi(2);
        sq[(i, k)] += di;
        sq[(k, i)] = sq[(i, k)];
        sq[(j, k)] -= di;
        sq[(k, j)] = sq[(j, k)];
    }
}

fn improve(x: &mut DMatrix<f64>, attempts: usize, rng: &mut ChaCha8Rng) {
    let n = x.nrows();
    let d = x.ncols();
    let mut sq = squared_distances(x);
    for _ in 0..attempts {
        let (current, a, b) = min_pair(&sq);
        let i = if rng.random::<bool>() { a } else { b };
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let c = rng.random_range(0..d);
        swap_entries(x, &mut sq, i, j, c);
        if min_pair(&sq).0 <= current {
            swap_entries(x, &mut sq, i, j, c);
        }
    }
}

/// Result of [`maximin_lhd_with_trace`].
#[derive(Clone, Debug)]
pub struct MaximinDesign {
    pub design: DMatrix<f64>,
    /// Minimum distance of each random starting design before improvement.
    pub candidate_min_distances: Vec<f64>,
}

pub fn maximin_lhd(n: usize, d: usize, seed: u64, restarts: usize) -> Result<DMatrix<f64>> {
    Ok(maximin_lhd_with_trace(n, d, seed, restarts)?.design)
}

pub fn maximin_lhd_with_trace(n: usize, d: usize, seed: u64, restarts: usize) -> Result<MaximinDesign> {
    if n < 2 || d == 0 || restarts == 0 {
        return Err(Error::InvalidInput(format!(
            "maximin LHD needs n >= 2, d >= 1 and at least one restart (got n={n}, d={d}, restarts={restarts})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut candidates = Vec::with_capacity(restarts);
    for _ in 0..restarts {
        let mut x = random_lhd(n, d, &mut rng);
        candidates.push(min_distance(&x));
        improve(&mut x, 20 * n, &mut rng);
        let score = min_distance(&x);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, x));
        }
    }
    Ok(MaximinDesign {
        design: best.expect("at least one restart").1,
        candidate_min_distances: candidates,
    })
}
