//! Vecchia neighbor sets under the active-set distance.
//!
//! Training points keep the order in which they were supplied, so chain
//! results depend on row order. Row `i` may only condition on rows `j < i`;
//! among those the `m` closest under `d_A` are kept, ties going to the
//! smaller index. The scan is exhaustive: the active set changes on most
//! sampler steps, so no spatial index would survive long enough to pay off.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::covariance::ActiveSet;
use crate::error::{Error, Result};
use crate::linalg::{point_distance, rows_distance};

/// Ordered neighbor lists, one per training row, built for a fixed active set.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    lists: Vec<Vec<usize>>,
    m: usize,
    active: ActiveSet,
}

impl NeighborGraph {
    /// Neighbors of row `i`, closest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn max_neighbors(&self) -> usize {
        self.m
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.lists.iter().map(|v| v.as_slice())
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn nearest(mut candidates: Vec<(f64, usize)>, m: usize) -> Vec<usize> {
    if candidates.len() > m {
        candidates.select_nth_unstable_by(m, by_distance_then_index);
        candidates.truncate(m);
    }
    candidates.sort_by(by_distance_then_index);
    candidates.into_iter().map(|(_, j)| j).collect()
}

fn check_shapes(x: &DMatrix<f64>, active: &ActiveSet, m: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("design matrix has no rows".into()));
    }
    if x.ncols() != active.dim() {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: active.dim(),
            got: x.ncols(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidInput("neighbor count m must be at least 1".into()));
    }
    Ok(())
}

/// Builds the neighbor graph of the rows of `x` (n×d) under `d_A`.
pub fn build_neighbor_graph(x: &DMatrix<f64>, active: &ActiveSet, m: usize) -> Result<NeighborGraph> {
    check_shapes(x, active, m)?;
    let idx = active.indices();
    let lists = (0..x.nrows())
        .map(|i| {
            let candidates = (0..i).map(|j| (rows_distance(x, i, j, idx), j)).collect();
            nearest(candidates, m)
        })
        .collect();
    Ok(NeighborGraph {
        lists,
        m,
        active: active.clone(),
    })
}

/// The `min(n, m)` rows of `x` closest to `u` under `d_A`, closest first.
pub fn test_neighbors(u: &[f64], x: &DMatrix<f64>, active: &ActiveSet, m: usize) -> Result<Vec<usize>> {
    check_shapes(x, active, m)?;
    if u.len() != active.dim() {
        return Err(Error::DimensionMismatch {
            what: "test point",
            expected: active.dim(),
            got: u.len(),
        });
    }
    let idx = active.indices();
    let candidates = (0..x.nrows()).map(|j| (point_distance(u, x, j, idx), j)).collect();
    Ok(nearest(candidates, m))
}
