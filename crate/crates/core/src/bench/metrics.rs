//! Accuracy metrics and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn check(yhat: &[f64], y: &[f64]) -> Result<()> {
    if yhat.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions",
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("no observations to score".into()));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(yhat: &[f64], y: &[f64]) -> Result<f64> {
    check(yhat, y)?;
    Ok(yhat.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Mean absolute deviation of the prediction errors.
pub fn mad(yhat: &[f64], y: &[f64]) -> Result<f64> {
    check(yhat, y)?;
    Ok(yhat.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Random partition of `0..n` into `k` folds whose sizes differ by at most
/// one. Each fold is sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let y = [1.0, -2.0, 3.5];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mad(&y, &y).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        assert_eq!(mse(&shifted, &y).unwrap(), 1.0);
        assert_eq!(mad(&shifted, &y).unwrap(), 1.0);
        assert!(mse(&y[..2], &y).is_err());
    }

    #[test]
    fn folds_partition_indices() {
        let folds = kfold_split(100, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 20));
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let uneven = kfold_split(13, 4, 2).unwrap();
        let sizes: Vec<usize> = uneven.iter().map(|f| f.len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(kfold_split(3, 4, 1).is_err());
        assert!(kfold_split(10, 1, 1).is_err());
    }
}
