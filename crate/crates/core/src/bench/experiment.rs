//! Generate, fit, predict and score pipelines for the two synthetic
//! benchmarks.

use crate::error::Result;
use crate::mcmc::{run_chain, Chain, HmcConfig, McmcConfig, Problem};
use crate::predict::{inclusion_probabilities, predict_mean};
use crate::selection::{ProposalConfig, SelectionPrior, SizeWeight};

use super::dataset::Dataset;
use super::functions::{pepelyshev_dataset, simulate_sine, PepelyshevConfig, SineSimConfig};
use super::metrics::{kfold_split, mad, mse};

/// Sampler settings shared by the benchmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSettings {
    pub m: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub p_h: f64,
    pub size_weight: SizeWeight,
    pub hmc: HmcConfig,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            m: 10,
            iterations: 6000,
            burn_in: 1000,
            thin: 1,
            p_h: 0.6,
            size_weight: SizeWeight::Reciprocal,
            hmc: HmcConfig::default(),
        }
    }
}

impl FitSettings {
    pub fn mcmc_config(&self, d: usize, seed: u64) -> Result<McmcConfig> {
        let mut cfg = McmcConfig::new(d, self.iterations, self.burn_in, seed)?;
        cfg.prior = SelectionPrior::uniform(d, self.size_weight)?;
        cfg.proposal = ProposalConfig::with_p_h(self.p_h, d)?;
        cfg.hmc = self.hmc.clone();
        Ok(cfg)
    }
}

/// A fitted chain scored on held-out data (model units).
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub chain: Chain,
    pub inclusion: Vec<f64>,
    pub yhat: Vec<f64>,
    pub mse: f64,
    pub mad: f64,
}

pub fn fit_and_score(train: &Dataset, test: &Dataset, settings: &FitSettings, seed: u64) -> Result<FitOutcome> {
    let problem = Problem::new(&train.y, &train.x, settings.m)?;
    let chain = run_chain(&problem, &settings.mcmc_config(train.d(), seed)?)?;
    let inclusion = inclusion_probabilities(&chain, settings.burn_in)?;
    let pred = predict_mean(&chain, &test.x, &train.y, &train.x, settings.m, settings.burn_in, settings.thin)?;
    Ok(FitOutcome {
        mse: mse(&pred.yhat, &test.y)?,
        mad: mad(&pred.yhat, &test.y)?,
        inclusion,
        yhat: pred.yhat,
        chain,
    })
}

/// One Pepelyshev replicate: data from `seed`, chain seeded from it too.
pub fn run_pepelyshev_bench(data: &PepelyshevConfig, settings: &FitSettings, seed: u64) -> Result<FitOutcome> {
    let (train, test) = pepelyshev_dataset(data, seed)?;
    fit_and_score(&train, &test, settings, seed.wrapping_add(1))
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_rows: Vec<usize>,
    pub outcome: FitOutcome,
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub folds: Vec<FoldOutcome>,
    pub mean_mse: f64,
    pub mean_mad: f64,
}

/// k-fold cross-validation of an already standardized dataset. Fold `f`
/// runs its chain with seed `seed + f + 1`.
pub fn cross_validate(data: &Dataset, k: usize, settings: &FitSettings, seed: u64) -> Result<CrossValidation> {
    let splits = kfold_split(data.n(), k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for (f, test_rows) in splits.into_iter().enumerate() {
        let train_rows: Vec<usize> = (0..data.n()).filter(|i| test_rows.binary_search(i).is_err()).collect();
        let outcome = fit_and_score(
            &data.subset(&train_rows),
            &data.subset(&test_rows),
            settings,
            seed.wrapping_add(f as u64 + 1),
        )?;
        folds.push(FoldOutcome {
            fold: f,
            test_rows,
            outcome,
        });
    }
    let kf = folds.len() as f64;
    Ok(CrossValidation {
        mean_mse: folds.iter().map(|f| f.outcome.mse).sum::<f64>() / kf,
        mean_mad: folds.iter().map(|f| f.outcome.mad).sum::<f64>() / kf,
        folds,
    })
}

/// Simulates the sine data from `seed` and cross-validates with `k` folds.
pub fn run_sine_bench(sim: &SineSimConfig, k: usize, settings: &FitSettings, seed: u64) -> Result<CrossValidation> {
    let data = simulate_sine(sim, seed)?;
    cross_validate(&data, k, settings, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_pepelyshev_run_is_well_formed() {
        let data = PepelyshevConfig {
            n_train: 15,
            n_test: 10,
            d_total: 5,
            lhd_restarts: 2,
        };
        let settings = FitSettings {
            iterations: 40,
            burn_in: 10,
            m: 5,
            ..Default::default()
        };
        let out = run_pepelyshev_bench(&data, &settings, 3).unwrap();
        assert_eq!(out.inclusion.len(), 5);
        assert_eq!(out.yhat.len(), 10);
        assert!(out.mse.is_finite() && out.mse >= 0.0 && out.mad >= 0.0);
        assert_eq!(out.chain.len(), 40);
    }

    #[test]
    fn short_cross_validation() {
        let sim = SineSimConfig::new(30).unwrap();
        let settings = FitSettings {
            iterations: 20,
            burn_in: 5,
            m: 4,
            ..Default::default()
        };
        let cv = run_sine_bench(&sim, 3, &settings, 1).unwrap();
        assert_eq!(cv.folds.len(), 3);
        assert_eq!(cv.folds.iter().map(|f| f.test_rows.len()).sum::<usize>(), 30);
        assert!(cv.mean_mse.is_finite());
    }
}
