//! Property tests over randomly generated problems.

mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use common::*;
use vsnngp::mcmc::{run_chain, Chain, McmcConfig, Problem, Sample};
use vsnngp::neighbors::build_neighbor_graph;
use vsnngp::nngp::{build_factors, build_factors_with_derivatives};
use vsnngp::predict::predict_mean;
use vsnngp::refprior::{fisher_matrix, log_reference_prior_from};
use vsnngp::selection::{propose_a, proposal_log_density, ProposalConfig};
use vsnngp::ActiveSet;

fn problem_data(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = rng(seed);
    let x = random_design(n, d, &mut rng);
    let y = (0..n)
        .map(|i| x[(i, 0)].sin() + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

fn mask_to_set(mask: u32, d: usize) -> ActiveSet {
    ActiveSet::new((0..d).filter(|i| mask & (1 << i) != 0).collect(), d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_conditioning_matches_dense(
        n in 4usize..14,
        d in 1usize..5,
        seed in any::<u64>(),
        mask in 1u32..16,
        gamma in 0.05..0.95f64,
        rho in 0.2..3.0f64,
    ) {
        let mask = mask & ((1 << d) - 1);
        prop_assume!(mask != 0);
        let (x, _) = problem_data(n, d, seed);
        let active = mask_to_set(mask, d);
        let g = Arc::new(build_neighbor_graph(&x, &active, n - 1).unwrap());
        let f = build_factors(&x, &active, gamma, rho, &g).unwrap();
        let k = corr_matrix(&x, active.indices(), gamma, rho);
        prop_assert!(rel_close(f.logdet(), log_det(&k), 1e-8));
        let dense = f.dense_ktilde();
        for (a, b) in dense.iter().zip(k.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fisher_matrix_is_exactly_symmetric(
        n in 6usize..14,
        m in 1usize..6,
        seed in any::<u64>(),
        gamma in 0.05..0.95f64,
        rho in 0.2..3.0f64,
    ) {
        let (x, _) = problem_data(n, 3, seed);
        let active = ActiveSet::new(vec![0, 2], 3).unwrap();
        let g = Arc::new(build_neighbor_graph(&x, &active, m).unwrap());
        let (f, derivs) = build_factors_with_derivatives(&x, &active, gamma, rho, &g).unwrap();
        let fisher = fisher_matrix(&x, &f, &derivs).unwrap();
        prop_assert_eq!(&fisher, &fisher.transpose());
        let lp = log_reference_prior_from(&x, &f, &derivs).unwrap();
        prop_assert!(lp.is_finite());
    }

    #[test]
    fn proposals_are_normalized_and_nonempty(
        d in 2usize..7,
        raw in prop::collection::vec(0.01..1.0f64, 6),
        mask in 1u32..64,
        p_h in 0.05..1.0f64,
        seed in any::<u64>(),
    ) {
        let mask = mask & ((1 << d) - 1);
        prop_assume!(mask != 0);
        let total_raw: f64 = raw[..d].iter().sum();
        let weights: Vec<f64> = raw[..d].iter().map(|w| w / total_raw).collect();
        let config = ProposalConfig::new(p_h, weights).unwrap();
        let from = mask_to_set(mask, d);
        let total: f64 = (1u32..(1 << d))
            .map(|m| proposal_log_density(&mask_to_set(m, d), &from, &config).exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mut rng = rng(seed);
        for _ in 0..50 {
            let p = propose_a(&from, &config, &mut rng).unwrap();
            prop_assert!(!p.proposed.is_empty());
            prop_assert!(p.proposed.symmetric_difference_len(&from) <= 1);
            let fwd = proposal_log_density(&p.proposed, &from, &config);
            prop_assert!((p.log_q_forward - fwd).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chains_stay_in_support(seed in any::<u64>(), n in 8usize..13, d in 2usize..5) {
        let (x, y) = problem_data(n, d, seed);
        let problem = Problem::new(&y, &x, 4).unwrap();
        let chain = run_chain(&problem, &McmcConfig::new(d, 25, 5, seed).unwrap()).unwrap();
        prop_assert_eq!(chain.len(), 25);
        for s in &chain.samples {
            prop_assert!(!s.active.is_empty());
            prop_assert!(s.sigma2 > 0.0 && s.sigma2.is_finite());
            prop_assert!(s.gamma > 0.0 && s.gamma < 1.0 && s.rho > 0.0);
            for j in 0..d {
                if !s.active.contains(j) {
                    prop_assert_eq!(s.beta[j], 0.0);
                }
            }
        }
    }

    #[test]
    fn predictions_are_affine_in_the_response(seed in any::<u64>()) {
        let (x, y1) = problem_data(12, 3, seed);
        let mut rng = rng(seed ^ 0x5eed);
        let y2: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let x_star = random_design(5, 3, &mut rng);
        let sample = |active: Vec<usize>, beta: Vec<f64>, gamma: f64, rho: f64| Sample {
            beta,
            sigma2: 1.0,
            gamma,
            rho,
            active: ActiveSet::new(active, 3).unwrap(),
            accepted_selection: false,
            accepted_hmc: false,
        };
        let chain = Chain {
            samples: vec![
                sample(vec![0], vec![0.4, 0.0, 0.0], 0.7, 0.9),
                sample(vec![0, 2], vec![-0.2, 0.0, 1.1], 0.3, 1.7),
            ],
            burn_in: 0,
        };
        let pred = |y: &[f64]| predict_mean(&chain, &x_star, y, &x, 4, 0, 1).unwrap().yhat;
        let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        let (p1, p2, p12, p0) = (pred(&y1), pred(&y2), pred(&sum), pred(&[0.0; 12]));
        for i in 0..5 {
            prop_assert!((p1[i] + p2[i] - p0[i] - p12[i]).abs() < 1e-10);
        }
    }
}
