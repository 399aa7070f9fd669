use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde_json::{json, Value};
use vsnngp::bench::{
    load_csv, load_features, run_pepelyshev_bench, run_sine_bench, Dataset, FitOutcome, PepelyshevConfig, Scaling,
    SineSimConfig, StandardizeOptions,
};
use vsnngp::mcmc::{read_chain_file, run_chain, write_chain_csv, Chain, Problem};
use vsnngp::predict::{inclusion_probabilities, predict_mean, write_predictions_csv};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(vsnngp::Error::from)?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    fs::write(path, text + "\n").map_err(vsnngp::Error::from)?;
    Ok(())
}

/// Training data on the model scale plus the map back to raw units.
struct Training {
    raw: Dataset,
    model: Dataset,
    scaling: Scaling,
}

fn load_training(cfg: &RunConfig) -> CliResult<Training> {
    let raw = load_csv(cfg.data_path()?, &cfg.target)?;
    let scaling = if cfg.standardize {
        raw.fit_scaling(StandardizeOptions::all())
    } else {
        Scaling::identity(raw.d())
    };
    let model = raw.transformed(&scaling)?;
    Ok(Training { raw, model, scaling })
}

fn inclusion_json(columns: &[String], inclusion: &[f64]) -> Value {
    Value::Array(
        columns
            .iter()
            .zip(inclusion)
            .map(|(c, p)| json!({ "column": c, "probability": p }))
            .collect(),
    )
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn trace_json(chain: &Chain) -> Value {
    let s = &chain.samples;
    json!({
        "iteration": (1..=s.len()).collect::<Vec<_>>(),
        "k": s.iter().map(|x| x.active.len()).collect::<Vec<_>>(),
        "gamma": s.iter().map(|x| x.gamma).collect::<Vec<_>>(),
        "rho": s.iter().map(|x| x.rho).collect::<Vec<_>>(),
        "sigma2": s.iter().map(|x| x.sigma2).collect::<Vec<_>>(),
    })
}

pub fn fit(cfg: &RunConfig) -> CliResult<()> {
    let data = load_training(cfg)?;
    let train = &data.model;
    let problem = Problem::new(&train.y, &train.x, cfg.m)?;
    let mcmc = cfg.fit_settings()?.mcmc_config(train.d(), cfg.seed)?;
    info!("fitting {} rows, {} predictors, {} iterations", train.n(), train.d(), cfg.iterations);
    let start = Instant::now();
    let chain = run_chain(&problem, &mcmc)?;
    let runtime = start.elapsed().as_secs_f64();

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    cfg.echo(dir)?;
    let chain_path = dir.join("chain.csv");
    write_chain_csv(&chain, BufWriter::new(File::create(&chain_path).map_err(vsnngp::Error::from)?))?;
    let inclusion = inclusion_probabilities(&chain, cfg.burn_in)?;
    let summary = json!({
        "n": train.n(),
        "d": train.d(),
        "iterations": chain.len(),
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "runtime_secs": runtime,
        "acceptance": {
            "selection": chain.selection_acceptance_rate(),
            "hmc": chain.hmc_acceptance_rate(),
        },
        "inclusion": inclusion_json(&train.columns, &inclusion),
        "standardization": {
            "x_center": data.scaling.x_center,
            "x_scale": data.scaling.x_scale,
            "y_center": data.scaling.y_center,
            "y_scale": data.scaling.y_scale,
        },
        "trace": trace_json(&chain),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    info!("wrote {} in {runtime:.1}s", chain_path.display());
    Ok(())
}

pub fn predict(cfg: &RunConfig, chain_path: &Path, test_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let data = load_training(cfg)?;
    let x_test = data.scaling.apply_x(&load_features(test_path, &data.raw.columns)?)?;
    let chain = read_chain_file(chain_path)?;
    if chain.dim() != data.model.d() {
        return Err(vsnngp::Error::DimensionMismatch {
            what: "chain predictors",
            expected: data.model.d(),
            got: chain.dim(),
        }
        .into());
    }
    if chain.len() <= cfg.burn_in {
        return Err(CliError::Config(format!(
            "chain has {} samples, not more than burn_in = {}",
            chain.len(),
            cfg.burn_in
        )));
    }
    let pred = predict_mean(&chain, &x_test, &data.model.y, &data.model.x, cfg.m, cfg.burn_in, cfg.thin)?;
    let yhat = data.scaling.inverse_y(&pred.yhat);
    let out = out.unwrap_or_else(|| cfg.output_dir.join("predictions.csv"));
    if let Some(parent) = out.parent() {
        create_dir(parent)?;
    }
    write_predictions_csv(&yhat, BufWriter::new(File::create(&out).map_err(vsnngp::Error::from)?))?;
    info!("{} predictions from {} samples written to {}", yhat.len(), pred.samples, out.display());
    Ok(())
}

pub fn importance(cfg: &RunConfig, chain_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let chain = read_chain_file(chain_path)?;
    let inclusion = inclusion_probabilities(&chain, cfg.burn_in)?;
    let names = match &cfg.data {
        Some(p) => load_csv(p, &cfg.target)?.columns,
        None => default_names(chain.dim()),
    };
    if names.len() != inclusion.len() {
        return Err(vsnngp::Error::DimensionMismatch {
            what: "chain predictors",
            expected: names.len(),
            got: inclusion.len(),
        }
        .into());
    }
    println!("column,probability");
    for (c, p) in names.iter().zip(&inclusion) {
        println!("{c},{p}");
    }
    if let Some(path) = out {
        write_json(&path, &json!({ "burn_in": cfg.burn_in, "inclusion": inclusion_json(&names, &inclusion) }))?;
    }
    Ok(())
}

fn outcome_json(out: &FitOutcome) -> Value {
    json!({
        "mse": out.mse,
        "mad": out.mad,
        "inclusion": out.inclusion,
        "acceptance": {
            "selection": out.chain.selection_acceptance_rate(),
            "hmc": out.chain.hmc_acceptance_rate(),
        },
    })
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Benchmark {
    Pepelyshev,
    Sine,
}

pub fn bench(cfg: &RunConfig, which: Benchmark) -> CliResult<()> {
    let settings = cfg.fit_settings()?;
    let start = Instant::now();
    let mut metrics = match which {
        Benchmark::Pepelyshev => {
            let out = run_pepelyshev_bench(&PepelyshevConfig::default(), &settings, cfg.seed)?;
            let mut v = outcome_json(&out);
            v["benchmark"] = json!("pepelyshev");
            v
        }
        Benchmark::Sine => {
            let cv = run_sine_bench(&SineSimConfig::new(100)?, cfg.folds, &settings, cfg.seed)?;
            let folds: Vec<Value> = cv
                .folds
                .iter()
                .map(|f| {
                    let mut v = outcome_json(&f.outcome);
                    v["fold"] = json!(f.fold + 1);
                    v["test_rows"] = json!(f.test_rows.iter().map(|r| r + 1).collect::<Vec<_>>());
                    v
                })
                .collect();
            json!({
                "benchmark": "sine",
                "mean_mse": cv.mean_mse,
                "mean_mad": cv.mean_mad,
                "folds": folds,
            })
        }
    };
    metrics["seed"] = json!(cfg.seed);
    metrics["runtime_secs"] = json!(start.elapsed().as_secs_f64());
    create_dir(&cfg.output_dir)?;
    cfg.echo(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("metrics.json"), &metrics)
}
