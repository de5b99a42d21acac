//! Seeded Monte Carlo sweep over a manifest.

use std::time::Instant;

use anyhow::Result;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rpcr_core::estimators::FitResult;
use rpcr_core::{fit_l1pcr, fit_lasso, fit_rpcr, Dataset, LambdaRule, MethodTag};
use serde::{Deserialize, Serialize};

use crate::manifest::{ExperimentManifest, SimConfig};
use crate::metrics::{mean, prediction_error, standard_error};
use crate::simgen::{gen_design, gen_noise, NoiseSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub config_id: usize,
    pub replicate: usize,
    pub method: MethodTag,
    pub prediction_error: f64,
    pub support_size: usize,
    pub lambda0: Option<f64>,
    pub lambda_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub config_id: usize,
    pub replicate: usize,
    pub method: Option<MethodTag>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub config_id: usize,
    pub replicate: usize,
    pub method: MethodTag,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config_id: usize,
    pub method: MethodTag,
    pub replicates: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub se_error: f64,
    pub mean_support: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub manifest_hash: String,
    pub seed: u64,
    pub configs: Vec<SimConfig>,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<Failure>,
    /// Wall-clock times; the only nondeterministic part of a run.
    pub timings: Vec<Timing>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentResult {
    /// Per-replicate errors of one method in one config, in replicate order.
    pub fn errors(&self, config_id: usize, method: MethodTag) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.config_id == config_id && r.method == method)
            .map(|r| (r.replicate, r.prediction_error))
            .collect()
    }
}

/// Stream `replicate` of the master seed.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

struct Outcome {
    records: Vec<ReplicateRecord>,
    failures: Vec<Failure>,
    timings: Vec<Timing>,
}

fn fit_method(
    method: MethodTag,
    data: &Dataset,
    manifest: &ExperimentManifest,
    tuning_seed: u64,
) -> rpcr_core::Result<FitResult> {
    let opts = &manifest.rpcr.solve;
    let rule = LambdaRule::CrossValidation {
        folds: manifest.cv_folds,
        grid_size: 50,
        min_ratio: 1e-3,
        seed: tuning_seed,
    };
    match method {
        MethodTag::Rpcr => {
            let mut cfg = manifest.rpcr.clone();
            cfg.lambda0.seed = tuning_seed;
            fit_rpcr(data, &cfg).map(|r| r.1)
        }
        MethodTag::L1pcr => fit_l1pcr(data, &rule, opts).map(|r| r.1),
        MethodTag::Lasso => fit_lasso(data, &rule, opts),
    }
}

fn run_replicate(manifest: &ExperimentManifest, cfg: &SimConfig, replicate: usize) -> Outcome {
    let mut out = Outcome {
        records: Vec::new(),
        failures: Vec::new(),
        timings: Vec::new(),
    };
    let mut rng = replicate_rng(manifest.seed, replicate);
    let spec = NoiseSpec {
        error_law: cfg.error_law,
        contamination: cfg.contamination,
    };
    let generated = gen_design(cfg.model, cfg.n, cfg.p, cfg.kappa, &mut rng)
        .and_then(|d| gen_noise(&d, &spec, &mut rng).map(|data| (d, data)));
    let (design, data) = match generated {
        Ok(v) => v,
        Err(e) => {
            log::warn!("config {} replicate {replicate}: generation failed: {e:#}", cfg.config_id);
            out.failures.push(Failure {
                config_id: cfg.config_id,
                replicate,
                method: None,
                message: format!("{e:#}"),
            });
            return out;
        }
    };
    let tuning_seed = rng.next_u64();
    let y_star_mean = design.y_star.mean().unwrap_or(0.0);
    let y_star = &design.y_star - y_star_mean;

    for &method in &manifest.methods {
        let start = Instant::now();
        let fit = fit_method(method, &data, manifest, tuning_seed);
        out.timings.push(Timing {
            config_id: cfg.config_id,
            replicate,
            method,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        match fit.map_err(anyhow::Error::from).and_then(|fit| {
            let err = prediction_error(fit.fitted_mean.view(), y_star.view())?;
            Ok((fit, err))
        }) {
            Ok((fit, err)) => out.records.push(ReplicateRecord {
                config_id: cfg.config_id,
                replicate,
                method,
                prediction_error: err,
                support_size: fit.support.len(),
                lambda0: fit.lambda_used.lambda0,
                lambda_hat: fit.lambda_used.lambda_hat,
            }),
            Err(e) => {
                log::warn!("config {} replicate {replicate} {method}: {e:#}", cfg.config_id);
                out.failures.push(Failure {
                    config_id: cfg.config_id,
                    replicate,
                    method: Some(method),
                    message: format!("{e:#}"),
                });
            }
        }
    }
    out
}

/// Runs every (config, replicate) cell. Cells run in a pool of `manifest.parallelism`
/// threads and are merged in (config, replicate, method) order, so the records do not
/// depend on the thread count. Failures are logged and counted, never fatal.
pub fn run_monte_carlo(manifest: &ExperimentManifest) -> Result<ExperimentResult> {
    manifest.validate()?;
    let configs = manifest.configs();
    let cells: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..manifest.replicates).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.parallelism)
        .build()?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(c, r)| run_replicate(manifest, &configs[c], r))
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut timings = Vec::new();
    for o in outcomes {
        records.extend(o.records);
        failures.extend(o.failures);
        timings.extend(o.timings);
    }
    let aggregates = aggregate(&configs, &manifest.methods, &records, &failures);
    Ok(ExperimentResult {
        manifest_hash: manifest.hash(),
        seed: manifest.seed,
        configs,
        records,
        failures,
        timings,
        aggregates,
    })
}

/// Mean and Monte Carlo standard error per (config, method) over successful replicates.
pub fn aggregate(
    configs: &[SimConfig],
    methods: &[MethodTag],
    records: &[ReplicateRecord],
    failures: &[Failure],
) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for cfg in configs {
        for &method in methods {
            let rows: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.config_id == cfg.config_id && r.method == method)
                .collect();
            let errors: Vec<f64> = rows.iter().map(|r| r.prediction_error).collect();
            let supports: Vec<f64> = rows.iter().map(|r| r.support_size as f64).collect();
            let failed = failures
                .iter()
                .filter(|f| f.config_id == cfg.config_id && f.method.is_none_or(|m| m == method))
                .count();
            out.push(Aggregate {
                config_id: cfg.config_id,
                method,
                replicates: errors.len(),
                failures: failed,
                mean_error: mean(&errors),
                se_error: standard_error(&errors),
                mean_support: mean(&supports),
            });
        }
    }
    out
}
