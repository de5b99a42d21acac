//! Leave-one-out prediction on a contaminated real-data design, and marginal screening.

use anyhow::{ensure, Result};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rpcr_core::estimators::{fit_l1pcr_design, fit_rpcr_design, FitResult};
use rpcr_core::{fit_lasso, Dataset, LambdaRule, MethodTag, PcBasis, RpcrConfig};
use serde::{Deserialize, Serialize};

use crate::metrics::{mean, standard_error};
use crate::monte_carlo::replicate_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoocvConfig {
    pub c_grid: Vec<f64>,
    pub methods: Vec<MethodTag>,
    pub seed: u64,
    pub cv_folds: usize,
    pub rpcr: RpcrConfig,
    /// Draw a fresh contamination matrix for every held-out observation.
    pub redraw_per_split: bool,
    pub parallelism: usize,
}

impl Default for LoocvConfig {
    fn default() -> Self {
        Self {
            c_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            methods: MethodTag::ALL.to_vec(),
            seed: 0,
            cv_folds: 10,
            rpcr: RpcrConfig::default(),
            redraw_per_split: false,
            parallelism: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationError {
    pub c: f64,
    pub observation: usize,
    pub method: MethodTag,
    pub prediction: f64,
    pub squared_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoocvSummary {
    pub c: f64,
    pub method: MethodTag,
    pub mean_squared_error: f64,
    pub failures: usize,
}

/// `first - second` per-observation squared errors, averaged, with `sd / √n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub c: f64,
    pub first: MethodTag,
    pub second: MethodTag,
    pub mean_difference: f64,
    pub se_difference: f64,
    pub units: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    pub summaries: Vec<LoocvSummary>,
    pub differences: Vec<PairedDifference>,
    pub observations: Vec<ObservationError>,
    pub failures: Vec<String>,
}

impl LoocvResult {
    pub fn mse(&self, c: f64, method: MethodTag) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.c == c && s.method == method)
            .map(|s| s.mean_squared_error)
    }
}

/// Top `k` columns by absolute Pearson correlation with `y`; ties go to the lower index.
/// Zero-variance columns have correlation 0.
pub fn screen_predictors(x: ArrayView2<f64>, y: ArrayView1<f64>, k: usize) -> Result<Vec<usize>> {
    ensure!(x.nrows() == y.len(), "{} rows vs {} responses", x.nrows(), y.len());
    ensure!(k <= x.ncols(), "cannot keep {k} of {} columns", x.ncols());
    let yc = &y - y.mean().unwrap_or(0.0);
    let yy = yc.dot(&yc);
    let corr: Vec<f64> = x
        .axis_iter(Axis(1))
        .map(|col| {
            let cc = &col - col.mean().unwrap_or(0.0);
            let xx = cc.dot(&cc);
            if xx > 0.0 && yy > 0.0 {
                (cc.dot(&yc) / (xx * yy).sqrt()).abs()
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    order.sort_by(|&a, &b| corr[b].total_cmp(&corr[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// `c · (p⁻¹ Σ_j Var̂(X_j))^{1/2}` with the `n - 1` variance denominator.
pub fn contamination_scale(x: ArrayView2<f64>, c: f64) -> f64 {
    let n = x.nrows() as f64;
    let avg_var = x
        .axis_iter(Axis(1))
        .map(|col| {
            let m = col.mean().unwrap_or(0.0);
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
        })
        .sum::<f64>()
        / x.ncols() as f64;
    c * avg_var.sqrt()
}

fn contaminate(x: &Array2<f64>, sigma: f64, seed: u64, stream: usize) -> Array2<f64> {
    let mut rng = replicate_rng(seed, stream);
    x + &Array2::from_shape_fn(x.dim(), |_| sigma * rng.sample::<f64, _>(StandardNormal))
}

fn without(idx: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| i != idx).collect()
}

/// Fits one method on the training rows only and predicts the held-out row.
fn predict_held_out(
    method: MethodTag,
    z: &Array2<f64>,
    basis: &PcBasis,
    y: ArrayView1<f64>,
    held_out: usize,
    cfg: &LoocvConfig,
    tuning_seed: u64,
) -> rpcr_core::Result<f64> {
    let train = without(held_out, y.len());
    let y_train = y.select(Axis(0), &train);
    let rule = LambdaRule::CrossValidation {
        folds: cfg.cv_folds,
        grid_size: 50,
        min_ratio: 1e-3,
        seed: tuning_seed,
    };
    let (fit, row): (FitResult, Array2<f64>) = match method {
        MethodTag::Rpcr => {
            let mut rc = cfg.rpcr.clone();
            rc.lambda0.seed = tuning_seed;
            let u_train = basis.utilde.select(Axis(0), &train);
            (
                fit_rpcr_design(u_train.view(), y_train.view(), &rc)?,
                basis.utilde.select(Axis(0), &[held_out]),
            )
        }
        MethodTag::L1pcr => {
            let u_train = basis.utilde.select(Axis(0), &train);
            (
                fit_l1pcr_design(u_train.view(), y_train.view(), &rule, &cfg.rpcr.solve)?,
                basis.utilde.select(Axis(0), &[held_out]),
            )
        }
        MethodTag::Lasso => {
            let data = Dataset::new(z.select(Axis(0), &train), y_train)?;
            (
                fit_lasso(&data, &rule, &cfg.rpcr.solve)?,
                z.select(Axis(0), &[held_out]),
            )
        }
    };
    Ok(fit.predict_design(row.view())?[0])
}

/// Contaminated leave-one-out protocol. For each `c` the design is contaminated once
/// (or per split with `redraw_per_split`), the PC basis is built from the full
/// contaminated matrix, and each method is tuned and fitted on the remaining rows.
pub fn run_loocv(data: &Dataset, cfg: &LoocvConfig) -> Result<LoocvResult> {
    let n = data.n();
    ensure!(n >= 10, "leave-one-out needs at least 10 observations, got {n}");
    ensure!(!cfg.c_grid.is_empty(), "empty c grid");
    ensure!(!cfg.methods.is_empty(), "no methods");
    ensure!(cfg.c_grid.iter().all(|c| *c >= 0.0 && c.is_finite()), "c values must be finite and nonnegative");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()?;
    let mut result = LoocvResult::default();

    for (ci, &c) in cfg.c_grid.iter().enumerate() {
        let sigma = contamination_scale(data.z.view(), c);
        let shared = if cfg.redraw_per_split {
            None
        } else {
            let z = contaminate(&data.z, sigma, cfg.seed, ci * (n + 1));
            let basis = PcBasis::from_raw(&Dataset::new(z.clone(), data.y.clone())?)?.0;
            Some((z, basis))
        };
        let splits: Vec<Vec<(MethodTag, std::result::Result<f64, String>)>> = pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let local;
                    let (z, basis) = match &shared {
                        Some((z, b)) => (z, b),
                        None => {
                            let z = contaminate(&data.z, sigma, cfg.seed, ci * (n + 1) + i + 1);
                            let built = Dataset::new(z.clone(), data.y.clone())
                                .and_then(|d| PcBasis::from_raw(&d))
                                .map(|(b, _)| (z, b));
                            match built {
                                Ok(v) => {
                                    local = v;
                                    (&local.0, &local.1)
                                }
                                Err(e) => {
                                    let msg = e.to_string();
                                    return cfg.methods.iter().map(|m| (*m, Err(msg.clone()))).collect();
                                }
                            }
                        }
                    };
                    let tuning_seed = cfg.seed ^ ((ci as u64) << 32 | i as u64);
                    cfg.methods
                        .iter()
                        .map(|&m| {
                            let pred = predict_held_out(m, z, basis, data.y.view(), i, cfg, tuning_seed)
                                .map_err(|e| e.to_string());
                            (m, pred)
                        })
                        .collect()
                })
                .collect()
        });

        let mut per_method: Vec<Vec<Option<f64>>> = vec![vec![None; n]; cfg.methods.len()];
        for (i, split) in splits.into_iter().enumerate() {
            for (k, (method, pred)) in split.into_iter().enumerate() {
                match pred {
                    Ok(pred) => {
                        let err = (data.y[i] - pred).powi(2);
                        per_method[k][i] = Some(err);
                        result.observations.push(ObservationError {
                            c,
                            observation: i,
                            method,
                            prediction: pred,
                            squared_error: err,
                        });
                    }
                    Err(msg) => {
                        log::warn!("c = {c}, observation {i}, {method}: {msg}");
                        result.failures.push(format!("c={c} obs={i} {method}: {msg}"));
                    }
                }
            }
        }
        for (k, &method) in cfg.methods.iter().enumerate() {
            let errs: Vec<f64> = per_method[k].iter().flatten().copied().collect();
            result.summaries.push(LoocvSummary {
                c,
                method,
                mean_squared_error: mean(&errs),
                failures: n - errs.len(),
            });
        }
        for a in 0..cfg.methods.len() {
            for b in a + 1..cfg.methods.len() {
                let diffs: Vec<f64> = (0..n)
                    .filter_map(|i| Some(per_method[a][i]? - per_method[b][i]?))
                    .collect();
                result.differences.push(PairedDifference {
                    c,
                    first: cfg.methods[a],
                    second: cfg.methods[b],
                    mean_difference: mean(&diffs),
                    se_difference: standard_error(&diffs),
                    units: diffs.len(),
                });
            }
        }
    }
    Ok(result)
}
