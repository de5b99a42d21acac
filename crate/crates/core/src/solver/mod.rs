//! Convex solvers: weighted-ℓ1 penalized rank regression (interior-point LP and a
//! smoothed accelerated proximal method) and coordinate-descent lasso.

mod ipm;
pub mod lasso;
pub(crate) mod pairs;
mod smoothed;

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::spd_solve;
use crate::rank_loss::{rank_loss_fast, rank_scores, RankProblem};
use pairs::PairProblem;

pub use lasso::{cv_lasso, lasso_lambda_grid, solve_lasso_ls, CvCurve};

/// Observations above which [`SolveMethod::Auto`] switches from the LP to the smoothed method.
pub const AUTO_LP_MAX_N: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// LP for `n <= 200`, smoothed first-order above.
    #[default]
    Auto,
    Lp,
    SmoothedFirstOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Relative objective tolerance: `F(θ̂) <= F* + obj_tol · max(1, F*)`.
    pub obj_tol: f64,
    pub max_iters: usize,
    /// Coordinates forced to zero.
    pub fixed_zero_mask: Option<Vec<bool>>,
    pub method: SolveMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            obj_tol: 1e-6,
            max_iters: 20_000,
            fixed_zero_mask: None,
            method: SolveMethod::Auto,
        }
    }
}

impl SolveOptions {
    pub fn with_mask(&self, mask: Vec<bool>) -> Self {
        Self {
            fixed_zero_mask: Some(mask),
            ..self.clone()
        }
    }

    pub fn with_method(&self, method: SolveMethod) -> Self {
        Self {
            method,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.obj_tol > 0.0 && self.obj_tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "obj_tol must be positive, got {}",
                self.obj_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub theta_hat: Array1<f64>,
    pub objective: f64,
    /// Objective minus a certified lower bound on the optimum.
    pub certificate_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: SolveMethod,
}

impl SolveReport {
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.theta_hat)
    }
}

/// Threshold below which a coefficient counts as zero.
pub const SUPPORT_TOL: f64 = 1e-8;

pub fn support_of(theta: &Array1<f64>) -> Vec<usize> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abs() > SUPPORT_TOL)
        .map(|(j, _)| j)
        .collect()
}

/// Raw output of a backend on the reduced (unmasked) problem.
pub(crate) struct BackendOutput {
    pub theta: Array1<f64>,
    /// Dual candidate for the pair rows, `|v_k| <= c`.
    pub pair_dual: Vec<f64>,
    pub iterations: usize,
}

/// Minimizes `Q_n(θ) + Σ_j w_j |θ_j|` over `θ` with masked coordinates held at zero.
pub fn solve_weighted_rank_l1(
    prob: &RankProblem,
    weights: &Array1<f64>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let m = prob.m();
    check_len(m, weights.len(), "penalty weights")?;
    if let Some((j, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "weight {j} must be finite and nonnegative, got {w}"
        )));
    }
    let active: Vec<usize> = match &opts.fixed_zero_mask {
        Some(mask) => {
            check_len(m, mask.len(), "fixed-zero mask")?;
            (0..m).filter(|&j| !mask[j]).collect()
        }
        None => (0..m).collect(),
    };
    let method = match opts.method {
        SolveMethod::Auto if prob.n() <= AUTO_LP_MAX_N => SolveMethod::Lp,
        SolveMethod::Auto => SolveMethod::SmoothedFirstOrder,
        other => other,
    };

    let x = prob.design().select(Axis(1), &active);
    let w: Vec<f64> = active.iter().map(|&j| weights[j]).collect();
    let y = prob.y();
    let pp = PairProblem::new(x.view(), y, &w);

    let out = if active.is_empty() {
        BackendOutput {
            theta: Array1::zeros(0),
            pair_dual: sign_dual(&pp, &Array1::zeros(0)),
            iterations: 0,
        }
    } else if let Some(zero) = zero_is_optimal(&pp) {
        zero
    } else {
        match method {
            SolveMethod::Lp => ipm::solve(&pp, opts),
            _ => smoothed::solve(&pp, opts),
        }
    };

    let gap = certificate_gap(&pp, &out.theta, out.pair_dual);
    let mut theta_hat = Array1::zeros(m);
    for (k, &j) in active.iter().enumerate() {
        theta_hat[j] = out.theta[k];
    }
    let objective = rank_loss_fast(theta_hat.view(), prob)?
        + theta_hat
            .iter()
            .zip(weights.iter())
            .map(|(t, w)| w * t.abs())
            .sum::<f64>();
    let converged = gap <= opts.obj_tol * objective.max(1.0);
    Ok(SolveReport {
        theta_hat,
        objective,
        certificate_gap: gap,
        iterations: out.iterations,
        converged,
        method,
    })
}

/// `θ = 0` is optimal when the midrank score at zero lies inside the weight box.
fn zero_is_optimal(pp: &PairProblem) -> Option<BackendOutput> {
    let y = pp.y.to_vec();
    let n = pp.n() as f64;
    let eta = rank_scores(&y);
    let score = pp.x.t().dot(&eta) * (2.0 / (n * (n - 1.0)));
    let inside = score
        .iter()
        .zip(pp.weights)
        .all(|(s, &w)| w > 0.0 && s.abs() <= w);
    inside.then(|| {
        let theta = Array1::zeros(pp.m());
        BackendOutput {
            pair_dual: sign_dual(pp, &theta),
            theta,
            iterations: 0,
        }
    })
}

/// `c · sgn(r_ij)` on pair rows (zero on ties).
fn sign_dual(pp: &PairProblem, theta: &Array1<f64>) -> Vec<f64> {
    let r = (&pp.y - &pp.x.dot(theta)).to_vec();
    let mut d = vec![0.0; pp.pairs()];
    pp.pair_diffs(&r, &mut d);
    d.iter()
        .map(|v| pp.pair_weight * if *v > 0.0 { 1.0 } else if *v < 0.0 { -1.0 } else { 0.0 })
        .collect()
}

/// Duality gap `F(θ) - bᵀv` after projecting the candidate pair dual `v` onto the dual
/// feasible set `{ |v_k| <= c, |(Aᵀv)_j| <= w_j }`.
///
/// The excess of `Aᵀv` over the weight box is first removed by least-squares moves of
/// the pair duals strictly inside `(-c, c)`, clipping after each move. Whatever excess
/// remains is removed with a correction over all pairs (Gram matrix `n XᵀX`) followed
/// by a uniform shrink into the box.
pub(crate) fn certificate_gap(pp: &PairProblem, theta: &Array1<f64>, mut v: Vec<f64>) -> f64 {
    let objective = pp.objective(theta.view());
    let c = pp.pair_weight;
    if pp.m() > 0 {
        for _ in 0..5 {
            if !move_interior_duals(pp, &mut v) {
                break;
            }
        }
        let excess = dual_excess(pp, &v);
        if excess.iter().any(|e| *e != 0.0) {
            let delta = spd_solve(&pp.pair_gram(), excess.view());
            let shift = pp.x.dot(&delta).to_vec();
            let mut corr = vec![0.0; pp.pairs()];
            pp.pair_diffs(&shift, &mut corr);
            for (vk, ck) in v.iter_mut().zip(&corr) {
                *vk -= ck;
            }
        }
    }
    let biggest = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let shrink = if biggest > c { c / biggest } else { 1.0 };
    let mut b = vec![0.0; pp.pairs()];
    pp.pair_diffs(&pp.y.to_vec(), &mut b);
    let dual: f64 = b.iter().zip(&v).map(|(b, v)| b * v * shrink).sum();
    objective - dual
}

fn dual_excess(pp: &PairProblem, v: &[f64]) -> Array1<f64> {
    let s = pp.x.t().dot(&pp.aggregate(v));
    s.iter()
        .zip(pp.weights)
        .map(|(s, &w)| s - s.clamp(-w, w))
        .collect()
}

/// One least-squares correction restricted to interior pair duals. Returns false when
/// there was nothing left to correct.
fn move_interior_duals(pp: &PairProblem, v: &mut [f64]) -> bool {
    let excess = dual_excess(pp, v);
    if excess.iter().all(|e| *e == 0.0) {
        return false;
    }
    let c = pp.pair_weight;
    let n = pp.n();
    let mut interior = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if v[k].abs() < c {
                interior.push((k, i, j));
            }
            k += 1;
        }
    }
    if interior.is_empty() {
        return false;
    }
    // Σ (x_i - x_j)(x_i - x_j)ᵀ over interior pairs, as Xᵀ L X with the pair-graph Laplacian.
    let mut lap = ndarray::Array2::<f64>::zeros((n, n));
    for &(_, i, j) in &interior {
        lap[[i, j]] -= 1.0;
        lap[[j, i]] -= 1.0;
        lap[[i, i]] += 1.0;
        lap[[j, j]] += 1.0;
    }
    let gram = pp.x.t().dot(&lap.dot(&pp.x));
    let delta = spd_solve(&gram, excess.view());
    let fitted = pp.x.dot(&delta);
    for &(k, i, j) in &interior {
        v[k] = (v[k] - (fitted[i] - fitted[j])).clamp(-c, c);
    }
    true
}
