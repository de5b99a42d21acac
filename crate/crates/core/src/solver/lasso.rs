//! Least-squares lasso `(1/2n) ‖y - Xβ‖² + λ ‖β‖₁` by cyclic coordinate descent, and
//! k-fold cross-validation over a λ path.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SolveMethod, SolveOptions, SolveReport};
use crate::error::{check_len, Error, Result};
use crate::linalg::{center_columns, mean, soft_threshold};

/// Cross-validation curve over a λ grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub lambdas: Vec<f64>,
    /// Held-out squared error per λ, averaged over folds.
    pub mean_sse: Vec<f64>,
    pub best_index: usize,
    pub best_lambda: f64,
}

/// `size` log-spaced values from `‖Xᵀ(y - ȳ)‖∞ / n` down to `min_ratio` times that.
pub fn lasso_lambda_grid(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    size: usize,
    min_ratio: f64,
) -> Vec<f64> {
    let n = y.len() as f64;
    let yc = &y - mean(y);
    let top = design
        .t()
        .dot(&yc)
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        / n;
    log_grid(top, min_ratio, size)
}

pub(crate) fn log_grid(top: f64, min_ratio: f64, size: usize) -> Vec<f64> {
    if size == 0 {
        return Vec::new();
    }
    if size == 1 || !(top > 0.0) {
        return vec![top; size.min(1)];
    }
    let lo = min_ratio.ln();
    (0..size)
        .map(|k| top * (lo * k as f64 / (size - 1) as f64).exp())
        .collect()
}

fn is_orthogonal(design: ArrayView2<f64>) -> bool {
    let n = design.nrows() as f64;
    if design.ncols() > design.nrows()
        || design
            .axis_iter(Axis(1))
            .any(|c| (c.dot(&c) - n).abs() > 1e-6 * n)
    {
        return false;
    }
    let g = design.t().dot(&design);
    g.indexed_iter().all(|((i, j), v)| {
        let target = if i == j { n } else { 0.0 };
        (v - target).abs() <= 1e-6 * n
    })
}

/// Coordinate descent over the free columns, stored contiguously one column per row.
struct Cd {
    xt: Array2<f64>,
    col_sq: Vec<f64>,
    free: Vec<usize>,
    n: f64,
}

impl Cd {
    fn new(x: ArrayView2<f64>, mask: Option<&[bool]>) -> Self {
        let n = x.nrows() as f64;
        let free: Vec<usize> = (0..x.ncols())
            .filter(|&j| mask.is_none_or(|m| !m[j]) && x.column(j).iter().any(|v| *v != 0.0))
            .collect();
        let xt = x.select(Axis(1), &free).reversed_axes().as_standard_layout().into_owned();
        let col_sq = xt.rows().into_iter().map(|c| c.dot(&c) / n).collect();
        Self { xt, col_sq, free, n }
    }

    /// One pass over `coords`; returns the largest `col_sq · Δ²`.
    fn sweep(&self, coords: &[usize], b: &mut [f64], resid: &mut [f64], lambda: f64) -> f64 {
        let mut biggest = 0.0_f64;
        for &k in coords {
            let col = self.xt.row(k);
            let col = col.as_slice().expect("standard layout");
            let old = b[k];
            let dot: f64 = col.iter().zip(resid.iter()).map(|(a, r)| a * r).sum();
            let new = soft_threshold(dot / self.n + self.col_sq[k] * old, lambda) / self.col_sq[k];
            if new != old {
                let d = old - new;
                for (r, a) in resid.iter_mut().zip(col) {
                    *r += d * a;
                }
                b[k] = new;
                biggest = biggest.max(self.col_sq[k] * d * d);
            }
        }
        biggest
    }

    /// Duality gap and primal objective at `b` with residual `resid`.
    fn gap(&self, y: ArrayView1<f64>, b: &[f64], resid: &Array1<f64>, lambda: f64) -> (f64, f64) {
        let n = self.n;
        let primal = resid.dot(resid) / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>();
        let corr = self.xt.dot(resid).iter().fold(0.0_f64, |a, v| a.max(v.abs())) / n;
        let scale = if corr > lambda { lambda / corr } else { 1.0 };
        let diff = resid * (scale / n) - &(&y / n);
        let dual = y.dot(&y) / (2.0 * n) - 0.5 * n * diff.dot(&diff);
        (primal - dual, primal)
    }

    /// Full sweeps alternate with sweeps over the nonzero coordinates; stops once the
    /// duality gap is within `obj_tol · max(1, objective)`.
    fn run(&self, y: ArrayView1<f64>, b: &mut [f64], lambda: f64, obj_tol: f64, max_sweeps: usize) -> (usize, f64) {
        let all: Vec<usize> = (0..self.free.len()).collect();
        let mut resid = &y - &self.xt.t().dot(&ArrayView1::from(&*b));
        let mut inner_tol = obj_tol;
        let mut sweeps = 0;
        loop {
            let rs = resid.as_slice_mut().expect("contiguous residual");
            let full = self.sweep(&all, b, rs, lambda);
            sweeps += 1;
            let active: Vec<usize> = all.iter().copied().filter(|&k| b[k] != 0.0).collect();
            if full > inner_tol {
                while sweeps < max_sweeps {
                    sweeps += 1;
                    if self.sweep(&active, b, rs, lambda) <= inner_tol {
                        break;
                    }
                }
            }
            let (gap, objective) = self.gap(y, b, &resid, lambda);
            if gap <= obj_tol * objective.max(1.0) || sweeps >= max_sweeps || inner_tol < 1e-30 {
                return (sweeps, gap);
            }
            inner_tol *= 1e-2;
        }
    }
}

fn lasso_objective(x: ArrayView2<f64>, y: ArrayView1<f64>, beta: &Array1<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let resid = &y - &x.dot(beta);
    resid.dot(&resid) / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn validate(y: ArrayView1<f64>, design: ArrayView2<f64>, lambda: f64) -> Result<()> {
    check_len(design.nrows(), y.len(), "lasso response")?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lasso lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Lasso on a given design and response (no intercept handling).
pub fn solve_lasso_ls(
    y: ArrayView1<f64>,
    design: ArrayView2<f64>,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let m = design.ncols();
    if let Some(mask) = &opts.fixed_zero_mask {
        check_len(m, mask.len(), "fixed-zero mask")?;
    }
    solve_lasso_warm(y, design, lambda, opts, Array1::zeros(m))
}

fn solve_lasso_warm(
    y: ArrayView1<f64>,
    design: ArrayView2<f64>,
    lambda: f64,
    opts: &SolveOptions,
    mut beta: Array1<f64>,
) -> Result<SolveReport> {
    validate(y, design, lambda)?;
    let n = y.len() as f64;
    let orthogonal = opts.fixed_zero_mask.is_none() && is_orthogonal(design);
    let cd = Cd::new(design, opts.fixed_zero_mask.as_deref());
    let mut b: Vec<f64> = cd.free.iter().map(|&j| beta[j]).collect();
    let (iterations, gap) = if orthogonal {
        let z = cd.xt.dot(&y) / n;
        b = z.iter().map(|v| soft_threshold(*v, lambda)).collect();
        let resid = &y - &cd.xt.t().dot(&ArrayView1::from(&b));
        (1, cd.gap(y, &b, &resid, lambda).0)
    } else {
        cd.run(y, &mut b, lambda, opts.obj_tol, opts.max_iters)
    };
    beta.fill(0.0);
    for (&j, v) in cd.free.iter().zip(&b) {
        beta[j] = *v;
    }
    let objective = lasso_objective(design, y, &beta, lambda);
    Ok(SolveReport {
        theta_hat: beta,
        objective,
        certificate_gap: gap.max(0.0),
        iterations,
        converged: gap <= opts.obj_tol * objective.max(1.0),
        method: SolveMethod::Auto,
    })
}

/// K-fold cross-validated lasso. Folds come from a seeded permutation; each training
/// fold is centered on its own means and the path is warm-started down the grid.
/// Ties in mean held-out error go to the larger λ.
pub fn cv_lasso(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvCurve> {
    let n = y.len();
    check_len(n, design.nrows(), "cross-validation rows")?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidInput(format!(
            "folds must lie in 2..={n}, got {folds}"
        )));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let opts = SolveOptions::default();
    let mut total = vec![0.0; grid.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let (xt, xmeans) = center_columns(design.select(Axis(0), &train).view());
        let yt_raw = y.select(Axis(0), &train);
        let ymean = mean(yt_raw.view());
        let yt = &yt_raw - ymean;
        let xv = &design.select(Axis(0), &test) - &xmeans.view().insert_axis(Axis(0));
        let yv = y.select(Axis(0), &test);
        let mut beta = Array1::zeros(design.ncols());
        for &g in &order {
            let rep = solve_lasso_warm(yt.view(), xt.view(), grid[g], &opts, beta)?;
            beta = rep.theta_hat;
            let pred = xv.dot(&beta) + ymean;
            let err = &yv - &pred;
            total[g] += err.dot(&err);
        }
    }
    let mean_sse: Vec<f64> = total.iter().map(|t| t / folds as f64).collect();
    let mut best = order[0];
    for &g in &order[1..] {
        if mean_sse[g] < mean_sse[best] {
            best = g;
        }
    }
    Ok(CvCurve {
        lambdas: grid.to_vec(),
        mean_sse,
        best_index: best,
        best_lambda: grid[best],
    })
}
