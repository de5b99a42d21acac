//! Primal-dual interior-point method (Mehrotra predictor-corrector) for the rank-ℓ1 LP.
//!
//! The LAD form `min_θ Σ_k c_k |b_k - a_kᵀθ|` is solved through its bounded dual
//!
//! ```text
//! min  -bᵀx   s.t.  Aᵀx = Aᵀc,  0 <= x <= 2c
//! ```
//!
//! whose equality multipliers are `-θ`. The slack pair `(w, z)` of the bounds is the
//! positive/negative split of the residuals `b - Aθ`, so each iterate carries the
//! primal slack variables of the original LP. Every Newton step solves one `m x m`
//! system with the normal matrix `Aᵀ diag(q) A`.

use ndarray::Array1;

use super::pairs::PairProblem;
use super::{BackendOutput, SolveOptions};
use crate::linalg::SpdFactor;

const STEP_DAMPING: f64 = 0.99995;
const MAX_IPM_ITERATIONS: usize = 200;

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn solve(pp: &PairProblem, opts: &SolveOptions) -> BackendOutput {
    let rows = pp.rows();
    let b = pp.rhs();
    let c = pp.costs();
    let f: Vec<f64> = b.iter().map(|v| -v).collect();

    let mut x = c.clone();
    let mut s = c.clone();

    // Dual start: least-squares fit of f on A, then split the residual into z - w.
    let normal = pp.normal(&vec![1.0; rows]);
    let mut y = SpdFactor::new(&normal).solve(pp.apply_t(&f).view());
    let mut ay = vec![0.0; rows];
    pp.apply(y.view(), &mut ay);
    let r0: Vec<f64> = f.iter().zip(&ay).map(|(f, a)| f - a).collect();
    let shift = 1e-3 * (r0.iter().map(|r| r.abs()).sum::<f64>() / rows as f64).max(1e-8);
    let mut z: Vec<f64> = r0.iter().map(|r| r.max(0.0) + shift).collect();
    let mut w: Vec<f64> = r0.iter().map(|r| (-r).max(0.0) + shift).collect();

    let budget = opts.max_iters.min(MAX_IPM_ITERATIONS);
    let mut iterations = 0;
    let mut q = vec![0.0; rows];
    let mut rr = vec![0.0; rows];
    let mut dx = vec![0.0; rows];
    let mut a_dy = vec![0.0; rows];
    let mut tmp = vec![0.0; rows];

    while iterations < budget {
        let gap = dot(&x, &z) + dot(&s, &w);
        let theta = y.mapv(|v| -v);
        let obj = pp.objective(theta.view());
        if gap <= 0.1 * opts.obj_tol * obj.max(1.0) {
            break;
        }
        iterations += 1;

        for k in 0..rows {
            q[k] = 1.0 / (z[k] / x[k] + w[k] / s[k]);
            rr[k] = z[k] - w[k];
        }
        let factor = SpdFactor::new(&pp.normal(&q));

        // Affine-scaling predictor.
        for k in 0..rows {
            tmp[k] = q[k] * rr[k];
        }
        let dy = factor.solve(pp.apply_t(&tmp).view());
        pp.apply(dy.view(), &mut a_dy);
        for k in 0..rows {
            dx[k] = q[k] * (a_dy[k] - rr[k]);
        }
        let ds: Vec<f64> = dx.iter().map(|v| -v).collect();
        let dz: Vec<f64> = (0..rows).map(|k| -z[k] * (dx[k] / x[k] + 1.0)).collect();
        let dw: Vec<f64> = (0..rows).map(|k| -w[k] * (ds[k] / s[k] + 1.0)).collect();
        let mut fp = max_step(&x, &dx).min(max_step(&s, &ds));
        let mut fd = max_step(&w, &dw).min(max_step(&z, &dz));
        fp = (STEP_DAMPING * fp).min(1.0);
        fd = (STEP_DAMPING * fd).min(1.0);

        let (dy, dz, dw) = if fp.min(fd) < 1.0 {
            // Centering-corrector with the Mehrotra heuristic for the barrier weight.
            let mu0 = dot(&z, &x) + dot(&w, &s);
            let mut g = 0.0;
            for k in 0..rows {
                g += (z[k] + fd * dz[k]) * (x[k] + fp * dx[k])
                    + (w[k] + fd * dw[k]) * (s[k] + fp * ds[k]);
            }
            let mu = mu0 * (g / mu0).powi(3) / (2.0 * rows as f64);
            let dxdz: Vec<f64> = (0..rows).map(|k| dx[k] * dz[k]).collect();
            let dsdw: Vec<f64> = (0..rows).map(|k| ds[k] * dw[k]).collect();
            // h_k = mu (1/x - 1/s) - (z - w) - dxdz/x + dsdw/s; dx = q (A dy + h)
            let h: Vec<f64> = (0..rows)
                .map(|k| mu * (1.0 / x[k] - 1.0 / s[k]) - rr[k] - dxdz[k] / x[k] + dsdw[k] / s[k])
                .collect();
            for k in 0..rows {
                tmp[k] = -q[k] * h[k];
            }
            let dy = factor.solve(pp.apply_t(&tmp).view());
            pp.apply(dy.view(), &mut a_dy);
            for k in 0..rows {
                dx[k] = q[k] * (a_dy[k] + h[k]);
            }
            let dz: Vec<f64> = (0..rows)
                .map(|k| mu / x[k] - z[k] - dxdz[k] / x[k] - z[k] / x[k] * dx[k])
                .collect();
            let dw: Vec<f64> = (0..rows)
                .map(|k| mu / s[k] - w[k] - dsdw[k] / s[k] + w[k] / s[k] * dx[k])
                .collect();
            let ds: Vec<f64> = dx.iter().map(|v| -v).collect();
            fp = (STEP_DAMPING * max_step(&x, &dx).min(max_step(&s, &ds))).min(1.0);
            fd = (STEP_DAMPING * max_step(&w, &dw).min(max_step(&z, &dz))).min(1.0);
            (dy, dz, dw)
        } else {
            (dy, dz, dw)
        };

        for k in 0..rows {
            x[k] += fp * dx[k];
            s[k] -= fp * dx[k];
            z[k] += fd * dz[k];
            w[k] += fd * dw[k];
        }
        y.scaled_add(fd, &dy);
    }

    let mut theta: Array1<f64> = y.mapv(|v| -v);
    snap_zero_coordinates(pp, &mut theta, &x, &s, &z, &w, opts.obj_tol);

    let pairs = pp.pairs();
    let pair_dual = (0..pairs).map(|k| x[k] - c[k]).collect();
    BackendOutput {
        theta,
        pair_dual,
        iterations,
    }
}

/// Interior iterates leave exact zeros at O(gap). A penalty row whose bound slacks are
/// both larger than its residual split is off its bounds, so complementarity forces
/// the coordinate to zero there.
fn snap_zero_coordinates(
    pp: &PairProblem,
    theta: &mut Array1<f64>,
    x: &[f64],
    s: &[f64],
    z: &[f64],
    w: &[f64],
    obj_tol: f64,
) {
    let pairs = pp.pairs();
    let before = pp.objective(theta.view());
    let mut snapped = theta.clone();
    let mut any = false;
    for (r, &j) in pp.penalized.iter().enumerate() {
        let k = pairs + r;
        if x[k].min(s[k]) > z[k].max(w[k]) {
            snapped[j] = 0.0;
            any = true;
        }
    }
    if any && pp.objective(snapped.view()) <= before + 0.1 * obj_tol * before.max(1.0) {
        *theta = snapped;
    }
}
