//! Huber-smoothed pairwise loss minimized by accelerated proximal gradient steps
//! (FISTA with gradient-based restarts), with continuation `μ_k = μ₀ 4^{-k}`.
//!
//! Termination is decided by the LP duality gap of the unsmoothed problem. At each
//! check the iterate is also pushed onto a nearby vertex of the LP (the `|F|` pairs
//! with the smallest residuals fitted exactly, `F` the nonzero coordinates), which
//! gives an exact dual when the active set has been identified.

use ndarray::Array1;

use super::pairs::PairProblem;
use super::{certificate_gap, BackendOutput, SolveOptions};
use crate::linalg::{median, soft_threshold};

const CONTINUATION_ROUNDS: usize = 6;
const CHECK_EVERY: usize = 25;

struct Smoother<'p, 'a> {
    pp: &'p PairProblem<'a>,
    b: Vec<f64>,
    lipschitz_unit: f64,
    diffs: Vec<f64>,
}

impl Smoother<'_, '_> {
    /// Huber derivatives `clamp(r/μ, -1, 1)` of the pair residuals at `θ`, scaled by `c`.
    fn pair_dual(&mut self, theta: &Array1<f64>, mu: f64) -> Vec<f64> {
        let fit = self.pp.x.dot(theta).to_vec();
        self.pp.pair_diffs(&fit, &mut self.diffs);
        let c = self.pp.pair_weight;
        self.b
            .iter()
            .zip(&self.diffs)
            .map(|(b, d)| c * ((b - d) / mu).clamp(-1.0, 1.0))
            .collect()
    }

    fn gradient(&mut self, theta: &Array1<f64>, mu: f64) -> Array1<f64> {
        let v = self.pair_dual(theta, mu);
        -self.pp.x.t().dot(&self.pp.aggregate(&v))
    }
}

fn largest_eigenvalue(a: &ndarray::Array2<f64>) -> f64 {
    let m = a.nrows();
    if m == 0 {
        return 0.0;
    }
    let eig = nalgebra::SymmetricEigen::new(crate::linalg::to_dmatrix(a.view()));
    eig.eigenvalues.iter().fold(0.0, |acc: f64, v| acc.max(*v))
}

pub(crate) fn solve(pp: &PairProblem, opts: &SolveOptions) -> BackendOutput {
    let m = pp.m();
    let b = {
        let mut b = vec![0.0; pp.pairs()];
        pp.pair_diffs(&pp.y.to_vec(), &mut b);
        b
    };
    let n = pp.n() as f64;
    // IQR of the ordered-pair differences (a symmetric set) is twice the median |b|.
    let abs_b: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    let mut mu = 2.0 * median(&abs_b) / n;
    if !(mu > 0.0) {
        mu = 1e-3 * abs_b.iter().fold(1.0_f64, |a, v| a.max(*v)) / n;
    }
    let lipschitz_unit = pp.pair_weight * largest_eigenvalue(&pp.pair_gram()).max(1e-300);
    let mut sm = Smoother {
        pp,
        b,
        lipschitz_unit,
        diffs: vec![0.0; pp.pairs()],
    };

    let mut theta = Array1::<f64>::zeros(m);
    let mut iterations = 0;
    let round_cap = (opts.max_iters / CONTINUATION_ROUNDS).max(100);
    let mut round = 0;
    let mut done = false;
    let mut dual: Option<Vec<f64>> = None;

    while !done && iterations < opts.max_iters {
        let lipschitz = sm.lipschitz_unit / mu;
        let mut zeta = theta.clone();
        let mut t = 1.0_f64;
        let mut k = 0;
        let last_round = round + 1 >= CONTINUATION_ROUNDS;
        while k < round_cap && iterations < opts.max_iters {
            k += 1;
            iterations += 1;
            let grad = sm.gradient(&zeta, mu);
            let next: Array1<f64> = (0..m)
                .map(|j| soft_threshold(zeta[j] - grad[j] / lipschitz, pp.weights[j] / lipschitz))
                .collect();
            let step = &next - &zeta;
            let grad_map = step.iter().fold(0.0_f64, |a, v| a.max(v.abs())) * lipschitz;
            let restart = step.dot(&(&next - &theta)) < 0.0;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
            zeta = &next + &((&next - &theta) * momentum);
            t = if restart { 1.0 } else { t_next };
            theta = next;
            dual = None;

            if k % CHECK_EVERY == 0 || grad_map <= 1e-3 * mu {
                let obj = pp.objective(theta.view());
                if let Some((vertex, v)) = polish(&mut sm, &theta) {
                    let vobj = pp.objective(vertex.view());
                    if certificate_gap(pp, &vertex, v.clone()) <= 0.5 * opts.obj_tol * vobj.max(1.0) {
                        theta = vertex;
                        dual = Some(v);
                        done = true;
                        break;
                    }
                }
                let (gap, v) = best_gap(&mut sm, &theta, mu);
                dual = Some(v);
                if gap <= 0.5 * opts.obj_tol * obj.max(1.0) {
                    done = true;
                    break;
                }
                if grad_map <= 1e-3 * mu && !last_round {
                    break;
                }
            }
        }
        round += 1;
        mu *= 0.25;
    }

    let pair_dual = match dual {
        Some(v) => v,
        None => best_gap(&mut sm, &theta, mu * 4.0).1,
    };
    BackendOutput {
        pair_dual,
        theta,
        iterations,
    }
}

/// Best certificate over dual candidates built by [`active_dual`] at several residual
/// thresholds around `μ`.
fn best_gap(sm: &mut Smoother, theta: &Array1<f64>, mu: f64) -> (f64, Vec<f64>) {
    let fit = sm.pp.x.dot(theta).to_vec();
    sm.pp.pair_diffs(&fit, &mut sm.diffs);
    let r: Vec<f64> = sm.b.iter().zip(&sm.diffs).map(|(b, d)| b - d).collect();
    (-4..=1)
        .map(|e| {
            let v = active_dual(sm.pp, theta, &r, mu * 10f64.powi(e));
            (certificate_gap(sm.pp, theta, v.clone()), v)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty candidate list")
}

/// Pair duals at `c · sgn(r)` outside the band `|r| <= τ`. Inside the band they take the
/// minimum-norm values giving `(Aᵀv)_j = w_j sgn θ_j` on the nonzero coordinates, with
/// an active-set loop for duals that hit `±c`. Zero coordinates are left to the repair
/// step of the certificate.
fn active_dual(pp: &PairProblem, theta: &Array1<f64>, r: &[f64], tau: f64) -> Vec<f64> {
    let c = pp.pair_weight;
    let n = pp.n();
    let mut v: Vec<f64> = r
        .iter()
        .map(|r| if r.abs() <= tau { 0.0 } else { c * r.signum() })
        .collect();
    let nonzero: Vec<usize> = (0..pp.m()).filter(|&j| theta[j] != 0.0).collect();
    let f = nonzero.len();
    let mut band = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if r[k].abs() <= tau {
                band.push((k, i, j));
            }
            k += 1;
        }
    }
    if band.is_empty() || f == 0 {
        return v;
    }
    let rows: Vec<Array1<f64>> = band
        .iter()
        .map(|&(_, i, j)| nonzero.iter().map(|&q| pp.x[[i, q]] - pp.x[[j, q]]).collect())
        .collect();
    let mut free = vec![true; band.len()];
    for _ in 0..f + 5 {
        let s = pp.x.t().dot(&pp.aggregate(&v));
        let e: Array1<f64> = nonzero
            .iter()
            .map(|&j| s[j] - pp.weights[j] * theta[j].signum())
            .collect();
        if e.iter().fold(0.0_f64, |a, x| a.max(x.abs())) <= 1e-15 * c.max(1e-300) {
            break;
        }
        let mut gram = ndarray::Array2::<f64>::zeros((f, f));
        for (idx, a) in rows.iter().enumerate() {
            if free[idx] {
                gram += &a
                    .view()
                    .insert_axis(ndarray::Axis(1))
                    .dot(&a.view().insert_axis(ndarray::Axis(0)));
            }
        }
        let delta = crate::linalg::spd_solve(&gram, e.view());
        for (idx, &(k, _, _)) in band.iter().enumerate() {
            if free[idx] {
                let nv = v[k] - rows[idx].dot(&delta);
                if nv.abs() > c {
                    free[idx] = false;
                }
                v[k] = nv.clamp(-c, c);
            }
        }
    }
    v
}

/// Vertex through the `|F|` smallest-residual pairs that are linearly independent on the
/// nonzero coordinates `F`, with the pair duals solving stationarity on `F` there and
/// `c · sgn(r)` elsewhere.
fn polish(sm: &mut Smoother, theta: &Array1<f64>) -> Option<(Array1<f64>, Vec<f64>)> {
    let pp = sm.pp;
    let free: Vec<usize> = (0..pp.m()).filter(|&j| theta[j] != 0.0).collect();
    let f = free.len();
    if f == 0 {
        return None;
    }
    let n = pp.n();
    let fit = pp.x.dot(theta).to_vec();
    pp.pair_diffs(&fit, &mut sm.diffs);
    let mut order: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(pp.pairs());
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            order.push(((sm.b[k] - sm.diffs[k]).abs(), k, i, j));
            k += 1;
        }
    }
    let limit = (50 * f + 100).min(order.len());
    order.select_nth_unstable_by(limit - 1, |a, b| a.0.total_cmp(&b.0));
    order[..limit].sort_by(|a, b| a.0.total_cmp(&b.0));

    let row = |i: usize, j: usize| -> Vec<f64> {
        free.iter().map(|&c| pp.x[[i, c]] - pp.x[[j, c]]).collect()
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(f);
    let mut chosen = Vec::with_capacity(f);
    for &(_, k, i, j) in &order[..limit] {
        let a = row(i, j);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = a.clone();
        for q in &basis {
            let d: f64 = r.iter().zip(q).map(|(x, y)| x * y).sum();
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn > 1e-8 * norm.max(1e-300) {
            basis.push(r.iter().map(|v| v / rn).collect());
            chosen.push((k, i, j));
            if chosen.len() == f {
                break;
            }
        }
    }
    if chosen.len() < f {
        return None;
    }

    let a_z = nalgebra::DMatrix::from_fn(f, f, |r, c| {
        let (_, i, j) = chosen[r];
        pp.x[[i, free[c]]] - pp.x[[j, free[c]]]
    });
    let b_z = nalgebra::DVector::from_iterator(f, chosen.iter().map(|&(k, _, _)| sm.b[k]));
    let lu = a_z.clone().lu();
    let sol = lu.solve(&b_z)?;
    let mut vertex = Array1::zeros(pp.m());
    for (c, &j) in free.iter().enumerate() {
        vertex[j] = sol[c];
    }

    // Zero-residual pairs at a vertex come in cliques (equal residuals are transitive),
    // so the dual is solved over every pair tied at zero, not just the chosen ones.
    let fit = pp.x.dot(&vertex).to_vec();
    pp.pair_diffs(&fit, &mut sm.diffs);
    let r: Vec<f64> = sm.b.iter().zip(&sm.diffs).map(|(b, d)| b - d).collect();
    let scale = sm.b.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let v = active_dual(pp, &vertex, &r, 1e-9 * scale);
    Some((vertex, v))
}
