//! Thin wrappers over dense factorizations (faer for the SVD, nalgebra otherwise), on
//! ndarray storage.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub(crate) fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

/// Thin SVD `a = u diag(d) vᵀ` with `d` sorted nonincreasing; `u` is `n x k`, `v` is `p x k`,
/// `k = min(n, p)`.
pub struct ThinSvd {
    pub u: Array2<f64>,
    pub d: Array1<f64>,
    pub v: Array2<f64>,
}

pub fn thin_svd(a: ArrayView2<f64>) -> Result<ThinSvd> {
    let (rows, cols) = a.dim();
    let mat = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[[i, j]]);
    let svd = mat.thin_svd().map_err(|_| Error::SvdNoConvergence { rows, cols })?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let d = Array1::from_iter(order.iter().map(|&i| s[i]));
    let u = Array2::from_shape_fn((rows, k), |(i, c)| u[(i, order[c])]);
    let v = Array2::from_shape_fn((cols, k), |(j, c)| v[(j, order[c])]);
    Ok(ThinSvd { u, d, v })
}

/// Cholesky factor of a symmetric positive semidefinite matrix. Diagonal jitter is
/// added (and grown) until the factorization succeeds.
pub struct SpdFactor {
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    dim: usize,
}

impl SpdFactor {
    pub fn new(a: &Array2<f64>) -> Self {
        let m = a.nrows();
        if m == 0 {
            return Self { chol: None, dim: 0 };
        }
        let scale = (0..m).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(1e-300);
        let mut jitter = 0.0;
        loop {
            let mut mat = to_dmatrix(a.view());
            for i in 0..m {
                mat[(i, i)] += jitter;
            }
            if let Some(ch) = nalgebra::Cholesky::new(mat) {
                if ch.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                    return Self { chol: Some(ch), dim: m };
                }
            }
            jitter = if jitter == 0.0 { scale * 1e-13 } else { jitter * 100.0 };
        }
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        match &self.chol {
            None => Array1::zeros(0),
            Some(ch) => {
                let rhs = DVector::from_iterator(self.dim, b.iter().copied());
                Array1::from_iter(ch.solve(&rhs).iter().copied())
            }
        }
    }
}

/// Solves `a x = b` for symmetric positive semidefinite `a` (see [`SpdFactor`]).
pub fn spd_solve(a: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    SpdFactor::new(a).solve(b)
}

/// Column means and the column-centered copy of `a`.
pub fn center_columns(a: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let means = a
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(a.ncols()));
    (&a - &means.view().insert_axis(Axis(0)), means)
}

pub fn mean(v: ArrayView1<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.sum() / v.len() as f64
    }
}

/// Median with the midpoint convention for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}
