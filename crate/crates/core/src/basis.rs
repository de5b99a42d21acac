//! Scaled empirical principal-components design built from the observed predictors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{center_dataset, Centering, Dataset};
use crate::error::{check_len, Result};
use crate::linalg::thin_svd;

/// `Ũ = √n Û` from the thin SVD of the centered predictors, with its singular values.
///
/// Column signs are fixed so that the largest-magnitude entry of each column of `Û` is
/// positive (first occurrence on ties). Components whose singular value is numerically
/// zero are kept in `utilde` but embed new rows to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcBasis {
    pub utilde: Array2<f64>,
    pub d: Array1<f64>,
    pub col_means: Array1<f64>,
    pub y_mean: f64,
    /// `√n V̂ D̂⁻¹` on live components, zero columns on dead ones (`p x m`).
    projection: Array2<f64>,
    rank_tol: f64,
}

impl PcBasis {
    /// Centers `raw` and builds the basis. Returns the centered data alongside.
    pub fn from_raw(raw: &Dataset) -> Result<(Self, Dataset)> {
        let (centered, centering) = center_dataset(raw)?;
        let basis = pc_basis(&centered, &centering)?;
        Ok((basis, centered))
    }

    pub fn n(&self) -> usize {
        self.utilde.nrows()
    }

    pub fn m(&self) -> usize {
        self.utilde.ncols()
    }

    pub fn p(&self) -> usize {
        self.projection.nrows()
    }

    /// Singular values at or below this are treated as zero.
    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn is_live(&self, k: usize) -> bool {
        self.d[k] > self.rank_tol
    }

    /// Scores of a new (already centered) predictor row: `√n D̂⁻¹ V̂ᵀ z`.
    pub fn embed_row(&self, z_centered: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len(self.p(), z_centered.len(), "predictor row length")?;
        Ok(self.projection.t().dot(&z_centered))
    }

    /// Centers raw rows with the stored column means and embeds them.
    pub fn embed_raw_rows(&self, z_raw: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len(self.p(), z_raw.ncols(), "predictor matrix width")?;
        let centered = &z_raw - &self.col_means.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.projection))
    }
}

/// Thin SVD of the (centered) predictors, scaled to `Ũ = √n Û`.
pub fn pc_basis(data: &Dataset, centering: &Centering) -> Result<PcBasis> {
    check_len(data.p(), centering.col_means.len(), "centering width")?;
    let (n, p) = data.z.dim();
    let svd = thin_svd(data.z.view())?;
    let mut u = svd.u;
    let mut v = svd.v;
    let d = svd.d;
    let m = d.len();

    for k in 0..m {
        let col = u.column(k);
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(k).mapv_inplace(|x| -x);
            v.column_mut(k).mapv_inplace(|x| -x);
        }
    }

    let sqrt_n = (n as f64).sqrt();
    let d_max = d.first().copied().unwrap_or(0.0);
    let rank_tol = (n.max(p) as f64) * 1e-12 * d_max;
    let mut projection = v;
    for k in 0..m {
        let scale = if d[k] > rank_tol { sqrt_n / d[k] } else { 0.0 };
        projection.column_mut(k).mapv_inplace(|x| x * scale);
    }

    Ok(PcBasis {
        utilde: u.mapv(|x| x * sqrt_n),
        d,
        col_means: centering.col_means.clone(),
        y_mean: centering.y_mean,
        projection,
        rank_tol,
    })
}
