//! Implicit operator for the weighted rank-ℓ1 problem written as a weighted
//! least-absolute-deviation fit over unordered pairs plus penalty rows:
//!
//! ```text
//! F(θ) = Σ_{i<j} c |(y_i - y_j) - (x_i - x_j)ᵀθ| + Σ_j w_j |θ_j|,   c = 2 / (n (n - 1))
//! ```
//!
//! Pair rows are never materialised as a matrix. Products with the pair block go
//! through the `n`-vector `Xθ` and an antisymmetric aggregation, and the normal
//! matrix `Σ_{i<j} q_ij (x_i - x_j)(x_i - x_j)ᵀ` is `Xᵀ L X` with `L` the weighted
//! Laplacian of the complete graph on the observations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub(crate) struct PairProblem<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    /// Weight of each unordered pair.
    pub pair_weight: f64,
    /// Per-coordinate penalty weights (length `m`).
    pub weights: &'a [f64],
    /// Coordinates with a positive weight, i.e. those carrying a penalty row.
    pub penalized: Vec<usize>,
}

impl<'a> PairProblem<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: ArrayView1<'a, f64>, weights: &'a [f64]) -> Self {
        let n = x.nrows() as f64;
        let penalized = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
        Self {
            x,
            y,
            pair_weight: 2.0 / (n * (n - 1.0)),
            weights,
            penalized,
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn pairs(&self) -> usize {
        let n = self.n();
        n * (n - 1) / 2
    }

    /// Total rows: pairs followed by penalty rows.
    pub fn rows(&self) -> usize {
        self.pairs() + self.penalized.len()
    }

    /// Pair differences `v_i - v_j`, `i < j`, in row-major pair order.
    pub fn pair_diffs(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        let mut k = 0;
        for i in 0..n {
            let vi = v[i];
            for &vj in &v[i + 1..n] {
                out[k] = vi - vj;
                k += 1;
            }
        }
    }

    /// `g_i = Σ_{j>i} t_ij - Σ_{j<i} t_ji`, so that `Σ_{i<j} t_ij (x_i - x_j) = Xᵀ g`.
    pub fn aggregate(&self, t: &[f64]) -> Array1<f64> {
        let n = self.n();
        let mut g = Array1::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                g[i] += t[k];
                g[j] -= t[k];
                k += 1;
            }
        }
        g
    }

    /// Right-hand sides `b`: pair differences of `y`, zeros on penalty rows.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.rows()];
        let y = self.y.to_vec();
        self.pair_diffs(&y, &mut b[..self.pairs()]);
        b
    }

    /// Row costs: the pair weight, then `w_j` for each penalized coordinate.
    pub fn costs(&self) -> Vec<f64> {
        let mut c = vec![self.pair_weight; self.pairs()];
        c.extend(self.penalized.iter().map(|&j| self.weights[j]));
        c
    }

    /// `A θ` over all rows.
    pub fn apply(&self, theta: ArrayView1<f64>, out: &mut [f64]) {
        let fit = self.x.dot(&theta).to_vec();
        let p = self.pairs();
        self.pair_diffs(&fit, &mut out[..p]);
        for (r, &j) in self.penalized.iter().enumerate() {
            out[p + r] = theta[j];
        }
    }

    /// `Aᵀ t` over all rows.
    pub fn apply_t(&self, t: &[f64]) -> Array1<f64> {
        let p = self.pairs();
        let mut out = self.x.t().dot(&self.aggregate(&t[..p]));
        for (r, &j) in self.penalized.iter().enumerate() {
            out[j] += t[p + r];
        }
        out
    }

    /// `Aᵀ diag(q) A`.
    pub fn normal(&self, q: &[f64]) -> Array2<f64> {
        let n = self.n();
        let mut lap = Array2::<f64>::zeros((n, n));
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let w = q[k];
                lap[[i, j]] -= w;
                lap[[j, i]] -= w;
                lap[[i, i]] += w;
                lap[[j, j]] += w;
                k += 1;
            }
        }
        let mut out = self.x.t().dot(&lap.dot(&self.x));
        let p = self.pairs();
        for (r, &j) in self.penalized.iter().enumerate() {
            out[[j, j]] += q[p + r];
        }
        out
    }

    /// Gram matrix of the pair rows alone, `Σ_{i<j} (x_i - x_j)(x_i - x_j)ᵀ = n XᵀX` for
    /// centered `X`.
    pub fn pair_gram(&self) -> Array2<f64> {
        self.x.t().dot(&self.x) * self.n() as f64
    }

    /// Weighted objective from residual pair differences and `θ`.
    pub fn objective(&self, theta: ArrayView1<f64>) -> f64 {
        let r = &self.y - &self.x.dot(&theta);
        crate::rank_loss::dispersion(r.as_slice().expect("contiguous"))
            + theta
                .iter()
                .zip(self.weights)
                .map(|(t, w)| w * t.abs())
                .sum::<f64>()
    }
}
