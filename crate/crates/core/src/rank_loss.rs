//! Pairwise Wilcoxon rank loss, its rank-score (negative gradient), and the
//! permutation-simulated score used to calibrate the first-stage penalty.
//!
//! The loss of a coefficient vector `θ` on `(y, X)` is
//!
//! ```text
//! Q(θ) = 1 / (n (n - 1)) · Σ_{i≠j} |(y_i - y_j) - (x_i - x_j)ᵀθ|
//! ```
//!
//! which only depends on the residuals `r = y - Xθ` through their pairwise
//! differences. Sorting the residuals gives the same value in `O(n log n)`:
//! `Σ_i (R_i - (n+1)/2) r_i = ½ Σ_{i<j} |r_i - r_j|` with `R_i` the (mid)rank of `r_i`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

/// A centered response paired with a centered design.
#[derive(Clone, Debug)]
pub struct RankProblem {
    y: Array1<f64>,
    design: ndarray::Array2<f64>,
}

impl RankProblem {
    /// Accepts `y` and `design` as given; both must already be centered.
    pub fn new(y: Array1<f64>, design: ndarray::Array2<f64>) -> Result<Self> {
        let n = y.len();
        check_len(n, design.nrows(), "design rows vs response length")?;
        if n < 2 {
            return Err(Error::InvalidInput("rank loss needs n >= 2".into()));
        }
        let tol = |v: ArrayView1<f64>| {
            1e-8 * (n as f64).sqrt() * v.iter().fold(1.0_f64, |a, x| a.max(x.abs()))
        };
        if y.sum().abs() > tol(y.view()) {
            return Err(Error::InvalidInput("response is not centered".into()));
        }
        for (k, col) in design.columns().into_iter().enumerate() {
            if col.sum().abs() > tol(col) {
                return Err(Error::InvalidInput(format!("design column {k} is not centered")));
            }
        }
        Ok(Self { y, design })
    }

    /// Centers `y` and the design columns before wrapping them.
    pub fn from_uncentered(y: ArrayView1<f64>, design: ArrayView2<f64>) -> Result<Self> {
        let (design, _) = crate::linalg::center_columns(design);
        let ybar = crate::linalg::mean(y);
        Self::new(y.mapv(|v| v - ybar), design)
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn design(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.design.ncols()
    }

    pub fn residuals(&self, theta: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len(self.m(), theta.len(), "coefficient length")?;
        Ok(&self.y - &self.design.dot(&theta))
    }
}

/// Rank-score vector, `2/(n(n-1)) · designᵀ η`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(pub Array1<f64>);

impl ScoreVector {
    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.dot(&self.0).sqrt()
    }
}

/// Direct enumeration over all ordered pairs. `O(n² m)`; the reference path.
pub fn rank_loss_pairwise(theta: ArrayView1<f64>, prob: &RankProblem) -> Result<f64> {
    check_len(prob.m(), theta.len(), "coefficient length")?;
    let n = prob.n();
    let fit = prob.design.dot(&theta);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += ((prob.y[i] - prob.y[j]) - (fit[i] - fit[j])).abs();
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Sort-based evaluation of the same loss.
pub fn rank_loss_fast(theta: ArrayView1<f64>, prob: &RankProblem) -> Result<f64> {
    let r = prob.residuals(theta)?;
    Ok(dispersion(r.as_slice().expect("owned array is contiguous")))
}

/// `1/(n(n-1)) Σ_{i≠j} |r_i - r_j|` from a residual vector, via sorting.
pub fn dispersion(residuals: &[f64]) -> f64 {
    let n = residuals.len();
    if n < 2 {
        return 0.0;
    }
    let center = residuals.iter().sum::<f64>() / n as f64;
    let mut sorted: Vec<f64> = residuals.iter().map(|r| r - center).collect();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, r)| (2.0 * (k + 1) as f64 - nf - 1.0) * r)
        .sum();
    2.0 * weighted / (nf * (nf - 1.0))
}

/// Midranks (1-based, ties share their average rank).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// `η_i = 2 R_i - (n + 1)` from midranks of the residuals.
pub fn rank_scores(residuals: &[f64]) -> Array1<f64> {
    let n = residuals.len() as f64;
    Array1::from_iter(midranks(residuals).into_iter().map(|r| 2.0 * r - (n + 1.0)))
}

/// Negative gradient of the loss at `θ` (a negated subgradient under ties).
pub fn rank_score(theta: ArrayView1<f64>, prob: &RankProblem) -> Result<ScoreVector> {
    let r = prob.residuals(theta)?;
    let eta = rank_scores(r.as_slice().expect("contiguous"));
    let n = prob.n() as f64;
    Ok(ScoreVector(prob.design.t().dot(&eta) * (2.0 / (n * (n - 1.0)))))
}

/// One draw of the permutation score `-2/(n(n-1)) · designᵀ ξ`, `ξ = 2r - (n+1)`
/// for a uniform permutation `r` of `1..=n`, seeded from `seed`.
pub fn simulated_score(design: ArrayView2<f64>, seed: u64) -> ScoreVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulated_score_with(design, &mut rng)
}

/// As [`simulated_score`], drawing the permutation from `rng`.
pub fn simulated_score_with<R: Rng + ?Sized>(design: ArrayView2<f64>, rng: &mut R) -> ScoreVector {
    let n = design.nrows();
    let mut perm: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    perm.shuffle(rng);
    score_for_permutation(design, &perm)
}

pub(crate) fn score_for_permutation(design: ArrayView2<f64>, perm: &[f64]) -> ScoreVector {
    let n = design.nrows() as f64;
    let xi = Array1::from_iter(perm.iter().map(|r| 2.0 * r - (n + 1.0)));
    ScoreVector(design.t().dot(&xi) * (-2.0 / (n * (n - 1.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn problem(y: Array1<f64>, x: Array2<f64>) -> RankProblem {
        RankProblem::from_uncentered(y.view(), x.view()).unwrap()
    }

    #[test]
    fn three_point_zero_design() {
        let p = RankProblem::new(array![-1.0, 0.0, 1.0], Array2::zeros((3, 2))).unwrap();
        let th = array![0.3, -7.0];
        let expected = 4.0 / 3.0;
        assert!((rank_loss_pairwise(th.view(), &p).unwrap() - expected).abs() < 1e-15);
        assert!((rank_loss_fast(th.view(), &p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn two_point_paths_agree() {
        let p = problem(array![0.0, 1.0], Array2::zeros((2, 1)));
        let th = array![0.0];
        assert_eq!(rank_loss_pairwise(th.view(), &p).unwrap(), 1.0);
        assert!((rank_loss_fast(th.view(), &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_and_all_ties_give_zero() {
        let x = array![[1.0], [-2.0], [1.0]];
        let p = RankProblem::new(x.column(0).mapv(|v| 2.0 * v), x.clone()).unwrap();
        assert!(rank_loss_pairwise(array![2.0].view(), &p).unwrap().abs() < 1e-15);
        assert_eq!(dispersion(&[5.0, 5.0, 5.0]), 0.0);
    }

    #[test]
    fn location_shift_leaves_loss_unchanged() {
        let p = problem(array![0.3, -1.2, 2.0, 0.1], array![[1.0], [0.0], [2.0], [-1.0]]);
        let th = array![0.4];
        let base = rank_loss_pairwise(th.view(), &p).unwrap();
        let shifted = RankProblem {
            y: p.y.mapv(|v| v + 17.5),
            design: p.design.clone(),
        };
        assert!((rank_loss_pairwise(th.view(), &shifted).unwrap() - base).abs() < 1e-12);
        assert!((rank_loss_fast(th.view(), &shifted).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn scores_for_three_distinct_residuals() {
        assert_eq!(rank_scores(&[-4.0, 0.5, 9.0]), array![-2.0, 0.0, 2.0]);
        assert_eq!(rank_scores(&[9.0, -4.0, 0.5]), array![2.0, -2.0, 0.0]);
        assert_eq!(midranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn tied_residuals_have_zero_score() {
        let p = RankProblem::new(Array1::zeros(4), array![[1.0], [-1.0], [2.0], [-2.0]]).unwrap();
        let s = rank_score(array![0.0].view(), &p).unwrap();
        assert_eq!(s.0, array![0.0]);
    }

    #[test]
    fn score_matches_finite_difference() {
        // Design column equal to the sorted residuals: moving θ up shrinks the spread.
        let y = array![-3.0, -1.0, 0.5, 1.5, 2.0];
        let x = y.clone().insert_axis(ndarray::Axis(1));
        let p = problem(y, x);
        let th = array![0.0];
        let s = rank_score(th.view(), &p).unwrap().0[0];
        let h = 1e-6;
        let f0 = rank_loss_pairwise(th.view(), &p).unwrap();
        let f1 = rank_loss_pairwise(array![h].view(), &p).unwrap();
        let fd = (f1 - f0) / h;
        assert!(s > 0.0);
        assert!(fd < 0.0);
        assert!((fd + s).abs() < 1e-6, "fd {fd}, score {s}");
    }

    #[test]
    fn simulated_score_identity_permutation_and_determinism() {
        let x = array![[1.0, 0.5], [-1.0, 0.0], [0.0, -0.5]];
        let s = score_for_permutation(x.view(), &[1.0, 2.0, 3.0]);
        // ξ = (-2, 0, 2), score = -(2/6)·Xᵀξ
        let expected = array![-(2.0 / 6.0) * (-2.0 - 0.0), -(2.0 / 6.0) * (-1.0 - 1.0)];
        assert!((&s.0 - &expected).iter().all(|e| e.abs() < 1e-15));
        assert_eq!(simulated_score(x.view(), 9), simulated_score(x.view(), 9));
    }

    fn instance() -> impl Strategy<Value = (Array1<f64>, Array2<f64>, Array1<f64>)> {
        (3usize..=30, 1usize..=6, any::<bool>()).prop_flat_map(|(n, m, ties)| {
            let levels = if ties { 4.0 } else { 0.0 };
            (
                prop::collection::vec(-5.0..5.0f64, n),
                prop::collection::vec(-2.0..2.0f64, n * m),
                prop::collection::vec(-1.0..1.0f64, m),
            )
                .prop_map(move |(y, x, th)| {
                    let y = if levels > 0.0 {
                        y.into_iter().map(|v| (v / 2.5).round()).collect()
                    } else {
                        y
                    };
                    (
                        Array1::from(y),
                        Array2::from_shape_vec((n, m), x).unwrap(),
                        Array1::from(th),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn convexity_along_segments((y, x, th) in instance(), t in 0.0..1.0f64, shift in -1.0..1.0f64) {
            let p = problem(y, x);
            let th2 = th.mapv(|v| v + shift);
            let mix = &th * t + &th2 * (1.0 - t);
            let lhs = rank_loss_fast(mix.view(), &p).unwrap();
            let rhs = t * rank_loss_fast(th.view(), &p).unwrap()
                + (1.0 - t) * rank_loss_fast(th2.view(), &p).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn score_is_a_subgradient((y, x, th) in instance(), dir in prop::collection::vec(-1.0..1.0f64, 6)) {
            let p = problem(y, x);
            let m = p.m();
            let delta = Array1::from_iter(dir.into_iter().take(m)).mapv(|v| v * 1e-3);
            let s = rank_score(th.view(), &p).unwrap();
            let lhs = rank_loss_fast((&th + &delta).view(), &p).unwrap();
            let rhs = rank_loss_fast(th.view(), &p).unwrap() - s.0.dot(&delta);
            prop_assert!(lhs >= rhs - 1e-10);
        }

        #[test]
        fn eta_is_bounded(r in prop::collection::vec(-3.0..3.0f64, 2..40)) {
            let n = r.len() as f64;
            let eta = rank_scores(&r);
            prop_assert!(eta.iter().all(|e| e.abs() <= n - 1.0));
            prop_assert!(eta.sum().abs() < 1e-9);
        }
    }
}
