//! Penalty levels: the simulated stage-1 level `λ₀` and HBIC selection of the stage-2 `λ`.

use std::collections::HashMap;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;
use crate::rank_loss::{rank_loss_fast, rank_score, simulated_score_with, RankProblem};
use crate::solver::lasso::log_grid;
use crate::solver::{solve_weighted_rank_l1, support_of, SolveOptions, SolveReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lambda0Config {
    /// Multiplier applied to the quantile, `c > 1`.
    pub c: f64,
    /// The quantile level is `1 - alpha0`.
    pub alpha0: f64,
    /// Number of simulated scores.
    pub draws: usize,
    pub seed: u64,
}

impl Default for Lambda0Config {
    fn default() -> Self {
        Self {
            c: 1.01,
            alpha0: 0.10,
            draws: 500,
            seed: 0,
        }
    }
}

impl Lambda0Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0 && self.c.is_finite()) {
            return Err(Error::InvalidInput(format!("c must exceed 1, got {}", self.c)));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha0 must lie in (0, 1), got {}",
                self.alpha0
            )));
        }
        if self.draws < 100 {
            return Err(Error::InvalidInput(format!(
                "at least 100 draws required, got {}",
                self.draws
            )));
        }
        Ok(())
    }
}

/// Calibration output with the simulated sup-norms behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Calibration {
    pub lambda0: f64,
    /// The `⌈(1 - α₀) B⌉`-th smallest simulated norm.
    pub quantile: f64,
    pub order_index: usize,
    /// Sup-norms of the simulated scores, in draw order.
    pub norms: Vec<f64>,
}

/// `‖Ŝ°‖∞` for `draws` permutation scores from one seeded stream.
pub fn simulated_score_norms(design: ArrayView2<f64>, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|_| simulated_score_with(design, &mut rng).inf_norm())
        .collect()
}

/// Empirical `(1 - α₀)` quantile (order statistic `⌈(1 - α₀) B⌉`) of the simulated
/// sup-norms, times `c`.
pub fn calibrate_lambda0_detailed(
    design: ArrayView2<f64>,
    cfg: &Lambda0Config,
) -> Result<Lambda0Calibration> {
    cfg.validate()?;
    let norms = simulated_score_norms(design, cfg.draws, cfg.seed);
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let b = cfg.draws as f64;
    // Guard against (1 - α₀) B landing a rounding error above an integer.
    let order_index = (((1.0 - cfg.alpha0) * b - 1e-9).ceil() as usize).clamp(1, cfg.draws);
    let quantile = sorted[order_index - 1];
    Ok(Lambda0Calibration {
        lambda0: cfg.c * quantile,
        quantile,
        order_index,
        norms,
    })
}

pub fn calibrate_lambda0(design: ArrayView2<f64>, cfg: &Lambda0Config) -> Result<f64> {
    calibrate_lambda0_detailed(design, cfg).map(|c| c.lambda0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HbicConfig {
    /// Strictly decreasing positive penalty levels.
    pub grid: Vec<f64>,
}

pub const DEFAULT_HBIC_GRID_SIZE: usize = 30;
pub const DEFAULT_HBIC_GRID_RATIO: f64 = 0.01;

impl HbicConfig {
    pub fn new(grid: Vec<f64>) -> Result<Self> {
        let cfg = Self { grid };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Log-spaced from `‖S_n(0)‖∞` down to `ratio` times that.
    pub fn default_for(prob: &RankProblem, size: usize, ratio: f64) -> Result<Self> {
        let top = rank_score(Array1::zeros(prob.m()).view(), prob)?.inf_norm();
        if !(top > 0.0) {
            return Err(Error::InvalidInput(
                "score at zero vanishes; no penalty grid to search".into(),
            ));
        }
        Self::new(log_grid(top, ratio, size))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("empty HBIC grid".into()));
        }
        if self.grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput("HBIC grid values must be positive".into()));
        }
        if self.grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("HBIC grid must be strictly decreasing".into()));
        }
        Ok(())
    }
}

/// Complexity term `|A| · (ln ln n / n) · ln m`.
pub fn hbic_complexity(support_size: usize, n: usize, m: usize) -> f64 {
    let nf = n as f64;
    support_size as f64 * (nf.ln().ln() / nf) * (m as f64).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HbicPoint {
    pub lambda: f64,
    pub support: Vec<usize>,
    /// Loss of the unpenalized refit on `support`.
    pub refit_loss: f64,
    /// `ln(refit_loss)`; `-inf` for a perfect refit.
    pub log_loss: f64,
    pub complexity: f64,
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HbicSelection {
    pub lambda_hat: f64,
    pub index: usize,
    /// Weighted stage-2 fit at `lambda_hat`.
    pub report: SolveReport,
    pub weights: Array1<f64>,
    /// Unpenalized refit on the selected support.
    pub refit_theta: Array1<f64>,
    pub trace: Vec<HbicPoint>,
}

fn require_converged(rep: &SolveReport, stage: &str, lambda: f64) -> Result<()> {
    if rep.converged {
        Ok(())
    } else {
        Err(Error::NoConvergence {
            stage: stage.to_string(),
            lambda,
            gap: rep.certificate_gap,
            iterations: rep.iterations,
        })
    }
}

/// Unpenalized rank fit restricted to `support`.
pub fn refit_on_support(
    prob: &RankProblem,
    support: &[usize],
    opts: &SolveOptions,
) -> Result<(Array1<f64>, f64)> {
    let m = prob.m();
    if support.is_empty() {
        let zero = Array1::zeros(m);
        let loss = rank_loss_fast(zero.view(), prob)?;
        return Ok((zero, loss));
    }
    let mut mask = vec![true; m];
    for &j in support {
        mask[j] = false;
    }
    let rep = solve_weighted_rank_l1(prob, &Array1::zeros(m), &opts.with_mask(mask))?;
    require_converged(&rep, "refit", 0.0)?;
    let loss = rank_loss_fast(rep.theta_hat.view(), prob)?;
    Ok((rep.theta_hat, loss))
}

/// Stage-2 search: for each `λ` in the grid, weights from the pilot, weighted fit,
/// support, unpenalized refit, HBIC. Ties go to the larger `λ`.
///
/// Supports with `|A| > n / 2` leave the refit so few residual degrees of freedom that
/// its loss collapses towards zero. Such points get criterion `+inf` and the walk down
/// the grid stops there; an exact zero loss on a smaller support still scores `-inf`.
pub fn hbic_select(
    prob: &RankProblem,
    pilot: ArrayView1<f64>,
    penalty: &PenaltySpec,
    cfg: &HbicConfig,
    opts: &SolveOptions,
) -> Result<HbicSelection> {
    cfg.validate()?;
    let (n, m) = (prob.n(), prob.m());
    let mut refits: HashMap<Vec<usize>, (Array1<f64>, f64)> = HashMap::new();
    let mut trace: Vec<HbicPoint> = Vec::with_capacity(cfg.grid.len());
    let mut best: Option<(usize, SolveReport, Array1<f64>)> = None;

    for (idx, &lambda) in cfg.grid.iter().enumerate() {
        let weights = penalty.at_lambda(lambda)?.adaptive_weights(pilot);
        let rep = solve_weighted_rank_l1(prob, &weights, opts)?;
        require_converged(&rep, "stage 2", lambda)?;
        let support = support_of(&rep.theta_hat);
        if !refits.contains_key(&support) {
            let refit = refit_on_support(prob, &support, opts)?;
            refits.insert(support.clone(), refit);
        }
        let refit_loss = refits[&support].1;
        let log_loss = if refit_loss > 0.0 { refit_loss.ln() } else { f64::NEG_INFINITY };
        let complexity = hbic_complexity(support.len(), n, m);
        let saturated = 2 * support.len() > n;
        let criterion = if saturated { f64::INFINITY } else { log_loss + complexity };
        let better = match &best {
            None => true,
            Some((b, _, _)) => criterion < trace[*b].criterion,
        };
        trace.push(HbicPoint {
            lambda,
            support,
            refit_loss,
            log_loss,
            complexity,
            criterion,
        });
        if better {
            best = Some((idx, rep, weights));
        }
        if saturated {
            break;
        }
    }

    let (index, report, weights) = best.expect("grid is nonempty");
    let refit_theta = refits[&trace[index].support].0.clone();
    Ok(HbicSelection {
        lambda_hat: cfg.grid[index],
        index,
        report,
        weights,
        refit_theta,
        trace,
    })
}
