//! End-to-end fits: two-stage rank regression on the PC basis (RPCR), lasso on the PC
//! basis (L1PCR), and lasso on the raw predictors (LASSO).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::basis::PcBasis;
use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::linalg::{center_columns, mean, median};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::rank_loss::{rank_score, RankProblem};
use crate::solver::{
    cv_lasso, lasso_lambda_grid, solve_lasso_ls, solve_weighted_rank_l1, support_of, CvCurve,
    SolveMethod, SolveOptions, SolveReport,
};
use crate::tuning::{
    calibrate_lambda0, hbic_select, HbicConfig, HbicPoint, Lambda0Config, DEFAULT_HBIC_GRID_RATIO,
    DEFAULT_HBIC_GRID_SIZE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MethodTag {
    Rpcr,
    L1pcr,
    Lasso,
}

impl MethodTag {
    pub const ALL: [MethodTag; 3] = [MethodTag::Rpcr, MethodTag::L1pcr, MethodTag::Lasso];
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodTag::Rpcr => "RPCR",
            MethodTag::L1pcr => "L1PCR",
            MethodTag::Lasso => "LASSO",
        })
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RPCR" => Ok(MethodTag::Rpcr),
            "L1PCR" => Ok(MethodTag::L1pcr),
            "LASSO" => Ok(MethodTag::Lasso),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpcrConfig {
    pub lambda0: Lambda0Config,
    /// Explicit stage-2 grid; the default grid is built from the data when absent.
    pub hbic_grid: Option<Vec<f64>>,
    pub hbic_grid_size: usize,
    pub hbic_grid_ratio: f64,
    pub penalty: PenaltyFamily,
    /// Penalty shape; the family default when absent.
    pub penalty_a: Option<f64>,
    pub solve: SolveOptions,
}

impl Default for RpcrConfig {
    fn default() -> Self {
        Self {
            lambda0: Lambda0Config::default(),
            hbic_grid: None,
            hbic_grid_size: DEFAULT_HBIC_GRID_SIZE,
            hbic_grid_ratio: DEFAULT_HBIC_GRID_RATIO,
            penalty: PenaltyFamily::Mcp,
            penalty_a: None,
            solve: SolveOptions::default(),
        }
    }
}

impl RpcrConfig {
    fn penalty_spec(&self) -> Result<PenaltySpec> {
        let a = self.penalty_a.unwrap_or_else(|| self.penalty.default_a());
        // The level is set per grid point; 1.0 only satisfies construction.
        PenaltySpec::new(self.penalty, a, 1.0)
    }
}

/// How the least-squares lasso level is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed(f64),
    CrossValidation {
        folds: usize,
        grid_size: usize,
        min_ratio: f64,
        seed: u64,
    },
}

impl LambdaRule {
    /// Ten folds over 50 log-spaced levels down to `1e-3 λ_max`.
    pub fn cv(seed: u64) -> Self {
        LambdaRule::CrossValidation {
            folds: 10,
            grid_size: 50,
            min_ratio: 1e-3,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub lambda: f64,
    pub objective: f64,
    pub certificate_gap: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

impl StageReport {
    fn new(stage: &str, lambda: f64, rep: &SolveReport) -> Self {
        Self {
            stage: stage.to_string(),
            lambda,
            objective: rep.objective,
            certificate_gap: rep.certificate_gap,
            iterations: rep.iterations,
            method: rep.method,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stages: Vec<StageReport>,
    pub pilot: Option<Array1<f64>>,
    pub hbic_trace: Vec<HbicPoint>,
    /// Unpenalized refit on the selected support.
    pub refit_theta: Option<Array1<f64>>,
    pub cv: Option<CvCurve>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaUsed {
    /// Stage-1 level (RPCR only).
    pub lambda0: Option<f64>,
    /// Selected level of the reported fit.
    pub lambda_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method_tag: MethodTag,
    pub theta_hat: Array1<f64>,
    pub support: Vec<usize>,
    /// `design · θ̂` on the centered training design.
    pub fitted_mean: Array1<f64>,
    /// Location of the residuals `y - ȳ - fitted_mean`: median for RPCR, mean otherwise.
    pub intercept: f64,
    pub y_mean: f64,
    /// Column means of the design the fit was computed on.
    pub design_means: Array1<f64>,
    pub lambda_used: LambdaUsed,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    /// Predictions for rows on the fit's design scale (PC scores for RPCR/L1PCR,
    /// predictors for LASSO): `(x - x̄)ᵀθ̂ + intercept + ȳ`.
    pub fn predict_design(&self, rows: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_len(self.theta_hat.len(), rows.ncols(), "prediction rows width")?;
        let offset = self.design_means.dot(&self.theta_hat);
        Ok(rows.dot(&self.theta_hat) - offset + self.intercept + self.y_mean)
    }

    /// Training-scale fitted values `fitted_mean + intercept + ȳ`.
    pub fn fitted_values(&self) -> Array1<f64> {
        &self.fitted_mean + (self.intercept + self.y_mean)
    }
}

/// Predictions for raw predictor rows from a PC-basis fit.
pub fn predict(fit: &FitResult, basis: &PcBasis, z_new: ArrayView2<f64>) -> Result<Array1<f64>> {
    if fit.method_tag == MethodTag::Lasso {
        return Err(Error::InvalidInput(
            "LASSO fits predict from raw predictors; use predict_design".into(),
        ));
    }
    check_len(basis.m(), fit.theta_hat.len(), "basis components vs coefficients")?;
    fit.predict_design(basis.embed_raw_rows(z_new)?.view())
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

/// RPCR on a dataset: centering, PC basis, then [`fit_rpcr_design`] on `Ũ`.
pub fn fit_rpcr(data: &Dataset, cfg: &RpcrConfig) -> Result<(PcBasis, FitResult)> {
    let (basis, _) = PcBasis::from_raw(data)?;
    let fit = fit_rpcr_design(basis.utilde.view(), data.y.view(), cfg)?;
    Ok((basis, fit))
}

/// RPCR on a given design (centered internally): simulated `λ₀`, stage-1 pilot with
/// weights `λ₀ 1`, folded-concave weights, HBIC over the stage-2 grid.
pub fn fit_rpcr_design(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    cfg: &RpcrConfig,
) -> Result<FitResult> {
    check_len(design.nrows(), y.len(), "design rows vs response length")?;
    let penalty = cfg.penalty_spec()?;
    let prob = RankProblem::from_uncentered(y, design)?;
    let design_means = center_columns(design).1;
    let m = prob.m();

    let lambda0 = calibrate_lambda0(prob.design(), &cfg.lambda0)?;
    let stage1 = solve_weighted_rank_l1(&prob, &Array1::from_elem(m, lambda0), &cfg.solve)?;
    require_converged(&stage1, "stage 1", lambda0)?;
    let pilot = stage1.theta_hat.clone();

    let grid = match &cfg.hbic_grid {
        Some(g) => HbicConfig::new(g.clone())?,
        None => {
            let top = rank_score(Array1::zeros(m).view(), &prob)?.inf_norm();
            if top > 0.0 {
                HbicConfig::default_for(&prob, cfg.hbic_grid_size, cfg.hbic_grid_ratio)?
            } else {
                // Zero score at the origin: every positive level returns θ = 0.
                HbicConfig::new(vec![lambda0.max(f64::MIN_POSITIVE)])?
            }
        }
    };
    let sel = hbic_select(&prob, pilot.view(), &penalty, &grid, &cfg.solve)?;

    let theta_hat = sel.report.theta_hat.clone();
    let fitted_mean = prob.design().dot(&theta_hat);
    let resid = &prob.y() - &fitted_mean;
    let intercept = median(resid.as_slice().expect("contiguous"));
    Ok(FitResult {
        method_tag: MethodTag::Rpcr,
        support: support_of(&theta_hat),
        theta_hat,
        fitted_mean,
        intercept,
        y_mean: mean(y),
        design_means,
        lambda_used: LambdaUsed {
            lambda0: Some(lambda0),
            lambda_hat: sel.lambda_hat,
        },
        diagnostics: Diagnostics {
            stages: vec![
                StageReport::new("stage 1", lambda0, &stage1),
                StageReport::new("stage 2", sel.lambda_hat, &sel.report),
            ],
            pilot: Some(pilot),
            hbic_trace: sel.trace,
            refit_theta: Some(sel.refit_theta),
            cv: None,
        },
    })
}

/// L1PCR on a dataset: centering, PC basis, lasso on `Ũ`.
pub fn fit_l1pcr(
    data: &Dataset,
    rule: &LambdaRule,
    opts: &SolveOptions,
) -> Result<(PcBasis, FitResult)> {
    let (basis, _) = PcBasis::from_raw(data)?;
    let fit = fit_ls_design(basis.utilde.view(), data.y.view(), rule, opts, MethodTag::L1pcr)?;
    Ok((basis, fit))
}

/// L1PCR on a given PC design (rows of `Ũ`, centered internally).
pub fn fit_l1pcr_design(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rule: &LambdaRule,
    opts: &SolveOptions,
) -> Result<FitResult> {
    fit_ls_design(design, y, rule, opts, MethodTag::L1pcr)
}

/// Lasso on the raw predictors (centered internally).
pub fn fit_lasso(data: &Dataset, rule: &LambdaRule, opts: &SolveOptions) -> Result<FitResult> {
    fit_ls_design(data.z.view(), data.y.view(), rule, opts, MethodTag::Lasso)
}

/// Cross-validated lasso on centered raw predictors over an explicit grid.
pub fn solve_lasso_raw(
    z_centered: ArrayView2<f64>,
    y_centered: ArrayView1<f64>,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<FitResult> {
    let curve = cv_lasso(z_centered, y_centered, lambda_grid, folds, seed)?;
    let lambda = curve.best_lambda;
    let mut fit = fit_ls_design(
        z_centered,
        y_centered,
        &LambdaRule::Fixed(lambda),
        &SolveOptions::default(),
        MethodTag::Lasso,
    )?;
    fit.diagnostics.cv = Some(curve);
    Ok(fit)
}

fn fit_ls_design(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rule: &LambdaRule,
    opts: &SolveOptions,
    method: MethodTag,
) -> Result<FitResult> {
    check_len(design.nrows(), y.len(), "design rows vs response length")?;
    let (x, design_means) = center_columns(design);
    let y_mean = mean(y);
    let yc = &y - y_mean;
    let (lambda, cv) = match rule {
        LambdaRule::Fixed(l) => (*l, None),
        LambdaRule::CrossValidation {
            folds,
            grid_size,
            min_ratio,
            seed,
        } => {
            let grid = lasso_lambda_grid(x.view(), yc.view(), *grid_size, *min_ratio);
            let curve = cv_lasso(x.view(), yc.view(), &grid, *folds, *seed)?;
            (curve.best_lambda, Some(curve))
        }
    };
    let rep = solve_lasso_ls(yc.view(), x.view(), lambda, opts)?;
    require_converged(&rep, "lasso", lambda)?;
    let theta_hat = rep.theta_hat.clone();
    let fitted_mean = x.dot(&theta_hat);
    let intercept = mean((&yc - &fitted_mean).view());
    Ok(FitResult {
        method_tag: method,
        support: support_of(&theta_hat),
        theta_hat,
        fitted_mean,
        intercept,
        y_mean,
        design_means,
        lambda_used: LambdaUsed {
            lambda0: None,
            lambda_hat: lambda,
        },
        diagnostics: Diagnostics {
            stages: vec![StageReport::new("lasso", lambda, &rep)],
            cv,
            ..Diagnostics::default()
        },
    })
}
