//! Two-stage penalized Wilcoxon rank regression in the empirical principal-components
//! basis of a contaminated design, with least-squares baselines.

pub mod basis;
pub mod data;
pub mod error;
pub mod linalg;
pub mod penalty;
pub mod rank_loss;
pub mod solver;
pub mod tuning;
pub mod estimators;

pub use basis::{pc_basis, PcBasis};
pub use data::{center_dataset, Centering, Dataset, Table};
pub use error::{Error, Result};
pub use penalty::{PenaltyFamily, PenaltySpec};
pub use rank_loss::{rank_loss_fast, rank_loss_pairwise, rank_score, simulated_score, RankProblem, ScoreVector};
pub use solver::{solve_lasso_ls, solve_weighted_rank_l1, SolveMethod, SolveOptions, SolveReport};
pub use tuning::{calibrate_lambda0, hbic_select, HbicConfig, Lambda0Config};
pub use estimators::{
    fit_l1pcr, fit_lasso, fit_rpcr, predict, FitResult, LambdaRule, MethodTag, RpcrConfig,
};
