use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ndarray::Axis;
use rpcr_bench::{emit_loocv, emit_simulation, run_loocv, run_monte_carlo, screen_predictors};
use rpcr_bench::{ExperimentManifest, LoocvConfig};
use rpcr_core::tuning::calibrate_lambda0_detailed;
use rpcr_core::{
    fit_l1pcr, fit_lasso, fit_rpcr, Dataset, Lambda0Config, LambdaRule, MethodTag, PcBasis,
    PenaltyFamily, RpcrConfig, Table,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "rpcr", version, about = "Rank regression in principal-components space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimator to a CSV file and print the fit as JSON.
    Fit {
        #[arg(long, value_parser = parse_method)]
        method: MethodTag,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        /// JSON with optional `rpcr` and `lambda_rule` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write `index,name,coefficient` rows here.
        #[arg(long)]
        coef_out: Option<PathBuf>,
        #[command(flatten)]
        penalty: PenaltyArgs,
    },
    /// Run a Monte Carlo manifest.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
        /// Overrides the manifest's thread count.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Contaminated leave-one-out comparison on a CSV file.
    Loocv {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        /// Keep this many predictors by marginal correlation first.
        #[arg(long)]
        screen_k: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5")]
        c_grid: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "RPCR,L1PCR,LASSO")]
        methods: Vec<MethodTag>,
        #[arg(long)]
        redraw_per_split: bool,
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        #[command(flatten)]
        penalty: PenaltyArgs,
    },
    /// Print the simulated stage-1 level and its diagnostics for a CSV file.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        /// Column excluded from the predictors.
        #[arg(long)]
        response: Option<String>,
        #[arg(long, default_value_t = 1.01)]
        c: f64,
        #[arg(long, default_value_t = 0.10)]
        alpha0: f64,
        #[arg(long, default_value_t = 500)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Stage-2 penalty overrides for RPCR.
#[derive(clap::Args)]
struct PenaltyArgs {
    #[arg(long, value_parser = parse_penalty)]
    penalty: Option<PenaltyFamily>,
    #[arg(long)]
    penalty_a: Option<f64>,
}

impl PenaltyArgs {
    fn apply(&self, cfg: &mut RpcrConfig) {
        if let Some(family) = self.penalty {
            cfg.penalty = family;
        }
        if let Some(a) = self.penalty_a {
            cfg.penalty_a = Some(a);
        }
    }
}

fn parse_penalty(s: &str) -> Result<PenaltyFamily, String> {
    s.parse().map_err(|e: rpcr_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<MethodTag, String> {
    s.parse().map_err(|e: rpcr_core::Error| e.to_string())
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitConfig {
    rpcr: RpcrConfig,
    lambda_rule: Option<LambdaRule>,
}

#[derive(Serialize)]
struct CalibrationReport {
    n: usize,
    m: usize,
    lambda0: f64,
    quantile: f64,
    order_index: usize,
    draws: usize,
    sqrt_log_m_over_n: f64,
}

fn load(data: &PathBuf, response: &str) -> Result<(Dataset, Vec<String>)> {
    let table = Table::read(data).with_context(|| format!("reading {}", data.display()))?;
    Ok(table.into_dataset(response)?)
}

fn fit(
    method: MethodTag,
    data: PathBuf,
    response: String,
    config: Option<PathBuf>,
    coef_out: Option<PathBuf>,
    penalty: PenaltyArgs,
) -> Result<ExitCode> {
    let mut cfg: FitConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FitConfig::default(),
    };
    penalty.apply(&mut cfg.rpcr);
    let (data, names) = load(&data, &response)?;
    let rule = cfg.lambda_rule.unwrap_or_else(|| LambdaRule::cv(0));
    let fit = match method {
        MethodTag::Rpcr => fit_rpcr(&data, &cfg.rpcr)?.1,
        MethodTag::L1pcr => fit_l1pcr(&data, &rule, &cfg.rpcr.solve)?.1,
        MethodTag::Lasso => fit_lasso(&data, &rule, &cfg.rpcr.solve)?,
    };
    println!("{}", serde_json::to_string_pretty(&fit)?);
    if let Some(path) = coef_out {
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["index", "name", "coefficient"])?;
        for (j, v) in fit.theta_hat.iter().enumerate() {
            let name = match method {
                MethodTag::Lasso => names[j].clone(),
                _ => format!("PC{}", j + 1),
            };
            w.write_record([j.to_string(), name, format!("{v}")])?;
        }
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(manifest: PathBuf, out: Option<PathBuf>, svg: bool, parallelism: Option<usize>) -> Result<ExitCode> {
    let mut m = ExperimentManifest::read(&manifest)?;
    if let Some(p) = parallelism {
        m.parallelism = p;
    }
    let dir = match (out, &m.output) {
        (Some(dir), _) => dir,
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => bail!("no output directory: pass --out or set `output` in the manifest"),
    };
    let result = run_monte_carlo(&m)?;
    for path in emit_simulation(&result, &dir, svg)? {
        eprintln!("wrote {}", path.display());
    }
    if result.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} replicate failures", result.failures.len());
        Ok(ExitCode::from(2))
    }
}

#[allow(clippy::too_many_arguments)]
fn loocv(
    data: PathBuf,
    response: String,
    screen_k: Option<usize>,
    c_grid: Vec<f64>,
    seed: u64,
    out: PathBuf,
    methods: Vec<MethodTag>,
    redraw_per_split: bool,
    parallelism: usize,
    penalty: PenaltyArgs,
) -> Result<ExitCode> {
    let (mut data, _) = load(&data, &response)?;
    if let Some(k) = screen_k {
        let keep = screen_predictors(data.z.view(), data.y.view(), k)?;
        data = Dataset::new(data.z.select(Axis(1), &keep), data.y)?;
    }
    let mut cfg = LoocvConfig {
        c_grid,
        methods,
        seed,
        redraw_per_split,
        parallelism,
        ..LoocvConfig::default()
    };
    penalty.apply(&mut cfg.rpcr);
    let result = run_loocv(&data, &cfg)?;
    for path in emit_loocv(&result, &out)? {
        eprintln!("wrote {}", path.display());
    }
    for s in &result.summaries {
        println!("c={:<5} {:<6} {:.6}", s.c, s.method.to_string(), s.mean_squared_error);
    }
    if result.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} failed fits", result.failures.len());
        Ok(ExitCode::from(2))
    }
}

fn calibrate(data: PathBuf, response: Option<String>, lambda0: Lambda0Config) -> Result<ExitCode> {
    let table = Table::read(&data).with_context(|| format!("reading {}", data.display()))?;
    let dataset = match response {
        Some(r) => table.into_dataset(&r)?.0,
        None => {
            let n = table.values.nrows();
            Dataset::new(table.values, ndarray::Array1::zeros(n))?
        }
    };
    let (basis, _) = PcBasis::from_raw(&dataset)?;
    let cal = calibrate_lambda0_detailed(basis.utilde.view(), &lambda0)?;
    let (n, m) = (basis.n(), basis.m());
    let report = CalibrationReport {
        n,
        m,
        lambda0: cal.lambda0,
        quantile: cal.quantile,
        order_index: cal.order_index,
        draws: lambda0.draws,
        sqrt_log_m_over_n: ((m as f64).ln() / n as f64).sqrt(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit {
            method,
            data,
            response,
            config,
            coef_out,
            penalty,
        } => fit(method, data, response, config, coef_out, penalty),
        Command::Simulate {
            manifest,
            out,
            svg,
            parallelism,
        } => simulate(manifest, out, svg, parallelism),
        Command::Loocv {
            data,
            response,
            screen_k,
            c_grid,
            seed,
            out,
            methods,
            redraw_per_split,
            parallelism,
            penalty,
        } => loocv(data, response, screen_k, c_grid, seed, out, methods, redraw_per_split, parallelism, penalty),
        Command::Calibrate {
            data,
            response,
            c,
            alpha0,
            draws,
            seed,
        } => calibrate(data, response, Lambda0Config { c, alpha0, draws, seed }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
