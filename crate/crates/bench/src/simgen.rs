//! Latent low-rank designs, additive predictor contamination and standardized error laws.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rpcr_core::linalg::thin_svd;
use rpcr_core::Dataset;
use serde::{Deserialize, Serialize};

const M1_THETA: [f64; 7] = [0.483, 0.0, 0.029, 0.019, 0.0, 0.126, 0.009];
const M2_TAIL: [f64; 6] = [0.009, 0.125, 0.003, 0.019, 0.029, 0.482];
const M2_BACKGROUND: f64 = 0.003;
const AR_RHO: f64 = 0.5;
const MIX_WEIGHT: f64 = 0.1;
const MIX_SD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    M1,
    M2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Normal,
    T3Std,
    MixnormStd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contamination {
    None,
    Indep,
    ArCorr,
}

macro_rules! text_enum {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = anyhow::Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => bail!("unknown {} '{other}'", stringify!($ty)),
                }
            }
        }
    };
}

text_enum!(Model, Model::M1 => "M1", Model::M2 => "M2");
text_enum!(
    ErrorLaw,
    ErrorLaw::Normal => "normal",
    ErrorLaw::T3Std => "t3_std",
    ErrorLaw::MixnormStd => "mixnorm_std",
);
text_enum!(
    Contamination,
    Contamination::None => "none",
    Contamination::Indep => "indep",
    Contamination::ArCorr => "ar_corr",
);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub error_law: ErrorLaw,
    pub contamination: Contamination,
}

/// One draw of a latent design with its coefficient vector and latent mean.
#[derive(Clone, Debug)]
pub struct SimDesign {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub kappa: Option<f64>,
    /// Singular values on the active and inactive blocks.
    pub a: f64,
    pub b: f64,
    pub active: Vec<usize>,
    pub theta_star: Array1<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub x: Array2<f64>,
    /// `√n U θ*`.
    pub y_star: Array1<f64>,
}

/// Block singular values `(a, b)` and active set for a model at `(n, p)`.
pub fn block_scales(model: Model, n: usize, p: usize, kappa: Option<f64>) -> Result<(f64, f64, Vec<usize>)> {
    let m = n.min(p);
    let (nf, pf) = (n as f64, p as f64);
    match model {
        Model::M1 => {
            if m <= 7 {
                bail!("model M1 needs min(n, p) > 7, got {m}");
            }
            let a = (0.9 * nf * pf / 7.0).sqrt();
            let b = (0.1 * nf * pf / (m - 7) as f64).sqrt();
            Ok((a, b, (0..7).collect()))
        }
        Model::M2 => {
            if m < 6 {
                bail!("model M2 needs min(n, p) >= 6, got {m}");
            }
            let kappa = match kappa {
                Some(k) if k > 0.0 && k.is_finite() => k,
                other => bail!("model M2 needs a positive kappa, got {other:?}"),
            };
            let a = (kappa * pf).sqrt();
            let b = (2.0 * kappa * pf).sqrt();
            Ok((a, b, (m - 6..m).collect()))
        }
    }
}

pub fn theta_star(model: Model, m: usize) -> Array1<f64> {
    match model {
        Model::M1 => Array1::from_shape_fn(m, |j| M1_THETA.get(j).copied().unwrap_or(0.0)),
        Model::M2 => Array1::from_shape_fn(m, |j| {
            if j + 6 >= m {
                M2_TAIL[j + 6 - m]
            } else {
                M2_BACKGROUND
            }
        }),
    }
}

/// Draws `M` with i.i.d. standard normal entries, takes its singular vectors and
/// rescales the active and inactive blocks to `a` and `b`.
pub fn gen_design<R: Rng + ?Sized>(
    model: Model,
    n: usize,
    p: usize,
    kappa: Option<f64>,
    rng: &mut R,
) -> Result<SimDesign> {
    let (a, b, active) = block_scales(model, n, p, kappa)?;
    let m = n.min(p);
    let raw = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let svd = thin_svd(raw.view())?;
    let scales = Array1::from_shape_fn(m, |k| if active.contains(&k) { a } else { b });
    let x = (&svd.u * &scales.view().insert_axis(ndarray::Axis(0))).dot(&svd.v.t());
    let theta_star = theta_star(model, m);
    let y_star = svd.u.dot(&theta_star) * (n as f64).sqrt();
    Ok(SimDesign {
        model,
        n,
        p,
        kappa: if model == Model::M2 { kappa } else { None },
        a,
        b,
        active,
        theta_star,
        u: svd.u,
        v: svd.v,
        x,
        y_star,
    })
}

pub fn gen_design_seeded(model: Model, n: usize, p: usize, kappa: Option<f64>, seed: u64) -> Result<SimDesign> {
    gen_design(model, n, p, kappa, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// One unit-variance error draw.
pub fn draw_error<R: Rng + ?Sized>(law: ErrorLaw, rng: &mut R) -> f64 {
    match law {
        ErrorLaw::Normal => rng.sample(StandardNormal),
        ErrorLaw::T3Std => {
            let z: f64 = rng.sample(StandardNormal);
            let chi: f64 = rng.sample(ChiSquared::new(3.0).expect("valid degrees of freedom"));
            z / (chi / 3.0).sqrt() / 3f64.sqrt()
        }
        ErrorLaw::MixnormStd => {
            let z: f64 = rng.sample(StandardNormal);
            let sd = if rng.random_bool(MIX_WEIGHT) { MIX_SD } else { 1.0 };
            z * sd / (1.0 - MIX_WEIGHT + MIX_WEIGHT * MIX_SD * MIX_SD).sqrt()
        }
    }
}

/// `n x p` contamination matrix; AR rows follow `w_j = ρ w_{j-1} + √(1-ρ²) e_j`.
pub fn draw_contamination<R: Rng + ?Sized>(
    kind: Contamination,
    n: usize,
    p: usize,
    rng: &mut R,
) -> Array2<f64> {
    match kind {
        Contamination::None => Array2::zeros((n, p)),
        Contamination::Indep => Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal)),
        Contamination::ArCorr => {
            let innov = (1.0 - AR_RHO * AR_RHO).sqrt();
            let mut w = Array2::zeros((n, p));
            for i in 0..n {
                let mut prev: f64 = rng.sample(StandardNormal);
                w[[i, 0]] = prev;
                for j in 1..p {
                    let e: f64 = rng.sample(StandardNormal);
                    prev = AR_RHO * prev + innov * e;
                    w[[i, j]] = prev;
                }
            }
            w
        }
    }
}

/// Observed data `Z = X + W`, `y = y* + ε`. `W` is drawn before `ε`.
pub fn gen_noise<R: Rng + ?Sized>(design: &SimDesign, spec: &NoiseSpec, rng: &mut R) -> Result<Dataset> {
    let w = draw_contamination(spec.contamination, design.n, design.p, rng);
    let z = &design.x + &w;
    let eps = Array1::from_shape_fn(design.n, |_| draw_error(spec.error_law, rng));
    Ok(Dataset::new(z, &design.y_star + &eps)?)
}

/// Distinct singular values of `X` above `tol` relative to the largest, descending.
pub fn distinct_singular_values(x: &Array2<f64>, tol: f64) -> Result<Vec<f64>> {
    let d = thin_svd(x.view())?.d;
    let top = d.iter().fold(0.0_f64, |a, v| a.max(*v));
    let mut out: Vec<f64> = Vec::new();
    for &v in d.iter().filter(|v| **v > tol * top) {
        if out.iter().all(|u| (u - v).abs() > tol * top) {
            out.push(v);
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}
