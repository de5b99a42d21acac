//! Experiment manifests: the simulation sweep, methods and replicate count.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use rpcr_core::{MethodTag, RpcrConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::simgen::{block_scales, Contamination, ErrorLaw, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentManifest {
    pub model: Model,
    pub n: usize,
    pub p_grid: Vec<usize>,
    /// Used by M2 only.
    pub kappa_grid: Vec<f64>,
    pub error_law: Vec<ErrorLaw>,
    pub contamination: Vec<Contamination>,
    pub replicates: usize,
    /// Master seed; replicate `r` reads stream `r` of it.
    pub seed: u64,
    pub methods: Vec<MethodTag>,
    /// Worker threads; 0 lets the pool decide. Results do not depend on it.
    pub parallelism: usize,
    /// Output directory used when none is given on the command line.
    pub output: Option<String>,
    pub cv_folds: usize,
    pub rpcr: RpcrConfig,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            model: Model::M1,
            n: 100,
            p_grid: vec![100, 200, 400, 800],
            kappa_grid: vec![0.5, 1.0, 2.0, 4.0],
            error_law: vec![ErrorLaw::Normal, ErrorLaw::T3Std, ErrorLaw::MixnormStd],
            contamination: vec![Contamination::Indep],
            replicates: 1000,
            seed: 20240601,
            methods: MethodTag::ALL.to_vec(),
            parallelism: 0,
            output: None,
            cv_folds: 10,
            rpcr: RpcrConfig::default(),
        }
    }
}

/// One cell of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub config_id: usize,
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub kappa: Option<f64>,
    pub error_law: ErrorLaw,
    pub contamination: Contamination,
}

impl ExperimentManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.replicates >= 1, "replicates must be at least 1");
        ensure!(!self.p_grid.is_empty(), "p_grid is empty");
        ensure!(!self.error_law.is_empty(), "error_law is empty");
        ensure!(!self.contamination.is_empty(), "contamination is empty");
        ensure!(!self.methods.is_empty(), "methods is empty");
        ensure!(self.cv_folds >= 2 && self.cv_folds <= self.n, "cv_folds must lie in 2..=n");
        if self.model == Model::M2 {
            ensure!(!self.kappa_grid.is_empty(), "kappa_grid is empty");
        }
        for cfg in self.configs() {
            block_scales(cfg.model, cfg.n, cfg.p, cfg.kappa)?;
        }
        Ok(())
    }

    /// Sweep cells ordered by contamination, error law, p, then κ.
    pub fn configs(&self) -> Vec<SimConfig> {
        let kappas: Vec<Option<f64>> = match self.model {
            Model::M1 => vec![None],
            Model::M2 => self.kappa_grid.iter().map(|k| Some(*k)).collect(),
        };
        let mut out = Vec::new();
        for &contamination in &self.contamination {
            for &error_law in &self.error_law {
                for &p in &self.p_grid {
                    for &kappa in &kappas {
                        out.push(SimConfig {
                            config_id: out.len(),
                            model: self.model,
                            n: self.n,
                            p,
                            kappa,
                            error_law,
                            contamination,
                        });
                    }
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form, ignoring `parallelism` and `output`.
    pub fn hash(&self) -> String {
        let canonical = Self {
            parallelism: 0,
            output: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
