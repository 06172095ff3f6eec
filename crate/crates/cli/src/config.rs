use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use skykey_core::infotheory::EvalParams;
use skykey_core::preprocess::CascadeParams;
use skykey_core::segmentation::BlockConfig;
use skykey_core::ubx::Role;

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub alice: Option<PathBuf>,
    pub bob: Option<PathBuf>,
    pub eve: Option<PathBuf>,
}

impl Inputs {
    pub fn get(&self, role: Role) -> Option<&PathBuf> {
        match role {
            Role::Alice => self.alice.as_ref(),
            Role::Bob => self.bob.as_ref(),
            Role::Eve => self.eve.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Parameters of one batch run. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    /// Geometry CSVs used when inputs are geometry-free CSVs.
    pub geometry: Vec<PathBuf>,
    pub block_duration: f64,
    pub sample_rate: f64,
    pub poly_degree: usize,
    pub sg_window: usize,
    pub sg_order: usize,
    pub k: usize,
    pub alignment_tolerance: f64,
    pub output_dir: PathBuf,
    /// Seeds the estimator's tie-breaking perturbation.
    pub seed: u64,
    pub threads: Option<usize>,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CascadeParams::default();
        let b = BlockConfig::default();
        RunConfig {
            inputs: Inputs::default(),
            geometry: Vec::new(),
            block_duration: b.block_duration,
            sample_rate: b.sample_rate,
            poly_degree: c.poly_degree,
            sg_window: c.sg_window,
            sg_order: c.sg_order,
            k: EvalParams::default().k,
            alignment_tolerance: b.alignment_tolerance,
            output_dir: PathBuf::from("skykey-out"),
            seed: 0,
            threads: None,
            precision: Precision::F64,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML run configuration; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub alice: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub bob: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub eve: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Geometry CSV (repeatable), for CSV inputs.
    #[arg(long, value_name = "FILE")]
    pub geometry: Vec<PathBuf>,
    /// Block length in seconds.
    #[arg(long)]
    pub block_duration: Option<f64>,
    /// Sampling rate in Hz.
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long)]
    pub poly_degree: Option<usize>,
    #[arg(long)]
    pub sg_window: Option<usize>,
    #[arg(long)]
    pub sg_order: Option<usize>,
    /// Neighbour count of the estimator.
    #[arg(long)]
    pub k: Option<usize>,
    /// Epoch matching tolerance in seconds.
    #[arg(long)]
    pub alignment_tolerance: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn resolve(common: &ConfigArgs, pipeline: Option<&PipelineArgs>) -> Result<Self, CliError> {
        let mut c = match &common.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($src:expr => $($field:ident),*) => {
                $(if let Some(v) = $src.$field.clone() { c.$field = v; })*
            };
        }
        if let Some(p) = &common.alice {
            c.inputs.alice = Some(p.clone());
        }
        if let Some(p) = &common.bob {
            c.inputs.bob = Some(p.clone());
        }
        if let Some(p) = &common.eve {
            c.inputs.eve = Some(p.clone());
        }
        if let Some(o) = &common.out {
            c.output_dir = o.clone();
        }
        if common.threads.is_some() {
            c.threads = common.threads;
        }
        if let Some(p) = pipeline {
            take!(p => block_duration, sample_rate, poly_degree, sg_window, sg_order, k, alignment_tolerance, seed, precision);
            if !p.geometry.is_empty() {
                c.geometry = p.geometry.clone();
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        for (name, v) in [
            ("block_duration", self.block_duration),
            ("sample_rate", self.sample_rate),
            ("alignment_tolerance", self.alignment_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.sg_window.is_multiple_of(2) {
            return bad(format!("sg_window must be odd, got {}", self.sg_window));
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.sg_order >= self.sg_window {
            return bad(format!("sg_order {} must be below sg_window {}", self.sg_order, self.sg_window));
        }
        self.block_config().samples_per_block().map_err(CliError::from)?;
        Ok(())
    }

    pub fn block_config(&self) -> BlockConfig {
        BlockConfig {
            block_duration: self.block_duration,
            sample_rate: self.sample_rate,
            alignment_tolerance: self.alignment_tolerance,
        }
    }

    pub fn eval_params(&self) -> EvalParams {
        EvalParams {
            cascade: CascadeParams {
                poly_degree: self.poly_degree,
                sg_window: self.sg_window,
                sg_order: self.sg_order,
            },
            k: self.k,
        }
    }

    /// Runs `f` on a pool sized by `threads`.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            b = b.num_threads(n);
        }
        let pool = b.build().map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }

    pub fn ensure_output_dir(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| io_err(&self.output_dir, e))?;
        Ok(&self.output_dir)
    }
}
