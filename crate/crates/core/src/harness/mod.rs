//! Experiment harness: configuration, rate sweeps over a sample-size grid,
//! log-log slope fits and PASS/FAIL verdicts against theoretical exponents.

mod slope;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::effdim::ParamRule;
use crate::error::{Error, Result};
use crate::filters::FilterConfig;
use crate::index_fn::IndexKind;
use crate::mercer::ModelConfig;

pub use slope::{fit_slope, SlopeFit};
pub use sweep::{
    predicted_error, rate_sweep, required_n_trunc, truncation_gate, CurvePoint, Norm, SweepReport, SweepRow,
    TruncationGate, Verdict, VerdictRow,
};

pub const DEFAULT_REPLICATES: usize = 16;
pub const MIN_REPLICATES: usize = 8;
pub const DEFAULT_TOLERANCE: f64 = 0.1;

fn default_filter() -> FilterConfig {
    FilterConfig::Tikhonov
}

fn default_phi() -> IndexKind {
    IndexKind::Holder { r: 0.5 }
}

fn default_rule() -> ParamRule {
    ParamRule::Psi
}

/// `2^5, ..., 2^12`.
pub fn default_m_grid() -> Vec<usize> {
    (5..=12).map(|k| 1usize << k).collect()
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_eta() -> f64 {
    0.1
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// Where the sweep writes `sweep.csv`, `report.json` and `curve.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "rate-lab-out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default = "default_filter")]
    pub filter: FilterConfig,
    #[serde(default = "default_phi")]
    pub phi: IndexKind,
    #[serde(default = "default_rule")]
    pub rule: ParamRule,
    #[serde(default = "default_m_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Defaults around a model with decay `b`.
    pub fn with_model(model: ModelConfig) -> Self {
        ExperimentConfig {
            model,
            filter: default_filter(),
            phi: default_phi(),
            rule: default_rule(),
            m_grid: default_m_grid(),
            replicates: DEFAULT_REPLICATES,
            eta: default_eta(),
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        // The slope fit needs four points.
        if self.m_grid.len() < 4 {
            return Err(Error::Parameter(format!(
                "m_grid needs at least four sizes, got {}",
                self.m_grid.len()
            )));
        }
        if self.m_grid[0] < 2 || self.m_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!(
                "m_grid must be strictly increasing and start at >= 2, got {:?}",
                self.m_grid
            )));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Parameter(format!(
                "replicates must be >= {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Parameter(format!("eta = {} outside (0, 1)", self.eta)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter(format!("tolerance = {} must be positive", self.tolerance)));
        }
        Ok(())
    }
}
