//! JSON run configuration. Every section is optional; omitted sections take
//! the baseline model with a geometric(0.5) threshold.

use std::path::Path;

use mgcp_core::exec::default_workers;
use mgcp_core::gcp::MultiGcpParams;
use mgcp_core::montecarlo::McConfig;
use mgcp_core::shock::ShockModel;
use mgcp_core::special::SeriesControl;
use mgcp_core::subordinator::SubordinatorParams;
use mgcp_core::threshold::ThresholdDistribution;
use mgcp_core::timechanged::TcModelParams;
use mgcp_core::{Execution, MgcpError};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub threshold: ThresholdDistribution,
    pub series: SeriesControl,
    pub mc: McSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            model: ModelSection::default(),
            threshold: ThresholdDistribution::Geometric { p: 0.5 },
            series: SeriesControl::default(),
            mc: McSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Optional; checked against the lengths of `a` and `rates` when given.
    pub q: Option<usize>,
    pub lambda: f64,
    pub theta: f64,
    pub a: Vec<f64>,
    /// `rates[i][j]` is the rate of jumps of size `j + 1` in component `i`.
    pub rates: Vec<Vec<f64>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            q: None,
            lambda: 1.0,
            theta: 0.5,
            a: vec![1.0, 1.0],
            rates: vec![vec![0.5], vec![0.5, 0.5]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: u64,
    pub seed: u64,
    /// Defaults to the available parallelism.
    pub workers: Option<usize>,
    pub execution: Execution,
}

impl Default for McSection {
    fn default() -> Self {
        let d = McConfig::default();
        Self {
            samples: d.samples,
            seed: d.seed,
            workers: None,
            execution: Execution::Parallel,
        }
    }
}

/// Validated objects built from a configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: TcModelParams,
    pub shock: ShockModel,
    pub ctl: SeriesControl,
    pub mc: McConfig,
}

fn prefixed(section: &str, e: MgcpError) -> CliError {
    match e {
        MgcpError::InvalidParameter { field, detail } => {
            CliError::Config(format!("{section}.{field}: {detail}"))
        }
        other => CliError::Config(format!("{section}: {other}")),
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn setup(&self) -> Result<Setup, CliError> {
        let m = &self.model;
        if let Some(q) = m.q {
            if q != m.a.len() || q != m.rates.len() {
                return Err(CliError::Config(format!(
                    "model.q: {q} does not match {} entries in a and {} rows in rates",
                    m.a.len(),
                    m.rates.len()
                )));
            }
        }
        let gcp = MultiGcpParams::from_rates(m.rates.clone()).map_err(|e| prefixed("model", e))?;
        let sub = SubordinatorParams::new(m.lambda, m.theta, m.a.clone()).map_err(|e| prefixed("model", e))?;
        let model = TcModelParams::new(gcp, sub).map_err(|e| prefixed("model", e))?;
        self.threshold.validate().map_err(|e| prefixed("threshold", e))?;
        self.series.validate().map_err(|e| prefixed("series", e))?;
        let mc = McConfig {
            samples: self.mc.samples,
            seed: self.mc.seed,
            workers: self.mc.workers.unwrap_or_else(default_workers),
            execution: self.mc.execution,
        };
        mc.validate().map_err(|e| prefixed("mc", e))?;
        let shock = ShockModel::new(model.clone(), self.threshold.clone()).map_err(|e| prefixed("threshold", e))?;
        Ok(Setup {
            model,
            shock,
            ctl: self.series,
            mc,
        })
    }
}
