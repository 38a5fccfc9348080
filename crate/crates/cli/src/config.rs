//! Run configuration: JSON file, then command-line overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use evq_core::{FixedPointConfig, NormKind, TerminationMode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// All demand on the free-flow cheapest walk.
    #[default]
    Shortest,
    Uniform,
    /// Read from a `walk_flows.csv` (see `initial_flow`).
    File,
}

/// Contents of a `--config` file. Missing keys keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub epsilon: Option<f64>,
    pub alpha0: Option<f64>,
    #[serde(rename = "N")]
    pub intervals: Option<usize>,
    pub max_iters: Option<usize>,
    pub time_limit_s: Option<f64>,
    pub initialization: Option<InitKind>,
    /// Walk-flow file for `"initialization": "file"`, relative to the config.
    pub initial_flow: Option<PathBuf>,
    pub termination_mode: Option<TerminationMode>,
    #[serde(alias = "norm_weights")]
    pub norm: Option<NormKind>,
}

impl RunConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
        if let (Some(p), Some(dir)) = (&cfg.initial_flow, path.parent()) {
            cfg.initial_flow = Some(dir.join(p));
        }
        Ok(cfg)
    }
}

/// Settings after merging defaults, the config file and flags.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSettings {
    pub epsilon: f64,
    pub alpha0: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub max_iters: usize,
    pub time_limit_s: Option<f64>,
    pub initialization: InitKind,
    pub initial_flow: Option<PathBuf>,
    pub termination_mode: TerminationMode,
    pub norm: NormKind,
}

impl Default for RunSettings {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            epsilon: d.epsilon,
            alpha0: d.alpha0,
            intervals: d.intervals,
            max_iters: d.max_iters,
            time_limit_s: None,
            initialization: InitKind::default(),
            initial_flow: None,
            termination_mode: d.termination,
            norm: d.norm,
        }
    }
}

impl RunSettings {
    /// Later layers win.
    pub fn merge(mut self, layer: &RunConfigFile) -> Self {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = layer.$field.clone() {
                    self.$field = v;
                }
            };
        }
        take!(epsilon);
        take!(alpha0);
        take!(intervals);
        take!(max_iters);
        take!(initialization);
        take!(termination_mode);
        take!(norm);
        if layer.time_limit_s.is_some() {
            self.time_limit_s = layer.time_limit_s;
        }
        if layer.initial_flow.is_some() {
            self.initial_flow = layer.initial_flow.clone();
        }
        self
    }

    pub fn fixed_point_config(&self) -> FixedPointConfig {
        FixedPointConfig {
            epsilon: self.epsilon,
            alpha0: self.alpha0,
            intervals: self.intervals,
            max_iters: self.max_iters,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            termination: self.termination_mode,
            norm: self.norm,
            ..FixedPointConfig::default()
        }
    }
}
