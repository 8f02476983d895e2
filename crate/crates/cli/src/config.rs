//! Run configuration shared by every command.
//!
//! A configuration is assembled from command-line flags and then overlaid
//! with an optional TOML file, whose keys win. Unknown keys and out-of-range
//! values are rejected before any data is read.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fcd_core::decompose::{DecomposeConfig, ReportSpace};
use fcd_core::models::{parse_model, preset, ContinuityOrder, ModelOptions, ModelSpec, UnscaleRule};
use fcd_core::optimizer::LMConfig;
use fcd_core::signal::DEFAULT_SF;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A preset name or a user-defined expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Preset(String),
    Custom(CustomModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    #[serde(default = "custom_name")]
    pub name: String,
    pub expression: String,
    pub params: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_slope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub unscale: BTreeMap<String, UnscaleRule>,
}

fn custom_name() -> String {
    "custom".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Column name or 0-based index; defaults to column 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_col: Option<String>,
    /// Column name or 0-based index; defaults to column 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_col: Option<String>,
    pub out_dir: PathBuf,
    pub model: ModelChoice,
    /// Lowers the model's continuity order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity: Option<ContinuityOrder>,
    /// Per-parameter `[lo, hi]`; `inf` and `-inf` are allowed.
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub alpha_seg: usize,
    pub beta_min: usize,
    pub s_f: f64,
    pub parallel: bool,
    pub lm: LMConfig,
    pub report: ReportSpace,
    /// Derivative orders written by `derive`.
    pub orders: Vec<usize>,
    /// Also write running integrals from `decompose`.
    pub integral: bool,
    pub window: usize,
    pub stride: usize,
    /// Samples after each feature window reserved as prediction targets.
    pub horizon: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DecomposeConfig::default();
        RunConfig {
            input: None,
            x_col: None,
            y_col: None,
            out_dir: PathBuf::from("fcd-out"),
            model: ModelChoice::Preset("cubic".into()),
            continuity: None,
            bounds: BTreeMap::new(),
            alpha_seg: d.alpha_seg,
            beta_min: d.beta_min,
            s_f: DEFAULT_SF,
            parallel: d.parallel,
            lm: d.lm,
            report: ReportSpace::Local,
            orders: vec![1],
            integral: false,
            window: 60,
            stride: 5,
            horizon: 30,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Overlays the keys of the TOML document `text` on `self`. Tables are
    /// merged key by key, so `[lm]` in the file only replaces the keys it
    /// names.
    pub fn overlay(&self, text: &str) -> Result<RunConfig> {
        let file: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        let mut base =
            toml::Table::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, file);
        base.try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
    }

    pub fn overlay_file(&self, path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.overlay(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn decompose_config(&self) -> DecomposeConfig {
        DecomposeConfig {
            s_f: self.s_f,
            alpha_seg: self.alpha_seg,
            beta_min: self.beta_min,
            lm: self.lm.clone(),
            parallel: self.parallel,
        }
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let mut model = match &self.model {
            ModelChoice::Preset(name) => preset(name)?,
            ModelChoice::Custom(c) => {
                let options = ModelOptions {
                    fixed_value_param: c.fixed_value.clone(),
                    fixed_slope_param: c.fixed_slope.clone(),
                    continuity: None,
                    initial_guess: c.initial_guess.clone(),
                    bounds: BTreeMap::new(),
                    unscale: c.unscale.clone(),
                };
                parse_model(&c.name, &c.expression, &c.params, &options)?
            }
        };
        if let Some(order) = self.continuity {
            model = model.with_continuity(order)?;
        }
        if !self.bounds.is_empty() {
            let b = self.bounds.iter().map(|(k, v)| (k.clone(), (v[0], v[1]))).collect();
            model = model.with_bounds(&b)?;
        }
        Ok(model)
    }

    /// Checks everything that can be checked without data and returns the
    /// model.
    pub fn validate(&self) -> Result<ModelSpec> {
        let model = self.build_model()?;
        self.decompose_config().validate()?;
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(CliError::Config("derivative orders must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        if self.window < model.n_params() {
            return Err(CliError::Config(format!(
                "window {} is shorter than the model's {} parameters",
                self.window,
                model.n_params()
            )));
        }
        Ok(model)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
