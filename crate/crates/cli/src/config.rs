//! Run configuration: JSON file, command-line flags and defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use spinent::experiment::ChiUnits;
use spinent::sweep::GridFormat;
use spinent::ClusterSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl GridConfig {
    pub fn full(min: f64, max: f64, steps: usize) -> Self {
        GridConfig {
            min: Some(min),
            max: Some(max),
            steps: Some(steps),
        }
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: GridConfig) -> GridConfig {
        GridConfig {
            min: self.min.or(base.min),
            max: self.max.or(base.max),
            steps: self.steps.or(base.steps),
        }
    }

    /// Evenly spaced points from `min` to `max` inclusive.
    pub fn points(&self, what: &str) -> anyhow::Result<Vec<f64>> {
        let (Some(min), Some(max), Some(steps)) = (self.min, self.max, self.steps) else {
            bail!("{what} grid is incomplete");
        };
        if !min.is_finite() || !max.is_finite() {
            bail!("{what} grid bounds must be finite");
        }
        match steps {
            0 => bail!("{what} grid needs at least one step"),
            1 => Ok(vec![min]),
            n => {
                if !(max > min) {
                    bail!("{what} grid needs max > min (got {min}..{max})");
                }
                Ok((0..n)
                    .map(|k| {
                        if k + 1 == n {
                            max
                        } else {
                            min + (max - min) * k as f64 / (n - 1) as f64
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<ChiUnits>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_oe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moles_basis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_assumed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Everything a run can be configured with. Missing entries fall back to
/// per-command defaults; flags override file entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// A preset name or an inline model object.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_oe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<GridFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_h_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp: Option<ExpConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Resolves the model: an explicit model file beats a preset flag, which
    /// beats the config's `model` entry; the default is the compound preset.
    pub fn resolve_model(&self, preset: Option<&str>, model_file: Option<&Path>, g: Option<f64>) -> anyhow::Result<ClusterSpec> {
        let spec = if let Some(path) = model_file {
            ClusterSpec::load(path).with_context(|| format!("cannot load model {}", path.display()))?
        } else if let Some(name) = preset {
            ClusterSpec::preset(name)?
        } else {
            match &self.model {
                None => ClusterSpec::na2cu5si4o14(),
                Some(serde_json::Value::String(name)) => ClusterSpec::preset(name)?,
                Some(v @ serde_json::Value::Object(_)) => {
                    serde_json::from_value(v.clone()).context("invalid `model` entry in config")?
                }
                Some(_) => bail!("`model` must be a preset name or a model object"),
            }
        };
        match g.or(self.g) {
            Some(g) => Ok(spec.with_g_factor(g)?),
            None => Ok(spec),
        }
    }
}
