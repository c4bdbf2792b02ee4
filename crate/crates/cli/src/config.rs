//! Model configuration files (TOML).

use std::fmt;
use std::path::Path;

use melevy_core::catalog;
use melevy_core::{Jumps, LevyModel, MeJumpSpec, Side};
use serde::{Deserialize, Serialize};

/// One ME jump side: `E e^{-z|J|} = N(z)/D(z)` with `lambda` the intensity.
/// `num` and `den` hold the non-leading coefficients in the library's order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub lambda: f64,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// A jump side as written in a file; `general` is recognised so that it can
/// be rejected with a clear message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JumpEntry {
    Me(JumpConfig),
    General { general: toml::Value },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub drift: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_jumps: Option<JumpEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_jumps: Option<JumpEntry>,
    /// Per-verb parameter tables, e.g. `[occupation] s = 1.0`.
    #[serde(flatten)]
    pub verbs: toml::Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn field_error(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError {
        message: format!("field `{field}`: {msg}"),
    }
}

fn jumps_from(entry: &Option<JumpEntry>, side: Side, field: &str) -> Result<Jumps, ConfigError> {
    match entry {
        None => Ok(Jumps::None),
        Some(JumpEntry::General { .. }) => Err(field_error(
            field,
            "general jump specifications are not supported in files; use a builtin model",
        )),
        Some(JumpEntry::Me(c)) => MeJumpSpec::new(side, c.lambda, &c.num, &c.den)
            .map(Jumps::Me)
            .map_err(|e| field_error(field, e)),
    }
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<ModelConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError {
            message: format!("parse error: {e}"),
        })
    }

    pub fn to_model(&self) -> Result<LevyModel, ConfigError> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(field_error("sigma", format!("must be finite and nonnegative (got {})", self.sigma)));
        }
        if !self.drift.is_finite() {
            return Err(field_error("drift", "must be finite"));
        }
        let neg = jumps_from(&self.neg_jumps, Side::Negative, "neg_jumps")?;
        let pos = jumps_from(&self.pos_jumps, Side::Positive, "pos_jumps")?;
        LevyModel::new(self.drift, self.sigma, neg, pos).map_err(|e| ConfigError {
            message: format!("validation error: {e}"),
        })
    }

    /// Config describing `model`; fails for general jump sides.
    pub fn from_model(model: &LevyModel) -> Result<ModelConfig, ConfigError> {
        let side = |jumps: &Jumps, field: &str| -> Result<Option<JumpEntry>, ConfigError> {
            match jumps {
                Jumps::None => Ok(None),
                Jumps::Me(s) => Ok(Some(JumpEntry::Me(JumpConfig {
                    lambda: s.intensity(),
                    num: s.numerator().to_vec(),
                    den: s.denominator().to_vec(),
                }))),
                Jumps::General(_) => Err(field_error(field, "general jump specifications cannot be written to files")),
            }
        };
        Ok(ModelConfig {
            drift: model.drift(),
            sigma: model.sigma(),
            neg_jumps: side(model.neg_jumps(), "neg_jumps")?,
            pos_jumps: side(model.pos_jumps(), "pos_jumps")?,
            verbs: toml::Table::new(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model configs serialize")
    }

    /// Parameter table for `verb`, if present.
    pub fn verb_table(&self, verb: &str) -> Option<&toml::Table> {
        self.verbs.get(verb).and_then(toml::Value::as_table)
    }
}

/// A loaded model with its optional config document.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: LevyModel,
    pub config: Option<ModelConfig>,
}

/// Loads `builtin:NAME` or a TOML file.
pub fn load_model(spec: &str) -> Result<LoadedModel, ConfigError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let model = catalog::builtin(name).map_err(|e| ConfigError { message: e.to_string() })?;
        return Ok(LoadedModel { model, config: None });
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let config = ModelConfig::parse(&text).map_err(|e| ConfigError {
        message: format!("{}: {}", path.display(), e.message),
    })?;
    let model = config.to_model().map_err(|e| ConfigError {
        message: format!("{}: {}", path.display(), e.message),
    })?;
    if model.variance_finite().is_none() {
        log::warn!("the variance condition cannot be verified for this model");
    }
    Ok(LoadedModel {
        model,
        config: Some(config),
    })
}
