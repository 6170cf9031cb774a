//! Parameter-vector files.
//!
//! ```toml
//! trial_id = 17      # optional
//! loss = 0.0042      # optional
//!
//! [theta]
//! "torch.health" = 9
//! "torch.cooldown" = 3
//! ```
//!
//! Values are keyed by parameter name. Integer parameters are written as
//! TOML integers. Fixed parameters may be omitted when reading.

use crate::config::{parse_error, theta_from_map, ConfigError};
use autobalance::{ParamKind, ParameterSpace, ParameterVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trial_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
    theta: toml::Table,
}

pub fn to_toml(
    space: &ParameterSpace,
    theta: &ParameterVector,
    trial_id: Option<u64>,
    loss: Option<f64>,
) -> String {
    let table = space
        .specs()
        .iter()
        .zip(theta.values())
        .map(|(spec, &v)| {
            let value = match spec.kind {
                ParamKind::Integer => toml::Value::Integer(v as i64),
                ParamKind::Real => toml::Value::Float(v),
            };
            (spec.name.clone(), value)
        })
        .collect();
    let file = ThetaFile {
        trial_id,
        loss: loss.filter(|l| l.is_finite()),
        theta: table,
    };
    toml::to_string(&file).expect("theta tables always serialize")
}

pub fn from_toml(text: &str, space: &ParameterSpace) -> Result<ParameterVector, ConfigError> {
    let file: ThetaFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let mut values = BTreeMap::new();
    for (name, v) in &file.theta {
        let v = match v {
            toml::Value::Integer(i) => *i as f64,
            toml::Value::Float(f) => *f,
            _ => {
                return Err(ConfigError::Invalid {
                    field: format!("theta.{name}"),
                    message: "expected a number".into(),
                })
            }
        };
        values.insert(name.clone(), v);
    }
    theta_from_map(space, &values)
}

pub fn load(path: &Path, space: &ParameterSpace) -> Result<ParameterVector, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_toml(&text, space)
}
