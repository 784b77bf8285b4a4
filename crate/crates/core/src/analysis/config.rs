use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scenarios::{AccParams, RobotParams, ScenarioKind};

use super::AnalysisError;

/// Controller knobs that are not part of either scenario's parameter set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerOverrides {
    pub w: Option<f64>,
    pub substeps: Option<usize>,
    pub hocbf_gains: Option<Vec<f64>>,
    pub grid_per_dim: Option<usize>,
    pub row_dt: Option<f64>,
}

/// Everything a run can be configured with. Partial documents fill in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub acc: AccParams,
    pub robot: RobotParams,
    pub controller: ControllerOverrides,
    /// Dotted keys explicitly given by the user.
    #[serde(skip)]
    pub explicit: BTreeSet<String>,
}

fn leaf_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                leaf_paths(child, &p, out);
            }
        }
        _ => {
            out.insert(prefix.to_string());
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, AnalysisError> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| AnalysisError::Config(format!("config is not valid JSON: {e}")))?;
        let mut cfg: RunConfig = serde_json::from_value(doc.clone())
            .map_err(|e| AnalysisError::Config(e.to_string()))?;
        leaf_paths(&doc, "", &mut cfg.explicit);
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AnalysisError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    /// Applies `key=value`. Bare keys resolve against the selected scenario's
    /// section first, then `controller`. Values are parsed as JSON, falling
    /// back to a plain string.
    pub fn apply_override(&mut self, scenario: ScenarioKind, assignment: &str) -> Result<(), AnalysisError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            AnalysisError::Config(format!("override `{assignment}` is not key=value"))
        })?;
        let key = key.trim();
        let value: Value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut doc = serde_json::to_value(&*self).map_err(|e| AnalysisError::Config(e.to_string()))?;
        let path = self.resolve(&doc, scenario, key)?;
        let (section, field) = path.split_once('.').expect("resolved paths are dotted");
        doc[section][field] = value;
        let explicit = std::mem::take(&mut self.explicit);
        *self = serde_json::from_value(doc)
            .map_err(|e| AnalysisError::Config(format!("override `{assignment}`: {e}")))?;
        self.explicit = explicit;
        self.explicit.insert(path);
        Ok(())
    }

    fn resolve(&self, doc: &Value, scenario: ScenarioKind, key: &str) -> Result<String, AnalysisError> {
        let has = |section: &str, field: &str| {
            doc.get(section)
                .and_then(|s| s.as_object())
                .is_some_and(|s| s.contains_key(field))
        };
        if let Some((section, field)) = key.split_once('.') {
            if has(section, field) {
                return Ok(key.to_string());
            }
        } else {
            for section in [scenario.as_str(), "controller"] {
                if has(section, key) {
                    return Ok(format!("{section}.{key}"));
                }
            }
        }
        Err(AnalysisError::Config(format!("unknown configuration key `{key}`")))
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key) || self.explicit.iter().any(|k| k.starts_with(&format!("{key}.")))
    }
}
