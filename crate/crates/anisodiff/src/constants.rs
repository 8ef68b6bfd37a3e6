//! Calibrated constants, persisted as JSON between runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SCHEMA: &str = "anisodiff-constants/1";

fn default_slack() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub schema: String,
    /// Largest `lhs / rhs` seen on the calibration batch of energy probes.
    pub energy_constant: Option<f64>,
    /// Largest constant the calibration batch of sup-bound probes required.
    pub supbound_constant: Option<f64>,
    /// Recursion constant of the critical-mass iteration.
    pub gamma: Option<f64>,
    /// Verification accepts ratios up to `slack * energy_constant`.
    #[serde(default = "default_slack")]
    pub energy_slack: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            energy_constant: None,
            supbound_constant: None,
            gamma: None,
            energy_slack: default_slack(),
        }
    }
}

impl Constants {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: Constants = serde_json::from_str(text).map_err(|e| Error::Parse(format!("constants: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Parse(format!("constants schema {:?}, expected {SCHEMA:?}", self.schema)));
        }
        for (name, v) in [
            ("energy_constant", self.energy_constant),
            ("supbound_constant", self.supbound_constant),
            ("gamma", self.gamma),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!("{name} = {v} must be finite and non-negative")));
                }
            }
        }
        if !(self.energy_slack.is_finite() && self.energy_slack >= 1.0) {
            return Err(invalid(format!("energy_slack = {} must be at least 1", self.energy_slack)));
        }
        Ok(())
    }

    /// Reads a constants file; a missing file is [`Error::MissingConstants`].
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_json_str(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingConstants(format!(
                "{} not found; run the calibrate subcommand first",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("constants serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Fails with [`Error::MissingConstants`] naming the absent field.
    pub fn require(value: Option<f64>, name: &str) -> Result<f64> {
        value.ok_or_else(|| {
            Error::MissingConstants(format!("{name} is not calibrated; run the calibrate subcommand first"))
        })
    }
}
