//! Hardware shape description: depth, width, PHV length, and the ALU program
//! assigned to each grid slot.
//!
//! On disk this is TOML:
//!
//! ```toml
//! depth = 2
//! width = 2
//! phv_length = 2
//! stages = [
//!     ["raw", "raw"],
//!     ["raw", "raw"],
//! ]
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

/// The shape of a pipeline and which ALU program sits in each slot.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSpec {
    /// Number of stages.
    pub depth: usize,
    /// ALUs per stage.
    pub width: usize,
    /// Containers per PHV.
    pub phv_length: usize,
    /// `stage_assignments[s][a]` names the ALU program at stage `s`, slot `a`.
    #[serde(rename = "stages")]
    pub stage_assignments: Vec<Vec<String>>,
}

/// A hardware spec that does not describe a buildable pipeline.
#[derive(Debug, thiserror::Error)]
pub enum HwSpecError {
    #[error("hardware spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("hardware spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("hardware spec: {0}")]
    Invalid(String),
}

impl HardwareSpec {
    pub fn from_toml(text: &str) -> Result<Self, HwSpecError> {
        let spec: HardwareSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HwSpecError> {
        HardwareSpec::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HwSpecError> {
        if self.depth == 0 {
            return Err(HwSpecError::Invalid("depth must be positive".into()));
        }
        if self.width == 0 {
            return Err(HwSpecError::Invalid("width must be positive".into()));
        }
        if self.phv_length == 0 {
            return Err(HwSpecError::Invalid("phv_length must be positive".into()));
        }
        if self.stage_assignments.len() != self.depth {
            return Err(HwSpecError::Invalid(format!(
                "depth is {} but {} stages are listed",
                self.depth,
                self.stage_assignments.len()
            )));
        }
        for (s, stage) in self.stage_assignments.iter().enumerate() {
            if stage.len() != self.width {
                return Err(HwSpecError::Invalid(format!(
                    "width is {} but stage {} lists {} ALUs",
                    self.width,
                    s,
                    stage.len()
                )));
            }
        }
        Ok(())
    }

    /// The distinct ALU program names this spec references.
    pub fn alu_names(&self) -> BTreeSet<&str> {
        self.stage_assignments
            .iter()
            .flatten()
            .map(String::as_str)
            .collect()
    }
}
