//! Optional JSON configuration mirroring the CLI flags. Explicit flags
//! win over config values, which win over built-in defaults.

use crate::{CliError, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub encode: EncodeSection,
    pub decode: DecodeSection,
    pub eval: EvalSection,
    pub losscheck: LosscheckSection,
    pub viz: VizSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeSection {
    pub stride: Option<u32>,
    pub lane_sigma: Option<f64>,
    pub min_iou: Option<f64>,
    pub pace: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    pub stride: Option<u32>,
    pub threshold: Option<f64>,
    pub occl_threshold: Option<f64>,
    pub cluster_dist: Option<f64>,
    pub poly_degree: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub line_width: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LosscheckSection {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VizSection {
    pub stride: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::schema(
                path,
                format!("line {} column {}: {e}", e.line(), e.column()),
            )
        })
    }
}
