use std::fs;
use std::path::Path;

use frog_core::sequence::{SpecDocument, SpecError};
use frog_core::{ProcessParams, SequenceSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Deserialize)]
struct ParamsDocument {
    #[serde(rename = "N", alias = "particles")]
    particles: u32,
    #[serde(rename = "L", alias = "lifetime")]
    lifetime: u32,
    spec: SpecDocument,
}

fn spec_error(e: SpecError) -> CliError {
    if e.is_schema_error() {
        CliError::Malformed(e.to_string())
    } else {
        CliError::Invalid(e.to_string())
    }
}

pub fn load_params(path: &Path) -> Result<ProcessParams, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
    parse_params(&text)
}

pub fn parse_params(text: &str) -> Result<ProcessParams, CliError> {
    let doc: ParamsDocument =
        serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))?;
    let spec = SequenceSpec::try_from(doc.spec).map_err(spec_error)?;
    ProcessParams::new(doc.particles, doc.lifetime, spec)
        .map_err(|e| CliError::Malformed(e.to_string()))
}
