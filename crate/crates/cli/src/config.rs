//! JSON config schemas. Every file carries a `schema_version` so future
//! format changes can be detected instead of misread.

use std::path::Path;

use calens_core::synthetic::WorldSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(path: &Path, version: u32) -> CliResult<()> {
    if version != SCHEMA_VERSION {
        return Err(CliError::format(format!(
            "{}: schema_version {version} is not supported (expected {SCHEMA_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

/// World description for `simulate` and the sampled verification modes.
#[derive(Debug, Deserialize)]
pub struct WorldFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub world: WorldSpec,
}

pub fn read_world(path: &Path) -> CliResult<WorldSpec> {
    let text = std::fs::read_to_string(path)?;
    let file: WorldFile =
        serde_json::from_str(&text).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    check_version(path, file.schema_version)?;
    file.world.validate()?;
    Ok(file.world)
}

/// Closed-form table description for the table-based verification modes.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub class_count: usize,
    pub s_support: Vec<Vec<f64>>,
    pub r_support: Vec<Vec<f64>>,
    /// Label marginals; uniform when omitted.
    #[serde(default)]
    pub marginals: Option<Vec<f64>>,
}

/// Config for `verify`. Sampled modes use `world`/`shift`/`n`; table
/// modes use `table`. Extra knobs have CLI overrides.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub world: Option<WorldSpec>,
    #[serde(default)]
    pub shift: Option<String>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub challenger_seed: Option<u64>,
    #[serde(default)]
    pub table: Option<TableConfig>,
    /// Negative control: drop the marginal correction from the posterior
    /// identity. Only meaningful for the identity check.
    #[serde(default)]
    pub drop_marginal_term: bool,
}

pub fn read_verify_config(path: &Path) -> CliResult<VerifyConfigFile> {
    let text = std::fs::read_to_string(path)?;
    let file: VerifyConfigFile =
        serde_json::from_str(&text).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    check_version(path, file.schema_version)?;
    Ok(file)
}
