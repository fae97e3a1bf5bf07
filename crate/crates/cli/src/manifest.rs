use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::LossSpec;
use crate::error::{CliError, CliResult};
use crate::io::{sha256_hex, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RNG_DESCRIPTION: &str = "ChaCha20 (rand_chacha 0.9) via seed_from_u64; trial i of master m uses splitmix64(splitmix64(m) + i)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn record(path: &Path) -> CliResult<Self> {
        Ok(InputFile {
            path: fs::canonicalize(path).map_err(|e| CliError::io(path, e))?,
            sha256: sha256_hex(path)?,
        })
    }
}

/// Everything needed to re-run a command. `args` is the full resolved
/// argument list (defaults included, `--out` excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub out: PathBuf,
    pub losses: Vec<LossSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub inputs: Vec<InputFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Value>,
    pub rng: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub count: usize,
    pub floor_ratio: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, out: &Path) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            out: out.to_path_buf(),
            losses: Vec::new(),
            grid: None,
            seed: None,
            inputs: Vec::new(),
            scenario: None,
            rng: RNG_DESCRIPTION.to_string(),
            outputs: Vec::new(),
        }
    }

    /// Written unrounded so recorded parameters replay exactly.
    pub fn write(&self) -> CliResult<PathBuf> {
        let path = self.out.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Fails if a recorded input file changed since the run.
    pub fn check_inputs(&self) -> CliResult<()> {
        for input in &self.inputs {
            let now = sha256_hex(&input.path)?;
            if now != input.sha256 {
                return Err(CliError::InvalidArgs(format!(
                    "{} changed since the manifest was written",
                    input.path.display()
                )));
            }
        }
        Ok(())
    }
}
