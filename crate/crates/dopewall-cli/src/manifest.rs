use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::{Command, HalfhexCommand};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run a command: the argument vector it was
/// given, the parsed parameters for readers, and hashes of what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<OutputHash>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Kernel(_) => "kernel",
        Command::Sample(_) => "sample",
        Command::Oracle(_) => "oracle",
        Command::Equilibrium(_) => "equilibrium",
        Command::Limits(l) => match l {
            crate::args::LimitsCommand::Tw(_) => "limits tw",
            crate::args::LimitsCommand::Wall(_) => "limits wall",
            crate::args::LimitsCommand::Kernel(_) => "limits kernel",
            crate::args::LimitsCommand::Suite(_) => "limits suite",
        },
        Command::Halfhex(h) => match h {
            HalfhexCommand::Tile(_) => "halfhex tile",
            HalfhexCommand::Line(_) => "halfhex line",
            HalfhexCommand::Profile(_) => "halfhex profile",
            HalfhexCommand::Render(_) => "halfhex render",
        },
        Command::Verify(_) => "verify",
        Command::Replay(_) => "replay",
    }
}

pub fn seed_of(c: &Command) -> Option<u64> {
    match c {
        Command::Sample(a) => Some(a.seed),
        Command::Halfhex(HalfhexCommand::Tile(a)) => a.seed,
        Command::Halfhex(HalfhexCommand::Line(a)) => Some(a.seed),
        Command::Halfhex(HalfhexCommand::Profile(a)) => Some(a.seed),
        _ => None,
    }
}

pub fn build(argv: &[String], command: &Command, outputs: &[PathBuf]) -> Result<RunManifest, CliError> {
    Ok(RunManifest {
        command: command_name(command).to_string(),
        argv: argv.to_vec(),
        params: serde_json::to_value(command).map_err(|e| CliError::Validation(e.to_string()))?,
        seed: seed_of(command),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outputs.iter().map(|p| Ok(OutputHash { path: p.clone(), sha256: sha256_file(p)? })).collect::<Result<_, CliError>>()?,
    })
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn default_path(first_output: &Path) -> PathBuf {
    let mut s: OsString = first_output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
