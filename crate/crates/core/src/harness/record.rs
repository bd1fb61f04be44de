//! JSON run summaries: the configuration echo, the results and where the
//! binary came from.

use std::io::Write;
use std::process::Command;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub crate_version: String,
    /// `git describe --always --dirty` of the working directory, if any.
    pub git_describe: Option<String>,
    pub config: Value,
    pub results: Value,
}

/// `git describe --always --dirty`, or `None` outside a repository.
pub fn git_describe() -> Option<String> {
    let out = Command::new("git").args(["describe", "--always", "--dirty"]).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let s = String::from_utf8(out.stdout).ok()?.trim().to_string();
    (!s.is_empty()).then_some(s)
}

impl ExperimentRecord {
    pub fn new(experiment: &str, config: &impl Serialize, results: &impl Serialize) -> Result<Self, HarnessError> {
        Ok(Self {
            experiment: experiment.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            git_describe: git_describe(),
            config: serde_json::to_value(config)?,
            results: serde_json::to_value(results)?,
        })
    }

    pub fn write_json(&self, mut w: impl Write) -> Result<(), HarnessError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}
