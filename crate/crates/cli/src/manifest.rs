use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

/// Manifest written next to every artifact a subcommand produces.
#[derive(Debug, Serialize)]
pub struct RunManifest<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    /// Input name to checksum.
    pub inputs: BTreeMap<String, String>,
    /// Output path (as given) to checksum.
    pub outputs: BTreeMap<String, String>,
    pub details: T,
}

impl<T: Serialize> RunManifest<T> {
    pub fn new(command: &'static str, config: &RunConfig, details: T) -> Self {
        Self {
            tool: "imcprompt",
            version: imcprompt::VERSION,
            command,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            details,
        }
    }

    pub fn input(mut self, name: &str, checksum: String) -> Self {
        self.inputs.insert(name.to_string(), checksum);
        self
    }

    pub fn output(mut self, path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| imcprompt::Error::Io {
            path: path.into(),
            source: e,
        })?;
        self.outputs.insert(
            path.display().to_string(),
            imcprompt::checksum::sha256_hex(&bytes),
        );
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| imcprompt::Error::Io {
            path: path.into(),
            source: e,
        })?;
        Ok(())
    }
}

/// `<artifact>.manifest.json`, or `<dir>/manifest.json` for directories.
pub fn manifest_for(artifact: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        artifact.join("manifest.json")
    } else {
        imcprompt::prompting::manifest_path(artifact)
    }
}
