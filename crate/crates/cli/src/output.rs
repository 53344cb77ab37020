use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Provenance<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub outputs: &'a [OutputFile],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory whose files are written atomically and listed, with
/// checksums, in a closing `provenance.json`.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|source| CliError::Output { path: root.display().to_string(), source })?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.written
    }

    fn persist(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.path(name);
        let err = |source| CliError::Output { path: target.display().to_string(), source };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(err)?;
        tmp.write_all(bytes).map_err(err)?;
        tmp.as_file().sync_all().map_err(err)?;
        tmp.persist(&target).map_err(|e| err(e.error))?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.persist(name, bytes)?;
        self.written.retain(|f| f.file != name);
        self.written.push(OutputFile { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Renders into memory first so a failure never leaves a partial file.
    pub fn write_with<E: std::fmt::Display>(
        &mut self,
        name: &str,
        stage: &'static str,
        render: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| CliError::data(stage, e))?;
        self.write(name, &buf)
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<Vec<OutputFile>, CliError> {
        let prov = Provenance {
            tool: "adaptometer",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            config,
            outputs: &self.written,
        };
        let mut bytes = serde_json::to_vec_pretty(&prov).expect("serializable provenance");
        bytes.push(b'\n');
        self.persist("provenance.json", &bytes)?;
        Ok(self.written)
    }
}
