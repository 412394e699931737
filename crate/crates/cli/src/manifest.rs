//! Run directories: output registration, checksums and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub role: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: String,
    /// Every input that shaped the run, defaults included.
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputEntry>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<(Manifest, PathBuf), CliError> {
        let file = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file)
            .map_err(|e| CliError::config(format!("cannot read manifest {}: {e}", file.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("manifest {}: {e}", file.display())))?;
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, dir))
    }

    pub fn output<'a>(&'a self, role: &'a str) -> impl Iterator<Item = &'a OutputEntry> + 'a {
        self.outputs.iter().filter(move |o| o.role == role)
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Collects the files a run writes under its output directory.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<(String, String)>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), outputs: vec![] })
    }

    /// Absolute path for a relative output name, creating parent directories.
    pub fn path(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(CliError::io)?;
        }
        Ok(p)
    }

    pub fn register(&mut self, rel: &str, role: &str) {
        self.outputs.push((rel.to_string(), role.to_string()));
    }

    /// Registers both files of a dump written at stem `rel`.
    pub fn register_dump(&mut self, rel: &str, role: &str) {
        self.register(&format!("{rel}.bin"), role);
        self.register(&format!("{rel}.json"), &format!("{role}-header"));
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, role: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.into()))?;
        fs::write(self.path(rel)?, text + "\n").map_err(CliError::io)?;
        self.register(rel, role);
        Ok(())
    }

    pub fn finish(
        self,
        mode: &str,
        config: serde_json::Value,
        wall_time_s: f64,
        summary: serde_json::Value,
    ) -> Result<Manifest, CliError> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for (rel, role) in self.outputs {
            let p = self.root.join(&rel);
            let meta = fs::metadata(&p).map_err(CliError::io)?;
            outputs.push(OutputEntry { sha256: sha256_file(&p).map_err(CliError::io)?, path: rel, role, bytes: meta.len() });
        }
        let manifest = Manifest {
            tool: "ablab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: mode.into(),
            config,
            wall_time_s,
            outputs,
            summary,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(e.into()))?;
        fs::write(self.root.join(MANIFEST_NAME), text + "\n").map_err(CliError::io)?;
        Ok(manifest)
    }
}
