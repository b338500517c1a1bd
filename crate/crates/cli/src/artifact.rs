//! Versioned artifact files; every one carries the config hash and seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    artifact: String,
    format_version: u32,
    config_hash: String,
    seed: u64,
    payload: T,
}

pub struct ArtifactDir {
    pub root: PathBuf,
    pub provenance: Provenance,
}

fn io_err(stage: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::StageMessage {
        stage: stage.to_string(),
        message: format!("{}: {e}", path.display()),
    }
}

impl ArtifactDir {
    pub fn create(root: &Path, provenance: Provenance) -> Result<ArtifactDir, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err("output", root, e))?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| io_err("output", &p, e))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, kind: &str, payload: &T) -> Result<PathBuf, CliError> {
        let env = Envelope {
            artifact: kind.to_string(),
            format_version: ARTIFACT_FORMAT_VERSION,
            config_hash: self.provenance.config_hash.clone(),
            seed: self.provenance.seed,
            payload,
        };
        let text = serde_json::to_string_pretty(&env).map_err(|e| io_err("output", &self.path(name), e))?;
        self.write_text(name, &(text + "\n"))
    }

    /// CSV table preceded by a `#` provenance line.
    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let p = self.path(name);
        w.write_record(header).map_err(|e| io_err("output", &p, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io_err("output", &p, e))?;
        }
        let body = w.into_inner().map_err(|e| io_err("output", &p, e))?;
        let mut text = format!(
            "# config_hash={} seed={}\n",
            self.provenance.config_hash, self.provenance.seed
        );
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        self.write_text(name, &text)
    }

    /// Reads a JSON artifact, checking its kind and format version.
    pub fn read_json<T: DeserializeOwned>(&self, name: &str, kind: &str) -> Result<(T, Provenance), CliError> {
        read_json(&self.path(name), kind)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<(T, Provenance), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err("input", path, e))?;
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| io_err("input", path, e))?;
    if env.artifact != kind || env.format_version != ARTIFACT_FORMAT_VERSION {
        return Err(io_err(
            "input",
            path,
            format!("expected {kind} v{ARTIFACT_FORMAT_VERSION}, found {} v{}", env.artifact, env.format_version),
        ));
    }
    Ok((
        env.payload,
        Provenance {
            config_hash: env.config_hash,
            seed: env.seed,
        },
    ))
}

/// Formats a float for report tables (shortest round-trip form).
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
