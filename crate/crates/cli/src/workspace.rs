//! Workspace layout and immutable artifact writes.
//!
//! Every command roots its outputs under one directory tree. An artifact is
//! written together with a `<name>.manifest.json` sidecar recording the
//! output hash, input hashes, seeds, and parameters, and contains no
//! timestamps, so reruns with identical inputs produce byte-identical
//! files. Writing different bytes over an existing artifact is refused.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use retain_core::hashing::sha256_hex;

use crate::error::{io_data, CliError};

pub const SUBDIRS: [&str; 6] = ["logs", "datasets", "models", "reports", "campaigns", "cache"];

/// The directory tree all commands read from and write to.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn open(root: &Path) -> Result<Workspace, CliError> {
        for sub in SUBDIRS {
            std::fs::create_dir_all(root.join(sub))
                .map_err(|e| io_data(&format!("creating workspace {}", root.display()), e))?;
        }
        Ok(Workspace { root: root.to_path_buf() })
    }

    pub fn path(&self, sub: &str, file: &str) -> PathBuf {
        self.root.join(sub).join(file)
    }
}

/// Provenance sidecar for one artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub artifact: String,
    pub sha256: String,
    pub tool: String,
    /// Input-name to content-hash (or literal value) map.
    pub inputs: BTreeMap<String, String>,
    /// Command parameters that shaped the output, seeds included.
    pub params: serde_json::Value,
}

fn tool_id() -> String {
    format!("retain/{}", env!("CARGO_PKG_VERSION"))
}

/// Write an artifact plus its manifest.
///
/// Rewriting identical bytes is a no-op success so pipelines can rerun;
/// different bytes at the same path are refused rather than mutated.
pub fn write_artifact(
    path: &Path,
    bytes: &[u8],
    inputs: BTreeMap<String, String>,
    params: serde_json::Value,
) -> Result<ArtifactManifest, CliError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Usage(format!("artifact path {} has no name", path.display())))?
        .to_string();
    let manifest = ArtifactManifest {
        artifact: name,
        sha256: sha256_hex(bytes),
        tool: tool_id(),
        inputs,
        params,
    };

    if path.exists() {
        let existing =
            std::fs::read(path).map_err(|e| io_data(&format!("reading {}", path.display()), e))?;
        if existing != bytes {
            return Err(CliError::Data(format!(
                "refusing to overwrite {} with different content; artifacts are immutable",
                path.display()
            )));
        }
    } else {
        std::fs::write(path, bytes)
            .map_err(|e| io_data(&format!("writing {}", path.display()), e))?;
    }

    let manifest_path = manifest_path_for(path);
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, &manifest_bytes)
        .map_err(|e| io_data(&format!("writing {}", manifest_path.display()), e))?;
    Ok(manifest)
}

pub fn manifest_path_for(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Read a data file, returning its content and hash for manifests.
pub fn read_input(path: &Path) -> Result<(String, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_data(&format!("reading {}", path.display()), e))?;
    let hash = sha256_hex(text.as_bytes());
    Ok((text, hash))
}
