use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl ManifestFile {
    pub fn new(path: &str, contents: &[u8]) -> Self {
        let digest = Sha256::digest(contents);
        ManifestFile {
            path: path.to_string(),
            bytes: contents.len(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

/// Provenance of one invocation: enough to re-run it and check the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub version: String,
    pub timestamp: String,
    pub files: Vec<ManifestFile>,
    pub timings: Vec<Timing>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: Option<&Path>, seed: Option<u64>, out_dir: &Path) -> Self {
        RunManifest {
            command,
            config: config.map(Path::to_path_buf),
            seed,
            out_dir: out_dir.to_path_buf(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            files: Vec::new(),
            timings: Vec::new(),
        }
    }
}
