use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::error::{CliError, IoContext};

/// Tracks every file written under the output directory.
#[derive(Debug)]
pub struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Outputs {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel` (relative to the root), creating parent directories.
    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<(), CliError> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).context(|| format!("writing {}", path.display()))?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Writes `manifest.txt` listing every written file with its checksum.
    pub fn write_manifest(&self, header: &[(&str, String)], wall: Duration) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in header {
            text.push_str(&format!("{k} = {v}\n"));
        }
        text.push_str(&format!("wall_time_s = {:.3}\n", wall.as_secs_f64()));
        let mut files = self.files.clone();
        files.sort();
        files.dedup();
        for rel in files {
            let path = self.root.join(&rel);
            let bytes = fs::read(&path).context(|| format!("reading {}", path.display()))?;
            let name = rel.to_string_lossy().replace('\\', "/");
            text.push_str(&format!("file {} {name}\n", sha256_hex(&bytes)));
        }
        let path = self.root.join("manifest.txt");
        fs::write(&path, text).context(|| format!("writing {}", path.display()))
    }
}
