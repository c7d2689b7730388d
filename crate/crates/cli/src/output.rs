//! Output directory handling and the `manifest.json` index.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub config_sha256: String,
    pub files: Vec<ManifestEntry>,
}

/// Writes files into one directory and remembers their names in order.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Creates `name` and hands a buffered writer to `fill`.
    pub fn write_with(&mut self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(self.root.join(name))?);
        fill(&mut w)?;
        w.flush()?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<()> {
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }

    /// Writes `manifest.json` covering every file written so far.
    pub fn write_manifest(&mut self, config_sha256: &str) -> io::Result<Manifest> {
        let mut files = Vec::with_capacity(self.written.len());
        for name in &self.written {
            let bytes = fs::read(self.root.join(name))?;
            files.push(ManifestEntry { file: name.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        }
        let manifest = Manifest { library_version: LIBRARY_VERSION.to_string(), config_sha256: config_sha256.to_string(), files };
        let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("nested")).unwrap();
        out.write_text("a.csv", "x\n1\n").unwrap();
        out.write_text("a.csv", "x\n2\n").unwrap();
        let m = out.write_manifest("abc").unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].sha256, sha256_hex(b"x\n2\n"));
        let back: Manifest = serde_json::from_str(&fs::read_to_string(out.root().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
