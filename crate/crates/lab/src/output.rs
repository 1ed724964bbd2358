//! Artifacts are assembled in memory and written with temp-and-rename, so a
//! failed run never leaves a half-written file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Shortest round-trip decimal; empty for a missing value.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Comma-separated table with a header line and LF endings.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv { text: String::new() };
        c.row_str(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row(&mut self, values: &[f64]) {
        self.row_str(values.iter().map(|v| num(*v)));
    }

    pub fn row_str<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{c}");
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<Artifact>,
}

impl Artifacts {
    pub fn csv(&mut self, name: impl Into<String>, csv: Csv) {
        self.files.push(Artifact { name: name.into(), bytes: csv.into_bytes() });
    }

    pub fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        bytes.push(b'\n');
        self.files.push(Artifact { name: name.into(), bytes });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|a| a.name == name).map(|a| a.bytes.as_slice())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes `bytes` to `dir/name` through a temporary file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub overrides: Vec<String>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn records(artifacts: &Artifacts) -> Vec<ArtifactRecord> {
        artifacts
            .files
            .iter()
            .map(|a| ArtifactRecord { name: a.name.clone(), bytes: a.bytes.len(), sha256: sha256_hex(&a.bytes) })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.0), "1");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn csv_uses_lf() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[0.5, 2.0]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "a,b\n0.5,2\n");
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "x.txt", b"one").unwrap();
        write_atomic(dir.path(), "x.txt", b"two").unwrap();
        assert_eq!(std::fs::read(dir.path().join("x.txt")).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
