//! Atomic artifact writing, verdict collection and the hash manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use dynloc::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.resolved.ini";
pub const VERDICTS: &str = "verdicts.json";

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub enforced: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub files: Vec<FileRecord>,
    /// Resolved configuration; not hashed because it records the worker count.
    pub config_echo: String,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(&target, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(&target, e))?;
    tmp.persist(&target).map_err(|e| io_err(&target, e.error))?;
    Ok(())
}

/// Output directory of one run.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    csv: bool,
    json: bool,
    files: Vec<FileRecord>,
    pub verdicts: Vec<Verdict>,
    enforce: Option<Vec<String>>,
}

impl Artifacts {
    /// `enforce = None` enforces every verdict; otherwise only verdicts whose
    /// name starts with one of the listed prefixes.
    pub fn create(dir: &Path, formats: &[String], enforce: Option<Vec<String>>) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut csv = false;
        let mut json = false;
        for f in formats {
            match f.as_str() {
                "csv" => csv = true,
                "json" => json = true,
                other => {
                    return Err(Error::Config {
                        line: 0,
                        message: format!("unknown output format '{other}'"),
                    })
                }
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            json,
            files: Vec::new(),
            verdicts: Vec::new(),
            enforce,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir, name, bytes)?;
        let rec = FileRecord {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        };
        self.files.retain(|f| f.name != name);
        self.files.push(rec);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let path = self.dir.join(name);
        let csv_err = |e: csv::Error| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        };
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;
        self.record(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.json {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.record(name, &bytes)
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        let enforced = match &self.enforce {
            None => true,
            Some(list) => list.iter().any(|p| name.starts_with(p.as_str())),
        };
        self.verdicts.push(Verdict {
            name: name.to_string(),
            pass,
            enforced,
            detail: detail.into(),
        });
    }

    pub fn failed(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| v.enforced && !v.pass).collect()
    }

    /// Writes the config echo, the verdict list and the manifest.
    pub fn finish(&mut self, config_echo: &str) -> Result<Manifest> {
        write_atomic(&self.dir, CONFIG_ECHO, config_echo.as_bytes())?;
        let mut bytes = serde_json::to_vec_pretty(&self.verdicts)?;
        bytes.push(b'\n');
        self.record(VERDICTS, &bytes)?;
        let mut files = self.files.clone();
        files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest {
            files,
            config_echo: CONFIG_ECHO.to_string(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.dir, MANIFEST, &bytes)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits_and_lf() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path(), &["csv".into()], None).unwrap();
        a.csv("t.csv", &["x", "n"], &[vec![Cell::F(0.1), Cell::I(3)]]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "x,n\n1.0000000000000001e-1,3\n");
        let v: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(v, 0.1);
    }

    #[test]
    fn manifest_lists_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path(), &["json".into()], Some(vec!["gre".into()])).unwrap();
        a.json("r.json", &vec![1.5, 2.0]).unwrap();
        a.verdict("gre.d1", true, "");
        a.verdict("residuum", false, "");
        assert!(a.failed().is_empty());
        let m = a.finish("[lattice]\n").unwrap();
        assert_eq!(m.files.len(), 2);
        let bytes = std::fs::read(dir.path().join("r.json")).unwrap();
        assert_eq!(m.files[0].sha256, hex::encode(Sha256::digest(&bytes)));
        assert!(dir.path().join(CONFIG_ECHO).exists());
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
