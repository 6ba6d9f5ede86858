//! Artifact files and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ohx_core::solver::Snapshot;
use ohx_core::FluxConstants;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManifestConstants {
    pub c: f64,
    pub l: f64,
    pub l1: f64,
    pub m: f64,
}

impl ManifestConstants {
    pub fn new(k: FluxConstants, m: f64) -> Self {
        Self {
            c: k.c,
            l: k.l,
            l1: k.l1,
            m,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub exit_code: i32,
    pub status: String,
    pub message: String,
    pub config: BTreeMap<String, String>,
    pub constants: Option<ManifestConstants>,
    pub files: Vec<FileRecord>,
    pub warnings: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Output directory plus a record of everything written to it.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes via a temporary name and renames, so readers never see a
    /// partial file.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, self.dir.join(name))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// The manifest lists every file written before it; it does not list itself.
    pub fn write_manifest(&self, manifest: &Manifest) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
        text.push('\n');
        let tmp = self.dir.join(".manifest.json.tmp");
        fs::write(&tmp, text)?;
        fs::rename(&tmp, self.dir.join("manifest.json"))
    }
}

/// Scientific notation with 17 significant digits; round-trips exactly.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,x,u[,P]` rows, one per cell per snapshot.
pub fn snapshots_csv(snapshots: &[Snapshot], with_primitive: bool) -> String {
    let mut out = String::from(if with_primitive {
        "t,x,u,P\n"
    } else {
        "t,x,u\n"
    });
    for s in snapshots {
        let t = float(s.time());
        let g = s.field.grid();
        for (i, u) in s.field.values().iter().enumerate() {
            let _ = write!(out, "{t},{},{}", float(g.center(i)), float(*u));
            if with_primitive {
                let _ = write!(out, ",{}", float(s.primitive.values()[i]));
            }
            out.push('\n');
        }
    }
    out
}

/// `level,value,ratio` with `ratio = value_{k−1}/value_k` (empty on the first row).
pub fn trend_csv(levels: &[String], values: &[f64]) -> String {
    let mut out = String::from("level,value,ratio\n");
    for (k, (level, v)) in levels.iter().zip(values).enumerate() {
        let ratio = if k == 0 {
            String::new()
        } else {
            float(values[k - 1] / v)
        };
        let _ = writeln!(out, "{level},{},{ratio}", float(*v));
    }
    out
}
