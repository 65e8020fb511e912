//! `path,grade,domain` CSV manifests. Paths are relative to the manifest's
//! directory.

use std::path::{Path, PathBuf};

use gdrkit_core::data::{Dataset, Sample, N_GRADES};
use gdrkit_core::image::resize_bilinear;
use rayon::prelude::*;

use crate::io::{load_image, IoError};

pub const HEADER: [&str; 3] = ["path", "grade", "domain"];

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub grade: usize,
    pub domain: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("missing manifest: {}", .0.display())]
    Missing(PathBuf),
    #[error("cannot read manifest {}: {reason}", path.display())]
    Unreadable { path: PathBuf, reason: String },
    #[error("manifest is empty")]
    Empty,
    #[error("manifest header must be `path,grade,domain`, found `{0}`")]
    MissingHeader(String),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("cannot write manifest {}: {reason}", path.display())]
    Unwritable { path: PathBuf, reason: String },
    #[error(transparent)]
    Image(#[from] IoError),
    #[error(transparent)]
    Core(#[from] gdrkit_core::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ManifestError::Missing(path.to_path_buf()),
            _ => ManifestError::Unreadable {
                path: path.to_path_buf(),
                reason: e.to_string(),
            },
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            base_dir,
            records: parse_manifest_str(&text)?,
        })
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.path)
    }

    /// Domain names in order of first appearance.
    pub fn domains(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.domain) {
                out.push(r.domain.clone());
            }
        }
        out
    }

    /// Reads every image, resizing to `size` when given and different.
    pub fn load_dataset(&self, size: Option<(usize, usize)>) -> Result<Dataset, ManifestError> {
        let domains = self.domains();
        let samples = self
            .records
            .par_iter()
            .map(|r| {
                let mut image = load_image(&self.resolve(r))?;
                if let Some((w, h)) = size {
                    if (image.width(), image.height()) != (w, h) {
                        image = resize_bilinear(&image, w, h)?;
                    }
                }
                let domain = domains.iter().position(|d| *d == r.domain).expect("domain listed");
                Ok(Sample {
                    image,
                    grade: r.grade,
                    domain,
                })
            })
            .collect::<Result<Vec<_>, ManifestError>>()?;
        Ok(Dataset::new(domains, N_GRADES, samples)?)
    }
}

pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestRecord>, ManifestError> {
    Manifest::load(path).map(|m| m.records)
}

/// Parses manifest text; CRLF and LF line endings are equivalent.
pub fn parse_manifest_str(text: &str) -> Result<Vec<ManifestRecord>, ManifestError> {
    if text.trim().is_empty() {
        return Err(ManifestError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ManifestError::Line {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(ManifestError::MissingHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| ManifestError::Line {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| ManifestError::Line { line, message };
        if row.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", row.len())));
        }
        let path = &row[0];
        if path.is_empty() {
            return Err(bad("empty path".into()));
        }
        let grade: usize = row[1]
            .parse()
            .map_err(|_| bad(format!("grade `{}` is not an integer", &row[1])))?;
        if grade >= N_GRADES {
            return Err(bad(format!("grade {grade} outside 0..={}", N_GRADES - 1)));
        }
        let domain = &row[2];
        if domain.is_empty() {
            return Err(bad("empty domain".into()));
        }
        out.push(ManifestRecord {
            path: PathBuf::from(path),
            grade,
            domain: domain.to_string(),
        });
    }
    if out.is_empty() {
        return Err(ManifestError::Empty);
    }
    Ok(out)
}

pub fn render_manifest(records: &[ManifestRecord]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in records {
        w.write_record([r.path.to_string_lossy().as_ref(), &r.grade.to_string(), &r.domain])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), ManifestError> {
    std::fs::write(path, render_manifest(records)).map_err(|e| ManifestError::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
