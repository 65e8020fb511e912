//! Writes a synthetic corpus to disk as PNGs plus a manifest.

use std::path::{Path, PathBuf};

use gdrkit_core::bench::{generate, SynthDomainSpec};
use rayon::prelude::*;

use crate::io::{save_image, IoError};
use crate::manifest::{write_manifest, ManifestError, ManifestRecord};

pub const MANIFEST_NAME: &str = "manifest.csv";
pub const SPEC_NAME: &str = "spec.json";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("cannot create {}: {reason}", path.display())]
    Unwritable { path: PathBuf, reason: String },
    #[error("cannot read spec {}: {reason}", path.display())]
    Spec { path: PathBuf, reason: String },
    #[error(transparent)]
    Image(#[from] IoError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Core(#[from] gdrkit_core::Error),
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct SpecFile {
    seed: u64,
    domains: Vec<SynthDomainSpec>,
}

/// Reads a JSON list of domain specs, or an object with a `domains` list.
pub fn load_specs(path: &Path) -> Result<Vec<SynthDomainSpec>, SynthError> {
    let err = |reason: String| SynthError::Spec {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let list = match value {
        serde_json::Value::Object(mut m) => m.remove("domains").ok_or_else(|| err("no `domains` field".into()))?,
        v => v,
    };
    serde_json::from_value(list).map_err(|e| err(e.to_string()))
}

/// Renders the corpus into `out_dir/<domain>/<domain>_<k>.png` and writes
/// the manifest and the specs used. Returns the manifest records.
pub fn write_corpus(specs: &[SynthDomainSpec], seed: u64, out_dir: &Path) -> Result<Vec<ManifestRecord>, SynthError> {
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|e| SynthError::Unwritable {
            path: p.to_path_buf(),
            reason: e.to_string(),
        })
    };
    mkdir(out_dir)?;
    let corpus = generate(specs, seed)?;
    let ds = &corpus.dataset;
    for d in &ds.domains {
        mkdir(&out_dir.join(d))?;
    }
    let mut per_domain = vec![0usize; ds.domains.len()];
    let records: Vec<ManifestRecord> = ds
        .samples
        .iter()
        .map(|s| {
            let k = per_domain[s.domain];
            per_domain[s.domain] += 1;
            let name = &ds.domains[s.domain];
            ManifestRecord {
                path: PathBuf::from(name).join(format!("{name}_{k:04}.png")),
                grade: s.grade,
                domain: name.clone(),
            }
        })
        .collect();
    ds.samples
        .par_iter()
        .zip(&records)
        .try_for_each(|(s, r)| save_image(&s.image, &out_dir.join(&r.path)))?;
    write_manifest(&out_dir.join(MANIFEST_NAME), &records)?;
    let spec = SpecFile {
        seed,
        domains: specs.to_vec(),
    };
    let spec_path = out_dir.join(SPEC_NAME);
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec).expect("specs serialize") + "\n").map_err(|e| {
        SynthError::Unwritable {
            path: spec_path.clone(),
            reason: e.to_string(),
        }
    })?;
    Ok(records)
}
