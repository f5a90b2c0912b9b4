//! On-disk layout `root/<domain>/<class>/*.png` plus a generator manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{load_png, save_png};

use super::{Dataset, DomainSpec, GenSpec, Record};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to regenerate a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub generator: GenSpec,
    pub domains: Vec<DomainSpec>,
    pub records: usize,
}

/// Write every record as a PNG under its id, plus the manifest if given.
pub fn write_dataset(ds: &Dataset, root: &Path, manifest: Option<&Manifest>) -> Result<()> {
    for r in &ds.records {
        let path = root.join(&r.id);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        save_png(&r.image, &path)?;
    }
    if let Some(m) = manifest {
        fs::create_dir_all(root)?;
        let text = toml::to_string(m).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(root.join(MANIFEST_FILE), text)?;
    }
    Ok(())
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub dataset: Dataset,
    /// Files that failed to decode, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() != want_dirs {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        out.push((name, path));
    }
    out.sort();
    Ok(out)
}

/// Names that all parse as integers sort numerically, otherwise lexically.
fn sort_class_names(names: &mut [String]) {
    if names.iter().all(|n| n.parse::<u64>().is_ok()) {
        names.sort_by_key(|n| n.parse::<u64>().unwrap_or(0));
    } else {
        names.sort();
    }
}

/// Read `root/<domain>/<class>/*.png`. Domains and files are taken in name
/// order; labels index the sorted union of class directory names. Files
/// that fail to decode are skipped and reported.
pub fn ingest(root: &Path) -> Result<IngestReport> {
    if !root.is_dir() {
        return Err(Error::Layout(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let domains = sorted_entries(root, true)?;
    if domains.len() < 2 {
        return Err(Error::Layout(format!(
            "{}: need at least 2 domain directories, found {}",
            root.display(),
            domains.len()
        )));
    }
    let mut per_domain = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (dname, dpath) in &domains {
        let classes = sorted_entries(dpath, true)?;
        if classes.is_empty() {
            return Err(Error::Layout(format!(
                "domain {dname} has no class directories"
            )));
        }
        for (cname, _) in &classes {
            if !class_names.contains(cname) {
                class_names.push(cname.clone());
            }
        }
        per_domain.push(classes);
    }
    sort_class_names(&mut class_names);

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (d, ((dname, _), classes)) in domains.iter().zip(&per_domain).enumerate() {
        for (cname, cpath) in classes {
            let files: Vec<_> = sorted_entries(cpath, false)?
                .into_iter()
                .filter(|(n, _)| n.to_ascii_lowercase().ends_with(".png"))
                .collect();
            if files.is_empty() {
                return Err(Error::Layout(format!(
                    "class directory {dname}/{cname} has no PNG files"
                )));
            }
            let label = class_names
                .iter()
                .position(|c| c == cname)
                .expect("collected above");
            for (fname, fpath) in files {
                match load_png(&fpath) {
                    Ok(image) => records.push(Record {
                        id: format!("{dname}/{cname}/{fname}"),
                        domain: d,
                        label,
                        image,
                        confounder: None,
                    }),
                    Err(e @ (Error::Decode(_) | Error::UnsupportedFormat(_))) => {
                        log::warn!("skipping {}: {e}", fpath.display());
                        skipped.push((fpath, e.to_string()));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(IngestReport {
        dataset: Dataset {
            domain_names: domains.into_iter().map(|(n, _)| n).collect(),
            class_names,
            records,
        },
        skipped,
    })
}
