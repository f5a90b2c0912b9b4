//! Multi-domain labelled patch sets: a synthetic generator with a tunable
//! class/colour confounder, folder ingestion, and leave-one-domain-out splits.

mod layout;
mod synth;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::rng::derived;

pub use layout::{ingest, read_manifest, write_dataset, IngestReport, Manifest, MANIFEST_FILE};
pub use synth::{domain_presets, generate, render_content};

/// Colour style of one synthetic domain, applied in lαβ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub domain_id: usize,
    /// Offset added to the patch mean.
    pub stain_shift: [f64; 3],
    /// Multiplier on deviations from the patch mean.
    pub stain_scale: [f64; 3],
    /// Per-pixel Gaussian noise.
    pub noise_sigma: f64,
    /// αβ cast added with a class-dependent sign when the confounder fires.
    pub confound_cast: [f64; 2],
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .stain_shift
            .iter()
            .chain(&self.stain_scale)
            .chain(&self.confound_cast)
            .chain(std::iter::once(&self.noise_sigma))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(format!(
                "domain {}: non-finite spec",
                self.domain_id
            )));
        }
        if self.stain_scale.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain {}: stain_scale must be > 0",
                self.domain_id
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "domain {}: noise_sigma must be >= 0",
                self.domain_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSpec {
    pub num_domains: usize,
    pub classes: usize,
    pub patches_per_domain: usize,
    pub patch_side: usize,
    /// Probability that a patch's colour cast follows its class.
    pub confound_rho: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            num_domains: 3,
            classes: 2,
            patches_per_domain: 600,
            patch_side: 64,
            confound_rho: 0.8,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_domains == 0 {
            return Err(Error::InvalidParameter("num_domains must be >= 1".into()));
        }
        if self.classes == 0 {
            return Err(Error::InvalidParameter("classes must be >= 1".into()));
        }
        if self.patches_per_domain == 0 {
            return Err(Error::InvalidParameter(
                "patches_per_domain must be >= 1".into(),
            ));
        }
        if self.patch_side < 8 {
            return Err(Error::InvalidParameter("patch_side must be >= 8".into()));
        }
        if !(0.0..=1.0).contains(&self.confound_rho) {
            return Err(Error::InvalidParameter(format!(
                "confound_rho must be in [0, 1], got {}",
                self.confound_rho
            )));
        }
        Ok(())
    }
}

/// One labelled patch. `id` is its path relative to the dataset root and
/// serves as the provenance tag through training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub domain: usize,
    pub label: usize,
    pub image: ImagePatch,
    /// Class index the colour cast was drawn for (synthetic data only).
    pub confounder: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub domain_names: Vec<String>,
    pub class_names: Vec<String>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn num_domains(&self) -> usize {
        self.domain_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn domain_index(&self, name: &str) -> Result<usize> {
        self.domain_names
            .iter()
            .position(|d| d == name)
            .or_else(|| {
                name.parse::<usize>()
                    .ok()
                    .filter(|i| *i < self.domain_names.len())
            })
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown domain {name:?} (have {})",
                    self.domain_names.join(", ")
                ))
            })
    }

    /// Records per `(domain, class)`.
    pub fn counts(&self) -> Vec<Vec<usize>> {
        let mut c = vec![vec![0; self.num_classes()]; self.num_domains()];
        for r in &self.records {
            c[r.domain][r.label] += 1;
        }
        c
    }
}

/// Train/validation/test fractions within each training domain.
pub const SPLIT_FRACTIONS: [f64; 3] = [0.80, 0.15, 0.05];

/// Record indices of a leave-one-domain-out split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub hold_out: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// In-domain test records of the training domains.
    pub test_in_domain: Vec<usize>,
    /// Every record of the held-out domain.
    pub test: Vec<usize>,
}

/// Stratified split: each `(training domain, class)` cell is shuffled and cut
/// 80/15/5; the held-out domain goes entirely to `test`.
pub fn split(ds: &Dataset, hold_out: usize, seed: u64) -> Result<Split> {
    if hold_out >= ds.num_domains() {
        return Err(Error::InvalidParameter(format!(
            "hold-out domain {hold_out} does not exist ({} domains)",
            ds.num_domains()
        )));
    }
    if ds.num_domains() < 2 {
        return Err(Error::InvalidParameter(
            "leave-one-domain-out needs >= 2 domains".into(),
        ));
    }
    let mut out = Split {
        hold_out,
        train: Vec::new(),
        val: Vec::new(),
        test_in_domain: Vec::new(),
        test: Vec::new(),
    };
    for d in 0..ds.num_domains() {
        for k in 0..ds.num_classes() {
            let mut cell: Vec<usize> = (0..ds.records.len())
                .filter(|&i| ds.records[i].domain == d && ds.records[i].label == k)
                .collect();
            if d == hold_out {
                out.test.extend(cell);
                continue;
            }
            cell.shuffle(&mut derived(seed, &[d as u64, k as u64]));
            let n = cell.len() as f64;
            let n_val = (n * SPLIT_FRACTIONS[1]).round() as usize;
            let n_test = (n * SPLIT_FRACTIONS[2]).round() as usize;
            let n_train = cell.len() - n_val - n_test;
            out.train.extend_from_slice(&cell[..n_train]);
            out.val.extend_from_slice(&cell[n_train..n_train + n_val]);
            out.test_in_domain
                .extend_from_slice(&cell[n_train + n_val..]);
        }
    }
    for v in [
        &mut out.train,
        &mut out.val,
        &mut out.test_in_domain,
        &mut out.test,
    ] {
        v.sort_unstable();
    }
    Ok(out)
}
