//! Reinhard colour normalization in lαβ space.
//!
//! Source statistics are mapped onto a reference [`LabStats`] channel by
//! channel: `v' = (v - μ_src) · σ_ref / max(σ_src, ε) + μ_ref`. The
//! reference is a statistics value rather than an image so it can be
//! computed once per style patch and reused across a batch.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{lab_to_rgb, rgb_to_lab, ImagePatch, LabImage};

/// Floor on the source standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel mean and population standard deviation in lαβ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl LabStats {
    pub fn new(mean: [f64; 3], std: [f64; 3]) -> Result<Self> {
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "lαβ statistics must be finite".into(),
            ));
        }
        if std.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidParameter(
                "standard deviation must be >= 0".into(),
            ));
        }
        Ok(Self { mean, std })
    }

    /// Statistics of a lαβ image. Sums are taken relative to the first pixel
    /// so that constant channels yield exactly zero spread.
    pub fn of_lab(lab: &LabImage) -> Self {
        let n = (lab.height() * lab.width()) as f64;
        let origin = lab.pixels().next().unwrap_or([0.0; 3]);
        let mut shift = [0.0; 3];
        for p in lab.pixels() {
            for c in 0..3 {
                shift[c] += p[c] - origin[c];
            }
        }
        let mean = [0, 1, 2].map(|c| origin[c] + shift[c] / n);
        let mut var = [0.0; 3];
        for p in lab.pixels() {
            for c in 0..3 {
                let d = p[c] - mean[c];
                var[c] += d * d;
            }
        }
        Self {
            mean,
            std: var.map(|v| (v / n).sqrt()),
        }
    }

    pub fn max_abs_diff(&self, other: &LabStats) -> f64 {
        self.mean
            .iter()
            .chain(&self.std)
            .zip(other.mean.iter().chain(&other.std))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn lab_stats(img: &ImagePatch) -> LabStats {
    LabStats::of_lab(&rgb_to_lab(img))
}

/// The per-pixel affine map from source onto reference statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReinhardMap {
    source_mean: [f64; 3],
    gain: [f64; 3],
    reference_mean: [f64; 3],
}

impl ReinhardMap {
    pub fn new(source: &LabStats, reference: &LabStats) -> Self {
        Self {
            source_mean: source.mean,
            gain: [0, 1, 2].map(|c| reference.std[c] / source.std[c].max(STD_FLOOR)),
            reference_mean: reference.mean,
        }
    }

    #[inline]
    pub fn apply(&self, lab: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|c| (lab[c] - self.source_mean[c]) * self.gain[c] + self.reference_mean[c])
    }
}

/// Affine statistic transfer applied to an already-converted source.
pub fn reinhard_transfer(lab: &LabImage, source: &LabStats, reference: &LabStats) -> LabImage {
    let map = ReinhardMap::new(source, reference);
    let mut out = lab.clone();
    for p in out.data_mut().chunks_exact_mut(3) {
        let q = map.apply([p[0], p[1], p[2]]);
        p.copy_from_slice(&q);
    }
    out
}

/// Normalized image in lαβ, before the conversion back to RGB.
pub fn reinhard_normalize_lab(source: &ImagePatch, reference: &LabStats) -> LabImage {
    let lab = rgb_to_lab(source);
    let stats = LabStats::of_lab(&lab);
    reinhard_transfer(&lab, &stats, reference)
}

pub fn reinhard_normalize(source: &ImagePatch, reference: &LabStats) -> ImagePatch {
    lab_to_rgb(&reinhard_normalize_lab(source, reference))
}

/// A colour normalizer that maps a patch onto reference statistics.
pub trait StainNormalizer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Reference statistics for a style patch.
    fn fit(&self, reference: &ImagePatch) -> LabStats;

    fn normalize(&self, source: &ImagePatch, reference: &LabStats) -> ImagePatch;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Reinhard;

impl StainNormalizer for Reinhard {
    fn name(&self) -> &'static str {
        "reinhard"
    }

    fn fit(&self, reference: &ImagePatch) -> LabStats {
        lab_stats(reference)
    }

    fn normalize(&self, source: &ImagePatch, reference: &LabStats) -> ImagePatch {
        reinhard_normalize(source, reference)
    }
}

pub fn available_normalizers() -> &'static [&'static str] {
    &["reinhard"]
}

pub fn normalizer_by_name(name: &str) -> Result<Box<dyn StainNormalizer>> {
    match name {
        "reinhard" => Ok(Box::new(Reinhard)),
        other => Err(Error::InvalidParameter(format!(
            "unknown stain normalizer {other:?}; available: {}",
            available_normalizers().join(", ")
        ))),
    }
}

const STAT_KEYS: [&str; 6] = ["mean_l", "mean_a", "mean_b", "std_l", "std_a", "std_b"];

/// Parse a `key = value` reference statistics file. Blank lines and `#`
/// comments are ignored; all six keys are required exactly once.
pub fn parse_ref_stats(text: &str) -> Result<LabStats> {
    let mut found = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        if !STAT_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "line {}: unknown key {key:?}",
                lineno + 1
            )));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("line {}: {key}: {e}", lineno + 1)))?;
        if found.insert(key, value).is_some() {
            return Err(Error::Config(format!("duplicate key {key:?}")));
        }
    }
    let get = |k: &str| {
        found
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing key {k:?}")))
    };
    LabStats::new(
        [get("mean_l")?, get("mean_a")?, get("mean_b")?],
        [get("std_l")?, get("std_a")?, get("std_b")?],
    )
}

pub fn format_ref_stats(stats: &LabStats) -> String {
    let values = stats.mean.iter().chain(&stats.std);
    STAT_KEYS
        .iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

pub fn load_ref_stats(path: &Path) -> Result<LabStats> {
    parse_ref_stats(&std::fs::read_to_string(path)?)
}

pub fn save_ref_stats(stats: &LabStats, path: &Path) -> Result<()> {
    std::fs::write(path, format_ref_stats(stats))?;
    Ok(())
}
