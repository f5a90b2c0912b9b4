use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::image::ImagePatch;

use super::classifier::Classifier;
use super::cpit::{PreparedQuery, StylePool};
use super::objective::{build_views, loss_on_views, ViewSet};
use super::CpitConfig;

pub const GRAD_CHECK_TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;
const MIN_COORDS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRAD_CHECK_TOL
    }
}

/// Compare the analytic gradient (scaled by `grad_scale`, 1.0 for a real
/// check) against central differences on a fixed set of views.
pub fn grad_check_views<R: Rng + ?Sized>(
    clf: &Classifier,
    views: &ViewSet,
    label: usize,
    grad_scale: f64,
    rng: &mut R,
) -> GradCheckReport {
    let (_, analytic) = loss_on_views(clf, views, label);
    let n = clf.num_params();
    let coords: Vec<usize> = if n <= MIN_COORDS {
        (0..n).collect()
    } else {
        let mut v = sample(rng, n, MIN_COORDS).into_vec();
        v.sort_unstable();
        v
    };
    let mut probe = clf.clone();
    let mut max_rel: f64 = 0.0;
    for &i in &coords {
        let p = clf.params()[i];
        probe.params_mut()[i] = p + STEP;
        let (up, _) = loss_on_views(&probe, views, label);
        probe.params_mut()[i] = p - STEP;
        let (down, _) = loss_on_views(&probe, views, label);
        probe.params_mut()[i] = p;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[i] * grad_scale;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    GradCheckReport {
        coordinates: coords.len(),
        max_rel_error: max_rel,
    }
}

/// Gradient check of the full marginalized loss on one sample. The styles
/// and mixing rates are drawn once and held fixed for every perturbation.
pub fn grad_check<R: Rng + ?Sized>(
    clf: &Classifier,
    sample: (&ImagePatch, usize),
    pool: &StylePool,
    cfg: &CpitConfig,
    rng: &mut R,
) -> Result<GradCheckReport> {
    cfg.validate()?;
    let views = build_views(clf, &PreparedQuery::new(sample.0), pool, cfg, rng)?;
    Ok(grad_check_views(clf, &views, sample.1, 1.0, rng))
}
