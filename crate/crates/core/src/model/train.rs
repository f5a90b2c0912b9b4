use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;

use super::classifier::Classifier;
use super::cpit::{PreparedQuery, StylePool};
use super::objective::{build_views, loss_on_views, ViewSet};
use super::CpitConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.05,
            batch_size: 32,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lr must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// What each training sample is scored with.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Cross-entropy on `F(x)` alone.
    Plain,
    /// Cross-entropy on the marginalized mixture over sampled styles.
    Cpit {
        pool: &'a StylePool,
        cfg: &'a CpitConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

/// Mini-batch gradient descent with a fixed learning rate.
///
/// `on_epoch(epoch, clf, mean_loss)` runs after every epoch; it can be used
/// for validation-based model selection.
pub fn train<R, F>(
    clf: &mut Classifier,
    data: &[(&ImagePatch, usize)],
    objective: Objective<'_>,
    opts: &TrainOptions,
    rng: &mut R,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &Classifier, f64) -> Result<()>,
{
    opts.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= clf.num_classes()) {
        return Err(Error::InvalidParameter(format!(
            "label {y} out of range for {} classes",
            clf.num_classes()
        )));
    }
    if let Objective::Cpit { cfg, .. } = objective {
        cfg.validate()?;
    }
    let plain_features: Vec<Vec<f64>> = match objective {
        Objective::Plain => data.iter().map(|(x, _)| clf.features(x)).collect(),
        Objective::Cpit { .. } => Vec::new(),
    };

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(opts.batch_size).enumerate() {
            let mut grad = vec![0.0; clf.num_params()];
            let mut batch_loss = 0.0;
            for &i in idx {
                let (x, y) = data[i];
                let views = match objective {
                    Objective::Plain => ViewSet::plain(plain_features[i].clone()),
                    Objective::Cpit { pool, cfg } => {
                        build_views(clf, &PreparedQuery::new(x), pool, cfg, rng)?
                    }
                };
                let (l, g) = loss_on_views(clf, &views, y);
                batch_loss += l;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            if !batch_loss.is_finite() {
                let max_param = clf.params().iter().fold(0.0f64, |m, p| m.max(p.abs()));
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch,
                    loss: batch_loss,
                    max_param,
                });
            }
            total += batch_loss;
            let step = opts.lr / idx.len() as f64;
            if step != 0.0 {
                for (p, g) in clf.params_mut().iter_mut().zip(&grad) {
                    *p -= step * g;
                }
            }
        }
        let mean = total / data.len() as f64;
        losses.push(mean);
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        on_epoch(epoch, clf, mean)?;
    }
    Ok(TrainReport { losses })
}
