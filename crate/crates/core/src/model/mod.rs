//! Classifier, interventional views and the marginalized loss.

mod checkpoint;
mod classifier;
mod cpit;
mod gradcheck;
mod objective;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Method, CHECKPOINT_VERSION};
pub use classifier::{Classifier, INPUT_CENTER};
pub use cpit::{cpit_transform, PreparedQuery, StyleEntry, StylePool};
pub use gradcheck::{grad_check, grad_check_views, GradCheckReport, GRAD_CHECK_TOL};
pub use objective::{
    argmax, build_views, loss, loss_on_views, mixed_logits, mixed_scores, predict, predict_plain,
    softmax, Prediction, ViewKind, ViewSet, WeightedView,
};
pub use train::{train, Objective, TrainOptions, TrainReport};

/// Where the `2N + 1` view outputs are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixSpace {
    #[default]
    Logits,
    Probs,
}

impl std::str::FromStr for MixSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logits" => Ok(Self::Logits),
            "probs" => Ok(Self::Probs),
            other => Err(Error::InvalidParameter(format!(
                "mix_space must be logits or probs, got {other:?}"
            ))),
        }
    }
}

/// Hyperparameters of the interventional mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CpitConfig {
    /// Upper bound of the Fourier mixing rate; λ ~ U(0, η).
    pub eta: f64,
    /// Weight of the Fourier view against the stain view.
    pub gamma: f64,
    /// Weight of the untransformed input, in `[0, 1)`.
    pub beta: f64,
    /// Number of sampled styles per query.
    pub n_styles: usize,
    pub seed: u64,
    pub mix_space: MixSpace,
}

impl Default for CpitConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            gamma: 0.25,
            beta: 0.2,
            n_styles: 4,
            seed: 0,
            mix_space: MixSpace::Logits,
        }
    }
}

impl CpitConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be in [0, 1], got {v}"
                )))
            }
        };
        unit("eta", self.eta)?;
        unit("gamma", self.gamma)?;
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in [0, 1), got {}",
                self.beta
            )));
        }
        if self.n_styles == 0 {
            return Err(Error::InvalidParameter("n_styles must be >= 1".into()));
        }
        Ok(())
    }
}
