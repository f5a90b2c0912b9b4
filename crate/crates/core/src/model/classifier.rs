use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BilinearSampler, ImagePatch};

/// Shallow classifier over a bilinearly downsampled patch.
///
/// `hidden_dim == 0` is multinomial logistic regression; otherwise one tanh
/// hidden layer. Parameters live in one flat vector:
///
/// * linear: `W[K][D]`, `b[K]`
/// * hidden: `W1[H][D]`, `b1[H]`, `W2[K][H]`, `b2[K]`
///
/// where `D = input_side² · 3`. Inputs are centred at [`INPUT_CENTER`]
/// before the first layer, which keeps plain gradient descent stable on
/// all-positive pixel values without changing what the model can express.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClassifierRaw")]
pub struct Classifier {
    input_side: usize,
    hidden_dim: usize,
    num_classes: usize,
    params: Vec<f64>,
}

#[derive(Deserialize)]
struct ClassifierRaw {
    input_side: usize,
    hidden_dim: usize,
    num_classes: usize,
    params: Vec<f64>,
}

impl TryFrom<ClassifierRaw> for Classifier {
    type Error = Error;

    fn try_from(raw: ClassifierRaw) -> Result<Self> {
        let mut clf = Classifier::zeros(raw.input_side, raw.hidden_dim, raw.num_classes)?;
        if raw.params.len() != clf.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                clf.params.len(),
                raw.params.len()
            )));
        }
        if raw.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        clf.params = raw.params;
        Ok(clf)
    }
}

/// Subtracted from every input value before the first layer.
pub const INPUT_CENTER: f64 = 0.5;

fn centered(features: &[f64]) -> Vec<f64> {
    features.iter().map(|v| v - INPUT_CENTER).collect()
}

fn param_count(d: usize, h: usize, k: usize) -> usize {
    if h == 0 {
        k * d + k
    } else {
        h * d + h + k * h + k
    }
}

impl Classifier {
    pub fn zeros(input_side: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        if input_side == 0 {
            return Err(Error::InvalidParameter("input_side must be >= 1".into()));
        }
        if num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be >= 1".into()));
        }
        let d = input_side * input_side * 3;
        Ok(Self {
            input_side,
            hidden_dim,
            num_classes,
            params: vec![0.0; param_count(d, hidden_dim, num_classes)],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn random<R: Rng + ?Sized>(
        input_side: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut clf = Self::zeros(input_side, hidden_dim, num_classes)?;
        let d = clf.input_dim();
        let (k, h) = (num_classes, hidden_dim);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, params: &mut [f64]| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        if h == 0 {
            fill(0..k * d, d, &mut clf.params);
        } else {
            fill(0..h * d, d, &mut clf.params);
            let w2 = h * d + h;
            fill(w2..w2 + k * h, h, &mut clf.params);
        }
        Ok(clf)
    }

    pub fn input_side(&self) -> usize {
        self.input_side
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_side * self.input_side * 3
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// The resampling from a `height × width` image to the input grid.
    pub fn sampler(&self, height: usize, width: usize) -> BilinearSampler {
        BilinearSampler::new(height, width, self.input_side, self.input_side)
    }

    /// Downsampled, flattened input vector.
    pub fn features(&self, img: &ImagePatch) -> Vec<f64> {
        self.sampler(img.height(), img.width()).sample(img.data())
    }

    pub fn forward(&self, img: &ImagePatch) -> Vec<f64> {
        self.logits(&self.features(img))
    }

    fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        let n_in = x.len();
        b.iter()
            .enumerate()
            .map(|(o, bias)| {
                let row = &w[o * n_in..(o + 1) * n_in];
                bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn hidden(&self, features: &[f64]) -> Vec<f64> {
        let (d, h) = (self.input_dim(), self.hidden_dim);
        Self::affine(
            &self.params[..h * d],
            &self.params[h * d..h * d + h],
            features,
        )
        .into_iter()
        .map(f64::tanh)
        .collect()
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        debug_assert_eq!(features.len(), self.input_dim());
        let features = &centered(features);
        let (d, h, k) = (self.input_dim(), self.hidden_dim, self.num_classes);
        if h == 0 {
            Self::affine(&self.params[..k * d], &self.params[k * d..], features)
        } else {
            let a = self.hidden(features);
            let w2 = h * d + h;
            Self::affine(&self.params[w2..w2 + k * h], &self.params[w2 + k * h..], &a)
        }
    }

    /// Add `weight · (∂logits/∂θ)ᵀ · dlogits` into `grad`.
    pub fn accumulate_grad(
        &self,
        features: &[f64],
        dlogits: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) {
        let features = &centered(features);
        let (d, h, k) = (self.input_dim(), self.hidden_dim, self.num_classes);
        let g: Vec<f64> = dlogits.iter().map(|v| v * weight).collect();
        let outer = |grad: &mut [f64], rows: &[f64], cols: &[f64]| {
            for (r, gr) in rows.iter().enumerate() {
                if *gr == 0.0 {
                    continue;
                }
                for (slot, c) in grad[r * cols.len()..(r + 1) * cols.len()]
                    .iter_mut()
                    .zip(cols)
                {
                    *slot += gr * c;
                }
            }
        };
        if h == 0 {
            outer(&mut grad[..k * d], &g, features);
            for (slot, gv) in grad[k * d..].iter_mut().zip(&g) {
                *slot += gv;
            }
        } else {
            let a = self.hidden(features);
            let w2 = h * d + h;
            outer(&mut grad[w2..w2 + k * h], &g, &a);
            for (slot, gv) in grad[w2 + k * h..].iter_mut().zip(&g) {
                *slot += gv;
            }
            let dz: Vec<f64> = (0..h)
                .map(|j| {
                    let back: f64 = (0..k).map(|o| self.params[w2 + o * h + j] * g[o]).sum();
                    back * (1.0 - a[j] * a[j])
                })
                .collect();
            outer(&mut grad[..h * d], &dz, features);
            for (slot, v) in grad[h * d..h * d + h].iter_mut().zip(&dz) {
                *slot += v;
            }
        }
    }
}
