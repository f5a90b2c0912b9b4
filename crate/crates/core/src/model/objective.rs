//! Marginalized scores over interventional views and the training loss.
//!
//! For a query `x` and `N` sampled styles the mixed score is
//!
//! ```text
//! β·F(x) + (1-β)/N · Σ_i [ γ·F(T^F_i(x)) + (1-γ)·F(T^S_i(x)) ]
//! ```
//!
//! i.e. a convex combination of `2N + 1` evaluations of `F`. The transforms
//! have no parameters, so gradients flow through each `F(·)` term with its
//! weight.

use rand::Rng;

use crate::error::Result;
use crate::fourier::sample_lambda;
use crate::image::ImagePatch;

use super::classifier::Classifier;
use super::cpit::{PreparedQuery, StylePool};
use super::{CpitConfig, MixSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    Original,
    Fourier,
    Stain,
}

#[derive(Debug, Clone)]
pub struct WeightedView {
    pub kind: ViewKind,
    pub weight: f64,
    pub features: Vec<f64>,
}

/// Feature vectors of every view of one query, with their convex weights.
#[derive(Debug, Clone)]
pub struct ViewSet {
    pub views: Vec<WeightedView>,
    pub mix_space: MixSpace,
}

impl ViewSet {
    /// Only the untransformed input, weight 1.
    pub fn plain(features: Vec<f64>) -> Self {
        Self {
            views: vec![WeightedView {
                kind: ViewKind::Original,
                weight: 1.0,
                features,
            }],
            mix_space: MixSpace::Logits,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.views.iter().map(|v| v.weight).sum()
    }
}

/// Draw `N` styles and `N` mixing rates (style, then λ, per draw) and build
/// the weighted views. Views whose weight is zero are not computed.
pub fn build_views<R: Rng + ?Sized>(
    clf: &Classifier,
    query: &PreparedQuery,
    pool: &StylePool,
    cfg: &CpitConfig,
    rng: &mut R,
) -> Result<ViewSet> {
    let n = cfg.n_styles as f64;
    let w_fourier = (1.0 - cfg.beta) * cfg.gamma / n;
    let w_stain = (1.0 - cfg.beta) * (1.0 - cfg.gamma) / n;
    let (h, w) = query.image().dims();
    let sampler = clf.sampler(h, w);
    let mut views = Vec::with_capacity(2 * cfg.n_styles + 1);
    views.push(WeightedView {
        kind: ViewKind::Original,
        weight: cfg.beta,
        features: sampler.sample(query.image().data()),
    });
    for _ in 0..cfg.n_styles {
        let style = pool.sample(rng);
        let lambda = sample_lambda(cfg.eta, rng);
        if w_fourier > 0.0 {
            views.push(WeightedView {
                kind: ViewKind::Fourier,
                weight: w_fourier,
                features: query.fourier_features(style, lambda, &sampler)?,
            });
        }
        if w_stain > 0.0 {
            views.push(WeightedView {
                kind: ViewKind::Stain,
                weight: w_stain,
                features: query.stain_features(style, &sampler)?,
            });
        }
    }
    Ok(ViewSet {
        views,
        mix_space: cfg.mix_space,
    })
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Mixed scores of a view set. In logit space this is the weighted sum of
/// logits; in probability space it is the log of the weighted sum of
/// softmax outputs, so `softmax` of the result is the mixed distribution.
pub fn mixed_scores(clf: &Classifier, views: &ViewSet) -> Vec<f64> {
    let k = clf.num_classes();
    let mut acc = vec![0.0; k];
    for v in &views.views {
        let z = clf.logits(&v.features);
        let terms = match views.mix_space {
            MixSpace::Logits => z,
            MixSpace::Probs => softmax(&z),
        };
        for (a, t) in acc.iter_mut().zip(terms) {
            *a += v.weight * t;
        }
    }
    match views.mix_space {
        MixSpace::Logits => acc,
        MixSpace::Probs => acc.into_iter().map(f64::ln).collect(),
    }
}

pub fn mixed_logits<R: Rng + ?Sized>(
    clf: &Classifier,
    x: &ImagePatch,
    pool: &StylePool,
    cfg: &CpitConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let views = build_views(clf, &PreparedQuery::new(x), pool, cfg, rng)?;
    Ok(mixed_scores(clf, &views))
}

/// Cross-entropy of the mixed prediction and its parameter gradient.
pub fn loss_on_views(clf: &Classifier, views: &ViewSet, label: usize) -> (f64, Vec<f64>) {
    let k = clf.num_classes();
    let mut grad = vec![0.0; clf.num_params()];
    let logits: Vec<Vec<f64>> = views
        .views
        .iter()
        .map(|v| clf.logits(&v.features))
        .collect();
    match views.mix_space {
        MixSpace::Logits => {
            let mut mixed = vec![0.0; k];
            for (v, z) in views.views.iter().zip(&logits) {
                for (m, zi) in mixed.iter_mut().zip(z) {
                    *m += v.weight * zi;
                }
            }
            let loss = log_sum_exp(&mixed) - mixed[label];
            let mut dz = softmax(&mixed);
            dz[label] -= 1.0;
            for v in &views.views {
                clf.accumulate_grad(&v.features, &dz, v.weight, &mut grad);
            }
            (loss, grad)
        }
        MixSpace::Probs => {
            let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
            let p_label: f64 = views
                .views
                .iter()
                .zip(&probs)
                .map(|(v, p)| v.weight * p[label])
                .sum();
            let loss = -p_label.ln();
            for (v, s) in views.views.iter().zip(&probs) {
                // d(-ln p)/dz_v = -(w_v / p) · s_y · (e_y - s_v)
                let scale = -s[label] / p_label;
                let dz: Vec<f64> = (0..k)
                    .map(|j| scale * (if j == label { 1.0 } else { 0.0 } - s[j]))
                    .collect();
                clf.accumulate_grad(&v.features, &dz, v.weight, &mut grad);
            }
            (loss, grad)
        }
    }
}

pub fn loss<R: Rng + ?Sized>(
    clf: &Classifier,
    x: &ImagePatch,
    label: usize,
    pool: &StylePool,
    cfg: &CpitConfig,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let views = build_views(clf, &PreparedQuery::new(x), pool, cfg, rng)?;
    Ok(loss_on_views(clf, &views, label))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

impl Prediction {
    fn from_scores(scores: &[f64]) -> Self {
        let probs = softmax(scores);
        Self {
            label: argmax(&probs),
            probs,
        }
    }
}

/// Prediction marginalized over sampled styles.
pub fn predict<R: Rng + ?Sized>(
    clf: &Classifier,
    x: &ImagePatch,
    pool: &StylePool,
    cfg: &CpitConfig,
    rng: &mut R,
) -> Result<Prediction> {
    Ok(Prediction::from_scores(&mixed_logits(
        clf, x, pool, cfg, rng,
    )?))
}

/// `softmax(F(x))` with no marginalization.
pub fn predict_plain(clf: &Classifier, x: &ImagePatch) -> Prediction {
    Prediction::from_scores(&clf.forward(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cpit::{cpit_transform, StylePool};
    use crate::rng::seeded;

    fn random_patch(rng: &mut impl Rng, side: usize) -> ImagePatch {
        ImagePatch::from_fn(side, side, |_, _| [(); 3].map(|_| rng.gen_range(0.05..1.0))).unwrap()
    }

    fn setup(seed: u64, hidden: usize) -> (Classifier, ImagePatch, StylePool) {
        let mut rng = seeded(seed);
        let clf = Classifier::random(4, hidden, 3, &mut rng).unwrap();
        let x = random_patch(&mut rng, 8);
        let pool =
            StylePool::new(8, 8, (0..6).map(|i| (random_patch(&mut rng, 8), i % 3))).unwrap();
        (clf, x, pool)
    }

    fn cfg(beta: f64, gamma: f64, n: usize) -> CpitConfig {
        CpitConfig {
            beta,
            gamma,
            n_styles: n,
            ..CpitConfig::default()
        }
    }

    #[test]
    fn gamma_one_single_style_algebra() {
        let (clf, x, pool) = setup(1, 0);
        let c = cfg(0.3, 1.0, 1);
        let mut rng = seeded(9);
        let got = mixed_logits(&clf, &x, &pool, &c, &mut rng).unwrap();
        // Replay the same draws by hand.
        let mut rng = seeded(9);
        let style = pool.sample(&mut rng);
        let lambda = sample_lambda(c.eta, &mut rng);
        let (fv, _) = cpit_transform(&x, style, lambda).unwrap();
        let (fx, ff) = (clf.forward(&x), clf.forward(&fv));
        for j in 0..3 {
            assert!((got[j] - (0.3 * fx[j] + 0.7 * ff[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn self_pool_collapses_to_plain_forward() {
        let (clf, x, _) = setup(2, 4);
        let pool = StylePool::new(8, 8, vec![(x.clone(), 0), (x.clone(), 1)]).unwrap();
        let fx = clf.forward(&x);
        for (beta, gamma, n) in [(0.0, 0.25, 1), (0.5, 0.0, 3), (0.9, 1.0, 8)] {
            let mut rng = seeded(3);
            let got = mixed_logits(&clf, &x, &pool, &cfg(beta, gamma, n), &mut rng).unwrap();
            for j in 0..3 {
                assert!((got[j] - fx[j]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn mean_pixel_stub_by_hand() {
        // F = input_side 1 linear map on the centred centre sample of a
        // constant image: logits = [t, -t] with t = r + g + b - 1.5.
        let mut clf = Classifier::zeros(1, 0, 2).unwrap();
        clf.params_mut()
            .copy_from_slice(&[1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 0.0, 0.0]);
        let x = ImagePatch::filled(4, 4, [0.2, 0.3, 0.5]).unwrap();
        let style = ImagePatch::filled(4, 4, [0.6, 0.6, 0.6]).unwrap();
        let pool = StylePool::new(4, 4, vec![(style, 0)]).unwrap();
        let c = CpitConfig {
            beta: 0.5,
            gamma: 1.0,
            n_styles: 1,
            eta: 0.0,
            ..CpitConfig::default()
        };
        // eta = 0 => λ = 0 => the Fourier view is x itself, so the mix is F(x).
        let got = mixed_logits(&clf, &x, &pool, &c, &mut seeded(0)).unwrap();
        assert!((got[0] + 0.5).abs() < 1e-12 && (got[1] - 0.5).abs() < 1e-12);
        // gamma = 0: stain view of a constant image lands on the style's
        // constant colour => logits [0.3, -0.3]; mix = 0.5·(-0.5) + 0.5·0.3 = -0.1
        let c0 = CpitConfig { gamma: 0.0, ..c };
        let got = mixed_logits(&clf, &x, &pool, &c0, &mut seeded(0)).unwrap();
        assert!((got[0] + 0.1).abs() < 1e-6, "{got:?}");
    }

    #[test]
    fn mixed_logits_inside_convex_hull() {
        let (clf, x, pool) = setup(4, 3);
        let c = cfg(0.2, 0.25, 4);
        let views = build_views(&clf, &PreparedQuery::new(&x), &pool, &c, &mut seeded(5)).unwrap();
        assert!((views.total_weight() - 1.0).abs() < 1e-12);
        let mixed = mixed_scores(&clf, &views);
        for j in 0..3 {
            let vals: Vec<f64> = views
                .views
                .iter()
                .map(|v| clf.logits(&v.features)[j])
                .collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(mixed[j] >= lo - 1e-12 && mixed[j] <= hi + 1e-12);
        }
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let clf = Classifier::zeros(2, 0, 5).unwrap();
        let x = ImagePatch::filled(4, 4, [0.5; 3]).unwrap();
        let (l, _) = loss_on_views(&clf, &ViewSet::plain(clf.features(&x)), 2);
        assert!((l - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_linear_gradient_closed_form() {
        // At zero weights every view has softmax = 1/K, so the gradient wrt W
        // is (1/K - onehot) ⊗ Σ_v w_v (f_v - c) with c the input centre.
        let (_, x, pool) = setup(6, 0);
        let clf = Classifier::zeros(4, 0, 3).unwrap();
        let c = cfg(0.2, 0.25, 2);
        let views = build_views(&clf, &PreparedQuery::new(&x), &pool, &c, &mut seeded(7)).unwrap();
        let weights: Vec<f64> = views.views.iter().map(|v| v.weight).collect();
        assert!((weights[0] - 0.2).abs() < 1e-15);
        assert!((weights[1] - 0.8 * 0.25 / 2.0).abs() < 1e-15);
        assert!((weights[2] - 0.8 * 0.75 / 2.0).abs() < 1e-15);
        let (_, grad) = loss_on_views(&clf, &views, 1);
        let d = clf.input_dim();
        let mut avg = vec![0.0; d];
        for v in &views.views {
            for (a, f) in avg.iter_mut().zip(&v.features) {
                *a += v.weight * (f - crate::model::INPUT_CENTER);
            }
        }
        for k in 0..3 {
            let coef = 1.0 / 3.0 - if k == 1 { 1.0 } else { 0.0 };
            for i in 0..d {
                assert!((grad[k * d + i] - coef * avg[i]).abs() < 1e-14);
            }
            assert!((grad[3 * d + k] - coef).abs() < 1e-14);
        }
    }

    #[test]
    fn probability_space_mixing() {
        let (clf, x, pool) = setup(8, 2);
        let c = CpitConfig {
            mix_space: MixSpace::Probs,
            ..cfg(0.3, 0.5, 3)
        };
        let views = build_views(&clf, &PreparedQuery::new(&x), &pool, &c, &mut seeded(1)).unwrap();
        let mut expect = vec![0.0; 3];
        for v in &views.views {
            for (e, p) in expect.iter_mut().zip(softmax(&clf.logits(&v.features))) {
                *e += v.weight * p;
            }
        }
        let got = softmax(&mixed_scores(&clf, &views));
        for j in 0..3 {
            assert!((got[j] - expect[j]).abs() < 1e-12);
        }
        let (l, _) = loss_on_views(&clf, &views, 0);
        assert!((l + expect[0].ln()).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
        let clf = Classifier::zeros(2, 0, 2).unwrap();
        let p = predict_plain(&clf, &ImagePatch::filled(2, 2, [0.1; 3]).unwrap());
        assert_eq!(p.label, 0);
        assert_eq!(p.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn heavy_beta_tracks_plain_prediction() {
        let (clf, x, pool) = setup(10, 0);
        let c = cfg(0.999_999, 0.25, 2);
        let p = predict(&clf, &x, &pool, &c, &mut seeded(2)).unwrap();
        let q = predict_plain(&clf, &x);
        assert_eq!(p.label, q.label);
        for j in 0..3 {
            assert!((p.probs[j] - q.probs[j]).abs() < 1e-5);
        }
    }

    #[test]
    fn predictions_are_seed_deterministic() {
        let (clf, x, pool) = setup(11, 3);
        let c = cfg(0.2, 0.25, 4);
        let a = predict(&clf, &x, &pool, &c, &mut seeded(4)).unwrap();
        let b = predict(&clf, &x, &pool, &c, &mut seeded(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_shrinks_like_one_over_n() {
        let (clf, x, pool) = setup(12, 0);
        let var_at = |n: usize| {
            let c = cfg(0.2, 0.25, n);
            let vals: Vec<f64> = (0..300)
                .map(|s| mixed_logits(&clf, &x, &pool, &c, &mut seeded(1000 + s)).unwrap()[0])
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
        };
        let (v1, v4, v16) = (var_at(1), var_at(4), var_at(16));
        // Expected ratios 4 each; allow sampling noise of 300 draws.
        assert!(v1 / v4 > 2.5 && v1 / v4 < 6.5, "{v1} {v4}");
        assert!(v4 / v16 > 2.5 && v4 / v16 < 6.5, "{v4} {v16}");
    }

    #[test]
    fn duplicated_sample_doubles_gradient() {
        let (clf, x, pool) = setup(13, 2);
        let c = cfg(0.2, 0.25, 2);
        let views = build_views(&clf, &PreparedQuery::new(&x), &pool, &c, &mut seeded(3)).unwrap();
        let (_, g) = loss_on_views(&clf, &views, 2);
        let mut twice = g.clone();
        for (t, v) in twice.iter_mut().zip(&loss_on_views(&clf, &views, 2).1) {
            *t += v;
        }
        for (a, b) in twice.iter().zip(&g) {
            assert_eq!(*a, 2.0 * b);
        }
    }
}
