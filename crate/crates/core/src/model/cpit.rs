//! Style pool and the two interventional transforms applied per style.

use std::cell::OnceCell;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fourier::{amplitudes, MixBasis};
use crate::image::{
    lab_to_rgb, lab_to_rgb_pixel_unclamped, rgb_to_lab, BilinearSampler, ImagePatch, LabImage,
};
use crate::stain::{reinhard_transfer, LabStats, ReinhardMap};

/// One style instance `x'`: the image (resampled to the query size), its
/// lαβ statistics and its Fourier amplitude.
#[derive(Debug, Clone)]
pub struct StyleEntry {
    image: ImagePatch,
    stats: LabStats,
    amplitude: [Vec<f64>; 3],
    domain: usize,
}

impl StyleEntry {
    pub fn new(image: ImagePatch, domain: usize) -> Self {
        let lab = rgb_to_lab(&image);
        Self {
            stats: LabStats::of_lab(&lab),
            amplitude: amplitudes(&image),
            image,
            domain,
        }
    }

    pub fn image(&self) -> &ImagePatch {
        &self.image
    }

    pub fn stats(&self) -> &LabStats {
        &self.stats
    }

    pub fn amplitude(&self) -> &[Vec<f64>; 3] {
        &self.amplitude
    }

    pub fn domain(&self) -> usize {
        self.domain
    }
}

/// Style instances drawn from the training data, sampled uniformly over
/// domains and then uniformly within the chosen domain.
#[derive(Debug, Clone)]
pub struct StylePool {
    height: usize,
    width: usize,
    entries: Vec<StyleEntry>,
    by_domain: Vec<(usize, Vec<usize>)>,
}

impl StylePool {
    /// Build a pool for queries of size `height × width`; every style image
    /// is bilinearly resampled to that size.
    pub fn new<I>(height: usize, width: usize, styles: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ImagePatch, usize)>,
    {
        let mut entries = Vec::new();
        for (img, domain) in styles {
            entries.push(StyleEntry::new(img.resized(height, width)?, domain));
        }
        if entries.is_empty() {
            return Err(Error::InvalidParameter("style pool is empty".into()));
        }
        let mut by_domain: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            match by_domain.iter_mut().find(|(d, _)| *d == e.domain) {
                Some((_, v)) => v.push(i),
                None => by_domain.push((e.domain, vec![i])),
            }
        }
        by_domain.sort_by_key(|(d, _)| *d);
        Ok(Self {
            height,
            width,
            entries,
            by_domain,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn entries(&self) -> &[StyleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> Vec<usize> {
        self.by_domain.iter().map(|(d, _)| *d).collect()
    }

    /// Error unless every listed domain contributes at least one style.
    pub fn require_domains(&self, domains: &[usize]) -> Result<()> {
        let have = self.domains();
        match domains.iter().find(|d| !have.contains(d)) {
            Some(d) => Err(Error::InvalidParameter(format!(
                "style pool has no entry from domain {d}"
            ))),
            None => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &StyleEntry {
        let (_, members) = &self.by_domain[rng.gen_range(0..self.by_domain.len())];
        &self.entries[members[rng.gen_range(0..members.len())]]
    }
}

/// A query image decomposed once for repeated transformation.
/// Each decomposition is computed on first use.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    image: ImagePatch,
    basis: OnceCell<MixBasis>,
    lab: OnceCell<(LabImage, LabStats)>,
}

impl PreparedQuery {
    pub fn new(image: &ImagePatch) -> Self {
        Self {
            image: image.clone(),
            basis: OnceCell::new(),
            lab: OnceCell::new(),
        }
    }

    fn basis(&self) -> &MixBasis {
        self.basis.get_or_init(|| MixBasis::new(&self.image))
    }

    fn lab(&self) -> (&LabImage, &LabStats) {
        let (lab, stats) = self.lab.get_or_init(|| {
            let lab = rgb_to_lab(&self.image);
            let stats = LabStats::of_lab(&lab);
            (lab, stats)
        });
        (lab, stats)
    }

    pub fn image(&self) -> &ImagePatch {
        &self.image
    }

    fn check(&self, style: &StyleEntry) -> Result<()> {
        if self.image.dims() != style.image.dims() {
            return Err(Error::DimensionMismatch(format!(
                "query {:?} vs style {:?}",
                self.image.dims(),
                style.image.dims()
            )));
        }
        Ok(())
    }

    /// Amplitude of the query mixed towards the style's by `lambda`,
    /// query phase kept.
    pub fn fourier_view(&self, style: &StyleEntry, lambda: f64) -> Result<ImagePatch> {
        self.check(style)?;
        self.basis().mix(&style.amplitude, lambda)
    }

    /// Query recoloured onto the style's lαβ statistics.
    pub fn stain_view(&self, style: &StyleEntry) -> Result<ImagePatch> {
        self.check(style)?;
        let (lab, stats) = self.lab();
        Ok(lab_to_rgb(&reinhard_transfer(lab, stats, &style.stats)))
    }

    /// `sampler.sample(fourier_view(..))`, evaluated only where sampled.
    pub fn fourier_features(
        &self,
        style: &StyleEntry,
        lambda: f64,
        sampler: &BilinearSampler,
    ) -> Result<Vec<f64>> {
        self.check(style)?;
        self.basis().mix_sampled(&style.amplitude, lambda, sampler)
    }

    /// `sampler.sample(stain_view(..))`, evaluated only where sampled.
    pub fn stain_features(
        &self,
        style: &StyleEntry,
        sampler: &BilinearSampler,
    ) -> Result<Vec<f64>> {
        self.check(style)?;
        if sampler.input_dims() != self.image.dims() {
            return Err(Error::DimensionMismatch(format!(
                "sampler reads {:?}, query is {:?}",
                sampler.input_dims(),
                self.image.dims()
            )));
        }
        let (lab, stats) = self.lab();
        let map = ReinhardMap::new(stats, &style.stats);
        let (w, lab) = (self.image.width(), lab.data());
        Ok(sampler.sample_with(|r, c| {
            let i = (r * w + c) * 3;
            lab_to_rgb_pixel_unclamped(map.apply([lab[i], lab[i + 1], lab[i + 2]]))
                .map(|v| v.clamp(0.0, 1.0))
        }))
    }
}

/// `(T^F_{x'}(x), T^S_{x'}(x))` for one style instance.
pub fn cpit_transform(
    x: &ImagePatch,
    style: &StyleEntry,
    lambda: f64,
) -> Result<(ImagePatch, ImagePatch)> {
    let q = PreparedQuery::new(x);
    Ok((q.fourier_view(style, lambda)?, q.stain_view(style)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::fourier_mix;
    use crate::rng::seeded;
    use crate::stain::reinhard_normalize;

    fn random_patch(rng: &mut impl Rng, side: usize) -> ImagePatch {
        ImagePatch::from_fn(side, side, |_, _| [(); 3].map(|_| rng.gen_range(0.05..1.0))).unwrap()
    }

    #[test]
    fn self_style_leaves_image_unchanged() {
        let mut rng = seeded(1);
        let x = random_patch(&mut rng, 12);
        let entry = StyleEntry::new(x.clone(), 0);
        for lambda in [0.0, 0.35, 1.0] {
            let (f, s) = cpit_transform(&x, &entry, lambda).unwrap();
            assert!(f.max_abs_diff(&x) < 1e-4);
            assert!(s.max_abs_diff(&x) < 1e-4);
        }
    }

    #[test]
    fn zero_lambda_fourier_view_is_input() {
        let mut rng = seeded(2);
        let x = random_patch(&mut rng, 10);
        let entry = StyleEntry::new(random_patch(&mut rng, 10), 1);
        let (f, _) = cpit_transform(&x, &entry, 0.0).unwrap();
        assert!(f.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn views_match_standalone_transforms() {
        let mut rng = seeded(3);
        let x = random_patch(&mut rng, 9);
        let style = random_patch(&mut rng, 9);
        let entry = StyleEntry::new(style.clone(), 0);
        let (f, s) = cpit_transform(&x, &entry, 0.6).unwrap();
        assert!(f.max_abs_diff(&fourier_mix(&x, &style, 0.6).unwrap()) < 1e-12);
        assert!(s.max_abs_diff(&reinhard_normalize(&x, entry.stats())) < 1e-12);
    }

    #[test]
    fn sampled_views_match_full_views() {
        let mut rng = seeded(8);
        for (h, w, side) in [(16, 16, 4), (12, 10, 5), (9, 9, 9), (8, 8, 16)] {
            let x =
                ImagePatch::from_fn(h, w, |_, _| [(); 3].map(|_| rng.gen_range(0.0..1.0))).unwrap();
            let style =
                ImagePatch::from_fn(h, w, |_, _| [(); 3].map(|_| rng.gen_range(0.0..1.0))).unwrap();
            let entry = StyleEntry::new(style, 0);
            let q = PreparedQuery::new(&x);
            let sampler = BilinearSampler::new(h, w, side, side);
            for lambda in [0.0, 0.3, 1.0] {
                let full = sampler.sample(q.fourier_view(&entry, lambda).unwrap().data());
                let fast = q.fourier_features(&entry, lambda, &sampler).unwrap();
                let err = full
                    .iter()
                    .zip(&fast)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-12, "{h}x{w}->{side}: {err}");
            }
            let full = sampler.sample(q.stain_view(&entry).unwrap().data());
            assert_eq!(full, q.stain_features(&entry, &sampler).unwrap());
        }
    }

    #[test]
    fn views_are_reproducible() {
        let build = || {
            let mut rng = seeded(4);
            let x = random_patch(&mut rng, 8);
            let pool =
                StylePool::new(8, 8, (0..6).map(|i| (random_patch(&mut rng, 8), i % 2))).unwrap();
            let entry = pool.sample(&mut rng).clone();
            cpit_transform(&x, &entry, 0.4).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn pool_resamples_and_covers_domains() {
        let mut rng = seeded(5);
        let pool = StylePool::new(
            8,
            8,
            vec![
                (random_patch(&mut rng, 16), 2),
                (random_patch(&mut rng, 5), 0),
            ],
        )
        .unwrap();
        assert!(pool.entries().iter().all(|e| e.image().dims() == (8, 8)));
        assert_eq!(pool.domains(), vec![0, 2]);
        assert!(pool.require_domains(&[0, 2]).is_ok());
        assert!(pool.require_domains(&[1]).is_err());
        assert!(StylePool::new(8, 8, Vec::new()).is_err());
    }

    #[test]
    fn pool_sampling_is_uniform_over_domains() {
        let mut rng = seeded(6);
        // domain 0 has 9 entries, domain 1 has 1
        let styles: Vec<_> = (0..10)
            .map(|i| (random_patch(&mut rng, 4), usize::from(i == 9)))
            .collect();
        let pool = StylePool::new(4, 4, styles).unwrap();
        let n = 20_000;
        let ones = (0..n)
            .filter(|_| pool.sample(&mut rng).domain() == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn mismatched_query_is_rejected() {
        let mut rng = seeded(7);
        let entry = StyleEntry::new(random_patch(&mut rng, 6), 0);
        let x = random_patch(&mut rng, 7);
        assert!(matches!(
            cpit_transform(&x, &entry, 0.5),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
