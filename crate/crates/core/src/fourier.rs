//! Amplitude/phase decomposition of image channels and amplitude mixing.
//!
//! Spectra follow `F(x) = A(x) · e^{-jP(x)}`: the stored phase is the
//! negated argument of the DFT coefficient, normalized into `(-π, π]`. The
//! forward transform is unnormalized; the inverse carries `1/(HW)`.
//!
//! The forward transform of a real image is projected onto the Hermitian
//! subspace (`F(k) = conj F(-k)` exactly), so amplitudes are exactly
//! symmetric and phases exactly antisymmetric. Mixing amplitudes then never
//! breaks realness of the inverse, even at frequencies where the content
//! image has (numerically) zero energy.

use std::cell::RefCell;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{BilinearSampler, ImagePatch};

pub type C64 = Complex<f64>;

/// Largest tolerated imaginary residue after the inverse transform.
pub const REAL_TOL: f64 = 1e-6;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized 2D FFT of a row-major `height × width` buffer.
pub fn fft2_in_place(buf: &mut [C64], height: usize, width: usize, direction: FftDirection) {
    debug_assert_eq!(buf.len(), height * width);
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(width, direction), p.plan_fft(height, direction))
    });
    let mut scratch = vec![
        C64::default();
        row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len())
    ];
    for row in buf.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![C64::default(); height];
    for c in 0..width {
        for (r, v) in column.iter_mut().enumerate() {
            *v = buf[r * width + c];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for (r, v) in column.iter().enumerate() {
            buf[r * width + c] = *v;
        }
    }
}

/// Replace `F` by `(F(k) + conj F(-k)) / 2`. A no-op up to rounding for the
/// transform of a real signal.
fn hermitian_project(buf: &mut [C64], height: usize, width: usize) {
    let src = buf.to_vec();
    for r in 0..height {
        let nr = (height - r) % height;
        for c in 0..width {
            let nc = (width - c) % width;
            let a = src[r * width + c];
            let b = src[nr * width + nc].conj();
            buf[r * width + c] = if (r, c) == (nr, nc) {
                C64::new(a.re, 0.0)
            } else {
                (a + b) * 0.5
            };
        }
    }
}

/// Stored phase for a coefficient: `-arg(z)`, with `-π` folded onto `π`.
#[inline]
fn phase_of(z: C64) -> f64 {
    let p = -z.im.atan2(z.re);
    if p <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        p
    }
}

/// `e^{-jP}` for a stored phase.
#[inline]
fn phasor(phase: f64) -> C64 {
    let (s, c) = phase.sin_cos();
    C64::new(c, -s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpectrum {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Per-channel amplitude and phase of an image's 2D DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    channels: [ChannelSpectrum; 3],
}

impl Spectrum {
    pub fn new(height: usize, width: usize, channels: [ChannelSpectrum; 3]) -> Result<Self> {
        let n = height * width;
        for ch in &channels {
            if ch.amplitude.len() != n || ch.phase.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "spectrum arrays must have {n} entries"
                )));
            }
            if ch.amplitude.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::InvalidParameter(
                    "amplitude must be finite and >= 0".into(),
                ));
            }
            if ch.phase.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidParameter("phase must be finite".into()));
            }
        }
        Ok(Self {
            height,
            width,
            channels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channel(&self, c: usize) -> &ChannelSpectrum {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[ChannelSpectrum; 3] {
        &self.channels
    }

    /// Complex coefficients `A · e^{-jP}` of one channel.
    pub fn coefficients(&self, c: usize) -> Vec<C64> {
        let ch = &self.channels[c];
        ch.amplitude
            .iter()
            .zip(&ch.phase)
            .map(|(&a, &p)| phasor(p) * a)
            .collect()
    }
}

fn plane_spectrum(plane: &[f64], height: usize, width: usize) -> Vec<C64> {
    let mut buf: Vec<C64> = plane.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft2_in_place(&mut buf, height, width, FftDirection::Forward);
    hermitian_project(&mut buf, height, width);
    buf
}

/// Hermitian-projected complex spectrum of every channel.
///
/// Channels 0 and 1 share one complex transform of `x₀ + i·x₁`; the two
/// spectra are separated by their conjugate symmetry, which also makes them
/// exactly Hermitian.
pub(crate) fn complex_spectra(img: &ImagePatch) -> [Vec<C64>; 3] {
    let (h, w) = img.dims();
    let mut packed: Vec<C64> = img.pixels().map(|p| C64::new(p[0], p[1])).collect();
    fft2_in_place(&mut packed, h, w, FftDirection::Forward);
    let n = h * w;
    let mut a = vec![C64::default(); n];
    let mut b = vec![C64::default(); n];
    for r in 0..h {
        let nr = (h - r) % h;
        for c in 0..w {
            let k = r * w + c;
            let nk = nr * w + (w - c) % w;
            let z = packed[k];
            if k == nk {
                a[k] = C64::new(z.re, 0.0);
                b[k] = C64::new(z.im, 0.0);
            } else {
                let zc = packed[nk].conj();
                a[k] = (z + zc) * 0.5;
                b[k] = (z - zc) * C64::new(0.0, -0.5);
            }
        }
    }
    [a, b, plane_spectrum(&img.plane(2), h, w)]
}

/// Unscaled inverse transform evaluated on `rows × cols` only (row-major
/// result). Full transforms run along the width axis; the height axis is
/// transformed only for the requested columns.
fn inverse_at(
    mut buf: Vec<C64>,
    height: usize,
    width: usize,
    rows: &[usize],
    cols: &[usize],
) -> Vec<C64> {
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (
            p.plan_fft(width, FftDirection::Inverse),
            p.plan_fft(height, FftDirection::Inverse),
        )
    });
    let mut scratch = vec![
        C64::default();
        row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len())
    ];
    for row in buf.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }
    let mut out = vec![C64::default(); rows.len() * cols.len()];
    let mut column = vec![C64::default(); height];
    for (j, &c) in cols.iter().enumerate() {
        for (r, v) in column.iter_mut().enumerate() {
            *v = buf[r * width + c];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for (i, &r) in rows.iter().enumerate() {
            out[i * cols.len() + j] = column[r];
        }
    }
    out
}

pub fn dft2(img: &ImagePatch) -> Spectrum {
    let (h, w) = img.dims();
    let channels = complex_spectra(img).map(|coeffs| ChannelSpectrum {
        amplitude: coeffs.iter().map(|z| z.norm_sqr().sqrt()).collect(),
        phase: coeffs.iter().map(|&z| phase_of(z)).collect(),
    });
    Spectrum {
        height: h,
        width: w,
        channels,
    }
}

/// Inverse of one channel's coefficients, returning the real part after
/// checking the imaginary residue.
pub(crate) fn inverse_plane(mut coeffs: Vec<C64>, height: usize, width: usize) -> Result<Vec<f64>> {
    fft2_in_place(&mut coeffs, height, width, FftDirection::Inverse);
    let scale = 1.0 / (height * width) as f64;
    let max_imag = coeffs
        .iter()
        .map(|z| (z.im * scale).abs())
        .fold(0.0, f64::max);
    if !(max_imag < REAL_TOL) {
        return Err(Error::NonRealResult { max_imag });
    }
    Ok(coeffs.into_iter().map(|z| z.re * scale).collect())
}

/// Inverse transform without clamping: three real row-major planes.
pub fn idft2_raw(spec: &Spectrum) -> Result<[Vec<f64>; 3]> {
    let planes = [0, 1, 2].map(|c| inverse_plane(spec.coefficients(c), spec.height, spec.width));
    let [a, b, c] = planes;
    Ok([a?, b?, c?])
}

/// Inverse transform, clamped into `[0, 1]`.
pub fn idft2(spec: &Spectrum) -> Result<ImagePatch> {
    clamp_planes(spec.height, spec.width, idft2_raw(spec)?)
}

pub(crate) fn clamp_planes(
    height: usize,
    width: usize,
    planes: [Vec<f64>; 3],
) -> Result<ImagePatch> {
    let mut data = Vec::with_capacity(height * width * 3);
    for i in 0..height * width {
        for p in &planes {
            data.push(p[i].clamp(0.0, 1.0));
        }
    }
    ImagePatch::from_clamped(height, width, data)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Spectrum with amplitude `(1-λ)·A(content) + λ·A(style)` and the content's
/// phase, over every frequency.
pub fn mix_spectra(content: &Spectrum, style: &Spectrum, lambda: f64) -> Result<Spectrum> {
    check_lambda(lambda)?;
    if (content.height, content.width) != (style.height, style.width) {
        return Err(Error::DimensionMismatch(format!(
            "content {}x{} vs style {}x{}",
            content.height, content.width, style.height, style.width
        )));
    }
    let channels = [0, 1, 2].map(|c| {
        let (a, b) = (&content.channels[c], &style.channels[c]);
        ChannelSpectrum {
            amplitude: a
                .amplitude
                .iter()
                .zip(&b.amplitude)
                .map(|(&x, &s)| (1.0 - lambda) * x + lambda * s)
                .collect(),
            phase: a.phase.clone(),
        }
    });
    Ok(Spectrum {
        height: content.height,
        width: content.width,
        channels,
    })
}

/// Amplitude-mixed image before clamping.
pub fn fourier_mix_raw(x: &ImagePatch, x_style: &ImagePatch, lambda: f64) -> Result<[Vec<f64>; 3]> {
    if x.dims() != x_style.dims() {
        return Err(Error::DimensionMismatch(format!(
            "content {:?} vs style {:?}",
            x.dims(),
            x_style.dims()
        )));
    }
    check_lambda(lambda)?;
    let basis = MixBasis::new(x);
    let style_amp = amplitudes(x_style);
    basis.mix_raw(&style_amp, lambda)
}

/// Keep the phase of `x`, mix its amplitude with `x_style`'s by `lambda`,
/// invert and clamp.
pub fn fourier_mix(x: &ImagePatch, x_style: &ImagePatch, lambda: f64) -> Result<ImagePatch> {
    let (h, w) = x.dims();
    clamp_planes(h, w, fourier_mix_raw(x, x_style, lambda)?)
}

/// Per-channel amplitude arrays.
pub fn amplitudes(img: &ImagePatch) -> [Vec<f64>; 3] {
    complex_spectra(img).map(|z| z.iter().map(|v| v.norm_sqr().sqrt()).collect())
}

fn is_symmetric(amplitude: &[f64], height: usize, width: usize) -> bool {
    (0..height).all(|r| {
        let nr = (height - r) % height;
        (0..width).all(|c| amplitude[r * width + c] == amplitude[nr * width + (width - c) % width])
    })
}

/// Precomputed content decomposition for repeated mixing against many
/// styles: amplitude plus unit phasor `e^{-jP}` per coefficient.
#[derive(Debug, Clone)]
pub struct MixBasis {
    height: usize,
    width: usize,
    amplitude: [Vec<f64>; 3],
    unit: [Vec<C64>; 3],
}

impl MixBasis {
    pub fn new(x: &ImagePatch) -> Self {
        let (height, width) = x.dims();
        let spectra = complex_spectra(x);
        let amplitude = [0, 1, 2].map(|c| {
            spectra[c]
                .iter()
                .map(|z| z.norm_sqr().sqrt())
                .collect::<Vec<_>>()
        });
        // z / |z| is e^{-jP} without the round trip through the angle; a
        // zero coefficient has phase 0.
        let unit = [0, 1, 2].map(|c| {
            spectra[c]
                .iter()
                .zip(&amplitude[c])
                .map(|(&z, &a)| if a > 0.0 { z / a } else { C64::new(1.0, 0.0) })
                .collect()
        });
        Self {
            height,
            width,
            amplitude,
            unit,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn mix_raw(&self, style_amplitude: &[Vec<f64>; 3], lambda: f64) -> Result<[Vec<f64>; 3]> {
        check_lambda(lambda)?;
        let n = self.height * self.width;
        if style_amplitude.iter().any(|a| a.len() != n) {
            return Err(Error::DimensionMismatch("style amplitude size".into()));
        }
        let planes = [0, 1, 2].map(|c| {
            let coeffs = self.amplitude[c]
                .iter()
                .zip(&style_amplitude[c])
                .zip(&self.unit[c])
                .map(|((&a, &s), &u)| u * ((1.0 - lambda) * a + lambda * s))
                .collect();
            inverse_plane(coeffs, self.height, self.width)
        });
        let [a, b, c] = planes;
        Ok([a?, b?, c?])
    }

    pub fn mix(&self, style_amplitude: &[Vec<f64>; 3], lambda: f64) -> Result<ImagePatch> {
        clamp_planes(
            self.height,
            self.width,
            self.mix_raw(style_amplitude, lambda)?,
        )
    }

    /// `sampler.sample(mix(..))` computed only at the pixels the sampler
    /// reads. The style amplitude must be exactly symmetric (as produced by
    /// [`amplitudes`]), which keeps every mixed spectrum Hermitian.
    pub fn mix_sampled(
        &self,
        style_amplitude: &[Vec<f64>; 3],
        lambda: f64,
        sampler: &BilinearSampler,
    ) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        let (h, w) = (self.height, self.width);
        if sampler.input_dims() != (h, w) {
            return Err(Error::DimensionMismatch(format!(
                "sampler reads {:?}, basis is {h}x{w}",
                sampler.input_dims()
            )));
        }
        if style_amplitude.iter().any(|a| a.len() != h * w) {
            return Err(Error::DimensionMismatch("style amplitude size".into()));
        }
        if !style_amplitude.iter().all(|a| is_symmetric(a, h, w)) {
            return Err(Error::InvalidParameter(
                "style amplitude is not conjugate-symmetric".into(),
            ));
        }
        let mixed = |c: usize, k: usize| {
            self.unit[c][k]
                * ((1.0 - lambda) * self.amplitude[c][k] + lambda * style_amplitude[c][k])
        };
        // x₀ + i·x₁ from one transform, x₂ from another
        let packed: Vec<C64> = (0..h * w)
            .map(|k| mixed(0, k) + C64::i() * mixed(1, k))
            .collect();
        let third: Vec<C64> = (0..h * w).map(|k| mixed(2, k)).collect();
        let (rows, cols) = (sampler.rows_used(), sampler.cols_used());
        let p = inverse_at(packed, h, w, &rows, &cols);
        let q = inverse_at(third, h, w, &rows, &cols);
        let scale = 1.0 / (h * w) as f64;
        let max_imag = q.iter().map(|z| (z.im * scale).abs()).fold(0.0, f64::max);
        if !(max_imag < REAL_TOL) {
            return Err(Error::NonRealResult { max_imag });
        }
        let mut row_pos = vec![usize::MAX; h];
        for (i, &r) in rows.iter().enumerate() {
            row_pos[r] = i;
        }
        let mut col_pos = vec![usize::MAX; w];
        for (j, &c) in cols.iter().enumerate() {
            col_pos[c] = j;
        }
        Ok(sampler.sample_with(|r, c| {
            let k = row_pos[r] * cols.len() + col_pos[c];
            [p[k].re, p[k].im, q[k].re].map(|v| (v * scale).clamp(0.0, 1.0))
        }))
    }
}

/// Bounds on the style mixing rate: `0 <= lambda <= eta <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixRate {
    lambda: f64,
    eta: f64,
}

impl MixRate {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "eta = {eta} outside [0, 1]"
            )));
        }
        if !(0.0..=eta).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} outside [0, {eta}]"
            )));
        }
        Ok(Self { lambda, eta })
    }

    pub fn sample<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Result<Self> {
        Self::new(sample_lambda(eta, rng), eta)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `λ ~ U(0, η)`.
pub fn sample_lambda<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> f64 {
    rng.gen::<f64>() * eta
}
