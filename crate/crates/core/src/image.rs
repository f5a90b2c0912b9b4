//! RGB patches, PNG boundaries, and the lαβ colour space.
//!
//! Pixel data is row-major with interleaved channels and stays in `f64`
//! until it is written out; quantization happens only in [`save_png`].

use std::path::Path;
use std::sync::LazyLock;

use crate::error::{Error, Result};

/// RGB -> LMS cone response, as printed by Reinhard et al.
pub const RGB_TO_LMS: [[f64; 3]; 3] = [
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
];

/// Floor applied to LMS responses before the logarithm.
pub const LMS_FLOOR: f64 = 1e-6;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT6: f64 = 2.449_489_742_783_178;
const SQRT2: f64 = std::f64::consts::SQRT_2;

/// log-LMS -> lαβ: `diag(1/√3, 1/√6, 1/√2) · [[1,1,1],[1,1,-2],[1,-1,0]]`.
pub const LOG_LMS_TO_LAB: [[f64; 3]; 3] = [
    [1.0 / SQRT3, 1.0 / SQRT3, 1.0 / SQRT3],
    [1.0 / SQRT6, 1.0 / SQRT6, -2.0 / SQRT6],
    [1.0 / SQRT2, -1.0 / SQRT2, 0.0],
];

/// lαβ -> log-LMS: `[[1,1,1],[1,1,-1],[1,-2,0]] · diag(√3/3, √6/6, √2/2)`.
pub const LAB_TO_LOG_LMS: [[f64; 3]; 3] = [
    [SQRT3 / 3.0, SQRT6 / 6.0, SQRT2 / 2.0],
    [SQRT3 / 3.0, SQRT6 / 6.0, -SQRT2 / 2.0],
    [SQRT3 / 3.0, -SQRT6 / 3.0, 0.0],
];

/// Exact numerical inverse of [`RGB_TO_LMS`].
pub static LMS_TO_RGB: LazyLock<[[f64; 3]; 3]> =
    LazyLock::new(|| invert3(&RGB_TO_LMS).expect("RGB_TO_LMS is invertible"));

pub(crate) fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    if det.abs() < 1e-300 {
        return None;
    }
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = adj[r][c] / det;
        }
    }
    Some(out)
}

#[inline]
pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// H×W×3 image with every channel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImagePatch {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidImage(format!(
                "{height}x{width} is smaller than 2x2"
            )));
        }
        if data.len() != height * width * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {height}x{width}x3, got {}",
                height * width * 3,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Build from arbitrary finite values, clamping into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite value {v}")));
        }
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Self::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    /// Build from three row-major channel planes.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>; 3]) -> Result<Self> {
        let n = height * width;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::DimensionMismatch("plane length".into()));
        }
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend([planes[0][i], planes[1][i], planes[2][i]]);
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// One channel as a row-major plane.
    pub fn plane(&self, channel: usize) -> Vec<f64> {
        self.data.iter().skip(channel).step_by(3).copied().collect()
    }

    pub fn max_abs_diff(&self, other: &ImagePatch) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bilinear resampling with half-pixel centres.
    pub fn resized(&self, height: usize, width: usize) -> Result<ImagePatch> {
        if (height, width) == self.dims() {
            return Ok(self.clone());
        }
        let data = resample_bilinear(&self.data, self.height, self.width, height, width);
        ImagePatch::from_clamped(height, width, data)
    }
}

/// Bilinear resampling of an interleaved RGB buffer, half-pixel centres,
/// edge samples clamped. Works for any target size including 1×1.
pub fn resample_bilinear(
    data: &[f64],
    height: usize,
    width: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    BilinearSampler::new(height, width, out_h, out_w).sample(data)
}

/// Precomputed taps of a bilinear resampling between two fixed sizes.
///
/// Besides resampling a buffer, it can evaluate a per-pixel function only
/// at the input pixels the output actually reads.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearSampler {
    in_dims: (usize, usize),
    out_dims: (usize, usize),
    rows: Vec<(usize, usize, f64)>,
    cols: Vec<(usize, usize, f64)>,
}

impl BilinearSampler {
    pub fn new(height: usize, width: usize, out_h: usize, out_w: usize) -> Self {
        let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
            let scale = n_in as f64 / n_out as f64;
            (0..n_out)
                .map(|i| {
                    let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                    let i0 = src.floor() as usize;
                    let i1 = (i0 + 1).min(n_in - 1);
                    (i0, i1, src - i0 as f64)
                })
                .collect()
        };
        Self {
            in_dims: (height, width),
            out_dims: (out_h, out_w),
            rows: axis(height, out_h),
            cols: axis(width, out_w),
        }
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.in_dims
    }

    pub fn output_dims(&self) -> (usize, usize) {
        self.out_dims
    }

    fn used(taps: &[(usize, usize, f64)]) -> Vec<usize> {
        let mut v: Vec<usize> = taps.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Input rows read by some output sample, ascending.
    pub fn rows_used(&self) -> Vec<usize> {
        Self::used(&self.rows)
    }

    /// Input columns read by some output sample, ascending.
    pub fn cols_used(&self) -> Vec<usize> {
        Self::used(&self.cols)
    }

    pub fn sample(&self, data: &[f64]) -> Vec<f64> {
        let width = self.in_dims.1;
        self.sample_with(|r, c| {
            let i = (r * width + c) * 3;
            [data[i], data[i + 1], data[i + 2]]
        })
    }

    /// Resample the image whose pixel `(row, col)` is `pixel(row, col)`.
    pub fn sample_with(&self, mut pixel: impl FnMut(usize, usize) -> [f64; 3]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.out_dims.0 * self.out_dims.1 * 3);
        for &(r0, r1, fr) in &self.rows {
            for &(c0, c1, fc) in &self.cols {
                let (p00, p01, p10, p11) =
                    (pixel(r0, c0), pixel(r0, c1), pixel(r1, c0), pixel(r1, c1));
                for ch in 0..3 {
                    let top = p00[ch] * (1.0 - fc) + p01[ch] * fc;
                    let bottom = p10[ch] * (1.0 - fc) + p11[ch] * fc;
                    out.push(top * (1.0 - fr) + bottom * fr);
                }
            }
        }
        out
    }
}

/// Image in lαβ space. Values are unbounded but finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LabImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} lαβ values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite lαβ value".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

#[inline]
pub fn rgb_to_lab_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let lms = mat_vec(&RGB_TO_LMS, rgb);
    let log_lms = lms.map(|v| v.max(LMS_FLOOR).log10());
    mat_vec(&LOG_LMS_TO_LAB, log_lms)
}

/// Inverse conversion without the final clamp.
#[inline]
pub fn lab_to_rgb_pixel_unclamped(lab: [f64; 3]) -> [f64; 3] {
    let log_lms = mat_vec(&LAB_TO_LOG_LMS, lab);
    let lms = log_lms.map(|v| (v * std::f64::consts::LN_10).exp());
    mat_vec(&LMS_TO_RGB, lms)
}

pub fn rgb_to_lab(img: &ImagePatch) -> LabImage {
    let data = img.pixels().flat_map(rgb_to_lab_pixel).collect();
    LabImage {
        height: img.height,
        width: img.width,
        data,
    }
}

/// lαβ -> RGB, clamped into `[0, 1]`. Clamping is the only lossy step.
pub fn lab_to_rgb(img: &LabImage) -> ImagePatch {
    let data = img
        .pixels()
        .flat_map(|p| lab_to_rgb_pixel_unclamped(p).map(|v| v.clamp(0.0, 1.0)))
        .collect();
    ImagePatch {
        height: img.height,
        width: img.width,
        data,
    }
}

/// Read an 8- or 16-bit RGB/RGBA PNG; alpha is dropped.
pub fn load_png(path: &Path) -> Result<ImagePatch> {
    let bytes = std::fs::read(path)?;
    decode_png(&bytes)
}

pub fn decode_png(bytes: &[u8]) -> Result<ImagePatch> {
    use image::DynamicImage;
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match &decoded {
        DynamicImage::ImageRgb8(b) => b.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        DynamicImage::ImageRgba8(b) => b
            .as_raw()
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .map(|v| v as f64 / 255.0)
            .collect(),
        DynamicImage::ImageRgb16(b) => b.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        DynamicImage::ImageRgba16(b) => b
            .as_raw()
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{:?} PNG; only RGB and RGBA are accepted",
                other.color()
            )))
        }
    };
    ImagePatch::new(h, w, data)
}

/// Write an 8-bit RGB PNG, each channel stored as `round(v * 255)`.
pub fn save_png(img: &ImagePatch, path: &Path) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn encode_png(img: &ImagePatch) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let raw: Vec<u8> = img.data.iter().map(|v| (v * 255.0).round() as u8).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(
            &raw,
            img.width as u32,
            img.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Decode(format!("png encode: {e}")))?;
    Ok(out)
}
