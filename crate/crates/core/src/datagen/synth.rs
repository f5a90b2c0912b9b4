use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::Result;
use crate::image::{lab_to_rgb, rgb_to_lab, ImagePatch, LabImage};
use crate::rng::derived;

use super::{Dataset, DomainSpec, GenSpec, Record};

const BACKGROUND: [f64; 3] = [0.92, 0.70, 0.80];
const NUCLEUS: [f64; 3] = [0.36, 0.22, 0.56];
const TEXTURE_AMPLITUDE: f64 = 0.05;
const CAST_MAGNITUDE: f64 = 0.05;

/// Default styles for `n` domains, spread evenly around a colour wheel.
/// Cast directions sum to zero, so a held-out domain's cast opposes the
/// average cast of the others.
pub fn domain_presets(n: usize) -> Vec<DomainSpec> {
    (0..n)
        .map(|d| {
            let phi = 2.0 * PI * d as f64 / n as f64;
            let theta = phi + 0.7;
            DomainSpec {
                domain_id: d,
                stain_shift: [
                    0.08 * theta.sin(),
                    0.03 * (theta + 1.0).cos(),
                    0.03 * (theta + 1.0).sin(),
                ],
                stain_scale: [
                    1.0 + 0.15 * theta.cos(),
                    1.0 + 0.2 * theta.sin(),
                    1.0 + 0.2 * (theta + 2.0).cos(),
                ],
                noise_sigma: 0.01,
                confound_cast: [CAST_MAGNITUDE * phi.cos(), CAST_MAGNITUDE * phi.sin()],
            }
        })
        .collect()
}

fn class_fraction(label: usize, classes: usize) -> f64 {
    if classes > 1 {
        label as f64 / (classes - 1) as f64
    } else {
        0.0
    }
}

/// Unstained tissue content for a class: an oriented background texture
/// whose frequency rises with the class index, plus nuclei that become
/// smaller, denser and more centrally clustered (constant total area).
pub fn render_content<R: Rng + ?Sized>(
    side: usize,
    label: usize,
    classes: usize,
    rng: &mut R,
) -> ImagePatch {
    let t = class_fraction(label, classes);
    let s = side as f64;
    let scale = s / 64.0;

    let freq = 3.0 + 5.0 * t;
    let orient = rng.gen_range(0.0..PI);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let (ox, oy) = (orient.cos(), orient.sin());
    let mut data = Vec::with_capacity(side * side * 3);
    for r in 0..side {
        for c in 0..side {
            let u = (c as f64 * ox + r as f64 * oy) / s;
            let v = 1.0 + TEXTURE_AMPLITUDE * (2.0 * PI * freq * u + phase).sin();
            data.extend(BACKGROUND.map(|b| b * v));
        }
    }

    let count = (((6.0 + 18.0 * t) * scale * scale).round() as usize).max(1);
    let centre = Normal::new(s / 2.0, s / 8.0).expect("valid normal");
    for _ in 0..count {
        let radius = (6.0 - 3.0 * t) * scale * rng.gen_range(0.8..1.2);
        let (cy, cx) = if rng.gen::<f64>() < t {
            (
                centre.sample(rng).clamp(0.0, s - 1.0),
                centre.sample(rng).clamp(0.0, s - 1.0),
            )
        } else {
            (rng.gen_range(0.0..s), rng.gen_range(0.0..s))
        };
        let tint = rng.gen_range(0.9..1.1);
        let colour = NUCLEUS.map(|v| v * tint);
        let lo = |x: f64| (x - radius - 1.0).floor().max(0.0) as usize;
        let hi = |x: f64| ((x + radius + 1.0).ceil() as usize).min(side - 1);
        for r in lo(cy)..=hi(cy) {
            for c in lo(cx)..=hi(cx) {
                let dist = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
                let cover = 0.9 * (radius - dist + 0.5).clamp(0.0, 1.0);
                if cover > 0.0 {
                    let px = &mut data[(r * side + c) * 3..(r * side + c) * 3 + 3];
                    for ch in 0..3 {
                        px[ch] += cover * (colour[ch] - px[ch]);
                    }
                }
            }
        }
    }
    ImagePatch::from_clamped(side, side, data).expect("valid dimensions")
}

/// Apply a domain's stain style and an optional αβ cast (`cast_sign` in
/// `[-1, 1]`) about the patch mean in lαβ.
fn stylize<R: Rng + ?Sized>(
    content: &ImagePatch,
    dom: &DomainSpec,
    cast_sign: f64,
    rng: &mut R,
) -> ImagePatch {
    let lab = rgb_to_lab(content);
    let n = (lab.height() * lab.width()) as f64;
    let mut mean = [0.0; 3];
    for p in lab.pixels() {
        for c in 0..3 {
            mean[c] += p[c] / n;
        }
    }
    let offset = [
        dom.stain_shift[0],
        dom.stain_shift[1] + cast_sign * dom.confound_cast[0],
        dom.stain_shift[2] + cast_sign * dom.confound_cast[1],
    ];
    let noise = Normal::new(0.0, dom.noise_sigma).expect("validated sigma");
    let mut out = lab.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] =
                mean[c] + offset[c] + dom.stain_scale[c] * (px[c] - mean[c]) + noise.sample(rng);
        }
    }
    lab_to_rgb(&LabImage::new(lab.height(), lab.width(), out.data().to_vec()).expect("same shape"))
}

/// Round to the 8-bit grid so in-memory patches equal their PNG files.
fn quantize8(img: &ImagePatch) -> ImagePatch {
    let data = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round() / 255.0)
        .collect();
    ImagePatch::new(img.height(), img.width(), data).expect("values stay in [0, 1]")
}

/// Generate `patches_per_domain` patches for every domain. Patch `i` of
/// domain `d` has label `i mod K` and is drawn from its own sub-stream
/// `(seed, d, i)`, so generation order does not matter.
pub fn generate(spec: &GenSpec, domains: &[DomainSpec]) -> Result<Dataset> {
    spec.validate()?;
    if domains.len() != spec.num_domains {
        return Err(crate::Error::InvalidParameter(format!(
            "{} domain specs for {} domains",
            domains.len(),
            spec.num_domains
        )));
    }
    for d in domains {
        d.validate()?;
    }
    let k = spec.classes;
    let domain_names: Vec<String> = (0..spec.num_domains)
        .map(|d| format!("domain{d}"))
        .collect();
    let cells: Vec<(usize, usize)> = (0..spec.num_domains)
        .flat_map(|d| (0..spec.patches_per_domain).map(move |i| (d, i)))
        .collect();
    let records = cells
        .par_iter()
        .map(|&(d, i)| {
            let mut rng = derived(spec.seed, &[d as u64, i as u64]);
            let label = i % k;
            let confounder = if rng.gen::<f64>() < spec.confound_rho {
                label
            } else {
                rng.gen_range(0..k)
            };
            let content = render_content(spec.patch_side, label, k, &mut rng);
            let sign = if k > 1 {
                2.0 * class_fraction(confounder, k) - 1.0
            } else {
                0.0
            };
            Record {
                id: format!("{}/{label}/p{i:05}.png", domain_names[d]),
                domain: d,
                label,
                image: quantize8(&stylize(&content, &domains[d], sign, &mut rng)),
                confounder: Some(confounder),
            }
        })
        .collect();
    Ok(Dataset {
        domain_names,
        class_names: (0..k).map(|c| c.to_string()).collect(),
        records,
    })
}
