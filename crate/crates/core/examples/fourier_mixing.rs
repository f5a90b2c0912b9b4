//! Fourier style mixing: keep the phase of a content patch, blend its
//! amplitude spectrum towards a style patch.
//!
//! ```bash
//! cargo run --example fourier_mixing
//! ```

use clear::datagen::{domain_presets, generate, GenSpec};
use clear::fourier::{dft2, fourier_mix, idft2, sample_lambda};
use clear::rng::seeded;

pub fn main() -> clear::Result<()> {
    let spec = GenSpec {
        patches_per_domain: 2,
        patch_side: 48,
        ..GenSpec::default()
    };
    let ds = generate(&spec, &domain_presets(spec.num_domains))?;
    let content = &ds.records[0].image;
    let style = &ds.records[ds.records.len() - 1].image;

    let spectrum = dft2(content);
    let back = idft2(&spectrum)?;
    println!("round trip max error: {:.2e}", back.max_abs_diff(content));

    for lambda in [0.0, 0.5, 1.0] {
        let mixed = fourier_mix(content, style, lambda)?;
        let dc = |img: &clear::image::ImagePatch| dft2(img).channel(0).amplitude[0];
        println!(
            "lambda {lambda:.1}: red DC amplitude {:.1} (content {:.1}, style {:.1}), distance to content {:.3}",
            dc(&mixed),
            dc(content),
            dc(style),
            mixed.max_abs_diff(content)
        );
    }

    let mut rng = seeded(3);
    let lambda = sample_lambda(1.0, &mut rng);
    let _ = fourier_mix(content, style, lambda)?;
    println!("sampled lambda ~ U(0, 1): {lambda:.3}");
    Ok(())
}
