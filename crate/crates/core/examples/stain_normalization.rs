//! Reinhard stain normalization in lαβ: match the colour mean and spread of
//! a source patch to a reference.
//!
//! ```bash
//! cargo run --example stain_normalization
//! ```

use clear::datagen::{domain_presets, generate, GenSpec};
use clear::stain::LabStats;
use clear::stain::{format_ref_stats, lab_stats, reinhard_normalize, reinhard_normalize_lab};

pub fn main() -> clear::Result<()> {
    let spec = GenSpec {
        patches_per_domain: 2,
        patch_side: 48,
        ..GenSpec::default()
    };
    let ds = generate(&spec, &domain_presets(spec.num_domains))?;
    let source = &ds.records[0].image;
    let reference = lab_stats(&ds.records[ds.records.len() - 1].image);

    println!("source stats:\n{}", format_ref_stats(&lab_stats(source)));
    println!("reference stats:\n{}", format_ref_stats(&reference));

    let pre_clamp = LabStats::of_lab(&reinhard_normalize_lab(source, &reference));
    println!(
        "pre-clamp error: {:.2e}",
        pre_clamp.max_abs_diff(&reference)
    );
    let out = reinhard_normalize(source, &reference);
    println!(
        "post-clamp error: {:.2e}",
        lab_stats(&out).max_abs_diff(&reference)
    );

    let identity = reinhard_normalize(source, &lab_stats(source));
    println!(
        "self-reference max pixel change: {:.2e}",
        identity.max_abs_diff(source)
    );
    Ok(())
}
