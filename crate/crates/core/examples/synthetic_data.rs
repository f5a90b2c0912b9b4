//! Generate a confounded multi-domain patch set, write it to disk in the
//! `root/<domain>/<class>/*.png` layout, read it back and split it.
//!
//! ```bash
//! cargo run --example synthetic_data
//! ```

use clear::datagen::{domain_presets, generate, ingest, split, write_dataset, GenSpec, Manifest};

pub fn main() -> clear::Result<()> {
    let spec = GenSpec {
        patches_per_domain: 40,
        patch_side: 32,
        confound_rho: 0.8,
        seed: 5,
        ..GenSpec::default()
    };
    let domains = domain_presets(spec.num_domains);
    let ds = generate(&spec, &domains)?;
    let agree = ds
        .records
        .iter()
        .filter(|r| r.confounder == Some(r.label))
        .count();
    println!(
        "{} patches; colour cast follows the class for {agree} of them",
        ds.records.len()
    );

    let dir = std::env::temp_dir().join(format!("clear-synthetic-{}", std::process::id()));
    let manifest = Manifest {
        generator: spec,
        domains,
        records: ds.records.len(),
    };
    write_dataset(&ds, &dir, Some(&manifest))?;
    let back = ingest(&dir)?.dataset;
    println!(
        "read back {} patches, counts per domain/class: {:?}",
        back.records.len(),
        back.counts()
    );

    let s = split(&back, 2, 1)?;
    println!(
        "hold out {}: train {}, validation {}, in-domain test {}, held-out test {}",
        back.domain_names[2],
        s.train.len(),
        s.val.len(),
        s.test_in_domain.len(),
        s.test.len()
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
