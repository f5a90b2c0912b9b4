//! Leave-one-domain-out comparison of training methods, reported as a
//! results table and CSV.
//!
//! ```bash
//! cargo run --release --example leave_one_domain_out
//! ```

use clear::datagen::{domain_presets, generate, GenSpec};
use clear::eval::{run_plan, ExperimentPlan};
use clear::model::{Method, TrainOptions};

pub fn main() -> clear::Result<()> {
    let spec = GenSpec {
        patches_per_domain: 60,
        patch_side: 32,
        ..GenSpec::default()
    };
    let ds = generate(&spec, &domain_presets(spec.num_domains))?;
    let plan = ExperimentPlan {
        hold_outs: vec![0, 2],
        methods: vec![Method::Baseline, Method::Stainnorm, Method::Clear],
        seeds: vec![1, 2],
        train: TrainOptions {
            epochs: 3,
            ..TrainOptions::default()
        },
        ..ExperimentPlan::default()
    };
    let table = run_plan(&ds, &plan)?;
    print!("{}", table.to_text());
    print!("{}", table.to_csv()?);
    Ok(())
}
