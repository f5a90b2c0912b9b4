//! Front-door adjustment on a small discrete causal model.
//!
//! Builds a model where the confounder `C` drives both the image `X` and the
//! label `Y`, shows that the observational `P(Y | x)` is biased, and that
//! the front-door estimate through the mediator `S` recovers `P(Y | do(x))`
//! exactly. Then checks the identity on random models.
//!
//! ```bash
//! cargo run --example front_door_oracle
//! ```

use clear::scm::{
    frontdoor_estimate, interventional_truth, observational, run_oracle, DiscreteScm,
};

pub fn main() -> clear::Result<()> {
    let model = DiscreteScm::confounded_example();
    for x in 0..model.card_x() {
        let obs = observational(&model, x)?;
        let truth = interventional_truth(&model, x)?;
        let fd = frontdoor_estimate(&model, x)?;
        println!("x = {x}");
        println!("  P(Y | x)       = {:.4?}", obs.probs());
        println!("  P(Y | do(x))   = {:.4?}", truth.probs());
        println!("  front-door     = {:.4?}", fd.probs());
        println!(
            "  |obs - do|_1 = {:.4}, |fd - do|_inf = {:.1e}",
            obs.l1_distance(&truth),
            fd.linf_distance(&truth)
        );
    }

    let report = run_oracle(7, 200, 4)?;
    println!(
        "{} random models, max gap {:.2e}: {}",
        report.trials.len(),
        report.max_gap,
        if report.passed() {
            "identity holds"
        } else {
            "identity violated"
        }
    );
    Ok(())
}
