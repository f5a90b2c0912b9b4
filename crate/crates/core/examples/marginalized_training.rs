//! Train a classifier with the marginalized mixture loss: every sample is
//! scored on itself plus Fourier- and stain-transformed views built from
//! styles of the other training domains. Checks the analytic gradient
//! first, then trains and predicts on an unseen domain.
//!
//! ```bash
//! cargo run --release --example marginalized_training
//! ```

use clear::datagen::{domain_presets, generate, GenSpec};
use clear::eval::balanced_accuracy;
use clear::model::{
    grad_check, predict, train, Classifier, CpitConfig, Objective, StylePool, TrainOptions,
};
use clear::rng::{derived, seeded};

pub fn main() -> clear::Result<()> {
    let spec = GenSpec {
        patches_per_domain: 60,
        patch_side: 32,
        ..GenSpec::default()
    };
    let ds = generate(&spec, &domain_presets(spec.num_domains))?;
    let (train_set, test_set): (Vec<_>, Vec<_>) = ds.records.iter().partition(|r| r.domain != 2);

    let pool = StylePool::new(
        32,
        32,
        train_set.iter().map(|r| (r.image.clone(), r.domain)),
    )?;
    let cfg = CpitConfig {
        seed: 1,
        ..CpitConfig::default()
    };
    let mut clf = Classifier::random(16, 0, 2, &mut seeded(1))?;

    let check = grad_check(
        &clf,
        (&train_set[0].image, train_set[0].label),
        &pool,
        &cfg,
        &mut seeded(2),
    )?;
    println!(
        "gradient check: {} coordinates, max relative error {:.1e}",
        check.coordinates, check.max_rel_error
    );

    let data: Vec<_> = train_set.iter().map(|r| (&r.image, r.label)).collect();
    let opts = TrainOptions {
        epochs: 5,
        ..TrainOptions::default()
    };
    let report = train(
        &mut clf,
        &data,
        Objective::Cpit {
            pool: &pool,
            cfg: &cfg,
        },
        &opts,
        &mut seeded(3),
        |epoch, _, loss| {
            println!("epoch {epoch}: mean loss {loss:.4}");
            Ok(())
        },
    )?;
    println!("trained {} epochs", report.losses.len());

    let preds = test_set
        .iter()
        .enumerate()
        .map(|(i, r)| Ok(predict(&clf, &r.image, &pool, &cfg, &mut derived(4, &[i as u64]))?.label))
        .collect::<clear::Result<Vec<_>>>()?;
    let labels: Vec<_> = test_set.iter().map(|r| r.label).collect();
    println!(
        "held-out balanced accuracy: {:.3}",
        balanced_accuracy(&preds, &labels, 2)?
    );
    Ok(())
}
