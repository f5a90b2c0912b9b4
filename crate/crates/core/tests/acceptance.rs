//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are always printed.
//! Pass criterion numbers to run a subset: `cargo test --test acceptance -- 2 4`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rustfft::num_complex::Complex;

use clear::datagen::{domain_presets, generate, split, Dataset, GenSpec};
use clear::eval::{check_provenance, run_cell, run_plan, ExperimentPlan};
use clear::fourier::{dft2, fourier_mix, fourier_mix_raw, idft2_raw};
use clear::image::{lab_to_rgb, rgb_to_lab, ImagePatch};
use clear::model::{
    build_views, grad_check, grad_check_views, Classifier, CpitConfig, Method, MixSpace,
    PreparedQuery, StylePool, TrainOptions,
};
use clear::rng::seeded;
use clear::scm::{
    frontdoor_estimate, interventional_truth, observational, run_oracle, DiscreteScm,
};
use clear::stain::{lab_stats, reinhard_normalize, reinhard_normalize_lab, LabStats};
use clear::Error;

type C64 = Complex<f64>;

/// Epochs per benchmark run; keeps the 36-run benchmark inside its time budget.
const BENCH_EPOCHS: usize = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_patch(rng: &mut impl Rng, h: usize, w: usize) -> ImagePatch {
    ImagePatch::from_fn(h, w, |_, _| [(); 3].map(|_| rng.gen::<f64>())).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = run_oracle(2024, 1000, 4).unwrap();
    let elapsed = start.elapsed();

    let model = DiscreteScm::confounded_example();
    let mut witness = true;
    let mut l1_min = f64::INFINITY;
    for x in 0..model.card_x() {
        let obs = observational(&model, x).unwrap();
        let truth = interventional_truth(&model, x).unwrap();
        let fd = frontdoor_estimate(&model, x).unwrap();
        l1_min = l1_min.min(obs.l1_distance(&truth));
        witness &= obs.l1_distance(&truth) > 0.1 && fd.linf_distance(&truth) < 1e-10;
    }
    let pass = report.passed()
        && report.trials.len() == 1000
        && report.max_gap < 1e-10
        && elapsed < Duration::from_secs(5)
        && witness;
    outcome(
        pass,
        format!(
            "1000 models, max gap {:.2e} in {:.2}s; confounded witness |obs-do|_1 = {l1_min:.3}",
            report.max_gap,
            elapsed.as_secs_f64()
        ),
    )
}

/// 2D DFT by direct summation along rows, then columns.
fn separable_dft(plane: &[f64], h: usize, w: usize) -> Vec<C64> {
    let mut rows = vec![C64::default(); h * w];
    for r in 0..h {
        for v in 0..w {
            rows[r * w + v] = (0..w)
                .map(|c| C64::from_polar(plane[r * w + c], -2.0 * PI * (v * c) as f64 / w as f64))
                .sum();
        }
    }
    let mut out = vec![C64::default(); h * w];
    for u in 0..h {
        for v in 0..w {
            out[u * w + v] = (0..h)
                .map(|r| {
                    rows[r * w + v] * C64::from_polar(1.0, -2.0 * PI * (u * r) as f64 / h as f64)
                })
                .sum();
        }
    }
    out
}

fn phase_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn criterion_2() -> Outcome {
    let mut rng = seeded(77);
    let (mut round_trip, mut parseval, mut identity, mut phase) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut non_pow2 = false;
    for i in 0..100 {
        let (h, w): (usize, usize) = if i == 0 {
            (37, 53)
        } else {
            (rng.gen_range(2..=40), rng.gen_range(2..=40))
        };
        non_pow2 |= !(h.is_power_of_two() && w.is_power_of_two());
        let x = random_patch(&mut rng, h, w);
        let s = random_patch(&mut rng, h, w);
        let spec = dft2(&x);
        let back = idft2_raw(&spec).unwrap();
        for c in 0..3 {
            let plane = x.plane(c);
            for (a, b) in back[c].iter().zip(&plane) {
                round_trip = round_trip.max((a - b).abs());
            }
            let energy: f64 = spec.channel(c).amplitude.iter().map(|a| a * a).sum();
            let pixels: f64 = plane.iter().map(|v| v * v).sum::<f64>() * (h * w) as f64;
            parseval = parseval.max(((energy - pixels) / pixels).abs());
        }
        identity = identity.max(fourier_mix(&x, &s, 0.0).unwrap().max_abs_diff(&x));

        let lambda = rng.gen::<f64>();
        let mixed = fourier_mix_raw(&x, &s, lambda).unwrap();
        for c in 0..3 {
            let got = separable_dft(&mixed[c], h, w);
            for (k, z) in got.iter().enumerate() {
                if z.norm() > 1e-9 {
                    // stored phase is the negated argument
                    phase = phase.max(phase_gap(-z.arg(), spec.channel(c).phase[k]));
                }
            }
        }
    }
    let pass = round_trip < 1e-9 && parseval < 1e-9 && identity < 1e-6 && phase < 1e-6 && non_pow2;
    outcome(
        pass,
        format!(
            "100 images incl. 37x53: round trip {round_trip:.1e}, Parseval {parseval:.1e}, \
             lambda=0 identity {identity:.1e}, phase drift {phase:.1e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = seeded(31);
    let spec = GenSpec {
        patches_per_domain: 10,
        patch_side: 32,
        ..GenSpec::default()
    };
    let ds = generate(&spec, &domain_presets(3)).unwrap();
    let mut images: Vec<ImagePatch> = (0..40)
        .map(|_| {
            let (h, w) = (rng.gen_range(2..=32), rng.gen_range(2..=32));
            random_patch(&mut rng, h, w)
        })
        .collect();
    images.extend(ds.records.iter().map(|r| r.image.clone()));

    let (mut stats, mut self_ref, mut round_trip) = (0.0f64, 0.0f64, 0.0f64);
    for (i, src) in images.iter().enumerate() {
        let reference = lab_stats(&images[(i * 7 + 3) % images.len()]);
        stats = stats.max(
            LabStats::of_lab(&reinhard_normalize_lab(src, &reference)).max_abs_diff(&reference),
        );
        self_ref = self_ref.max(reinhard_normalize(src, &lab_stats(src)).max_abs_diff(src));
        round_trip = round_trip.max(lab_to_rgb(&rgb_to_lab(src)).max_abs_diff(src));
    }
    let pass = stats < 1e-9 && self_ref < 1e-4 && round_trip < 1e-4;
    outcome(
        pass,
        format!(
            "{} images: pre-clamp stats {stats:.1e}, self-reference {self_ref:.1e}, RGB<->lab {round_trip:.1e}",
            images.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = seeded(404);
    let side = 16;
    let x = random_patch(&mut rng, side, side);
    let pool = StylePool::new(
        side,
        side,
        (0..6).map(|i| (random_patch(&mut rng, side, side), i % 3)),
    )
    .unwrap();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for hidden in [0, 8] {
        for mix_space in [MixSpace::Logits, MixSpace::Probs] {
            let clf = Classifier::random(8, hidden, 3, &mut rng).unwrap();
            let cfg = CpitConfig {
                n_styles: 2,
                mix_space,
                ..CpitConfig::default()
            };
            let r = grad_check(&clf, (&x, 1), &pool, &cfg, &mut rng).unwrap();
            worst = worst.max(r.max_rel_error);
            checks += 1;
        }
    }
    let clf = Classifier::random(8, 8, 3, &mut rng).unwrap();
    let cfg = CpitConfig {
        n_styles: 2,
        ..CpitConfig::default()
    };
    let views = build_views(&clf, &PreparedQuery::new(&x), &pool, &cfg, &mut rng).unwrap();
    let corrupted = grad_check_views(&clf, &views, 1, 1.1, &mut rng).max_rel_error;
    let pass = worst < 1e-4 && corrupted > 1e-2;
    outcome(
        pass,
        format!("{checks} configurations (linear, tanh x logits, probs; N=2): max relative error {worst:.1e}; corrupted gradient {corrupted:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let spec = GenSpec {
        num_domains: 3,
        classes: 2,
        patches_per_domain: 600,
        patch_side: 64,
        confound_rho: 0.8,
        seed: 0,
    };
    let ds = generate(&spec, &domain_presets(3)).unwrap();
    let plan = ExperimentPlan {
        hold_outs: vec![0, 1, 2],
        methods: vec![
            Method::Baseline,
            Method::Clear,
            Method::ClearStainOnly,
            Method::ClearFourierOnly,
        ],
        seeds: vec![1, 2, 3],
        train: TrainOptions {
            epochs: BENCH_EPOCHS,
            ..TrainOptions::default()
        },
        ..ExperimentPlan::default()
    };
    let table = run_plan(&ds, &plan).unwrap();
    let elapsed = start.elapsed();
    for line in table.to_text().lines() {
        println!("    {line}");
    }
    let mean = |m: Method, d: &str| {
        table
            .rows
            .iter()
            .find(|r| r.method == m && r.hold_out == d)
            .map(|r| r.mean)
            .unwrap()
    };
    let avg = |m: Method| ds.domain_names.iter().map(|d| mean(m, d)).sum::<f64>() / 3.0;
    let gains: Vec<f64> = ds
        .domain_names
        .iter()
        .map(|d| mean(Method::Clear, d) - mean(Method::Baseline, d))
        .collect();
    let wins = gains.iter().filter(|g| **g >= 0.03).count();
    let (mixed, stain, fourier) = (
        avg(Method::Clear),
        avg(Method::ClearStainOnly),
        avg(Method::ClearFourierOnly),
    );
    let part_a = wins >= 2;
    let part_b = mixed >= stain.max(fourier);
    let fast = elapsed < Duration::from_secs(600);
    let gains: Vec<String> = gains.iter().map(|g| format!("{g:+.3}")).collect();
    outcome(
        part_a && part_b && fast,
        format!(
            "(a) {}: CLEAR - baseline per domain [{}], {wins}/3 >= 0.03; \
             (b) {}: mixed {mixed:.4} vs stain-only {stain:.4}, Fourier-only {fourier:.4}; \
             {:.0}s for 36 runs of {BENCH_EPOCHS} epochs",
            if part_a { "PASS" } else { "FAIL" },
            gains.join(", "),
            if part_b { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        ),
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_clear"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data_s = data.to_str().unwrap();
    let gen = cli(&[
        "-q",
        "gen-data",
        "--out",
        data_s,
        "--per-domain",
        "60",
        "--side",
        "32",
        "--seed",
        "6",
    ]);
    assert!(
        gen.status.success(),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = cli(&[
            "-q",
            "--threads",
            threads,
            "eval",
            "--data",
            data_s,
            "--methods",
            "baseline,stainnorm,clear,clear_stain_only,clear_fourier_only",
            "--seeds",
            "1,2",
            "--epochs",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let first = run("a.csv", "0");
    let second = run("b.csv", "0");
    let single = run("c.csv", "1");
    let rows = String::from_utf8_lossy(&first).lines().count() - 1;
    let pass = first == second && first == single && rows == 15;
    outcome(
        pass,
        format!(
            "eval over 3 hold-outs x 5 methods x 2 seeds: repeat identical = {}, single-thread identical = {}, {} bytes",
            first == second,
            first == single,
            first.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let spec = GenSpec {
        patches_per_domain: 30,
        patch_side: 16,
        seed: 8,
        ..GenSpec::default()
    };
    let ds: Dataset = generate(&spec, &domain_presets(3)).unwrap();
    let domain_of = |id: &str| {
        ds.records
            .iter()
            .find(|r| r.id == id)
            .map(|r| r.domain)
            .unwrap()
    };
    let plan = ExperimentPlan {
        train: TrainOptions {
            epochs: 1,
            ..TrainOptions::default()
        },
        ..ExperimentPlan::default()
    };
    let mut cells = 0;
    let mut leaks = 0;
    let mut test_ok = true;
    for hold_out in 0..3 {
        for method in Method::ALL {
            let cell = run_cell(&ds, method, hold_out, 5, &plan).unwrap();
            let p = &cell.provenance;
            cells += 1;
            leaks += p
                .train
                .iter()
                .chain(&p.selection)
                .chain(&p.styles)
                .chain(&p.reference)
                .filter(|id| domain_of(id) == hold_out)
                .count();
            test_ok &= !p.test.is_empty() && p.test.iter().all(|id| domain_of(id) == hold_out);
            test_ok &= !p.train.is_empty() && !p.selection.is_empty();
        }
    }
    let mut tampered = split(&ds, 1, 5).unwrap();
    let foreign = tampered.test[0];
    tampered.val.push(foreign);
    let caught = matches!(
        check_provenance(&ds, &tampered),
        Err(Error::ProvenanceViolation(_))
    );
    let pass = leaks == 0 && test_ok && caught;
    outcome(
        pass,
        format!("{cells} runs (3 hold-outs x 5 methods): {leaks} held-out ids in training, selection, styles or reference; tampered split rejected = {caught}"),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "front-door identity", criterion_1),
        (2, "Fourier transform suite", criterion_2),
        (3, "stain suite", criterion_3),
        (4, "gradient correctness", criterion_4),
        (5, "directional benchmark", criterion_5),
        (6, "determinism", criterion_6),
        (7, "protocol fidelity", criterion_7),
    ];
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {n} ({name}): {} - {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
