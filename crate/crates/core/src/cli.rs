//! Command-line front end. `run` parses arguments, resolves the config and
//! returns the process exit code: 0 on success, 1 on usage or validation
//! errors and failed checks, 2 on runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::datagen::{domain_presets, generate, ingest, split, write_dataset, Dataset, Manifest};
use crate::error::{Error, Result};
use crate::eval::{fit, run_plan_with, CellResult, ResultTable};
use crate::fourier::{fourier_mix, MixRate};
use crate::image::{load_png, save_png, ImagePatch};
use crate::model::{
    grad_check, load_checkpoint, predict, predict_plain, save_checkpoint, Classifier, Method,
    MixSpace, StylePool, GRAD_CHECK_TOL,
};
use crate::rng::{derived, seeded};
use crate::scm::{self, DiscreteScm, IDENTITY_TOL};
use crate::stain::{load_ref_stats, normalizer_by_name, LabStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "clear",
    version,
    about = "Causal domain generalization for stained tissue patches",
    after_help = "Configuration: --config FILE (TOML), then CLEAR_<SECTION>_<KEY> environment \
                  variables (CLEAR_SEED for the top-level seed), then --set and per-command flags."
)]
struct Cli {
    /// TOML config file with [cpit] [train] [model] [data] [eval] sections.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override any config value, e.g. --set train.epochs=5 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, String)>,

    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the front-door identity on random causal models or one model file.
    Oracle(OracleArgs),
    /// Apply a Fourier or stain transform to one PNG.
    Transform(TransformArgs),
    /// Generate a synthetic multi-domain dataset.
    GenData(GenDataArgs),
    /// Train one method with one domain held out and save a checkpoint.
    Train(TrainArgs),
    /// Predict labels for PNGs with a saved checkpoint.
    Predict(PredictArgs),
    /// Leave-one-domain-out evaluation of several methods over seeds.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients of the training loss.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Largest cardinality of any variable.
    #[arg(long, default_value_t = 4)]
    max_card: usize,
    /// Check this model file instead of random models.
    #[arg(long, value_name = "FILE")]
    scm: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Fourier,
    Stain,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, value_name = "PNG")]
    input: PathBuf,
    #[arg(long, value_name = "PNG")]
    out: PathBuf,
    /// Style image (its amplitude spectrum or its colour statistics).
    #[arg(long, value_name = "PNG")]
    style: Option<PathBuf>,
    /// Fixed Fourier mixing rate; otherwise drawn from U(0, eta).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reference statistics file (mean_l ... std_b) for stain mode.
    #[arg(long, value_name = "FILE", conflicts_with = "style")]
    ref_stats: Option<PathBuf>,
    #[arg(long, default_value = "reinhard")]
    normalizer: String,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Probability that a patch's colour cast follows its class.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    domains: Option<usize>,
    #[arg(long)]
    per_domain: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Debug, Args, Default)]
struct HyperArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n_styles: Option<usize>,
    #[arg(long, value_parser = ["logits", "probs"])]
    mix_space: Option<String>,
    #[arg(long)]
    input_side: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Held-out domain (name or index); defaults to the first in eval.hold_outs.
    #[arg(long)]
    hold_out: Option<String>,
    #[arg(long, default_value = "clear")]
    method: Method,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// A PNG or a directory searched recursively for PNGs.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Dataset root whose patches serve as styles for marginalized prediction.
    #[arg(long, value_name = "DIR")]
    styles: Option<PathBuf>,
    /// Domain of the style root to leave out of the style pool.
    #[arg(long, requires = "styles")]
    hold_out: Option<String>,
    /// CSV output; stdout when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Held-out domains (names or indices, comma-separated); all by default.
    #[arg(long)]
    hold_out: Option<String>,
    /// Comma-separated methods.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the aligned text table here.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Side of the random query and style patches.
    #[arg(long, default_value_t = 16)]
    side: usize,
    #[command(flatten)]
    hyper: HyperArgs,
}

fn parse_assignment(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAIL } else { EXIT_OK };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_FAIL
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// Collect `(key, value)` overrides from optional flags.
#[derive(Default)]
struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn add<T: ToString>(mut self, key: &str, value: Option<T>) -> Self {
        if let Some(v) = value {
            self.0.push((key.to_string(), v.to_string()));
        }
        self
    }

    fn hyper(self, h: &HyperArgs) -> Self {
        self.add("train.epochs", h.epochs)
            .add("train.lr", h.lr)
            .add("train.batch_size", h.batch_size)
            .add("cpit.eta", h.eta)
            .add("cpit.gamma", h.gamma)
            .add("cpit.beta", h.beta)
            .add("cpit.n_styles", h.n_styles)
            .add("cpit.mix_space", h.mix_space.as_ref())
            .add("model.input_side", h.input_side)
            .add("model.hidden_dim", h.hidden_dim)
    }
}

fn resolve(cli: &Cli, flags: Overrides) -> Result<Config> {
    let mut all = cli.set.clone();
    all.extend(flags.0);
    let cfg = Config::resolve(cli.config.as_deref(), std::env::vars(), &all)?;
    eprintln!("# resolved config\n{}", cfg.to_toml().trim_end());
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Oracle(a) => oracle(cli, a),
        Command::Transform(a) => transform(cli, a),
        Command::GenData(a) => gen_data(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Predict(a) => predict_cmd(cli, a),
        Command::Eval(a) => eval_cmd(cli, a),
        Command::GradCheck(a) => grad_check_cmd(cli, a),
    }
}

fn oracle(cli: &Cli, a: &OracleArgs) -> Result<bool> {
    let cfg = resolve(cli, Overrides::default().add("seed", a.seed))?;
    eprintln!("seed: {}", cfg.seed);
    let mut out = std::io::stdout().lock();
    if let Some(path) = &a.scm {
        let model = scm::load_scm(path)?;
        return check_one_scm(&model, &mut out);
    }
    let report = scm::run_oracle(cfg.seed, a.trials, a.max_card)?;
    for (i, t) in report.trials.iter().enumerate() {
        writeln!(
            out,
            "trial {i:4}  cards C={} X={} S={} Y={}  max gap {:.3e}",
            t.cards[0], t.cards[1], t.cards[2], t.cards[3], t.max_gap
        )?;
    }
    let ok = report.passed();
    writeln!(
        out,
        "{}: {} trials, max gap {:.3e} (tolerance {:.0e})",
        if ok { "PASS" } else { "FAIL" },
        report.trials.len(),
        report.max_gap,
        report.tolerance
    )?;
    Ok(ok)
}

fn check_one_scm(model: &DiscreteScm, out: &mut impl Write) -> Result<bool> {
    for v in model.positivity_violations() {
        writeln!(out, "positivity violated: {v}")?;
    }
    let fmt = |d: &[f64]| {
        d.iter()
            .map(|p| format!("{p:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut worst = 0.0f64;
    for x in 0..model.card_x() {
        let truth = scm::interventional_truth(model, x)?;
        match scm::frontdoor_estimate(model, x) {
            Ok(fd) => {
                let gap = fd.linf_distance(&truth);
                worst = worst.max(gap);
                let obs = scm::observational(model, x)
                    .map(|d| fmt(d.probs()))
                    .unwrap_or_else(|_| "undefined".into());
                writeln!(out, "x={x}  observational [{obs}]")?;
                writeln!(out, "x={x}  do(x)         [{}]", fmt(truth.probs()))?;
                writeln!(
                    out,
                    "x={x}  front-door    [{}]  gap {gap:.3e}",
                    fmt(fd.probs())
                )?;
            }
            Err(Error::ZeroProbabilityEvidence { .. }) => {
                writeln!(out, "x={x}  P(x) = 0, skipped")?
            }
            Err(e) => return Err(e),
        }
    }
    if !model.is_positive() {
        writeln!(
            out,
            "note: the front-door identity is only guaranteed for positive models"
        )?;
    }
    let ok = worst < IDENTITY_TOL;
    writeln!(
        out,
        "{}: max gap {worst:.3e}",
        if ok { "PASS" } else { "FAIL" }
    )?;
    Ok(ok)
}

fn transform(cli: &Cli, a: &TransformArgs) -> Result<bool> {
    let cfg = resolve(
        cli,
        Overrides::default()
            .add("seed", a.seed)
            .add("cpit.eta", a.eta),
    )?;
    eprintln!("seed: {}", cfg.seed);
    let input = load_png(&a.input)?;
    let out = match a.mode {
        Mode::Fourier => {
            let style = a
                .style
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("fourier mode needs --style".into()))?;
            let style = load_png(style)?.resized(input.height(), input.width())?;
            let rate = match a.lambda {
                Some(l) => MixRate::new(l, if a.eta.is_some() { cfg.cpit.eta } else { 1.0 })?,
                None => MixRate::sample(cfg.cpit.eta, &mut seeded(cfg.seed))?,
            };
            eprintln!("lambda: {}", rate.lambda());
            fourier_mix(&input, &style, rate.lambda())?
        }
        Mode::Stain => {
            let normalizer = normalizer_by_name(&a.normalizer)?;
            let reference: LabStats = match (&a.style, &a.ref_stats) {
                (Some(p), _) => normalizer.fit(&load_png(p)?),
                (None, Some(p)) => load_ref_stats(p)?,
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "stain mode needs --style or --ref-stats".into(),
                    ))
                }
            };
            normalizer.normalize(&input, &reference)
        }
    };
    save_png(&out, &a.out)?;
    log::info!("wrote {}", a.out.display());
    Ok(true)
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<bool> {
    let cfg = resolve(
        cli,
        Overrides::default()
            .add("data.seed", a.seed)
            .add("data.confound_rho", a.rho)
            .add("data.num_domains", a.domains)
            .add("data.patches_per_domain", a.per_domain)
            .add("data.patch_side", a.side)
            .add("data.classes", a.classes),
    )?;
    eprintln!("seed: {}", cfg.data.seed);
    let domains = domain_presets(cfg.data.num_domains);
    let ds = generate(&cfg.data, &domains)?;
    let manifest = Manifest {
        generator: cfg.data,
        domains,
        records: ds.records.len(),
    };
    write_dataset(&ds, &a.out, Some(&manifest))?;
    println!(
        "wrote {} patches in {} domains to {}",
        ds.records.len(),
        ds.num_domains(),
        a.out.display()
    );
    Ok(true)
}

fn load_dataset(root: &Path) -> Result<Dataset> {
    let report = ingest(root)?;
    if !report.skipped.is_empty() {
        log::warn!(
            "{} file(s) could not be decoded and were skipped",
            report.skipped.len()
        );
    }
    log::info!(
        "loaded {} patches, {} domains, {} classes from {}",
        report.dataset.records.len(),
        report.dataset.num_domains(),
        report.dataset.num_classes(),
        root.display()
    );
    Ok(report.dataset)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<bool> {
    let cfg = resolve(
        cli,
        Overrides::default().add("seed", a.seed).hyper(&a.hyper),
    )?;
    eprintln!("seed: {}", cfg.seed);
    let ds = load_dataset(&a.data)?;
    let name = a
        .hold_out
        .clone()
        .or_else(|| cfg.eval.hold_outs.first().cloned())
        .ok_or_else(|| Error::InvalidParameter("--hold-out is required".into()))?;
    let hold_out = ds.domain_index(&name)?;
    let plan = crate::eval::ExperimentPlan {
        hold_outs: vec![hold_out],
        methods: vec![a.method],
        seeds: vec![cfg.seed],
        ..cfg.plan(&ds)?
    };
    let sp = split(&ds, hold_out, cfg.seed)?;
    let fitted = fit(&ds, &sp, a.method, cfg.seed, &plan)?;
    save_checkpoint(&fitted.checkpoint, &a.out)?;
    println!(
        "{} held out {}: best epoch {}, validation balanced accuracy {:.4}; saved {}",
        a.method,
        ds.domain_names[hold_out],
        fitted.best_epoch,
        fitted.val_balanced_accuracy,
        a.out.display()
    );
    Ok(true)
}

fn collect_pngs(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_pngs(&p, out)?;
        } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    Ok(())
}

fn predict_cmd(cli: &Cli, a: &PredictArgs) -> Result<bool> {
    let cfg = resolve(cli, Overrides::default().add("seed", a.seed))?;
    eprintln!("seed: {}", cfg.seed);
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let clf: &Classifier = &ckpt.classifier;
    let mix_cfg = ckpt.method.cpit_config(&ckpt.cpit);
    let styles = match (&a.styles, mix_cfg) {
        (Some(root), Some(_)) => {
            let ds = load_dataset(root)?;
            let skip = a
                .hold_out
                .as_deref()
                .map(|h| ds.domain_index(h))
                .transpose()?;
            let styles: Vec<(ImagePatch, usize)> = ds
                .records
                .into_iter()
                .filter(|r| Some(r.domain) != skip)
                .map(|r| (r.image, r.domain))
                .collect();
            Some(styles)
        }
        (Some(_), None) => {
            log::warn!(
                "{} does not marginalize over styles; --styles ignored",
                ckpt.method
            );
            None
        }
        (None, Some(_)) => {
            log::warn!("no --styles given; predicting from the untransformed input only");
            None
        }
        (None, None) => None,
    };

    let mut paths = Vec::new();
    collect_pngs(&a.input, &mut paths)?;
    let mut pools: Vec<((usize, usize), StylePool)> = Vec::new();
    let mut text = String::from("path,label");
    for k in 0..clf.num_classes() {
        text.push_str(&format!(",prob_{k}"));
    }
    text.push('\n');
    for (i, p) in paths.iter().enumerate() {
        let mut img = load_png(p)?;
        if let Some(reference) = &ckpt.reference {
            img = crate::stain::reinhard_normalize(&img, reference);
        }
        let pred = match (&styles, &mix_cfg) {
            (Some(styles), Some(mc)) => {
                let dims = img.dims();
                if !pools.iter().any(|(d, _)| *d == dims) {
                    pools.push((
                        dims,
                        StylePool::new(dims.0, dims.1, styles.iter().cloned())?,
                    ));
                }
                let pool = &pools
                    .iter()
                    .find(|(d, _)| *d == dims)
                    .expect("inserted above")
                    .1;
                predict(clf, &img, pool, mc, &mut derived(cfg.seed, &[i as u64]))?
            }
            _ => predict_plain(clf, &img),
        };
        let mut line = csv_field(&p.display().to_string());
        line.push_str(&format!(",{}", pred.label));
        for q in &pred.probs {
            line.push_str(&format!(",{q}"));
        }
        text.push_str(&line);
        text.push('\n');
    }
    match &a.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(true)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn eval_cmd(cli: &Cli, a: &EvalArgs) -> Result<bool> {
    let cfg = resolve(
        cli,
        Overrides::default()
            .add("eval.hold_outs", a.hold_out.as_ref())
            .add("eval.methods", a.methods.as_ref())
            .add("eval.seeds", a.seeds.as_ref())
            .hyper(&a.hyper),
    )?;
    let seeds: Vec<String> = cfg.eval.seeds.iter().map(|s| s.to_string()).collect();
    eprintln!("seeds: {}", seeds.join(","));
    let ds = load_dataset(&a.data)?;
    let plan = cfg.plan(&ds)?;
    let mut done: Vec<CellResult> = Vec::new();
    let table = match run_plan_with(&ds, &plan, |c| done.push(c.clone())) {
        Ok(t) => t,
        Err(e) => {
            let partial = ResultTable::from_cells(&done, &plan.seeds, &ds.domain_names);
            let mut f = std::fs::File::create(&a.out)?;
            partial.write_csv(&mut f)?;
            eprintln!(
                "wrote partial results ({} finished runs) to {}",
                done.len(),
                a.out.display()
            );
            return Err(e);
        }
    };
    table.write_csv(std::fs::File::create(&a.out)?)?;
    let text = table.to_text();
    if let Some(p) = &a.table {
        std::fs::write(p, &text)?;
    }
    print!("{text}");
    Ok(true)
}

fn grad_check_cmd(cli: &Cli, a: &GradCheckArgs) -> Result<bool> {
    use rand::Rng;
    let cfg = resolve(
        cli,
        Overrides::default().add("seed", a.seed).hyper(&a.hyper),
    )?;
    eprintln!("seed: {}", cfg.seed);
    if a.classes < 2 || a.side < 2 {
        return Err(Error::InvalidParameter(
            "grad-check needs --classes >= 2 and --side >= 2".into(),
        ));
    }
    let mut rng = seeded(cfg.seed);
    let patch = |rng: &mut crate::rng::SeededRng| {
        ImagePatch::from_fn(a.side, a.side, |_, _| {
            [(); 3].map(|_| rng.gen_range(0.05..1.0))
        })
    };
    let x = patch(&mut rng)?;
    let styles = (0..4)
        .map(|i| Ok((patch(&mut rng)?, i % 2)))
        .collect::<Result<Vec<_>>>()?;
    let pool = StylePool::new(a.side, a.side, styles)?;
    let label = rng.gen_range(0..a.classes);
    let hidden = if cfg.model.hidden_dim == 0 {
        8
    } else {
        cfg.model.hidden_dim
    };
    let mut ok = true;
    for h in [0, hidden] {
        for space in [MixSpace::Logits, MixSpace::Probs] {
            let clf = Classifier::random(cfg.model.input_side, h, a.classes, &mut rng)?;
            let mc = crate::model::CpitConfig {
                mix_space: space,
                ..cfg.cpit_config(cfg.seed)
            };
            let r = grad_check(&clf, (&x, label), &pool, &mc, &mut rng)?;
            let pass = r.passed();
            ok &= pass;
            println!(
                "hidden_dim={h:<3} mix_space={:<6} coordinates={:<4} max relative error {:.3e}  {}",
                format!("{space:?}").to_lowercase(),
                r.coordinates,
                r.max_rel_error,
                if pass { "PASS" } else { "FAIL" }
            );
        }
    }
    println!(
        "{}: tolerance {GRAD_CHECK_TOL:.0e}",
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_errors() {
        assert_eq!(run(["clear", "--help"]), EXIT_OK);
        assert_eq!(run(["clear", "eval", "--help"]), EXIT_OK);
        assert_eq!(run(["clear", "--bogus"]), EXIT_FAIL);
        assert_eq!(run(["clear", "oracle", "--trials", "x"]), EXIT_FAIL);
        assert_eq!(run(["clear"]), EXIT_FAIL);
    }

    #[test]
    fn validation_errors_exit_one() {
        assert_eq!(
            run(["clear", "--set", "cpit.gamma=2", "oracle", "--trials", "1"]),
            EXIT_FAIL
        );
        assert_eq!(
            run(["clear", "--set", "train.nope=2", "oracle", "--trials", "1"]),
            EXIT_FAIL
        );
    }

    #[test]
    fn runtime_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing");
        let code = run([
            "clear".as_ref(),
            "eval".as_ref(),
            "--data".as_ref(),
            missing.as_os_str(),
            "--out".as_ref(),
            dir.path().join("r.csv").as_os_str(),
        ]);
        assert_eq!(code, EXIT_RUNTIME);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a/b.png"), "a/b.png");
        assert_eq!(csv_field("a,b.png"), "\"a,b.png\"");
    }
}
