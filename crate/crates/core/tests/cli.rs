use std::path::Path;
use std::process::{Command, Output};

use clear::datagen::ingest;
use clear::image::{load_png, save_png, ImagePatch};

fn clear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clear"))
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("CLEAR_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_data(dir: &Path) {
    let o = clear(&[
        "-q",
        "gen-data",
        "--out",
        s(dir),
        "--per-domain",
        "24",
        "--side",
        "16",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn help_and_usage_errors() {
    let o = clear(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in [
        "oracle",
        "transform",
        "gen-data",
        "train",
        "predict",
        "eval",
        "grad-check",
    ] {
        assert!(stdout(&o).contains(sub), "help lists {sub}");
    }
    assert_eq!(clear(&["oracle", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(clear(&[]).status.code(), Some(1));
    assert_eq!(
        clear(&["--set", "train.lr=-1", "oracle", "--trials", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn oracle_passes_and_prints_seed() {
    let o = clear(&["oracle", "--trials", "100", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().last().unwrap().starts_with("PASS"));
    assert!(stderr(&o).contains("seed: 7"));
    assert!(stderr(&o).contains("[cpit]"));
}

#[test]
fn precedence_file_env_flag() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "seed = 1\n[train]\nepochs = 3\nlr = 0.5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_clear"))
        .args([
            "--config",
            s(&file),
            "--set",
            "train.lr=0.25",
            "oracle",
            "--trials",
            "1",
            "--seed",
            "9",
        ])
        .env("CLEAR_TRAIN_EPOCHS", "5")
        .env("CLEAR_TRAIN_LR", "0.125")
        .env("CLEAR_SEED", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("epochs = 5"), "env beats file");
    assert!(err.contains("lr = 0.25"), "flag beats env");
    assert!(err.contains("seed: 9"), "flag beats env seed");

    let bad = Command::new(env!("CARGO_BIN_EXE_clear"))
        .args(["oracle", "--trials", "1"])
        .env("CLEAR_TRAIN_NO_SUCH_KEY", "1")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn missing_input_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = clear(&[
        "train",
        "--data",
        s(&dir.path().join("absent")),
        "--hold-out",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_data(&data);
    let ds = ingest(&data).unwrap().dataset;
    assert_eq!(ds.records.len(), 72);
    assert_eq!(ds.num_domains(), 3);

    let ckpt = dir.path().join("model.json");
    let o = clear(&[
        "-q",
        "train",
        "--data",
        s(&data),
        "--hold-out",
        "domain1",
        "--method",
        "clear",
        "--epochs",
        "2",
        "--out",
        s(&ckpt),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("best epoch"));

    let held = data.join("domain1");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = clear(&[
            "-q",
            "predict",
            "--checkpoint",
            s(&ckpt),
            "--input",
            s(&held),
            "--styles",
            s(&data),
            "--hold-out",
            "domain1",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out).unwrap()
    };
    let csv = run("a.csv");
    assert_eq!(csv, run("b.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("path,label,prob_0,prob_1"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 24);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let p: f64 = f[2].parse::<f64>().unwrap() + f[3].parse::<f64>().unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }
}

#[test]
fn train_checkpoint_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_data(&data);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = clear(&[
            "-q",
            "train",
            "--data",
            s(&data),
            "--hold-out",
            "0",
            "--epochs",
            "2",
            "--seed",
            "3",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn transforms_write_deterministic_pngs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    let style = dir.path().join("style.png");
    save_png(
        &ImagePatch::from_fn(20, 12, |r, c| [r as f64 / 20.0, c as f64 / 12.0, 0.5]).unwrap(),
        &input,
    )
    .unwrap();
    save_png(
        &ImagePatch::from_fn(10, 10, |r, c| {
            [0.8, 0.3 + 0.02 * r as f64, 0.6 - 0.03 * c as f64]
        })
        .unwrap(),
        &style,
    )
    .unwrap();

    let run = |mode: &str, name: &str| {
        let out = dir.path().join(name);
        let o = clear(&[
            "-q",
            "transform",
            "--mode",
            mode,
            "--input",
            s(&input),
            "--style",
            s(&style),
            "--seed",
            "5",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    for mode in ["fourier", "stain"] {
        let a = run(mode, &format!("{mode}_a.png"));
        assert_eq!(a, run(mode, &format!("{mode}_b.png")));
        let img = load_png(&dir.path().join(format!("{mode}_a.png"))).unwrap();
        assert_eq!(img.dims(), (20, 12));
    }

    let o = clear(&[
        "-q",
        "transform",
        "--mode",
        "fourier",
        "--input",
        s(&input),
        "--style",
        s(&style),
        "--lambda",
        "0",
        "--out",
        s(&dir.path().join("id.png")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let same = load_png(&dir.path().join("id.png")).unwrap();
    assert!(same.max_abs_diff(&load_png(&input).unwrap()) < 1.5 / 255.0);
}

#[test]
fn grad_check_passes() {
    let o = clear(&["-q", "grad-check", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}
