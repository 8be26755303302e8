use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cyclegan::datasets::{make_synthetic_pair, save_png, SyntheticKind};
use cyclegan::interface::LOSS_CSV_HEADER;

fn cyclegan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclegan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "\
resolution = 32
base_filters = 4
disc_filters = 4
residual_blocks = 1
epochs_constant = 1
epochs_decay = 1
buffer_size = 2
seed = 5
synthetic = invert
synthetic_train = 4
synthetic_eval = 2
triptychs = 2
";

/// Writes `TINY` plus `extra` as `name.cfg` under `dir`, with a relative
/// output directory `name`.
fn config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{name}.cfg"));
    fs::write(&path, format!("# test run\noutput_dir = {name}\n{TINY}{extra}")).unwrap();
    path
}

fn train(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let cfg = config(dir, name, extra);
    let o = cyclegan(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join(name)
}

#[test]
fn train_writes_checkpoints_and_loss_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train(tmp.path(), "run", "checkpoint_every = 1\n");
    for f in ["epoch_0001.cgck", "epoch_0002.cgck", "latest.cgck"] {
        assert!(out.join("checkpoints").join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("losses.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], LOSS_CSV_HEADER);
    assert_eq!(lines.len(), 1 + 8);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = train(tmp.path(), "a", "");
    let b = train(tmp.path(), "b", "");
    for f in ["losses.csv", "checkpoints/latest.cgck"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gan_only_has_no_cycle_term() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train(tmp.path(), "gan", "variant = gan_only\n");
    let csv = fs::read_to_string(out.join("losses.csv")).unwrap();
    let cyc = LOSS_CSV_HEADER.split(',').position(|c| c == "cyc").unwrap();
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(cyc), Some("0"), "{line}");
    }
}

#[test]
fn resume_continues_a_finished_half() {
    let tmp = tempfile::tempdir().unwrap();
    let full = train(tmp.path(), "full", "checkpoint_every = 1\n");
    let ckpt = full.join("checkpoints/epoch_0001.cgck");
    let resumed = train(
        tmp.path(),
        "resumed",
        &format!("checkpoint_every = 1\ncheckpoint = {}\n", ckpt.display()),
    );
    assert_eq!(
        fs::read(full.join("losses.csv")).unwrap(),
        fs::read(resumed.join("losses.csv")).unwrap()
    );
}

#[test]
fn translate_writes_one_image_per_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train(tmp.path(), "run", "");
    let (x, _, _) = make_synthetic_pair(SyntheticKind::Invert, 3, 32, 9).unwrap();
    let inputs = tmp.path().join("inputs");
    for (i, img) in x.samples().iter().enumerate() {
        save_png(&inputs.join(format!("img{i}.png")), img).unwrap();
    }
    let dest = tmp.path().join("translated");
    let ckpt = out.join("checkpoints/latest.cgck");
    let o = cyclegan(&[
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input-dir",
        inputs.to_str().unwrap(),
        "--direction",
        "y2x",
        "--output-dir",
        dest.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for i in 0..3 {
        assert!(dest.join(format!("img{i}_y2x.png")).is_file());
    }

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = cyclegan(&[
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input-dir",
        empty.to_str().unwrap(),
        "--direction",
        "x2y",
        "--output-dir",
        dest.to_str().unwrap(),
    ]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("no inputs"), "{}", stderr(&o));

    let (big, _, _) = make_synthetic_pair(SyntheticKind::Invert, 1, 64, 9).unwrap();
    let wrong = tmp.path().join("wrong");
    save_png(&wrong.join("big.png"), big.get(0)).unwrap();
    let o = cyclegan(&[
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input-dir",
        wrong.to_str().unwrap(),
        "--direction",
        "x2y",
        "--output-dir",
        dest.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("64×64"));
}

#[test]
fn eval_reports_are_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train(tmp.path(), "run", "");
    let cfg = tmp.path().join("run.cfg");
    let o = cyclegan(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read(out.join("eval/metrics.txt")).unwrap();
    let csv = fs::read(out.join("eval/metrics.csv")).unwrap();
    assert!(String::from_utf8_lossy(&text).contains("translation_error_xy"));
    assert!(out.join("eval/triptychs/grid.png").is_file());
    let o = cyclegan(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("eval/metrics.txt")).unwrap(), text);
    assert_eq!(fs::read(out.join("eval/metrics.csv")).unwrap(), csv);
}

#[test]
fn eval_without_oracle_omits_translation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (x, y, _) = make_synthetic_pair(SyntheticKind::Invert, 4, 32, 2).unwrap();
    for (dir, ds) in [("x", &x), ("y", &y)] {
        for (i, img) in ds.samples().iter().enumerate() {
            save_png(&tmp.path().join(dir).join(format!("{i}.png")), img).unwrap();
        }
    }
    let body = TINY.replace("synthetic = invert\n", "train_x = x\ntrain_y = y\n");
    let cfg = tmp.path().join("dirs.cfg");
    fs::write(&cfg, format!("output_dir = out\n{body}")).unwrap();
    let o = cyclegan(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = cyclegan(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("out/eval/metrics.txt")).unwrap();
    assert!(text.contains("cycle_error_x"));
    assert!(!text.contains("translation_error"));
}

#[test]
fn ablate_reports_five_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "abl", "");
    let o = cyclegan(&["ablate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("abl/ablation/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    for v in ["full", "gan_only", "cycle_only", "gan_forward", "gan_backward"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{v},"))), "{v}");
        assert!(tmp.path().join("abl/ablation/triptychs").join(v).is_dir());
    }
}

#[test]
fn bad_config_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "output_dir = out\nsynthetic = invert\nlearning_rate = 3\n").unwrap();
    let o = cyclegan(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&cyclegan(&["train"])), 1);
    assert_eq!(code(&cyclegan(&["frobnicate"])), 1);
    assert_eq!(code(&cyclegan(&["--help"])), 0);
}

#[test]
fn corrupt_checkpoint_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = tmp.path().join("junk.cgck");
    fs::write(&ckpt, b"CGCKjunk").unwrap();
    let o = cyclegan(&[
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input-dir",
        tmp.path().to_str().unwrap(),
        "--direction",
        "x2y",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn gradcheck_passes() {
    let o = cyclegan(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("generator_discriminator"));
    assert!(!table.contains("FAIL"));
}
