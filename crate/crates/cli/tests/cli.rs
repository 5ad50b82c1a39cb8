use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emflow::io::read_theta_csv;
use emflow::*;

const SPEC: &str = "\
width = 80
height = 56
model = quadratic
noise = 0
seed = 3
layer = rest; 0.6 0.2 -0.1 0.1 0 -0.05 -0.3 0.1 0.2 0 0.05 0.1
layer = ellipse 44 26 16 12; -1.8 0.1 0.3 -0.2 0.1 0.1 1.2 -0.2 0 0.1 -0.1 0
";

fn emflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = emflow(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path) -> PathBuf {
    fs::write(dir.join("scene.synth"), SPEC).unwrap();
    ok(dir, &["synth", "scene.synth"]);
    dir.join("scene.flo")
}

fn mask_of(path: &Path) -> BinaryMask {
    let labels = read_pgm(&fs::read(path).unwrap()).unwrap();
    emflow::eval::select_fg_two_mask(&labels)
}

#[test]
fn segment_recovers_synthetic_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(dir.path(), &["segment", "scene.flo", "--out-dir", "out", "--dist", "sql2", "--inits", "6"]);
    let gt = BinaryMask::from_gray(&read_pgm(&fs::read(dir.path().join("scene.gt.pgm")).unwrap()).unwrap());
    let pred = mask_of(&dir.path().join("out/scene.labels.pgm"));
    assert!(jaccard(&pred, &gt).unwrap() >= 0.99);
    let model: MotionModel64 = read_theta_csv(&fs::read_to_string(dir.path().join("out/scene.theta.csv")).unwrap()).unwrap();
    assert_eq!((model.k(), model.kind()), (2, ModelKind::FullQuadratic));
    let ll = fs::read_to_string(dir.path().join("out/scene.ll.csv")).unwrap();
    assert!(ll.starts_with("iteration,ll\n"));
}

#[test]
fn segment_is_deterministic_and_replayable_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let d = dir.path();
    ok(d, &["segment", "scene.flo", "-o", "a", "--inits", "3", "--seed", "9", "--jobs", "1"]);
    ok(d, &["segment", "scene.flo", "-o", "b", "--inits", "3", "--seed", "9", "--jobs", "3"]);
    ok(d, &["segment", "--config", "a/segment.manifest", "-o", "c", "--manifest", "c.manifest"]);
    for name in ["scene.labels.pgm", "scene.theta.csv", "scene.ll.csv"] {
        let a = fs::read(d.join("a").join(name)).unwrap();
        assert_eq!(a, fs::read(d.join("b").join(name)).unwrap(), "{name}");
        assert_eq!(a, fs::read(d.join("c").join(name)).unwrap(), "{name}");
    }
    let manifest = fs::read_to_string(d.join("c.manifest")).unwrap();
    assert!(manifest.contains("seed = 9") && manifest.contains("inits = 3"));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    fs::write(dir.path().join("run.cfg"), "k = 3\ninits = 2\nmodel = affine\n").unwrap();
    ok(dir.path(), &["segment", "scene.flo", "--config", "run.cfg", "--k", "2", "-o", "o"]);
    let manifest = fs::read_to_string(dir.path().join("o/segment.manifest")).unwrap();
    assert!(manifest.contains("k = 2\n"));
    assert!(manifest.contains("inits = 2\n"));
    assert!(manifest.contains("model = affine\n"));
    assert!(manifest.contains("dist = l1\n"));
}

#[test]
fn bad_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = emflow(dir.path(), &["segment", "missing.flo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.flo"));

    fs::write(dir.path().join("junk.flo"), b"not a flow file").unwrap();
    assert_eq!(emflow(dir.path(), &["segment", "junk.flo"]).status.code(), Some(2));

    fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    synth(dir.path());
    assert_eq!(
        emflow(dir.path(), &["segment", "scene.flo", "--config", "bad.cfg"]).status.code(),
        Some(2)
    );
    assert_eq!(emflow(dir.path(), &["segment", "scene.flo", "--dist", "l7"]).status.code(), Some(2));
}

#[test]
fn augment_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    ok(d, &["augment", "scene.flo", "-o", "zero.flo", "--range-const", "0", "--range-linear", "0", "--range-quad", "0"]);
    assert_eq!(fs::read(d.join("zero.flo")).unwrap(), fs::read(d.join("scene.flo")).unwrap());

    ok(d, &["augment", "scene.flo", "-o", "aug.flo", "--seed", "4"]);
    ok(d, &["augment", "scene.flo", "-o", "aug2.flo", "--seed", "4"]);
    let theta = fs::read_to_string(d.join("aug.theta.csv")).unwrap();
    assert_eq!(theta, fs::read_to_string(d.join("aug2.theta.csv")).unwrap());

    let model: MotionModel64 = read_theta_csv(&theta).unwrap();
    let orig: FlowField64 = read_flo(&fs::read(d.join("scene.flo")).unwrap()).unwrap();
    let aug: FlowField64 = read_flo(&fs::read(d.join("aug.flo")).unwrap()).unwrap();
    let back = aug.sub(&model.render(0, orig.dims())).unwrap();
    for (a, b) in back.vectors().iter().zip(orig.vectors()) {
        assert!((a[0] - b[0]).abs() <= 1e-6 && (a[1] - b[1]).abs() <= 1e-6);
    }
}

#[test]
fn train_toy_writes_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(dir.path(), &["train-toy", "scene.flo", "--dist", "sql2", "--epochs", "40", "-o", "t"]);
    let text = fs::read_to_string(dir.path().join("t/scene.loss.csv")).unwrap();
    let (header, rows) = emflow::io::read_numeric_csv(&text).unwrap();
    assert_eq!(header, vec!["epoch", "loss_before_fit", "loss_after_fit"]);
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r[2] <= r[1] + 1e-9));
    assert!(dir.path().join("t/scene.labels.pgm").exists());
    assert!(dir.path().join("t/train-toy.manifest").exists());
}

fn write_mask(path: &Path, w: usize, h: usize, fg: impl Fn(usize, usize) -> bool, on: u8) {
    let labels = (0..w * h).map(|i| if fg(i % w, i / w) { on } else { 0 }).collect();
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, write_pgm(&LabelMap::new(w, h, labels).unwrap())).unwrap();
}

#[test]
fn eval_protocols_at_file_level() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // sequence a: one perfect frame; sequence b: two frames at 1/3 and 0
    let left = |x: usize, _| x < 2;
    write_mask(&d.join("gt/a/f0.pgm"), 8, 4, left, 255);
    write_mask(&d.join("pred/a/f0.labels.pgm"), 8, 4, left, 1);
    write_mask(&d.join("gt/b/f0.pgm"), 8, 4, left, 255);
    write_mask(&d.join("pred/b/f0.labels.pgm"), 8, 4, |x, _| x == 1 || x == 2, 1);
    write_mask(&d.join("gt/b/f1.pgm"), 8, 4, left, 255);
    write_mask(&d.join("pred/b/f1.labels.pgm"), 8, 4, |x, _| x >= 6, 1);

    let out = ok(d, &["eval", "pred", "gt", "-o", "scores.csv"]);
    let summary = String::from_utf8_lossy(&out.stdout);
    // per-sequence: mean(1, mean(1/3, 0)) = 7/12
    assert!(summary.contains("J = 0.583333"), "{summary}");
    let csv = fs::read_to_string(d.join("scores.csv")).unwrap();
    assert!(csv.starts_with("sequence,frame,jaccard\na,f0,1\n"), "{csv}");

    let out = ok(d, &["eval", "pred", "gt", "--protocol", "per-frame", "-o", "scores2.csv"]);
    // per-frame: (1 + 1/3 + 0) / 3 = 4/9
    assert!(String::from_utf8_lossy(&out.stdout).contains("J = 0.444444"));

    fs::remove_file(d.join("gt/b/f1.pgm")).unwrap();
    let out = emflow(d, &["eval", "pred", "gt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("f1.pgm"));
}

#[test]
fn colorize_flow_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("still.flo"), write_flo(&FlowField64::zeros(5, 3))).unwrap();
    ok(d, &["colorize", "still.flo"]);
    let img = read_ppm(&fs::read(d.join("still.ppm")).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (5, 3));
    assert!(img.pixels.iter().all(|&p| p == 255));

    let right = FlowField64::from_fn(4, 2, |_, _| [1.0, 0.0]);
    fs::write(d.join("right.flo"), write_flo(&right)).unwrap();
    ok(d, &["colorize", "right.flo", "-o", "right.ppm", "--max-mag", "1"]);
    let img = read_ppm(&fs::read(d.join("right.ppm")).unwrap()).unwrap();
    assert_eq!(img.pixel(0, 0), [255, 0, 0]);

    write_mask(&d.join("labels.pgm"), 4, 4, |x, _| x < 2, 1);
    ok(d, &["colorize", "labels.pgm", "-o", "labels.ppm"]);
    let img = read_ppm(&fs::read(d.join("labels.ppm")).unwrap()).unwrap();
    let pal = emflow::color::palette(2);
    assert_eq!(img.pixel(0, 0), pal[1]);
    assert_eq!(img.pixel(3, 3), pal[0]);
}

#[test]
fn synth_rejects_overlaps() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.synth"),
        "width = 8\nheight = 8\nmodel = affine\nlayer = rect 0 0 5 8; 0 0 0 0 0 0\nlayer = rect 4 0 8 8; 1 0 0 0 0 0\n",
    )
    .unwrap();
    let out = emflow(dir.path(), &["synth", "bad.synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(4, 0)"));
}
