use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use emflow::io::write_theta_csv;
use emflow::{hard_assign, train_toy, write_pgm, DistanceKind, ModelKind, TrainConfig, TrainStep};

use super::{check_unique_stems, finish, for_each_frame, maybe_resize, model_flags, resolve_jobs, run_flags, MODEL_KEYS, RUN_KEYS};
use crate::files::{load_flow, sibling, write_atomic};
use crate::settings::{key, opt_string, Key, Settings};
use crate::TrainArgs;

const KEYS: [Key; 4] = [
    key("epochs", "200"),
    key("grad_steps", "10"),
    key("lr", "0.05"),
    key("init_sd", "0.01"),
];

pub fn settings(a: &TrainArgs) -> Result<Settings> {
    let schema: Vec<Key> = MODEL_KEYS.iter().chain(&KEYS).chain(&RUN_KEYS).copied().collect();
    let mut flags = model_flags(&a.model);
    flags.extend([
        ("epochs", opt_string(&a.epochs)),
        ("grad_steps", opt_string(&a.grad_steps)),
        ("lr", opt_string(&a.lr)),
        ("init_sd", opt_string(&a.init_sd)),
    ]);
    flags.extend(run_flags(&a.run));
    Settings::resolve("train-toy", &schema, a.run.config.as_deref(), flags)
}

pub fn train_config(s: &Settings) -> Result<TrainConfig<f64>> {
    let cfg = TrainConfig {
        k: s.get("k")?,
        epochs: s.get("epochs")?,
        grad_steps_per_epoch: s.get("grad_steps")?,
        lr: s.get("lr")?,
        alpha: s.get("alpha")?,
        kind: s.get::<ModelKind>("model")?,
        dist: s.get::<DistanceKind>("dist")?,
        seed: s.get("seed")?,
        init_sd: s.get("init_sd")?,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn loss_csv(trace: &[TrainStep<f64>]) -> String {
    let mut out = String::from("epoch,loss_before_fit,loss_after_fit\n");
    for t in trace {
        out.push_str(&format!("{},{},{}\n", t.epoch, t.loss_before_fit, t.loss_after_fit));
    }
    out
}

pub fn run(a: TrainArgs) -> Result<()> {
    let start = Instant::now();
    let mut s = settings(&a)?;
    let inputs = s.inputs(&a.inputs)?;
    let cfg = train_config(&s)?;
    let jobs = resolve_jobs(&mut s)?;
    let out_dir: PathBuf = s.get("out_dir")?;
    let stems = check_unique_stems(&inputs)?;
    let produced = for_each_frame(jobs, &inputs, |i, path| {
        let flow = maybe_resize(&s, load_flow(path)?)?;
        let res = train_toy(&flow, &cfg).context("training failed")?;
        let labels = sibling(&out_dir, &stems[i], ".labels.pgm");
        let theta = sibling(&out_dir, &stems[i], ".theta.csv");
        let loss = sibling(&out_dir, &stems[i], ".loss.csv");
        write_atomic(&labels, &write_pgm(&hard_assign(&res.seg)))?;
        write_atomic(&theta, write_theta_csv(&res.model).as_bytes())?;
        write_atomic(&loss, loss_csv(&res.trace).as_bytes())?;
        Ok(vec![labels, theta, loss])
    })?;
    finish(&s, out_dir.join("train-toy.manifest"), &inputs, &produced, start)
}
