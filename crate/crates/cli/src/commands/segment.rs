use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use emflow::io::{write_theta_csv, write_trace_csv};
use emflow::{em_segment, hard_assign, write_pgm, DistanceKind, EmConfig, ModelKind};

use super::{check_unique_stems, finish, for_each_frame, maybe_resize, model_flags, resolve_jobs, run_flags, MODEL_KEYS, RUN_KEYS};
use crate::files::{load_flow, sibling, write_atomic};
use crate::settings::{key, opt_string, Key, Settings};
use crate::SegmentArgs;

const KEYS: [Key; 4] = [
    key("inits", "10"),
    key("max_iters", "100"),
    key("rel_tol", "1e-6"),
    key("init_scale", "0.5"),
];

pub fn settings(a: &SegmentArgs) -> Result<Settings> {
    let schema: Vec<Key> = MODEL_KEYS.iter().chain(&KEYS).chain(&RUN_KEYS).copied().collect();
    let mut flags = model_flags(&a.model);
    flags.extend([
        ("inits", opt_string(&a.inits)),
        ("max_iters", opt_string(&a.max_iters)),
        ("rel_tol", opt_string(&a.rel_tol)),
        ("init_scale", opt_string(&a.init_scale)),
    ]);
    flags.extend(run_flags(&a.run));
    Settings::resolve("segment", &schema, a.run.config.as_deref(), flags)
}

pub fn em_config(s: &Settings) -> Result<EmConfig<f64>> {
    let cfg = EmConfig {
        k: s.get("k")?,
        alpha: s.get("alpha")?,
        kind: s.get::<ModelKind>("model")?,
        dist: s.get::<DistanceKind>("dist")?,
        max_iters: s.get("max_iters")?,
        rel_tol: s.get("rel_tol")?,
        n_inits: s.get("inits")?,
        seed: s.get("seed")?,
        init_scale: s.get("init_scale")?,
        ..EmConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(a: SegmentArgs) -> Result<()> {
    let start = Instant::now();
    let mut s = settings(&a)?;
    let inputs = s.inputs(&a.inputs)?;
    let cfg = em_config(&s)?;
    let jobs = resolve_jobs(&mut s)?;
    let out_dir: PathBuf = s.get("out_dir")?;
    let stems = check_unique_stems(&inputs)?;
    let produced = for_each_frame(jobs, &inputs, |i, path| {
        let flow = maybe_resize(&s, load_flow(path)?)?;
        let res = em_segment(&flow, &cfg).context("segmentation failed")?;
        let stem = &stems[i];
        let labels = sibling(&out_dir, stem, ".labels.pgm");
        let theta = sibling(&out_dir, stem, ".theta.csv");
        let ll = sibling(&out_dir, stem, ".ll.csv");
        write_atomic(&labels, &write_pgm(&hard_assign(&res.seg)))?;
        write_atomic(&theta, write_theta_csv(&res.model).as_bytes())?;
        write_atomic(&ll, write_trace_csv("iteration", "ll", &res.ll_trace).as_bytes())?;
        Ok(vec![labels, theta, ll])
    })?;
    finish(&s, out_dir.join("segment.manifest"), &inputs, &produced, start)
}
