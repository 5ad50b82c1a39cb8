pub mod augment;
pub mod colorize;
pub mod eval;
pub mod segment;
pub mod synth;
pub mod train;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use emflow::{resize_bilinear, FlowField};
use rayon::prelude::*;

use crate::files::write_atomic;
use crate::settings::{key, opt_string, parse_dims, Key, Settings};
use crate::{ModelArgs, RunArgs};

/// Some frames of a multi-frame run failed; details already went to stderr.
#[derive(Debug)]
pub struct FrameFailures {
    pub failed: usize,
    pub total: usize,
    /// At least one failure was I/O or input related rather than numerical.
    pub io: bool,
}

impl fmt::Display for FrameFailures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {} inputs failed", self.failed, self.total)
    }
}

impl std::error::Error for FrameFailures {}

pub const RUN_KEYS: [Key; 2] = [key("jobs", "0"), key("manifest", "")];

pub const MODEL_KEYS: [Key; 7] = [
    key("k", "2"),
    key("alpha", "0.01"),
    key("model", "quadratic"),
    key("dist", "l1"),
    key("seed", "0"),
    key("resize", ""),
    key("out_dir", "."),
];

pub fn run_flags(run: &RunArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("jobs", opt_string(&run.jobs)),
        ("manifest", run.manifest.as_ref().map(|p| p.display().to_string())),
    ]
}

pub fn model_flags(m: &ModelArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("k", opt_string(&m.k)),
        ("alpha", opt_string(&m.alpha)),
        ("model", opt_string(&m.model)),
        ("dist", opt_string(&m.dist)),
        ("seed", opt_string(&m.seed)),
        ("resize", m.resize.clone()),
        ("out_dir", m.out_dir.as_ref().map(|p| p.display().to_string())),
    ]
}

/// Replaces `jobs = 0` by the thread count actually used.
pub fn resolve_jobs(s: &mut Settings) -> Result<usize> {
    let mut jobs: usize = s.get("jobs")?;
    if jobs == 0 {
        jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    }
    s.set("jobs", jobs.to_string());
    Ok(jobs)
}

pub fn maybe_resize(s: &Settings, f: FlowField<f64>) -> Result<FlowField<f64>> {
    Ok(match s.get_opt::<String>("resize")? {
        Some(dims) => {
            let (w, h) = parse_dims(&dims)?;
            resize_bilinear(&f, w, h)
        }
        None => f,
    })
}

/// Runs `work` on every input inside a pool of `jobs` threads. Failures are
/// reported per input; the outputs of the successful ones are returned in
/// input order.
pub fn for_each_frame<F>(jobs: usize, inputs: &[PathBuf], work: F) -> Result<Vec<PathBuf>>
where
    F: Fn(usize, &Path) -> Result<Vec<PathBuf>> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker threads")?;
    let results: Vec<Result<Vec<PathBuf>>> = pool.install(|| inputs.par_iter().enumerate().map(|(i, p)| work(i, p)).collect());
    let mut produced = Vec::new();
    let mut failed = 0;
    let mut io = false;
    for (path, r) in inputs.iter().zip(results) {
        match r {
            Ok(mut paths) => produced.append(&mut paths),
            Err(e) => {
                eprintln!("emflow: {}: {e:#}", path.display());
                failed += 1;
                io |= crate::exit_code(&e) == 2;
            }
        }
    }
    if failed > 0 {
        return Err(FrameFailures {
            failed,
            total: inputs.len(),
            io,
        }
        .into());
    }
    Ok(produced)
}

/// Writes the manifest, to `manifest` if set or else `default_path`.
pub fn finish(s: &Settings, default_path: PathBuf, inputs: &[PathBuf], produced: &[PathBuf], start: Instant) -> Result<()> {
    let path = s.get_opt::<PathBuf>("manifest")?.unwrap_or(default_path);
    let mut s = s.clone();
    s.set("manifest", path.display().to_string());
    let text = s.manifest(inputs, produced, start.elapsed().as_secs_f64());
    write_atomic(&path, text.as_bytes())
}

/// Input stems must be distinct when outputs share a directory.
pub fn check_unique_stems(inputs: &[PathBuf]) -> Result<Vec<String>> {
    let stems = inputs.iter().map(|p| crate::files::stem(p)).collect::<Result<Vec<_>>>()?;
    let mut sorted = stems.clone();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        anyhow::bail!("two inputs share the name `{}`; outputs would collide", w[0]);
    }
    Ok(stems)
}
