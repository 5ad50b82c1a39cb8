use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use emflow::eval::{select_fg_multimask_gt, select_fg_two_mask};
use emflow::{aggregate, jaccard, BinaryMask, Protocol, SequenceScore};
use rayon::prelude::*;

use super::{finish, resolve_jobs, run_flags, RUN_KEYS};
use crate::files::{find_pgms, load_pgm, manifest_for, write_atomic};
use crate::settings::{key, Key, Settings};
use crate::EvalArgs;

const KEYS: [Key; 5] = [
    key("pred_dir", ""),
    key("gt_dir", ""),
    key("protocol", "per-sequence"),
    key("select", "two-mask"),
    key("out", "jaccard.csv"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Selection {
    TwoMask,
    GtOverlap,
}

fn parse_selection(s: &str) -> Result<Selection> {
    match s {
        "two-mask" => Ok(Selection::TwoMask),
        "gt-overlap" => Ok(Selection::GtOverlap),
        other => bail!("unknown selection `{other}` (two-mask or gt-overlap)"),
    }
}

struct FrameScore {
    sequence: String,
    frame: String,
    jaccard: f64,
}

fn score_frame(pred_dir: &Path, gt_dir: &Path, rel: &Path, select: Selection) -> Result<FrameScore> {
    let name = rel.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let frame = name.strip_suffix(".labels").unwrap_or(&name).to_string();
    let parent = rel.parent().unwrap_or(Path::new(""));
    let sequence = if parent.as_os_str().is_empty() {
        ".".to_string()
    } else {
        parent.display().to_string()
    };
    let pred = load_pgm(&pred_dir.join(rel))?;
    let gt_path = gt_dir.join(parent).join(format!("{frame}.pgm"));
    let gt = BinaryMask::from_gray(&load_pgm(&gt_path)?);
    let fg = match select {
        Selection::TwoMask => {
            if pred.max_label().unwrap_or(0) > 1 {
                bail!("{}: more than two labels; use --select gt-overlap", rel.display());
            }
            select_fg_two_mask(&pred)
        }
        Selection::GtOverlap => {
            let k = pred.max_label().map_or(1, |m| m as usize + 1);
            select_fg_multimask_gt(&pred, k, &gt).with_context(|| format!("{}", rel.display()))?
        }
    };
    let j = jaccard(&fg, &gt).with_context(|| format!("{} vs {}", rel.display(), gt_path.display()))?;
    Ok(FrameScore {
        sequence,
        frame,
        jaccard: j,
    })
}

pub fn run(a: EvalArgs) -> Result<()> {
    let start = Instant::now();
    let schema: Vec<Key> = KEYS.iter().chain(&RUN_KEYS).copied().collect();
    let path_flag = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let mut flags = vec![
        ("pred_dir", path_flag(&a.pred_dir)),
        ("gt_dir", path_flag(&a.gt_dir)),
        ("protocol", a.protocol.clone()),
        ("select", a.select.clone()),
        ("out", path_flag(&a.out)),
    ];
    flags.extend(run_flags(&a.run));
    let mut s = Settings::resolve("eval", &schema, a.run.config.as_deref(), flags)?;
    let pred_dir: PathBuf = s.get_opt("pred_dir")?.context("missing prediction directory")?;
    let gt_dir: PathBuf = s.get_opt("gt_dir")?.context("missing ground-truth directory")?;
    let protocol: Protocol = s.get("protocol")?;
    let select = parse_selection(s.raw("select"))?;
    let out: PathBuf = s.get("out")?;
    let jobs = resolve_jobs(&mut s)?;

    let rels: Vec<PathBuf> = find_pgms(&pred_dir)?;
    if rels.is_empty() {
        bail!("no .pgm files under {}", pred_dir.display());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let scores: Vec<FrameScore> = pool.install(|| {
        rels.par_iter()
            .map(|rel| score_frame(&pred_dir, &gt_dir, rel, select))
            .collect::<Result<_>>()
    })?;

    let mut csv = String::from("sequence,frame,jaccard\n");
    let mut by_seq: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for f in &scores {
        csv.push_str(&format!("{},{},{}\n", f.sequence, f.frame, f.jaccard));
        by_seq.entry(&f.sequence).or_default().push(f.jaccard);
    }
    let sequences: Vec<SequenceScore> = by_seq.into_iter().map(|(n, v)| SequenceScore::new(n, v)).collect();
    let mean = aggregate(&sequences, protocol)?;
    write_atomic(&out, csv.as_bytes())?;
    println!(
        "J = {mean:.6} ({protocol} mean over {} sequences, {} frames)",
        sequences.len(),
        scores.len()
    );
    finish(&s, manifest_for(&out), &[pred_dir.clone(), gt_dir.clone()], std::slice::from_ref(&out), start)
}
