use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use emflow::{synth_flow, write_flo, write_pgm, LabelMap, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{finish, run_flags, RUN_KEYS};
use crate::files::{manifest_for, read_text, stem, write_atomic};
use crate::settings::{key, opt_string, Key, Settings};
use crate::SynthArgs;

const KEYS: [Key; 5] = [
    key("flow_out", ""),
    key("gt_out", ""),
    key("labels_out", ""),
    key("seed", ""),
    key("noise", ""),
];

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

pub fn run(a: SynthArgs) -> Result<()> {
    let start = Instant::now();
    let schema: Vec<Key> = KEYS.iter().chain(&RUN_KEYS).copied().collect();
    let mut flags = vec![
        ("flow_out", path_flag(&a.flow_out)),
        ("gt_out", path_flag(&a.gt_out)),
        ("labels_out", path_flag(&a.labels_out)),
        ("seed", opt_string(&a.seed)),
        ("noise", opt_string(&a.noise)),
    ];
    flags.extend(run_flags(&a.run));
    let mut s = Settings::resolve("synth", &schema, a.run.config.as_deref(), flags)?;
    let inputs = s.inputs(a.spec.as_slice())?;
    anyhow::ensure!(inputs.len() == 1, "synth takes exactly one spec file");
    let spec_path = &inputs[0];
    let mut spec = SynthSpec::<f64>::parse(&read_text(spec_path)?).with_context(|| format!("{}", spec_path.display()))?;
    if let Some(seed) = s.get_opt("seed")? {
        spec.seed = seed;
    }
    if let Some(noise) = s.get_opt("noise")? {
        spec.noise = noise;
    }
    s.set("seed", spec.seed.to_string());
    s.set("noise", spec.noise.to_string());
    let name = stem(spec_path)?;
    let flow_out = s
        .get_opt::<PathBuf>("flow_out")?
        .unwrap_or_else(|| spec_path.with_file_name(format!("{name}.flo")));
    let gt_out = s
        .get_opt::<PathBuf>("gt_out")?
        .unwrap_or_else(|| spec_path.with_file_name(format!("{name}.gt.pgm")));
    s.set("flow_out", flow_out.display().to_string());
    s.set("gt_out", gt_out.display().to_string());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (flow, labels) = synth_flow(&spec.layers, spec.kind, (spec.width, spec.height), spec.noise, &mut rng)
        .with_context(|| format!("{}", spec_path.display()))?;
    let gt = LabelMap::new(
        labels.width,
        labels.height,
        labels.labels.iter().map(|&l| if l == 0 { 0 } else { 255 }).collect(),
    )?;
    write_atomic(&flow_out, &write_flo(&flow))?;
    write_atomic(&gt_out, &write_pgm(&gt))?;
    let mut produced = vec![flow_out.clone(), gt_out];
    if let Some(p) = s.get_opt::<PathBuf>("labels_out")? {
        write_atomic(&p, &write_pgm(&labels))?;
        produced.push(p);
    }
    finish(&s, manifest_for(&flow_out), &inputs, &produced, start)
}
