use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use emflow::io::write_theta_csv;
use emflow::{augment, write_flo, AugmentRanges, ModelKind, MotionModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{finish, run_flags, RUN_KEYS};
use crate::files::{load_flow, manifest_for, stem, write_atomic};
use crate::settings::{key, opt_string, Key, Settings};
use crate::AugmentArgs;

const KEYS: [Key; 6] = [
    key("out", ""),
    key("theta_out", ""),
    key("seed", "0"),
    key("range_const", "2"),
    key("range_linear", "0.5"),
    key("range_quad", "0.25"),
];

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

pub fn run(a: AugmentArgs) -> Result<()> {
    let start = Instant::now();
    let schema: Vec<Key> = KEYS.iter().chain(&RUN_KEYS).copied().collect();
    let mut flags = vec![
        ("out", path_flag(&a.out)),
        ("theta_out", path_flag(&a.theta_out)),
        ("seed", opt_string(&a.seed)),
        ("range_const", opt_string(&a.range_const)),
        ("range_linear", opt_string(&a.range_linear)),
        ("range_quad", opt_string(&a.range_quad)),
    ];
    flags.extend(run_flags(&a.run));
    let mut s = Settings::resolve("augment", &schema, a.run.config.as_deref(), flags)?;
    let inputs = s.inputs(a.input.as_slice())?;
    anyhow::ensure!(inputs.len() == 1, "augment takes exactly one input");
    let input = &inputs[0];
    let out = match s.get_opt::<PathBuf>("out")? {
        Some(p) => p,
        None => input.with_file_name(format!("{}.aug.flo", stem(input)?)),
    };
    let theta_out = match s.get_opt::<PathBuf>("theta_out")? {
        Some(p) => p,
        None => out.with_file_name(format!("{}.theta.csv", stem(&out)?)),
    };
    s.set("out", out.display().to_string());
    s.set("theta_out", theta_out.display().to_string());
    let ranges = AugmentRanges {
        constant: s.get("range_const")?,
        linear: s.get("range_linear")?,
        quadratic: s.get("range_quad")?,
    };
    let flow = load_flow(input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.get("seed")?);
    let (augmented, theta) = augment(&flow, &mut rng, &ranges);
    let model = MotionModel::from_rows(ModelKind::FullQuadratic, &[theta])?;
    write_atomic(&out, &write_flo(&augmented))?;
    write_atomic(&theta_out, write_theta_csv(&model).as_bytes())?;
    finish(&s, manifest_for(&out), &inputs, &[out.clone(), theta_out.clone()], start)
}
