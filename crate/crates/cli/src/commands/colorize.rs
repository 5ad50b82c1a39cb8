use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use emflow::{flow_to_color, render_labels, write_ppm};

use super::{finish, run_flags, RUN_KEYS};
use crate::files::{load_flow, load_pgm, manifest_for, stem, write_atomic};
use crate::settings::{key, opt_string, Key, Settings};
use crate::ColorizeArgs;

const KEYS: [Key; 3] = [key("out", ""), key("max_mag", ""), key("k", "")];

pub fn run(a: ColorizeArgs) -> Result<()> {
    let start = Instant::now();
    let schema: Vec<Key> = KEYS.iter().chain(&RUN_KEYS).copied().collect();
    let mut flags = vec![
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
        ("max_mag", opt_string(&a.max_mag)),
        ("k", opt_string(&a.k)),
    ];
    flags.extend(run_flags(&a.run));
    let mut s = Settings::resolve("colorize", &schema, a.run.config.as_deref(), flags)?;
    let inputs = s.inputs(a.input.as_slice())?;
    anyhow::ensure!(inputs.len() == 1, "colorize takes exactly one input");
    let input = &inputs[0];
    let out = match s.get_opt::<PathBuf>("out")? {
        Some(p) => p,
        None => input.with_file_name(format!("{}.ppm", stem(input)?)),
    };
    s.set("out", out.display().to_string());
    let image = if input.extension().is_some_and(|e| e == "pgm") {
        let labels = load_pgm(input)?;
        let k = match s.get_opt::<usize>("k")? {
            Some(k) => k,
            None => labels.max_label().map_or(1, |m| m as usize + 1),
        };
        render_labels(&labels, k, None)?
    } else {
        let flow = load_flow(input)?;
        flow_to_color(&flow, s.get_opt::<f64>("max_mag")?)
    };
    write_atomic(&out, &write_ppm(&image))?;
    finish(&s, manifest_for(&out), &inputs, std::slice::from_ref(&out), start)
}
