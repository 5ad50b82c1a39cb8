//! Synthetic piecewise-parametric flows with ground-truth labels.
//!
//! Spec files are `key = value` lines:
//!
//! ```text
//! width = 224
//! height = 128
//! model = quadratic
//! noise = 0.0
//! seed = 7
//! layer = rest; 0.5 0.1 0 0 0 0 -0.2 0 0.05 0 0 0
//! layer = rect 60 30 140 100; -1.5 0 0 0 0 0 1.0 0 0 0 0 0
//! layer = ellipse 170 64 25 18; 2 0 0 0 0 0 0 0 0 0 0 0
//! ```
//!
//! Layer order gives the label. `rest` takes every site no other region covers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::parse_key_values;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::model::{eval_model, ModelKind};
use crate::pnm::LabelMap;
use crate::scalar::Scalar;

/// Pixel predicate of a layer. Rectangles are half-open `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Every site not claimed by another region.
    Rest,
}

impl Region {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Region::Rect { x0, y0, x1, y1 } => (x0..x1).contains(&x) && (y0..y1).contains(&y),
            Region::Ellipse { cx, cy, rx, ry } => {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
            Region::Rest => false,
        }
    }
}

/// Renders each region's model, adds iid `N(0, noise_sigma²)` per component,
/// and returns the flow with its labels.
pub fn synth_flow<T: Scalar, R: Rng + ?Sized>(
    layers: &[(Region, Vec<T>)],
    kind: ModelKind,
    grid: (usize, usize),
    noise_sigma: T,
    rng: &mut R,
) -> Result<(FlowField<T>, LabelMap)> {
    if layers.is_empty() || layers.len() > crate::em::MAX_LAYERS {
        return Err(Error::InvalidConfig("need between 1 and 255 layers".into()));
    }
    for (_, theta) in layers {
        if theta.len() != kind.parameter_count() {
            return Err(Error::InvalidConfig(format!(
                "{kind} layer needs {} parameters, got {}",
                kind.parameter_count(),
                theta.len()
            )));
        }
    }
    let rest: Vec<usize> = layers
        .iter()
        .enumerate()
        .filter(|(_, (r, _))| *r == Region::Rest)
        .map(|(i, _)| i)
        .collect();
    if rest.len() > 1 {
        return Err(Error::InvalidConfig("at most one `rest` region".into()));
    }
    let (w, h) = grid;
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut hits = layers.iter().enumerate().filter(|(_, (r, _))| r.contains(x, y));
            let label = match (hits.next(), hits.next(), rest.first()) {
                (Some((i, _)), None, _) => i,
                (None, _, Some(&r)) => r,
                (None, _, None) => return Err(Error::NonPartition { x, y, count: 0 }),
                (Some(_), Some(_), _) => {
                    let count = layers.iter().filter(|(r, _)| r.contains(x, y)).count();
                    return Err(Error::NonPartition { x, y, count });
                }
            };
            labels.push(label as u8);
        }
    }
    let sigma = noise_sigma.as_f64();
    let flow = FlowField::from_fn(w, h, |x, y| {
        let mut v = eval_model(&layers[labels[y * w + x] as usize].1, (x, y), kind, grid);
        if sigma > 0.0 {
            for c in &mut v {
                let z: f64 = StandardNormal.sample(rng);
                *c += T::lit(sigma * z);
            }
        }
        v
    });
    Ok((flow, LabelMap::new(w, h, labels)?))
}

/// Parsed synthesis spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec<T> {
    pub width: usize,
    pub height: usize,
    pub kind: ModelKind,
    pub noise: T,
    pub seed: u64,
    pub layers: Vec<(Region, Vec<T>)>,
}

impl<T: Scalar> SynthSpec<T> {
    pub fn parse(text: &str) -> Result<Self> {
        let mut width = None;
        let mut height = None;
        let mut kind = ModelKind::FullQuadratic;
        let mut noise = T::zero();
        let mut seed = 0u64;
        let mut layers = Vec::new();
        for (key, value) in parse_key_values(text)? {
            let bad = |what: &str| Error::Parse(format!("{key}: {what}: `{value}`"));
            match key.as_str() {
                "width" => width = Some(value.parse().map_err(|_| bad("not an integer"))?),
                "height" => height = Some(value.parse().map_err(|_| bad("not an integer"))?),
                "model" => kind = value.parse()?,
                "noise" => noise = T::lit(value.parse::<f64>().map_err(|_| bad("not a number"))?),
                "seed" => seed = value.parse().map_err(|_| bad("not an integer"))?,
                "layer" => layers.push(parse_layer(&value)?),
                _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
            }
        }
        let width = width.ok_or_else(|| Error::Parse("missing width".into()))?;
        let height = height.ok_or_else(|| Error::Parse("missing height".into()))?;
        if width == 0 || height == 0 {
            return Err(Error::BadDims {
                width: width as i64,
                height: height as i64,
            });
        }
        Ok(Self {
            width,
            height,
            kind,
            noise,
            seed,
            layers,
        })
    }
}

fn parse_layer<T: Scalar>(value: &str) -> Result<(Region, Vec<T>)> {
    let bad = || Error::Parse(format!("malformed layer `{value}`"));
    let (region, params) = value.split_once(';').ok_or_else(bad)?;
    let words: Vec<&str> = region.split_whitespace().collect();
    let nums = |ws: &[&str]| -> Result<Vec<f64>> { ws.iter().map(|w| w.parse::<f64>().map_err(|_| bad())).collect() };
    let region = match words.as_slice() {
        ["rest"] => Region::Rest,
        ["rect", rest @ ..] if rest.len() == 4 => {
            let v: Vec<usize> = rest.iter().map(|w| w.parse().map_err(|_| bad())).collect::<Result<_>>()?;
            Region::Rect { x0: v[0], y0: v[1], x1: v[2], y1: v[3] }
        }
        ["ellipse", rest @ ..] if rest.len() == 4 => {
            let v = nums(rest)?;
            Region::Ellipse { cx: v[0], cy: v[1], rx: v[2], ry: v[3] }
        }
        _ => return Err(bad()),
    };
    let theta = params
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map(T::lit).map_err(|_| bad()))
        .collect::<Result<Vec<T>>>()?;
    Ok((region, theta))
}
