//! Region-similarity evaluation and foreground selection.

use crate::error::{Error, Result};
use crate::pnm::LabelMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub fg: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, fg: Vec<bool>) -> Result<Self> {
        if fg.len() != width * height {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (fg.len(), 1),
            });
        }
        Ok(Self { width, height, fg })
    }

    /// Ground truth from gray values (`> 127` is foreground).
    pub fn from_gray(map: &LabelMap) -> Self {
        Self {
            width: map.width,
            height: map.height,
            fg: map.labels.iter().map(|&v| v > 127).collect(),
        }
    }

    pub fn to_label_map(&self) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            labels: self.fg.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.fg.iter().filter(|&&b| b).count()
    }
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `|pred ∩ gt| / |pred ∪ gt|`; 1 when both masks are empty.
pub fn jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    check_dims(gt.dims(), pred.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.fg.iter().zip(&gt.fg) {
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Two-layer heuristic: the larger layer is background. On a tie label 1 is foreground.
pub fn select_fg_two_mask(labels: &LabelMap) -> BinaryMask {
    let ones = labels.labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.labels.iter().filter(|&&l| l == 0).count();
    let fg_label = if ones <= zeros { 1 } else { 0 };
    BinaryMask {
        width: labels.width,
        height: labels.height,
        fg: labels.labels.iter().map(|&l| l == fg_label).collect(),
    }
}

/// Multi-layer selection: layer `k` is foreground iff strictly more than half
/// of its own pixels lie inside `gt`.
pub fn select_fg_multimask_gt(labels: &LabelMap, k: usize, gt: &BinaryMask) -> Result<BinaryMask> {
    check_dims(gt.dims(), labels.dims())?;
    let mut size = vec![0usize; k];
    let mut inside = vec![0usize; k];
    for (&l, &g) in labels.labels.iter().zip(&gt.fg) {
        let l = l as usize;
        if l >= k {
            return Err(Error::LabelOutOfRange { label: l as u8, k });
        }
        size[l] += 1;
        inside[l] += usize::from(g);
    }
    let selected: Vec<bool> = (0..k).map(|l| size[l] > 0 && 2 * inside[l] > size[l]).collect();
    Ok(BinaryMask {
        width: labels.width,
        height: labels.height,
        fg: labels.labels.iter().map(|&l| selected[l as usize]).collect(),
    })
}

/// Per-frame scores of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub name: String,
    pub frames: Vec<f64>,
}

impl SequenceScore {
    pub fn new(name: impl Into<String>, frames: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            frames,
        }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.frames)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    crate::sum::neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Mean of per-sequence means.
    PerSequenceMean,
    /// Mean over every frame of every sequence.
    PerFrameMean,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::PerSequenceMean => "per-sequence",
            Protocol::PerFrameMean => "per-frame",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-sequence" | "sequence" => Ok(Protocol::PerSequenceMean),
            "per-frame" | "frame" => Ok(Protocol::PerFrameMean),
            other => Err(Error::Parse(format!("unknown protocol `{other}`"))),
        }
    }
}

pub fn aggregate(sequences: &[SequenceScore], protocol: Protocol) -> Result<f64> {
    let nonempty: Vec<&SequenceScore> = sequences.iter().filter(|s| !s.frames.is_empty()).collect();
    if nonempty.is_empty() {
        return Err(Error::Empty);
    }
    Ok(match protocol {
        Protocol::PerSequenceMean => mean(&nonempty.iter().map(|s| s.mean()).collect::<Vec<_>>()),
        Protocol::PerFrameMean => {
            let all: Vec<f64> = nonempty.iter().flat_map(|s| s.frames.iter().copied()).collect();
            mean(&all)
        }
    })
}
