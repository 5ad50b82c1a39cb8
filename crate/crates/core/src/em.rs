//! Layered EM over parametric motion models.
//!
//! Each site's flow is modelled by `p(f_i | z_i = k, θ_k) = exp(-δ_ik / α) / Z`
//! with a uniform layer prior `1/K`. For a soft segmentation `m` the lower bound
//! on `log p(f | θ)` is
//!
//! ```text
//! ll(θ, m) = -[ I log(K Z) + (1/α) Σ_i Σ_k m_ik δ_ik + Σ_i Σ_k m_ik log m_ik ]
//! ```
//!
//! Classical EM alternates the exact posterior (E-step) with per-layer
//! weighted fits (M-step), both of which can only raise `ll`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::color::percentile;
use crate::error::{Error, Result};
use crate::fit::{fit_with_table, weighted_objective, FitOptions};
use crate::flow::FlowField;
use crate::model::{eval_at, BasisTable, DistanceKind, ModelKind, MotionModel};
use crate::pnm::LabelMap;
use crate::scalar::Scalar;
use crate::sum::NeumaierSum;

pub const MAX_LAYERS: usize = 255;

/// Per-site distribution over `K` layers, stored layer-major (`probs[k * I + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSegmentation<T> {
    k: usize,
    width: usize,
    height: usize,
    probs: Vec<T>,
}

impl<T: Scalar> SoftSegmentation<T> {
    /// Validates that entries lie in `[0, 1]` and each site sums to 1 within `1e-6`.
    pub fn new(k: usize, width: usize, height: usize, probs: Vec<T>) -> Result<Self> {
        let sites = width * height;
        if k == 0 || probs.len() != k * sites {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (probs.len(), k),
            });
        }
        let tol = T::lit(1e-6);
        for i in 0..sites {
            let mut s = T::zero();
            for l in 0..k {
                let p = probs[l * sites + i];
                if !(p >= T::zero() && p <= T::one()) {
                    return Err(Error::InvalidConfig(format!("probability {p} at site {i}")));
                }
                s += p;
            }
            if (s - T::one()).abs() > tol {
                return Err(Error::InvalidConfig(format!("site {i} sums to {s}")));
            }
        }
        Ok(Self {
            k,
            width,
            height,
            probs,
        })
    }

    pub fn uniform(k: usize, width: usize, height: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(k);
        Self {
            k,
            width,
            height,
            probs: vec![p; k * width * height],
        }
    }

    /// One-hot segmentation from labels in `0..k`.
    pub fn from_labels(labels: &LabelMap, k: usize) -> Result<Self> {
        let sites = labels.labels.len();
        let mut probs = vec![T::zero(); k * sites];
        for (i, &l) in labels.labels.iter().enumerate() {
            if l as usize >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
            probs[l as usize * sites + i] = T::one();
        }
        Ok(Self {
            k,
            width: labels.width,
            height: labels.height,
            probs,
        })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn prob(&self, k: usize, i: usize) -> T {
        self.probs[k * self.sites() + i]
    }

    #[inline]
    pub fn layer(&self, k: usize) -> &[T] {
        let n = self.sites();
        &self.probs[k * n..(k + 1) * n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    pub(crate) fn from_raw(k: usize, width: usize, height: usize, probs: Vec<T>) -> Self {
        debug_assert_eq!(probs.len(), k * width * height);
        Self {
            k,
            width,
            height,
            probs,
        }
    }
}

/// `δ_ik` for every layer and site, layer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals<T> {
    k: usize,
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Residuals<T> {
    pub fn new(k: usize, width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if k == 0 || data.len() != k * width * height {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (data.len(), k),
            });
        }
        Ok(Self {
            k,
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> T {
        self.data[k * self.sites() + i]
    }

    #[inline]
    pub fn layer(&self, k: usize) -> &[T] {
        let n = self.sites();
        &self.data[k * n..(k + 1) * n]
    }
}

/// Temperature and distance of the flow likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Likelihood<T> {
    pub alpha: T,
    pub dist: DistanceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig<T> {
    pub k: usize,
    pub alpha: T,
    pub kind: ModelKind,
    pub dist: DistanceKind,
    pub max_iters: usize,
    /// Stop when the relative change of `ll` falls below this.
    pub rel_tol: T,
    pub n_inits: usize,
    pub seed: u64,
    /// Scale of the random initial parameters relative to the flow magnitude.
    pub init_scale: T,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Default for EmConfig<T> {
    fn default() -> Self {
        Self {
            k: 2,
            alpha: T::lit(1e-2),
            kind: ModelKind::FullQuadratic,
            dist: DistanceKind::L1Norm,
            max_iters: 100,
            rel_tol: T::lit(1e-6),
            n_inits: 10,
            seed: 0,
            init_scale: T::lit(0.5),
            fit: FitOptions::default(),
        }
    }
}

impl<T: Scalar> EmConfig<T> {
    pub fn likelihood(&self) -> Likelihood<T> {
        Likelihood {
            alpha: self.alpha,
            dist: self.dist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_LAYERS {
            return Err(Error::InvalidConfig(format!("k must be in 1..={MAX_LAYERS}")));
        }
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        if self.n_inits == 0 {
            return Err(Error::InvalidConfig("n_inits must be at least 1".into()));
        }
        if !(self.init_scale >= T::zero()) {
            return Err(Error::InvalidConfig("init_scale must be non-negative".into()));
        }
        if !(self.rel_tol >= T::zero()) {
            return Err(Error::InvalidConfig("rel_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult<T> {
    pub model: MotionModel<T>,
    /// Posterior for `model`; `ll_trace.last()` is the bound at `(model, seg)`.
    pub seg: SoftSegmentation<T>,
    /// Bound after each E/M pair, followed by the bound after a final E-step.
    pub ll_trace: Vec<T>,
    pub chosen_init: usize,
    /// E/M pairs executed by the chosen run.
    pub iterations: usize,
    /// Final bound of every initialization, `None` where the run failed.
    pub init_lls: Vec<Option<T>>,
}

/// `log Z` with `Z = ∫ exp(-δ(b, 0) / α) db` over the plane.
pub fn log_z<T: Scalar>(dist: DistanceKind, alpha: T) -> T {
    let pi = T::PI();
    match dist {
        DistanceKind::SquaredL2 => (pi * alpha).ln(),
        DistanceKind::L2Norm => (T::lit(2.0) * pi * alpha * alpha).ln(),
        DistanceKind::L1Norm => (T::lit(4.0) * alpha * alpha).ln(),
    }
}

pub fn residual_grid<T: Scalar>(f: &FlowField<T>, model: &MotionModel<T>, dist: DistanceKind) -> Residuals<T> {
    let table = BasisTable::new(model.kind(), f.dims());
    residuals_with_table(&table, f.vectors(), model, dist)
}

pub(crate) fn residuals_with_table<T: Scalar>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    model: &MotionModel<T>,
    dist: DistanceKind,
) -> Residuals<T> {
    let (width, height) = table.grid();
    let mut data = Vec::with_capacity(model.k() * flow.len());
    for theta in model.rows() {
        data.extend(
            table
                .rows()
                .zip(flow)
                .map(|(c, f)| dist.distance(*f, eval_at(theta, c))),
        );
    }
    Residuals {
        k: model.k(),
        width,
        height,
        data,
    }
}

/// Exact posterior `softmax_k(-δ_ik / α)`; `Z` and the uniform prior cancel.
pub fn e_step<T: Scalar>(residuals: &Residuals<T>, alpha: T) -> SoftSegmentation<T> {
    let k = residuals.k;
    let n = residuals.sites();
    let mut probs = vec![T::zero(); k * n];
    let mut scores = vec![T::zero(); k];
    for i in 0..n {
        for (l, s) in scores.iter_mut().enumerate() {
            *s = -residuals.data[l * n + i] / alpha;
        }
        softmax_in_place(&mut scores);
        for (l, s) in scores.iter().enumerate() {
            probs[l * n + i] = *s;
        }
    }
    SoftSegmentation::from_raw(k, residuals.width, residuals.height, probs)
}

pub(crate) fn softmax_in_place<T: Scalar>(scores: &mut [T]) {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

#[inline]
pub(crate) fn prob_floor<T: Scalar>() -> T {
    T::lit(1e-300).max(T::min_positive_value())
}

/// `ll(θ, m)` from precomputed residuals.
pub fn lower_bound_from_residuals<T: Scalar>(
    residuals: &Residuals<T>,
    seg: &SoftSegmentation<T>,
    lik: &Likelihood<T>,
) -> T {
    assert_eq!(residuals.k, seg.k, "layer count mismatch");
    assert_eq!(residuals.sites(), seg.sites(), "site count mismatch");
    let k = seg.k;
    let n = seg.sites();
    let floor = prob_floor::<T>();
    let inv_alpha = T::one() / lik.alpha;
    let mut acc = NeumaierSum::new();
    for i in 0..n {
        let mut site = T::zero();
        for l in 0..k {
            let m = seg.probs[l * n + i];
            if m > T::zero() {
                site += m * (residuals.data[l * n + i] * inv_alpha + m.max(floor).ln());
            }
        }
        acc.add(site);
    }
    let constant = T::from_usize_lossy(n) * (T::from_usize_lossy(k).ln() + log_z(lik.dist, lik.alpha));
    -(constant + acc.value())
}

pub fn lower_bound<T: Scalar>(
    f: &FlowField<T>,
    model: &MotionModel<T>,
    seg: &SoftSegmentation<T>,
    lik: &Likelihood<T>,
) -> T {
    let residuals = residual_grid(f, model, lik.dist);
    lower_bound_from_residuals(&residuals, seg, lik)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MStep<T> {
    pub model: MotionModel<T>,
    /// Layers whose weights were degenerate and kept their previous parameters.
    pub degenerate: Vec<bool>,
}

/// Per-layer weighted refit with weights `seg.layer(k)`.
///
/// `prev` supplies the parameters kept for degenerate layers and the IRLS
/// starting point. A refit that does not lower a layer's weighted objective
/// is discarded in favour of `prev`, so the step never decreases `ll`.
pub fn m_step<T: Scalar>(
    f: &FlowField<T>,
    seg: &SoftSegmentation<T>,
    cfg: &EmConfig<T>,
    prev: &MotionModel<T>,
) -> Result<MStep<T>> {
    let table = BasisTable::new(cfg.kind, f.dims());
    m_step_with(&table, f.vectors(), seg, cfg.dist, &cfg.fit, prev)
}

pub(crate) fn m_step_with<T: Scalar>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    seg: &SoftSegmentation<T>,
    dist: DistanceKind,
    opts: &FitOptions<T>,
    prev: &MotionModel<T>,
) -> Result<MStep<T>> {
    assert_eq!(prev.k(), seg.k(), "layer count mismatch");
    assert_eq!(prev.kind(), table.kind(), "model kind mismatch");
    let mut model = prev.clone();
    let mut degenerate = vec![false; seg.k()];
    for k in 0..seg.k() {
        let weights = seg.layer(k);
        match fit_with_table(table, flow, weights, dist, opts, Some(prev.row(k)), false) {
            Ok(report) => {
                let new_obj = weighted_objective(table, flow, weights, &report.theta, dist);
                let old_obj = weighted_objective(table, flow, weights, prev.row(k), dist);
                if new_obj <= old_obj {
                    model.row_mut(k).copy_from_slice(&report.theta);
                }
            }
            Err(Error::DegenerateWeights { .. }) => degenerate[k] = true,
            Err(e) => return Err(e),
        }
    }
    Ok(MStep { model, degenerate })
}

/// Random parameters: constant terms `N(0, s²)`, linear `N(0, (s/4)²)`,
/// quadratic `N(0, (s/16)²)`, with `s = init_scale * p90(|f|)`.
pub fn init_models<T: Scalar, R: Rng + ?Sized>(cfg: &EmConfig<T>, f: &FlowField<T>, rng: &mut R) -> MotionModel<T> {
    let s = cfg.init_scale.as_f64() * percentile(&f.magnitudes(), 0.9).as_f64();
    let degrees = cfg.kind.term_degrees();
    let mut model = MotionModel::zeros(cfg.kind, cfg.k);
    for k in 0..cfg.k {
        let row = model.row_mut(k);
        for comp in 0..2 {
            for (j, &deg) in degrees.iter().enumerate() {
                let sd = s / [1.0, 4.0, 16.0][deg];
                let z: f64 = StandardNormal.sample(rng);
                row[comp * degrees.len() + j] = T::lit(sd * z);
            }
        }
    }
    model
}

/// RNG of one EM initialization: stream `init` of the seeded generator.
pub fn init_rng(seed: u64, init: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(init as u64);
    rng
}

struct Run<T> {
    model: MotionModel<T>,
    seg: SoftSegmentation<T>,
    trace: Vec<T>,
    iterations: usize,
}

fn run_once<T: Scalar>(
    table: &BasisTable<T>,
    f: &FlowField<T>,
    cfg: &EmConfig<T>,
    init: usize,
) -> Result<Run<T>> {
    let lik = cfg.likelihood();
    let flow = f.vectors();
    let mut rng = init_rng(cfg.seed, init);
    let mut model = init_models(cfg, f, &mut rng);
    let mut residuals = residuals_with_table(table, flow, &model, cfg.dist);
    let mut trace: Vec<T> = Vec::new();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let seg = e_step(&residuals, cfg.alpha);
        model = m_step_with(table, flow, &seg, cfg.dist, &cfg.fit, &model)?.model;
        residuals = residuals_with_table(table, flow, &model, cfg.dist);
        let ll = lower_bound_from_residuals(&residuals, &seg, &lik);
        iterations += 1;
        let converged = trace
            .last()
            .is_some_and(|&prev| (ll - prev).abs() <= cfg.rel_tol * prev.abs());
        trace.push(ll);
        if converged {
            break;
        }
    }
    let seg = e_step(&residuals, cfg.alpha);
    trace.push(lower_bound_from_residuals(&residuals, &seg, &lik));
    Ok(Run {
        model,
        seg,
        trace,
        iterations,
    })
}

/// Classical EM from `cfg.n_inits` random initializations; the run with the
/// highest final bound wins (ties go to the lower index).
///
/// Initializations run in parallel on the current rayon pool; each uses its
/// own RNG stream, so the result does not depend on the thread count.
pub fn em_segment<T: Scalar>(f: &FlowField<T>, cfg: &EmConfig<T>) -> Result<EmResult<T>> {
    cfg.validate()?;
    let table = BasisTable::new(cfg.kind, f.dims());
    let runs: Vec<Result<Run<T>>> = (0..cfg.n_inits)
        .into_par_iter()
        .map(|init| run_once(&table, f, cfg, init))
        .collect();

    let mut init_lls = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, Run<T>)> = None;
    for (init, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let ll = *run.trace.last().expect("trace has a final entry");
                init_lls.push(Some(ll));
                let better = match &best {
                    None => true,
                    Some((_, b)) => ll > *b.trace.last().unwrap(),
                };
                if better {
                    best = Some((init, run));
                }
            }
            Err(Error::SingularSystem) => init_lls.push(None),
            Err(e) => return Err(e),
        }
    }
    let (chosen_init, run) = best.ok_or(Error::AllInitsFailed)?;
    Ok(EmResult {
        model: run.model,
        seg: run.seg,
        ll_trace: run.trace,
        chosen_init,
        iterations: run.iterations,
        init_lls,
    })
}

/// Per-site argmax; ties go to the lowest layer index.
pub fn hard_assign<T: Scalar>(seg: &SoftSegmentation<T>) -> LabelMap {
    let n = seg.sites();
    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            for l in 1..seg.k {
                if seg.probs[l * n + i] > seg.probs[best * n + i] {
                    best = l;
                }
            }
            best as u8
        })
        .collect();
    LabelMap {
        width: seg.width,
        height: seg.height,
        labels,
    }
}
