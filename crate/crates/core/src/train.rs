//! Gradient-trained segmentation surrogate.
//!
//! A free per-site logit field stands in for a segmentation network. Training
//! alternates an exact parameter fit `θ* = argmin_θ L(f, θ, logits)` with
//! gradient steps on the logits, holding `θ*` fixed (no gradient flows into
//! the fit).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::em::{lower_bound, prob_floor, softmax_in_place, m_step_with, residual_grid, Likelihood, SoftSegmentation};
use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::flow::FlowField;
use crate::model::{BasisTable, DistanceKind, ModelKind, MotionModel};
use crate::scalar::Scalar;

/// `K` unconstrained logits per site, layer-major like [`SoftSegmentation`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogitField<T> {
    k: usize,
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> LogitField<T> {
    pub fn new(k: usize, width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if k == 0 || data.len() != k * width * height {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (data.len(), k),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite logit".into()));
        }
        Ok(Self {
            k,
            width,
            height,
            data,
        })
    }

    pub fn zeros(k: usize, width: usize, height: usize) -> Self {
        Self {
            k,
            width,
            height,
            data: vec![T::zero(); k * width * height],
        }
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
    pub fn get(&self, k: usize, i: usize) -> T {
        self.data[k * self.sites() + i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub k: usize,
    pub epochs: usize,
    pub grad_steps_per_epoch: usize,
    /// Gradient-descent step size on the logits.
    pub lr: T,
    pub alpha: T,
    pub kind: ModelKind,
    pub dist: DistanceKind,
    pub seed: u64,
    /// Standard deviation of the initial logits.
    pub init_sd: T,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            k: 2,
            epochs: 200,
            grad_steps_per_epoch: 10,
            lr: T::lit(0.05),
            alpha: T::lit(1e-2),
            kind: ModelKind::FullQuadratic,
            dist: DistanceKind::L1Norm,
            seed: 0,
            init_sd: T::lit(0.01),
            fit: FitOptions::default(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn likelihood(&self) -> Likelihood<T> {
        Likelihood {
            alpha: self.alpha,
            dist: self.dist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > crate::em::MAX_LAYERS {
            return Err(Error::InvalidConfig("k out of range".into()));
        }
        if !(self.lr >= T::zero()) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig("lr must be non-negative".into()));
        }
        if !(self.alpha > T::zero()) {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        Ok(())
    }
}

pub fn softmax_field<T: Scalar>(logits: &LogitField<T>) -> SoftSegmentation<T> {
    let (k, n) = (logits.k, logits.sites());
    let mut probs = vec![T::zero(); k * n];
    let mut scores = vec![T::zero(); k];
    for i in 0..n {
        for (l, s) in scores.iter_mut().enumerate() {
            *s = logits.data[l * n + i];
        }
        softmax_in_place(&mut scores);
        for (l, s) in scores.iter().enumerate() {
            probs[l * n + i] = *s;
        }
    }
    SoftSegmentation::from_raw(k, logits.width, logits.height, probs)
}

/// `L = -ll(θ, softmax(logits))`.
pub fn loss<T: Scalar>(f: &FlowField<T>, model: &MotionModel<T>, logits: &LogitField<T>, lik: &Likelihood<T>) -> T {
    -lower_bound(f, model, &softmax_field(logits), lik)
}

/// `∂L/∂logits` with `model` held constant.
///
/// With `a_ik = δ_ik/α + log m_ik + 1`, the softmax Jacobian gives
/// `∂L/∂s_ik = m_ik (a_ik - Σ_j m_ij a_ij)`.
pub fn loss_grad<T: Scalar>(
    f: &FlowField<T>,
    model: &MotionModel<T>,
    logits: &LogitField<T>,
    lik: &Likelihood<T>,
) -> LogitField<T> {
    let residuals = residual_grid(f, model, lik.dist);
    let seg = softmax_field(logits);
    grad_from_parts(&residuals, &seg, lik.alpha)
}

fn grad_from_parts<T: Scalar>(residuals: &crate::em::Residuals<T>, seg: &SoftSegmentation<T>, alpha: T) -> LogitField<T> {
    let (k, n) = (seg.k(), seg.sites());
    let (width, height) = seg.dims();
    let floor = prob_floor::<T>();
    let inv_alpha = T::one() / alpha;
    let mut grad = vec![T::zero(); k * n];
    let mut a = vec![T::zero(); k];
    for i in 0..n {
        let mut mean = T::zero();
        for l in 0..k {
            let m = seg.prob(l, i);
            a[l] = residuals.get(l, i) * inv_alpha + m.max(floor).ln() + T::one();
            mean += m * a[l];
        }
        for l in 0..k {
            grad[l * n + i] = seg.prob(l, i) * (a[l] - mean);
        }
    }
    LogitField {
        k,
        width,
        height,
        data: grad,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStep<T> {
    pub epoch: usize,
    /// Loss with the previous parameters and the current logits.
    pub loss_before_fit: T,
    /// Loss right after refitting the parameters.
    pub loss_after_fit: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult<T> {
    pub seg: SoftSegmentation<T>,
    pub logits: LogitField<T>,
    pub model: MotionModel<T>,
    pub trace: Vec<TrainStep<T>>,
}

pub fn init_logits<T: Scalar>(cfg: &TrainConfig<T>, dims: (usize, usize)) -> LogitField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sd = cfg.init_sd.as_f64();
    let data = (0..cfg.k * dims.0 * dims.1)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(sd * z)
        })
        .collect();
    LogitField {
        k: cfg.k,
        width: dims.0,
        height: dims.1,
        data,
    }
}

/// Alternating optimization of one flow field; the parameters start at zero.
pub fn train_toy<T: Scalar>(f: &FlowField<T>, cfg: &TrainConfig<T>) -> Result<TrainResult<T>> {
    cfg.validate()?;
    let lik = cfg.likelihood();
    let table = BasisTable::new(cfg.kind, f.dims());
    let mut logits = init_logits(cfg, f.dims());
    let mut model = MotionModel::zeros(cfg.kind, cfg.k);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let seg = softmax_field(&logits);
        let before = -lower_bound(f, &model, &seg, &lik);
        model = m_step_with(&table, f.vectors(), &seg, cfg.dist, &cfg.fit, &model)?.model;
        let residuals = crate::em::residuals_with_table(&table, f.vectors(), &model, cfg.dist);
        let after = -crate::em::lower_bound_from_residuals(&residuals, &seg, &lik);
        trace.push(TrainStep {
            epoch,
            loss_before_fit: before,
            loss_after_fit: after,
        });
        for _ in 0..cfg.grad_steps_per_epoch {
            let seg = softmax_field(&logits);
            let grad = grad_from_parts(&residuals, &seg, cfg.alpha);
            for (s, g) in logits.data.iter_mut().zip(&grad.data) {
                *s -= cfg.lr * *g;
            }
        }
    }
    Ok(TrainResult {
        seg: softmax_field(&logits),
        logits,
        model,
        trace,
    })
}
