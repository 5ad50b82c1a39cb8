//! Unsupervised motion segmentation of optical flow fields.
//!
//! A flow field is explained as K layers, each following a parametric motion
//! model (affine or full quadratic in normalized image coordinates). Layers
//! and their soft ownership of pixels are estimated with EM ([`em_segment`]),
//! or with a free logit field trained by gradient descent against the same
//! loss ([`train_toy`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar for the common cases.
//!
//! ```
//! use emflow::{em_segment, EmConfig64, ModelKind, DistanceKind, render_model};
//!
//! let theta = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
//! let flow = render_model(&theta, ModelKind::Affine, (16, 8));
//! let cfg = EmConfig64 { k: 1, kind: ModelKind::Affine, dist: DistanceKind::SquaredL2, n_inits: 1, ..Default::default() };
//! let res = em_segment(&flow, &cfg).unwrap();
//! assert!((res.model.row(0)[0] - 1.0).abs() < 1e-9);
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod color;
pub mod config;
pub mod em;
pub mod error;
pub mod eval;
pub mod fit;
pub mod flo;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pnm;
pub mod scalar;
pub mod sum;
pub mod synth;
pub mod train;

pub use augment::{augment, AugmentRanges};
pub use color::{flow_to_color, render_labels};
pub use em::{
    e_step, em_segment, hard_assign, init_models, log_z, lower_bound, m_step, residual_grid, EmConfig, EmResult,
    Likelihood, MStep, Residuals, SoftSegmentation,
};
pub use error::{Error, Result};
pub use eval::{aggregate, jaccard, BinaryMask, Protocol, SequenceScore};
pub use fit::{fit_weighted, fit_weighted_report, FitOptions, FitReport, RobustSolver};
pub use flo::{read_flo, write_flo};
pub use flow::{resize_bilinear, FlowField};
pub use model::{basis, eval_model, render_model, DistanceKind, ModelKind, MotionModel};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_ppm, LabelMap, RgbImage};
pub use scalar::Scalar;
pub use synth::{synth_flow, Region, SynthSpec};
pub use train::{loss, train_toy, LogitField, TrainConfig, TrainResult, TrainStep};

pub type FlowField32 = FlowField<f32>;
pub type FlowField64 = FlowField<f64>;
pub type MotionModel32 = MotionModel<f32>;
pub type MotionModel64 = MotionModel<f64>;
pub type SoftSegmentation32 = SoftSegmentation<f32>;
pub type SoftSegmentation64 = SoftSegmentation<f64>;
pub type EmConfig32 = EmConfig<f32>;
pub type EmConfig64 = EmConfig<f64>;
pub type EmResult32 = EmResult<f32>;
pub type EmResult64 = EmResult<f64>;
pub type TrainConfig32 = TrainConfig<f32>;
pub type TrainConfig64 = TrainConfig<f64>;
pub type FitOptions64 = FitOptions<f64>;
