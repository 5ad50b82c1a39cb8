//! Polynomial motion models.
//!
//! Pixel coordinates are normalized to `[-1, 1]` per axis before expansion,
//! so parameters are in flow units per normalized-coordinate power. A row of
//! parameters holds the `u` coefficients followed by the `v` coefficients,
//! both applied to the same basis vector `c(i)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// `c(i) = [1, x, y]`, 6 parameters.
    Affine,
    /// `c(i) = [1, x, y, x^2, xy, y^2]`, 12 parameters.
    FullQuadratic,
}

impl ModelKind {
    /// Length of `c(i)`.
    #[inline]
    pub const fn basis_len(self) -> usize {
        match self {
            ModelKind::Affine => 3,
            ModelKind::FullQuadratic => 6,
        }
    }

    #[inline]
    pub const fn parameter_count(self) -> usize {
        2 * self.basis_len()
    }

    pub fn from_parameter_count(n: usize) -> Option<Self> {
        match n {
            6 => Some(ModelKind::Affine),
            12 => Some(ModelKind::FullQuadratic),
            _ => None,
        }
    }

    /// Polynomial degree of each basis term, in basis order.
    pub fn term_degrees(self) -> &'static [usize] {
        match self {
            ModelKind::Affine => &[0, 1, 1],
            ModelKind::FullQuadratic => &[0, 1, 1, 2, 2, 2],
        }
    }

    pub fn term_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Affine => &["1", "x", "y"],
            ModelKind::FullQuadratic => &["1", "x", "y", "xx", "xy", "yy"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Affine => "affine",
            ModelKind::FullQuadratic => "quadratic",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "affine" => Ok(ModelKind::Affine),
            "quadratic" | "full-quadratic" | "fullquadratic" => Ok(ModelKind::FullQuadratic),
            other => Err(Error::Parse(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Distance `δ` between an observed and a modelled flow vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    SquaredL2,
    L2Norm,
    L1Norm,
}

impl DistanceKind {
    #[inline]
    pub fn distance<T: Scalar>(self, a: [T; 2], b: [T; 2]) -> T {
        let du = a[0] - b[0];
        let dv = a[1] - b[1];
        match self {
            DistanceKind::SquaredL2 => du * du + dv * dv,
            DistanceKind::L2Norm => du.hypot(dv),
            DistanceKind::L1Norm => du.abs() + dv.abs(),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::SquaredL2 => "sql2",
            DistanceKind::L2Norm => "l2",
            DistanceKind::L1Norm => "l1",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sql2" | "squared-l2" | "squaredl2" => Ok(DistanceKind::SquaredL2),
            "l2" | "l2norm" => Ok(DistanceKind::L2Norm),
            "l1" | "l1norm" => Ok(DistanceKind::L1Norm),
            other => Err(Error::Parse(format!("unknown distance `{other}`"))),
        }
    }
}

/// `δ(a, b)` for the given kind.
#[inline]
pub fn distance<T: Scalar>(a: [T; 2], b: [T; 2], dist: DistanceKind) -> T {
    dist.distance(a, b)
}

#[inline]
fn normalized<T: Scalar>(coord: usize, extent: usize) -> T {
    if extent > 1 {
        T::lit(2.0 * coord as f64 / (extent - 1) as f64 - 1.0)
    } else {
        T::zero()
    }
}

/// Basis vector `c(i)` at pixel `(x, y)` of a `grid = (width, height)`.
pub fn basis<T: Scalar>(site: (usize, usize), kind: ModelKind, grid: (usize, usize)) -> Vec<T> {
    let mut out = vec![T::zero(); kind.basis_len()];
    fill_basis(site, kind, grid, &mut out);
    out
}

#[inline]
fn fill_basis<T: Scalar>(site: (usize, usize), kind: ModelKind, grid: (usize, usize), out: &mut [T]) {
    let x: T = normalized(site.0, grid.0);
    let y: T = normalized(site.1, grid.1);
    out[0] = T::one();
    out[1] = x;
    out[2] = y;
    if kind == ModelKind::FullQuadratic {
        out[3] = x * x;
        out[4] = x * y;
        out[5] = y * y;
    }
}

/// Flow predicted by one parameter row at basis vector `c`.
#[inline]
pub fn eval_at<T: Scalar>(theta_k: &[T], c: &[T]) -> [T; 2] {
    let n = c.len();
    let mut u = T::zero();
    let mut v = T::zero();
    for j in 0..n {
        u += theta_k[j] * c[j];
        v += theta_k[n + j] * c[j];
    }
    [u, v]
}

pub fn eval_model<T: Scalar>(theta_k: &[T], site: (usize, usize), kind: ModelKind, grid: (usize, usize)) -> [T; 2] {
    assert_eq!(theta_k.len(), kind.parameter_count(), "parameter row length");
    let c = basis(site, kind, grid);
    eval_at(theta_k, &c)
}

pub fn render_model<T: Scalar>(theta_k: &[T], kind: ModelKind, grid: (usize, usize)) -> FlowField<T> {
    assert_eq!(theta_k.len(), kind.parameter_count(), "parameter row length");
    let mut c = vec![T::zero(); kind.basis_len()];
    FlowField::from_fn(grid.0, grid.1, |x, y| {
        fill_basis((x, y), kind, grid, &mut c);
        eval_at(theta_k, &c)
    })
}

/// Basis vectors for every site of a grid, cached row-major.
#[derive(Debug, Clone)]
pub struct BasisTable<T> {
    kind: ModelKind,
    grid: (usize, usize),
    data: Vec<T>,
}

impl<T: Scalar> BasisTable<T> {
    pub fn new(kind: ModelKind, grid: (usize, usize)) -> Self {
        let n = kind.basis_len();
        let mut data = vec![T::zero(); n * grid.0 * grid.1];
        for y in 0..grid.1 {
            for x in 0..grid.0 {
                let i = y * grid.0 + x;
                fill_basis((x, y), kind, grid, &mut data[i * n..(i + 1) * n]);
            }
        }
        Self { kind, grid, data }
    }

    #[inline]
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    #[inline]
    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let n = self.kind.basis_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.kind.basis_len())
    }
}

/// `K` parameter rows of a common kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel<T> {
    kind: ModelKind,
    theta: Vec<T>,
}

impl<T: Scalar> MotionModel<T> {
    pub fn zeros(kind: ModelKind, k: usize) -> Self {
        Self {
            kind,
            theta: vec![T::zero(); k * kind.parameter_count()],
        }
    }

    pub fn from_rows(kind: ModelKind, rows: &[Vec<T>]) -> Result<Self> {
        let p = kind.parameter_count();
        let mut theta = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::InvalidConfig(format!(
                    "parameter row has {} entries, {kind} needs {p}",
                    row.len()
                )));
            }
            if row.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidConfig("non-finite parameter".into()));
            }
            theta.extend_from_slice(row);
        }
        Ok(Self { kind, theta })
    }

    #[inline]
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.theta.len() / self.kind.parameter_count()
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        let p = self.kind.parameter_count();
        &self.theta[k * p..(k + 1) * p]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [T] {
        let p = self.kind.parameter_count();
        &mut self.theta[k * p..(k + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.theta.chunks_exact(self.kind.parameter_count())
    }

    pub fn render(&self, k: usize, grid: (usize, usize)) -> FlowField<T> {
        render_model(self.row(k), self.kind, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(ModelKind::Affine.parameter_count(), 6);
        assert_eq!(ModelKind::FullQuadratic.parameter_count(), 12);
    }

    #[test]
    fn center_and_corner_basis() {
        let c: Vec<f64> = basis((3, 2), ModelKind::Affine, (7, 5));
        assert_eq!(c, vec![1.0, 0.0, 0.0]);
        let c: Vec<f64> = basis((3, 2), ModelKind::FullQuadratic, (7, 5));
        assert_eq!(c, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for grid in [(2, 2), (224, 128), (5, 9)] {
            let c: Vec<f64> = basis((0, 0), ModelKind::FullQuadratic, grid);
            assert_eq!(c, vec![1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn zero_and_constant_models() {
        let grid = (6, 4);
        let z = render_model(&[0.0f64; 12], ModelKind::FullQuadratic, grid);
        assert!(z.vectors().iter().all(|v| *v == [0.0, 0.0]));
        let mut theta = [0.0f64; 6];
        theta[0] = 1.25;
        theta[3] = -0.5;
        let c = render_model(&theta, ModelKind::Affine, grid);
        assert!(c.vectors().iter().all(|v| *v == [1.25, -0.5]));
    }

    #[test]
    fn distances_on_three_four() {
        let a = [3.0f64, 4.0];
        let b = [0.0f64, 0.0];
        assert_eq!(DistanceKind::SquaredL2.distance(a, b), 25.0);
        assert_eq!(DistanceKind::L2Norm.distance(a, b), 5.0);
        assert_eq!(DistanceKind::L1Norm.distance(a, b), 7.0);
        for d in [DistanceKind::SquaredL2, DistanceKind::L2Norm, DistanceKind::L1Norm] {
            assert_eq!(d.distance(a, a), 0.0);
        }
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for k in [ModelKind::Affine, ModelKind::FullQuadratic] {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
        }
        for d in [DistanceKind::SquaredL2, DistanceKind::L2Norm, DistanceKind::L1Norm] {
            assert_eq!(d.to_string().parse::<DistanceKind>().unwrap(), d);
        }
        assert!("homography".parse::<ModelKind>().is_err());
    }

    proptest! {
        #[test]
        fn eval_matches_direct_polynomial(
            theta in proptest::collection::vec(-3.0f64..3.0, 12),
            x in 0usize..31, y in 0usize..17,
        ) {
            let grid = (31, 17);
            let got = eval_model(&theta, (x, y), ModelKind::FullQuadratic, grid);
            let xn = 2.0 * x as f64 / 30.0 - 1.0;
            let yn = 2.0 * y as f64 / 16.0 - 1.0;
            let poly = |t: &[f64]| t[0] + t[1] * xn + t[2] * yn + t[3] * xn * xn + t[4] * xn * yn + t[5] * yn * yn;
            prop_assert!((got[0] - poly(&theta[..6])).abs() < 1e-12);
            prop_assert!((got[1] - poly(&theta[6..])).abs() < 1e-12);
            let field = render_model(&theta, ModelKind::FullQuadratic, grid);
            prop_assert_eq!(field.get(x, y), got);
        }

        // Dyadic inputs keep every difference exact, so equality must be bitwise.
        #[test]
        fn distance_is_translation_invariant(
            p in proptest::collection::vec(-4096i32..4096, 6),
        ) {
            let q: Vec<f64> = p.iter().map(|&v| v as f64 / 16.0).collect();
            let (a, e, c) = ([q[0], q[1]], [q[2], q[3]], [q[4], q[5]]);
            for d in [DistanceKind::SquaredL2, DistanceKind::L2Norm, DistanceKind::L1Norm] {
                let shifted = d.distance([a[0] + c[0], a[1] + c[1]], [e[0] + c[0], e[1] + c[1]]);
                prop_assert_eq!(shifted, d.distance(a, e));
            }
        }
    }
}
