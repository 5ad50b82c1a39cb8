//! Dense optical-flow fields.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A `width x height` grid of `(u, v)` motion vectors in pixels/frame, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    width: usize,
    height: usize,
    vectors: Vec<[T; 2]>,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(width: usize, height: usize, vectors: Vec<[T; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::BadDims {
                width: width as i64,
                height: height as i64,
            });
        }
        if vectors.len() != width * height {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (vectors.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            vectors,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| [T::zero(); 2])
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 2]) -> Self {
        assert!(width > 0 && height > 0, "flow field dimensions must be positive");
        let mut vectors = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                vectors.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            vectors,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of sites `I = W * H`.
    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 2] {
        self.vectors[y * self.width + x]
    }

    #[inline]
    pub fn vectors(&self) -> &[[T; 2]] {
        &self.vectors
    }

    #[inline]
    pub fn vectors_mut(&mut self) -> &mut [[T; 2]] {
        &mut self.vectors
    }

    pub fn is_finite(&self) -> bool {
        self.vectors
            .iter()
            .all(|v| v[0].is_finite() && v[1].is_finite())
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.vectors.iter().map(|v| v[0].hypot(v[1])).collect()
    }

    /// Sitewise sum of two fields of equal size.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        let vectors = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            vectors,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        let vectors = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            vectors,
        })
    }

    pub fn cast<U: Scalar>(&self) -> FlowField<U> {
        FlowField {
            width: self.width,
            height: self.height,
            vectors: self
                .vectors
                .iter()
                .map(|v| [U::lit(v[0].as_f64()), U::lit(v[1].as_f64())])
                .collect(),
        }
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// Bilinear resampling onto a `new_w x new_h` grid with pixel-center alignment.
///
/// The `u` components are scaled by `new_w / W` and `v` by `new_h / H`, so the
/// vectors are expressed in pixels of the resampled grid.
pub fn resize_bilinear<T: Scalar>(f: &FlowField<T>, new_w: usize, new_h: usize) -> FlowField<T> {
    assert!(new_w > 0 && new_h > 0, "target dimensions must be positive");
    let (w, h) = f.dims();
    if (w, h) == (new_w, new_h) {
        return f.clone();
    }
    let sx = w as f64 / new_w as f64;
    let sy = h as f64 / new_h as f64;
    let scale_u = T::lit(new_w as f64 / w as f64);
    let scale_v = T::lit(new_h as f64 / h as f64);
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;

    FlowField::from_fn(new_w, new_h, |x, y| {
        let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let x0 = src_x.floor() as usize;
        let y0 = src_y.floor() as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let tx = T::lit(src_x - x0 as f64);
        let ty = T::lit(src_y - y0 as f64);
        let one = T::one();
        let mut out = [T::zero(); 2];
        for (c, o) in out.iter_mut().enumerate() {
            let top = f.get(x0, y0)[c] * (one - tx) + f.get(x1, y0)[c] * tx;
            let bottom = f.get(x0, y1)[c] * (one - tx) + f.get(x1, y1)[c] * tx;
            *o = top * (one - ty) + bottom * ty;
        }
        [out[0] * scale_u, out[1] * scale_v]
    })
}
