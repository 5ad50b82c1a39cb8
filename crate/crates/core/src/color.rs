//! Visualization: HSV flow coding and label-map rendering.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::pnm::{LabelMap, RgbImage};
use crate::scalar::Scalar;

/// Nearest-rank percentile of `values` (`q` in `[0, 1]`); zero for empty input.
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Standard HSV to RGB with `h` in degrees.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Direct HSV coding: hue is the vector angle `atan2(v, u)`, saturation the
/// magnitude over `max_mag` (clamped to 1), value 1.
///
/// `max_mag` defaults to the 99th-percentile magnitude of the field.
pub fn flow_to_color<T: Scalar>(f: &FlowField<T>, max_mag: Option<T>) -> RgbImage {
    let mags = f.magnitudes();
    let max_mag = max_mag.unwrap_or_else(|| percentile(&mags, 0.99)).as_f64();
    let mut pixels = Vec::with_capacity(3 * f.len());
    for (vec, mag) in f.vectors().iter().zip(&mags) {
        let sat = if max_mag > 0.0 {
            (mag.as_f64() / max_mag).min(1.0)
        } else {
            0.0
        };
        let hue = vec[1].as_f64().atan2(vec[0].as_f64()).to_degrees();
        pixels.extend_from_slice(&hsv_to_rgb(hue, sat, 1.0));
    }
    RgbImage {
        width: f.width(),
        height: f.height(),
        pixels,
    }
}

const BASE_PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [188, 189, 34],
];

/// Fixed palette for `k` layers; beyond eight entries hues follow the golden angle.
pub fn palette(k: usize) -> Vec<[u8; 3]> {
    (0..k)
        .map(|i| {
            BASE_PALETTE
                .get(i)
                .copied()
                .unwrap_or_else(|| hsv_to_rgb(i as f64 * 137.507_764, 0.8, 0.9))
        })
        .collect()
}

/// Paints each site with its layer color, optionally blended 50/50 over `overlay`.
pub fn render_labels(labels: &LabelMap, k: usize, overlay: Option<&RgbImage>) -> Result<RgbImage> {
    if let Some(img) = overlay {
        if (img.width, img.height) != labels.dims() {
            return Err(Error::DimMismatch {
                expected: labels.dims(),
                found: (img.width, img.height),
            });
        }
    }
    let colors = palette(k);
    let mut pixels = Vec::with_capacity(3 * labels.labels.len());
    for (i, &l) in labels.labels.iter().enumerate() {
        let c = *colors
            .get(l as usize)
            .ok_or(Error::LabelOutOfRange { label: l, k })?;
        match overlay {
            Some(img) => {
                for ch in 0..3 {
                    let base = img.pixels[3 * i + ch] as u16;
                    pixels.push((base + c[ch] as u16).div_ceil(2) as u8);
                }
            }
            None => pixels.extend_from_slice(&c),
        }
    }
    RgbImage::new(labels.width, labels.height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_color(&FlowField::<f64>::zeros(3, 2), None);
        assert!(img.pixels.iter().all(|&p| p == 255));
    }

    #[test]
    fn unit_x_vector_is_saturated_red() {
        let f = FlowField::<f64>::from_fn(1, 1, |_, _| [2.0, 0.0]);
        let img = flow_to_color(&f, Some(2.0));
        assert_eq!(img.pixel(0, 0), [255, 0, 0]);
    }

    #[test]
    fn hue_sweep_matches_atan2() {
        let n = 72;
        let f = FlowField::<f64>::from_fn(n, 1, |x, _| {
            let a = x as f64 * std::f64::consts::TAU / n as f64;
            [a.cos(), a.sin()]
        });
        let img = flow_to_color(&f, Some(1.0));
        for x in 0..n {
            let v = f.get(x, 0);
            // independent oracle: piecewise-linear hue ramps at full saturation
            let hue = v[1].atan2(v[0]).to_degrees().rem_euclid(360.0);
            let ramp = |offset: f64| {
                let d = ((hue - offset).rem_euclid(360.0)).min((offset - hue).rem_euclid(360.0));
                (255.0 * (2.0 - d / 60.0).clamp(0.0, 1.0)).round()
            };
            let expected = [ramp(0.0), ramp(120.0), ramp(240.0)];
            let got = img.pixel(x, 0);
            for c in 0..3 {
                assert!((got[c] as f64 - expected[c]).abs() <= 1.0, "x={x} c={c} {got:?} {expected:?}");
            }
        }
    }

    #[test]
    fn scaling_invariance() {
        let f = FlowField::<f64>::from_fn(9, 4, |x, y| [x as f64 - 4.0, y as f64 * 0.7 - 1.0]);
        let g = FlowField::<f64>::from_fn(9, 4, |x, y| {
            let v = f.get(x, y);
            [v[0] * 4.0, v[1] * 4.0]
        });
        assert_eq!(flow_to_color(&f, Some(3.0)), flow_to_color(&g, Some(12.0)));
        assert_eq!(flow_to_color(&f, None), flow_to_color(&g, None));
    }

    #[test]
    fn labels_render_palette() {
        let zeros = LabelMap::new(3, 3, vec![0; 9]).unwrap();
        let img = render_labels(&zeros, 2, None).unwrap();
        assert!(img.pixels.chunks(3).all(|p| p == BASE_PALETTE[0]));

        let checker = LabelMap::new(4, 4, (0..16).map(|i| ((i % 4 + i / 4) % 2) as u8).collect()).unwrap();
        let img = render_labels(&checker, 2, None).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(img.pixel(x, y), BASE_PALETTE[(x + y) % 2]);
            }
        }
    }

    #[test]
    fn overlay_blend_is_channel_mean() {
        let labels = LabelMap::new(2, 1, vec![1, 1]).unwrap();
        let white = RgbImage::filled(2, 1, [255, 255, 255]);
        let img = render_labels(&labels, 2, Some(&white)).unwrap();
        for ch in 0..3 {
            let mean = (255.0 + BASE_PALETTE[1][ch] as f64) / 2.0;
            assert!((img.pixel(0, 0)[ch] as f64 - mean).abs() <= 1.0);
        }
    }

    #[test]
    fn out_of_range_label() {
        let labels = LabelMap::new(1, 1, vec![2]).unwrap();
        assert_eq!(
            render_labels(&labels, 2, None),
            Err(Error::LabelOutOfRange { label: 2, k: 2 })
        );
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 0.9), 90.0);
        assert_eq!(percentile(&[5.0f64], 0.99), 5.0);
    }
}
