//! Gaussian pyramids and an oriented second-derivative filter bank.
//!
//! The oriented bank is steerable: responses at `theta = k * pi / 4` are
//! linear combinations of the three separable basis images `Ixx`, `Ixy`,
//! `Iyy` of a Gaussian-blurred plane. `theta` is the direction of
//! differentiation, so orientation 0 responds to vertical structure.

use std::f64::consts::{E, PI};

use super::filter::{convolve_separable, gaussian_blur, gaussian_taps_with_radius, resample_affine};
use super::ImagePlane;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Scale of the derivative filters, in pixels of the level they run on.
pub const ORIENTED_SIGMA: f64 = 1.0;
/// Smoothing applied to squared responses to form local energy.
pub const ENERGY_SIGMA: f64 = 2.0;
pub const ORIENTATIONS: usize = 4;

/// Energy weights per pyramid scale. Coarser levels lose amplitude to the
/// decimation low-pass; these factors keep the summed band energy of a
/// grating within a few percent of its variance across the pass band.
const SCALE_WEIGHTS: [f64; 3] = [1.0, 1.35, 1.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PyramidKind {
    Gaussian,
    OrientedSubband,
}

/// Placement of a level's samples in input pixel coordinates: sample `(i, j)`
/// sits at `(origin_x + step * i, origin_y + step * j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelGeometry {
    pub width: usize,
    pub height: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub step: f64,
}

impl LevelGeometry {
    pub fn input(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            origin_x: 0.0,
            origin_y: 0.0,
            step: 1.0,
        }
    }

    /// Geometry after [`pyr_down`]: even axes average sample pairs, odd axes
    /// keep the even-indexed samples.
    pub fn down(&self) -> Self {
        let shift = |n: usize| if n % 2 == 0 { 0.5 * self.step } else { 0.0 };
        Self {
            width: self.width.div_ceil(2),
            height: self.height.div_ceil(2),
            origin_x: self.origin_x + shift(self.width),
            origin_y: self.origin_y + shift(self.height),
            step: 2.0 * self.step,
        }
    }
}

/// Bilinear resampling of a plane laid out as `from` onto the grid `to`.
pub fn resample_level<T: Scalar>(
    plane: &ImagePlane<T>,
    from: &LevelGeometry,
    to: &LevelGeometry,
) -> Result<ImagePlane<T>> {
    debug_assert_eq!(plane.dims(), (from.width, from.height));
    if from == to {
        return Ok(plane.clone());
    }
    let a = to.step / from.step;
    resample_affine(
        plane,
        to.width,
        to.height,
        (a, (to.origin_x - from.origin_x) / from.step),
        (a, (to.origin_y - from.origin_y) / from.step),
    )
}

#[derive(Clone, Debug)]
pub struct Pyramid<T> {
    pub kind: PyramidKind,
    levels: Vec<ImagePlane<T>>,
    geometry: Vec<LevelGeometry>,
}

impl<T: Scalar> Pyramid<T> {
    pub fn geometry(&self, i: usize) -> &LevelGeometry {
        &self.geometry[i]
    }

    /// Resamples a plane on level `from`'s grid onto level `to`'s grid.
    pub fn project(&self, plane: &ImagePlane<T>, from: usize, to: usize) -> Result<ImagePlane<T>> {
        resample_level(plane, &self.geometry[from], &self.geometry[to])
    }

    /// Resamples a plane on level `from`'s grid back to the input grid.
    pub fn to_input(&self, plane: &ImagePlane<T>, from: usize) -> Result<ImagePlane<T>> {
        self.project(plane, from, 0)
    }

    pub fn levels(&self) -> &[ImagePlane<T>] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &ImagePlane<T> {
        &self.levels[i]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Number of levels a `w x h` plane supports (each level must shrink both axes).
pub fn max_levels(w: usize, h: usize) -> usize {
    let (mut w, mut h) = (w, h);
    let mut n = 1;
    while w >= 2 && h >= 2 {
        w = w.div_ceil(2);
        h = h.div_ceil(2);
        n += 1;
    }
    n
}

/// Binomial blur, then decimation by two per axis: even-length axes average
/// sample pairs, odd-length axes keep the even-indexed samples so the grid
/// stays symmetric. Output size rounds up.
pub fn pyr_down<T: Scalar>(p: &ImagePlane<T>) -> ImagePlane<T> {
    let taps: Vec<T> = BINOMIAL5.iter().map(|&v| T::lit(v)).collect();
    let blurred = convolve_separable(p, &taps, &taps).expect("odd taps");
    let (w, h) = p.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let pair_x = w % 2 == 0;
    let pair_y = h % 2 == 0;
    let half = T::lit(0.5);
    let row_value = |x: usize, y: usize| {
        if pair_x {
            (blurred.get(2 * x, y) + blurred.get(2 * x + 1, y)) * half
        } else {
            blurred.get(2 * x, y)
        }
    };
    ImagePlane::from_fn(nw, nh, |x, y| {
        if pair_y {
            (row_value(x, 2 * y) + row_value(x, 2 * y + 1)) * half
        } else {
            row_value(x, 2 * y)
        }
    })
}

pub fn gaussian_pyramid<T: Scalar>(p: &ImagePlane<T>, levels: usize) -> Result<Pyramid<T>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
    }
    let (w, h) = p.dims();
    if levels > max_levels(w, h) {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            what: "requested pyramid depth",
        });
    }
    let mut out = Vec::with_capacity(levels);
    let mut geometry = Vec::with_capacity(levels);
    out.push(p.clone());
    geometry.push(LevelGeometry::input(w, h));
    for _ in 1..levels {
        let next = pyr_down(out.last().expect("nonempty"));
        out.push(next);
        geometry.push(geometry.last().expect("nonempty").down());
    }
    Ok(Pyramid {
        kind: PyramidKind::Gaussian,
        levels: out,
        geometry,
    })
}

/// Basis responses of the steerable second-derivative bank.
struct SecondDerivatives<T> {
    xx: ImagePlane<T>,
    xy: ImagePlane<T>,
    yy: ImagePlane<T>,
}

fn derivative_taps<T: Scalar>(sigma: f64) -> (Vec<T>, Vec<T>, Vec<T>) {
    let radius = (4.0 * sigma).ceil() as usize;
    let g: Vec<f64> = gaussian_taps_with_radius::<f64>(sigma, radius);
    let r = radius as isize;
    let s2 = sigma * sigma;
    let d1: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(k, &gk)| -(k as f64) / s2 * gk)
        .collect();
    let mut d2: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(k, &gk)| ((k * k) as f64 / (s2 * s2) - 1.0 / s2) * gk)
        .collect();
    // second derivative must annihilate constants
    let dc: f64 = d2.iter().sum();
    for (v, &gk) in d2.iter_mut().zip(&g) {
        *v -= dc * gk;
    }
    let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    (cast(g), cast(d1), cast(d2))
}

fn second_derivatives<T: Scalar>(p: &ImagePlane<T>, sigma: f64) -> SecondDerivatives<T> {
    let (g, d1, d2) = derivative_taps::<T>(sigma);
    SecondDerivatives {
        xx: convolve_separable(p, &d2, &g).expect("odd taps"),
        xy: convolve_separable(p, &d1, &d1).expect("odd taps"),
        yy: convolve_separable(p, &g, &d2).expect("odd taps"),
    }
}

/// Responses of the four oriented second-derivative filters at `sigma`.
///
/// Gains are normalised so a grating at the filter's peak frequency,
/// differentiated along its own direction, has unit amplitude response.
pub fn oriented_responses<T: Scalar>(p: &ImagePlane<T>, sigma: f64) -> Vec<ImagePlane<T>> {
    let d = second_derivatives(p, sigma);
    let gain = T::lit(sigma * sigma * E / 2.0);
    (0..ORIENTATIONS)
        .map(|k| {
            let theta = k as f64 * PI / ORIENTATIONS as f64;
            let (s, c) = theta.sin_cos();
            let (cxx, cxy, cyy) = (T::lit(c * c), T::lit(2.0 * c * s), T::lit(s * s));
            let data = d
                .xx
                .data()
                .iter()
                .zip(d.xy.data())
                .zip(d.yy.data())
                .map(|((&xx, &xy), &yy)| gain * (cxx * xx + cxy * xy + cyy * yy))
                .collect();
            ImagePlane::from_raw(p.width(), p.height(), data)
        })
        .collect()
}

/// Local oriented energy: squared responses smoothed by `ENERGY_SIGMA`.
///
/// The 2/3 factor makes the four orientations sum to the squared amplitude of
/// a grating regardless of its direction (sum of cos^4 over four angles is 3/2).
pub fn oriented_energies<T: Scalar>(p: &ImagePlane<T>) -> Vec<ImagePlane<T>> {
    let w = T::lit(2.0 / 3.0);
    oriented_responses(p, ORIENTED_SIGMA)
        .into_iter()
        .map(|r| gaussian_blur(&r.map(|v| w * v * v), ENERGY_SIGMA))
        .collect()
}

/// Oriented band energies at `scales` pyramid levels plus the low-pass
/// residual, all resampled to the input resolution.
///
/// Output order is scale-major: `[s0θ0, s0θ1, s0θ2, s0θ3, s1θ0, ..., residual]`.
pub fn steerable_subbands<T: Scalar>(
    p: &ImagePlane<T>,
    orientations: usize,
    scales: usize,
) -> Result<Vec<ImagePlane<T>>> {
    if orientations != ORIENTATIONS {
        return Err(Error::InvalidArgument(format!(
            "filter bank is steerable at {ORIENTATIONS} orientations, got {orientations}"
        )));
    }
    let (w, h) = p.dims();
    if w.min(h) < 1 << scales {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            what: "steerable pyramid needs min dimension >= 2^scales",
        });
    }
    let pyr = gaussian_pyramid(p, scales + 1)?;
    let mut out = Vec::with_capacity(orientations * scales + 1);
    for (s, level) in pyr.levels()[..scales].iter().enumerate() {
        let weight = T::lit(SCALE_WEIGHTS[s.min(SCALE_WEIGHTS.len() - 1)]);
        for e in oriented_energies(level) {
            out.push(pyr.to_input(&e.map(|v| v * weight), s)?);
        }
    }
    out.push(pyr.to_input(pyr.level(scales), scales)?);
    Ok(out)
}

/// One subband plane set wrapped as a pyramid for callers that keep levels.
pub fn subband_pyramid<T: Scalar>(p: &ImagePlane<T>, scales: usize) -> Result<Pyramid<T>> {
    let levels = steerable_subbands(p, ORIENTATIONS, scales)?;
    let geometry = vec![LevelGeometry::input(p.width(), p.height()); levels.len()];
    Ok(Pyramid {
        kind: PyramidKind::OrientedSubband,
        levels,
        geometry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_is_input() {
        let p = ImagePlane::from_fn(5, 3, |x, y| (x + y) as f64);
        let pyr = gaussian_pyramid(&p, 1).unwrap();
        assert_eq!(pyr.len(), 1);
        assert_eq!(pyr.level(0), &p);
    }

    #[test]
    fn constant_levels_and_sizes() {
        let p = ImagePlane::filled(8, 8, 0.42f64);
        let pyr = gaussian_pyramid(&p, 3).unwrap();
        let sizes: Vec<_> = pyr.levels().iter().map(|l| l.dims()).collect();
        assert_eq!(sizes, vec![(8, 8), (4, 4), (2, 2)]);
        for l in pyr.levels() {
            assert!(l.data().iter().all(|&v| (v - 0.42).abs() < 1e-15));
        }
    }

    #[test]
    fn ramp_mean_preserved() {
        let p = ImagePlane::from_fn(16, 16, |x, y| (x as f64 + 0.5 * y as f64) / 24.0);
        let pyr = gaussian_pyramid(&p, 2).unwrap();
        assert!((pyr.level(1).mean() - p.mean()).abs() < 1e-3);
    }

    #[test]
    fn odd_sizes_round_up() {
        let p = ImagePlane::filled(200, 200, 1.0f64);
        let pyr = gaussian_pyramid(&p, 9).unwrap();
        let widths: Vec<_> = pyr.levels().iter().map(|l| l.width()).collect();
        assert_eq!(widths, vec![200, 100, 50, 25, 13, 7, 4, 2, 1]);
        assert!(gaussian_pyramid(&p, 10).is_err());
    }

    #[test]
    fn subband_count_and_constant_response() {
        let p = ImagePlane::filled(32, 24, 0.7f64);
        let bands = steerable_subbands(&p, 4, 3).unwrap();
        assert_eq!(bands.len(), 13);
        for b in &bands[..12] {
            assert!(b.data().iter().all(|v| v.abs() < 1e-6));
            assert_eq!(b.dims(), (32, 24));
        }
        assert!(bands[12].data().iter().all(|v| (v - 0.7).abs() < 1e-9));
    }

    #[test]
    fn too_small_for_scales() {
        let p = ImagePlane::filled(7, 40, 0.0f64);
        assert!(matches!(
            steerable_subbands(&p, 4, 3),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(steerable_subbands(&ImagePlane::filled(8, 8, 0.0), 4, 3).is_ok());
    }

    #[test]
    fn vertical_grating_selects_orientation_zero() {
        // period matching the finest scale's peak frequency sqrt(2)/sigma
        let freq = 2f64.sqrt() / ORIENTED_SIGMA;
        let p = ImagePlane::from_fn(64, 64, |x, _| 0.5 + 0.4 * (freq * x as f64).cos());
        let bands = steerable_subbands(&p, 4, 3).unwrap();
        let energy: Vec<f64> = bands[..12].iter().map(|b| b.mean()).collect();
        let best = energy
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 0, "energies {energy:?}");
    }

    #[test]
    fn grating_energy_close_to_variance() {
        // band-limited gratings spanning the three scales' pass band
        for k in 0..18 {
            let freq = 2f64.sqrt() * 2f64.powf(-(k as f64) / 8.0);
            for angle in [0.0, 0.4, 1.3, 2.2] {
                let (s, c) = f64::sin_cos(angle);
                let p = ImagePlane::from_fn(128, 128, |x, y| {
                    0.3 * (freq * (c * x as f64 + s * y as f64)).cos()
                });
                let bands = steerable_subbands(&p, 4, 3).unwrap();
                let residual = bands[12].data().iter().map(|v| v * v).sum::<f64>()
                    / bands[12].len() as f64;
                let total: f64 = bands[..12].iter().map(|b| b.mean()).sum::<f64>() + residual;
                let ratio = total / p.variance();
                assert!((ratio - 1.0).abs() < 0.2, "freq {freq} angle {angle}: {ratio}");
            }
        }
    }
}
