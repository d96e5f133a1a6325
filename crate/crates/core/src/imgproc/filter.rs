//! Separable convolution, Gaussian taps and bilinear resampling.
//!
//! Borders are handled by half-sample symmetric reflection
//! (`... c b a | a b c ... x y z | z y x ...`), which keeps the total mass of
//! a normalised symmetric kernel.

use super::{ColorImage, ImagePlane};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maps an arbitrary index into `0..n` by symmetric reflection.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Sum of taps snapped to exactly 0 or 1 when it is within rounding of either.
fn snapped_gain<T: Scalar>(taps: &[T]) -> T {
    let sum: T = taps.iter().copied().sum();
    let mag: T = taps.iter().map(|t| t.abs()).sum();
    let slack = T::epsilon() * T::lit(8.0) * (mag + T::one());
    if (sum - T::one()).abs() <= slack {
        T::one()
    } else if sum.abs() <= slack {
        T::zero()
    } else {
        sum
    }
}

/// Convolves `line` with `taps` centred on the middle tap.
///
/// Evaluated as `gain * x[i] + sum_k taps[k] * (x[i - k] - x[i])`, which is
/// algebraically the ordinary convolution but returns constants unchanged
/// for unit-gain kernels and exact zeros for zero-gain kernels.
fn convolve_line<T: Scalar>(line: &[T], taps: &[T], gain: T, out: &mut [T]) {
    let n = line.len();
    let r = (taps.len() / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let centre = line[i];
        let mut acc = T::zero();
        for (k, &t) in taps.iter().enumerate() {
            let offset = k as isize - r;
            let src = i as isize - offset;
            let v = if src >= 0 && (src as usize) < n {
                line[src as usize]
            } else {
                line[reflect_index(src, n)]
            };
            acc += t * (v - centre);
        }
        *o = gain * centre + acc;
    }
}

/// Separable 2-D convolution, horizontal taps first.
pub fn convolve_separable<T: Scalar>(
    plane: &ImagePlane<T>,
    kx: &[T],
    ky: &[T],
) -> Result<ImagePlane<T>> {
    for taps in [kx, ky] {
        if taps.len() % 2 == 0 {
            return Err(Error::EvenTaps(taps.len()));
        }
    }
    let (w, h) = plane.dims();
    let gx = snapped_gain(kx);
    let gy = snapped_gain(ky);

    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        convolve_line(plane.row(y), kx, gx, &mut tmp[y * w..(y + 1) * w]);
    }

    let mut out = vec![T::zero(); w * h];
    let mut col = vec![T::zero(); h];
    let mut col_out = vec![T::zero(); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = tmp[y * w + x];
        }
        convolve_line(&col, ky, gy, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    Ok(ImagePlane::from_raw(w, h, out))
}

/// Normalised sampled Gaussian with radius `ceil(3 sigma)`; `sigma <= 0` gives `[1]`.
pub fn gaussian_taps<T: Scalar>(sigma: f64) -> Vec<T> {
    if sigma <= 0.0 {
        return vec![T::one()];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    gaussian_taps_with_radius(sigma, radius as usize)
}

pub(crate) fn gaussian_taps_with_radius<T: Scalar>(sigma: f64, radius: usize) -> Vec<T> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / sum)).collect()
}

pub fn gaussian_blur<T: Scalar>(plane: &ImagePlane<T>, sigma: f64) -> ImagePlane<T> {
    if sigma <= 0.0 {
        return plane.clone();
    }
    let taps = gaussian_taps::<T>(sigma);
    convolve_separable(plane, &taps, &taps).expect("odd gaussian taps")
}

/// Source sample positions `a * i + b` for each destination index, clamped.
fn axis_weights<T: Scalar>(src: usize, dst: usize, (a, b): (f64, f64)) -> Vec<(usize, usize, T)> {
    (0..dst)
        .map(|i| {
            let c = (a * i as f64 + b).clamp(0.0, (src - 1) as f64);
            let i0 = c.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, T::lit(c - i0 as f64))
        })
        .collect()
}

/// Bilinear resampling where destination pixel `(i, j)` reads the source at
/// `(ax * i + bx, ay * j + by)`; coordinates are clamped to the source.
pub fn resample_affine<T: Scalar>(
    plane: &ImagePlane<T>,
    w: usize,
    h: usize,
    x_map: (f64, f64),
    y_map: (f64, f64),
) -> Result<ImagePlane<T>> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
        });
    }
    let (sw, sh) = plane.dims();
    let xs = axis_weights::<T>(sw, w, x_map);
    let ys = axis_weights::<T>(sh, h, y_map);
    let src = plane.data();
    let mut out = Vec::with_capacity(w * h);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let a = src[y0 * sw + x0];
            let b = src[y0 * sw + x1];
            let c = src[y1 * sw + x0];
            let d = src[y1 * sw + x1];
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    Ok(ImagePlane::from_raw(w, h, out))
}

/// Bilinear resampling with pixel-centre alignment.
pub fn resize_plane<T: Scalar>(plane: &ImagePlane<T>, w: usize, h: usize) -> Result<ImagePlane<T>> {
    if plane.dims() == (w, h) {
        return Ok(plane.clone());
    }
    let (sw, sh) = plane.dims();
    let centred = |src: usize, dst: usize| {
        let a = src as f64 / dst.max(1) as f64;
        (a, 0.5 * a - 0.5)
    };
    resample_affine(plane, w, h, centred(sw, w), centred(sh, h))
}

/// Bilinear resize of all three channels; values stay in [0, 1].
pub fn resize_bilinear<T: Scalar>(img: &ColorImage<T>, w: usize, h: usize) -> Result<ColorImage<T>> {
    let clamp = |p: ImagePlane<T>| p.map(|v| v.max(T::zero()).min(T::one()));
    Ok(ColorImage {
        red: clamp(resize_plane(&img.red, w, h)?),
        green: clamp(resize_plane(&img.green, w, h)?),
        blue: clamp(resize_plane(&img.blue, w, h)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_convolution(p: &ImagePlane<f64>, kx: &[f64], ky: &[f64]) -> ImagePlane<f64> {
        let (w, h) = p.dims();
        let rx = (kx.len() / 2) as isize;
        let ry = (ky.len() / 2) as isize;
        ImagePlane::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for (j, &ty) in ky.iter().enumerate() {
                for (i, &tx) in kx.iter().enumerate() {
                    let sx = x as isize - (i as isize - rx);
                    let sy = y as isize - (j as isize - ry);
                    // symmetric reflection written out for small overhang
                    let fx = if sx < 0 { -sx - 1 } else if sx >= w as isize { 2 * w as isize - sx - 1 } else { sx };
                    let fy = if sy < 0 { -sy - 1 } else if sy >= h as isize { 2 * h as isize - sy - 1 } else { sy };
                    acc += tx * ty * p.get(fx as usize, fy as usize);
                }
            }
            acc
        })
    }

    #[test]
    fn reflect_wraps_symmetrically() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-5, 1), 0);
    }

    #[test]
    fn unit_kernel_is_identity() {
        let p = ImagePlane::from_fn(7, 5, |x, y| (x * 3 + y * 11) as f64 * 0.017);
        let out = convolve_separable(&p, &[1.0], &[1.0]).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn normalized_kernel_keeps_constants_exactly() {
        let p = ImagePlane::filled(9, 6, 0.3);
        let taps = gaussian_taps::<f64>(1.7);
        let out = convolve_separable(&p, &taps, &taps).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn impulse_matches_dense_oracle() {
        let mut p = ImagePlane::filled(5, 5, 0.0);
        p.set(2, 2, 1.0);
        let bx = [1.0 / 3.0; 3];
        let out = convolve_separable(&p, &bx, &bx).unwrap();
        let oracle = dense_convolution(&p, &bx, &bx);
        for (a, b) in out.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // off-centre impulse exercises the reflected border
        let mut q = ImagePlane::filled(5, 5, 0.0);
        q.set(0, 4, 1.0);
        let kx = [0.2, 0.5, 0.3];
        let ky = [0.1, 0.6, 0.3];
        let out = convolve_separable(&q, &kx, &ky).unwrap();
        let oracle = dense_convolution(&q, &kx, &ky);
        for (a, b) in out.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn even_taps_rejected() {
        let p = ImagePlane::filled(3, 3, 1.0);
        assert!(matches!(
            convolve_separable(&p, &[0.5, 0.5], &[1.0]),
            Err(Error::EvenTaps(2))
        ));
    }

    #[test]
    fn resize_identity_and_constants() {
        let img = ColorImage::from_fn(6, 4, |x, y| [x as f64 / 6.0, y as f64 / 4.0, 0.5]);
        assert_eq!(resize_bilinear(&img, 6, 4).unwrap(), img);

        let flat = ColorImage::filled(13, 7, [0.3, 0.3, 0.3]);
        for (w, h) in [(1, 1), (5, 9), (200, 200), (13, 7)] {
            let r = resize_bilinear(&flat, w, h).unwrap();
            assert_eq!(r.dims(), (w, h));
            assert!(r.red.data().iter().all(|&v| v == 0.3));
            let back = resize_bilinear(&r, 13, 7).unwrap();
            assert_eq!(back, flat);
        }
    }

    #[test]
    fn checkerboard_halves_to_gray() {
        let p = ImagePlane::from_fn(4, 4, |x, y| ((x + y) % 2) as f64);
        let img = ColorImage::from_gray(&p);
        let r = resize_bilinear(&img, 2, 2).unwrap();
        for &v in r.red.data() {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_target_rejected() {
        let img = ColorImage::filled(3, 3, [0.0, 0.0, 0.0]);
        assert!(resize_bilinear(&img, 0, 3).is_err());
        assert!(resize_bilinear(&img, 3, 0).is_err());
    }
}
