//! Self-information of subband energy vectors under a Gaussian fit to the image.

use crate::error::{Error, Result};
use crate::imgproc::{steerable_subbands, ColorImage, ImagePlane, ORIENTATIONS};
use crate::linalg::{cholesky, forward_substitute, log_det_from_cholesky};
use crate::scalar::Scalar;

pub const MIN_SIZE: usize = 64;
const SUBBAND_SCALES: usize = 3;
const REGULARIZER: f64 = 1e-6;

/// `-log p(v(x))` for the 13-dimensional subband vector at each pixel.
pub fn torralba_saliency<T: Scalar>(img: &ColorImage<T>) -> Result<ImagePlane<T>> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            what: "subband statistics",
        });
    }
    let bands = steerable_subbands(&img.intensity(), ORIENTATIONS, SUBBAND_SCALES)?;
    Ok(self_information(&bands)?.cast())
}

/// Gaussian negative log-density of each pixel's channel vector.
pub(crate) fn self_information<T: Scalar>(bands: &[ImagePlane<T>]) -> Result<ImagePlane<f64>> {
    let d = bands.len();
    let (w, h) = bands[0].dims();
    let n = w * h;
    let mean: Vec<f64> = bands.iter().map(|b| b.mean().as_f64()).collect();
    let mut cov = vec![0.0; d * d];
    let mut v = vec![0.0; d];
    for i in 0..n {
        for k in 0..d {
            v[k] = bands[k].data()[i].as_f64() - mean[k];
        }
        for a in 0..d {
            for b in 0..=a {
                cov[a * d + b] += v[a] * v[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            cov[a * d + b] /= n as f64;
            cov[b * d + a] = cov[a * d + b];
        }
        cov[a * d + a] += REGULARIZER;
    }
    let l = cholesky(&cov, d)?;
    let constant = 0.5 * log_det_from_cholesky(&l, d) + 0.5 * d as f64 * std::f64::consts::TAU.ln();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        for k in 0..d {
            v[k] = bands[k].data()[i].as_f64() - mean[k];
        }
        forward_substitute(&l, d, &mut v);
        let maha: f64 = v.iter().map(|z| z * z).sum();
        out.push(0.5 * maha + constant);
    }
    ImagePlane::new(w, h, out)
}
