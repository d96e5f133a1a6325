//! Raw color planes plus joint and marginal color log-probabilities.

use crate::imgproc::{gaussian_blur, ColorImage, ImagePlane};
use crate::scalar::Scalar;

pub const COLOR_FEATURES: usize = 11;
pub const JOINT_BLUR_SIGMAS: [f64; 5] = [0.0, 2.0, 4.0, 8.0, 16.0];
const BINS: usize = 8;

fn bin<T: Scalar>(v: T) -> usize {
    ((v.as_f64() * BINS as f64).floor().max(0.0) as usize).min(BINS - 1)
}

fn joint_log_prob<T: Scalar>(planes: [&ImagePlane<T>; 3]) -> ImagePlane<f64> {
    let (w, h) = planes[0].dims();
    let n = w * h;
    let index: Vec<usize> = (0..n)
        .map(|i| {
            let [r, g, b] = planes.map(|p| bin(p.data()[i]));
            (r * BINS + g) * BINS + b
        })
        .collect();
    let mut counts = vec![0usize; BINS * BINS * BINS];
    for &k in &index {
        counts[k] += 1;
    }
    let data = index
        .iter()
        .map(|&k| (counts[k] as f64 / n as f64).ln())
        .collect();
    ImagePlane::from_raw(w, h, data)
}

fn marginal_log_prob<T: Scalar>(p: &ImagePlane<T>) -> ImagePlane<T> {
    let mut counts = [0usize; BINS];
    for &v in p.data() {
        counts[bin(v)] += 1;
    }
    let n = p.len() as f64;
    p.map(|v| T::lit((counts[bin(v)] as f64 / n).ln()))
}

/// Three raw planes, the joint-histogram log-probability map smoothed at each
/// blur in [`JOINT_BLUR_SIGMAS`], then per-channel marginal log-probabilities.
pub fn color_features<T: Scalar>(img: &ColorImage<T>) -> Vec<ImagePlane<T>> {
    let mut out: Vec<ImagePlane<T>> = img.channels().iter().map(|&p| p.clone()).collect();
    let joint = joint_log_prob(img.channels());
    for sigma in JOINT_BLUR_SIGMAS {
        out.push(gaussian_blur(&joint, sigma).cast());
    }
    for p in img.channels() {
        out.push(marginal_log_prob(p));
    }
    out
}
