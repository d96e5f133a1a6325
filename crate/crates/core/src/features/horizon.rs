//! Horizon band from horizontal-edge energy, and the center-bias map.

use crate::imgproc::{reflect_index, ColorImage, ImagePlane};
use crate::scalar::Scalar;

/// Band width as a fraction of image height.
pub const HORIZON_SIGMA_FRACTION: f64 = 0.05;
/// Center-map spread as a fraction of the smaller dimension.
pub const CENTER_SIGMA_FRACTION: f64 = 0.25;

/// Row with the largest vertical-gradient energy; ties go to the row closest
/// to the vertical center, then to the upper row.
pub fn horizon_row<T: Scalar>(img: &ColorImage<T>) -> f64 {
    let intensity = img.intensity();
    let (w, h) = intensity.dims();
    let energy: Vec<f64> = (0..h)
        .map(|r| {
            let up = intensity.row(reflect_index(r as isize - 1, h));
            let down = intensity.row(reflect_index(r as isize + 1, h));
            (0..w)
                .map(|x| {
                    let d = down[x].as_f64() - up[x].as_f64();
                    d * d
                })
                .sum()
        })
        .collect();
    let center = (h as f64 - 1.0) / 2.0;
    let max = energy.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return center;
    }
    (0..h)
        .filter(|&r| energy[r] >= max * (1.0 - 1e-9))
        .min_by(|&a, &b| {
            let (da, db) = ((a as f64 - center).abs(), (b as f64 - center).abs());
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("at least one maximal row") as f64
}

pub fn horizon_map<T: Scalar>(img: &ColorImage<T>) -> ImagePlane<T> {
    let (w, h) = img.dims();
    let row = horizon_row(img);
    let sigma = HORIZON_SIGMA_FRACTION * h as f64;
    ImagePlane::from_fn(w, h, |_, y| {
        let d = y as f64 - row;
        T::lit((-d * d / (2.0 * sigma * sigma)).exp())
    })
}

/// Isotropic Gaussian with peak 1 at the image center.
pub fn center_map<T: Scalar>(w: usize, h: usize) -> ImagePlane<T> {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let sigma = CENTER_SIGMA_FRACTION * w.min(h) as f64;
    ImagePlane::from_fn(w, h, |x, y| {
        // |x - cx| is symmetric under x -> w-1-x in exact arithmetic
        let dx = (x as f64 - cx).abs();
        let dy = (y as f64 - cy).abs();
        T::lit((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp())
    })
}
