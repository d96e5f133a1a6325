//! Single-scale region-covariance saliency over 8x8 blocks.

use crate::error::{Error, Result};
use crate::imgproc::{reflect_index, resize_plane, ColorImage, ImagePlane};
use crate::linalg::generalized_eigenvalues;
use crate::scalar::Scalar;

pub const MIN_SIZE: usize = 64;
pub const BLOCK: usize = 8;
pub const NEIGHBORS: usize = 24;
const DIM: usize = 6;
const REGULARIZER: f64 = 1e-6;

/// Covariance of `[I, |dI/dx|, |dI/dy|, R, G, B]` over every block, row-major.
fn block_covariances<T: Scalar>(img: &ColorImage<T>, bw: usize, bh: usize) -> Vec<[f64; DIM * DIM]> {
    let intensity = img.intensity();
    let (w, h) = img.dims();
    let at = |p: &ImagePlane<T>, x: isize, y: isize| p.get(reflect_index(x, w), reflect_index(y, h)).as_f64();
    let feature = |x: usize, y: usize| -> [f64; DIM] {
        let (xi, yi) = (x as isize, y as isize);
        [
            intensity.get(x, y).as_f64(),
            0.5 * (at(&intensity, xi + 1, yi) - at(&intensity, xi - 1, yi)).abs(),
            0.5 * (at(&intensity, xi, yi + 1) - at(&intensity, xi, yi - 1)).abs(),
            img.red.get(x, y).as_f64(),
            img.green.get(x, y).as_f64(),
            img.blue.get(x, y).as_f64(),
        ]
    };
    let mut out = Vec::with_capacity(bw * bh);
    let count = (BLOCK * BLOCK) as f64;
    for by in 0..bh {
        for bx in 0..bw {
            let samples: Vec<[f64; DIM]> = (0..BLOCK * BLOCK)
                .map(|k| feature(bx * BLOCK + k % BLOCK, by * BLOCK + k / BLOCK))
                .collect();
            let mut mean = [0.0; DIM];
            for s in &samples {
                for k in 0..DIM {
                    mean[k] += s[k] / count;
                }
            }
            let mut cov = [0.0; DIM * DIM];
            for s in &samples {
                for a in 0..DIM {
                    for b in 0..DIM {
                        cov[a * DIM + b] += (s[a] - mean[a]) * (s[b] - mean[b]) / count;
                    }
                }
            }
            for a in 0..DIM {
                cov[a * DIM + a] += REGULARIZER;
            }
            out.push(cov);
        }
    }
    out
}

/// Affine-invariant distance `sqrt(sum ln^2 lambda_i)` over generalised eigenvalues.
pub fn covariance_distance(a: &[f64], b: &[f64], n: usize) -> Result<f64> {
    let ev = generalized_eigenvalues(a, b, n)?;
    if let Some(bad) = ev.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("generalised eigenvalue {bad:e}")));
    }
    Ok(ev.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

pub fn covariance_saliency<T: Scalar>(img: &ColorImage<T>) -> Result<ImagePlane<T>> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            what: "block covariance grid",
        });
    }
    let (bw, bh) = (w / BLOCK, h / BLOCK);
    let covs = block_covariances(img, bw, bh);
    let n = bw * bh;
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let (ix, iy) = ((i % bw) as isize, (i / bw) as isize);
        let mut others: Vec<(isize, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let (dx, dy) = ((j % bw) as isize - ix, (j / bw) as isize - iy);
                (dx * dx + dy * dy, j)
            })
            .collect();
        others.sort_unstable();
        let k = NEIGHBORS.min(others.len());
        let mut total = 0.0;
        for &(_, j) in &others[..k] {
            total += covariance_distance(&covs[i], &covs[j], DIM)?;
        }
        scores.push(total / k as f64);
    }
    let grid = ImagePlane::new(bw, bh, scores)?;
    Ok(resize_plane(&grid, w, h)?.cast())
}
