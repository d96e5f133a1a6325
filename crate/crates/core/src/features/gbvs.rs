//! Graph-based activation: stationary distribution of a dissimilarity-weighted
//! random walk over a coarse feature grid.

use super::itti::opponent_planes;
use crate::error::{Error, Result};
use crate::imgproc::{
    gaussian_pyramid, oriented_responses, resize_plane, ColorImage, ImagePlane, ORIENTED_SIGMA,
};
use crate::scalar::Scalar;

pub const MIN_SIZE: usize = 64;
pub const GRID_WIDTH: usize = 32;
pub const GRID_HEIGHT: usize = 24;
const FEATURE_LEVEL: usize = 2;
const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 10_000;

/// Dense edge weights `|f(a) - f(b)| exp(-d^2 / 2 sigma^2)`, sigma = grid width / 8.
pub(crate) fn edge_weights(feature: &[f64], gw: usize, gh: usize) -> Vec<f64> {
    let n = gw * gh;
    let sigma = gw as f64 / 8.0;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut wts = vec![0.0; n * n];
    for a in 0..n {
        let (ax, ay) = ((a % gw) as f64, (a / gw) as f64);
        for b in 0..n {
            let (dx, dy) = ((b % gw) as f64 - ax, (b / gw) as f64 - ay);
            wts[a * n + b] = (feature[a] - feature[b]).abs() * (-(dx * dx + dy * dy) * inv).exp();
        }
    }
    wts
}

/// Row-stochastic matrix of the lazy walk `(I + D^-1 W) / 2`; rows with no
/// outgoing weight jump uniformly.
pub(crate) fn transition_matrix(weights: &[f64], n: usize) -> Vec<f64> {
    let mut p = weights.to_vec();
    for a in 0..n {
        let row = &mut p[a * n..(a + 1) * n];
        let degree: f64 = row.iter().sum();
        if degree > 0.0 {
            row.iter_mut().for_each(|v| *v *= 0.5 / degree);
            row[a] += 0.5;
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        }
    }
    p
}

/// Iterates `pi <- pi P` until the L1 change drops below `tol`.
pub(crate) fn power_iterate(p: &[f64], start: Vec<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = start.len();
    let mut pi = start;
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (a, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (nb, &t) in next.iter_mut().zip(&p[a * n..(a + 1) * n]) {
                *nb += mass * t;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if change < tol {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence {
        what: "graph power iteration",
        iterations: max_iter,
    })
}

/// Stationary distribution of one feature grid. Symmetric weights make the walk
/// reversible, so iteration starts from the degree-proportional vector.
pub(crate) fn activation(feature: &[f64], gw: usize, gh: usize) -> Result<Vec<f64>> {
    let n = gw * gh;
    let weights = edge_weights(feature, gw, gh);
    let mut start: Vec<f64> = weights.chunks_exact(n).map(|r| r.iter().sum()).collect();
    let total: f64 = start.iter().sum();
    if total > 0.0 {
        start.iter_mut().for_each(|v| *v /= total);
    } else {
        start = vec![1.0 / n as f64; n];
    }
    power_iterate(&transition_matrix(&weights, n), start, TOLERANCE, MAX_ITERATIONS)
}

fn feature_grids<T: Scalar>(img: &ColorImage<T>) -> Result<[Vec<f64>; 3]> {
    let level = |p: &ImagePlane<T>| -> Result<ImagePlane<T>> {
        Ok(gaussian_pyramid(p, FEATURE_LEVEL + 1)?.levels()[FEATURE_LEVEL].clone())
    };
    let intensity = level(&img.intensity())?;
    let [r, g, b, y] = opponent_planes(img).map(|p| level(&p));
    let (r, g, b, y) = (r?, g?, b?, y?);
    let color = ImagePlane::from_fn(intensity.width(), intensity.height(), |px, py| {
        (r.get(px, py) - g.get(px, py)).abs() + (b.get(px, py) - y.get(px, py)).abs()
    });
    let mut orientation = ImagePlane::filled(intensity.width(), intensity.height(), T::zero());
    for resp in oriented_responses(&intensity, ORIENTED_SIGMA) {
        for (o, v) in orientation.data_mut().iter_mut().zip(resp.data()) {
            *o += v.abs();
        }
    }
    let grid = |p: &ImagePlane<T>| -> Result<Vec<f64>> {
        Ok(resize_plane(p, GRID_WIDTH, GRID_HEIGHT)?
            .data()
            .iter()
            .map(|v| v.as_f64())
            .collect())
    };
    Ok([grid(&intensity)?, grid(&color)?, grid(&orientation)?])
}

pub fn graph_saliency<T: Scalar>(img: &ColorImage<T>) -> Result<ImagePlane<T>> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            what: "graph saliency grid",
        });
    }
    let mut sum = vec![0.0; GRID_WIDTH * GRID_HEIGHT];
    for f in feature_grids(img)? {
        for (s, v) in sum.iter_mut().zip(activation(&f, GRID_WIDTH, GRID_HEIGHT)?) {
            *s += v;
        }
    }
    let grid = ImagePlane::new(GRID_WIDTH, GRID_HEIGHT, sum)?;
    Ok(resize_plane(&grid, w, h)?.cast())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn stationary_sums_to_one_and_matches_degree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (gw, gh) = (8, 6);
        let n = gw * gh;
        let f: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let weights = edge_weights(&f, gw, gh);
        let p = transition_matrix(&weights, n);
        for row in p.chunks_exact(n) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let pi = power_iterate(&p, vec![1.0 / n as f64; n], 1e-13, 100_000).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // reversible chain: pi is proportional to degree
        let degree: Vec<f64> = weights.chunks_exact(n).map(|r| r.iter().sum()).collect();
        let total: f64 = degree.iter().sum();
        for (a, d) in pi.iter().zip(&degree) {
            assert!((a - d / total).abs() < 1e-9);
        }
        let fast = activation(&f, gw, gh).unwrap();
        for (a, b) in pi.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn non_convergence_reported() {
        let p = vec![0.0, 1.0, 1.0, 0.0];
        assert!(matches!(
            power_iterate(&p, vec![1.0, 0.0], 1e-9, 50),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn constant_image_uniform() {
        let m = graph_saliency(&ColorImage::filled(64, 80, [0.6f64; 3])).unwrap();
        let (lo, hi) = m.min_max();
        assert!(hi - lo < 1e-6);
    }

    #[test]
    fn bright_square_pops_out() {
        let img = ColorImage::from_fn(200, 150, |x, y| {
            if (120..150).contains(&x) && (40..70).contains(&y) {
                [0.9f64; 3]
            } else {
                [0.1; 3]
            }
        });
        let (ax, ay) = graph_saliency(&img).unwrap().argmax();
        assert!((120..150).contains(&ax) && (40..70).contains(&ay), "argmax ({ax},{ay})");
    }
}
