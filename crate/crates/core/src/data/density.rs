use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Fixation;
use crate::error::{Error, Result};
use crate::imgproc::{gaussian_blur, ImagePlane};

/// Density blur at the 200 pixel working resolution.
pub const DENSITY_SIGMA: f64 = 6.0;
pub const POS_QUANTILE: f64 = 0.8;
pub const NEG_QUANTILE: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LabeledPixel {
    pub x: usize,
    pub y: usize,
    pub label: i8,
}

/// Working-resolution pixel containing fixation `f` of an `orig`-sized image.
pub fn to_working(f: &Fixation, orig: (usize, usize), work: (usize, usize)) -> (usize, usize) {
    let map = |v: f64, from: usize, to: usize| ((v * to as f64 / from as f64).floor().max(0.0) as usize).min(to - 1);
    (map(f.x, orig.0, work.0), map(f.y, orig.1, work.1))
}

/// Distinct fixated working pixels, sorted row-major.
pub fn fixated_pixels(fixations: &[Fixation], orig: (usize, usize), work: (usize, usize)) -> Vec<(usize, usize)> {
    let mut px: Vec<(usize, usize)> = fixations.iter().map(|f| to_working(f, orig, work)).collect();
    px.sort_by_key(|&(x, y)| (y, x));
    px.dedup();
    px
}

/// Impulses at the mapped fixations, Gaussian blurred, scaled to a maximum of 1.
pub fn density_map(
    fixations: &[Fixation],
    orig: (usize, usize),
    work: (usize, usize),
    sigma: f64,
) -> Result<ImagePlane<f64>> {
    if fixations.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let mut impulses = ImagePlane::filled(work.0, work.1, 0.0f64);
    for f in fixations {
        let (x, y) = to_working(f, orig, work);
        impulses.set(x, y, impulses.get(x, y) + 1.0);
    }
    let blurred = gaussian_blur(&impulses, sigma);
    let (_, hi) = blurred.min_max();
    Ok(blurred.map(|v| v / hi))
}

/// Nearest-rank quantile of the values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

fn draw(region: &[usize], k: usize, rng: &mut ChaCha8Rng, what: &str) -> Result<Vec<usize>> {
    if region.len() < k {
        return Err(Error::RegionTooSmall(format!(
            "{what} region has {} pixels, need {k}",
            region.len()
        )));
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, region.len(), k)
        .into_iter()
        .map(|i| region[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Positives from pixels at or above the 80th value percentile, negatives from
/// pixels at or below the 70th, uniformly without replacement. Ties at a
/// threshold belong to that region; when both thresholds coincide, the
/// positive region is restricted to values strictly above it.
pub fn sample_points(d: &ImagePlane<f64>, n_pos: usize, n_neg: usize, seed: u64) -> Result<Vec<LabeledPixel>> {
    let mut sorted = d.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    let (hi, lo) = (quantile(&sorted, POS_QUANTILE), quantile(&sorted, NEG_QUANTILE));
    let pos: Vec<usize> = (0..d.len()).filter(|&i| d.data()[i] >= hi && d.data()[i] > lo).collect();
    let neg: Vec<usize> = (0..d.len()).filter(|&i| d.data()[i] <= lo).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = d.width();
    let mut out = Vec::with_capacity(n_pos + n_neg);
    for (region, k, label, what) in [(&pos, n_pos, 1i8, "positive"), (&neg, n_neg, -1, "negative")] {
        for i in draw(region, k, &mut rng, what)? {
            out.push(LabeledPixel { x: i % w, y: i / w, label });
        }
    }
    Ok(out)
}

/// Percentile thresholds `(p70, p80)` the sampler uses for `d`.
pub fn sampling_thresholds(d: &ImagePlane<f64>) -> (f64, f64) {
    let mut sorted = d.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile(&sorted, NEG_QUANTILE), quantile(&sorted, POS_QUANTILE))
}
