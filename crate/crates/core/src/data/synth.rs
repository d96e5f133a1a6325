use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, DatasetItem, Fixation, ImageSource, Layout, MapSource};
use crate::error::{Error, Result};
use crate::imgproc::{gaussian_blur, ColorImage, ImagePlane};

pub const SYNTH_SIZE: usize = 200;
pub const FIXATIONS_PER_IMAGE: usize = 20;
/// External channels of the mixed generator: the planted-object detector first,
/// then decoy detectors that never mark anything salient.
pub const SYNTH_EXTERNAL_CHANNELS: usize = 4;
const SUBJECTS: usize = 5;
/// Ground-truth floor outside salient regions.
const BASELINE: f64 = 0.002;
/// Disk radius covering 5% of the image.
const DISK_RADIUS: f64 = 25.23;
const TEXTURE_SIDE: usize = 48;
const OBJECT_SIDE: usize = 42;
/// Correlation length of the interaction fields.
const FIELD_SIGMA: f64 = 12.0;

/// Ground-truth saliency rule of a synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// One colored disk on a gray background.
    DiskPopout,
    /// Noise images with uniform ground truth.
    Uniform,
    /// Disk, texture patch or planted object (visible only to the external
    /// detector maps), one per image.
    Mixed,
    /// Saliency is the positive part of the product of two signed color fields.
    Interaction,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::DiskPopout => "disk",
            Generator::Uniform => "uniform",
            Generator::Mixed => "mixed",
            Generator::Interaction => "interaction",
        }
    }

    /// External channels the generated items carry.
    pub fn external_channels(self) -> usize {
        match self {
            Generator::Mixed => SYNTH_EXTERNAL_CHANNELS,
            _ => 0,
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(Generator::DiskPopout),
            "uniform" => Ok(Generator::Uniform),
            "mixed" => Ok(Generator::Mixed),
            "interaction" => Ok(Generator::Interaction),
            other => Err(Error::InvalidArgument(format!("unknown generator `{other}`"))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Scene {
    image: ColorImage<f32>,
    truth: ImagePlane<f64>,
    external: Option<Vec<ImagePlane<f32>>>,
}

fn noisy_background(rng: &mut ChaCha8Rng, level: f64, amplitude: f64) -> ImagePlane<f64> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let raw: ImagePlane<f64> = ImagePlane::from_fn(SYNTH_SIZE, SYNTH_SIZE, |_, _| noise.sample(rng));
    let smooth = gaussian_blur(&raw, 3.0);
    let (lo, hi) = smooth.min_max();
    smooth.map(|v| level + amplitude * ((v - lo) / (hi - lo).max(1e-12) - 0.5))
}

fn gray_image(p: &ImagePlane<f64>) -> ColorImage<f32> {
    ColorImage::from_fn(p.width(), p.height(), |x, y| [p.get(x, y) as f32; 3])
}

fn with_floor(region: &ImagePlane<f64>) -> ImagePlane<f64> {
    region.map(|v| v.max(BASELINE))
}

/// Smooth indicator of a disk, 1 inside and 0 outside.
fn disk_indicator(cx: f64, cy: f64, r: f64) -> ImagePlane<f64> {
    ImagePlane::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
        (r + 0.5 - d).clamp(0.0, 1.0)
    })
}

fn box_indicator(x0: usize, y0: usize, side: usize) -> ImagePlane<f64> {
    ImagePlane::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        if (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
}

fn random_hue(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let palette = [
        [0.9, 0.15, 0.1],
        [0.1, 0.8, 0.2],
        [0.15, 0.25, 0.95],
        [0.95, 0.85, 0.1],
        [0.85, 0.1, 0.8],
        [0.1, 0.85, 0.9],
    ];
    palette[rng.random_range(0..palette.len())]
}

fn disk_scene(rng: &mut ChaCha8Rng) -> Scene {
    let bg = noisy_background(rng, 0.45, 0.12);
    let margin = DISK_RADIUS + 8.0;
    let cx = rng.random_range(margin..SYNTH_SIZE as f64 - margin);
    let cy = rng.random_range(margin..SYNTH_SIZE as f64 - margin);
    let disk = disk_indicator(cx, cy, DISK_RADIUS);
    let hue = random_hue(rng);
    let image = ColorImage::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        let (a, b) = (disk.get(x, y), bg.get(x, y));
        [0, 1, 2].map(|c| ((1.0 - a) * b + a * hue[c]) as f32)
    });
    Scene {
        image,
        truth: with_floor(&disk),
        external: None,
    }
}

fn texture_scene(rng: &mut ChaCha8Rng) -> Scene {
    let bg = noisy_background(rng, 0.5, 0.12);
    let side = TEXTURE_SIDE;
    let x0 = rng.random_range(8..SYNTH_SIZE - side - 8);
    let y0 = rng.random_range(8..SYNTH_SIZE - side - 8);
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (c, s) = (theta.cos(), theta.sin());
    let region = box_indicator(x0, y0, side);
    let image = ColorImage::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        let mut v = bg.get(x, y);
        if region.get(x, y) > 0.0 {
            let u = c * x as f64 + s * y as f64;
            v = 0.5 + 0.35 * (std::f64::consts::TAU * u / 4.0).sin();
        }
        [v as f32; 3]
    });
    Scene {
        image,
        truth: with_floor(&gaussian_blur(&region, 1.0)),
        external: None,
    }
}

fn decoys(rng: &mut ChaCha8Rng, n: usize) -> Vec<ImagePlane<f32>> {
    (0..n)
        .map(|_| {
            let side = rng.random_range(20..50);
            let x0 = rng.random_range(0..SYNTH_SIZE - side);
            let y0 = rng.random_range(0..SYNTH_SIZE - side);
            let amp = rng.random_range(0.3..1.0);
            box_indicator(x0, y0, side).map(|v| v * amp).cast()
        })
        .collect()
}

fn object_scene(rng: &mut ChaCha8Rng) -> Scene {
    let bg = noisy_background(rng, 0.45, 0.12);
    let side = OBJECT_SIDE;
    let x0 = rng.random_range(4..SYNTH_SIZE - side - 4);
    let y0 = rng.random_range(4..SYNTH_SIZE - side - 4);
    let object = box_indicator(x0, y0, side);
    let image = gray_image(&bg.zip_map(&object, |b, o| b + 0.02 * o).expect("same size"));
    let mut external = vec![object.cast()];
    external.extend(decoys(rng, SYNTH_EXTERNAL_CHANNELS - 1));
    Scene {
        image,
        truth: with_floor(&object),
        external: Some(external),
    }
}

fn mixed_scene(rng: &mut ChaCha8Rng) -> Scene {
    let mut scene = match rng.random_range(0..3) {
        0 => disk_scene(rng),
        1 => texture_scene(rng),
        _ => return object_scene(rng),
    };
    let mut external = vec![ImagePlane::filled(SYNTH_SIZE, SYNTH_SIZE, 0.0f32)];
    external.extend(decoys(rng, SYNTH_EXTERNAL_CHANNELS - 1));
    scene.external = Some(external);
    scene
}

fn uniform_scene(rng: &mut ChaCha8Rng) -> Scene {
    let bg = noisy_background(rng, 0.5, 0.4);
    Scene {
        image: gray_image(&bg),
        truth: ImagePlane::filled(SYNTH_SIZE, SYNTH_SIZE, 1.0),
        external: None,
    }
}

/// Zero-mean smooth random field scaled to unit standard deviation, then
/// clipped to [-1, 1] after halving.
fn signed_field(rng: &mut ChaCha8Rng) -> ImagePlane<f64> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let raw: ImagePlane<f64> = ImagePlane::from_fn(SYNTH_SIZE, SYNTH_SIZE, |_, _| noise.sample(rng));
    let smooth = gaussian_blur(&raw, FIELD_SIGMA);
    let mean = smooth.mean();
    let sd = smooth.variance().sqrt().max(1e-12);
    smooth.map(|v| (0.5 * (v - mean) / sd).clamp(-1.0, 1.0))
}

fn interaction_scene(rng: &mut ChaCha8Rng) -> Scene {
    let a = signed_field(rng);
    let b = signed_field(rng);
    let image = ColorImage::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        let (av, bv) = (a.get(x, y), b.get(x, y));
        [0.5 + 0.35 * av, 0.5 - 0.35 * av, 0.5 + 0.35 * bv].map(|v| v as f32)
    });
    let truth = a.zip_map(&b, |x, y| (x * y).max(0.0).powi(2)).expect("same size");
    Scene {
        image,
        truth: with_floor(&truth),
        external: None,
    }
}

/// `n` fixations drawn from `truth` as a probability distribution, jittered
/// uniformly within the chosen pixel.
fn sample_fixations(truth: &ImagePlane<f64>, n: usize, rng: &mut ChaCha8Rng) -> Vec<Fixation> {
    let mut cdf = Vec::with_capacity(truth.len());
    let mut acc = 0.0;
    for &v in truth.data() {
        acc += v;
        cdf.push(acc);
    }
    let w = truth.width();
    (0..n)
        .map(|k| {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u).min(truth.len() - 1);
            Fixation {
                x: (i % w) as f64 + rng.random::<f64>(),
                y: (i / w) as f64 + rng.random::<f64>(),
                subject: format!("s{}", k % SUBJECTS),
            }
        })
        .collect()
}

fn item_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (index as u64).wrapping_add(1).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// In-memory dataset of `n_images` stimuli with fixations, plus the
/// ground-truth map each was drawn from.
pub fn synth_with_truth(n_images: usize, generator: Generator, seed: u64) -> (Dataset, Vec<ImagePlane<f64>>) {
    let mut items = Vec::with_capacity(n_images);
    let mut truths = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let mut rng = ChaCha8Rng::seed_from_u64(item_seed(seed, i));
        let scene = match generator {
            Generator::DiskPopout => disk_scene(&mut rng),
            Generator::Uniform => uniform_scene(&mut rng),
            Generator::Mixed => mixed_scene(&mut rng),
            Generator::Interaction => interaction_scene(&mut rng),
        };
        let fixations = sample_fixations(&scene.truth, FIXATIONS_PER_IMAGE, &mut rng);
        items.push(DatasetItem {
            id: format!("{}_{i:04}", generator.name()),
            image: ImageSource::Memory(scene.image),
            width: SYNTH_SIZE,
            height: SYNTH_SIZE,
            fixations,
            external: scene.external.map(MapSource::Memory),
            horizon: None,
            covsal: None,
        });
        truths.push(scene.truth);
    }
    let dataset = Dataset {
        name: format!("synth-{}", generator.name()),
        layout: Layout::Generic,
        items,
        skipped: 0,
    };
    (dataset, truths)
}

pub fn synth_dataset(n_images: usize, generator: Generator, seed: u64) -> Dataset {
    synth_with_truth(n_images, generator, seed).0
}
