//! Training and prediction over datasets: per-image feature extraction into a
//! prediction grid plus labeled samples, model fitting for every method, and
//! dense saliency maps.

use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::boosting::{boost_train, BoostOptions};
use crate::data::{density_map, fixated_pixels, sample_points, Dataset, DatasetItem, Split, DENSITY_SIGMA};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::features::{build_stack, FeatureConfig, FeatureGroup, FeatureStack, GroupSpan};
use crate::fmap::{read_fmap, write_fmap};
use crate::imgproc::{resize_plane, ImagePlane};
use crate::kernels::{default_gamma, KernelKind, KernelSpec};
use crate::mkl::{lmkl_train, nlmkl_train, rbmkl_train, KernelBank, MklOptions};
use crate::model::{KernelPredictor, Method, Predictor, TrainedModel};
use crate::svm::{linear_svm_train, SampleSet, SmoOptions, DEFAULT_C};

pub const DEFAULT_STRIDE: usize = 4;

/// Training pixels drawn per image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOptions {
    pub n_pos: usize,
    pub n_neg: usize,
    pub seed: u64,
    pub sigma: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            n_pos: 10,
            n_neg: 10,
            seed: 0,
            sigma: DENSITY_SIGMA,
        }
    }
}

/// Hyperparameters of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub features: FeatureConfig,
    pub c: f64,
    /// NLMKL polynomial degree.
    pub degree: u32,
    /// NLMKL weight-norm bound.
    pub lambda: f64,
    /// AdaBoost rounds.
    pub rounds: usize,
    /// MKL outer iterations.
    pub max_outer: usize,
    /// One kernel per entry; empty means a gaussian per feature group with a
    /// median-heuristic bandwidth.
    pub kernels: Vec<KernelSpec>,
    /// LMKL gating representation, as feature group names.
    pub gating_groups: Vec<String>,
    pub stride: usize,
}

impl TrainConfig {
    pub fn new(method: Method, features: FeatureConfig) -> Self {
        let mkl = MklOptions::default();
        Self {
            method,
            features,
            c: DEFAULT_C,
            degree: mkl.degree,
            lambda: mkl.lambda,
            rounds: BoostOptions::default().rounds,
            max_outer: mkl.max_outer,
            kernels: Vec::new(),
            gating_groups: Vec::new(),
            stride: DEFAULT_STRIDE,
        }
    }

    /// Checks everything that can fail before any training starts.
    pub fn validate(&self) -> Result<()> {
        let layout = self.features.layout()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        match self.method {
            Method::AdaBoost if self.rounds == 0 => return bad("adaboost needs at least one round".into()),
            Method::Nlmkl if self.degree == 0 => return bad("nlmkl degree must be at least 1".into()),
            Method::Nlmkl if !(self.lambda > 0.0 && self.lambda.is_finite()) => {
                return bad(format!("lambda must be positive, got {}", self.lambda))
            }
            Method::Lmkl if self.gating_groups.is_empty() => return Err(Error::MissingGating),
            _ => {}
        }
        let known = |g: &str| g == "all" || layout.iter().any(|s| s.name == g);
        for spec in &self.kernels {
            spec.kind.validate()?;
            if !known(&spec.group) {
                return Err(Error::MissingGroup(spec.group.clone()));
            }
        }
        if self.method == Method::Lmkl {
            if let Some(g) = self.gating_groups.iter().find(|g| !known(g)) {
                return Err(Error::MissingGroup(g.clone()));
            }
        }
        Ok(())
    }
}

/// Row-major feature vectors of one image at the prediction grid and at its
/// training samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageFeatures {
    pub id: String,
    pub groups: Vec<GroupSpan>,
    pub work: (usize, usize),
    pub stride: usize,
    pub grid: (usize, usize),
    pub grid_rows: Vec<f32>,
    pub sample_rows: Vec<f32>,
    pub sample_labels: Vec<i8>,
    /// Fixated working pixels, empty when the image has no fixations.
    pub fixated: Vec<(usize, usize)>,
}

/// Grid coordinate `i` along an axis of `len` pixels.
fn grid_pos(i: usize, stride: usize, len: usize) -> usize {
    (i * stride + stride / 2).min(len - 1)
}

fn id_seed(seed: u64, id: &str) -> u64 {
    let h = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(id.as_bytes()).finalize();
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

impl ImageFeatures {
    pub fn dim(&self) -> usize {
        self.groups.last().map_or(0, |s| s.range.end)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_labels.len()
    }

    /// Grid values and samples of `stack`, with samples drawn from the
    /// fixation density when `sampling` is set.
    pub fn from_stack(
        id: &str,
        stack: &FeatureStack<f32>,
        item: Option<&DatasetItem>,
        stride: usize,
        sampling: Option<&SampleOptions>,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        let work = (stack.width(), stack.height());
        let grid = (work.0.div_ceil(stride), work.1.div_ceil(stride));
        let channels = stack.channels();
        let mut grid_rows = Vec::with_capacity(grid.0 * grid.1 * channels.len());
        for gy in 0..grid.1 {
            for gx in 0..grid.0 {
                let (x, y) = (grid_pos(gx, stride, work.0), grid_pos(gy, stride, work.1));
                grid_rows.extend(channels.iter().map(|c| c.get(x, y)));
            }
        }
        let (mut sample_rows, mut sample_labels, mut fixated) = (Vec::new(), Vec::new(), Vec::new());
        if let Some(item) = item.filter(|i| !i.fixations.is_empty()) {
            let orig = (item.width, item.height);
            fixated = fixated_pixels(&item.fixations, orig, work);
            if let Some(s) = sampling {
                let d = density_map(&item.fixations, orig, work, s.sigma)?;
                for p in sample_points(&d, s.n_pos, s.n_neg, id_seed(s.seed, id))? {
                    sample_rows.extend(channels.iter().map(|c| c.get(p.x, p.y)));
                    sample_labels.push(p.label);
                }
            }
        }
        Ok(Self {
            id: id.to_string(),
            groups: stack.groups().to_vec(),
            work,
            stride,
            grid,
            grid_rows,
            sample_rows,
            sample_labels,
            fixated,
        })
    }

    /// The same image restricted to the groups of `to`, which must all be
    /// present here.
    pub fn project(&self, to: &FeatureConfig) -> Result<Self> {
        let layout = to.layout()?;
        let mut pick = Vec::new();
        for span in &layout {
            let src = self
                .groups
                .iter()
                .find(|g| g.name == span.name)
                .ok_or_else(|| Error::MissingGroup(span.name.clone()))?;
            if src.range.len() != span.range.len() {
                return Err(Error::ChannelCountMismatch {
                    expected: span.range.len(),
                    actual: src.range.len(),
                });
            }
            pick.extend(src.range.clone());
        }
        let dim = self.dim();
        let gather = |rows: &[f32]| -> Vec<f32> { rows.chunks(dim).flat_map(|r| pick.iter().map(move |&c| r[c])).collect() };
        Ok(Self {
            groups: layout,
            grid_rows: gather(&self.grid_rows),
            sample_rows: gather(&self.sample_rows),
            ..self.clone()
        })
    }
}

fn plane_digest(h: &mut Sha256, p: &ImagePlane<f32>) {
    h.update((p.width() as u64).to_le_bytes());
    h.update((p.height() as u64).to_le_bytes());
    for v in p.data() {
        h.update(v.to_le_bytes());
    }
}

/// Feature stack of `item`, read from or written to `cache` when given. The
/// cache key covers the configuration and every input pixel.
pub fn item_stack(item: &DatasetItem, config: &FeatureConfig, cache: Option<&Path>) -> Result<FeatureStack<f32>> {
    let img = item.load_image()?;
    let ext = if config.enabled(FeatureGroup::External) {
        config.external_channels
    } else {
        0
    };
    let aux = item.auxiliary(ext)?;
    let Some(dir) = cache else {
        return build_stack(&img, config, &aux);
    };
    let mut h = Sha256::new();
    h.update(format!("{config:?}").as_bytes());
    for p in img.channels() {
        plane_digest(&mut h, p);
    }
    for p in aux.external.iter().flatten().chain(&aux.horizon).chain(&aux.covsal) {
        plane_digest(&mut h, p);
    }
    let key: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let path = dir.join(format!("{key}.fmap"));
    if path.is_file() {
        match read_fmap::<f32>(&path).and_then(|c| FeatureStack::from_planes(c, config.layout()?)) {
            Ok(stack) => return Ok(stack),
            Err(e) => log::warn!("ignoring cache entry {}: {e}", path.display()),
        }
    }
    let stack = build_stack(&img, config, &aux)?;
    std::fs::create_dir_all(dir)?;
    // write then rename so concurrent readers never see a partial file
    let tmp = dir.join(format!("{key}.tmp{}", std::process::id()));
    write_fmap(&tmp, stack.channels())?;
    std::fs::rename(&tmp, &path)?;
    Ok(stack)
}

/// [`ImageFeatures`] of every dataset item, in dataset order.
pub fn extract_dataset(
    ds: &Dataset,
    config: &FeatureConfig,
    stride: usize,
    sampling: Option<&SampleOptions>,
    cache: Option<&Path>,
) -> Result<Vec<ImageFeatures>> {
    ds.items
        .par_iter()
        .map(|item| {
            let stack = item_stack(item, config, cache)?;
            ImageFeatures::from_stack(&item.id, &stack, Some(item), stride, sampling)
        })
        .collect()
}

fn training_set(config: &TrainConfig, images: &[&ImageFeatures]) -> Result<SampleSet<f64>> {
    let layout = config.features.layout()?;
    let dim = layout.last().map_or(0, |s| s.range.end);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for f in images {
        if f.groups != layout {
            return Err(Error::ChannelCountMismatch {
                expected: dim,
                actual: f.dim(),
            });
        }
        x.extend(f.sample_rows.iter().map(|&v| v as f64));
        labels.extend_from_slice(&f.sample_labels);
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    SampleSet::new(dim, x, labels, layout)
}

/// Gaussian kernel per group with a median-heuristic bandwidth. The product
/// rule multiplies the kernels, so each bandwidth is divided by their number.
fn default_kernels(samples: &SampleSet<f64>, method: Method) -> Result<Vec<KernelSpec>> {
    let groups = samples.groups();
    let scale = if method == Method::Rbmkl { groups.len() as f64 } else { 1.0 };
    groups
        .iter()
        .map(|g| {
            let gamma = match default_gamma(samples, &g.name) {
                Ok(v) => v,
                Err(Error::DegenerateDistances) => {
                    log::warn!("group {} is constant over the samples, using gamma 1", g.name);
                    1.0
                }
                Err(e) => return Err(e),
            };
            Ok(KernelSpec::new(KernelKind::Gaussian { gamma: gamma / scale }, g.name.clone()))
        })
        .collect()
}

fn gating_reps(samples: &SampleSet<f64>, groups: &[String]) -> Result<(Vec<f64>, usize)> {
    let ranges = groups.iter().map(|g| samples.group(g)).collect::<Result<Vec<_>>>()?;
    let dim = ranges.iter().map(|r| r.len()).sum();
    let reps = (0..samples.len())
        .flat_map(|i| ranges.iter().flat_map(move |r| samples.row(i)[r.clone()].iter().copied()))
        .collect();
    Ok((reps, dim))
}

/// Fits `config.method` to the samples of `images`.
pub fn train_model(config: &TrainConfig, images: &[&ImageFeatures]) -> Result<TrainedModel> {
    config.validate()?;
    if let Some(f) = images.iter().find(|f| f.stride != config.stride) {
        return Err(Error::InvalidArgument(format!(
            "{} was extracted with stride {}, config has {}",
            f.id, f.stride, config.stride
        )));
    }
    let samples = training_set(config, images)?;
    samples.check_two_classes()?;
    let smo = SmoOptions::with_c(config.c);
    let predictor = match config.method {
        Method::LinearSvm => Predictor::Linear(linear_svm_train(&samples, &smo)?),
        Method::AdaBoost => Predictor::Boost(boost_train(
            &samples,
            &BoostOptions {
                rounds: config.rounds,
                ..BoostOptions::default()
            },
        )?),
        Method::Rbmkl | Method::Nlmkl | Method::Lmkl => {
            let specs = if config.kernels.is_empty() {
                default_kernels(&samples, config.method)?
            } else {
                config.kernels.clone()
            };
            let bank = KernelBank::build(&samples, &specs)?;
            let opts = MklOptions {
                smo,
                degree: config.degree,
                lambda: config.lambda,
                max_outer: config.max_outer,
                ..MklOptions::default()
            };
            let y = samples.labels();
            let (mkl, gating_groups) = match config.method {
                Method::Rbmkl => (rbmkl_train(&bank, y, &smo)?, Vec::new()),
                Method::Nlmkl => (nlmkl_train(&bank, y, &opts)?, Vec::new()),
                _ => {
                    let (reps, dim) = gating_reps(&samples, &config.gating_groups)?;
                    (lmkl_train(&bank, &reps, dim, y, &opts)?, config.gating_groups.clone())
                }
            };
            let support_rows = mkl.svm.support.iter().flat_map(|&i| samples.row(i).to_vec()).collect();
            Predictor::Kernel(KernelPredictor {
                mkl,
                specs,
                support_rows,
                gating_groups,
            })
        }
    };
    Ok(TrainedModel {
        method: config.method,
        features: config.features.clone(),
        stride: config.stride,
        predictor,
    })
}

/// Dense saliency at the working resolution: decisions on the grid,
/// bilinearly upsampled.
pub fn predict_map(model: &TrainedModel, f: &ImageFeatures) -> Result<ImagePlane<f32>> {
    let expected = model.channel_count()?;
    if f.dim() != expected {
        return Err(Error::ChannelCountMismatch {
            expected,
            actual: f.dim(),
        });
    }
    if f.stride != model.stride {
        return Err(Error::InvalidArgument(format!(
            "features use stride {}, model expects {}",
            f.stride, model.stride
        )));
    }
    let values = model.decisions(&f.grid_rows)?;
    let grid = ImagePlane::new(f.grid.0, f.grid.1, values)?;
    Ok(resize_plane(&grid, f.work.0, f.work.1)?.cast())
}

/// AUC of the model's map against the image's fixations.
pub fn image_auc(model: &TrainedModel, f: &ImageFeatures) -> Result<f64> {
    auc(&predict_map(model, f)?, &f.fixated)
}

/// Trains on `train` and returns the AUC of every image in `test`.
pub fn train_and_test(config: &TrainConfig, train: &[&ImageFeatures], test: &[&ImageFeatures]) -> Result<Vec<f64>> {
    let model = train_model(config, train)?;
    test.iter().map(|f| image_auc(&model, f)).collect()
}

/// [`train_and_test`] over one split of `pool`.
pub fn evaluate_split(config: &TrainConfig, pool: &[ImageFeatures], split: &Split) -> Result<Vec<f64>> {
    let pick = |idx: &[usize]| -> Vec<&ImageFeatures> { idx.iter().map(|&i| &pool[i]).collect() };
    train_and_test(config, &pick(&split.train), &pick(&split.test))
}
