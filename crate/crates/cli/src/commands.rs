use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use salience::data::{make_split, synth_dataset, Dataset, DatasetItem, Generator, ImageSource, Layout};
use salience::eval::{export_heatmap, run_experiment, Report};
use salience::features::FeatureStack;
use salience::fmap::{read_fmap, write_fmap};
use salience::imgproc::decode_image;
use salience::model::TrainedModel;
use salience::pipeline::{extract_dataset, item_stack, predict_map, train_and_test, train_model, ImageFeatures};

use crate::config::RunConfig;

pub const CACHE_ENV: &str = "SALIENCE_CACHE_DIR";
const LOCK_NAME: &str = ".salience.lock";
const STAMP_NAME: &str = ".stamp";

/// Exclusive ownership of an output directory, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(LOCK_NAME);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).with_context(|| {
            format!(
                "output directory {} is in use (remove {} if no other run is active)",
                dir.display(),
                path.display()
            )
        })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self { path })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn write_log(path: &Path, cfg: &RunConfig, body: &str) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "config hash {}", cfg.hash)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureRun {
    pub computed: usize,
    pub up_to_date: usize,
}

/// Writes `<output>/features/<id>.fmap` for every image. Files from a run
/// with the same feature settings are kept unless `force` is set.
pub fn cmd_features(cfg: &RunConfig, force: bool) -> Result<FeatureRun> {
    let _lock = OutputLock::acquire(&cfg.output)?;
    let ds = cfg.dataset.load()?;
    let features = cfg.primary_features();
    let dir = cfg.output.join("features");
    std::fs::create_dir_all(&dir)?;
    let stamp = format!("{features:?} {:?}\n", cfg.dataset);
    let stamp_path = dir.join(STAMP_NAME);
    let stamp_ok = !force && std::fs::read_to_string(&stamp_path).is_ok_and(|s| s == stamp);
    // invalidate before writing so an interrupted run is never trusted
    if !stamp_ok {
        let _ = std::fs::remove_file(&stamp_path);
    }
    let cache = cache_dir();
    let results: Vec<Result<bool>> = ds
        .items
        .par_iter()
        .map(|item| {
            let out = dir.join(format!("{}.fmap", item.id));
            if stamp_ok && out.is_file() {
                return Ok(false);
            }
            let stack = item_stack(item, features, cache.as_deref()).with_context(|| format!("image {}", item.id))?;
            write_fmap(&out, stack.channels())?;
            Ok(true)
        })
        .collect();
    let mut run = FeatureRun {
        computed: 0,
        up_to_date: 0,
    };
    for r in results {
        if r? {
            run.computed += 1;
        } else {
            run.up_to_date += 1;
        }
    }
    std::fs::write(&stamp_path, stamp)?;
    log::info!("config hash {}", cfg.hash);
    println!("features: {} computed, {} up to date", run.computed, run.up_to_date);
    Ok(run)
}

fn extract(cfg: &RunConfig, ds: &Dataset, features: &salience::features::FeatureConfig) -> Result<Vec<ImageFeatures>> {
    Ok(extract_dataset(
        ds,
        features,
        cfg.train.stride,
        Some(&cfg.sampling),
        cache_dir().as_deref(),
    )?)
}

/// Trains the first configured method on every image of the dataset and
/// writes `model.salm` and `train.log`.
pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    let _lock = OutputLock::acquire(&cfg.output)?;
    let method = cfg.methods[0];
    let (set, features) = &cfg.feature_sets[0];
    let tc = cfg.train_config(method, features);
    tc.validate()?;
    log::info!("config hash {}", cfg.hash);
    let ds = cfg.dataset.load()?;
    let pool = extract(cfg, &ds, features)?;
    let refs: Vec<&ImageFeatures> = pool.iter().collect();
    let model = train_model(&tc, &refs)?;
    let path = cfg.output.join("model.salm");
    model.save(&path)?;
    let samples: usize = pool.iter().map(|f| f.n_samples()).sum();
    let body = format!(
        "dataset {} images {} samples {}\nfeature set {set} channels {}\n{}",
        ds.name,
        ds.len(),
        samples,
        features.channel_count()?,
        model.summary()
    );
    write_log(&cfg.output.join("train.log"), cfg, &body)?;
    println!("model written to {}", path.display());
    Ok(path)
}

fn single_image(path: &Path) -> Result<DatasetItem> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let img = decode_image::<f32>(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    let (width, height) = img.dims();
    Ok(DatasetItem {
        id: path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string(),
        image: ImageSource::Memory(img),
        width,
        height,
        fixations: Vec::new(),
        external: None,
        horizon: None,
        covsal: None,
    })
}

/// Features for prediction: from a stored feature stack (`.fmap`), an image
/// file, a dataset directory, or the configured dataset.
fn prediction_inputs(cfg: &RunConfig, model: &TrainedModel, input: Option<&Path>) -> Result<Vec<ImageFeatures>> {
    let features = &model.features;
    let cache = cache_dir();
    let from_item = |item: &DatasetItem| -> Result<ImageFeatures> {
        let stack = item_stack(item, features, cache.as_deref()).with_context(|| format!("image {}", item.id))?;
        Ok(ImageFeatures::from_stack(&item.id, &stack, Some(item), model.stride, None)?)
    };
    match input {
        Some(p) if p.extension().is_some_and(|e| e == "fmap") => {
            let planes = read_fmap::<f32>(p)?;
            let stack = FeatureStack::from_planes(planes, model.layout()?)
                .with_context(|| format!("feature stack {} does not match the model", p.display()))?;
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
            Ok(vec![ImageFeatures::from_stack(id, &stack, None, model.stride, None)?])
        }
        Some(p) if p.is_file() => Ok(vec![from_item(&single_image(p)?)?]),
        Some(p) => {
            let layout = match &cfg.dataset {
                crate::config::DatasetSpec::Root { layout, .. } => *layout,
                _ => Layout::Generic,
            };
            let ds = salience::data::load_dataset(p, layout).with_context(|| format!("loading dataset {}", p.display()))?;
            ds.items.par_iter().map(from_item).collect()
        }
        None => {
            let ds = cfg.dataset.load()?;
            ds.items.par_iter().map(from_item).collect()
        }
    }
}

/// Writes `<output>/predictions/<id>.png` and `.fmap` per input image.
pub fn cmd_predict(cfg: &RunConfig, model_path: &Path, input: Option<&Path>) -> Result<Vec<PathBuf>> {
    let _lock = OutputLock::acquire(&cfg.output)?;
    let model = TrainedModel::load(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    log::info!("config hash {}", cfg.hash);
    let inputs = prediction_inputs(cfg, &model, input)?;
    let dir = cfg.output.join("predictions");
    let mut written = Vec::new();
    for f in &inputs {
        let map = predict_map(&model, f).with_context(|| format!("predicting {}", f.id))?;
        let (_, fmap) = export_heatmap(&map, &dir.join(&f.id), cfg.display)?;
        written.push(fmap);
    }
    println!("{} predictions written to {}", written.len(), dir.display());
    Ok(written)
}

/// Every method on every feature set over every seed. Each seed draws a
/// fresh train/test split, or in cross-dataset mode fresh training samples.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Report> {
    let _lock = OutputLock::acquire(&cfg.output)?;
    cfg.validate()?;
    log::info!("config hash {}", cfg.hash);
    let ds = cfg.dataset.load()?;
    let union = cfg.union_features();
    let cache = cache_dir();
    let mut report = Report::default();
    match &cfg.test_dataset {
        None => {
            let n = ds.len();
            let n_train = cfg.n_train.unwrap_or(((n as f64 * 0.9).round() as usize).clamp(1, n.max(2) - 1));
            // validates the split size before any extraction
            make_split(n, n_train, cfg.seeds[0])?;
            let pool = extract(cfg, &ds, &union)?;
            for (set, features) in &cfg.feature_sets {
                let sub: Vec<ImageFeatures> = pool.iter().map(|f| f.project(features)).collect::<Result<_, _>>()?;
                for &m in &cfg.methods {
                    let tc = cfg.train_config(m, features);
                    let result = run_experiment(&cfg.seeds, |seed| {
                        let split = make_split(n, n_train, seed)?;
                        salience::pipeline::evaluate_split(&tc, &sub, &split)
                    })
                    .with_context(|| format!("{m} on {set}"))?;
                    log::info!("{m} {set}: mean {:.4}", result.mean);
                    report.push(m.name(), set, result);
                }
            }
        }
        Some(test_spec) => {
            let test_ds = test_spec.load()?;
            let test = extract_dataset(&test_ds, &union, cfg.train.stride, None, cache.as_deref())?;
            let trains: Vec<Vec<ImageFeatures>> = cfg
                .seeds
                .iter()
                .map(|&seed| {
                    let sampling = salience::pipeline::SampleOptions { seed, ..cfg.sampling };
                    extract_dataset(&ds, &union, cfg.train.stride, Some(&sampling), cache.as_deref())
                })
                .collect::<Result<_, _>>()?;
            for (set, features) in &cfg.feature_sets {
                let test_sub: Vec<ImageFeatures> = test.iter().map(|f| f.project(features)).collect::<Result<_, _>>()?;
                let test_refs: Vec<&ImageFeatures> = test_sub.iter().collect();
                for &m in &cfg.methods {
                    let tc = cfg.train_config(m, features);
                    let result = run_experiment(&cfg.seeds, |seed| {
                        let k = cfg.seeds.iter().position(|&s| s == seed).expect("configured seed");
                        let train: Vec<ImageFeatures> =
                            trains[k].iter().map(|f| f.project(features)).collect::<Result<_, _>>()?;
                        let refs: Vec<&ImageFeatures> = train.iter().collect();
                        train_and_test(&tc, &refs, &test_refs)
                    })
                    .with_context(|| format!("{m} on {set}"))?;
                    report.push(m.name(), set, result);
                }
            }
        }
    }
    report.write(&cfg.output)?;
    write_log(&cfg.output.join("eval.log"), cfg, &report.text_table())?;
    print!("{}", report.text_table());
    Ok(report)
}

/// Writes a synthetic dataset in the canonical layout.
pub fn cmd_synth(generator: Generator, images: usize, seed: u64, output: &Path) -> Result<Dataset> {
    if images == 0 {
        bail!("synth needs at least one image");
    }
    let _lock = OutputLock::acquire(output)?;
    let ds = synth_dataset(images, generator, seed);
    ds.write(output)?;
    println!("{} {generator} images written to {}", ds.len(), output.display());
    Ok(ds)
}
