//! Run configuration: flat `key = value` lines under `[section]` headers.
//!
//! ```text
//! [dataset]
//! root = data/mit1003
//! layout = mit1003
//!
//! [features]
//! sets = low-mid, full
//! external_channels = 885
//!
//! [train]
//! methods = linear-svm, rbmkl
//! c = 1
//!
//! [eval]
//! seeds = 1..10
//! n_train = 903
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;
use sha2::{Digest, Sha256};

use salience::data::{load_dataset, synth_dataset, Dataset, Generator, Layout};
use salience::features::{FeatureConfig, FeatureGroup, WORKING_SIZE};
use salience::kernels::{KernelKind, KernelSpec};
use salience::model::Method;
use salience::pipeline::{SampleOptions, TrainConfig, DEFAULT_STRIDE};

/// Where images and fixations come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    Root { path: PathBuf, layout: Layout },
    Synth { generator: Generator, images: usize, seed: u64 },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Root { path, layout } => {
                load_dataset(path, *layout).with_context(|| format!("loading dataset {}", path.display()))
            }
            DatasetSpec::Synth { generator, images, seed } => Ok(synth_dataset(*images, *generator, *seed)),
        }
    }
}

/// Method hyperparameters shared by every configured method.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub c: f64,
    pub degree: u32,
    pub lambda: f64,
    pub rounds: usize,
    pub max_outer: usize,
    pub kernels: Vec<KernelSpec>,
    pub gating: Vec<String>,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Cross-dataset mode: train on all of `dataset`, test on all of this.
    pub test_dataset: Option<DatasetSpec>,
    /// Named feature sets; the first is the one `features`, `train` and
    /// `predict` use.
    pub feature_sets: Vec<(String, FeatureConfig)>,
    pub methods: Vec<Method>,
    pub train: TrainParams,
    pub sampling: SampleOptions,
    pub seeds: Vec<u64>,
    pub n_train: Option<usize>,
    pub display: bool,
    pub output: PathBuf,
    /// Hex SHA-256 of the effective settings.
    pub hash: String,
}

/// Every key may appear at most once per section.
struct Sections {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

impl Sections {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.map.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("[{section}] {key} = {v}: {e}")))
            .transpose()
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(section, key)?.unwrap_or(default))
    }

    fn list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.get(section, key).map(split_list)
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `1..10` (inclusive), or a comma list.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if b < a {
            bail!("empty seed range {v}");
        }
        return Ok((a..=b).collect());
    }
    split_list(v).iter().map(|s| s.parse::<u64>().map_err(|e| anyhow!("seed `{s}`: {e}"))).collect()
}

/// `gaussian:0.5@color`, `poly:2@itti`, `linear@all`.
pub fn parse_kernel(v: &str) -> Result<KernelSpec> {
    let (kind, group) = v.split_once('@').ok_or_else(|| anyhow!("kernel `{v}` lacks `@group`"))?;
    let (name, param) = match kind.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (kind.trim(), None),
    };
    let kind = match (name, param) {
        ("linear", None) => KernelKind::Linear,
        ("poly", Some(p)) => KernelKind::Polynomial { degree: p.parse()? },
        ("gaussian", Some(p)) => KernelKind::Gaussian { gamma: p.parse()? },
        _ => bail!("unknown kernel `{kind}`"),
    };
    kind.validate()?;
    Ok(KernelSpec::new(kind, group.trim()))
}

fn parse_groups(v: &str) -> Result<Vec<FeatureGroup>> {
    split_list(v)
        .iter()
        .map(|g| FeatureGroup::from_name(g).ok_or_else(|| anyhow!("unknown feature group `{g}`")))
        .collect()
}

fn dataset_spec(s: &Sections, section: &str, base: &Path) -> Result<Option<DatasetSpec>> {
    if let Some(g) = s.get(section, "synth") {
        return Ok(Some(DatasetSpec::Synth {
            generator: g.parse()?,
            images: s.or(section, "images", 200)?,
            seed: s.or(section, "seed", 0)?,
        }));
    }
    let Some(root) = s.get(section, "root") else {
        return Ok(None);
    };
    Ok(Some(DatasetSpec::Root {
        path: base.join(root),
        layout: s.or(section, "layout", Layout::Generic)?,
    }))
}

impl RunConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, seed_override).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, seed_override: Option<u64>) -> Result<Self> {
        let ini = Ini::load_from_str(text)?;
        let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (section, props) in ini.iter() {
            let entry = map.entry(section.unwrap_or("").to_string()).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k.to_string(), v.to_string()).is_some() {
                    bail!("duplicate key `{k}` in [{}]", section.unwrap_or(""));
                }
            }
        }
        let s = Sections { map };

        let dataset = dataset_spec(&s, "dataset", base)?.ok_or_else(|| anyhow!("[dataset] needs `root` or `synth`"))?;
        let test_dataset = dataset_spec(&s, "test_dataset", base)?;

        let external: usize = s.or("features", "external_channels", 0)?;
        let shape = FeatureConfig {
            width: s.or("features", "width", WORKING_SIZE)?,
            height: s.or("features", "height", WORKING_SIZE)?,
            external_scales: s.or("features", "external_scales", 1)?,
            ..FeatureConfig::full(external)
        };
        let names = s.list("features", "sets").unwrap_or_else(|| vec!["low-mid".into()]);
        let mut feature_sets = Vec::new();
        for name in names {
            let groups = match name.as_str() {
                "low-mid" => FeatureGroup::LOW_MID.to_vec(),
                "full" => FeatureGroup::ALL.to_vec(),
                "object" => vec![FeatureGroup::External],
                custom => {
                    let section = format!("features.{custom}");
                    let v = s
                        .get(&section, "groups")
                        .ok_or_else(|| anyhow!("feature set `{custom}` needs [{section}] groups"))?;
                    parse_groups(v)?
                }
            };
            let cfg = FeatureConfig {
                groups,
                ..shape.clone()
            };
            cfg.validate().with_context(|| format!("feature set `{name}`"))?;
            feature_sets.push((name, cfg));
        }
        if feature_sets.is_empty() {
            bail!("[features] sets is empty");
        }

        let methods = match s.list("train", "methods").or_else(|| s.list("train", "method")) {
            Some(v) => v.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?,
            None => vec![Method::Rbmkl],
        };
        if methods.is_empty() {
            bail!("[train] methods is empty");
        }
        let train = TrainParams {
            c: s.or("train", "c", 1.0)?,
            degree: s.or("train", "degree", 2)?,
            lambda: s.or("train", "lambda", 1.0)?,
            rounds: s.or("train", "rounds", 200)?,
            max_outer: s.or("train", "max_outer", 50)?,
            kernels: s
                .list("train", "kernels")
                .unwrap_or_default()
                .iter()
                .map(|k| parse_kernel(k))
                .collect::<Result<_>>()?,
            gating: s.list("train", "gating").unwrap_or_default(),
            stride: s.or("train", "stride", DEFAULT_STRIDE)?,
        };
        let defaults = SampleOptions::default();
        let mut sampling = SampleOptions {
            n_pos: s.or("sampling", "positives", defaults.n_pos)?,
            n_neg: s.or("sampling", "negatives", defaults.n_neg)?,
            seed: s.or("sampling", "seed", defaults.seed)?,
            sigma: s.or("sampling", "sigma", defaults.sigma)?,
        };
        let mut seeds = match s.get("eval", "seeds") {
            Some(v) => parse_seeds(v)?,
            None => vec![1],
        };
        if let Some(seed) = seed_override {
            sampling.seed = seed;
            seeds = vec![seed];
        }
        let output = base.join(s.get("output", "dir").unwrap_or("out"));

        // the hash covers every setting after overrides, in a fixed order
        let mut canon = s.map.clone();
        if let Some(seed) = seed_override {
            canon.entry("override".into()).or_default().insert("seed".into(), seed.to_string());
        }
        let mut h = Sha256::new();
        for (section, props) in &canon {
            for (k, v) in props {
                h.update(format!("[{section}] {k}={v}\n").as_bytes());
            }
        }
        let hash = h.finalize().iter().map(|b| format!("{b:02x}")).collect();

        let cfg = Self {
            dataset,
            test_dataset,
            feature_sets,
            methods,
            train,
            sampling,
            seeds,
            n_train: s.parse("eval", "n_train")?,
            display: s.or("predict", "display", true)?,
            output,
            hash,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Method configuration for `features`.
    pub fn train_config(&self, method: Method, features: &FeatureConfig) -> TrainConfig {
        TrainConfig {
            c: self.train.c,
            degree: self.train.degree,
            lambda: self.train.lambda,
            rounds: self.train.rounds,
            max_outer: self.train.max_outer,
            kernels: self.train.kernels.clone(),
            gating_groups: self.train.gating.clone(),
            stride: self.train.stride,
            ..TrainConfig::new(method, features.clone())
        }
    }

    /// Checks every method against every feature set before any work.
    pub fn validate(&self) -> Result<()> {
        for (name, features) in &self.feature_sets {
            for &m in &self.methods {
                self.train_config(m, features)
                    .validate()
                    .with_context(|| format!("method {m} with feature set `{name}`"))?;
            }
        }
        if self.seeds.is_empty() {
            bail!("empty seed list");
        }
        if self.sampling.n_pos == 0 || self.sampling.n_neg == 0 {
            bail!("[sampling] needs at least one positive and one negative per image");
        }
        Ok(())
    }

    pub fn primary_features(&self) -> &FeatureConfig {
        &self.feature_sets[0].1
    }

    /// Smallest configuration containing every feature set.
    pub fn union_features(&self) -> FeatureConfig {
        let mut groups: Vec<FeatureGroup> = Vec::new();
        for (_, f) in &self.feature_sets {
            for g in &f.groups {
                if !groups.contains(g) {
                    groups.push(*g);
                }
            }
        }
        groups.sort();
        FeatureConfig {
            groups,
            ..self.primary_features().clone()
        }
    }
}
