//! Datasets of images with fixations, density maps, the sampling protocol,
//! train/test splits and synthetic stimuli.

mod density;
mod split;
mod synth;

pub use density::{
    density_map, fixated_pixels, sample_points, sampling_thresholds, to_working, LabeledPixel, DENSITY_SIGMA, NEG_QUANTILE,
    POS_QUANTILE,
};
pub use split::{make_split, Split};
pub use synth::{synth_dataset, synth_with_truth, Generator, FIXATIONS_PER_IMAGE, SYNTH_EXTERNAL_CHANNELS, SYNTH_SIZE};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{read_external_maps, AuxiliaryMaps, ExternalMapSet};
use crate::fmap::{read_fmap, write_fmap};
use crate::imgproc::{decode_image, encode_rgb_png, ColorImage, ImagePlane};

pub const IMAGE_DIR: &str = "images";
pub const FIXATION_DIR: &str = "fixations";
pub const EXTMAP_DIR: &str = "extmaps";
pub const HORIZON_DIR: &str = "horizon";
pub const COVSAL_DIR: &str = "covsal";

#[derive(Clone, Debug, PartialEq)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
    pub subject: String,
}

/// Directory conventions a dataset root may follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Mit1003,
    Toronto,
    Generic,
}

impl Layout {
    /// Image directory candidates, first match wins.
    fn image_dirs(self) -> &'static [&'static str] {
        match self {
            Layout::Mit1003 => &["images", "ALLSTIMULI"],
            Layout::Toronto => &["images", "stimuli"],
            Layout::Generic => &["images"],
        }
    }

    /// Image size every item is expected to have, checked with a warning.
    fn expected_size(self) -> Option<(usize, usize)> {
        match self {
            Layout::Toronto => Some((681, 511)),
            _ => None,
        }
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mit1003" => Ok(Layout::Mit1003),
            "toronto" => Ok(Layout::Toronto),
            "generic" => Ok(Layout::Generic),
            other => Err(Error::InvalidArgument(format!("unknown dataset layout `{other}`"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Mit1003 => "mit1003",
            Layout::Toronto => "toronto",
            Layout::Generic => "generic",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    Memory(ColorImage<f32>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSource {
    File(PathBuf),
    Memory(Vec<ImagePlane<f32>>),
}

impl MapSource {
    fn load(&self, expected: Option<usize>) -> Result<Vec<ImagePlane<f32>>> {
        let planes = match self {
            MapSource::File(p) if p.is_file() => read_fmap(p)?,
            MapSource::File(p) => {
                // `<dir>/<id>/<k>.fmap`, one channel per file
                let set = ExternalMapSet::new(p.parent().unwrap_or(Path::new(".")), expected.unwrap_or(0));
                let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                read_external_maps(&set, id)?
            }
            MapSource::Memory(v) => v.clone(),
        };
        if let Some(n) = expected {
            if planes.len() != n {
                return Err(Error::ChannelCountMismatch {
                    expected: n,
                    actual: planes.len(),
                });
            }
        }
        Ok(planes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetItem {
    pub id: String,
    pub image: ImageSource,
    pub width: usize,
    pub height: usize,
    pub fixations: Vec<Fixation>,
    pub external: Option<MapSource>,
    pub horizon: Option<MapSource>,
    pub covsal: Option<MapSource>,
}

impl DatasetItem {
    pub fn load_image(&self) -> Result<ColorImage<f32>> {
        match &self.image {
            ImageSource::File(p) => decode_image(&read_file(p)?),
            ImageSource::Memory(img) => Ok(img.clone()),
        }
    }

    /// Precomputed maps for this item. External maps are only loaded when
    /// `external_channels > 0`.
    pub fn auxiliary(&self, external_channels: usize) -> Result<AuxiliaryMaps<f32>> {
        let single = |m: &Option<MapSource>| -> Result<Option<ImagePlane<f32>>> {
            match m {
                Some(src) => Ok(src.load(Some(1))?.pop()),
                None => Ok(None),
            }
        };
        let external = if external_channels > 0 {
            match &self.external {
                Some(src) => Some(src.load(Some(external_channels))?),
                None => {
                    return Err(Error::MissingFile(PathBuf::from(format!("{EXTMAP_DIR}/{}.fmap", self.id))));
                }
            }
        } else {
            None
        };
        Ok(AuxiliaryMaps {
            external,
            horizon: single(&self.horizon)?,
            covsal: single(&self.covsal)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub layout: Layout,
    pub items: Vec<DatasetItem>,
    /// Images skipped because they failed to decode or had no usable fixations.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.id.as_str()).collect()
    }

    /// Writes the canonical layout under `root`: images as PNG, fixation CSVs
    /// and any in-memory external maps.
    pub fn write(&self, root: &Path) -> Result<()> {
        for dir in [IMAGE_DIR, FIXATION_DIR] {
            std::fs::create_dir_all(root.join(dir))?;
        }
        for item in &self.items {
            let img = item.load_image()?;
            std::fs::write(root.join(IMAGE_DIR).join(format!("{}.png", item.id)), encode_rgb_png(&img)?)?;
            write_fixations(&root.join(FIXATION_DIR).join(format!("{}.csv", item.id)), &item.fixations)?;
            for (dir, src) in [(EXTMAP_DIR, &item.external), (HORIZON_DIR, &item.horizon), (COVSAL_DIR, &item.covsal)] {
                if let Some(src) = src {
                    std::fs::create_dir_all(root.join(dir))?;
                    write_fmap(&root.join(dir).join(format!("{}.fmap", item.id)), &src.load(None)?)?;
                }
            }
        }
        Ok(())
    }
}

fn read_file(p: &Path) -> Result<Vec<u8>> {
    std::fs::read(p).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(p.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Parses a fixation CSV with header `x,y,subject`.
pub fn read_fixations(path: &Path) -> Result<Vec<Fixation>> {
    let bad = |message: String| Error::Fixations {
        path: path.to_path_buf(),
        message,
    };
    let bytes = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (cx, cy, cs) = (col("x")?, col("y")?, col("subject")?);
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            let field = rec.get(c).unwrap_or("");
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("row {}: bad number `{field}`", line + 2)))
        };
        out.push(Fixation {
            x: num(cx)?,
            y: num(cy)?,
            subject: rec.get(cs).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

pub fn write_fixations(path: &Path, fixations: &[Fixation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["x", "y", "subject"]).map_err(csv_io)?;
    for f in fixations {
        w.write_record([format!("{}", f.x), format!("{}", f.y), f.subject.clone()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

fn optional_map(root: &Path, dir: &str, id: &str) -> Option<MapSource> {
    let file = root.join(dir).join(format!("{id}.fmap"));
    let per_channel = root.join(dir).join(id);
    if file.is_file() || per_channel.is_dir() {
        Some(MapSource::File(file))
    } else {
        None
    }
}

/// Enumerates `images/<id>.(png|ppm)` with `fixations/<id>.csv`. Images that
/// fail to decode, lack a fixation file, or have no in-bounds fixations are
/// skipped with a warning.
pub fn load_dataset(root: &Path, layout: Layout) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let image_dir = layout
        .image_dirs()
        .iter()
        .map(|d| root.join(d))
        .find(|p| p.is_dir())
        .ok_or_else(|| Error::EmptyDataset(root.to_path_buf()))?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&image_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
        })
        .collect();
    paths.sort();
    let mut items = Vec::new();
    let mut skipped = 0;
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let img = match read_file(&path).and_then(|b| decode_image::<f32>(&b)) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
                continue;
            }
        };
        let (w, h) = img.dims();
        if let Some((ew, eh)) = layout.expected_size() {
            if (w, h) != (ew, eh) {
                log::warn!("{}: {w}x{h}, {layout} layout expects {ew}x{eh}", path.display());
            }
        }
        let fix_path = root.join(FIXATION_DIR).join(format!("{id}.csv"));
        if !fix_path.is_file() {
            log::warn!("skipping {id}: no fixation file");
            skipped += 1;
            continue;
        }
        let all = read_fixations(&fix_path)?;
        let total = all.len();
        let fixations: Vec<Fixation> = all
            .into_iter()
            .filter(|f| f.x >= 0.0 && f.y >= 0.0 && f.x < w as f64 && f.y < h as f64)
            .collect();
        if fixations.len() < total {
            log::warn!("{id}: dropped {} out-of-bounds fixations", total - fixations.len());
        }
        if fixations.is_empty() {
            log::warn!("skipping {id}: no usable fixations");
            skipped += 1;
            continue;
        }
        items.push(DatasetItem {
            external: optional_map(root, EXTMAP_DIR, &id),
            horizon: optional_map(root, HORIZON_DIR, &id),
            covsal: optional_map(root, COVSAL_DIR, &id),
            id,
            image: ImageSource::File(path),
            width: w,
            height: h,
            fixations,
        });
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    if skipped > 0 {
        log::warn!("{}: {skipped} images skipped", root.display());
    }
    Ok(Dataset {
        name: root
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string(),
        layout,
        items,
        skipped,
    })
}

#[cfg(test)]
mod tests;
