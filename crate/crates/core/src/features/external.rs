//! Precomputed per-image response maps (object detectors and other external channels).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fmap::read_fmap;
use crate::imgproc::{resize_plane, ImagePlane};
use crate::scalar::Scalar;

/// Directory of FMAP rasters, either `<root>/<id>.fmap` holding every channel
/// or `<root>/<id>/<k>.fmap` with one channel per file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalMapSet {
    pub root: PathBuf,
    pub channels: usize,
}

impl ExternalMapSet {
    pub fn new(root: impl Into<PathBuf>, channels: usize) -> Self {
        Self {
            root: root.into(),
            channels,
        }
    }

    pub fn has(&self, id: &str) -> bool {
        self.root.join(format!("{id}.fmap")).is_file() || self.root.join(id).is_dir()
    }
}

fn per_channel_dir<T: Scalar>(dir: &Path, expected: usize) -> Result<Vec<ImagePlane<T>>> {
    let present = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "fmap"))
        .count();
    if present != expected {
        return Err(Error::ChannelCountMismatch {
            expected,
            actual: present,
        });
    }
    let mut out = Vec::with_capacity(expected);
    for k in 0..expected {
        let mut planes = read_fmap::<T>(&dir.join(format!("{k}.fmap")))?;
        if planes.len() != 1 {
            return Err(Error::Corrupt {
                format: "FMAP",
                message: format!("{}/{k}.fmap holds {} channels, expected 1", dir.display(), planes.len()),
            });
        }
        out.push(planes.pop().unwrap());
    }
    Ok(out)
}

/// Loads every channel of `id` at its stored resolution.
pub fn read_external_maps<T: Scalar>(set: &ExternalMapSet, id: &str) -> Result<Vec<ImagePlane<T>>> {
    let file = set.root.join(format!("{id}.fmap"));
    let dir = set.root.join(id);
    let planes = if file.is_file() {
        read_fmap::<T>(&file)?
    } else if dir.is_dir() {
        per_channel_dir(&dir, set.channels)?
    } else {
        return Err(Error::MissingFile(file));
    };
    if planes.len() != set.channels {
        return Err(Error::ChannelCountMismatch {
            expected: set.channels,
            actual: planes.len(),
        });
    }
    Ok(planes)
}

/// Loads and resizes every channel of `id` to `width x height`.
pub fn load_external_maps<T: Scalar>(
    set: &ExternalMapSet,
    id: &str,
    width: usize,
    height: usize,
) -> Result<Vec<ImagePlane<T>>> {
    read_external_maps(set, id)?
        .iter()
        .map(|p| resize_plane(p, width, height))
        .collect()
}
