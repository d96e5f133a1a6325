//! Per-pixel feature stacks: low-level subbands, center-surround channels,
//! color statistics, horizon, bottom-up saliency maps, center bias and
//! external response maps.

mod color;
mod covsal;
mod external;
mod gbvs;
mod horizon;
mod itti;
mod torralba;

use std::ops::Range;

pub use color::{color_features, COLOR_FEATURES, JOINT_BLUR_SIGMAS};
pub use covsal::{covariance_distance, covariance_saliency};
pub use external::{load_external_maps, read_external_maps, ExternalMapSet};
pub use gbvs::graph_saliency;
pub use horizon::{center_map, horizon_map, horizon_row};
pub use itti::{itti_channels, normalize_map, Conspicuity};
pub use torralba::torralba_saliency;

use crate::error::{Error, Result};
use crate::imgproc::{resize_bilinear, resize_plane, steerable_subbands, ColorImage, ImagePlane, ORIENTATIONS};
use crate::scalar::Scalar;

/// Smallest working size every extractor accepts.
pub const MIN_WORKING_SIZE: usize = 64;
pub const WORKING_SIZE: usize = 200;
/// Detectors times scales in an ObjectBank-style map set.
pub const OBJECT_BANK_CHANNELS: usize = 177 * 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureGroup {
    Subbands,
    Itti,
    Color,
    Horizon,
    Torralba,
    Gbvs,
    Covsal,
    Center,
    External,
}

impl FeatureGroup {
    /// Canonical stacking order.
    pub const ALL: [FeatureGroup; 9] = [
        Self::Subbands,
        Self::Itti,
        Self::Color,
        Self::Horizon,
        Self::Torralba,
        Self::Gbvs,
        Self::Covsal,
        Self::Center,
        Self::External,
    ];
    pub const LOW_MID: [FeatureGroup; 8] = [
        Self::Subbands,
        Self::Itti,
        Self::Color,
        Self::Horizon,
        Self::Torralba,
        Self::Gbvs,
        Self::Covsal,
        Self::Center,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Subbands => "subbands",
            Self::Itti => "itti",
            Self::Color => "color",
            Self::Horizon => "horizon",
            Self::Torralba => "torralba",
            Self::Gbvs => "gbvs",
            Self::Covsal => "covsal",
            Self::Center => "center",
            Self::External => "external",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    /// Fixed channel count, `None` for external maps.
    pub fn channels(self) -> Option<usize> {
        match self {
            Self::Subbands => Some(3 * ORIENTATIONS + 1),
            Self::Itti => Some(3),
            Self::Color => Some(COLOR_FEATURES),
            Self::External => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    /// Enabled groups; stacking always follows [`FeatureGroup::ALL`].
    pub groups: Vec<FeatureGroup>,
    pub width: usize,
    pub height: usize,
    pub external_channels: usize,
    /// External channels are `scale * (channels / scales) + detector`; with more
    /// than one scale each scale becomes its own group `external_s<k>`.
    pub external_scales: usize,
}

impl FeatureConfig {
    pub fn low_mid() -> Self {
        Self {
            groups: FeatureGroup::LOW_MID.to_vec(),
            width: WORKING_SIZE,
            height: WORKING_SIZE,
            external_channels: 0,
            external_scales: 1,
        }
    }

    pub fn full(external_channels: usize) -> Self {
        Self {
            groups: FeatureGroup::ALL.to_vec(),
            external_channels,
            ..Self::low_mid()
        }
    }

    pub fn object_only(external_channels: usize) -> Self {
        Self {
            groups: vec![FeatureGroup::External],
            external_channels,
            ..Self::low_mid()
        }
    }

    pub fn enabled(&self, g: FeatureGroup) -> bool {
        self.groups.contains(&g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::EmptyFeatureConfig);
        }
        for (i, g) in self.groups.iter().enumerate() {
            if self.groups[..i].contains(g) {
                return Err(Error::DuplicateGroup(g.name().into()));
            }
        }
        if self.width.min(self.height) < MIN_WORKING_SIZE {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
                what: "working resolution",
            });
        }
        if self.enabled(FeatureGroup::External) {
            if self.external_channels == 0 {
                return Err(Error::InvalidArgument("external group enabled with zero channels".into()));
            }
            if self.external_scales == 0 || self.external_channels % self.external_scales != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{} external channels do not split into {} scales",
                    self.external_channels, self.external_scales
                )));
            }
        }
        Ok(())
    }

    /// Named channel spans in stacking order.
    pub fn layout(&self) -> Result<Vec<GroupSpan>> {
        self.validate()?;
        let mut spans = Vec::new();
        let mut start = 0;
        let mut push = |name: String, len: usize| {
            spans.push(GroupSpan {
                name,
                range: start..start + len,
            });
            start += len;
        };
        for g in FeatureGroup::ALL.into_iter().filter(|g| self.enabled(*g)) {
            match g.channels() {
                Some(n) => push(g.name().into(), n),
                None if self.external_scales == 1 => push(g.name().into(), self.external_channels),
                None => {
                    let per = self.external_channels / self.external_scales;
                    for s in 0..self.external_scales {
                        push(format!("{}_s{s}", g.name()), per);
                    }
                }
            }
        }
        Ok(spans)
    }

    pub fn channel_count(&self) -> Result<usize> {
        Ok(self.layout()?.last().map_or(0, |s| s.range.end))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpan {
    pub name: String,
    pub range: Range<usize>,
}

/// Optional per-image maps: external channels and replacements for the
/// horizon and covariance stand-ins.
#[derive(Clone, Debug)]
pub struct AuxiliaryMaps<T> {
    pub external: Option<Vec<ImagePlane<T>>>,
    pub horizon: Option<ImagePlane<T>>,
    pub covsal: Option<ImagePlane<T>>,
}

impl<T> Default for AuxiliaryMaps<T> {
    fn default() -> Self {
        Self {
            external: None,
            horizon: None,
            covsal: None,
        }
    }
}

/// Aligned, per-channel z-scored feature planes with named group spans.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack<T> {
    width: usize,
    height: usize,
    channels: Vec<ImagePlane<T>>,
    groups: Vec<GroupSpan>,
}

impl<T: Scalar> FeatureStack<T> {
    /// Assembles a stack from planes already in layout order.
    pub fn from_planes(channels: Vec<ImagePlane<T>>, groups: Vec<GroupSpan>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidArgument("feature stack needs a channel".into()))?;
        let (width, height) = first.dims();
        for c in &channels {
            first.check_same_dims(c)?;
        }
        let expected = groups.last().map_or(0, |g| g.range.end);
        if expected != channels.len() {
            return Err(Error::ChannelCountMismatch {
                expected,
                actual: channels.len(),
            });
        }
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].iter().any(|o| o.name == g.name) {
                return Err(Error::DuplicateGroup(g.name.clone()));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            groups,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ImagePlane<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<ImagePlane<T>> {
        self.channels
    }

    pub fn groups(&self) -> &[GroupSpan] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Result<Range<usize>> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| g.range.clone())
            .ok_or_else(|| Error::MissingGroup(name.into()))
    }

    /// Feature vector at pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> Vec<T> {
        let i = y * self.width + x;
        self.channels.iter().map(|c| c.data()[i]).collect()
    }
}

/// Builds the configured stack for one image, resized to the working resolution.
pub fn build_stack<T: Scalar>(
    img: &ColorImage<T>,
    config: &FeatureConfig,
    aux: &AuxiliaryMaps<T>,
) -> Result<FeatureStack<T>> {
    let layout = config.layout()?;
    let (w, h) = (config.width, config.height);
    let img = resize_bilinear(img, w, h)?;
    let mut raw: Vec<ImagePlane<T>> = Vec::with_capacity(layout.last().map_or(0, |s| s.range.end));
    let subbands = if config.enabled(FeatureGroup::Subbands) || config.enabled(FeatureGroup::Torralba) {
        Some(steerable_subbands(&img.intensity(), ORIENTATIONS, 3)?)
    } else {
        None
    };
    let fit = |p: &ImagePlane<T>| resize_plane(p, w, h);
    for g in FeatureGroup::ALL.into_iter().filter(|g| config.enabled(*g)) {
        match g {
            FeatureGroup::Subbands => raw.extend(subbands.iter().flatten().cloned()),
            FeatureGroup::Itti => raw.extend(itti_channels(&img)?.into_planes()),
            FeatureGroup::Color => raw.extend(color_features(&img)),
            FeatureGroup::Horizon => raw.push(match &aux.horizon {
                Some(p) => fit(p)?,
                None => horizon_map(&img),
            }),
            FeatureGroup::Torralba => {
                let bands = subbands.as_ref().expect("computed above");
                raw.push(torralba::self_information(bands)?.cast());
            }
            FeatureGroup::Gbvs => raw.push(graph_saliency(&img)?),
            FeatureGroup::Covsal => raw.push(match &aux.covsal {
                Some(p) => fit(p)?,
                None => covariance_saliency(&img)?,
            }),
            FeatureGroup::Center => raw.push(center_map(w, h)),
            FeatureGroup::External => {
                let ext = aux.external.as_deref().unwrap_or(&[]);
                if ext.len() != config.external_channels {
                    return Err(Error::ChannelCountMismatch {
                        expected: config.external_channels,
                        actual: ext.len(),
                    });
                }
                for p in ext {
                    raw.push(fit(p)?);
                }
            }
        }
    }
    let channels = raw.iter().map(|p| p.z_scored()).collect();
    FeatureStack::from_planes(channels, layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> ColorImage<f64> {
        ColorImage::from_fn(120, 90, |x, y| {
            let (dx, dy) = (x as f64 - 80.0, y as f64 - 40.0);
            if dx * dx + dy * dy < 144.0 {
                [0.9, 0.2, 0.1]
            } else {
                [0.3 + 0.2 * ((x / 6 + y / 6) % 2) as f64, 0.4, 0.5 - y as f64 / 400.0]
            }
        })
    }

    #[test]
    fn low_mid_stack_has_32_channels() {
        let cfg = FeatureConfig::low_mid();
        assert_eq!(cfg.channel_count().unwrap(), 32);
        let stack = build_stack(&scene(), &cfg, &AuxiliaryMaps::default()).unwrap();
        assert_eq!(stack.n_channels(), 32);
        assert_eq!((stack.width(), stack.height()), (200, 200));
        for c in stack.channels() {
            let (m, v) = (c.mean(), c.variance());
            let zero = c.data().iter().all(|&x| x == 0.0);
            assert!(zero || (m.abs() < 1e-6 && (v - 1.0).abs() < 1e-6), "mean {m} var {v}");
        }
        // the center channel survives z-scoring unchanged in shape
        let center = stack.group("center").unwrap();
        assert_eq!(center, 31..32);
        assert_eq!(stack.channels()[31].argmax(), (99, 99));
    }

    #[test]
    fn full_and_object_only_counts() {
        assert_eq!(FeatureConfig::full(OBJECT_BANK_CHANNELS).channel_count().unwrap(), 917);
        assert_eq!(FeatureConfig::object_only(885).channel_count().unwrap(), 885);
        let mut cfg = FeatureConfig::full(885);
        cfg.external_scales = 5;
        let layout = cfg.layout().unwrap();
        assert_eq!(layout.len(), 13);
        assert_eq!(layout[8].name, "external_s0");
        assert_eq!(layout[12].range, 32 + 4 * 177..917);
    }

    #[test]
    fn object_only_stack_passes_through() {
        let ext: Vec<ImagePlane<f64>> = (0..3)
            .map(|k| ImagePlane::from_fn(50, 50, |x, _| (x * (k + 1)) as f64))
            .collect();
        let aux = AuxiliaryMaps {
            external: Some(ext),
            ..Default::default()
        };
        let stack = build_stack(&scene(), &FeatureConfig::object_only(3), &aux).unwrap();
        assert_eq!(stack.n_channels(), 3);
        assert!(matches!(
            build_stack(&scene(), &FeatureConfig::object_only(4), &aux),
            Err(Error::ChannelCountMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn empty_config_rejected() {
        let cfg = FeatureConfig {
            groups: vec![],
            ..FeatureConfig::low_mid()
        };
        assert!(matches!(
            build_stack(&scene(), &cfg, &AuxiliaryMaps::default()),
            Err(Error::EmptyFeatureConfig)
        ));
    }

    #[test]
    fn overrides_pass_through() {
        let ext = ImagePlane::from_fn(100, 100, |x, y| ((x * 7 + y * 3) % 11) as f64);
        let aux = AuxiliaryMaps {
            horizon: Some(ext.clone()),
            covsal: Some(ext.clone()),
            ..Default::default()
        };
        let cfg = FeatureConfig {
            groups: vec![FeatureGroup::Horizon, FeatureGroup::Covsal],
            ..FeatureConfig::low_mid()
        };
        let stack = build_stack(&scene(), &cfg, &aux).unwrap();
        let expected = resize_plane(&ext, 200, 200).unwrap().z_scored();
        assert_eq!(stack.channels()[0], expected);
        assert_eq!(stack.channels()[1], expected);
    }

    #[test]
    fn disabling_group_removes_its_span() {
        let full = FeatureConfig::low_mid();
        let stack = build_stack(&scene(), &full, &AuxiliaryMaps::default()).unwrap();
        for g in FeatureGroup::LOW_MID {
            let cfg = FeatureConfig {
                groups: full.groups.iter().copied().filter(|&o| o != g).collect(),
                ..full.clone()
            };
            let reduced = build_stack(&scene(), &cfg, &AuxiliaryMaps::default()).unwrap();
            let span = stack.group(g.name()).unwrap();
            let kept: Vec<_> = stack
                .channels()
                .iter()
                .enumerate()
                .filter(|(i, _)| !span.contains(i))
                .map(|(_, c)| c)
                .collect();
            assert_eq!(kept.len(), reduced.n_channels());
            for (a, b) in kept.iter().zip(reduced.channels()) {
                assert_eq!(*a, b);
            }
            assert!(reduced.group(g.name()).is_err());
        }
    }
}
