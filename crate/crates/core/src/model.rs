//! Trained saliency models and their SALM binary encoding.
//!
//! Layout: `"SALM"`, LE u32 version, u8 scheme tag, then the feature
//! configuration and the scheme payload. Integers are LE u32/u64, floats LE
//! f64, strings and vectors are length-prefixed.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::boosting::{boost_score, BoostModel, Stump};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureGroup, GroupSpan};
use crate::kernels::{eval_kernel, normalize_value, KernelKind, KernelSpec};
use crate::mkl::{mkl_decision, Gating, MklModel, MklParams};
use crate::scalar::Scalar;
use crate::svm::{LinearSvm, SvmModel};

const MAGIC: &[u8; 4] = b"SALM";
pub const SALM_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    LinearSvm,
    AdaBoost,
    Nlmkl,
    Rbmkl,
    Lmkl,
}

impl Method {
    /// Comparison order of the reports.
    pub const ALL: [Method; 5] = [Method::LinearSvm, Method::AdaBoost, Method::Nlmkl, Method::Rbmkl, Method::Lmkl];

    pub fn name(self) -> &'static str {
        match self {
            Method::LinearSvm => "linear-svm",
            Method::AdaBoost => "adaboost",
            Method::Nlmkl => "nlmkl",
            Method::Rbmkl => "rbmkl",
            Method::Lmkl => "lmkl",
        }
    }

    pub fn is_mkl(self) -> bool {
        matches!(self, Method::Nlmkl | Method::Rbmkl | Method::Lmkl)
    }

    /// Scheme tag in the SALM header.
    pub fn tag(self) -> u8 {
        match self {
            Method::Rbmkl => 1,
            Method::Nlmkl => 2,
            Method::Lmkl => 3,
            Method::LinearSvm => 4,
            Method::AdaBoost => 5,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == tag)
            .ok_or_else(|| corrupt(format!("unknown scheme tag {tag}")))
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel machine over stored support vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPredictor {
    pub mkl: MklModel,
    pub specs: Vec<KernelSpec>,
    /// Support vectors, row-major `support x dim`.
    pub support_rows: Vec<f64>,
    /// Groups whose concatenation is the gating representation (LMKL only).
    pub gating_groups: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    Linear(LinearSvm),
    Boost(BoostModel),
    Kernel(KernelPredictor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub method: Method,
    pub features: FeatureConfig,
    /// Sampling stride of dense prediction, in working pixels.
    pub stride: usize,
    pub predictor: Predictor,
}

/// Kernel ranges and support self-kernels, resolved once per batch.
struct Resolved<'a> {
    k: &'a KernelPredictor,
    ranges: Vec<Range<usize>>,
    gating: Vec<Range<usize>>,
    support_self: Vec<Vec<f64>>,
    dim: usize,
}

fn range_of(layout: &[GroupSpan], name: &str) -> Result<Range<usize>> {
    if name == "all" {
        return Ok(0..layout.last().map_or(0, |s| s.range.end));
    }
    layout
        .iter()
        .find(|s| s.name == name)
        .map(|s| s.range.clone())
        .ok_or_else(|| Error::MissingGroup(name.into()))
}

impl<'a> Resolved<'a> {
    fn new(k: &'a KernelPredictor, layout: &[GroupSpan]) -> Result<Self> {
        let dim = layout.last().map_or(0, |s| s.range.end);
        let ranges = k.specs.iter().map(|s| range_of(layout, &s.group)).collect::<Result<Vec<_>>>()?;
        let gating = k.gating_groups.iter().map(|g| range_of(layout, g)).collect::<Result<Vec<_>>>()?;
        let ns = k.mkl.svm.support.len();
        if k.support_rows.len() != ns * dim {
            return Err(Error::DimensionMismatch {
                expected: ns * dim,
                actual: k.support_rows.len(),
            });
        }
        let support_self = k
            .specs
            .iter()
            .zip(&ranges)
            .map(|(spec, r)| {
                (0..ns)
                    .map(|s| {
                        let v = &k.support_rows[s * dim..(s + 1) * dim][r.clone()];
                        eval_kernel::<f64>(spec.kind, v, v)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            ranges,
            gating,
            support_self,
            dim,
        })
    }

    fn decide(&self, q: &[f64]) -> Result<f64> {
        let ns = self.k.mkl.svm.support.len();
        let mut rows = Vec::with_capacity(self.k.specs.len());
        for (m, (spec, r)) in self.k.specs.iter().zip(&self.ranges).enumerate() {
            let qv = &q[r.clone()];
            let sq: f64 = eval_kernel(spec.kind, qv, qv)?;
            let mut row = Vec::with_capacity(ns);
            for s in 0..ns {
                let sv = &self.k.support_rows[s * self.dim..(s + 1) * self.dim][r.clone()];
                let v: f64 = eval_kernel(spec.kind, qv, sv)?;
                row.push(normalize_value(v, sq, self.support_self[m][s]));
            }
            rows.push(row);
        }
        let rep: Option<Vec<f64>> = if self.gating.is_empty() {
            None
        } else {
            Some(self.gating.iter().flat_map(|r| q[r.clone()].iter().copied()).collect())
        };
        mkl_decision(&self.k.mkl, &rows, rep.as_deref())
    }
}

impl TrainedModel {
    pub fn layout(&self) -> Result<Vec<GroupSpan>> {
        self.features.layout()
    }

    pub fn channel_count(&self) -> Result<usize> {
        self.features.channel_count()
    }

    /// Decision values for row-major `rows` of `channel_count()` features.
    pub fn decisions<T: Scalar>(&self, rows: &[T]) -> Result<Vec<f64>> {
        let layout = self.layout()?;
        let dim = layout.last().map_or(0, |s| s.range.end);
        if dim == 0 || rows.len() % dim != 0 {
            return Err(Error::ChannelCountMismatch {
                expected: dim,
                actual: rows.len(),
            });
        }
        match &self.predictor {
            Predictor::Linear(svm) => {
                if svm.weights.len() != dim {
                    return Err(Error::ChannelCountMismatch {
                        expected: svm.weights.len(),
                        actual: dim,
                    });
                }
                Ok(rows.par_chunks(dim).map(|r| svm.decision(r)).collect())
            }
            Predictor::Boost(b) => rows.par_chunks(dim).map(|r| boost_score(b, r)).collect(),
            Predictor::Kernel(k) => {
                let resolved = Resolved::new(k, &layout)?;
                rows.par_chunks(dim)
                    .map(|r| {
                        let q: Vec<f64> = r.iter().map(|v| v.as_f64()).collect();
                        resolved.decide(&q)
                    })
                    .collect()
            }
        }
    }

    /// Short human-readable description of the learned parameters.
    pub fn summary(&self) -> String {
        let mut s = format!("method {} stride {}\n", self.method, self.stride);
        match &self.predictor {
            Predictor::Linear(l) => {
                s += &format!("support vectors {}\n", l.model.support.len());
                s += &format!("objective {}\n", l.model.objective);
            }
            Predictor::Boost(b) => s += &format!("rounds {}\n", b.rounds()),
            Predictor::Kernel(k) => {
                s += &format!("support vectors {}\n", k.mkl.svm.support.len());
                let names: Vec<&str> = k.specs.iter().map(|s| s.group.as_str()).collect();
                s += &format!("kernels {}\n", names.join(","));
                let trace: Vec<String> = k.mkl.history.iter().map(|v| format!("{v:.6}")).collect();
                s += &format!("objective trace {}\n", trace.join(" "));
                match &k.mkl.params {
                    MklParams::Rbmkl => {}
                    MklParams::Nlmkl { eta, degree } => {
                        let e: Vec<String> = eta.iter().map(|v| format!("{v:.4}")).collect();
                        s += &format!("degree {degree} eta {}\n", e.join(" "));
                    }
                    MklParams::Lmkl { support_eta, gating } => {
                        let p = gating.kernels();
                        let ns = support_eta.len() / p.max(1);
                        let mean: Vec<String> = (0..p)
                            .map(|m| {
                                let t: f64 = (0..ns).map(|s| support_eta[s * p + m]).sum();
                                format!("{:.4}", t / ns.max(1) as f64)
                            })
                            .collect();
                        s += &format!("gating {} mean support eta {}\n", k.gating_groups.join(","), mean.join(" "));
                    }
                }
            }
        }
        s
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(SALM_VERSION);
        w.u8(self.method.tag());
        write_features(&mut w, &self.features);
        w.u64(self.stride as u64);
        match &self.predictor {
            Predictor::Linear(l) => {
                w.f64s(&l.weights);
                w.f64(l.bias);
                write_svm(&mut w, &l.model);
            }
            Predictor::Boost(b) => {
                w.u64(b.stumps.len() as u64);
                for s in &b.stumps {
                    w.u64(s.feature as u64);
                    w.f64(s.threshold);
                    w.f64(s.left);
                    w.f64(s.right);
                }
            }
            Predictor::Kernel(k) => {
                w.u64(k.specs.len() as u64);
                for s in &k.specs {
                    write_kernel(&mut w, s);
                }
                w.u64(k.gating_groups.len() as u64);
                for g in &k.gating_groups {
                    w.str(g);
                }
                write_svm(&mut w, &k.mkl.svm);
                w.f64s(&k.mkl.history);
                match &k.mkl.params {
                    MklParams::Rbmkl => {}
                    MklParams::Nlmkl { eta, degree } => {
                        w.u32(*degree);
                        w.f64s(eta);
                    }
                    MklParams::Lmkl { gating, support_eta } => {
                        w.u64(gating.kernels() as u64);
                        w.u64(gating.dim() as u64);
                        w.f64s(gating.weights());
                        w.f64s(support_eta);
                    }
                }
                w.f64s(&k.support_rows);
            }
        }
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != SALM_VERSION {
            return Err(Error::UnsupportedFormat(format!("SALM version {version}")));
        }
        let method = Method::from_tag(r.u8()?)?;
        let features = read_features(&mut r)?;
        let stride = r.u64()? as usize;
        if stride == 0 {
            return Err(corrupt("zero stride"));
        }
        let predictor = match method {
            Method::LinearSvm => {
                let weights = r.f64s()?;
                let bias = r.f64()?;
                let model = read_svm(&mut r)?;
                Predictor::Linear(LinearSvm { weights, bias, model })
            }
            Method::AdaBoost => {
                let n = r.len()?;
                let mut stumps = Vec::with_capacity(n);
                for _ in 0..n {
                    stumps.push(Stump {
                        feature: r.u64()? as usize,
                        threshold: r.f64()?,
                        left: r.f64()?,
                        right: r.f64()?,
                    });
                }
                Predictor::Boost(BoostModel { stumps })
            }
            Method::Rbmkl | Method::Nlmkl | Method::Lmkl => {
                let n = r.len()?;
                let specs = (0..n).map(|_| read_kernel(&mut r)).collect::<Result<Vec<_>>>()?;
                let n = r.len()?;
                let gating_groups = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
                let svm = read_svm(&mut r)?;
                let history = r.f64s()?;
                let params = match method {
                    Method::Rbmkl => MklParams::Rbmkl,
                    Method::Nlmkl => {
                        let degree = r.u32()?;
                        MklParams::Nlmkl { degree, eta: r.f64s()? }
                    }
                    _ => {
                        let p = r.u64()? as usize;
                        let d = r.u64()? as usize;
                        let gating = Gating::from_weights(p, d, r.f64s()?)?;
                        MklParams::Lmkl {
                            gating,
                            support_eta: r.f64s()?,
                        }
                    }
                };
                let support_rows = r.f64s()?;
                Predictor::Kernel(KernelPredictor {
                    mkl: MklModel { params, svm, history },
                    specs,
                    support_rows,
                    gating_groups,
                })
            }
        };
        if r.pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let model = Self {
            method,
            features,
            stride,
            predictor,
        };
        model.layout()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::decode(&bytes)
    }
}

fn corrupt(message: impl Into<String>) -> Error {
    Error::Corrupt {
        format: "SALM",
        message: message.into(),
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| truncated())?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// A length prefix that cannot exceed the remaining bytes.
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(truncated());
        }
        Ok(n as usize)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("string is not utf-8"))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        Ok(self.take(n.checked_mul(8).ok_or_else(|| truncated())?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn write_features(w: &mut Writer, f: &FeatureConfig) {
    w.u64(f.groups.len() as u64);
    for g in &f.groups {
        w.str(g.name());
    }
    for v in [f.width, f.height, f.external_channels, f.external_scales] {
        w.u64(v as u64);
    }
}

fn read_features(r: &mut Reader) -> Result<FeatureConfig> {
    let n = r.len()?;
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.str()?;
        groups.push(FeatureGroup::from_name(&name).ok_or_else(|| corrupt(format!("unknown feature group `{name}`")))?);
    }
    let mut v = [0usize; 4];
    for x in &mut v {
        *x = r.u64()? as usize;
    }
    Ok(FeatureConfig {
        groups,
        width: v[0],
        height: v[1],
        external_channels: v[2],
        external_scales: v[3],
    })
}

fn write_kernel(w: &mut Writer, s: &KernelSpec) {
    match s.kind {
        KernelKind::Linear => {
            w.u8(0);
            w.f64(0.0);
        }
        KernelKind::Polynomial { degree } => {
            w.u8(1);
            w.f64(degree as f64);
        }
        KernelKind::Gaussian { gamma } => {
            w.u8(2);
            w.f64(gamma);
        }
    }
    w.str(&s.group);
}

fn read_kernel(r: &mut Reader) -> Result<KernelSpec> {
    let tag = r.u8()?;
    let p = r.f64()?;
    let kind = match tag {
        0 => KernelKind::Linear,
        1 => KernelKind::Polynomial { degree: p as u32 },
        2 => KernelKind::Gaussian { gamma: p },
        t => return Err(corrupt(format!("unknown kernel tag {t}"))),
    };
    kind.validate()?;
    Ok(KernelSpec::new(kind, r.str()?))
}

fn write_svm(w: &mut Writer, m: &SvmModel) {
    w.f64s(&m.alpha);
    w.u64(m.labels.len() as u64);
    for &y in &m.labels {
        w.u8(y as u8);
    }
    w.f64(m.bias);
    w.f64(m.c);
    w.u64(m.support.len() as u64);
    for &s in &m.support {
        w.u64(s as u64);
    }
    w.f64(m.objective);
    w.u64(m.iterations as u64);
}

fn read_svm(r: &mut Reader) -> Result<SvmModel> {
    let alpha = r.f64s()?;
    let n = r.len()?;
    let labels = (0..n).map(|_| r.u8().map(|v| v as i8)).collect::<Result<Vec<_>>>()?;
    let bias = r.f64()?;
    let c = r.f64()?;
    let n = r.len()?;
    let support = (0..n).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    if labels.len() != alpha.len() || support.iter().any(|&s| s >= alpha.len()) {
        return Err(corrupt("inconsistent SVM payload"));
    }
    Ok(SvmModel {
        alpha,
        labels,
        bias,
        c,
        support,
        objective: r.f64()?,
        iterations: r.u64()? as usize,
    })
}

fn truncated() -> Error {
    Error::TruncatedPayload("SALM record ends early".into())
}
