//! Fixation AUC, multi-seed aggregation, comparison reports and heatmap export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmap::write_fmap;
use crate::imgproc::{encode_gray_png, ImagePlane};
use crate::scalar::Scalar;

/// Mann–Whitney AUC of `map` with `fixated` pixels as positives and every
/// other pixel as a negative. Ties count one half.
pub fn auc<T: Scalar>(map: &ImagePlane<T>, fixated: &[(usize, usize)]) -> Result<f64> {
    let (pos, neg) = split_scores(map, fixated)?;
    let n_pos = pos.len() as f64;
    let n_neg = neg.len() as f64;
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&v| (v, true)).chain(neg.iter().map(|&v| (v, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // sum of average ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        rank_sum += avg * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

/// Area under the ROC curve traced by thresholding `map` at every distinct
/// value, integrated with the trapezoid rule. Slow reference for [`auc`].
pub fn auc_threshold_sweep<T: Scalar>(map: &ImagePlane<T>, fixated: &[(usize, usize)]) -> Result<f64> {
    let (pos, neg) = split_scores(map, fixated)?;
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let rate = |s: &[f64], t: f64| s.iter().filter(|&&v| v >= t).count() as f64 / s.len() as f64;
    let (mut area, mut prev) = (0.0, (0.0, 0.0));
    for t in thresholds {
        let pt = (rate(&neg, t), rate(&pos, t));
        area += (pt.0 - prev.0) * (pt.1 + prev.1) / 2.0;
        prev = pt;
    }
    Ok(area)
}

fn split_scores<T: Scalar>(map: &ImagePlane<T>, fixated: &[(usize, usize)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (w, h) = map.dims();
    let mut mask = vec![false; w * h];
    for &(x, y) in fixated {
        if x >= w || y >= h {
            return Err(Error::InvalidArgument(format!("fixated pixel ({x}, {y}) outside {w}x{h} map")));
        }
        mask[y * w + x] = true;
    }
    let mut pos = Vec::new();
    let mut neg = Vec::with_capacity(w * h);
    for (i, &v) in map.data().iter().enumerate() {
        let v = v.as_f64();
        if !v.is_finite() {
            return Err(Error::InvalidArgument("saliency map has non-finite values".into()));
        }
        if mask[i] {
            pos.push(v);
        } else {
            neg.push(v);
        }
    }
    if pos.is_empty() {
        return Err(Error::AucUndefined("no fixated pixels"));
    }
    if neg.is_empty() {
        return Err(Error::AucUndefined("every pixel is fixated"));
    }
    Ok((pos, neg))
}

/// AUCs of many maps, in parallel.
pub fn auc_batch<T: Scalar>(items: &[(ImagePlane<T>, Vec<(usize, usize)>)]) -> Result<Vec<f64>> {
    items.par_iter().map(|(m, f)| auc(m, f)).collect()
}

/// Outcome of one method over several runs.
#[derive(Clone, Debug, PartialEq)]
pub struct AucResult {
    /// Per-image AUCs of each run.
    pub per_image: Vec<Vec<f64>>,
    /// Mean AUC over the test images of each run.
    pub runs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over runs, 0 for a single run.
    pub std: f64,
    pub best: f64,
}

impl AucResult {
    pub fn from_runs(per_image: Vec<Vec<f64>>) -> Result<Self> {
        if per_image.is_empty() || per_image.iter().any(|r| r.is_empty()) {
            return Err(Error::InvalidArgument("AUC summary needs at least one non-empty run".into()));
        }
        let runs: Vec<f64> = per_image.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let n = runs.len() as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let std = if runs.len() > 1 {
            (runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let best = runs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            per_image,
            runs,
            mean,
            std,
            best,
        })
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }
}

/// Runs `trial` once per seed. A trial returns the per-image test AUCs of its
/// run. Failed seeds are logged and dropped; the experiment fails when more
/// than half of them fail.
pub fn run_experiment<F>(seeds: &[u64], trial: F) -> Result<AucResult>
where
    F: Fn(u64) -> Result<Vec<f64>>,
{
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("empty seed list".into()));
    }
    let mut ok = Vec::new();
    let mut failed = 0;
    for &seed in seeds {
        match trial(seed) {
            Ok(aucs) => ok.push(aucs),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failed += 1;
            }
        }
    }
    if 2 * failed > seeds.len() || ok.is_empty() {
        return Err(Error::ExperimentFailed {
            failed,
            total: seeds.len(),
        });
    }
    AucResult::from_runs(ok)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub features: String,
    pub result: AucResult,
}

/// One column per (method, features) pair, rows Average / Std. dev. / Best.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn push(&mut self, method: &str, features: &str, result: AucResult) {
        self.rows.push(ReportRow {
            method: method.to_string(),
            features: features.to_string(),
            result,
        });
    }

    pub fn get(&self, method: &str, features: &str) -> Option<&AucResult> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.features == features)
            .map(|r| &r.result)
    }

    pub fn text_table(&self) -> String {
        let headers: Vec<String> = self.rows.iter().map(|r| format!("{} ({})", r.method, r.features)).collect();
        let label_w = "Std. dev.".len();
        let widths: Vec<usize> = headers.iter().map(|h| h.len().max(6)).collect();
        let mut out = format!("{:label_w$}", "");
        for (h, w) in headers.iter().zip(&widths) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        let stats: [(&str, fn(&AucResult) -> f64); 3] =
            [("Average", |r| r.mean), ("Std. dev.", |r| r.std), ("Best", |r| r.best)];
        for (label, get) in stats {
            let _ = write!(out, "{label:label_w$}");
            for (row, w) in self.rows.iter().zip(&widths) {
                let _ = write!(out, "  {:>w$.3}", get(&row.result));
            }
            out.push('\n');
        }
        out
    }

    /// `method,features,run,auc`, one line per run.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("method,features,run,auc\n");
        for row in &self.rows {
            for (i, auc) in row.result.runs.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", row.method, row.features, i, auc);
            }
        }
        out
    }

    /// `method,features,mean,std,best`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,features,mean,std,best\n");
        for row in &self.rows {
            let r = &row.result;
            let _ = writeln!(out, "{},{},{},{},{}", row.method, row.features, r.mean, r.std, r.best);
        }
        out
    }

    /// Writes `report.txt`, `runs.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.text_table())?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}

/// Display transform for heatmaps, applied after min-max normalization.
pub fn display_transform(v: f64) -> f64 {
    (4.0 * (v - 1.0)).exp()
}

/// Grayscale rendering of `map`: min-max normalized (constant maps become
/// mid-gray), optionally passed through [`display_transform`].
pub fn heatmap_plane<T: Scalar>(map: &ImagePlane<T>, display: bool) -> ImagePlane<f64> {
    let (lo, hi) = map.min_max();
    let (lo, hi) = (lo.as_f64(), hi.as_f64());
    map.cast::<f64>().map(|v| {
        let n = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        if display {
            display_transform(n)
        } else {
            n
        }
    })
}

/// Writes `<path>.png` (8-bit grayscale) and `<path>.fmap` (raw values).
/// Returns the two paths.
pub fn export_heatmap<T: Scalar>(map: &ImagePlane<T>, path: &Path, display: bool) -> Result<(PathBuf, PathBuf)> {
    let png = path.with_extension("png");
    let fmap = path.with_extension("fmap");
    if let Some(dir) = png.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&png, encode_gray_png(&heatmap_plane(map, display))?)?;
    write_fmap(&fmap, std::slice::from_ref(map))?;
    Ok((png, fmap))
}
