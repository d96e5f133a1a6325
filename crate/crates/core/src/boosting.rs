//! Gentle AdaBoost over real-valued decision stumps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::svm::SampleSet;

pub const DEFAULT_ROUNDS: usize = 200;
pub const MAX_THRESHOLDS: usize = 256;
const DEGENERATE_WEIGHT: f64 = 1.0 - 1e-12;

/// `left` when `x[feature] < threshold`, otherwise `right`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        if v < self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostModel {
    pub stumps: Vec<Stump>,
}

impl BoostModel {
    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    /// Smallest input dimension the model can score.
    pub fn min_dim(&self) -> usize {
        self.stumps.iter().map(|s| s.feature + 1).max().unwrap_or(0)
    }
}

/// Per-round diagnostics from training.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoostTrace {
    /// Mean exponential loss over the training set after each round.
    pub exp_loss: Vec<f64>,
    /// Weighted misclassification of each stump when it was selected.
    pub weighted_error: Vec<f64>,
    /// Sample weight sums after each renormalization.
    pub weight_sums: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostOptions {
    pub rounds: usize,
    pub max_thresholds: usize,
}

impl Default for BoostOptions {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            max_thresholds: MAX_THRESHOLDS,
        }
    }
}

struct FeatureIndex {
    order: Vec<usize>,
    /// `(k, threshold)`: samples `order[..k]` fall left.
    splits: Vec<(usize, f64)>,
}

fn index_feature<T: Scalar>(s: &SampleSet<T>, f: usize, max_thresholds: usize) -> FeatureIndex {
    let value = |i: usize| s.row(i)[f].as_f64();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
    let mut all = Vec::new();
    for k in 1..order.len() {
        let (a, b) = (value(order[k - 1]), value(order[k]));
        if a < b {
            all.push((k, 0.5 * (a + b)));
        }
    }
    let splits = if all.len() <= max_thresholds {
        all
    } else {
        // evenly spaced quantiles of the candidate list
        (0..max_thresholds)
            .map(|q| all[(q * (all.len() - 1)) / (max_thresholds - 1).max(1)])
            .collect()
    };
    FeatureIndex { order, splits }
}

/// Weighted least squares stump for one feature: `(error, stump)`.
fn best_split(f: usize, idx: &FeatureIndex, w: &[f64], y: &[f64]) -> Option<(f64, Stump)> {
    let total_w: f64 = w.iter().sum();
    let total_wy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let mut best: Option<(f64, Stump)> = None;
    let (mut lw, mut lwy) = (0.0, 0.0);
    let mut taken = 0;
    for &(k, threshold) in &idx.splits {
        for &i in &idx.order[taken..k] {
            lw += w[i];
            lwy += w[i] * y[i];
        }
        taken = k;
        let (rw, rwy) = (total_w - lw, total_wy - lwy);
        let mean = |sw: f64, swy: f64| if sw > 0.0 { swy / sw } else { 0.0 };
        let (left, right) = (mean(lw, lwy), mean(rw, rwy));
        // sum w (y - h)^2 with y^2 = 1
        let err = total_w - left * lwy - right * rwy;
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, Stump { feature: f, threshold, left, right }));
        }
    }
    best
}

pub fn boost_train<T: Scalar>(s: &SampleSet<T>, opts: &BoostOptions) -> Result<BoostModel> {
    boost_train_traced(s, opts).map(|(m, _)| m)
}

pub fn boost_train_traced<T: Scalar>(s: &SampleSet<T>, opts: &BoostOptions) -> Result<(BoostModel, BoostTrace)> {
    s.check_two_classes()?;
    if opts.rounds == 0 {
        return Err(Error::InvalidArgument("boosting needs at least one round".into()));
    }
    let n = s.len();
    let y: Vec<f64> = s.labels().iter().map(|&l| l as f64).collect();
    let index: Vec<FeatureIndex> = (0..s.dim())
        .into_par_iter()
        .map(|f| index_feature(s, f, opts.max_thresholds.max(1)))
        .collect();
    if index.iter().all(|f| f.splits.is_empty()) {
        return Err(Error::InvalidArgument("every feature is constant".into()));
    }
    let mut w = vec![1.0 / n as f64; n];
    let mut score = vec![0.0; n];
    let mut stumps = Vec::with_capacity(opts.rounds);
    let mut trace = BoostTrace::default();
    for _ in 0..opts.rounds {
        let best = index
            .par_iter()
            .enumerate()
            .filter_map(|(f, idx)| best_split(f, idx, &w, &y))
            .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1.feature < a.1.feature) { b } else { a });
        let Some((_, stump)) = best else { break };
        let mut miss = 0.0;
        for i in 0..n {
            let h = stump.eval(s.row(i)[stump.feature].as_f64());
            let m = y[i] * h;
            if m < 0.0 {
                miss += w[i];
            } else if m == 0.0 {
                miss += 0.5 * w[i];
            }
            score[i] += h;
            w[i] *= (-y[i] * h).exp();
        }
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        stumps.push(stump);
        trace.weighted_error.push(miss);
        trace.weight_sums.push(w.iter().sum());
        trace
            .exp_loss
            .push(score.iter().zip(&y).map(|(f, y)| (-y * f).exp()).sum::<f64>() / n as f64);
        if w.iter().any(|&v| v > DEGENERATE_WEIGHT) {
            log::warn!("boosting stopped after {} rounds: weights collapsed onto one sample", stumps.len());
            break;
        }
    }
    Ok((BoostModel { stumps }, trace))
}

/// Sum of stump outputs at `x`.
pub fn boost_score<T: Scalar>(m: &BoostModel, x: &[T]) -> Result<f64> {
    if x.len() < m.min_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.min_dim(),
            actual: x.len(),
        });
    }
    Ok(m.stumps.iter().map(|s| s.eval(x[s.feature].as_f64())).sum())
}
