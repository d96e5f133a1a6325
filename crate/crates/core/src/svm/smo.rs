use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000_000;
/// Dual coefficients above this (or `C/2` when smaller) count as support vectors.
pub const SUPPORT_EPS: f64 = 1e-8;
const TAU: f64 = 1e-12;
const GAP_FACTOR: f64 = 1e-2;
const MIN_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoOptions {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SmoOptions {
    pub fn with_c(c: f64) -> Self {
        Self { c, ..Self::default() }
    }
}

/// Solution of the soft-margin dual over the training set it was solved on.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    /// One coefficient per training sample.
    pub alpha: Vec<f64>,
    pub labels: Vec<i8>,
    pub bias: f64,
    pub c: f64,
    /// Indices with `alpha > SUPPORT_EPS`, ascending.
    pub support: Vec<usize>,
    /// Dual objective at the solution.
    pub objective: f64,
    pub iterations: usize,
}

impl SvmModel {
    /// `alpha_i * y_i` for each support index, in `support` order.
    pub fn coefficients(&self) -> Vec<f64> {
        self.support
            .iter()
            .map(|&i| self.alpha[i] * self.labels[i] as f64)
            .collect()
    }

    /// `sum alpha_i y_i k_i + b` given kernel values to every support vector.
    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.support.len() {
            return Err(Error::DimensionMismatch {
                expected: self.support.len(),
                actual: k_row.len(),
            });
        }
        let mut s = 0.0;
        for (&i, &k) in self.support.iter().zip(k_row) {
            s += self.alpha[i] * self.labels[i] as f64 * k;
        }
        Ok(s + self.bias)
    }

    /// Decision values at every training sample, from the training Gram.
    pub fn training_decisions<T: Scalar>(&self, g: &GramMatrix<T>) -> Vec<f64> {
        (0..g.n())
            .map(|i| {
                let row = g.row(i);
                let k: Vec<f64> = self.support.iter().map(|&j| row[j].as_f64()).collect();
                self.decision(&k).expect("support row length")
            })
            .collect()
    }
}

/// `sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`.
pub fn dual_objective<T: Scalar>(g: &GramMatrix<T>, y: &[i8], alpha: &[f64]) -> f64 {
    let n = g.n();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = g.row(i);
        let mut s = 0.0;
        for j in 0..n {
            if alpha[j] != 0.0 {
                s += alpha[j] * y[j] as f64 * row[j].as_f64();
            }
        }
        quad += alpha[i] * y[i] as f64 * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

struct State<'a, T> {
    g: &'a GramMatrix<T>,
    y: Vec<f64>,
    c: f64,
    alpha: Vec<f64>,
    /// Gradient of `1/2 a'Qa - e'a`.
    grad: Vec<f64>,
}

impl<T: Scalar> State<'_, T> {
    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] > 0.0) || (self.y[t] < 0.0 && self.alpha[t] < self.c)
    }

    /// Maximal violating pair `(i, j, m, big_m)` over `-y G`.
    fn select(&self) -> (usize, usize, f64, f64) {
        let (mut i, mut m) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut big_m) = (usize::MAX, f64::INFINITY);
        for t in 0..self.y.len() {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > m {
                m = v;
                i = t;
            }
            if self.in_low(t) && v < big_m {
                big_m = v;
                j = t;
            }
        }
        (i, j, m, big_m)
    }

    fn objective(&self) -> f64 {
        -0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.g.get(i, j).as_f64()
    }

    /// Two-variable analytic step on `(i, j)`, following the usual box clipping.
    fn update(&mut self, i: usize, j: usize) {
        let (yi, yj, c) = (self.y[i], self.y[j], self.c);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let quad = (self.k(i, i) + self.k(j, j) - 2.0 * self.k(i, j)).max(TAU);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (ri, rj) = (self.g.row(i), self.g.row(j));
        for t in 0..self.grad.len() {
            let yt = self.y[t];
            self.grad[t] += yt * (yi * ri[t].as_f64() * di + yj * rj[t].as_f64() * dj);
        }
    }

    fn bias(&self, m: f64, big_m: f64) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for t in 0..self.y.len() {
            if self.alpha[t] > 0.0 && self.alpha[t] < self.c {
                sum += -self.y[t] * self.grad[t];
                count += 1;
            }
        }
        if count > 0 {
            sum / count as f64
        } else {
            0.5 * (m + big_m)
        }
    }

    /// Primal minus dual objective for bias `b`.
    fn duality_gap(&self, b: f64) -> f64 {
        let mut quad = 0.0;
        let mut slack = 0.0;
        for t in 0..self.y.len() {
            let qa = self.grad[t] + 1.0;
            quad += self.alpha[t] * qa;
            let f = self.y[t] * qa + b;
            slack += (1.0 - self.y[t] * f).max(0.0);
        }
        let primal = 0.5 * quad + self.c * slack;
        primal - self.objective()
    }
}

/// Sequential minimal optimization with maximal-violating-pair selection.
///
/// `warm` seeds the dual coefficients when it is feasible for `y` and `opts.c`,
/// otherwise the solve starts from zero.
pub fn smo_solve<T: Scalar>(
    g: &GramMatrix<T>,
    y: &[i8],
    opts: &SmoOptions,
    warm: Option<&[f64]>,
) -> Result<SvmModel> {
    let n = g.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidLabel(bad as f64));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(Error::InvalidArgument(format!("box constraint C = {}", opts.c)));
    }
    let yf: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    let alpha = match warm {
        Some(a)
            if a.len() == n
                && a.iter().all(|&v| (0.0..=opts.c).contains(&v))
                && a.iter().zip(&yf).map(|(a, y)| a * y).sum::<f64>().abs() <= 1e-9 =>
        {
            a.to_vec()
        }
        _ => vec![0.0; n],
    };
    let mut grad = vec![-1.0; n];
    for j in (0..n).filter(|&j| alpha[j] != 0.0) {
        let row = g.row(j);
        for t in 0..n {
            grad[t] += yf[t] * yf[j] * alpha[j] * row[t].as_f64();
        }
    }
    let mut st = State {
        g,
        y: yf,
        c: opts.c,
        alpha,
        grad,
    };
    let mut tol = opts.tol;
    let mut iterations = 0usize;
    let mut previous = st.objective();
    loop {
        let (i, j, m, big_m) = st.select();
        if i == usize::MAX || j == usize::MAX || m - big_m < tol {
            let b = st.bias(m, big_m);
            let obj = st.objective();
            let gap = st.duality_gap(b);
            if gap > GAP_FACTOR * (1.0 + obj.abs()) && tol > MIN_TOL {
                tol *= 0.1;
                continue;
            }
            if gap > GAP_FACTOR * (1.0 + obj.abs()) {
                log::warn!("smo stopped with duality gap {gap:.3e}");
            }
            return Ok(finish(st, b, obj, iterations));
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                what: "smo",
                iterations,
            });
        }
        st.update(i, j);
        iterations += 1;
        if cfg!(debug_assertions) {
            let now = st.objective();
            debug_assert!(
                now >= previous - 1e-9 * (1.0 + previous.abs()),
                "dual objective decreased {previous} -> {now}"
            );
            previous = now;
        }
    }
}

fn finish<T>(st: State<'_, T>, bias: f64, objective: f64, iterations: usize) -> SvmModel {
    let eps = SUPPORT_EPS.min(0.5 * st.c);
    let support = (0..st.alpha.len()).filter(|&t| st.alpha[t] > eps).collect();
    SvmModel {
        labels: st.y.iter().map(|&v| v as i8).collect(),
        alpha: st.alpha,
        bias,
        c: st.c,
        support,
        objective,
        iterations,
    }
}
