use super::{KernelBank, MklModel, MklOptions, MklParams};
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::scalar::Scalar;
use crate::svm::{smo_solve, SmoOptions, SvmModel};

/// Largest tolerated softmax logit magnitude before the parameters are rescaled.
pub const GATING_LIMIT: f64 = 30.0;
const RESCALE_TARGET: f64 = 0.5 * GATING_LIMIT;
const MAX_HALVINGS: usize = 12;

/// Softmax gating `eta_m(x) = softmax_m(<v_m, x> + v_m0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gating {
    kernels: usize,
    dim: usize,
    /// Row-major `kernels x (dim + 1)`, bias last.
    weights: Vec<f64>,
}

impl Gating {
    pub fn zeros(kernels: usize, dim: usize) -> Self {
        Self {
            kernels,
            dim,
            weights: vec![0.0; kernels * (dim + 1)],
        }
    }

    pub fn from_weights(kernels: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != kernels * (dim + 1) || kernels == 0 {
            return Err(Error::DimensionMismatch {
                expected: kernels * (dim + 1),
                actual: weights.len(),
            });
        }
        Ok(Self { kernels, dim, weights })
    }

    pub fn kernels(&self) -> usize {
        self.kernels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.dim + 1)
            .map(|v| v[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + v[self.dim])
            .collect()
    }

    pub fn eta(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let z = self.logits(x);
        let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = e.iter().sum();
        Ok(e.iter().map(|v| v / s).collect())
    }

    /// Gating weights of every row of `reps`, row-major `n x kernels`.
    pub fn eta_all(&self, reps: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(reps.len() / self.dim.max(1) * self.kernels);
        for x in reps.chunks(self.dim) {
            out.extend(self.eta(x)?);
        }
        Ok(out)
    }

    fn max_logit(&self, reps: &[f64]) -> f64 {
        reps.chunks(self.dim)
            .flat_map(|x| self.logits(x))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `sum_m diag(eta_m) K_m diag(eta_m)` with `eta` row-major `n x P`.
pub fn lmkl_combine<T: Scalar>(bank: &KernelBank<T>, eta: &[f64]) -> GramMatrix<T> {
    let p = bank.len();
    let grams = bank.grams();
    GramMatrix::from_fn(bank.n(), |i, j| {
        let s: f64 = (0..p).map(|m| eta[i * p + m] * grams[m].get(i, j).as_f64() * eta[j * p + m]).sum();
        T::lit(s)
    })
}

/// SVM solved with the gating fixed.
pub fn lmkl_objective<T: Scalar>(
    bank: &KernelBank<T>,
    gating: &Gating,
    reps: &[f64],
    y: &[i8],
    opts: &SmoOptions,
    warm: Option<&[f64]>,
) -> Result<SvmModel> {
    let eta = gating.eta_all(reps)?;
    smo_solve(&lmkl_combine(bank, &eta), y, opts, warm)
}

/// Gradient of the optimal dual objective in the gating weights, laid out
/// like [`Gating::weights`].
pub fn lmkl_gradient<T: Scalar>(bank: &KernelBank<T>, gating: &Gating, reps: &[f64], svm: &SvmModel) -> Result<Vec<f64>> {
    let p = bank.len();
    let dg = gating.dim();
    let eta = gating.eta_all(reps)?;
    let sv = &svm.support;
    let a = svm.coefficients();
    let mut grad = vec![0.0; p * (dg + 1)];
    let mut s = vec![0.0; p];
    for (pi, &i) in sv.iter().enumerate() {
        for (m, sm) in s.iter_mut().enumerate() {
            let g = &bank.grams()[m];
            let inner: f64 = sv
                .iter()
                .zip(&a)
                .map(|(&j, aj)| g.get(i, j).as_f64() * eta[j * p + m] * aj)
                .sum();
            *sm = a[pi] * eta[i * p + m] * inner;
        }
        let total: f64 = s.iter().sum();
        let x = &reps[i * dg..(i + 1) * dg];
        for m in 0..p {
            let dz = -(s[m] - eta[i * p + m] * total);
            let row = &mut grad[m * (dg + 1)..(m + 1) * (dg + 1)];
            for (r, xv) in row.iter_mut().zip(x) {
                *r += dz * xv;
            }
            row[dg] += dz;
        }
    }
    Ok(grad)
}

/// Alternates SMO under fixed gating with normalized gradient steps on the
/// gating weights that decrease the optimal dual objective. `reps` is
/// row-major `n x dim`.
pub fn lmkl_train<T: Scalar>(
    bank: &KernelBank<T>,
    reps: &[f64],
    dim: usize,
    y: &[i8],
    opts: &MklOptions,
) -> Result<MklModel> {
    if dim == 0 {
        return Err(Error::MissingGating);
    }
    let n = bank.n();
    if reps.len() != n * dim {
        return Err(Error::DimensionMismatch {
            expected: n * dim,
            actual: reps.len(),
        });
    }
    if reps.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite gating representation".into()));
    }
    let p = bank.len();
    let mut gating = Gating::zeros(p, dim);
    let mut svm = lmkl_objective(bank, &gating, reps, y, &opts.smo, None)?;
    let mut history = vec![svm.objective];
    let mut step = opts.step;
    let mut saturated = false;
    for _ in 0..opts.max_outer {
        let grad = lmkl_gradient(bank, &gating, reps, &svm)?;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if step < opts.param_tol {
                break;
            }
            let w: Vec<f64> = gating.weights.iter().zip(&grad).map(|(v, g)| v - step * g / gnorm).collect();
            let trial = Gating { weights: w, ..gating.clone() };
            let next = lmkl_objective(bank, &trial, reps, y, &opts.smo, Some(&svm.alpha))?;
            if next.objective < svm.objective {
                accepted = Some((trial, next));
                break;
            }
            step *= 0.5;
        }
        let Some((mut trial, mut next)) = accepted else {
            break;
        };
        let top = trial.max_logit(reps);
        if top > GATING_LIMIT {
            if saturated {
                return Err(Error::GatingSaturation(top));
            }
            for v in &mut trial.weights {
                *v *= RESCALE_TARGET / top;
            }
            next = lmkl_objective(bank, &trial, reps, y, &opts.smo, Some(&next.alpha))?;
            saturated = true;
        } else {
            saturated = false;
        }
        gating = trial;
        svm = next;
        history.push(svm.objective);
        if step < opts.param_tol {
            break;
        }
    }
    let eta = gating.eta_all(reps)?;
    let support_eta = svm
        .support
        .iter()
        .flat_map(|&i| eta[i * p..(i + 1) * p].to_vec())
        .collect();
    Ok(MklModel {
        params: MklParams::Lmkl { gating, support_eta },
        svm,
        history,
    })
}
