use super::{KernelBank, MklModel, MklOptions, MklParams};
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::scalar::Scalar;
use crate::svm::{smo_solve, SmoOptions, SvmModel};

/// `(sum_m eta_m K_m)^d` elementwise.
pub fn nlmkl_combine<T: Scalar>(bank: &KernelBank<T>, eta: &[f64], degree: u32) -> GramMatrix<T> {
    let grams = bank.grams();
    GramMatrix::from_fn(bank.n(), |i, j| {
        let s: f64 = grams.iter().zip(eta).map(|(g, e)| e * g.get(i, j).as_f64()).sum();
        T::lit(s.powi(degree as i32))
    })
}

/// SVM solved on the combined kernel for fixed `eta`; its objective is the
/// value minimized over `eta`.
pub fn nlmkl_objective<T: Scalar>(
    bank: &KernelBank<T>,
    y: &[i8],
    eta: &[f64],
    degree: u32,
    opts: &SmoOptions,
    warm: Option<&[f64]>,
) -> Result<SvmModel> {
    smo_solve(&nlmkl_combine(bank, eta, degree), y, opts, warm)
}

/// Gradient of the optimal dual objective in `eta` at the solution `svm`.
pub fn nlmkl_gradient<T: Scalar>(bank: &KernelBank<T>, eta: &[f64], degree: u32, svm: &SvmModel) -> Vec<f64> {
    let sv = &svm.support;
    let a = svm.coefficients();
    let d = degree as i32;
    let mut grad = vec![0.0; bank.len()];
    for (p, &i) in sv.iter().enumerate() {
        for (q, &j) in sv.iter().enumerate() {
            let s: f64 = bank.grams().iter().zip(eta).map(|(g, e)| e * g.get(i, j).as_f64()).sum();
            let w = a[p] * a[q] * degree as f64 * s.powi(d - 1);
            for (gm, g) in grad.iter_mut().zip(bank.grams()) {
                *gm += w * g.get(i, j).as_f64();
            }
        }
    }
    grad.iter().map(|g| -0.5 * g).collect()
}

/// Clips to the nonnegative orthant, then scales into the ball of radius `lambda`.
pub fn project_eta(eta: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = eta.iter().map(|&e| e.max(0.0)).collect();
    let norm = out.iter().map(|e| e * e).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::VanishingWeights);
    }
    if norm > lambda {
        for e in &mut out {
            *e *= lambda / norm;
        }
    }
    Ok(out)
}

const MAX_HALVINGS: usize = 12;

/// Alternates SMO on the fixed combination with a projected, normalized
/// gradient step in `eta` that decreases the optimal dual objective.
pub fn nlmkl_train<T: Scalar>(bank: &KernelBank<T>, y: &[i8], opts: &MklOptions) -> Result<MklModel> {
    if opts.degree < 1 {
        return Err(Error::InvalidArgument("combination degree must be >= 1".into()));
    }
    if !(opts.lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("norm bound {} must be positive", opts.lambda)));
    }
    let p = bank.len();
    let mut eta = project_eta(&vec![1.0 / (p as f64).sqrt(); p], opts.lambda)?;
    let mut svm = nlmkl_objective(bank, y, &eta, opts.degree, &opts.smo, None)?;
    let mut history = vec![svm.objective];
    let mut step = opts.step;
    for _ in 0..opts.max_outer {
        let grad = nlmkl_gradient(bank, &eta, opts.degree, &svm);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = eta.iter().zip(&grad).map(|(e, g)| e - step * g / gnorm).collect();
            let trial = project_eta(&trial, opts.lambda)?;
            let change = trial.iter().zip(&eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if change < opts.param_tol {
                break;
            }
            let next = nlmkl_objective(bank, y, &trial, opts.degree, &opts.smo, Some(&svm.alpha))?;
            if next.objective < svm.objective {
                accepted = Some((trial, next, change));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, next, change)) = accepted else {
            break;
        };
        eta = trial;
        svm = next;
        history.push(svm.objective);
        if change < opts.param_tol {
            break;
        }
    }
    Ok(MklModel {
        params: MklParams::Nlmkl {
            eta,
            degree: opts.degree,
        },
        svm,
        history,
    })
}
