//! Soft-margin SVM trained by SMO, plus the linear baseline.

mod sample;
mod smo;

pub use sample::SampleSet;
pub use smo::{
    dual_objective, smo_solve, SmoOptions, SvmModel, DEFAULT_C, DEFAULT_MAX_ITER, DEFAULT_TOL, SUPPORT_EPS,
};

use crate::error::Result;
use crate::kernels::{gram, KernelKind, KernelSpec};
use crate::scalar::Scalar;

/// Linear SVM with its explicit primal weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub model: SvmModel,
}

impl LinearSvm {
    pub fn decision<T: Scalar>(&self, x: &[T]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, v)| w * v.as_f64())
            .sum::<f64>()
            + self.bias
    }
}

/// Trains over every dimension of `samples` with a linear kernel.
pub fn linear_svm_train<T: Scalar>(samples: &SampleSet<T>, opts: &SmoOptions) -> Result<LinearSvm> {
    samples.check_two_classes()?;
    let all = SampleSet::new(
        samples.dim(),
        (0..samples.len()).flat_map(|i| samples.row(i).to_vec()).collect(),
        samples.labels().to_vec(),
        Vec::new(),
    )?;
    let g = gram(&KernelSpec::new(KernelKind::Linear, "all"), &all)?;
    let model = smo_solve(&g, samples.labels(), opts, None)?;
    let mut weights = vec![0.0; samples.dim()];
    for (&i, coef) in model.support.iter().zip(model.coefficients()) {
        for (w, v) in weights.iter_mut().zip(samples.row(i)) {
            *w += coef * v.as_f64();
        }
    }
    Ok(LinearSvm {
        weights,
        bias: model.bias,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::kernels::{eval_kernel, GramMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_point() -> (GramMatrix<f64>, Vec<i8>) {
        let s = SampleSet::from_rows(&[vec![1.0], vec![-1.0]], vec![1, -1]).unwrap();
        (gram(&KernelSpec::new(KernelKind::Linear, "all"), &s).unwrap(), vec![1, -1])
    }

    fn box_ok(m: &SvmModel) -> bool {
        let sum: f64 = m.alpha.iter().zip(&m.labels).map(|(a, &y)| a * y as f64).sum();
        m.alpha.iter().all(|&a| (0.0..=m.c).contains(&a)) && sum.abs() <= 1e-8 && !m.support.is_empty()
    }

    #[test]
    fn closed_form_two_points() {
        let (g, y) = two_point();
        let m = smo_solve(&g, &y, &SmoOptions::with_c(10.0), None).unwrap();
        assert!((m.alpha[0] - 0.5).abs() < 1e-9 && (m.alpha[1] - 0.5).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-9);
        // support row at x = +1: k = (1, -1)
        assert!((m.decision(&[1.0, -1.0]).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(m.decision(&[0.0, 0.0]).unwrap(), m.bias);
        assert!(matches!(m.decision(&[1.0]), Err(Error::DimensionMismatch { .. })));

        let s = SampleSet::from_rows(&[vec![1.0], vec![-1.0]], y).unwrap();
        let lin = linear_svm_train(&s, &SmoOptions::with_c(10.0)).unwrap();
        assert!((lin.weights[0] - 1.0).abs() < 1e-9 && lin.bias.abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let (g, _) = two_point();
        assert!(matches!(smo_solve(&g, &[1, 1], &SmoOptions::default(), None), Err(Error::SingleClass)));
        assert!(matches!(smo_solve(&g, &[1, 0], &SmoOptions::default(), None), Err(Error::InvalidLabel(_))));
        assert!(smo_solve(&g, &[1, -1], &SmoOptions::with_c(0.0), None).is_err());
    }

    fn four_points() -> (GramMatrix<f64>, Vec<i8>) {
        let rows = vec![vec![0.0, 0.0], vec![0.2, 1.0], vec![1.5, 0.3], vec![2.0, 1.4]];
        let y = vec![1, 1, -1, -1];
        let s = SampleSet::from_rows(&rows, y.clone()).unwrap();
        (gram(&KernelSpec::new(KernelKind::Gaussian { gamma: 0.5 }, "all"), &s).unwrap(), y)
    }

    #[test]
    fn separable_gaussian_matches_brute_force() {
        let (g, y) = four_points();
        let m = smo_solve(&g, &y, &SmoOptions::default(), None).unwrap();
        assert!(box_ok(&m));
        let f = m.training_decisions(&g);
        assert!(f.iter().zip(&y).all(|(f, &y)| f * y as f64 > 0.0));

        // exhaustive grid over alpha_1..3 in [0, 1] at 0.01; alpha_4 from the equality
        let mut best = f64::NEG_INFINITY;
        for a in 0..=100 {
            for b in 0..=100 {
                for c in 0..=100 {
                    let (a1, a2, a3) = (a as f64 / 100.0, b as f64 / 100.0, c as f64 / 100.0);
                    let a4 = a1 + a2 - a3;
                    if (0.0..=1.0).contains(&a4) {
                        best = best.max(dual_objective(&g, &y, &[a1, a2, a3, a4]));
                    }
                }
            }
        }
        assert!(m.objective >= best - 1e-9);
        assert!(m.objective - best < 1e-2, "{} vs grid {}", m.objective, best);
    }

    #[test]
    fn tiny_c_saturates_box() {
        let (g, y) = four_points();
        let c = 1e-9;
        let m = smo_solve(&g, &y, &SmoOptions::with_c(c), None).unwrap();
        assert!(m.alpha.iter().all(|&a| (a - c).abs() < 1e-12));
        assert_eq!(m.support.len(), 4);
    }

    fn random_problem(seed: u64, n: usize) -> (SampleSet<f64>, GramMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label: i8 = if i % 2 == 0 { 1 } else { -1 };
            let shift = 0.8 * label as f64;
            rows.push(vec![rng.random_range(-1.0..1.0) + shift, rng.random_range(-1.0..1.0)]);
            y.push(label);
        }
        let s = SampleSet::from_rows(&rows, y).unwrap();
        let g = gram(&KernelSpec::new(KernelKind::Gaussian { gamma: 1.0 }, "all"), &s).unwrap();
        (s, g)
    }

    #[test]
    fn kkt_conditions_hold() {
        let (s, g) = random_problem(11, 60);
        let opts = SmoOptions::with_c(10.0);
        let m = smo_solve(&g, s.labels(), &opts, None).unwrap();
        assert!(box_ok(&m));
        let f = m.training_decisions(&g);
        for i in 0..s.len() {
            let margin = s.labels()[i] as f64 * f[i];
            if m.alpha[i] > 1e-8 && m.alpha[i] < opts.c - 1e-8 {
                assert!((margin - 1.0).abs() < 10.0 * opts.tol, "free {i}: {margin}");
            }
        }
        // warm start from the solution converges immediately to the same objective
        let again = smo_solve(&g, s.labels(), &opts, Some(&m.alpha)).unwrap();
        assert!(again.iterations <= 1);
        assert!((again.objective - m.objective).abs() < 1e-9);
    }

    #[test]
    fn hard_margin_margins() {
        let (s, g) = random_problem(5, 30);
        let m = smo_solve(&g, s.labels(), &SmoOptions::with_c(1e6), None).unwrap();
        let f = m.training_decisions(&g);
        for (f, &y) in f.iter().zip(s.labels()) {
            assert!(f * y as f64 >= 1.0 - 1e-3);
        }
    }

    #[test]
    fn linear_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let v = rng.random_range(-1.0..1.0) + if i % 2 == 0 { 0.5 } else { -0.5 };
                vec![v, v, rng.random_range(-1.0..1.0)]
            })
            .collect();
        let y: Vec<i8> = (0..40).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let s = SampleSet::from_rows(&rows, y).unwrap();
        let lin = linear_svm_train(&s, &SmoOptions::default()).unwrap();
        assert!((lin.weights[0] - lin.weights[1]).abs() < 1e-6);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let k: Vec<f64> = lin
                .model
                .support
                .iter()
                .map(|&i| eval_kernel(KernelKind::Linear, s.row(i), &x).unwrap())
                .collect();
            assert!((lin.decision(&x) - lin.model.decision(&k).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_invariance() {
        let (s, g) = random_problem(8, 40);
        let m = smo_solve(&g, s.labels(), &SmoOptions::default(), None).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let sp = s.subset(&perm);
        let gp = g.submatrix(&perm);
        let mp = smo_solve(&gp, sp.labels(), &SmoOptions::default(), None).unwrap();
        let spec = KernelSpec::new(KernelKind::Gaussian { gamma: 1.0 }, "all");
        let eval = |m: &SvmModel, set: &SampleSet<f64>, x: &[f64]| {
            let k: Vec<f64> = m.support.iter().map(|&i| eval_kernel(spec.kind, set.row(i), x).unwrap()).collect();
            m.decision(&k).unwrap()
        };
        for gx in 0..15 {
            for gy in 0..15 {
                let x = [gx as f64 / 5.0 - 1.5, gy as f64 / 5.0 - 1.5];
                let (a, b) = (eval(&m, &s, &x), eval(&mp, &sp, &x));
                if a.abs() > 0.05 {
                    assert_eq!(a.signum(), b.signum(), "{x:?}: {a} vs {b}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn solutions_stay_feasible(seed in 0u64..1000, n in 4usize..24, c in 0.05f64..20.0) {
            let (s, g) = random_problem(seed, n);
            let m = smo_solve(&g, s.labels(), &SmoOptions::with_c(c), None).unwrap();
            prop_assert!(box_ok(&m));
            prop_assert!((m.objective - dual_objective(&g, s.labels(), &m.alpha)).abs() < 1e-8 * (1.0 + m.objective.abs()));
        }
    }
}
