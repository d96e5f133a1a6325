//! Base kernels, Gram matrices over feature groups and spherical normalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::svm::SampleSet;

pub const GAMMA_PAIRS: usize = 2000;
pub const GAMMA_SEED: u64 = 0x5eed_6a11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    Linear,
    Polynomial { degree: u32 },
    Gaussian { gamma: f64 },
}

impl KernelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelKind::Polynomial { degree } if degree < 1 => {
                Err(Error::InvalidArgument(format!("polynomial degree {degree} < 1")))
            }
            KernelKind::Gaussian { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidArgument(format!("gaussian gamma {gamma} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// A kernel bound to the feature group it reads.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub group: String,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, group: impl Into<String>) -> Self {
        Self {
            kind,
            group: group.into(),
        }
    }
}

/// Dense symmetric `n x n` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<T> {
    n: usize,
    data: Vec<T>,
    pub spec: Option<KernelSpec>,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn from_vec(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
            });
        }
        Ok(Self { n, data, spec: None })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T + Sync) -> Self {
        let mut data = vec![T::zero(); n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate().skip(i) {
                *v = f(i, j);
            }
        });
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self { n, data, spec: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs().as_f64());
            }
        }
        worst
    }

    /// Rows and columns picked by `idx`, in that order.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let data = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self {
            n: idx.len(),
            data,
            spec: self.spec.clone(),
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.as_f64() * y.as_f64()).sum()
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum()
}

#[inline]
fn eval_unchecked<T: Scalar>(kind: KernelKind, a: &[T], b: &[T]) -> f64 {
    match kind {
        KernelKind::Linear => dot(a, b),
        KernelKind::Polynomial { degree } => (dot(a, b) + 1.0).powi(degree as i32),
        KernelKind::Gaussian { gamma } => (-gamma * sq_dist(a, b)).exp(),
    }
}

pub fn eval_kernel<T: Scalar>(kind: KernelKind, a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(T::lit(eval_unchecked(kind, a, b)))
}

/// Gram matrix of `spec` over the group-restricted vectors of `samples`.
pub fn gram<T: Scalar>(spec: &KernelSpec, samples: &SampleSet<T>) -> Result<GramMatrix<T>> {
    spec.kind.validate()?;
    let range = samples.group(&spec.group)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("gram of an empty sample set".into()));
    }
    let rows: Vec<&[T]> = (0..samples.len()).map(|i| &samples.row(i)[range.clone()]).collect();
    let kind = spec.kind;
    let mut g = GramMatrix::from_fn(rows.len(), |i, j| T::lit(eval_unchecked(kind, rows[i], rows[j])));
    g.spec = Some(spec.clone());
    Ok(g)
}

/// Kernel values between `queries` and `basis`, one row per query.
pub fn cross_kernel<T: Scalar>(spec: &KernelSpec, queries: &[&[T]], basis: &[&[T]]) -> Result<Vec<Vec<T>>> {
    spec.kind.validate()?;
    queries
        .iter()
        .map(|q| basis.iter().map(|b| eval_kernel(spec.kind, q, b)).collect())
        .collect()
}

/// `g_ij / sqrt(g_ii g_jj)`, giving a unit diagonal.
pub fn normalize_spherical<T: Scalar>(g: &GramMatrix<T>) -> Result<GramMatrix<T>> {
    let diag: Vec<f64> = g.diagonal().iter().map(|v| v.as_f64()).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroDiagonal(i));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = g.n;
    let mut out = GramMatrix::from_fn(n, |i, j| {
        if i == j {
            T::one()
        } else {
            T::lit(g.get(i, j).as_f64() * inv[i] * inv[j])
        }
    });
    out.spec = g.spec.clone();
    Ok(out)
}

/// Normalizes a query-to-basis kernel value given both self-kernel values.
#[inline]
pub fn normalize_value(k: f64, self_query: f64, self_basis: f64) -> f64 {
    k / (self_query * self_basis).sqrt()
}

/// Median-heuristic bandwidth: `1 / median` of nonzero squared distances over
/// at most [`GAMMA_PAIRS`] pairs drawn with a fixed seed.
pub fn default_gamma<T: Scalar>(samples: &SampleSet<T>, group: &str) -> Result<f64> {
    let range = samples.group(group)?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidArgument("median heuristic needs two samples".into()));
    }
    let row = |i: usize| &samples.row(i)[range.clone()];
    let total_pairs = n * (n - 1) / 2;
    let mut d: Vec<f64> = if total_pairs <= GAMMA_PAIRS {
        (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| sq_dist(row(i), row(j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(GAMMA_SEED);
        (0..GAMMA_PAIRS)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                sq_dist(row(i), row(j))
            })
            .collect()
    };
    d.retain(|&v| v > 0.0);
    if d.is_empty() {
        return Err(Error::DegenerateDistances);
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    Ok(1.0 / median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::GroupSpan;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn set(rows: &[Vec<f64>]) -> SampleSet<f64> {
        let labels = (0..rows.len()).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        SampleSet::from_rows(rows, labels).unwrap()
    }

    fn min_eigenvalue(g: &GramMatrix<f64>) -> f64 {
        let m = DMatrix::from_row_slice(g.n(), g.n(), g.data());
        m.symmetric_eigenvalues().min()
    }

    const KINDS: [KernelKind; 4] = [
        KernelKind::Linear,
        KernelKind::Polynomial { degree: 2 },
        KernelKind::Polynomial { degree: 3 },
        KernelKind::Gaussian { gamma: 0.7 },
    ];

    #[test]
    fn kernel_values() {
        let a = [0.3, -1.2, 2.0];
        assert_eq!(eval_kernel(KernelKind::Gaussian { gamma: 5.0 }, &a, &a).unwrap(), 1.0);
        assert_eq!(eval_kernel(KernelKind::Linear, &[0.0f64; 2], &[0.0; 2]).unwrap(), 0.0);
        let p = eval_kernel(KernelKind::Polynomial { degree: 2 }, &[1.0f64, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(p, 1.0);
        assert!(matches!(
            eval_kernel(KernelKind::Linear, &[1.0f64], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(KernelKind::Gaussian { gamma: 0.0 }.validate().is_err());
        assert!(KernelKind::Polynomial { degree: 0 }.validate().is_err());
    }

    #[test]
    fn small_grams() {
        let one = set(&[vec![0.5, 0.1]]);
        let g = gram(&KernelSpec::new(KernelKind::Gaussian { gamma: 1.0 }, "all"), &one).unwrap();
        assert_eq!(g.data(), &[1.0]);

        let ortho = set(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let g = gram(&KernelSpec::new(KernelKind::Linear, "all"), &ortho).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(matches!(
            gram(&KernelSpec::new(KernelKind::Linear, "color"), &ortho),
            Err(Error::MissingGroup(_))
        ));
    }

    #[test]
    fn random_grams_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let s = set(&rows);
        for kind in KINDS {
            let g = gram(&KernelSpec::new(kind, "all"), &s).unwrap();
            assert!(g.max_asymmetry() <= 1e-12);
            let tol = 1e-8 * g.trace() / 20.0;
            assert!(min_eigenvalue(&g) >= -tol, "{kind:?}");
            let ng = normalize_spherical(&g).unwrap();
            assert!(min_eigenvalue(&ng) >= -1e-8, "{kind:?} normalized");
        }
    }

    #[test]
    fn group_restriction() {
        let groups = vec![
            GroupSpan { name: "a".into(), range: 0..1 },
            GroupSpan { name: "b".into(), range: 1..3 },
        ];
        let s = SampleSet::new(3, vec![1.0, 0.0, 2.0, 3.0, 1.0, 1.0], vec![1, -1], groups).unwrap();
        let g = gram(&KernelSpec::new(KernelKind::Linear, "b"), &s).unwrap();
        assert_eq!(g.data(), &[4.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn spherical_normalization() {
        let g = gram(
            &KernelSpec::new(KernelKind::Gaussian { gamma: 0.3 }, "all"),
            &set(&[vec![0.0], vec![1.0], vec![3.0]]),
        )
        .unwrap();
        assert_eq!(normalize_spherical(&g).unwrap().data(), g.data());

        let lin = KernelSpec::new(KernelKind::Linear, "all");
        let g = gram(&lin, &set(&[vec![2.0, 0.0], vec![0.0, 3.0]])).unwrap();
        assert_eq!(normalize_spherical(&g).unwrap().get(0, 1), 0.0);
        let g = gram(&lin, &set(&[vec![1.0, 1.0], vec![2.0, 2.0]])).unwrap();
        assert!((normalize_spherical(&g).unwrap().get(0, 1) - 1.0).abs() < 1e-15);

        let g = gram(&lin, &set(&[vec![0.0, 0.0], vec![1.0, 2.0]])).unwrap();
        assert!(matches!(normalize_spherical(&g), Err(Error::ZeroDiagonal(0))));
    }

    #[test]
    fn median_gamma() {
        let s = set(&[vec![0.0, 0.0], vec![2.0, 0.0]]);
        assert_eq!(default_gamma(&s, "all").unwrap(), 0.25);
        // duplicates: zero distances are ignored
        let dup = set(&[vec![1.0], vec![1.0], vec![1.0], vec![4.0]]);
        assert_eq!(default_gamma(&dup, "all").unwrap(), 1.0 / 9.0);
        let flat = set(&[vec![1.0], vec![1.0]]);
        assert!(matches!(default_gamma(&flat, "all"), Err(Error::DegenerateDistances)));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * 4.0).collect()).collect();
        let g1 = default_gamma(&set(&rows), "all").unwrap();
        let g4 = default_gamma(&set(&scaled), "all").unwrap();
        assert!((g4 - g1 / 16.0).abs() < 1e-12 * g1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gram_invariants(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..9),
            k in 0usize..4,
            dup in 0usize..8,
        ) {
            let s = set(&rows);
            let spec = KernelSpec::new(KINDS[k], "all");
            let g = gram(&spec, &s).unwrap();
            prop_assert!(g.max_asymmetry() <= 1e-12);
            if let KernelKind::Gaussian { .. } = spec.kind {
                prop_assert!(g.data().iter().all(|&v| v > 0.0 && v <= 1.0));
            }
            if g.diagonal().iter().all(|&d| d > 0.0) {
                let once = normalize_spherical(&g).unwrap();
                let twice = normalize_spherical(&once).unwrap();
                for (a, b) in once.data().iter().zip(twice.data()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
            // duplicating a sample duplicates its row and column
            let i = dup % rows.len();
            let mut more = rows.clone();
            more.push(rows[i].clone());
            let g2 = gram(&spec, &set(&more)).unwrap();
            let n = rows.len();
            for j in 0..n {
                prop_assert_eq!(g2.get(n, j), g.get(i, j));
                prop_assert_eq!(g2.get(j, n), g.get(j, i));
            }
            prop_assert_eq!(g2.get(n, n), g.get(i, i));
        }
    }
}
