//! Multiple kernel learning: fixed product rule, learned polynomial weights and
//! data-dependent softmax gating.

mod lmkl;
mod nlmkl;

pub use lmkl::{lmkl_combine, lmkl_gradient, lmkl_objective, lmkl_train, Gating, GATING_LIMIT};
pub use nlmkl::{nlmkl_combine, nlmkl_gradient, nlmkl_objective, nlmkl_train, project_eta};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{gram, normalize_spherical, GramMatrix, KernelSpec};
use crate::scalar::Scalar;
use crate::svm::{smo_solve, SampleSet, SmoOptions, SvmModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MklOptions {
    pub smo: SmoOptions,
    /// Polynomial degree of the learned combination.
    pub degree: u32,
    /// Norm bound on the combination weights.
    pub lambda: f64,
    pub max_outer: usize,
    /// Stop once the parameter change drops below this.
    pub param_tol: f64,
    /// Initial step on the normalized gradient.
    pub step: f64,
}

impl Default for MklOptions {
    fn default() -> Self {
        Self {
            smo: SmoOptions::default(),
            degree: 2,
            lambda: 1.0,
            max_outer: 50,
            param_tol: 1e-4,
            step: 0.1,
        }
    }
}

/// Spherically normalized Gram matrices over one common sample set.
#[derive(Clone, Debug)]
pub struct KernelBank<T> {
    grams: Vec<GramMatrix<T>>,
    names: Vec<String>,
}

impl<T: Scalar> KernelBank<T> {
    pub fn new(grams: Vec<GramMatrix<T>>, names: Vec<String>) -> Result<Self> {
        let Some(first) = grams.first() else {
            return Err(Error::InvalidArgument("empty kernel bank".into()));
        };
        let n = first.n();
        if let Some(g) = grams.iter().find(|g| g.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: g.n(),
            });
        }
        if names.len() != grams.len() {
            return Err(Error::DimensionMismatch {
                expected: grams.len(),
                actual: names.len(),
            });
        }
        Ok(Self { grams, names })
    }

    /// One normalized Gram per spec.
    pub fn build(samples: &SampleSet<T>, specs: &[KernelSpec]) -> Result<Self> {
        let grams = specs
            .iter()
            .map(|s| normalize_spherical(&gram(s, samples)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grams, specs.iter().map(|s| s.group.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn n(&self) -> usize {
        self.grams[0].n()
    }

    pub fn grams(&self) -> &[GramMatrix<T>] {
        &self.grams
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            grams: self.grams.iter().map(|g| g.submatrix(idx)).collect(),
            names: self.names.clone(),
        }
    }
}

/// Elementwise product of every matrix in the bank.
pub fn rbmkl_combine<T: Scalar>(bank: &KernelBank<T>) -> GramMatrix<T> {
    let grams = bank.grams();
    if grams.len() == 1 {
        let mut g = grams[0].clone();
        g.spec = None;
        return g;
    }
    GramMatrix::from_fn(bank.n(), |i, j| {
        grams.iter().fold(T::one(), |acc, g| acc * g.get(i, j))
    })
}

pub fn rbmkl_train<T: Scalar>(bank: &KernelBank<T>, y: &[i8], opts: &SmoOptions) -> Result<MklModel> {
    let svm = smo_solve(&rbmkl_combine(bank), y, opts, None)?;
    Ok(MklModel {
        params: MklParams::Rbmkl,
        history: vec![svm.objective],
        svm,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum MklParams {
    Rbmkl,
    Nlmkl {
        eta: Vec<f64>,
        degree: u32,
    },
    Lmkl {
        gating: Gating,
        /// Gating weights at each support vector, row-major `support x P`.
        support_eta: Vec<f64>,
    },
}

impl MklParams {
    pub fn tag(&self) -> u8 {
        match self {
            MklParams::Rbmkl => 1,
            MklParams::Nlmkl { .. } => 2,
            MklParams::Lmkl { .. } => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MklParams::Rbmkl => "rbmkl",
            MklParams::Nlmkl { .. } => "nlmkl",
            MklParams::Lmkl { .. } => "lmkl",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MklModel {
    pub params: MklParams,
    pub svm: SvmModel,
    /// Dual objective after each outer iteration.
    pub history: Vec<f64>,
}

/// Combined kernel value from per-kernel values `k[m]` between a query with
/// gating `query_eta` and support vector `s`.
#[inline]
fn combine_value(params: &MklParams, k: impl Iterator<Item = f64>, s: usize, query_eta: Option<&[f64]>) -> f64 {
    match params {
        MklParams::Rbmkl => k.fold(1.0, |acc, v| acc * v),
        MklParams::Nlmkl { eta, degree } => k.zip(eta).map(|(v, e)| v * e).sum::<f64>().powi(*degree as i32),
        MklParams::Lmkl { support_eta, .. } => {
            let q = query_eta.expect("query gating");
            let p = q.len();
            k.enumerate().map(|(m, v)| q[m] * v * support_eta[s * p + m]).sum()
        }
    }
}

impl MklModel {
    pub fn kernel_count(&self) -> Option<usize> {
        match &self.params {
            MklParams::Rbmkl => None,
            MklParams::Nlmkl { eta, .. } => Some(eta.len()),
            MklParams::Lmkl { gating, .. } => Some(gating.kernels()),
        }
    }

    fn query_eta(&self, gating_rep: Option<&[f64]>) -> Result<Option<Vec<f64>>> {
        match &self.params {
            MklParams::Lmkl { gating, .. } => {
                let x = gating_rep.ok_or(Error::MissingGating)?;
                Ok(Some(gating.eta(x)?))
            }
            _ => Ok(None),
        }
    }
}

/// Decision value at one query. `rows[m][s]` is the normalized kernel `m`
/// between the query and support vector `s`.
pub fn mkl_decision(model: &MklModel, rows: &[Vec<f64>], gating_rep: Option<&[f64]>) -> Result<f64> {
    let ns = model.svm.support.len();
    if let Some(p) = model.kernel_count() {
        if rows.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: rows.len(),
            });
        }
    }
    if let Some(r) = rows.iter().find(|r| r.len() != ns) {
        return Err(Error::DimensionMismatch {
            expected: ns,
            actual: r.len(),
        });
    }
    let q = model.query_eta(gating_rep)?;
    if rows.len() == 1 && matches!(model.params, MklParams::Rbmkl) {
        return model.svm.decision(&rows[0]);
    }
    let k: Vec<f64> = (0..ns)
        .map(|s| combine_value(&model.params, rows.iter().map(|r| r[s]), s, q.as_deref()))
        .collect();
    model.svm.decision(&k)
}

/// Per-kernel cross values for a batch: `kernels[m]` is row-major
/// `queries x support`.
#[derive(Clone, Debug)]
pub struct CrossKernels {
    pub queries: usize,
    pub kernels: Vec<Vec<f64>>,
}

/// Decisions for every query in `cross`. `gating` is row-major
/// `queries x D_g` when the model gates.
pub fn mkl_decision_batch(model: &MklModel, cross: &CrossKernels, gating: Option<&[f64]>) -> Result<Vec<f64>> {
    let ns = model.svm.support.len();
    let nq = cross.queries;
    if let Some(k) = cross.kernels.iter().find(|k| k.len() != nq * ns) {
        return Err(Error::DimensionMismatch {
            expected: nq * ns,
            actual: k.len(),
        });
    }
    let dg = match (&model.params, gating) {
        (MklParams::Lmkl { gating: gp, .. }, Some(g)) => {
            if g.len() != nq * gp.dim() {
                return Err(Error::DimensionMismatch {
                    expected: nq * gp.dim(),
                    actual: g.len(),
                });
            }
            gp.dim()
        }
        (MklParams::Lmkl { .. }, None) => return Err(Error::MissingGating),
        _ => 0,
    };
    (0..nq)
        .into_par_iter()
        .map(|q| {
            let rows: Vec<Vec<f64>> = cross.kernels.iter().map(|k| k[q * ns..(q + 1) * ns].to_vec()).collect();
            let g = gating.map(|g| &g[q * dg..(q + 1) * dg]);
            mkl_decision(model, &rows, g)
        })
        .collect()
}
