//! Learned saliency estimation: low, mid and high-level feature stacks,
//! kernel SVMs, multiple kernel learning, boosting and fixation-based
//! evaluation.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the usual
//! precisions.

pub mod boosting;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod fmap;
pub mod imgproc;
pub mod kernels;
mod linalg;
pub mod model;
pub mod mkl;
pub mod pipeline;
pub mod scalar;
pub mod svm;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Solver and kernel precision.
pub type Real = f64;
/// Feature storage precision.
pub type Storage = f32;

pub type Plane = imgproc::ImagePlane<Real>;
pub type Image = imgproc::ColorImage<Real>;
pub type Stack = features::FeatureStack<Storage>;
pub type Gram = kernels::GramMatrix<Real>;
pub type Samples = svm::SampleSet<Real>;
