//! Contraction certificates for monotone ODE systems.
//!
//! Samples the Jacobian of a model over a box, searches for diagonal weights
//! that make it contractive (or nonexpansive with strict decrease at an
//! equilibrium) in a weighted ℓ1 or ℓ∞ norm, turns the weights into
//! separable Lyapunov functions, and checks the predictions by simulation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

// `!(x > 0)` is used on purpose so that NaN fails the check; index loops read
// closer to the formulas than iterator chains in the matrix code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod lyapunov;
pub mod measures;
pub mod models;
pub mod norm;
pub mod scalar;
pub mod simulate;
pub mod system;

pub use certify::{CertKind, Status, WeightCertificate};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use lyapunov::{LyapunovForm, LyapunovFunction};
pub use models::ModelSpec;
pub use norm::{partial_order_leq, NormKind, WeightedNorm};
pub use scalar::Scalar;
pub use system::{Bounds, DomainBox, Dynamics, SystemModel, Trajectory};

/// `f64` instantiations of the generic types.
pub type Mat = Matrix<f64>;
pub type Model = SystemModel<f64>;
pub type Norm = WeightedNorm<f64>;
pub type Certificate = WeightCertificate<f64>;
pub type Lyapunov = LyapunovFunction<f64>;
pub type Traj = Trajectory<f64>;
