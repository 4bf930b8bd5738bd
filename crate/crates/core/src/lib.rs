//! Construction and numerical verification of high-dimensional gene
//! regulatory network models that are multistability-equivalent to a given
//! low-dimensional model.
//!
//! The numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI and the
//! fixtures use.

pub mod analysis;
pub mod construction;
pub mod continuation;
pub mod dynamics;
pub mod fixture;
pub mod frequency;
pub mod linalg;
pub mod model_io;
pub mod sampling;
pub mod scalar;
pub mod structure;
pub mod system;

pub use linalg::{eigenvalues, LinalgError, Matrix};
pub use model_io::{load_model, parse_expression, save_model, Expr, ModelSpec};
pub use scalar::{Cplx, Real};
pub use structure::{check_modular_structure, check_sign_consistency, ModuleAssignment, SignMatrix};
pub use system::{GrnSystem, Parametric};

/// Compiled low-dimensional model in double precision.
pub type LowDimModel = model_io::ExprModel<f64>;
/// Constructed model in double precision.
pub type HighDimModel = construction::HighDimModel<f64>;
pub type SteadyState = analysis::SteadyState<f64>;
pub type NyquistCurve = frequency::NyquistCurve<f64>;
pub type LoopbrokenSystem = frequency::LoopbrokenSystem<f64>;
pub type GainTable = construction::GainTable<f64>;
