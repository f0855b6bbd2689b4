//! Finite section method for infinite linear systems `Ax = b` over `Z^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`weights`]: weight families on `Z^d`, weighted `l^p` norms, the tail
//!   functional `phi(n)` and finite-radius probes of weight properties.
//! * [`models`]: infinite matrices as entry oracles with certified decay
//!   envelopes, and their dense square/rectangular sections.
//! * [`algebra`]: the four off-diagonal decay norms and the structural checks
//!   (translation invariance, solidity, block equivalence).
//! * [`sections`]: dense LU kernel, section inverses, extensions and spectral
//!   bounds.
//! * [`solver`]: the symmetric and the non-symmetric (normal equation)
//!   finite section pipelines.
//! * [`diagnostics`]: convergence studies, rate fitting and uniform bound
//!   traces.

pub mod algebra;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod models;
pub mod sections;
pub mod serde_num;
pub mod solver;
pub mod weights;

pub use error::{FsmError, Result};
pub use models::{FiniteSection, MatrixModel, RectSection};
pub use weights::{NormKind, SpaceSpec, SparseVector, WeightSpec};

/// Complex scalar used for all matrix entries and vector values.
pub type C64 = num_complex::Complex<f64>;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
