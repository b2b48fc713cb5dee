//! Engine for uniform smooth approximation without critical points on a
//! finite-support model of separable Hilbert space.
//!
//! The pipeline covers a bounded region with balls, blends local constants
//! through a perturbed partition of unity supported on scalloped balls,
//! isolates the critical clusters of the partial sums in disjoint open
//! regions, and composes with diffeomorphisms that extract each cluster
//! while restricting to the identity outside its region. Every stage is
//! evaluable with first-order jets and checked by sampling.

pub mod catalog;
pub mod config;
pub mod cover;
pub mod error;
pub mod linalg;
pub mod negligibility;
pub mod pipeline;
pub mod pou;
pub mod sampling;
pub mod smooth;
pub mod space;

pub use config::EngineConfig;
pub use error::{EngineError, Result};
pub use smooth::{Jet, Transition};
pub use space::{dot, AffineFrame, Ball, IndexAllocator, SparseVec};
