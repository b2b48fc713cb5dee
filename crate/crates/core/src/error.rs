//! Engine error type. Every failure carries enough context to name the
//! construction stage that produced it.

use thiserror::Error;

use crate::space::SparseVec;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("cover budget exceeded: region not covered within {max_centers} centers; uncovered witness at {witness:?}")]
    CoverBudgetExceeded {
        max_centers: usize,
        witness: SparseVec,
    },

    #[error("degenerate affine frame: rank-deficient span where full rank is required")]
    DegenerateFrame,

    #[error("radius scan failed for ball {index}: no margin-respecting value in [{lo}, {hi}]")]
    RadiusScanFailed { index: usize, lo: f64, hi: f64 },

    #[error("sphere incidence check failed at ball {index}: intersection point within {distance:.3e} of the new sphere")]
    SphereIncidence { index: usize, distance: f64 },

    #[error("lambda not yet assigned for scalloped ball {index}")]
    LambdaUnassigned { index: usize },

    #[error("point outside the covered domain (denominator {denominator:.3e})")]
    OutsideDomain { denominator: f64 },

    #[error("critical point at {witness:?} violates cluster containment for every admissible mu")]
    ContainmentMiss { witness: SparseVec },

    #[error("isolating regions of clusters {a} and {b} overlap on a sampled point")]
    ClusterOverlap { a: usize, b: usize },

    #[error("gradient of the omega norm is undefined at the origin")]
    OmegaGradientAtZero,

    #[error("path parameter must be positive, got {t}")]
    PathTimeNonpositive { t: f64 },

    #[error("radial push inversion failed to converge after {iterations} iterations (residual {residual:.3e})")]
    PushInversionFailed { iterations: usize, residual: f64 },

    #[error("perturbation inverse failed to converge after {iterations} iterations (last increment {increment:.3e})")]
    PerturbationInverseFailed { iterations: usize, increment: f64 },

    #[error("input lies inside the compact-net inflation where the perturbation map is undefined")]
    InsideNetInflation,

    #[error("rank-one denominator {value:.3e} too close to zero (numerical pathology)")]
    SingularRankOne { value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("negative profile argument {t}")]
    NegativeProfileArgument { t: f64 },

    #[error("compact nets are not separated (gap {gap:.3e})")]
    NetsNotSeparated { gap: f64 },

    #[error("region does not meet the open set")]
    EmptyRegionIntersection,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<EngineError>,
    },
}

impl EngineError {
    /// Wrap an error with the name of the construction stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Self {
        EngineError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The outermost stage label, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            EngineError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
