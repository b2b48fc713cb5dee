//! Engine-level configuration. All tolerances and resolution knobs live
//! here with their defaults; nothing numeric is hidden inside the
//! algorithms.

use serde::{Deserialize, Serialize};

/// Tolerances and resolution knobs for the whole engine.
///
/// Construction and verification read everything from one value of this
/// struct, so a run is reproducible from (config, seed) alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Orthonormality slack accepted in affine frames.
    pub frame_ortho_tol: f64,
    /// Gram-Schmidt directions below this norm are dropped as dependent.
    pub frame_drop_tol: f64,

    /// Hard cap on cover size; the CLI maps NOCRIT_MAX_CENTERS onto this.
    pub max_centers: usize,
    /// Deterministic sample count used for coverage and containment checks
    /// during construction.
    pub build_samples: usize,
    /// Seed for construction-time sampling (coverage checks, cluster
    /// disjointness checks). Verification has its own seed.
    pub build_seed: u64,

    /// Number of radius candidates per ball in the perturbation scan.
    pub radius_scan_k: usize,
    /// Margin factor: a candidate radius must keep `gap * (interval length)`
    /// clear of every forbidden value.
    pub radius_scan_gap: f64,
    /// Minimum admissible distance between an intersection point and a
    /// sphere it must avoid.
    pub sphere_margin: f64,
    /// Largest sphere-subset size enumerated when building the forbidden
    /// set and when re-verifying incidences.
    pub sphere_subset_cap: usize,

    /// Grid points per frame dimension used to seed Newton root finding.
    pub roots_grid_per_dim: usize,
    /// Total seed budget for one root-finding call; the per-dimension grid
    /// count shrinks in high-dimensional frames so the product stays below
    /// this.
    pub roots_seed_budget: usize,
    /// Newton convergence tolerance on frame coordinates.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Converged roots closer than this are merged.
    pub root_cluster_tol: f64,
    /// A root is accepted only if the full-space gradient norm is below this.
    pub root_gradient_tol: f64,

    /// Quotient evaluation rejects denominators at or below this.
    pub denominator_floor: f64,

    /// Decay rate of the bump profiles a_n.
    pub profile_rate: f64,

    /// Whitney function: Lipschitz slack target kappa.
    pub whitney_kappa: f64,
    /// Whitney soft-min temperature as a fraction of eps / ln(net size);
    /// it both caps the Lipschitz slack and keeps the zero zone of the
    /// Whitney function well inside the deleting path's escape clearance.
    pub whitney_temp_factor: f64,

    /// Deepest dyadic path segment materialized; below the matching time
    /// floor the path saturates.
    pub path_max_segments: usize,

    /// Relative tolerance of the radial-push ray inversion.
    pub push_inverse_tol: f64,
    pub push_inverse_max_iter: usize,
    /// Omega-increment threshold for the perturbation fixed-point inverse.
    pub perturbation_inverse_tol: f64,
    pub perturbation_inverse_max_iter: usize,
    /// Guard for the Sherman-Morrison rank-one denominator.
    pub rank_one_floor: f64,

    /// Finite-difference step used by the built-in gradient checks.
    pub fd_step: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            frame_ortho_tol: 1e-12,
            frame_drop_tol: 1e-10,
            max_centers: 32,
            build_samples: 10_000,
            build_seed: 0x5eed_c0de,
            radius_scan_k: 1000,
            radius_scan_gap: 1e-3,
            sphere_margin: 1e-9,
            sphere_subset_cap: 8,
            roots_grid_per_dim: 25,
            roots_seed_budget: 20_000,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            root_cluster_tol: 1e-6,
            root_gradient_tol: 1e-8,
            denominator_floor: 1e-12,
            profile_rate: 1.0,
            whitney_kappa: 0.05,
            whitney_temp_factor: 0.004,
            path_max_segments: 60,
            push_inverse_tol: 1e-12,
            push_inverse_max_iter: 200,
            perturbation_inverse_tol: 1e-12,
            perturbation_inverse_max_iter: 200,
            rank_one_floor: 1e-12,
            fd_step: 1e-5,
        }
    }
}
