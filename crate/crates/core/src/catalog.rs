//! Closed catalog of target functions, each shipping an analytic
//! continuity modulus so the cover construction never has to probe for
//! one. Coefficient vectors live over the ambient coordinates e_1..e_d.

use serde::{Deserialize, Serialize};

use crate::cover::ModulusOracle;
use crate::pipeline::{EpsMode, TargetOracle};
use crate::space::SparseVec;

/// How small the quadratic modulus is allowed to cap itself; also the
/// additive guard in its denominator.
const QUADRATIC_CAP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum CatalogFunction {
    Constant { value: f64 },
    /// x -> <a, x>.
    Linear { coeffs: Vec<f64> },
    /// x -> ||x - c||^2.
    Quadratic { center: Vec<f64> },
    /// x -> sin(<a, x>).
    Oscillatory { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum CatalogEps {
    Constant { value: f64 },
    /// eps(x) = base (1 + ||x||).
    LinearGrowth { base: f64 },
}

impl CatalogEps {
    pub fn mode(&self) -> EpsMode {
        match self {
            CatalogEps::Constant { value } => EpsMode::Constant(*value),
            CatalogEps::LinearGrowth { base } => {
                let b = *base;
                EpsMode::Variable(Box::new(move |x: &SparseVec| b * (1.0 + x.norm())))
            }
        }
    }

    fn at(&self, x: &SparseVec) -> f64 {
        match self {
            CatalogEps::Constant { value } => *value,
            CatalogEps::LinearGrowth { base } => base * (1.0 + x.norm()),
        }
    }

    /// Largest admissible alpha_x in the variable case: the budget may
    /// oscillate by at most half of itself within radius 2 alpha.
    fn alpha(&self, x: &SparseVec) -> f64 {
        match self {
            CatalogEps::Constant { .. } => f64::INFINITY,
            // eps is `base`-Lipschitz: base * 2 alpha <= eps(x)/2.
            CatalogEps::LinearGrowth { base } => base * (1.0 + x.norm()) / (4.0 * base),
        }
    }

    fn is_variable(&self) -> bool {
        matches!(self, CatalogEps::LinearGrowth { .. })
    }
}

impl CatalogFunction {
    pub fn evaluator(&self) -> Box<dyn Fn(&SparseVec) -> f64 + Send + Sync> {
        match self {
            CatalogFunction::Constant { value } => {
                let v = *value;
                Box::new(move |_| v)
            }
            CatalogFunction::Linear { coeffs } => {
                let a = SparseVec::from_dense(coeffs);
                Box::new(move |x| crate::space::dot(&a, x))
            }
            CatalogFunction::Quadratic { center } => {
                let c = SparseVec::from_dense(center);
                Box::new(move |x| x.sub(&c).norm_sq())
            }
            CatalogFunction::Oscillatory { coeffs } => {
                let a = SparseVec::from_dense(coeffs);
                Box::new(move |x| crate::space::dot(&a, x).sin())
            }
        }
    }

    /// Modulus delta_x honoring the mode's oscillation contract: the
    /// function moves at most eps(x)/4 (constant mode) or eps(x)/8
    /// (variable mode, the tighter budget the chained center estimates
    /// need) within radius 2 delta_x; variable mode additionally keeps
    /// delta_x at or below half of alpha_x.
    pub fn modulus(&self, eps: &CatalogEps) -> ModulusOracle {
        let divisor = if eps.is_variable() { 8.0 } else { 4.0 };
        let eps = eps.clone();
        match self {
            CatalogFunction::Constant { .. } => {
                ModulusOracle::new(move |x| (eps.alpha(x) / 2.0).min(1.0))
            }
            CatalogFunction::Linear { coeffs } | CatalogFunction::Oscillatory { coeffs } => {
                let lip: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
                ModulusOracle::new(move |x| {
                    let budget = eps.at(x) / divisor;
                    let base = if lip > 0.0 { budget / (2.0 * lip) } else { 1.0 };
                    base.min(eps.alpha(x) / 2.0).min(1e3)
                })
            }
            CatalogFunction::Quadratic { center } => {
                let c = SparseVec::from_dense(center);
                ModulusOracle::new(move |x| {
                    let budget = eps.at(x) / divisor;
                    let r = x.dist(&c);
                    (budget / (4.0 * (r + QUADRATIC_CAP)))
                        .min(QUADRATIC_CAP)
                        .min(eps.alpha(x) / 2.0)
                })
            }
        }
    }

    pub fn target(&self, eps: &CatalogEps) -> TargetOracle {
        TargetOracle {
            f: self.evaluator(),
            modulus: self.modulus(eps),
        }
    }
}
