//! The radial push F: splitting each point over the base point into its
//! Y-frame part and the orthogonal rest z, it rescales z along its ray by
//! g(x) ||z|| / omega_Z(z) + 1 - g(x). Inside the covering balls g = 0 and
//! F is the identity; outside the doubled balls g = 1 and F carries the
//! ambient distances to the centers onto omega-distances.

use crate::config::EngineConfig;
use crate::error::{EngineError, Result};
use crate::smooth::{transition_eval, Jet, Transition};
use crate::space::{dot, SparseVec};

use super::omega::OmegaSplit;
use super::whitney::CompactNet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone)]
pub struct RadialPush {
    pub split: OmegaSplit,
    /// Cover centers x_i (a coarsening of the compact net).
    pub centers: Vec<SparseVec>,
    pub radii: Vec<f64>,
    /// Rising transitions with zero region (-inf, r_i] and one region
    /// [2 r_i, +inf), fed the plain distance to x_i.
    pub transitions: Vec<Transition>,
}

impl RadialPush {
    /// Cover the net by balls of the given radius centered on a greedy
    /// coarsening of its points. The caller guarantees that the doubled
    /// balls stay inside its open region.
    pub fn build(net: &CompactNet, radius: f64, split: OmegaSplit) -> Self {
        assert!(radius > 0.0);
        let mut centers: Vec<SparseVec> = Vec::new();
        for p in &net.points {
            if centers.iter().all(|c| c.dist(p) > radius / 2.0) {
                centers.push(p.clone());
            }
        }
        let radii = vec![radius; centers.len()];
        let transitions = radii
            .iter()
            .map(|&r| Transition::new(r, 2.0 * r))
            .collect();
        RadialPush {
            split,
            centers,
            radii,
            transitions,
        }
    }

    fn origin(&self) -> &SparseVec {
        &self.split.y_frame.origin
    }

    /// g(x) = product of theta_i(||x - x_i||), with gradient.
    pub fn g_jet(&self, x: &SparseVec) -> Jet {
        let mut vals = Vec::with_capacity(self.centers.len());
        let mut ders = Vec::with_capacity(self.centers.len());
        let mut diffs = Vec::with_capacity(self.centers.len());
        for (c, tr) in self.centers.iter().zip(&self.transitions) {
            let diff = x.sub(c);
            let d = diff.norm();
            let (v, dv) = transition_eval(*tr, d, true);
            vals.push(v);
            ders.push(dv);
            diffs.push((diff, d));
        }
        let value: f64 = vals.iter().product();
        let mut gradient = SparseVec::zero();
        for i in 0..vals.len() {
            if ders[i] == 0.0 {
                continue;
            }
            let others: f64 = vals
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product();
            if others == 0.0 {
                continue;
            }
            let (diff, d) = &diffs[i];
            // theta_i is flat below r_i, so d > 0 whenever ders[i] != 0.
            gradient = gradient.add_scaled(diff, ders[i] * others / d);
        }
        Jet { value, gradient }
    }

    /// Split x - origin into the Y part and the orthogonal rest.
    fn split_point(&self, x: &SparseVec) -> (SparseVec, SparseVec) {
        let v = x.sub(self.origin());
        let y = self.split.y_frame.project_vector(&v);
        let z = v.sub(&y);
        (y, z)
    }

    pub fn forward(&self, x: &SparseVec) -> SparseVec {
        let (y, z) = self.split_point(x);
        if z.is_zero() {
            return x.clone();
        }
        let omega_z = self.split.omega_value(&z);
        let g = self.g_jet(x).value;
        let scale = g * (z.norm() / omega_z - 1.0) + 1.0;
        self.origin().add(&y).add_scaled(&z, scale)
    }

    /// Invert along the ray of the z part: the radial factor is monotone,
    /// so bracketed bisection with Newton polishing converges.
    pub fn inverse(&self, target: &SparseVec, cfg: &EngineConfig) -> Result<SparseVec> {
        let (y, z_star) = self.split_point(target);
        if z_star.is_zero() {
            return Ok(target.clone());
        }
        let s_star = z_star.norm();
        let zhat = z_star.scale(1.0 / s_star);
        let rho = 1.0 / self.split.omega_value(&zhat); // = |zhat| / omega(zhat) >= 1
        let base = self.origin().add(&y);
        let m_of = |s: f64| -> (f64, f64) {
            let x = base.add_scaled(&zhat, s);
            let g = self.g_jet(&x);
            let lambda = 1.0 + g.value * (rho - 1.0);
            let dg_ds = dot(&g.gradient, &zhat);
            (s * lambda, lambda + s * (rho - 1.0) * dg_ds)
        };
        let (mut lo, mut hi) = (s_star / rho, s_star);
        let mut s = 0.5 * (lo + hi);
        let tol = cfg.push_inverse_tol * s_star;
        let mut residual = f64::INFINITY;
        for iter in 0..cfg.push_inverse_max_iter {
            let (m, dm) = m_of(s);
            residual = m - s_star;
            if residual.abs() <= tol {
                return Ok(base.add_scaled(&zhat, s));
            }
            if residual > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            // Newton step when it stays inside the bracket, else bisect.
            let newton = s - residual / dm;
            s = if dm > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= tol.min(f64::EPSILON * s_star) && iter > 8 {
                return Ok(base.add_scaled(&zhat, s));
            }
        }
        Err(EngineError::PushInversionFailed {
            iterations: cfg.push_inverse_max_iter,
            residual: residual.abs(),
        })
    }

    /// Everything the derivative of F at x needs.
    fn derivative_parts(&self, x: &SparseVec) -> PushDerivative {
        let (y, z) = self.split_point(x);
        let _ = y;
        if z.is_zero() {
            return PushDerivative {
                scale: 1.0,
                z: SparseVec::zero(),
                coeff: SparseVec::zero(),
            };
        }
        let omega_z = self.split.omega_value(&z);
        let norm_z = z.norm();
        let rho = norm_z / omega_z;
        let g = self.g_jet(x);
        let scale = g.value * (rho - 1.0) + 1.0;
        // omega gradient numerator: every coordinate scaled by its squared
        // ladder weight.
        let z_omega = SparseVec::from_pairs(z.iter().map(|(idx, c)| {
            let w = self.split.coordinate_weight(idx);
            (idx, c * w * w)
        }));
        // d scale [h] = <coeff, h> with coeff below; the z and z_omega
        // pairings only see the non-Y part of h, but both vectors are
        // already orthogonal to Y so the plain inner product agrees.
        let coeff = g
            .gradient
            .scale(rho - 1.0)
            .add_scaled(&z, g.value / (norm_z * omega_z))
            .add_scaled(&z_omega, -g.value * norm_z / (omega_z * omega_z * omega_z));
        PushDerivative { scale, z, coeff }
    }

    /// DF(x)[h] = P_Y h + scale (h - P_Y h) + <coeff, h> z.
    pub fn jacobian_action(&self, x: &SparseVec, h: &SparseVec) -> SparseVec {
        let parts = self.derivative_parts(x);
        if parts.z.is_zero() {
            return h.clone();
        }
        let py = self.split.y_frame.project_vector(h);
        h.scale(parts.scale)
            .add_scaled(&py, 1.0 - parts.scale)
            .add_scaled(&parts.z, dot(&parts.coeff, h))
    }

    /// Adjoint of DF(x).
    pub fn jacobian_adjoint(&self, x: &SparseVec, u: &SparseVec) -> SparseVec {
        let parts = self.derivative_parts(x);
        if parts.z.is_zero() {
            return u.clone();
        }
        let py = self.split.y_frame.project_vector(u);
        u.scale(parts.scale)
            .add_scaled(&py, 1.0 - parts.scale)
            .add_scaled(&parts.coeff, dot(&parts.z, u))
    }

    /// Action of DF(x)^{-1}, solved in closed form (the derivative is a
    /// scaled identity plus a Y-projection correction plus a rank-one
    /// update along z).
    pub fn jacobian_inverse_action(
        &self,
        x: &SparseVec,
        u: &SparseVec,
        cfg: &EngineConfig,
    ) -> Result<SparseVec> {
        let parts = self.derivative_parts(x);
        if parts.z.is_zero() {
            return Ok(u.clone());
        }
        let denom = parts.scale + dot(&parts.coeff, &parts.z);
        if denom.abs() < cfg.rank_one_floor {
            return Err(EngineError::SingularRankOne { value: denom });
        }
        let py_u = self.split.y_frame.project_vector(u);
        let py_c = self.split.y_frame.project_vector(&parts.coeff);
        let c_tilde = parts.coeff.add_scaled(&py_c, parts.scale - 1.0);
        let gamma = dot(&c_tilde, u) / denom;
        Ok(u
            .add_scaled(&py_u, parts.scale - 1.0)
            .add_scaled(&parts.z, -gamma)
            .scale(1.0 / parts.scale))
    }

    /// Adjoint of DF(x)^{-1}.
    pub fn jacobian_inverse_adjoint(
        &self,
        x: &SparseVec,
        w: &SparseVec,
        cfg: &EngineConfig,
    ) -> Result<SparseVec> {
        let parts = self.derivative_parts(x);
        if parts.z.is_zero() {
            return Ok(w.clone());
        }
        let denom = parts.scale + dot(&parts.coeff, &parts.z);
        if denom.abs() < cfg.rank_one_floor {
            return Err(EngineError::SingularRankOne { value: denom });
        }
        let py_w = self.split.y_frame.project_vector(w);
        let py_c = self.split.y_frame.project_vector(&parts.coeff);
        let c_tilde = parts.coeff.add_scaled(&py_c, parts.scale - 1.0);
        let zw = dot(&parts.z, w);
        Ok(w
            .add_scaled(&py_w, parts.scale - 1.0)
            .add_scaled(&c_tilde, -zw / denom)
            .scale(1.0 / parts.scale))
    }
}

struct PushDerivative {
    scale: f64,
    z: SparseVec,
    coeff: SparseVec,
}
