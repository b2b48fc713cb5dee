//! The deleting path: zero for t >= delta, and as t drops to zero it
//! climbs the W-ladder through waypoints of exploding norm but vanishing
//! omega-size, all at omega-speed below one half.
//!
//! Layout: an anchor coordinate at ladder position j0 ramps in on
//! [delta/2, delta] and then stays at coefficient one, guaranteeing a
//! uniform omega-clearance of 2^-j0 from anything supported off the deep
//! ladder. On each dyadic window [delta/2^(m+1), delta/2^m] the tail moves
//! between waypoints 2^m z at ladder position j0 + 2m; skipping two rungs
//! per step halves each segment's omega-length in lockstep with its
//! duration, which is what keeps the speed uniform.

use crate::config::EngineConfig;
use crate::error::{EngineError, Result};
use crate::smooth::{transition_eval, Transition};
use crate::space::SparseVec;

use super::omega::OmegaSplit;

#[derive(Debug, Clone)]
pub struct DeletingPath {
    pub delta: f64,
    /// Base ladder position (1-based); omega-weight 2^-j0.
    pub base_index: usize,
    /// Deepest materialized dyadic segment; the path saturates below the
    /// matching time floor.
    pub max_segments: usize,
}

impl DeletingPath {
    pub fn new(delta: f64, cfg: &EngineConfig) -> Self {
        assert!(delta > 0.0);
        // Speed budget: anchor ramp moves at 4 * 2^-j0 / delta, tail
        // segments at 4 sqrt(5) * 2^-j0 / delta; 2^-j0 <= delta / (9
        // sqrt(5)) caps both at 4/9 < 1/2.
        let j0 = ((9.0 * 5f64.sqrt() / delta).log2().ceil().max(1.0)) as usize;
        DeletingPath {
            delta,
            base_index: j0,
            max_segments: cfg.path_max_segments,
        }
    }

    /// Ladder positions used: j0 for the anchor, j0 + 2m for tail
    /// waypoint m.
    pub fn ladder_span(&self) -> usize {
        self.base_index + 2 * self.max_segments
    }

    /// Uniform lower bound on the omega-clearance of p((0, delta/2]) from
    /// any point supported off ladder position j0.
    pub fn clearance(&self) -> f64 {
        0.5f64.powi(self.base_index as i32)
    }

    fn waypoint(&self, split: &OmegaSplit, m: usize) -> SparseVec {
        if m == 0 {
            return SparseVec::zero();
        }
        let idx = split.ladder_index(self.base_index + 2 * m);
        SparseVec::unit(idx).scale(2f64.powi(m as i32))
    }

    /// Point and velocity at t > 0.
    pub fn eval(&self, split: &OmegaSplit, t: f64) -> Result<(SparseVec, SparseVec)> {
        if t <= 0.0 {
            return Err(EngineError::PathTimeNonpositive { t });
        }
        let delta = self.delta;
        if t >= delta {
            return Ok((SparseVec::zero(), SparseVec::zero()));
        }
        let anchor = SparseVec::unit(split.ladder_index(self.base_index));
        // Anchor envelope: 1 for t <= delta/2, 0 at delta, falling between.
        let (a, da) = transition_eval(Transition::new(delta / 2.0, delta), t, false);
        let mut point = anchor.scale(a);
        let mut velocity = anchor.scale(da);
        if t < delta / 2.0 {
            // Dyadic window index: t in [delta/2^(m+1), delta/2^m).
            let mut m = (delta / t).log2().floor() as usize;
            while t < delta / 2f64.powi(m as i32 + 1) {
                m += 1;
            }
            while t >= delta / 2f64.powi(m as i32) {
                m -= 1;
            }
            if m > self.max_segments {
                // Saturated: hold the deepest waypoint.
                point = point.add(&self.waypoint(split, self.max_segments));
            } else if m >= 1 {
                let left = delta / 2f64.powi(m as i32 + 1);
                let right = delta / 2f64.powi(m as i32);
                let (b, db) = transition_eval(Transition::new(left, right), t, false);
                let w_prev = self.waypoint(split, m - 1);
                let step = self.waypoint(split, m).sub(&w_prev);
                point = point.add(&w_prev).add_scaled(&step, b);
                velocity = velocity.add_scaled(&step, db);
            }
        }
        Ok((point, velocity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{affine_frame, AffineFrame};
    use rand::Rng;

    fn setup(delta: f64) -> (OmegaSplit, DeletingPath) {
        let cfg = EngineConfig::default();
        let path = DeletingPath::new(delta, &cfg);
        let frame: AffineFrame = affine_frame(&[SparseVec::zero()], 1e-10).frame;
        let split = OmegaSplit {
            y_frame: frame,
            w_indices: (1000..1000 + path.ladder_span() as u32 + 4).collect(),
        };
        (split, path)
    }

    #[test]
    fn zero_exactly_from_delta_on() {
        let (split, path) = setup(0.3);
        for t in [0.3, 0.45, 0.6, 5.0] {
            let (p, v) = path.eval(&split, t).unwrap();
            assert!(p.is_zero());
            assert!(v.is_zero());
        }
        for t in [0.29, 0.1, 0.01, 1e-6] {
            let (p, _) = path.eval(&split, t).unwrap();
            assert!(!p.is_zero(), "path vanished at t={t}");
        }
        assert!(path.eval(&split, 0.0).is_err());
        assert!(path.eval(&split, -1.0).is_err());
    }

    #[test]
    fn omega_lipschitz_one_half_on_sampled_pairs() {
        let (split, path) = setup(0.5);
        let mut rng = crate::sampling::rng_from_seed(4);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(1e-4..0.7);
            let b: f64 = rng.gen_range(1e-4..0.7);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (p_lo, _) = path.eval(&split, lo).unwrap();
            let (p_hi, _) = path.eval(&split, hi).unwrap();
            let d = split.omega_value(&p_lo.sub(&p_hi));
            assert!(
                d <= 0.5 * (hi - lo) + 1e-12,
                "omega increment {d} over dt {}",
                hi - lo
            );
        }
    }

    #[test]
    fn velocity_matches_finite_differences() {
        let (split, path) = setup(0.5);
        let h = 1e-7;
        for t in [0.4, 0.26, 0.2, 0.13, 0.07, 0.03] {
            let (_, v) = path.eval(&split, t).unwrap();
            let (pp, _) = path.eval(&split, t + h).unwrap();
            let (pm, _) = path.eval(&split, t - h).unwrap();
            let fd = pp.sub(&pm).scale(1.0 / (2.0 * h));
            assert!(
                fd.sub(&v).norm() <= 1e-5 * (1.0 + v.norm()),
                "velocity mismatch at t={t}"
            );
        }
    }

    #[test]
    fn clearance_from_shallow_nets() {
        let (split, path) = setup(0.4);
        // Points supported on ambient coordinates and the first ladder
        // rung below j0 (nothing at or past j0).
        let blockers = vec![
            SparseVec::zero(),
            SparseVec::from_dense(&[5.0, -2.0]),
            SparseVec::unit(split.w_indices[0]),
        ];
        let t0 = path.delta / 2.0;
        let mut rng = crate::sampling::rng_from_seed(21);
        for _ in 0..500 {
            let t: f64 = rng.gen_range(1e-6..t0);
            let (p, _) = path.eval(&split, t).unwrap();
            for z in &blockers {
                let d = split.omega_value(&p.sub(z));
                assert!(
                    d >= path.clearance() / 2.0,
                    "clearance {d} below {} at t={t}",
                    path.clearance() / 2.0
                );
            }
        }
    }

    #[test]
    fn norm_escapes_while_omega_stays_bounded() {
        let (split, path) = setup(0.5);
        let mut last_norm = 0.0;
        for k in 1..=20 {
            let t = path.delta / 2f64.powi(k + 1) * 1.5;
            let (p, _) = path.eval(&split, t).unwrap();
            assert!(split.omega_value(&p) <= 2.0 * path.clearance() + 1.0);
            let n = p.norm();
            assert!(n >= last_norm * 0.99);
            last_norm = n;
        }
        assert!(last_norm > 1e4, "norm should blow up, got {last_norm}");
    }
}
