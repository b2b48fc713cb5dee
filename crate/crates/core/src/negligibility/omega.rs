//! The noncomplete norm omega: the ambient norm with the chosen W-ladder
//! coordinates downweighted geometrically. Its unit ball contains no rays
//! yet is unbounded, which is what lets the deleting path escape to
//! norm-infinity at finite omega-cost.

use crate::error::{EngineError, Result};
use crate::smooth::Jet;
use crate::space::{AffineFrame, SparseVec};

/// Splits the space into the finite-dimensional Y (frame), the weighted
/// ladder W (fresh coordinate indices, slot k weighs 2^-(k+1)), and the
/// orthogonal rest V. The frame origin is the base point of the compact
/// set; omega itself is a norm on difference vectors and never sees it.
#[derive(Debug, Clone)]
pub struct OmegaSplit {
    pub y_frame: AffineFrame,
    pub w_indices: Vec<u32>,
}

impl OmegaSplit {
    /// Weight of ladder slot (0-based): slot 0 carries 1/2.
    pub fn ladder_weight(slot: usize) -> f64 {
        0.5f64.powi(slot as i32 + 1)
    }

    /// Coordinate index of a 1-based ladder position.
    pub fn ladder_index(&self, position: usize) -> u32 {
        assert!(position >= 1 && position <= self.w_indices.len());
        self.w_indices[position - 1]
    }

    /// Ladder weight of a coordinate index: 2^-(slot+1) on the ladder,
    /// 1 elsewhere.
    pub fn coordinate_weight(&self, idx: u32) -> f64 {
        match self.w_indices.binary_search(&idx) {
            Ok(slot) => Self::ladder_weight(slot),
            Err(_) => 1.0,
        }
    }

    /// omega(v)^2 = sum over coordinates of (weight * coefficient)^2,
    /// summed directly so enormous deep-ladder coefficients cannot cancel
    /// anything. Weights are powers of two, so each term is an exact
    /// scaling and omega <= |v| holds in floating point as well.
    pub fn omega_value(&self, v: &SparseVec) -> f64 {
        debug_assert!(self.w_indices.windows(2).all(|w| w[0] < w[1]));
        let mut acc = 0.0;
        for (idx, c) in v.iter() {
            let scaled = c * self.coordinate_weight(idx);
            acc += scaled * scaled;
        }
        acc.sqrt()
    }

    /// Jet of omega at v (undefined gradient at the origin).
    pub fn omega(&self, v: &SparseVec) -> Result<Jet> {
        let value = self.omega_value(v);
        if value == 0.0 {
            return Err(EngineError::OmegaGradientAtZero);
        }
        // grad omega = (weight^2 c)_coords / omega
        let num = SparseVec::from_pairs(v.iter().map(|(idx, c)| {
            let w = self.coordinate_weight(idx);
            (idx, c * w * w)
        }));
        Ok(Jet {
            value,
            gradient: num.scale(1.0 / value),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::affine_frame;

    fn split() -> OmegaSplit {
        let pts = vec![
            SparseVec::zero(),
            SparseVec::from_dense(&[1.0, 0.0]),
            SparseVec::from_dense(&[0.0, 1.0]),
        ];
        OmegaSplit {
            y_frame: affine_frame(&pts, 1e-10).frame,
            w_indices: (100..140).collect(),
        }
    }

    #[test]
    fn first_ladder_vector_has_omega_one_half() {
        let s = split();
        let z1 = SparseVec::unit(100);
        assert!((s.omega_value(&z1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn omega_equals_norm_off_the_ladder() {
        let s = split();
        let x = SparseVec::from_dense(&[0.3, -0.4]);
        assert_eq!(s.omega_value(&x), x.norm());
        let mixed = SparseVec::from_pairs([(1, 1.0), (3, 2.0), (50, -0.7)]);
        assert_eq!(s.omega_value(&mixed), mixed.norm());
    }

    #[test]
    fn omega_never_exceeds_norm() {
        let s = split();
        let mut rng = crate::sampling::rng_from_seed(42);
        use rand::Rng;
        for _ in 0..500 {
            let mut pairs = Vec::new();
            for _ in 0..6 {
                let idx: u32 = rng.gen_range(1..160);
                let c: f64 = rng.gen_range(-3.0..3.0);
                pairs.push((idx, c));
            }
            let v = SparseVec::from_pairs(pairs);
            assert!(s.omega_value(&v) <= v.norm());
        }
    }

    #[test]
    fn omega_norm_axioms_sampled() {
        let s = split();
        let mut rng = crate::sampling::rng_from_seed(7);
        use rand::Rng;
        let rand_vec = |rng: &mut rand_chacha::ChaCha8Rng| {
            let pairs: Vec<(u32, f64)> = (0..5)
                .map(|_| (rng.gen_range(1..150), rng.gen_range(-2.0..2.0)))
                .collect();
            SparseVec::from_pairs(pairs)
        };
        for _ in 0..300 {
            let u = rand_vec(&mut rng);
            let v = rand_vec(&mut rng);
            let t: f64 = rng.gen_range(-3.0..3.0);
            // Triangle inequality and absolute homogeneity.
            let lhs = s.omega_value(&u.add(&v));
            let rhs = s.omega_value(&u) + s.omega_value(&v);
            assert!(lhs <= rhs + 1e-10 * (1.0 + rhs));
            let hom = (s.omega_value(&u.scale(t)) - t.abs() * s.omega_value(&u)).abs();
            assert!(hom <= 1e-10 * (1.0 + s.omega_value(&u) * t.abs()));
        }
    }

    #[test]
    fn omega_gradient_matches_finite_differences() {
        let s = split();
        let v = SparseVec::from_pairs([(1, 0.4), (2, -0.3), (100, 0.8), (101, -0.2), (55, 1.1)]);
        let jet = s.omega(&v).unwrap();
        let h = 1e-6;
        for idx in [1u32, 2, 100, 101, 55, 60] {
            let e = SparseVec::unit(idx);
            let fp = s.omega_value(&v.add_scaled(&e, h));
            let fm = s.omega_value(&v.add_scaled(&e, -h));
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - jet.gradient.get(idx)).abs() < 1e-8,
                "coordinate {idx}"
            );
        }
        assert!(matches!(
            s.omega(&SparseVec::zero()),
            Err(EngineError::OmegaGradientAtZero)
        ));
    }
}
