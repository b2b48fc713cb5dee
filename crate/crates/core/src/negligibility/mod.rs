//! Compact-set extraction: the noncomplete norm, the Whitney-type
//! function, the deleting path, the radial push, and their composition
//! into a diffeomorphism of the space onto the complement of a compact
//! net that restricts to the identity outside a prescribed open region.

mod omega;
mod path;
mod push;
mod whitney;

pub use omega::OmegaSplit;
pub use path::DeletingPath;
pub use push::{Direction, RadialPush};
pub use whitney::{whitney_eval, CompactNet, WhitneyFn};

use crate::config::EngineConfig;
use crate::error::{EngineError, Result};
use crate::space::{affine_frame, dot, IndexAllocator, SparseVec};

/// The composite h = F^{-1} o G^{-1} o F for one compact net inside one
/// open region, with everything needed to apply its derivative and the
/// derivative's adjoint.
#[derive(Debug, Clone)]
pub struct ExtractionDiffeo {
    pub push: RadialPush,
    pub whitney: WhitneyFn,
    pub path: DeletingPath,
    pub config: EngineConfig,
}

impl ExtractionDiffeo {
    /// Build the extraction machinery for a net whose doubled covering
    /// balls of the given radius stay inside the caller's open region.
    /// Fresh coordinates for the W-ladder come from the allocator, which
    /// is how the path escapes into dimensions nothing else has touched.
    pub fn build(
        net: CompactNet,
        push_radius: f64,
        alloc: &mut IndexAllocator,
        cfg: &EngineConfig,
    ) -> Result<Self> {
        if push_radius <= 0.0 {
            return Err(EngineError::InvalidArgument(
                "push radius must be positive".into(),
            ));
        }
        // eps of the Whitney function is the minimal covering radius; the
        // path's delta is the plateau value the Whitney function attains
        // far from the net.
        let eps = push_radius;
        let plateau = eps / 2.0;
        let path = DeletingPath::new(plateau, cfg);
        let ladder = path.ladder_span() + 2;
        let w_indices = alloc.fresh(ladder);
        let y_frame = affine_frame(&net.points, cfg.frame_drop_tol).frame;
        let split = OmegaSplit { y_frame, w_indices };
        let whitney = WhitneyFn::new(net.clone(), eps, cfg);
        let push = RadialPush::build(&net, push_radius, split);
        Ok(ExtractionDiffeo {
            push,
            whitney,
            path,
            config: cfg.clone(),
        })
    }

    pub fn split(&self) -> &OmegaSplit {
        &self.push.split
    }

    pub fn net(&self) -> &CompactNet {
        &self.whitney.net
    }

    /// G(x) = x + p(f(x)), defined where the Whitney value is positive;
    /// G^{-1} by the omega-contractive fixed-point iteration
    /// w <- y - p(f(w)).
    pub fn g_perturbation(&self, x: &SparseVec, direction: Direction) -> Result<SparseVec> {
        let split = self.split();
        match direction {
            Direction::Forward => {
                let t = self.whitney.value(split, x);
                if t <= 0.0 {
                    return Err(EngineError::InsideNetInflation);
                }
                let (p, _) = self.path.eval(split, t)?;
                Ok(x.add(&p))
            }
            Direction::Inverse => {
                let cfg = &self.config;
                let t_floor = self.path.delta * 0.5f64.powi(self.path.max_segments as i32 + 1);
                let mut w = x.clone();
                let mut increment = f64::INFINITY;
                for _ in 0..cfg.perturbation_inverse_max_iter {
                    let t = self.whitney.value(split, &w).max(t_floor);
                    let (p, _) = self.path.eval(split, t)?;
                    let next = x.sub(&p);
                    increment = split.omega_value(&next.sub(&w));
                    w = next;
                    if increment < cfg.perturbation_inverse_tol {
                        return Ok(w);
                    }
                }
                Err(EngineError::PerturbationInverseFailed {
                    iterations: cfg.perturbation_inverse_max_iter,
                    increment,
                })
            }
        }
    }

    /// h(x) = F^{-1}(G^{-1}(F(x))): total on the space, image clear of the
    /// net. When the perturbation leaves the pushed point alone the whole
    /// map is the identity and x is returned unchanged.
    pub fn extract(&self, x: &SparseVec) -> Result<SparseVec> {
        let fx = self.push.forward(x);
        let w = self.g_perturbation(&fx, Direction::Inverse)?;
        if w == fx {
            return Ok(x.clone());
        }
        self.push.inverse(&w, &self.config)
    }

    /// h^{-1}(x) = F^{-1}(G(F(x))): defined off the net inflation.
    pub fn extract_inverse(&self, x: &SparseVec) -> Result<SparseVec> {
        let fx = self.push.forward(x);
        let g = self.g_perturbation(&fx, Direction::Forward)?;
        if g == fx {
            return Ok(x.clone());
        }
        self.push.inverse(&g, &self.config)
    }

    /// Minimal omega-distance from a point to the net.
    pub fn omega_clearance(&self, x: &SparseVec) -> f64 {
        self.whitney.omega_dist(self.split(), x)
    }

    /// Base points of the chain x -> F(x) -> G^{-1}(F(x)) -> h(x), shared
    /// by the derivative routines.
    fn chain(&self, x: &SparseVec) -> Result<(SparseVec, SparseVec, SparseVec)> {
        let fx = self.push.forward(x);
        let w = self.g_perturbation(&fx, Direction::Inverse)?;
        let out = if w == fx {
            x.clone()
        } else {
            self.push.inverse(&w, &self.config)?
        };
        Ok((fx, w, out))
    }

    /// Rank-one data of DG at w: the pair (p'(f(w)), grad f(w)) and the
    /// Sherman-Morrison denominator 1 + <grad f, p'>.
    fn rank_one_at(&self, w: &SparseVec) -> Result<(SparseVec, SparseVec, f64)> {
        let split = self.split();
        let fj = self.whitney.eval(split, w);
        let t_floor = self.path.delta * 0.5f64.powi(self.path.max_segments as i32 + 1);
        let (_, vel) = self.path.eval(split, fj.value.max(t_floor))?;
        let denom = 1.0 + dot(&fj.gradient, &vel);
        if denom.abs() < self.config.rank_one_floor {
            return Err(EngineError::SingularRankOne { value: denom });
        }
        Ok((vel, fj.gradient, denom))
    }

    /// Dh(x)[v] by the chain rule: DF at x, the rank-one inverse of DG at
    /// the perturbation preimage, and the inverse of DF at the output.
    pub fn jacobian_action(&self, x: &SparseVec, v: &SparseVec) -> Result<SparseVec> {
        let (_, w, out) = self.chain(x)?;
        let q1 = self.push.jacobian_action(x, v);
        let (pvel, fgrad, denom) = self.rank_one_at(&w)?;
        let q2 = q1.add_scaled(&pvel, -dot(&fgrad, &q1) / denom);
        self.push.jacobian_inverse_action(&out, &q2, &self.config)
    }

    /// Adjoint action Dh(x)^T[u], the form the composed gradient needs.
    pub fn jacobian_adjoint(&self, x: &SparseVec, u: &SparseVec) -> Result<SparseVec> {
        let (_, w, out) = self.chain(x)?;
        let r1 = self
            .push
            .jacobian_inverse_adjoint(&out, u, &self.config)?;
        let (pvel, fgrad, denom) = self.rank_one_at(&w)?;
        let r2 = r1.add_scaled(&fgrad, -dot(&pvel, &r1) / denom);
        Ok(self.push.jacobian_adjoint(x, &r2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn diffeo() -> ExtractionDiffeo {
        let net = CompactNet::new(
            vec![
                SparseVec::zero(),
                SparseVec::from_dense(&[0.15, 0.05]),
                SparseVec::from_dense(&[0.0, 0.12]),
            ],
            0.0,
        );
        let mut alloc = IndexAllocator::starting_at(500);
        ExtractionDiffeo::build(net, 0.2, &mut alloc, &EngineConfig::default()).unwrap()
    }

    fn ambient(rng: &mut rand_chacha::ChaCha8Rng, spread: f64) -> SparseVec {
        SparseVec::from_pairs([
            (1, rng.gen_range(-spread..spread)),
            (2, rng.gen_range(-spread..spread)),
            (3, rng.gen_range(-spread..spread)),
        ])
    }

    #[test]
    fn identity_far_from_the_region() {
        let ed = diffeo();
        let mut rng = crate::sampling::rng_from_seed(3);
        for _ in 0..300 {
            let x = ambient(&mut rng, 1.0).add(&SparseVec::from_dense(&[2.0, 2.0]));
            let outside_all = ed
                .push
                .centers
                .iter()
                .zip(&ed.push.radii)
                .all(|(c, &r)| x.dist(c) >= 2.0 * r);
            if !outside_all {
                continue;
            }
            let hx = ed.extract(&x).unwrap();
            assert!(
                hx.dist(&x) <= 1e-9,
                "moved an outside point by {}",
                hx.dist(&x)
            );
        }
    }

    #[test]
    fn net_points_move_and_clear_the_net() {
        let ed = diffeo();
        for z in &ed.net().points.clone() {
            let hz = ed.extract(z).unwrap();
            assert!(hz.dist(z) > 0.0, "net point did not move");
            let clearance = ed.omega_clearance(&hz);
            assert!(clearance > 0.0, "image touches the net");
        }
    }

    #[test]
    fn round_trips_within_tolerance() {
        let ed = diffeo();
        let mut rng = crate::sampling::rng_from_seed(8);
        let mut count = 0;
        for _ in 0..150 {
            let x = ambient(&mut rng, 0.5);
            let hx = ed.extract(&x).unwrap();
            let back = match ed.extract_inverse(&hx) {
                Ok(b) => b,
                Err(_) => continue,
            };
            assert!(
                back.dist(&x) <= 1e-8 * (1.0 + x.norm()),
                "round trip error {}",
                back.dist(&x)
            );
            count += 1;
        }
        assert!(count >= 100, "only {count} round trips exercised");
    }

    #[test]
    fn perturbation_identity_beyond_eps() {
        let ed = diffeo();
        let mut rng = crate::sampling::rng_from_seed(14);
        for _ in 0..200 {
            let x = ambient(&mut rng, 0.4).add(&SparseVec::from_dense(&[1.5, 0.0]));
            if ed.omega_clearance(&x) < ed.whitney.eps {
                continue;
            }
            let gx = ed.g_perturbation(&x, Direction::Forward).unwrap();
            assert_eq!(gx, x);
            let ginv = ed.g_perturbation(&x, Direction::Inverse).unwrap();
            assert_eq!(ginv, x);
        }
    }

    #[test]
    fn perturbation_round_trip_off_the_net() {
        let ed = diffeo();
        let mut rng = crate::sampling::rng_from_seed(23);
        let mut exercised = 0;
        for _ in 0..200 {
            let x = ambient(&mut rng, 0.35);
            if ed.whitney.value(ed.split(), &x) <= 0.0 {
                continue;
            }
            let gx = ed.g_perturbation(&x, Direction::Forward).unwrap();
            let back = ed.g_perturbation(&gx, Direction::Inverse).unwrap();
            assert!(
                ed.split().omega_value(&back.sub(&x)) <= 1e-9,
                "perturbation round trip failed"
            );
            exercised += 1;
        }
        assert!(exercised >= 50, "only {exercised} round trips");
    }

    #[test]
    fn forward_inside_inflation_is_rejected() {
        let ed = diffeo();
        let z = &ed.net().points[0];
        assert!(matches!(
            ed.g_perturbation(z, Direction::Forward),
            Err(EngineError::InsideNetInflation)
        ));
        assert!(matches!(
            ed.extract_inverse(z),
            Err(EngineError::InsideNetInflation)
        ));
    }

    #[test]
    fn jacobian_action_matches_finite_differences() {
        let ed = diffeo();
        let mut rng = crate::sampling::rng_from_seed(44);
        let mut exercised = 0;
        for _ in 0..40 {
            let x = ambient(&mut rng, 0.5);
            let v = ambient(&mut rng, 1.0);
            if v.norm() < 1e-3 {
                continue;
            }
            let action = match ed.jacobian_action(&x, &v) {
                Ok(a) => a,
                Err(_) => continue,
            };
            assert!(action.norm() > 0.0);
            // Richardson-extrapolated forward differences at s and s/2.
            let s = 1e-6;
            let h0 = ed.extract(&x).unwrap();
            let h1 = ed.extract(&x.add_scaled(&v, s)).unwrap();
            let h2 = ed.extract(&x.add_scaled(&v, s / 2.0)).unwrap();
            let d1 = h1.sub(&h0).scale(1.0 / s);
            let d2 = h2.sub(&h0).scale(2.0 / s);
            let rich = d2.scale(2.0).sub(&d1);
            assert!(
                rich.sub(&action).norm() <= 1e-5 * (1.0 + action.norm()),
                "jacobian fd mismatch {}",
                rich.sub(&action).norm()
            );
            exercised += 1;
        }
        assert!(exercised >= 25);
    }

    #[test]
    fn jacobian_adjoint_pairs_with_action() {
        let ed = diffeo();
        let mut rng = crate::sampling::rng_from_seed(55);
        for _ in 0..40 {
            let x = ambient(&mut rng, 0.5);
            let v = ambient(&mut rng, 1.0);
            let u = ambient(&mut rng, 1.0);
            let (a, ad) = match (ed.jacobian_action(&x, &v), ed.jacobian_adjoint(&x, &u)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let lhs = dot(&a, &u);
            let rhs = dot(&v, &ad);
            assert!(
                (lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()),
                "adjoint identity broke: {lhs} vs {rhs}"
            );
        }
    }
}

