//! Smooth stand-in for the omega-distance to a compact set, realized as a
//! ramped soft minimum over a finite net: exactly zero on the net, exactly
//! equal to its plateau once the omega-distance reaches eps, and
//! omega-Lipschitz up to a small temperature-controlled slack.

use crate::config::EngineConfig;
use crate::error::Result;
use crate::smooth::{transition_eval, Jet, Transition};
use crate::space::SparseVec;

use super::omega::OmegaSplit;

/// A finite eta-net standing in for a compact set.
#[derive(Debug, Clone)]
pub struct CompactNet {
    pub points: Vec<SparseVec>,
    pub net_radius: f64,
}

impl CompactNet {
    pub fn new(points: Vec<SparseVec>, net_radius: f64) -> Self {
        assert!(!points.is_empty(), "a compact net needs at least one point");
        assert!(net_radius >= 0.0);
        CompactNet { points, net_radius }
    }
}

#[derive(Debug, Clone)]
pub struct WhitneyFn {
    pub net: CompactNet,
    pub eps: f64,
    pub temperature: f64,
    pub plateau: f64,
    /// Rising ramp applied to softmin/eps: flat 0 until 0, flat 1 from
    /// 1 - temperature ln(N)/eps on, so both exact contracts hold.
    ramp: Transition,
}

impl WhitneyFn {
    pub fn new(net: CompactNet, eps: f64, cfg: &EngineConfig) -> Self {
        assert!(eps > 0.0);
        let n = net.points.len() as f64;
        let log_n = n.ln().max(0.0);
        // softmin sits within temperature*ln(N) below the true min; the
        // ramp's upper seam absorbs exactly that gap. The temperature is
        // sized so the extra slope (the Lipschitz slack kappa) stays small.
        let temperature = if log_n > 0.0 {
            cfg.whitney_temp_factor * eps / log_n
        } else {
            cfg.whitney_temp_factor * eps
        };
        let upper = 1.0 - temperature * log_n / eps;
        assert!(upper > 0.5, "temperature too large for the ramp");
        WhitneyFn {
            net,
            eps,
            temperature,
            plateau: eps / 2.0,
            ramp: Transition::new(0.0, upper),
        }
    }

    /// min over the net of omega(x - z).
    pub fn omega_dist(&self, split: &OmegaSplit, x: &SparseVec) -> f64 {
        self.net
            .points
            .iter()
            .map(|z| split.omega_value(&x.sub(z)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, split: &OmegaSplit, x: &SparseVec) -> f64 {
        self.eval(split, x).value
    }

    pub fn eval(&self, split: &OmegaSplit, x: &SparseVec) -> Jet {
        let dists: Vec<f64> = self
            .net
            .points
            .iter()
            .map(|z| split.omega_value(&x.sub(z)))
            .collect();
        let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let t = self.temperature;
        let mut expsum = 0.0;
        for &a in &dists {
            expsum += (-(a - min) / t).exp();
        }
        let softmin = min - t * expsum.ln();
        let u = softmin / self.eps;
        let (rho, drho) = transition_eval(self.ramp, u, true);
        let value = self.plateau * rho;
        if drho == 0.0 {
            return Jet::constant(value);
        }
        // Every omega-distance is strictly positive here (otherwise the
        // softmin would sit at or below zero, inside the flat ramp), so
        // the gradients exist.
        let mut grad = SparseVec::zero();
        let outer = self.plateau * drho / self.eps;
        for (z, &a) in self.net.points.iter().zip(&dists) {
            let w = (-(a - min) / t).exp() / expsum;
            if w > 0.0 {
                let om = split
                    .omega(&x.sub(z))
                    .expect("positive omega distance has a gradient");
                grad = grad.add_scaled(&om.gradient, outer * w);
            }
        }
        Jet {
            value,
            gradient: grad,
        }
    }
}

pub fn whitney_eval(wf: &WhitneyFn, split: &OmegaSplit, x: &SparseVec) -> Result<Jet> {
    Ok(wf.eval(split, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::affine_frame;
    use rand::Rng;

    fn setup() -> (OmegaSplit, WhitneyFn) {
        let net = CompactNet::new(
            vec![
                SparseVec::zero(),
                SparseVec::from_dense(&[0.2, 0.1]),
                SparseVec::from_dense(&[-0.1, 0.15]),
            ],
            0.0,
        );
        let split = OmegaSplit {
            y_frame: affine_frame(&net.points, 1e-10).frame,
            w_indices: (200..260).collect(),
        };
        let wf = WhitneyFn::new(net, 0.4, &EngineConfig::default());
        (split, wf)
    }

    #[test]
    fn zero_on_the_net_and_plateau_far_away() {
        let (split, wf) = setup();
        for z in &wf.net.points {
            let j = wf.eval(&split, z);
            assert!(j.value.abs() <= 1e-9);
            assert!(j.gradient.is_zero());
        }
        // Far in an unweighted coordinate: omega distance well past eps.
        let far = SparseVec::from_dense(&[3.0, 0.0]);
        assert!(wf.omega_dist(&split, &far) >= wf.eps);
        let j = wf.eval(&split, &far);
        assert_eq!(j.value, wf.plateau);
        assert!(j.gradient.is_zero());
    }

    #[test]
    fn lipschitz_with_small_slack_on_sampled_pairs() {
        let (split, wf) = setup();
        let mut rng = crate::sampling::rng_from_seed(12);
        let rand_pt = |rng: &mut rand_chacha::ChaCha8Rng| {
            let pairs: Vec<(u32, f64)> = (0..4)
                .map(|_| (rng.gen_range(1..210), rng.gen_range(-0.8..0.8)))
                .collect();
            SparseVec::from_pairs(pairs)
        };
        for _ in 0..1000 {
            let x = rand_pt(&mut rng);
            let y = rand_pt(&mut rng);
            let d = split.omega_value(&x.sub(&y));
            if d < 1e-9 {
                continue;
            }
            let fx = wf.value(&split, &x);
            let fy = wf.value(&split, &y);
            assert!(
                (fx - fy).abs() <= 1.05 * d,
                "slack exceeded: |df|={} omega={}",
                (fx - fy).abs(),
                d
            );
        }
    }

    #[test]
    fn positive_off_the_inflation() {
        let (split, wf) = setup();
        // Property 4 at net resolution, over a grid of eta values.
        let mut rng = crate::sampling::rng_from_seed(99);
        for eta_step in 1..=8 {
            let eta = wf.eps * eta_step as f64 / 10.0;
            if eta <= wf.temperature * (wf.net.points.len() as f64).ln() {
                continue;
            }
            let mut inf = f64::INFINITY;
            for _ in 0..400 {
                let pairs: Vec<(u32, f64)> = (0..4)
                    .map(|_| (rng.gen_range(1..210), rng.gen_range(-1.0..1.0)))
                    .collect();
                let x = SparseVec::from_pairs(pairs);
                if wf.omega_dist(&split, &x) >= eta {
                    inf = inf.min(wf.value(&split, &x));
                }
            }
            if inf.is_finite() {
                assert!(inf > 0.0, "inf at eta={eta} is {inf}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (split, wf) = setup();
        let x = SparseVec::from_pairs([(1, 0.25), (2, -0.12), (200, 0.05)]);
        let jet = wf.eval(&split, &x);
        let h = 1e-6;
        for idx in [1u32, 2, 200, 201] {
            let e = SparseVec::unit(idx);
            let fp = wf.value(&split, &x.add_scaled(&e, h));
            let fm = wf.value(&split, &x.add_scaled(&e, -h));
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - jet.gradient.get(idx)).abs() < 1e-7,
                "coordinate {idx}: fd={fd} jet={}",
                jet.gradient.get(idx)
            );
        }
    }
}
