//! C-infinity scalar primitives and first-order jet propagation.
//!
//! The basic brick is the transition sigma(t-a)/(sigma(t-a)+sigma(b-t)) with
//! sigma(s) = exp(-1/s) for s > 0 and 0 otherwise. It is flat to all orders
//! at both seams, strictly monotone inside, and evaluated here in the
//! logistic form 1/(1+exp(1/p - 1/q)) which never produces NaN.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::space::SparseVec;

/// A first-order jet: value plus gradient in the ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: SparseVec,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            gradient: SparseVec::zero(),
        }
    }
}

/// Seam pair of a smooth transition; strictly a < b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub a: f64,
    pub b: f64,
}

impl Transition {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a < b, "transition needs a < b, got [{a}, {b}]");
        Transition { a, b }
    }
}

/// Rising transition value and derivative: 0 on (-inf, a], 1 on [b, +inf),
/// strictly increasing in between. `rising = false` gives 1 minus that.
///
/// The argument is normalized to the unit interval before the smoothstep,
/// so the maximal slope is exactly 2/(b-a) whatever the window width, and
/// each branch gets its own saturating logistic so the exponentially small
/// tails near the seams survive in floating point.
pub fn transition_eval(tr: Transition, t: f64, rising: bool) -> (f64, f64) {
    if t <= tr.a {
        return if rising { (0.0, 0.0) } else { (1.0, 0.0) };
    }
    if t >= tr.b {
        return if rising { (1.0, 0.0) } else { (0.0, 0.0) };
    }
    let width = tr.b - tr.a;
    let p = (t - tr.a) / width;
    let q = 1.0 - p;
    // sigma(p)/(sigma(p)+sigma(q)) with sigma(s) = exp(-1/s):
    // rising = 1/(1+exp(w)), falling = 1/(1+exp(-w)), w = 1/p - 1/q.
    let w = 1.0 / p - 1.0 / q;
    let up = 1.0 / (1.0 + w.exp());
    let down = 1.0 / (1.0 + (-w).exp());
    // y'(t) = y (1-y) (1/p^2 + 1/q^2) / width, and y(1-y) = up * down
    // keeps precision when either side saturates.
    let slope = up * down * (1.0 / (p * p) + 1.0 / (q * q)) / width;
    if rising {
        (up, slope)
    } else {
        (down, -slope)
    }
}

/// Jet of x -> ||x - y||^2; the gradient is 2(x - y).
pub fn sq_dist_jet(x: &SparseVec, y: &SparseVec) -> Jet {
    let diff = x.sub(y);
    Jet {
        value: diff.norm_sq(),
        gradient: diff.scale(2.0),
    }
}

/// Product of transition factors with its partial derivatives.
///
/// Factor i is evaluated at t[i]; the partial with respect to t[j] is
/// theta_j' times the product of the other factors, assembled from prefix
/// and suffix products so a single vanishing factor still yields its one
/// surviving partial.
pub fn g_n_eval(factors: &[(Transition, bool)], t: &[f64]) -> Result<(f64, Vec<f64>)> {
    if factors.len() != t.len() {
        return Err(EngineError::LengthMismatch {
            expected: factors.len(),
            got: t.len(),
        });
    }
    let n = factors.len();
    assert!(n >= 1, "g_n needs at least one factor");
    let mut vals = Vec::with_capacity(n);
    let mut ders = Vec::with_capacity(n);
    for (&(tr, rising), &ti) in factors.iter().zip(t) {
        let (v, d) = transition_eval(tr, ti, rising);
        vals.push(v);
        ders.push(d);
    }
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * vals[i];
    }
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * vals[i];
    }
    let value = prefix[n];
    let partials = (0..n)
        .map(|j| ders[j] * prefix[j] * suffix[j + 1])
        .collect();
    Ok((value, partials))
}

/// Decay profile a(t) = base - amplitude (1 - exp(-rate t)) for t >= 0.
///
/// a(0) = base, a'(t) = -amplitude rate exp(-rate t) < 0 everywhere, and
/// |a(t) - base| < amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub base: f64,
    pub amplitude: f64,
    pub rate: f64,
}

impl BumpProfile {
    pub fn new(base: f64, amplitude: f64, rate: f64) -> Self {
        assert!(amplitude > 0.0, "profile amplitude must be positive");
        assert!(rate > 0.0, "profile rate must be positive");
        BumpProfile {
            base,
            amplitude,
            rate,
        }
    }
}

pub fn profile_eval(p: BumpProfile, t: f64) -> Result<(f64, f64)> {
    if t < 0.0 {
        return Err(EngineError::NegativeProfileArgument { t });
    }
    let e = (-p.rate * t).exp();
    Ok((p.base - p.amplitude * (1.0 - e), -p.amplitude * p.rate * e))
}
