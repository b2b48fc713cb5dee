//! The perturbed partition-of-unity approximant and the isolation of its
//! critical clusters.
//!
//! phi_n is a product of smooth transitions of the squared distances to
//! the first n+1 centers, openly supported on the scalloped ball B_n. The
//! approximant is the quotient of the alpha-weighted sum by the plain sum;
//! its partial-sum critical points live in the affine span of the centers
//! whose balls contain them, which is what makes a grid-plus-Newton search
//! in frame coordinates complete.

use crate::config::EngineConfig;
use crate::cover::{scalloped_membership, CoverAtlas};
use crate::error::{EngineError, Result};
use crate::linalg::{solve_square, Mat};
use crate::sampling::sample_region;
use crate::smooth::{g_n_eval, profile_eval, sq_dist_jet, BumpProfile, Jet, Transition};
use crate::space::{affine_frame, dot, Ball, SparseVec};

/// The partition data: one bump profile per center (base f(y_n), amplitude
/// half the accuracy budget at y_n) over a finalized atlas. Lambdas are
/// appended to the atlas by the isolation induction.
#[derive(Debug, Clone)]
pub struct PartitionFn {
    pub atlas: CoverAtlas,
    pub profiles: Vec<BumpProfile>,
}

impl PartitionFn {
    pub fn new(atlas: CoverAtlas, profiles: Vec<BumpProfile>) -> Self {
        assert_eq!(atlas.len(), profiles.len());
        PartitionFn { atlas, profiles }
    }

    /// Profiles from the function oracle: base f(y_n), amplitude
    /// amp(y_n) (callers pass eps/2 or eps(y_n)/2).
    pub fn from_oracle(
        atlas: CoverAtlas,
        f: impl Fn(&SparseVec) -> f64,
        amplitude: impl Fn(&SparseVec) -> f64,
        rate: f64,
    ) -> Self {
        let profiles = atlas
            .centers
            .iter()
            .map(|y| BumpProfile::new(f(y), amplitude(y), rate))
            .collect();
        PartitionFn { atlas, profiles }
    }

    pub fn len(&self) -> usize {
        self.atlas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atlas.is_empty()
    }

    /// Transition factors of g_n for ball n (0-based): rising on
    /// [(lambda_n r_j)^2, r_j^2] for j < n, falling on [0, r_n^2] for the
    /// last factor.
    fn factors(&self, n: usize) -> Result<Vec<(Transition, bool)>> {
        let mut out = Vec::with_capacity(n + 1);
        if n > 0 {
            let lambda = self
                .atlas
                .lambda(n)
                .ok_or(EngineError::LambdaUnassigned { index: n })?;
            for j in 0..n {
                let r = self.atlas.radii[j];
                out.push((Transition::new((lambda * r).powi(2), r * r), true));
            }
        }
        let r = self.atlas.radii[n];
        out.push((Transition::new(0.0, r * r), false));
        Ok(out)
    }
}

/// Jet of phi_n(x) = g_n(||x-y_0||^2, ..., ||x-y_n||^2).
pub fn phi_n_jet(pf: &PartitionFn, n: usize, x: &SparseVec) -> Result<Jet> {
    // Outside the carrier ball the falling factor and its derivative both
    // vanish identically; skip the product.
    if x.dist(&pf.atlas.centers[n]) >= pf.atlas.radii[n] {
        return Ok(Jet::constant(0.0));
    }
    let factors = pf.factors(n)?;
    let jets: Vec<Jet> = (0..=n)
        .map(|j| sq_dist_jet(x, &pf.atlas.centers[j]))
        .collect();
    let t: Vec<f64> = jets.iter().map(|j| j.value).collect();
    let (value, partials) = g_n_eval(&factors, &t)?;
    let mut gradient = SparseVec::zero();
    for (p, jet) in partials.iter().zip(&jets) {
        if *p != 0.0 {
            gradient = gradient.add_scaled(&jet.gradient, *p);
        }
    }
    Ok(Jet { value, gradient })
}

/// Jet of alpha_n(x) = a_n(||x-y_n||^2).
pub fn alpha_n_jet(pf: &PartitionFn, n: usize, x: &SparseVec) -> Result<Jet> {
    let sq = sq_dist_jet(x, &pf.atlas.centers[n]);
    let (value, deriv) = profile_eval(pf.profiles[n], sq.value)?;
    Ok(Jet {
        value,
        gradient: sq.gradient.scale(deriv),
    })
}

/// Quotient jet of the partial sum over the first `upto` balls (pass
/// `pf.len()` for the full approximant). Errors when the denominator
/// vanishes, i.e. outside the union of the first `upto` scalloped balls.
pub fn phi_jet(pf: &PartitionFn, x: &SparseVec, upto: usize) -> Result<Jet> {
    assert!(upto >= 1 && upto <= pf.len());
    let mut num = 0.0;
    let mut num_grad = SparseVec::zero();
    let mut den = 0.0;
    let mut den_grad = SparseVec::zero();
    for k in 0..upto {
        let phi = phi_n_jet(pf, k, x)?;
        if phi.value == 0.0 && phi.gradient.is_zero() {
            continue;
        }
        let alpha = alpha_n_jet(pf, k, x)?;
        num += alpha.value * phi.value;
        num_grad = num_grad
            .add_scaled(&phi.gradient, alpha.value)
            .add_scaled(&alpha.gradient, phi.value);
        den += phi.value;
        den_grad = den_grad.add(&phi.gradient);
    }
    if den <= 1e-12 {
        return Err(EngineError::OutsideDomain { denominator: den });
    }
    let value = num / den;
    let gradient = num_grad
        .scale(1.0 / den)
        .add_scaled(&den_grad, -value / den);
    Ok(Jet { value, gradient })
}

/// The coefficient of (x - y_j) in the grouped form of the critical-point
/// equation for the partial sum over `upto` balls: eta_j phi_j sum_i phi_i
/// plus the alpha-difference terms contracted with the g-partials. The
/// gradient identity grad f = (2 / D^2) sum_j beta_j (x - y_j) is a test
/// oracle for the quotient jet.
pub fn grouped_gradient_coefficients(
    pf: &PartitionFn,
    x: &SparseVec,
    upto: usize,
) -> Result<Vec<f64>> {
    assert!(upto >= 1 && upto <= pf.len());
    let mut phi_vals = vec![0.0; upto];
    let mut alpha_vals = vec![0.0; upto];
    let mut eta = vec![0.0; upto];
    // mu[k][j] = d g_k / d t_j at x, for j <= k.
    let mut mu: Vec<Vec<f64>> = Vec::with_capacity(upto);
    for k in 0..upto {
        let sqs: Vec<f64> = (0..=k)
            .map(|j| x.dist(&pf.atlas.centers[j]).powi(2))
            .collect();
        let factors = pf.factors(k)?;
        let (value, partials) = g_n_eval(&factors, &sqs)?;
        phi_vals[k] = value;
        mu.push(partials);
        let (a, da) = profile_eval(pf.profiles[k], sqs[k])?;
        alpha_vals[k] = a;
        eta[k] = da;
    }
    let phi_sum: f64 = phi_vals.iter().sum();
    let mut beta = vec![0.0; upto];
    for j in 0..upto {
        let mut b = eta[j] * phi_vals[j] * phi_sum;
        for k in j..upto {
            let weight: f64 = (0..upto)
                .map(|i| (alpha_vals[k] - alpha_vals[i]) * phi_vals[i])
                .sum();
            b += weight * mu[k][j];
        }
        beta[j] = b;
    }
    Ok(beta)
}

/// Locate the zeros of the partial-sum gradient restricted to the affine
/// span of the centers active near ball n: grid seeds in frame
/// coordinates, Newton refinement, clustering of converged roots, then the
/// caller's region filter. Every returned point has full-space gradient
/// norm below the configured tolerance.
pub fn critical_points(
    pf: &PartitionFn,
    n: usize,
    filter: impl Fn(&SparseVec) -> bool,
    cfg: &EngineConfig,
) -> Result<Vec<SparseVec>> {
    assert!(n < pf.len());
    let upto = n + 1;
    let atlas = &pf.atlas;
    let r_n = atlas.radii[n];
    let y_n = &atlas.centers[n];

    // Only balls meeting B(y_n, r_n) can carry a nonzero coefficient at a
    // point of the search ball, so the span of the active centers contains
    // every critical point we are after.
    let mut active: Vec<usize> = (0..n)
        .filter(|&j| atlas.centers[j].dist(y_n) < atlas.radii[j] + r_n)
        .collect();
    active.push(n);
    let span_points: Vec<SparseVec> = std::iter::once(y_n.clone())
        .chain(
            active
                .iter()
                .filter(|&&j| j != n)
                .map(|&j| atlas.centers[j].clone()),
        )
        .collect();
    let frame = affine_frame(&span_points, cfg.frame_drop_tol).frame;
    let m = frame.dim();

    let restricted = |c: &[f64]| -> Result<Vec<f64>> {
        let x = frame.point_at(c);
        let jet = phi_jet(pf, &x, upto)?;
        Ok(frame
            .directions
            .iter()
            .map(|d| dot(d, &jet.gradient))
            .collect())
    };

    // Seed lattice over the bounding box of the search ball in frame
    // coordinates, thinned so the total stays within the seed budget.
    let mut per_dim = cfg.roots_grid_per_dim.max(2);
    if m > 0 {
        while per_dim > 2 && per_dim.pow(m as u32) > cfg.roots_seed_budget {
            per_dim -= 1;
        }
    }
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    seeds.push(vec![0.0; m]); // the center itself
    if m > 0 {
        let mut idx = vec![0usize; m];
        loop {
            let c: Vec<f64> = idx
                .iter()
                .map(|&i| -r_n + 2.0 * r_n * i as f64 / (per_dim - 1) as f64)
                .collect();
            if c.iter().map(|v| v * v).sum::<f64>() < r_n * r_n {
                seeds.push(c);
            }
            let mut k = m;
            loop {
                if k == 0 {
                    idx.clear();
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_dim {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    idx.clear();
                    break;
                }
            }
            if idx.is_empty() {
                break;
            }
        }
    }

    let h = 1e-6 * r_n.max(1e-3);
    let mut roots: Vec<SparseVec> = Vec::new();
    'seed: for seed in seeds {
        let mut c = seed;
        let mut converged = false;
        for _ in 0..cfg.newton_max_iter {
            let g = match restricted(&c) {
                Ok(g) => g,
                Err(_) => continue 'seed, // wandered outside the domain
            };
            let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm <= cfg.newton_tol {
                converged = true;
                break;
            }
            if m == 0 {
                break;
            }
            // Central-difference Jacobian of the restricted gradient.
            let mut jac = Mat::zeros(m, m);
            let mut ok = true;
            for l in 0..m {
                let mut cp = c.clone();
                cp[l] += h;
                let mut cm = c.clone();
                cm[l] -= h;
                match (restricted(&cp), restricted(&cm)) {
                    (Ok(gp), Ok(gm)) => {
                        for k in 0..m {
                            jac.set(k, l, (gp[k] - gm[k]) / (2.0 * h));
                        }
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue 'seed;
            }
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let step = match solve_square(&jac, &neg_g, 1e-13) {
                Some(s) => s,
                None => continue 'seed,
            };
            let step_norm: f64 = step.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (ci, si) in c.iter_mut().zip(&step) {
                *ci += si;
            }
            if c.iter().map(|v| v * v).sum::<f64>().sqrt() > 3.0 * r_n {
                continue 'seed; // diverged out of the search ball
            }
            if step_norm <= cfg.newton_tol {
                converged = true;
                break;
            }
        }
        if m == 0 {
            // Zero-dimensional frame: accept the point iff the full
            // gradient vanishes there.
            converged = true;
        }
        if !converged {
            continue;
        }
        let x = frame.point_at(&c);
        if x.dist(y_n) >= r_n {
            continue;
        }
        let jet = match phi_jet(pf, &x, upto) {
            Ok(j) => j,
            Err(_) => continue,
        };
        if jet.gradient.norm() >= cfg.root_gradient_tol {
            continue;
        }
        if roots.iter().all(|r| r.dist(&x) > cfg.root_cluster_tol) {
            roots.push(x);
        }
    }

    Ok(roots.into_iter().filter(|x| filter(x)).collect())
}

/// One isolating open region: the carrier ball minus closed exclusion
/// balls, intersected with the union of the inclusion balls, plus an
/// optional ball around an isolated center.
#[derive(Debug, Clone)]
pub struct IsolatingRegion {
    pub ball: Ball,
    pub exclusions: Vec<Ball>,
    pub inclusions: Vec<Ball>,
    pub extra: Option<Ball>,
}

impl IsolatingRegion {
    pub fn contains(&self, x: &SparseVec) -> bool {
        if let Some(b) = &self.extra {
            if b.contains(x) {
                return true;
            }
        }
        if !self.ball.contains(x) {
            return false;
        }
        for e in &self.exclusions {
            if x.dist(&e.center) <= e.radius {
                return false;
            }
        }
        if self.inclusions.is_empty() {
            return true;
        }
        self.inclusions.iter().any(|b| b.contains(x))
    }

    /// Conservative lower bound on the distance from x to the complement,
    /// assembled from 1-Lipschitz ball slacks; 0 when x is outside.
    pub fn clearance(&self, x: &SparseVec) -> f64 {
        let mut main = self.ball.slack(x);
        for e in &self.exclusions {
            main = main.min(x.dist(&e.center) - e.radius);
        }
        if !self.inclusions.is_empty() {
            let best = self
                .inclusions
                .iter()
                .map(|b| b.slack(x))
                .fold(f64::NEG_INFINITY, f64::max);
            main = main.min(best);
        }
        let extra = self.extra.as_ref().map_or(f64::NEG_INFINITY, |b| b.slack(x));
        main.max(extra).max(0.0)
    }
}

/// A compact critical cluster: the net of numerically found roots together
/// with its isolating open region.
#[derive(Debug, Clone)]
pub struct CriticalCluster {
    pub index: usize,
    pub points: Vec<SparseVec>,
    pub isolating_region: IsolatingRegion,
}

/// Sequential state of the isolation induction: how many clusters are
/// built and the mu value waiting to bound the next inclusion radii.
#[derive(Debug, Clone)]
pub struct IsolationState {
    pub completed: usize,
    pub clusters: Vec<CriticalCluster>,
}

impl IsolationState {
    /// First step: mu_2 = 1/2, the first cluster is the first center with
    /// the half-radius ball around it (the only critical point of the
    /// first partial sum is the center itself).
    pub fn first_step(pf: &mut PartitionFn) -> Self {
        assert!(!pf.is_empty());
        assert!(pf.atlas.mus.is_empty() && pf.atlas.lambdas.is_empty());
        pf.atlas.mus.push(0.5);
        let y = pf.atlas.centers[0].clone();
        let r = pf.atlas.radii[0];
        let cluster = CriticalCluster {
            index: 0,
            points: vec![y.clone()],
            isolating_region: IsolatingRegion {
                ball: Ball::new(y, 0.5 * r),
                exclusions: Vec::new(),
                inclusions: Vec::new(),
                extra: None,
            },
        };
        IsolationState {
            completed: 1,
            clusters: vec![cluster],
        }
    }

    pub fn is_done(&self, pf: &PartitionFn) -> bool {
        self.completed == pf.len()
    }
}

/// One inductive step: fix lambda for the next ball by the midpoint rule,
/// locate the critical points of the extended partial sum inside it,
/// choose the next mu with a containment margin, and assemble the cluster
/// and its isolating region (adding the center and a small ball around it
/// when no earlier scalloped ball reaches it).
pub fn isolate_step(
    state: &mut IsolationState,
    pf: &mut PartitionFn,
    cfg: &EngineConfig,
) -> Result<()> {
    let b = state.completed;
    assert!(b >= 1 && b < pf.len(), "isolation already complete");
    let mu_prev = pf.atlas.mus[b - 1];

    // lambda_b: midpoint of (max(mu_prev, 1 - 1/(b+1)), 1).
    let floor = mu_prev.max(1.0 - 1.0 / (b + 1) as f64);
    let lambda = floor + 0.5 * (1.0 - floor);
    assert_eq!(pf.atlas.lambdas.len(), b - 1);
    pf.atlas.lambdas.push(lambda);

    // Critical points of the new partial sum inside B_b that earlier
    // scalloped balls can see.
    let atlas_view = pf.atlas.clone();
    let in_earlier = |x: &SparseVec| -> bool {
        (0..b).any(|j| {
            scalloped_membership(&atlas_view, j, x)
                .map(|(inside, _)| inside)
                .unwrap_or(false)
        })
    };
    let filter = |x: &SparseVec| -> bool {
        scalloped_membership(&atlas_view, b, x)
            .map(|(inside, _)| inside)
            .unwrap_or(false)
            && in_earlier(x)
    };
    let mut points = critical_points(pf, b, filter, cfg)?;

    // Containment ratio: every found point sits strictly inside some
    // earlier ball, so the max of the min ratios stays below one.
    let mut v: f64 = 0.0;
    for x in &points {
        let min_ratio = (0..b)
            .map(|j| x.dist(&pf.atlas.centers[j]) / pf.atlas.radii[j])
            .fold(f64::INFINITY, f64::min);
        if min_ratio >= 1.0 - 1e-9 {
            return Err(EngineError::ContainmentMiss { witness: x.clone() });
        }
        v = v.max(min_ratio);
    }
    let lo = lambda + 1e-9 * (1.0 - lambda);
    let hi = 1.0 - 1e-9;
    let clamped = v.clamp(lo, hi);
    let mu_next = clamped + 0.1 * (1.0 - clamped);
    assert_eq!(pf.atlas.mus.len(), b);
    pf.atlas.mus.push(mu_next);

    let y_b = pf.atlas.centers[b].clone();
    let r_b = pf.atlas.radii[b];
    let isolated = !in_earlier(&y_b);
    let extra = if isolated {
        // No earlier raw ball reaches the center (minimal-index argument),
        // so the gap to each of them bounds an admissible ball radius.
        let mut gap = r_b;
        for j in 0..b {
            gap = gap.min(y_b.dist(&pf.atlas.centers[j]) - pf.atlas.radii[j]);
        }
        if gap <= 0.0 {
            return Err(EngineError::ContainmentMiss { witness: y_b.clone() });
        }
        let delta = (0.5 * gap).min(mu_next * r_b * (1.0 - 1e-9));
        points.push(y_b.clone());
        Some(Ball::new(y_b.clone(), delta))
    } else {
        None
    };

    let region = IsolatingRegion {
        ball: Ball::new(y_b.clone(), r_b),
        exclusions: (0..b)
            .map(|j| Ball::new(pf.atlas.centers[j].clone(), mu_prev * pf.atlas.radii[j]))
            .collect(),
        inclusions: (0..b)
            .map(|j| Ball::new(pf.atlas.centers[j].clone(), mu_next * pf.atlas.radii[j]))
            .collect(),
        extra,
    };

    for x in &points {
        if !region.contains(x) {
            return Err(EngineError::ContainmentMiss { witness: x.clone() });
        }
    }

    // Sampled disjointness against the earlier regions.
    let samples = sample_region(
        cfg.build_seed ^ (b as u64).wrapping_mul(0x9e37_79b9),
        &pf.atlas.region,
        pf.atlas.ambient_dim,
        cfg.build_samples.min(2000),
    );
    for x in &samples {
        if region.contains(x) {
            for earlier in &state.clusters {
                if earlier.isolating_region.contains(x) {
                    return Err(EngineError::ClusterOverlap {
                        a: earlier.index,
                        b,
                    });
                }
            }
        }
    }

    state.clusters.push(CriticalCluster {
        index: b,
        points,
        isolating_region: region,
    });
    state.completed += 1;
    Ok(())
}
