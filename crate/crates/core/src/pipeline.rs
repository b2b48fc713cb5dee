//! End-to-end assembly: cover, partition, isolation, one extraction
//! diffeomorphism per critical cluster, and the composed approximant
//! psi = phi after all extractions. Also the two corollary constructions
//! (closed-set separation and open-support functions) and the seeded
//! verification pass that turns the stated bounds into pass flags.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::cover::{build_cover_masked, perturb_radii, ModulusOracle};
use crate::error::{EngineError, Result};
use crate::negligibility::{CompactNet, ExtractionDiffeo};
use crate::pou::{isolate_step, phi_jet, CriticalCluster, IsolationState, PartitionFn};
use crate::sampling::{rng_from_seed, sample_in_ball};
use crate::smooth::Jet;
use crate::space::{Ball, IndexAllocator, SparseVec};

type ScalarFn = Box<dyn Fn(&SparseVec) -> f64 + Send + Sync>;
type MaskFn = Box<dyn Fn(&SparseVec) -> bool + Send + Sync>;

/// The function to approximate, with its continuity modulus.
pub struct TargetOracle {
    pub f: ScalarFn,
    pub modulus: ModulusOracle,
}

/// Constant or pointwise accuracy budget.
pub enum EpsMode {
    Constant(f64),
    Variable(ScalarFn),
}

impl EpsMode {
    pub fn at(&self, x: &SparseVec) -> f64 {
        match self {
            EpsMode::Constant(e) => *e,
            EpsMode::Variable(f) => f(x),
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, EpsMode::Variable(_))
    }

    /// Final approximation bound at x: 2 eps constant, 4 eps(x) variable.
    pub fn psi_bound(&self, x: &SparseVec) -> f64 {
        match self {
            EpsMode::Constant(e) => 2.0 * e,
            EpsMode::Variable(f) => 4.0 * f(x),
        }
    }
}

/// An open set given by a membership predicate and a distance oracle to
/// its complement (zero off the closure).
pub enum RegionFn {
    BallRegion(Ball),
    /// Finite union of pairwise-disjoint balls.
    BallUnion(Vec<Ball>),
    /// Complement of a closed ball.
    BallComplement(Ball),
    Custom { inside: MaskFn, distance: ScalarFn },
}

impl RegionFn {
    pub fn contains(&self, x: &SparseVec) -> bool {
        match self {
            RegionFn::BallRegion(b) => b.contains(x),
            RegionFn::BallUnion(bs) => bs.iter().any(|b| b.contains(x)),
            RegionFn::BallComplement(b) => x.dist(&b.center) > b.radius,
            RegionFn::Custom { inside, .. } => inside(x),
        }
    }

    /// A standalone closure computing the boundary distance, when the
    /// region's data can be cloned out (all ball variants).
    fn distance_closure(&self) -> Option<ScalarFn> {
        match self {
            RegionFn::BallRegion(b) => {
                let b = b.clone();
                Some(Box::new(move |x: &SparseVec| b.slack(x).max(0.0)))
            }
            RegionFn::BallUnion(bs) => {
                let bs = bs.clone();
                Some(Box::new(move |x: &SparseVec| {
                    bs.iter().map(|b| b.slack(x)).fold(0.0f64, f64::max)
                }))
            }
            RegionFn::BallComplement(b) => {
                let b = b.clone();
                Some(Box::new(move |x: &SparseVec| {
                    (x.dist(&b.center) - b.radius).max(0.0)
                }))
            }
            RegionFn::Custom { .. } => None,
        }
    }

    /// dist(x, complement); exactly 0 off the open set's closure.
    pub fn boundary_distance(&self, x: &SparseVec) -> f64 {
        match self {
            RegionFn::BallRegion(b) => b.slack(x).max(0.0),
            RegionFn::BallUnion(bs) => bs
                .iter()
                .map(|b| b.slack(x))
                .fold(0.0f64, f64::max),
            RegionFn::BallComplement(b) => (x.dist(&b.center) - b.radius).max(0.0),
            RegionFn::Custom { distance, .. } => distance(x).max(0.0),
        }
    }
}

/// The built approximant: the partition, its isolated critical clusters,
/// and one extraction diffeomorphism per cluster.
pub struct ApproxHandle {
    pub partition: PartitionFn,
    pub clusters: Vec<CriticalCluster>,
    /// One extraction per cluster with a nonempty net; clusters that
    /// trapped no critical points need no extraction at all.
    pub diffeos: Vec<Option<ExtractionDiffeo>>,
    pub eps: EpsMode,
    pub target: ScalarFn,
    /// Relevant for handles built on a masked region (open-support mode):
    /// verification samples respect it.
    pub domain_mask: Option<MaskFn>,
    pub config: EngineConfig,
}

impl ApproxHandle {
    pub fn region(&self) -> &Ball {
        &self.partition.atlas.region
    }

    pub fn ambient_dim(&self) -> usize {
        self.partition.atlas.ambient_dim
    }

    /// Index of the (unique, by disjointness) cluster whose isolating
    /// region contains x.
    pub fn locate_cluster(&self, x: &SparseVec) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.isolating_region.contains(x))
    }
}

/// Run the full construction for a target over a ball region.
pub fn build_psi(
    oracle: TargetOracle,
    eps: EpsMode,
    region: &Ball,
    ambient_dim: usize,
    cfg: &EngineConfig,
) -> Result<ApproxHandle> {
    build_psi_masked(oracle, eps, region, ambient_dim, cfg, None)
}

pub(crate) fn build_psi_masked(
    oracle: TargetOracle,
    eps: EpsMode,
    region: &Ball,
    ambient_dim: usize,
    cfg: &EngineConfig,
    mask: Option<MaskFn>,
) -> Result<ApproxHandle> {
    let mut alloc = IndexAllocator::starting_at(ambient_dim as u32 + 1);

    let atlas = build_cover_masked(
        &oracle.modulus,
        region,
        ambient_dim,
        &mut alloc,
        cfg,
        mask.as_ref().map(|m| m as &dyn Fn(&SparseVec) -> bool),
    )
    .map_err(|e| e.at_stage("build_cover"))?;
    let atlas = perturb_radii(atlas, cfg).map_err(|e| e.at_stage("perturb_radii"))?;

    let mut partition =
        PartitionFn::from_oracle(atlas, &oracle.f, |y| eps.at(y) / 2.0, cfg.profile_rate);

    let mut state = IsolationState::first_step(&mut partition);
    while !state.is_done(&partition) {
        isolate_step(&mut state, &mut partition, cfg).map_err(|e| e.at_stage("isolate_step"))?;
    }

    let mut diffeos = Vec::with_capacity(state.clusters.len());
    for cluster in &state.clusters {
        if cluster.points.is_empty() {
            diffeos.push(None);
            continue;
        }
        let net = CompactNet::new(cluster.points.clone(), 0.0);
        let clearance = net
            .points
            .iter()
            .map(|p| cluster.isolating_region.clearance(p))
            .fold(f64::INFINITY, f64::min);
        if !(clearance > 0.0) {
            return Err(EngineError::ContainmentMiss {
                witness: net.points[0].clone(),
            }
            .at_stage("extraction_build"));
        }
        let push_radius = 0.45 * clearance;
        let diffeo = ExtractionDiffeo::build(net, push_radius, &mut alloc, cfg)
            .map_err(|e| e.at_stage("extraction_build"))?;
        diffeos.push(Some(diffeo));
    }

    Ok(ApproxHandle {
        partition,
        clusters: state.clusters,
        diffeos,
        eps,
        target: oracle.f,
        domain_mask: mask,
        config: cfg.clone(),
    })
}

/// psi and its gradient at x: at most one isolating region contains x; on
/// it the value is phi after that extraction and the gradient is the
/// adjoint Jacobian action applied to phi's gradient there. Everywhere
/// else psi is phi.
pub fn eval_psi(handle: &ApproxHandle, x: &SparseVec) -> Result<Jet> {
    let n_balls = handle.partition.len();
    match handle.locate_cluster(x).and_then(|n| {
        handle.diffeos[n].as_ref().map(|d| (n, d))
    }) {
        None => phi_jet(&handle.partition, x, n_balls),
        Some((_, diffeo)) => {
            let hx = diffeo.extract(x)?;
            let inner = phi_jet(&handle.partition, &hx, n_balls)?;
            let gradient = diffeo.jacobian_adjoint(x, &inner.gradient)?;
            Ok(Jet {
                value: inner.value,
                gradient,
            })
        }
    }
}

/// Separation of two disjoint compact nets: Urysohn quotient, built at an
/// internal accuracy that keeps the final deviation below 1/3, separating
/// level 1/2.
pub fn separate(
    c1: &CompactNet,
    c2: &CompactNet,
    region: &Ball,
    ambient_dim: usize,
    cfg: &EngineConfig,
) -> Result<(ApproxHandle, f64)> {
    let gap = c1
        .points
        .iter()
        .flat_map(|p| c2.points.iter().map(move |q| p.dist(q)))
        .fold(f64::INFINITY, f64::min)
        - c1.net_radius
        - c2.net_radius;
    if gap <= 0.0 {
        return Err(EngineError::NetsNotSeparated { gap });
    }
    let p1 = c1.points.clone();
    let p2 = c2.points.clone();
    let dist_to = |pts: &[SparseVec], x: &SparseVec| -> f64 {
        pts.iter().map(|p| x.dist(p)).fold(f64::INFINITY, f64::min)
    };
    let f = move |x: &SparseVec| -> f64 {
        let d1 = dist_to(&p1, x);
        let d2 = dist_to(&p2, x);
        d1 / (d1 + d2)
    };
    // The quotient is (1/gap)-Lipschitz; the construction runs at half the
    // wanted final accuracy, so the built psi stays within 1/3 of f.
    let eps_internal = 1.0 / 6.0;
    let delta = eps_internal * gap / 8.0;
    let oracle = TargetOracle {
        f: Box::new(f),
        modulus: ModulusOracle::new(move |_| delta),
    };
    let handle = build_psi(
        oracle,
        EpsMode::Constant(eps_internal),
        region,
        ambient_dim,
        cfg,
    )?;
    Ok((handle, 0.5))
}

/// A built open-support approximant: psi evaluates through the engine on
/// the covered interior slab and extends by zero elsewhere (in particular
/// off the closure of the open set).
pub struct SupportHandle {
    pub handle: ApproxHandle,
    pub open_set: RegionFn,
    pub boundary_cutoff: f64,
}

impl SupportHandle {
    pub fn eval(&self, x: &SparseVec) -> Jet {
        if !self.open_set.contains(x) {
            return Jet::constant(0.0);
        }
        match eval_psi(&self.handle, x) {
            Ok(jet) => jet,
            Err(_) => Jet::constant(0.0),
        }
    }
}

/// Open-support construction: target 2 dist(., complement), pointwise
/// accuracy a quarter of the distance, cover restricted to the part of the
/// region at least `boundary_cutoff` inside the open set. The finite
/// engine cannot chase the boundary (ball sizes shrink with the distance),
/// so the cutoff is the documented truncation.
pub fn support_function(
    open_set: RegionFn,
    region: &Ball,
    ambient_dim: usize,
    boundary_cutoff: f64,
    cfg: &EngineConfig,
) -> Result<SupportHandle> {
    assert!(boundary_cutoff > 0.0);
    let dist_f = open_set.distance_closure().ok_or_else(|| {
        EngineError::InvalidArgument(
            "open-support construction needs a cloneable region; use the ball variants".into(),
        )
    })?;
    let dist_eps = open_set.distance_closure().unwrap();
    let dist_modulus = open_set.distance_closure().unwrap();
    let dist_mask = open_set.distance_closure().unwrap();

    // f = 2 dist, eps(x) = dist(x)/4, so the final |psi - 2 dist| <= dist
    // squeezes psi into [dist, 3 dist]. The modulus folds the variable-eps
    // contract: f is 2-Lipschitz and must oscillate below eps(x)/8 within
    // radius 2 delta, giving delta = dist/128, which also sits far below
    // the alpha_x = dist/4 from the eps-oscillation condition.
    let f = Box::new(move |x: &SparseVec| 2.0 * dist_f(x)) as ScalarFn;
    let eps_fn = Box::new(move |x: &SparseVec| dist_eps(x) / 4.0) as ScalarFn;
    let modulus = ModulusOracle::new(move |x| (dist_modulus(x) / 128.0).max(1e-12));
    let cutoff = boundary_cutoff;
    let mask = Box::new(move |x: &SparseVec| dist_mask(x) >= cutoff) as MaskFn;

    let handle = build_psi_masked(
        TargetOracle { f, modulus },
        EpsMode::Variable(eps_fn),
        region,
        ambient_dim,
        cfg,
        Some(mask),
    )?;
    Ok(SupportHandle {
        handle,
        open_set,
        boundary_cutoff,
    })
}

/// Pass flags of one verification run, one per checked contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassFlags {
    pub approx_bound: bool,
    pub phi_bound: bool,
    pub two_point_bound: bool,
    pub no_critical_points: bool,
    pub identity_outside: bool,
    pub cluster_disjoint: bool,
    pub critical_containment: bool,
    pub roundtrip: bool,
    pub image_clearance: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.approx_bound
            && self.phi_bound
            && self.two_point_bound
            && self.no_critical_points
            && self.identity_outside
            && self.cluster_disjoint
            && self.critical_containment
            && self.roundtrip
            && self.image_clearance
    }
}

/// Tolerances a verification run was judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceEcho {
    pub approx_slack: f64,
    pub phi_slack: f64,
    pub identity_tol: f64,
    pub roundtrip_tol: f64,
    pub structural_gradient_floor: f64,
    pub low_gradient_threshold: f64,
    pub containment_radius: f64,
}

impl Default for ToleranceEcho {
    fn default() -> Self {
        ToleranceEcho {
            approx_slack: 1e-6,
            phi_slack: 1e-9,
            identity_tol: 1e-9,
            roundtrip_tol: 1e-8,
            structural_gradient_floor: 1e-10,
            low_gradient_threshold: 1e-8,
            containment_radius: 1e-4,
        }
    }
}

/// Everything a verification pass measures; pure data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub seed: u64,
    pub sup_error: f64,
    pub approx_violations: usize,
    pub phi_sup_error: f64,
    pub phi_violations: usize,
    pub two_point_max_excess: f64,
    pub min_gradient_norm: f64,
    pub min_phi_gradient_at_composed: f64,
    pub structural_failures: usize,
    pub identity_violations: usize,
    pub cluster_overlaps: usize,
    pub containment_misses: usize,
    pub roundtrip_max: f64,
    pub roundtrip_count: usize,
    pub image_clearance_min: f64,
    pub pass: PassFlags,
    pub tolerances: ToleranceEcho,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.pass.all()
    }

    /// One line per checked criterion.
    pub fn summary_lines(&self) -> Vec<String> {
        let fmt = |name: &str, ok: bool, detail: String| {
            format!(
                "{} {name}: {detail}",
                if ok { "PASS" } else { "FAIL" }
            )
        };
        vec![
            fmt(
                "approximation bound",
                self.pass.approx_bound,
                format!(
                    "sup|psi-f| = {:.3e}, violations {}",
                    self.sup_error, self.approx_violations
                ),
            ),
            fmt(
                "partition bound",
                self.pass.phi_bound,
                format!(
                    "sup|phi-f| = {:.3e}, violations {}",
                    self.phi_sup_error, self.phi_violations
                ),
            ),
            fmt(
                "two-point bound",
                self.pass.two_point_bound,
                format!("max excess = {:.3e}", self.two_point_max_excess),
            ),
            fmt(
                "no critical points",
                self.pass.no_critical_points,
                format!(
                    "min |grad psi| = {:.3e}, structural failures {}",
                    self.min_gradient_norm, self.structural_failures
                ),
            ),
            fmt(
                "identity outside regions",
                self.pass.identity_outside,
                format!("violations {}", self.identity_violations),
            ),
            fmt(
                "cluster disjointness",
                self.pass.cluster_disjoint,
                format!("overlaps {}", self.cluster_overlaps),
            ),
            fmt(
                "critical containment",
                self.pass.critical_containment,
                format!("misses {}", self.containment_misses),
            ),
            fmt(
                "round trips",
                self.pass.roundtrip,
                format!(
                    "max error = {:.3e} over {} trips",
                    self.roundtrip_max, self.roundtrip_count
                ),
            ),
            fmt(
                "image clearance",
                self.pass.image_clearance,
                format!("min = {:.3e}", self.image_clearance_min),
            ),
        ]
    }
}

/// Deterministic seeded verification of a built handle. Failures are
/// reported, never thrown.
pub fn verify(handle: &ApproxHandle, sample_count: usize, seed: u64) -> VerificationReport {
    let tol = ToleranceEcho::default();
    let region = handle.region().clone();
    let dim = handle.ambient_dim();
    let n_balls = handle.partition.len();

    let mut rng = rng_from_seed(seed);
    let mut samples: Vec<SparseVec> = Vec::with_capacity(sample_count);
    let mut attempts = 0;
    while samples.len() < sample_count && attempts < sample_count * 200 {
        attempts += 1;
        let x = sample_in_ball(&mut rng, &region, dim);
        if let Some(mask) = &handle.domain_mask {
            if !mask(&x) {
                continue;
            }
        }
        samples.push(x);
    }

    let mut report = VerificationReport {
        samples: samples.len(),
        seed,
        sup_error: 0.0,
        approx_violations: 0,
        phi_sup_error: 0.0,
        phi_violations: 0,
        two_point_max_excess: f64::NEG_INFINITY,
        min_gradient_norm: f64::INFINITY,
        min_phi_gradient_at_composed: f64::INFINITY,
        structural_failures: 0,
        identity_violations: 0,
        cluster_overlaps: 0,
        containment_misses: 0,
        roundtrip_max: 0.0,
        roundtrip_count: 0,
        image_clearance_min: f64::INFINITY,
        pass: PassFlags {
            approx_bound: true,
            phi_bound: true,
            two_point_bound: true,
            no_critical_points: true,
            identity_outside: true,
            cluster_disjoint: true,
            critical_containment: true,
            roundtrip: true,
            image_clearance: true,
        },
        tolerances: tol,
    };

    // Per-ball sample pools for the two-point bound.
    let mut ball_pools: Vec<Vec<usize>> = vec![Vec::new(); n_balls];

    for (i, x) in samples.iter().enumerate() {
        let fx = (handle.target)(x);
        let located = handle.locate_cluster(x);

        // Cluster disjointness.
        let hits = handle
            .clusters
            .iter()
            .filter(|c| c.isolating_region.contains(x))
            .count();
        if hits > 1 {
            report.cluster_overlaps += 1;
        }

        // phi bound.
        if let Ok(phi) = phi_jet(&handle.partition, x, n_balls) {
            let err = (phi.value - fx).abs();
            report.phi_sup_error = report.phi_sup_error.max(err);
            if err > handle.eps.at(x) + tol.phi_slack {
                report.phi_violations += 1;
            }
            // Critical containment of the partition function itself.
            if phi.gradient.norm() < tol.low_gradient_threshold {
                let near_net = handle.clusters.iter().any(|c| {
                    c.points
                        .iter()
                        .any(|p| p.dist(x) < tol.containment_radius)
                });
                if !near_net {
                    report.containment_misses += 1;
                }
            }
            // Structural factorization outside the isolating regions.
            if located.is_none() && phi.gradient.norm() <= tol.structural_gradient_floor {
                report.structural_failures += 1;
            }
        } else {
            // Region point not covered by the scalloped balls.
            report.phi_violations += 1;
        }

        // psi bound and gradient.
        match eval_psi(handle, x) {
            Ok(psi) => {
                let err = (psi.value - fx).abs();
                report.sup_error = report.sup_error.max(err);
                if err > handle.eps.psi_bound(x) + tol.approx_slack {
                    report.approx_violations += 1;
                }
                let gn = psi.gradient.norm();
                report.min_gradient_norm = report.min_gradient_norm.min(gn);
                if gn == 0.0 {
                    report.structural_failures += 1;
                }
            }
            Err(_) => {
                report.approx_violations += 1;
            }
        }

        // Structural check and image clearance inside an isolating region.
        if let Some(d) = located.and_then(|n| handle.diffeos[n].as_ref()) {
            if let Ok(hx) = d.extract(x) {
                if let Ok(inner) = phi_jet(&handle.partition, &hx, n_balls) {
                    let g = inner.gradient.norm();
                    report.min_phi_gradient_at_composed =
                        report.min_phi_gradient_at_composed.min(g);
                    if g <= tol.structural_gradient_floor {
                        report.structural_failures += 1;
                    }
                }
                for other in handle.diffeos.iter().flatten() {
                    report.image_clearance_min =
                        report.image_clearance_min.min(other.omega_clearance(&hx));
                }
            }
        }

        // Identity of every diffeomorphism outside its own region.
        for (m, diffeo) in handle.diffeos.iter().enumerate() {
            let diffeo = match diffeo {
                Some(d) => d,
                None => continue,
            };
            if located == Some(m) {
                continue;
            }
            if !handle.clusters[m].isolating_region.contains(x) {
                if let Ok(hx) = diffeo.extract(x) {
                    if hx.dist(x) > tol.identity_tol {
                        report.identity_violations += 1;
                    }
                } else {
                    report.identity_violations += 1;
                }
            }
        }

        // Round trips through the located cluster's diffeomorphism.
        if report.roundtrip_count < 100 {
            if let Some(d) = located.and_then(|n| handle.diffeos[n].as_ref()) {
                if let Ok(hx) = d.extract(x) {
                    if let Ok(back) = d.extract_inverse(&hx) {
                        report.roundtrip_max = report.roundtrip_max.max(back.dist(x));
                        report.roundtrip_count += 1;
                    }
                }
            }
        }

        for n in 0..n_balls {
            if ball_pools[n].len() < 24 && handle.partition.atlas.ball(n).contains(x) {
                ball_pools[n].push(i);
            }
        }
    }

    // Two-point bound on pairs sharing a carrier ball.
    for (n, pool) in ball_pools.iter().enumerate() {
        let y_n = &handle.partition.atlas.centers[n];
        let bound = match &handle.eps {
            EpsMode::Constant(e) => 2.0 * e,
            EpsMode::Variable(f) => 2.0 * f(y_n),
        };
        for (a, &i) in pool.iter().enumerate() {
            let phi_y = match phi_jet(&handle.partition, &samples[i], n_balls) {
                Ok(j) => j.value,
                Err(_) => continue,
            };
            for &j in pool.iter().skip(a + 1) {
                let fx = (handle.target)(&samples[j]);
                let excess = (phi_y - fx).abs() - bound;
                report.two_point_max_excess = report.two_point_max_excess.max(excess);
            }
        }
    }
    if report.two_point_max_excess == f64::NEG_INFINITY {
        report.two_point_max_excess = 0.0;
    }

    report.pass = PassFlags {
        approx_bound: report.approx_violations == 0,
        phi_bound: report.phi_violations == 0,
        two_point_bound: report.two_point_max_excess <= tol.phi_slack,
        no_critical_points: report.min_gradient_norm > 0.0 && report.structural_failures == 0,
        identity_outside: report.identity_violations == 0,
        cluster_disjoint: report.cluster_overlaps == 0,
        critical_containment: report.containment_misses == 0,
        roundtrip: report.roundtrip_max <= tol.roundtrip_tol,
        image_clearance: report.image_clearance_min > 0.0
            || report.image_clearance_min == f64::INFINITY,
    };
    if report.image_clearance_min == f64::INFINITY {
        report.image_clearance_min = f64::NAN;
    }
    report
}
