//! Ball cover of the region of interest, radius perturbation keeping
//! sphere/affine-span intersections controlled, and scalloped-ball
//! membership.
//!
//! The engine covers a bounded region with finitely many balls; local
//! finiteness of everything downstream is then automatic. This is a
//! semantic restriction (a region of interest instead of the whole space),
//! not an approximation error.

use crate::config::EngineConfig;
use crate::error::{EngineError, Result};
use crate::linalg::{solve_affine, AffineSolution, Mat};
use crate::sampling::sample_region;
use crate::space::{affine_frame, Ball, IndexAllocator, SparseVec};

/// Continuity modulus of the target function: x -> delta_x > 0 such that
/// |f(y) - f(x)| stays within a quarter of the accuracy budget whenever
/// ||y - x|| <= 2 delta_x (variable-accuracy callers also fold their
/// alpha_x condition into this).
pub struct ModulusOracle {
    delta: Box<dyn Fn(&SparseVec) -> f64 + Send + Sync>,
}

impl ModulusOracle {
    pub fn new(delta: impl Fn(&SparseVec) -> f64 + Send + Sync + 'static) -> Self {
        ModulusOracle {
            delta: Box::new(delta),
        }
    }

    pub fn delta(&self, x: &SparseVec) -> f64 {
        let d = (self.delta)(x);
        assert!(d > 0.0 && d.is_finite(), "modulus must be positive, got {d}");
        d
    }
}

/// The cover data: centers y_n, raw radii s_n, perturbed radii r_n, and the
/// interleaved scallop parameters lambda_n / mu_n filled in by the
/// isolation induction.
#[derive(Debug, Clone)]
pub struct CoverAtlas {
    /// Perturbed centers y_n (each x_n plus a fresh-coordinate nudge).
    pub centers: Vec<SparseVec>,
    /// Radii s_n straight from the modulus oracle.
    pub raw_radii: Vec<f64>,
    /// Radii r_n in [s_n, 1.5 s_n]; equal to raw_radii until perturbation.
    pub radii: Vec<f64>,
    /// lambdas[k] is lambda for ball k+1 (0-based); ball 0 has none.
    pub lambdas: Vec<f64>,
    /// mus[k] is mu_{k+2} in 1-based terms: the value chosen after step k+1.
    pub mus: Vec<f64>,
    pub region: Ball,
    pub ambient_dim: usize,
}

impl CoverAtlas {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// lambda of ball n (0-based), defined for n >= 1 once assigned.
    pub fn lambda(&self, n: usize) -> Option<f64> {
        if n == 0 {
            None
        } else {
            self.lambdas.get(n - 1).copied()
        }
    }

    pub fn ball(&self, n: usize) -> Ball {
        Ball::new(self.centers[n].clone(), self.radii[n])
    }
}

/// Open scalloped ball B_n = B(y_n, r_n) minus the closed balls
/// B(y_j, lambda_n r_j), j < n.
#[derive(Debug, Clone, Copy)]
pub struct ScallopedBall<'a> {
    pub atlas: &'a CoverAtlas,
    pub index: usize,
}

impl ScallopedBall<'_> {
    pub fn contains(&self, x: &SparseVec) -> Result<bool> {
        scalloped_membership(self.atlas, self.index, x).map(|(inside, _)| inside)
    }
}

/// Membership and margin for the scalloped ball with index n (0-based).
/// The margin is the minimum slack over the active constraints, negative
/// outside.
pub fn scalloped_membership(
    atlas: &CoverAtlas,
    n: usize,
    x: &SparseVec,
) -> Result<(bool, f64)> {
    let mut margin = atlas.radii[n] - x.dist(&atlas.centers[n]);
    if n > 0 {
        let lambda = atlas
            .lambda(n)
            .ok_or(EngineError::LambdaUnassigned { index: n })?;
        for j in 0..n {
            let slack = x.dist(&atlas.centers[j]) - lambda * atlas.radii[j];
            margin = margin.min(slack);
        }
    }
    Ok((margin > 0.0, margin))
}

/// Greedy lattice cover of the region followed by the fresh-coordinate
/// perturbation of the centers. Returned radii are still the raw s_n.
pub fn build_cover(
    oracle: &ModulusOracle,
    region: &Ball,
    ambient_dim: usize,
    alloc: &mut IndexAllocator,
    cfg: &EngineConfig,
) -> Result<CoverAtlas> {
    build_cover_masked(oracle, region, ambient_dim, alloc, cfg, None)
}

/// Like `build_cover`, but restricted to the part of the region where the
/// mask holds (used to cover the interior of an open set away from its
/// boundary).
pub fn build_cover_masked(
    oracle: &ModulusOracle,
    region: &Ball,
    ambient_dim: usize,
    alloc: &mut IndexAllocator,
    cfg: &EngineConfig,
    mask: Option<&dyn Fn(&SparseVec) -> bool>,
) -> Result<CoverAtlas> {
    assert!(ambient_dim >= 1, "ambient_dim must be at least 1");
    assert!(
        region.radius.is_finite(),
        "region radius must be finite"
    );
    let sqrt_d = (ambient_dim as f64).sqrt();
    let admit = |p: &SparseVec| mask.map_or(true, |m| m(p));

    // Lattice spacing: min delta over the lattice, divided by 2 sqrt(d) so
    // that covering lattice points covers everything between them. The
    // minimum depends on the lattice, so refine until it stabilizes.
    let mut delta_min = oracle.delta(&region.center);
    let mut spacing = delta_min / (2.0 * sqrt_d);
    for _ in 0..8 {
        let mut new_min = delta_min;
        visit_lattice(region, ambient_dim, spacing, |p| {
            if admit(p) {
                new_min = new_min.min(oracle.delta(p));
            }
            true
        });
        let new_spacing = new_min / (2.0 * sqrt_d);
        delta_min = new_min;
        if new_spacing >= spacing * 0.999 {
            spacing = new_spacing;
            break;
        }
        spacing = new_spacing;
    }
    // Greedy scan in lattice order: keep a lattice point as a center when
    // no existing half-ball covers it.
    let mut centers_raw: Vec<SparseVec> = Vec::new();
    let mut raw_radii: Vec<f64> = Vec::new();
    let mut budget_hit: Option<SparseVec> = None;
    visit_lattice(region, ambient_dim, spacing, |p| {
        if !admit(p) {
            return true;
        }
        let covered = centers_raw
            .iter()
            .zip(&raw_radii)
            .any(|(c, &s)| p.dist(c) < s / 2.0);
        if !covered {
            if centers_raw.len() >= cfg.max_centers {
                budget_hit = Some(p.clone());
                return false;
            }
            raw_radii.push(oracle.delta(p));
            centers_raw.push(p.clone());
        }
        true
    });
    if let Some(witness) = budget_hit {
        return Err(EngineError::CoverBudgetExceeded {
            max_centers: cfg.max_centers,
            witness,
        });
    }

    // Repair pass: seeded region samples must live in some half-ball.
    let samples = sample_region(cfg.build_seed, region, ambient_dim, cfg.build_samples);
    for p in &samples {
        if !admit(p) {
            continue;
        }
        let covered = centers_raw
            .iter()
            .zip(&raw_radii)
            .any(|(c, &s)| p.dist(c) < s / 2.0);
        if !covered {
            if centers_raw.len() >= cfg.max_centers {
                return Err(EngineError::CoverBudgetExceeded {
                    max_centers: cfg.max_centers,
                    witness: p.clone(),
                });
            }
            raw_radii.push(oracle.delta(p));
            centers_raw.push(p.clone());
        }
    }

    if centers_raw.is_empty() {
        // Unmasked builds always keep the region center, so this only
        // fires when a mask excludes the whole region.
        return Err(EngineError::EmptyRegionIntersection);
    }

    // Fresh-coordinate perturbation enforcing linear independence while
    // staying inside B(x_n, s_n / 2).
    let centers: Vec<SparseVec> = centers_raw
        .iter()
        .zip(&raw_radii)
        .enumerate()
        .map(|(n, (x, &s))| {
            let tau = (s / 4.0).min(0.5f64.powi(n as i32 + 1));
            let idx = alloc.fresh_one();
            x.add_scaled(&SparseVec::unit(idx), tau)
        })
        .collect();

    Ok(CoverAtlas {
        centers,
        radii: raw_radii.clone(),
        raw_radii,
        lambdas: Vec::new(),
        mus: Vec::new(),
        region: region.clone(),
        ambient_dim,
    })
}

/// Walk the lattice of the given spacing over region in span{e_1..e_d} in
/// lexicographic order. The visitor returns false to stop early.
fn visit_lattice(
    region: &Ball,
    ambient_dim: usize,
    spacing: f64,
    mut visit: impl FnMut(&SparseVec) -> bool,
) {
    assert!(spacing > 0.0 && spacing.is_finite());
    let steps = (region.radius / spacing).ceil() as i64;
    let mut offsets = vec![-steps; ambient_dim];
    'outer: loop {
        let mut p = region.center.clone();
        let mut dist_sq = 0.0;
        for (k, &m) in offsets.iter().enumerate() {
            let shift = m as f64 * spacing;
            dist_sq += shift * shift;
            if shift != 0.0 {
                p = p.add_scaled(&SparseVec::unit((k + 1) as u32), shift);
            }
        }
        if dist_sq < region.radius * region.radius && !visit(&p) {
            return;
        }
        // Lexicographic increment.
        for k in (0..ambient_dim).rev() {
            offsets[k] += 1;
            if offsets[k] <= steps {
                continue 'outer;
            }
            offsets[k] = -steps;
        }
        break;
    }
}

/// All points of the intersection of the listed spheres with the affine
/// span of the listed centers.
///
/// In frame coordinates every sphere is ||c - p_k||^2 + q_k = r_k^2;
/// subtracting the first gives linear constraints, the remaining quadratic
/// is solved in closed form on the affine solution set. Only real
/// solutions are returned (an empty list is a valid outcome).
pub fn sphere_affine_intersections(
    atlas: &CoverAtlas,
    sphere_indices: &[usize],
    span_indices: &[usize],
    cfg: &EngineConfig,
) -> Result<Vec<SparseVec>> {
    if sphere_indices.is_empty() {
        return Err(EngineError::InvalidArgument(
            "need at least one sphere".into(),
        ));
    }
    for &i in sphere_indices.iter().chain(span_indices) {
        if i >= atlas.len() {
            return Err(EngineError::InvalidArgument(format!(
                "ball index {i} out of range"
            )));
        }
    }
    let extends = span_indices.len() <= sphere_indices.len() + 1
        && sphere_indices.iter().all(|i| span_indices.contains(i));
    if !extends {
        return Err(EngineError::InvalidArgument(
            "span must contain the sphere indices and extend them by at most one".into(),
        ));
    }

    let span_points: Vec<SparseVec> = span_indices
        .iter()
        .map(|&i| atlas.centers[i].clone())
        .collect();
    let frame_res = affine_frame(&span_points, cfg.frame_drop_tol);
    if !frame_res.is_full_rank() {
        return Err(EngineError::DegenerateFrame);
    }
    let frame = frame_res.frame;
    let dim = frame.dim();

    // Per-sphere frame data.
    let mut proj = Vec::with_capacity(sphere_indices.len());
    let mut rhs_w = Vec::with_capacity(sphere_indices.len());
    for &k in sphere_indices {
        let p = frame.project(&atlas.centers[k]);
        let q = frame.residual(&atlas.centers[k]).powi(2);
        let norm_p: f64 = p.iter().map(|v| v * v).sum();
        let r = atlas.radii[k];
        rhs_w.push(r * r - q - norm_p);
        proj.push(p);
    }

    // Pairwise subtraction of sphere equations: 2 <c, p_k - p_1> = w_1 - w_k.
    let nrows = sphere_indices.len() - 1;
    let mut a = Mat::zeros(nrows.max(1), dim.max(1));
    let mut b = vec![0.0; nrows.max(1)];
    if nrows == 0 {
        // No linear part; encode 0 = 0 so the solver returns the full space.
        a = Mat::zeros(1, dim.max(1));
        b = vec![0.0];
    } else {
        for row in 0..nrows {
            for c in 0..dim {
                a.set(row, c, 2.0 * (proj[row + 1][c] - proj[0][c]));
            }
            b[row] = rhs_w[0] - rhs_w[row + 1];
        }
    }

    let (particular, nullspace) = match solve_affine(&a, &b, 1e-12) {
        AffineSolution::Inconsistent => return Ok(Vec::new()),
        AffineSolution::Solutions {
            particular,
            nullspace,
        } => (particular, nullspace),
    };
    let particular = &particular[..dim.min(particular.len())];

    // Residual quadratic from sphere 1: |c|^2 - 2 <c, p_1> = w_1.
    let quad = |c: &[f64]| -> f64 {
        let norm: f64 = c.iter().map(|v| v * v).sum();
        let cp: f64 = c.iter().zip(&proj[0]).map(|(x, y)| x * y).sum();
        norm - 2.0 * cp - rhs_w[0]
    };

    let effective_null: Vec<&Vec<f64>> = nullspace
        .iter()
        .filter(|v| v.len() >= dim && dim > 0)
        .collect();

    let mut points = Vec::new();
    match (dim, effective_null.len()) {
        (0, _) => {
            // Frame is a single point.
            if quad(&[]).abs() <= cfg.sphere_margin {
                points.push(frame.origin.clone());
            }
        }
        (_, 0) => {
            if quad(particular).abs()
                <= cfg.sphere_margin * (1.0 + rhs_w[0].abs())
            {
                points.push(frame.point_at(particular));
            }
        }
        (_, 1) => {
            let dir = effective_null[0];
            // (c0 + u d) quadratic: u^2 + 2 B u + C = 0 with |d| = 1.
            let bcoef: f64 = dir
                .iter()
                .zip(particular.iter().zip(&proj[0]))
                .map(|(d, (c, p))| d * (c - p))
                .sum();
            let ccoef = quad(particular);
            let disc = bcoef * bcoef - ccoef;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let mut us = vec![-bcoef + sq];
                if sq > 0.0 {
                    us.push(-bcoef - sq);
                }
                for u in us {
                    let c: Vec<f64> = particular
                        .iter()
                        .zip(dir)
                        .map(|(p, d)| p + u * d)
                        .collect();
                    points.push(frame.point_at(&c));
                }
            }
        }
        _ => return Err(EngineError::DegenerateFrame),
    }
    Ok(points)
}

/// Inductively choose r_n in [s_n, 1.5 s_n] away from every forbidden
/// distance: the sphere/span intersection points of all earlier subsets
/// (extended by the new center) and all center-to-center distances.
/// Deterministic scan; incidences re-verified afterwards.
pub fn perturb_radii(mut atlas: CoverAtlas, cfg: &EngineConfig) -> Result<CoverAtlas> {
    let n_total = atlas.len();
    for n in 0..n_total {
        let s = atlas.raw_radii[n];
        let mut forbidden: Vec<f64> = Vec::new();
        for j in 0..n_total {
            if j != n {
                forbidden.push(atlas.centers[j].dist(&atlas.centers[n]));
            }
        }
        // Paper's M set: intersection points over earlier subsets. A
        // subset with two spheres that do not meet has empty intersection,
        // so only cliques of the pairwise-intersection graph contribute.
        let mut m_points: Vec<SparseVec> = Vec::new();
        for subset in sphere_cliques(&atlas, n, cfg.sphere_subset_cap) {
            let mut span = subset.clone();
            span.push(n);
            let pts = sphere_affine_intersections(&atlas, &subset, &span, cfg)?;
            for z in pts {
                forbidden.push(z.dist(&atlas.centers[n]));
                m_points.push(z);
            }
        }

        let k = cfg.radius_scan_k;
        let margin = cfg.radius_scan_gap * (0.5 * s);
        let chosen = (0..=k)
            .map(|i| s * (1.0 + i as f64 / (2.0 * k as f64)))
            .find(|r| forbidden.iter().all(|f| (r - f).abs() > margin));
        let r = chosen.ok_or(EngineError::RadiusScanFailed {
            index: n,
            lo: s,
            hi: 1.5 * s,
        })?;
        atlas.radii[n] = r;

        // Re-verify the lemma's postconditions with the new sphere included.
        for z in &m_points {
            let d = (z.dist(&atlas.centers[n]) - r).abs();
            if d <= cfg.sphere_margin {
                return Err(EngineError::SphereIncidence {
                    index: n,
                    distance: d,
                });
            }
        }
        for j in 0..n_total {
            if j != n {
                let d = (atlas.centers[j].dist(&atlas.centers[n]) - r).abs();
                if d <= cfg.sphere_margin {
                    return Err(EngineError::SphereIncidence {
                        index: n,
                        distance: d,
                    });
                }
            }
        }
    }
    Ok(atlas)
}

/// Nonempty subsets of {0..n-1} of size at most `cap` whose spheres
/// pairwise intersect (two spheres with |r_i - r_j| < ||c_i - c_j|| <
/// r_i + r_j failing on either side cannot meet, so subsets containing
/// such a pair contribute nothing).
pub fn sphere_cliques(atlas: &CoverAtlas, n: usize, cap: usize) -> Vec<Vec<usize>> {
    let meet = |i: usize, j: usize| -> bool {
        let d = atlas.centers[i].dist(&atlas.centers[j]);
        let (ri, rj) = (atlas.radii[i], atlas.radii[j]);
        d <= ri + rj && d >= (ri - rj).abs()
    };
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while let Some(c) = frontier.pop() {
        cliques.push(c.clone());
        if c.len() >= cap {
            continue;
        }
        let last = *c.last().unwrap();
        for next in (last + 1)..n {
            if c.iter().all(|&i| meet(i, next)) {
                let mut bigger = c.clone();
                bigger.push(next);
                frontier.push(bigger);
            }
        }
    }
    cliques.sort();
    cliques
}

/// Nonempty subsets of {0..n-1} of size at most `cap`, by size then
/// lexicographic order.
pub fn subsets_up_to(n: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let cap = cap.min(n);
    for size in 1..=cap {
        let mut idx: Vec<usize> = (0..size).collect();
        'combos: loop {
            out.push(idx.clone());
            // Advance to the next size-`size` combination of {0..n-1}.
            let mut i = size;
            while i > 0 {
                i -= 1;
                if idx[i] < i + n - size {
                    idx[i] += 1;
                    for j in (i + 1)..size {
                        idx[j] = idx[j - 1] + 1;
                    }
                    continue 'combos;
                }
            }
            break;
        }
    }
    out
}
