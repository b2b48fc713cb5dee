//! Finite-support model of the separable Hilbert space: sparse coordinate
//! vectors, inner product, orthonormal affine frames, and fresh-coordinate
//! allocation.
//!
//! Coordinates form a single global integer index space (indices start at 1).
//! "Infinitely many dimensions" is modeled by handing out indices that were
//! never used before.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Coefficients with absolute value below this are never stored, so the
/// canonical form (and therefore equality) is well defined. This is a
/// storage floor, not a numerical tolerance.
pub const COEFF_FLOOR: f64 = 1e-300;

/// A vector with finite support: sorted (index, coefficient) pairs.
///
/// Invariants: indices strictly increasing, every coefficient finite and at
/// least `COEFF_FLOOR` in magnitude.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    entries: Vec<(u32, f64)>,
}

impl fmt::Debug for SparseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (idx, c)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{idx}:{c:.6}")?;
        }
        write!(f, "]")
    }
}

impl SparseVec {
    pub fn zero() -> Self {
        SparseVec::default()
    }

    /// Build from (index, coefficient) pairs; duplicate indices are summed,
    /// the result is canonicalized.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, c) in entries {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        let mut v = SparseVec { entries: out };
        v.canonicalize();
        v
    }

    /// A vector with dense coordinates 1..=coords.len().
    pub fn from_dense(coords: &[f64]) -> Self {
        SparseVec::from_pairs(
            coords
                .iter()
                .enumerate()
                .map(|(i, &c)| ((i + 1) as u32, c)),
        )
    }

    /// Unit coordinate vector e_index.
    pub fn unit(index: u32) -> Self {
        SparseVec::from_pairs([(index, 1.0)])
    }

    fn canonicalize(&mut self) {
        self.entries.retain(|&(_, c)| {
            assert!(c.is_finite(), "non-finite coefficient in SparseVec");
            c.abs() >= COEFF_FLOOR
        });
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Coefficient at an index (0.0 off the support).
    pub fn get(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut v = SparseVec {
            entries: self
                .entries
                .iter()
                .map(|&(i, c)| (i, c * factor))
                .collect(),
        };
        v.canonicalize();
        v
    }

    pub fn add(&self, other: &SparseVec) -> Self {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &SparseVec) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// self + factor * other, by merge join.
    pub fn add_scaled(&self, other: &SparseVec, factor: f64) -> Self {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, ca) = self.entries[i];
            let (ib, cb) = other.entries[j];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    out.push((ia, ca));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((ib, cb * factor));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((ia, ca + cb * factor));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.entries[i..]);
        out.extend(other.entries[j..].iter().map(|&(k, c)| (k, c * factor)));
        let mut v = SparseVec { entries: out };
        v.canonicalize();
        v
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, c)| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &SparseVec) -> f64 {
        self.sub(other).norm()
    }

    /// Largest coordinate index on the support, if any.
    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|&(i, _)| i)
    }
}

/// Inner product over the shared support (merge join).
pub fn dot(u: &SparseVec, v: &SparseVec) -> f64 {
    let (a, b) = (&u.entries, &v.entries);
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// An open ball of the ambient hilbertian norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: SparseVec,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: SparseVec, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Ball { center, radius }
    }

    pub fn contains(&self, x: &SparseVec) -> bool {
        x.dist(&self.center) < self.radius
    }

    /// Signed slack r - ||x - c||; positive inside.
    pub fn slack(&self, x: &SparseVec) -> f64 {
        self.radius - x.dist(&self.center)
    }
}

/// An affine subspace given by an origin and orthonormal directions.
/// `directions` may be empty (the frame is a single point).
#[derive(Debug, Clone)]
pub struct AffineFrame {
    pub origin: SparseVec,
    pub directions: Vec<SparseVec>,
}

impl AffineFrame {
    pub fn point(origin: SparseVec) -> Self {
        AffineFrame {
            origin,
            directions: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Frame coordinates of x, i.e. <d_k, x - origin>.
    pub fn project(&self, x: &SparseVec) -> Vec<f64> {
        let rel = x.sub(&self.origin);
        self.directions.iter().map(|d| dot(d, &rel)).collect()
    }

    /// The point origin + sum coords_k * d_k.
    pub fn point_at(&self, coords: &[f64]) -> SparseVec {
        let mut p = self.origin.clone();
        for (d, &c) in self.directions.iter().zip(coords) {
            p = p.add_scaled(d, c);
        }
        p
    }

    /// Distance from x to the affine subspace.
    pub fn residual(&self, x: &SparseVec) -> f64 {
        let coords = self.project(x);
        x.dist(&self.point_at(&coords))
    }

    /// Projection of a free vector onto the direction span (no origin shift).
    pub fn project_vector(&self, v: &SparseVec) -> SparseVec {
        let mut p = SparseVec::zero();
        for d in &self.directions {
            p = p.add_scaled(d, dot(d, v));
        }
        p
    }
}

/// Result of orthonormalizing a point list: the frame plus how many
/// dependent directions were dropped (callers may require full rank).
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame: AffineFrame,
    pub dropped: usize,
}

impl FrameResult {
    pub fn is_full_rank(&self) -> bool {
        self.dropped == 0
    }
}

/// Orthonormalize the differences (p_i - p_1) with modified Gram-Schmidt,
/// re-orthogonalizing once for stability. Directions of norm below
/// `drop_tol` after projection are dropped and counted.
pub fn affine_frame(points: &[SparseVec], drop_tol: f64) -> FrameResult {
    assert!(!points.is_empty(), "affine_frame needs at least one point");
    let origin = points[0].clone();
    let mut directions: Vec<SparseVec> = Vec::new();
    let mut dropped = 0;
    for p in &points[1..] {
        let mut v = p.sub(&origin);
        let scale = v.norm().max(1.0);
        for _ in 0..2 {
            for d in &directions {
                let c = dot(d, &v);
                v = v.add_scaled(d, -c);
            }
        }
        if v.norm() < drop_tol * scale {
            dropped += 1;
        } else {
            let n = v.norm();
            directions.push(v.scale(1.0 / n));
        }
    }
    FrameResult {
        frame: AffineFrame { origin, directions },
        dropped,
    }
}

/// Issues coordinate indices that have never been used before. Strictly
/// monotone; construction code owns it single-threaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexAllocator {
    next_index: u32,
}

impl IndexAllocator {
    /// Start issuing at `first` (use ambient_dim + 1 to keep e_1..e_d free).
    pub fn starting_at(first: u32) -> Self {
        assert!(first >= 1, "coordinate indices start at 1");
        IndexAllocator { next_index: first }
    }

    pub fn next_unissued(&self) -> u32 {
        self.next_index
    }

    pub fn fresh(&mut self, count: usize) -> Vec<u32> {
        assert!(count >= 1, "fresh_index count must be >= 1");
        let start = self.next_index;
        self.next_index = self
            .next_index
            .checked_add(count as u32)
            .expect("coordinate index space exhausted");
        (start..self.next_index).collect()
    }

    pub fn fresh_one(&mut self) -> u32 {
        self.fresh(1)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot_matches_hand_values() {
        let u = SparseVec::from_pairs([(1, 3.0), (2, 4.0)]);
        assert_eq!(dot(&u, &u), 25.0);
        assert_eq!(dot(&u, &SparseVec::zero()), 0.0);
        let a = SparseVec::unit(1);
        let b = SparseVec::unit(2);
        assert_eq!(dot(&a, &b), 0.0);
    }

    #[test]
    fn affine_frame_of_right_triangle() {
        let pts = vec![
            SparseVec::zero(),
            SparseVec::from_dense(&[1.0, 0.0]),
            SparseVec::from_dense(&[1.0, 1.0]),
        ];
        let res = affine_frame(&pts, 1e-10);
        assert!(res.is_full_rank());
        assert_eq!(res.frame.dim(), 2);
        assert!((res.frame.directions[0].get(1) - 1.0).abs() < 1e-12);
        assert!((res.frame.directions[1].get(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_frame_of_single_point() {
        let p = SparseVec::from_dense(&[2.0, -1.0]);
        let res = affine_frame(&[p.clone()], 1e-10);
        assert_eq!(res.frame.dim(), 0);
        assert!(res.is_full_rank());
        assert_eq!(res.frame.origin, p);
    }

    #[test]
    fn affine_frame_flags_collinear_points() {
        let pts = vec![
            SparseVec::zero(),
            SparseVec::from_dense(&[2.0]),
            SparseVec::from_dense(&[4.0]),
        ];
        let res = affine_frame(&pts, 1e-10);
        assert_eq!(res.frame.dim(), 1);
        assert_eq!(res.dropped, 1);
        // Independent oracle: the Gram determinant of the difference vectors
        // vanishes for collinear points.
        let d1 = pts[1].sub(&pts[0]);
        let d2 = pts[2].sub(&pts[0]);
        let gram_det = dot(&d1, &d1) * dot(&d2, &d2) - dot(&d1, &d2) * dot(&d1, &d2);
        assert!(gram_det.abs() < 1e-12);
    }

    #[test]
    fn fresh_indices_are_disjoint_and_monotone() {
        let mut alloc = IndexAllocator::starting_at(5);
        assert_eq!(alloc.fresh(2), vec![5, 6]);
        assert_eq!(alloc.next_unissued(), 7);
        let mut a1 = IndexAllocator::starting_at(1);
        assert_eq!(a1.fresh(1), vec![1]);
        let first = alloc.fresh(3);
        let second = alloc.fresh(3);
        assert!(first.iter().all(|i| !second.contains(i)));
    }

    fn arb_sparse(max_idx: u32, max_len: usize) -> impl Strategy<Value = SparseVec> {
        prop::collection::vec((1..=max_idx, -100.0f64..100.0), 0..=max_len)
            .prop_map(SparseVec::from_pairs)
    }

    proptest! {
        #[test]
        fn parallelogram_law(u in arb_sparse(40, 12), v in arb_sparse(40, 12)) {
            let lhs = u.add(&v).norm_sq() + u.sub(&v).norm_sq();
            let rhs = 2.0 * (u.norm_sq() + v.norm_sq());
            let scale = rhs.abs().max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn dot_is_symmetric_and_bilinear(
            u in arb_sparse(30, 10),
            v in arb_sparse(30, 10),
            w in arb_sparse(30, 10),
            a in -10.0f64..10.0,
        ) {
            let scale = 1.0 + u.norm() * (v.norm() + w.norm()) * (1.0 + a.abs());
            prop_assert!((dot(&u, &v) - dot(&v, &u)).abs() <= 1e-12 * scale);
            let lhs = dot(&u, &v.add_scaled(&w, a));
            let rhs = dot(&u, &v) + a * dot(&u, &w);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn canonicalization_is_idempotent(v in arb_sparse(30, 10)) {
            let again = SparseVec::from_pairs(v.iter());
            prop_assert_eq!(v, again);
        }

        #[test]
        fn frame_reconstructs_input_points(
            pts in prop::collection::vec(arb_sparse(10, 6), 1..5)
        ) {
            let res = affine_frame(&pts, 1e-10);
            for p in &pts {
                let coords = res.frame.project(p);
                let back = res.frame.point_at(&coords);
                let scale = p.norm().max(1.0);
                prop_assert!(back.dist(p) <= 1e-9 * scale);
            }
        }
    }
}
