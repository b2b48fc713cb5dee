//! Deterministic seeded sampling of balls in the ambient span
//! span{e_1..e_d}. All verification and construction-time checks draw from
//! here, so a run is reproducible from its seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::space::{Ball, SparseVec};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from the open ball `region` intersected with
/// span{e_1..e_d}: Gaussian direction, radius by the d-th-root law.
pub fn sample_in_ball(rng: &mut ChaCha8Rng, region: &Ball, ambient_dim: usize) -> SparseVec {
    assert!(ambient_dim >= 1);
    loop {
        let mut coords = vec![0.0f64; ambient_dim];
        let mut norm_sq = 0.0;
        for c in &mut coords {
            // Box-Muller from two uniforms.
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            *c = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            norm_sq += *c * *c;
        }
        if norm_sq == 0.0 {
            continue;
        }
        let u: f64 = rng.gen_range(0.0..1.0);
        let r = region.radius * u.powf(1.0 / ambient_dim as f64) * 0.999_999;
        let scale = r / norm_sq.sqrt();
        let mut v = region.center.clone();
        for (i, c) in coords.iter().enumerate() {
            v = v.add_scaled(&SparseVec::unit((i + 1) as u32), c * scale);
        }
        return v;
    }
}

/// A fixed-count deterministic sample of the region.
pub fn sample_region(seed: u64, region: &Ball, ambient_dim: usize, count: usize) -> Vec<SparseVec> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| sample_in_ball(&mut rng, region, ambient_dim))
        .collect()
}
