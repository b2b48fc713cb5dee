use nocrit_core::catalog::{CatalogEps, CatalogFunction};
use nocrit_core::cover::scalloped_membership;
use nocrit_core::pipeline::build_psi;
use nocrit_core::pou::phi_jet;
use nocrit_core::sampling::sample_region;
use nocrit_core::space::{Ball, SparseVec};
use nocrit_core::EngineConfig;

#[test]
fn probe_uncovered() {
    let f = CatalogFunction::Linear { coeffs: vec![0.05, 0.0] };
    let eps = CatalogEps::Constant { value: 0.1 };
    let region = Ball::new(SparseVec::zero(), 0.4);
    let handle = build_psi(f.target(&eps), eps.mode(), &region, 2, &EngineConfig::default()).unwrap();
    let pf = &handle.partition;
    let n = pf.len();
    let samples = sample_region(7, &region, 2, 800);
    let mut bad = 0;
    for x in &samples {
        if phi_jet(pf, x, n).is_err() {
            bad += 1;
            if bad <= 3 {
                eprintln!("uncovered x = {:?} (dist from center {})", x, x.norm());
                for k in 0..n {
                    let (inside, margin) = scalloped_membership(&pf.atlas, k, x).unwrap();
                    let rawdist = x.dist(&pf.atlas.centers[k]);
                    if rawdist < pf.atlas.radii[k] + 0.05 {
                        eprintln!("  ball {k}: r={:.4} dist={:.4} inside={} margin={:.3e}",
                            pf.atlas.radii[k], rawdist, inside, margin);
                    }
                }
            }
        }
    }
    eprintln!("total uncovered: {bad}/800");
    eprintln!("raw ball cover check:");
    let mut raw_bad = 0;
    for x in &samples {
        if !(0..n).any(|k| x.dist(&pf.atlas.centers[k]) < pf.atlas.radii[k]) {
            raw_bad += 1;
        }
    }
    eprintln!("raw uncovered: {raw_bad}/800");
    panic!("probe");
}
