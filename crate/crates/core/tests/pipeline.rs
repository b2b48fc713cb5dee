//! End-to-end pipeline checks on small instances.

use nocrit_core::catalog::{CatalogEps, CatalogFunction};
use nocrit_core::negligibility::CompactNet;
use nocrit_core::pipeline::{
    build_psi, eval_psi, separate, support_function, verify, EpsMode, RegionFn,
};
use nocrit_core::space::{Ball, SparseVec};
use nocrit_core::EngineConfig;

fn cfg() -> EngineConfig {
    EngineConfig::default()
}

#[test]
fn constant_function_single_ball() {
    let f = CatalogFunction::Constant { value: 0.7 };
    let eps = CatalogEps::Constant { value: 0.5 };
    let region = Ball::new(SparseVec::zero(), 0.2);
    let handle = build_psi(f.target(&eps), eps.mode(), &region, 2, &cfg()).unwrap();
    assert_eq!(handle.partition.len(), 1, "one ball should suffice");
    assert_eq!(handle.clusters.len(), 1);
    let report = verify(&handle, 500, 42);
    eprintln!("--- constant instance ---");
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    assert!(report.all_pass(), "{report:#?}");
    assert!(report.sup_error <= 1.0 + 1e-6);
}

#[test]
fn linear_function_multi_ball() {
    let f = CatalogFunction::Linear {
        coeffs: vec![0.05, 0.0],
    };
    let eps = CatalogEps::Constant { value: 0.1 };
    let region = Ball::new(SparseVec::zero(), 0.4);
    let handle = build_psi(f.target(&eps), eps.mode(), &region, 2, &cfg()).unwrap();
    eprintln!("balls: {}", handle.partition.len());
    assert!(handle.partition.len() >= 2, "want a multi-ball instance");
    let report = verify(&handle, 800, 7);
    eprintln!("--- linear instance ---");
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    assert!(report.all_pass(), "{report:#?}");
}

#[test]
fn variable_eps_bound() {
    let f = CatalogFunction::Linear {
        coeffs: vec![0.02],
    };
    let eps = CatalogEps::LinearGrowth { base: 0.1 };
    let region = Ball::new(SparseVec::zero(), 0.4);
    let handle = build_psi(f.target(&eps), eps.mode(), &region, 1, &cfg()).unwrap();
    let report = verify(&handle, 600, 11);
    eprintln!("--- variable-eps instance ---");
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    assert!(report.all_pass(), "{report:#?}");
}

#[test]
fn determinism_of_reports() {
    let f = CatalogFunction::Constant { value: 0.0 };
    let eps = CatalogEps::Constant { value: 0.5 };
    let region = Ball::new(SparseVec::zero(), 0.3);
    let handle = build_psi(f.target(&eps), eps.mode(), &region, 1, &cfg()).unwrap();
    let a = verify(&handle, 300, 5);
    let b = verify(&handle, 300, 5);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let c = verify(&handle, 300, 6);
    assert_ne!(format!("{a:?}"), format!("{c:?}"));
}

#[test]
fn tampered_cluster_region_is_detected() {
    let f = CatalogFunction::Linear {
        coeffs: vec![0.05, 0.0],
    };
    let eps = CatalogEps::Constant { value: 0.1 };
    let region = Ball::new(SparseVec::zero(), 0.4);
    let mut handle = build_psi(f.target(&eps), eps.mode(), &region, 2, &cfg()).unwrap();
    let baseline = verify(&handle, 600, 13);
    assert!(baseline.all_pass());
    // Shrink one isolating region below its cluster.
    let victim = handle
        .clusters
        .iter()
        .position(|c| !c.points.is_empty())
        .unwrap();
    handle.clusters[victim].isolating_region.ball.radius *= 0.02;
    handle.clusters[victim].isolating_region.extra = None;
    let tampered = verify(&handle, 600, 13);
    assert!(
        tampered.identity_violations > 0 || !tampered.pass.critical_containment,
        "tampering went unnoticed: {tampered:#?}"
    );
}

#[test]
fn separation_sign_contract() {
    let c1 = CompactNet::new(vec![SparseVec::zero()], 0.0);
    let c2 = CompactNet::new(vec![SparseVec::from_dense(&[4.0])], 0.0);
    let region = Ball::new(SparseVec::from_dense(&[2.0]), 2.3);
    let mut config = cfg();
    config.max_centers = 192;
    let (handle, level) = separate(&c1, &c2, &region, 1, &config).unwrap();
    assert_eq!(level, 0.5);
    for p in &c1.points {
        let jet = eval_psi(&handle, p).unwrap();
        assert!(jet.value < level, "psi({p:?}) = {}", jet.value);
    }
    for p in &c2.points {
        let jet = eval_psi(&handle, p).unwrap();
        assert!(jet.value > level, "psi({p:?}) = {}", jet.value);
    }
    // Swap flips the contract.
    let (swapped, _) = separate(&c2, &c1, &region, 1, &config).unwrap();
    let jet = eval_psi(&swapped, &c1.points[0]).unwrap();
    assert!(jet.value > level);
}

#[test]
fn support_function_squeeze() {
    let open = RegionFn::BallRegion(Ball::new(SparseVec::zero(), 1.0));
    let region = Ball::new(SparseVec::zero(), 1.0);
    let support = support_function(open, &region, 1, 0.9, &cfg()).unwrap();
    eprintln!("support balls: {}", support.handle.partition.len());
    // Interior samples: dist <= psi <= 3 dist, gradient nonzero.
    let mut exercised = 0;
    for k in 0..200 {
        let x = SparseVec::from_dense(&[-0.099 + 0.001 * k as f64]);
        let d = support.open_set.boundary_distance(&x);
        if d < support.boundary_cutoff {
            continue;
        }
        let jet = support.eval(&x);
        assert!(jet.value >= d - 1e-9, "lower squeeze at {x:?}");
        assert!(jet.value <= 3.0 * d + 1e-9, "upper squeeze at {x:?}");
        assert!(jet.gradient.norm() > 0.0);
        exercised += 1;
    }
    assert!(exercised >= 50, "only {exercised} interior samples");
    // Off the closure psi is exactly zero; boundary sequences decay.
    let outside = SparseVec::from_dense(&[1.5]);
    assert_eq!(support.eval(&outside).value, 0.0);
    for k in 1..=20 {
        let x = SparseVec::from_dense(&[1.0 - 0.5f64.powi(k)]);
        let d = support.open_set.boundary_distance(&x);
        let v = support.eval(&x).value;
        assert!(v <= 3.0 * d + 1e-9);
    }
}
