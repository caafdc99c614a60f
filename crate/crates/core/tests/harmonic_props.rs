//! Distribution-level properties of the harmonic-measure estimators:
//! additivity over boundary partitions, monotonicity in the target, and
//! domain comparison.

use num_complex::Complex64;

use fatou_core::geometry::{Disk, SpherePoint};
use fatou_core::harmonic::{
    arc_measure_from, estimate_disk_measure, wos_hit_points, Backend, DomainKind, DomainSpec,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn partition_additivity_riemann_exact() {
    // Arc measures over any finite partition of the circle sum to one.
    let cuts = [0.0, 0.7, 1.9, 2.5, 4.0, 5.9];
    for basepoint in [c(0.0, 0.0), c(0.4, -0.3)] {
        let mut total = 0.0;
        for k in 0..cuts.len() {
            let a = cuts[k];
            let b = if k + 1 == cuts.len() {
                cuts[0] + std::f64::consts::TAU
            } else {
                cuts[k + 1]
            };
            total += arc_measure_from(basepoint, a, b);
        }
        assert!((total - 1.0).abs() < 1e-12, "sum = {total}");
    }
}

#[test]
fn partition_additivity_wos_within_joint_error() {
    let dom = DomainSpec::unit_disk(c(0.2, 0.1)).unwrap();
    let n = 20_000;
    let (hits, censored) = wos_hit_points(&dom, n, 5).unwrap();
    assert_eq!(censored, 0);
    let cuts = [0.0, 1.3, 2.2, 4.4];
    let mut total = 0.0;
    let mut joint_var = 0.0;
    for k in 0..cuts.len() {
        let a = cuts[k];
        let b = if k + 1 == cuts.len() {
            cuts[0] + std::f64::consts::TAU
        } else {
            cuts[k + 1]
        };
        let count = hits
            .iter()
            .filter(|z| {
                let t = (z.arg() - a).rem_euclid(std::f64::consts::TAU);
                t < (b - a).rem_euclid(std::f64::consts::TAU).max(1e-15)
            })
            .count();
        let p = count as f64 / hits.len() as f64;
        joint_var += p * (1.0 - p) / hits.len() as f64;
        total += p;
    }
    // Partition counts are exhaustive, so the sum is 1 exactly up to angular
    // edge rounding; keep the spec's 4-sigma joint budget as the bound.
    assert!((total - 1.0).abs() <= 4.0 * joint_var.sqrt() + 1e-9, "total = {total}");
}

#[test]
fn monotonicity_under_target_inclusion() {
    let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
    let small = Disk::new(c(1.0, 0.0), 0.2).unwrap();
    let large = Disk::new(c(1.0, 0.0), 0.5).unwrap();
    let a = estimate_disk_measure(&dom, &small, 20_000, 3, Backend::Wos).unwrap();
    let b = estimate_disk_measure(&dom, &large, 20_000, 3, Backend::Wos).unwrap();
    let joint = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!(a.value <= b.value + 3.0 * joint);
    // Exact backend is monotone outright.
    let ea = estimate_disk_measure(&dom, &small, 0, 0, Backend::Riemann).unwrap();
    let eb = estimate_disk_measure(&dom, &large, 0, 0, Backend::Riemann).unwrap();
    assert!(ea.value <= eb.value);
}

#[test]
fn comparison_of_nested_domains() {
    // V ⊂ U sharing the right boundary arc: a disk-with-flattened-left-side
    // inside the unit disk. Shared-arc targets get no more mass from V.
    let mut boundary = Vec::new();
    let m = 256;
    for k in 0..m {
        let theta = -std::f64::consts::FRAC_PI_2
            + std::f64::consts::PI * k as f64 / (m - 1) as f64;
        boundary.push(Complex64::from_polar(1.0, theta));
    }
    // Close the left side with a vertical chord through Re z = 0.
    for k in 1..m {
        let t = k as f64 / m as f64;
        boundary.push(c(0.0, 1.0 - 2.0 * t));
    }
    let v = DomainSpec::new(
        DomainKind::SampledJordan { boundary },
        SpherePoint::Finite(c(0.5, 0.0)),
    )
    .unwrap();
    let u = DomainSpec::unit_disk(c(0.5, 0.0)).unwrap();
    let target = Disk::new(c(1.0, 0.0), 0.3).unwrap();
    let ev = estimate_disk_measure(&v, &target, 20_000, 9, Backend::Wos).unwrap();
    let eu = estimate_disk_measure(&u, &target, 20_000, 11, Backend::Wos).unwrap();
    let joint = (ev.std_error.powi(2) + eu.std_error.powi(2)).sqrt();
    assert!(
        ev.value <= eu.value + 3.0 * joint,
        "omega_V = {} vs omega_U = {}",
        ev.value,
        eu.value
    );
}

#[test]
fn poly_basin_ray_measure_matches_arc_for_power_map() {
    // Basin of infinity of z^2 is the exterior disk; harmonic measure from
    // infinity of a boundary target is the normalized arc length.
    let dom = DomainSpec::new(
        DomainKind::PolyBasinOfInfinity { map: fatou_core::MapSpec::quadratic(c(0.0, 0.0)) },
        SpherePoint::Infinity,
    )
    .unwrap();
    let target = Disk::new(c(1.0, 0.0), 0.4).unwrap();
    let est = estimate_disk_measure(&dom, &target, 4000, 13, Backend::Wos).unwrap();
    let exact = 2.0 / std::f64::consts::PI * (0.2f64).asin();
    assert!(
        (est.value - exact).abs() <= 3.5 * est.std_error.max(1e-3),
        "ray estimate {} vs exact {exact}",
        est.value
    );
}
