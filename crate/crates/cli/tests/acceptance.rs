//! Acceptance suite: every numbered criterion runs at its stated tolerance
//! and prints one pass/fail line (visible with `--nocapture`).

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use fatou_cli::scenario::Scenario;
use fatou_core::ergodic::{self, BirkhoffDirection};
use fatou_core::geometry::{koebe_distortion_factors, winding_number, Disk, SpherePoint};
use fatou_core::harmonic::{self, Backend, DomainKind, DomainSpec};
use fatou_core::pesin::{self, OrbitMode, RadiusPolicy};
use fatou_core::rng::substream;
use fatou_core::MapSpec;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load_scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    Scenario::parse(&text).expect("scenario parses")
}

fn run_in(name: &str, out: &tempfile::TempDir) -> fatou_cli::report::RunReport {
    let scenario = load_scenario(name);
    fatou_cli::run_scenario_in(&scenario, Some(&out.path().join("run"))).unwrap()
}

fn report_line(number: u32, name: &str, pass: bool) {
    println!(
        "criterion {number:02} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} ({name}) failed");
}

/// Escape rate G_c(0) = lim 2^{-n} log|f^n(0)|, telescoped to 1e-8; zero for
/// bounded critical orbits.
fn escape_rate(c0: Complex64) -> f64 {
    let mut z = Complex64::new(0.0, 0.0);
    let mut prev = 0.0f64;
    let mut weight = 1.0f64;
    for _ in 0..3000 {
        z = z * z + c0;
        weight *= 0.5;
        if z.norm() > 1e150 {
            return weight * z.norm().ln();
        }
        if z.norm() > 4.0 {
            let candidate = weight * z.norm().ln();
            if prev > 0.0 && (candidate - prev).abs() < 1e-8 {
                return candidate;
            }
            prev = candidate;
        }
    }
    0.0
}

#[test]
fn criterion_01_slit_plane_exponent() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("hmeasure_slit.toml", &tmp);
    let within_time = started.elapsed().as_secs_f64() <= 120.0;
    report_line(
        1,
        "slit-plane harmonic-measure exponent 0.50 ± 0.05 in ≤ 2 min",
        report.all_pass() && within_time,
    );
}

#[test]
fn criterion_02_sector_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("hmeasure_sector.toml", &tmp);
    report_line(2, "quarter-sector exponent 2.0 ± 0.2", report.all_pass());
}

#[test]
fn criterion_03_beurling_star_domains() {
    // Twenty random star-shaped sampled domains; targets of radius 0.1 and
    // 0.01 at boundary points; no violation of value − 3σ ≤ √(2·r_norm).
    let mut all_pass = true;
    for domain_idx in 0..20u64 {
        let mut rng = substream(300, domain_idx);
        let m = 192;
        let mut amps = [0.0f64; 4];
        let mut phases = [0.0f64; 4];
        let mut total = 0.0;
        for k in 0..4 {
            amps[k] = rng.gen_range(0.1..1.0);
            phases[k] = rng.gen_range(0.0..std::f64::consts::TAU);
            total += amps[k];
        }
        for a in &mut amps {
            *a *= 0.35 / total;
        }
        let radial = |theta: f64| {
            let mut r = 1.0;
            for k in 0..4 {
                r += amps[k] * ((k as f64 + 1.0) * theta + phases[k]).cos();
            }
            r
        };
        let boundary: Vec<Complex64> = (0..m)
            .map(|j| {
                let theta = std::f64::consts::TAU * j as f64 / m as f64;
                Complex64::from_polar(radial(theta), theta)
            })
            .collect();
        let pick = rng.gen_range(0..m);
        let targets = vec![
            Disk::new(boundary[pick], 0.1).unwrap(),
            Disk::new(boundary[(pick + m / 3) % m], 0.01).unwrap(),
        ];
        let dom = DomainSpec::new(
            DomainKind::SampledJordan { boundary },
            SpherePoint::Finite(c(0.0, 0.0)),
        )
        .unwrap();
        let rep = harmonic::beurling_bound_check(&dom, &targets, 20_000, 40 + domain_idx).unwrap();
        if !rep.pass {
            eprintln!("domain {domain_idx}: worst margin {}", rep.worst_margin);
            all_pass = false;
        }
    }
    report_line(3, "normalized √(2r) bound on 20 star domains", all_pass);
}

#[test]
fn criterion_04_unit_disk_exactness() {
    let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
    let mut pass = true;
    for r in [0.1, 0.05, 0.31] {
        let target = Disk::new(c(1.0, 0.0), r).unwrap();
        let exact = harmonic::estimate_disk_measure(&dom, &target, 0, 0, Backend::Riemann)
            .unwrap()
            .value;
        let formula = 2.0 / std::f64::consts::PI * (r / 2.0).asin();
        if (exact - formula).abs() > 1e-12 {
            pass = false;
        }
    }
    let target = Disk::new(c(1.0, 0.0), 0.1).unwrap();
    let exact = 2.0 / std::f64::consts::PI * (0.05f64).asin();
    let mc = harmonic::estimate_disk_measure(&dom, &target, 100_000, 17, Backend::Wos).unwrap();
    if (mc.value - exact).abs() > 3.0 * mc.std_error {
        eprintln!("wos {} vs exact {exact} (3σ = {})", mc.value, 3.0 * mc.std_error);
        pass = false;
    }
    report_line(4, "unit-disk riemann exactness and wos 3σ agreement", pass);
}

#[test]
fn criterion_05_quadrature_vs_birkhoff() {
    let g = MapSpec::Blaschke {
        zeros: vec![c(0.0, 0.0), c(0.5, 0.0)],
        rotation: c(1.0, 0.0),
    };
    let chi_q = ergodic::lyapunov_quadrature_circle(&g, 8192).unwrap().chi;
    let chi_b = ergodic::birkhoff_average(
        &g,
        Complex64::from_polar(1.0, 1.234),
        1_000_000,
        BirkhoffDirection::Forward,
        0,
    )
    .unwrap()
    .chi;
    let mut pass = (chi_q - chi_b).abs() <= 5e-3;
    for d in [2usize, 3] {
        let gq = ergodic::lyapunov_quadrature_circle(&MapSpec::power(d), 1024)
            .unwrap()
            .chi;
        let gb = ergodic::birkhoff_average(
            &MapSpec::power(d),
            Complex64::from_polar(1.0, 0.37),
            1000,
            BirkhoffDirection::Forward,
            0,
        )
        .unwrap()
        .chi;
        let ln_d = (d as f64).ln();
        if (gq - ln_d).abs() > 1e-10 || (gb - ln_d).abs() > 1e-10 {
            pass = false;
        }
    }
    report_line(5, "lyapunov quadrature vs Birkhoff (5e-3; z^d exact)", pass);
}

#[test]
fn criterion_06_green_term_lyapunov() {
    let c0 = c(0.5, 0.0);
    let f = MapSpec::quadratic(c0);
    let green = escape_rate(c0);
    let expected = 2.0f64.ln() + green;
    let x0 = f.repelling_fixed_point().unwrap();
    let mut acc = 0.0;
    let chains = 64;
    for k in 0..chains {
        acc += ergodic::birkhoff_average(&f, x0, 10_000, BirkhoffDirection::Backward, 600 + k)
            .unwrap()
            .chi;
    }
    let chi = acc / chains as f64;
    let rel = (chi - expected).abs() / expected;
    println!("  green term: chi = {chi}, expected = {expected}, rel err = {rel:.4}");
    report_line(6, "backward exponent = log 2 + G(0) within 2%", rel <= 0.02);
}

#[test]
fn criterion_07_tower_contraction() {
    let f = MapSpec::quadratic(c(-0.1, 0.0));
    let chi = 2.0f64.ln() + escape_rate(c(-0.1, 0.0));
    let cloud = f.boundary_cloud(2048, 71).unwrap();
    let mut pass = true;
    let mut worst_identity = 0.0f64;
    for t in 0..32usize {
        let x0 = cloud[t * 64];
        let orbit = pesin::sample_backward_orbit(
            &f,
            x0,
            40,
            OrbitMode::PlaneEqualWeight,
            700 + t as u64,
        )
        .unwrap();
        let tower =
            pesin::build_branch_tower(&f, &orbit, None, None, RadiusPolicy::default()).unwrap();
        for n in tower.n2..=tower.depth() {
            if tower.diam_certs[n] > tower.eta * tower.m.powi(n as i32) + 1e-12 {
                eprintln!("tower {t}: certificate above eta*M^n at level {n}");
                pass = false;
            }
        }
        let contraction = pesin::verify_contraction(&tower, chi).unwrap();
        if (contraction.slope + chi).abs() > 0.15 * chi {
            eprintln!("tower {t}: slope {} vs -chi {}", contraction.slope, -chi);
            pass = false;
        }
        let worst = pesin::verify_branch_identity(&f, &orbit, &tower, 8).unwrap();
        worst_identity = worst_identity.max(worst);
    }
    println!("  worst branch-identity residual {worst_identity:e}");
    if worst_identity >= 1e-8 {
        pass = false;
    }
    report_line(
        7,
        "32 towers depth 40: slope within 15%, certs ≤ ηM^n, identity < 1e-8",
        pass,
    );
}

#[test]
fn criterion_08_periodic_density_scan() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("periodic_quadratic.toml", &tmp);
    let within_time = started.elapsed().as_secs_f64() <= 60.0;
    report_line(
        8,
        "≥ 14 of 16 cover disks with residual < 1e-9, multiplier > 1, ≤ 1 min",
        report.all_pass() && within_time,
    );
}

#[test]
fn criterion_09_kac_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("return_doubling.toml", &tmp);
    let product = report.results["kac_product"].as_f64().unwrap();
    let pass = (product - 1.0).abs() <= 0.05;
    println!("  kac product = {product}");
    report_line(9, "doubling arc 2π/8: mean return × measure = 1 ± 5%", pass);
}

#[test]
fn criterion_10_return_exponent_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("return_doubling.toml", &tmp);
    let gap = report.results["identity_gap"].as_f64().unwrap();
    let lhs = report.results["identity_lhs"].as_f64().unwrap();
    println!("  induced exponent lhs = {lhs} (expect ≈ 8·log 2 = {})", 8.0 * 2.0f64.ln());
    report_line(10, "induced-map exponent identity within 2%", gap <= 0.02);
}

#[test]
fn criterion_11_rho_inclusions() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("rho_inclusions.toml", &tmp);
    let violations = report.results["violations"].as_u64().unwrap();
    report_line(
        11,
        "10^4 admissible configurations: zero inclusion violations",
        violations == 0,
    );
}

#[test]
fn criterion_12_thin_value_classifier() {
    let (pass_family, fail_family) = fatou_cli::experiments::thin_family_classification().unwrap();
    report_line(
        12,
        "thin-singular-value checker classifies both synthetic families",
        pass_family && fail_family,
    );
}

#[test]
fn criterion_13_backward_recurrence() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("inner_recurrence.toml", &tmp);
    report_line(
        13,
        "arc visits within a factor 2 of length/2π over 10^4 steps",
        report.all_pass(),
    );
}

#[test]
fn criterion_14_koebe_suite() {
    // Univalent catalog: identity on D(0,1), z + z²/2 on D(0, 0.9), and the
    // Koebe function z/(1-z)² on D(0, 0.99).
    type Holo = (fn(Complex64) -> Complex64, fn(Complex64) -> Complex64, f64);
    let identity: Holo = (|z| z, |_| c(1.0, 0.0), 1.0);
    let half_square: Holo = (|z| z + 0.5 * z * z, |z| c(1.0, 0.0) + z, 0.9);
    let koebe_fn: Holo = (
        |z| z / ((c(1.0, 0.0) - z) * (c(1.0, 0.0) - z)),
        |z| (c(1.0, 0.0) + z) / ((c(1.0, 0.0) - z).powi(3)),
        0.99,
    );
    let samples = 10_000usize;
    let mut pass = true;
    for (name, (phi, dphi, r)) in [
        ("identity", identity),
        ("z+z^2/2", half_square),
        ("koebe", koebe_fn),
    ] {
        // Quarter-theorem inclusion, witnessed by the winding number of the
        // image curve around points of the certified disk.
        let quarter = 0.25 * dphi(c(0.0, 0.0)).norm() * r;
        let polygon: Vec<Complex64> = (0..4096)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / 4096.0;
                phi(Complex64::from_polar(r, theta))
            })
            .collect();
        let center = phi(c(0.0, 0.0));
        let mut rng = substream(14, 1);
        for _ in 0..samples {
            let rr = quarter * rng.gen_range(0.0f64..1.0).sqrt() * 0.999;
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let p = center + Complex64::from_polar(rr, theta);
            if winding_number(&polygon, p) != 1 {
                eprintln!("{name}: quarter-disk point escaped the image");
                pass = false;
                break;
            }
        }
        // Distortion sandwich at λ = 1/2.
        let (lower, upper) = koebe_distortion_factors(0.5).unwrap();
        let base = dphi(c(0.0, 0.0)).norm();
        for k in 0..samples {
            let rr = 0.5 * r * ((k % 100) as f64 / 100.0).sqrt();
            let theta = std::f64::consts::TAU * (k as f64 + 0.3) / samples as f64;
            let z = Complex64::from_polar(rr, theta);
            let ratio = dphi(z).norm() / base;
            if ratio < lower - 1e-12 || ratio > upper + 1e-12 {
                eprintln!("{name}: distortion ratio {ratio} outside [{lower}, {upper}]");
                pass = false;
                break;
            }
        }
    }
    report_line(14, "quarter inclusion and λ=1/2 sandwich on the catalog", pass);
}

#[test]
fn criterion_15_stolz_containment() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("inner_stolz.toml", &tmp);
    report_line(
        15,
        "both doubling branches stay in Stolz angles (α = π/8, π/4)",
        report.all_pass(),
    );
}

#[test]
fn criterion_16_lambda_r_invariance() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_in("inner_invariance.toml", &tmp);
    report_line(
        16,
        "parabolic Möbius λ_R discrepancy < 1e-8",
        report.all_pass(),
    );
}

#[test]
fn criterion_17_determinism() {
    // Every acceptance scenario, run twice with the same seed, must emit
    // byte-identical samples.csv.
    let names = [
        "lyapunov_doubling.toml",
        "lyapunov_blaschke.toml",
        "backward_green.toml",
        "hmeasure_slit.toml",
        "hmeasure_sector.toml",
        "tower_quadratic.toml",
        "periodic_quadratic.toml",
        "return_doubling.toml",
        "rho_inclusions.toml",
        "inner_invariance.toml",
        "inner_stolz.toml",
        "inner_recurrence.toml",
    ];
    let mut pass = true;
    for name in names {
        let tmp_a = tempfile::tempdir().unwrap();
        let tmp_b = tempfile::tempdir().unwrap();
        let ra = run_in(name, &tmp_a);
        let rb = run_in(name, &tmp_b);
        assert_eq!(ra.scenario_digest, rb.scenario_digest);
        let csv_a = std::fs::read(tmp_a.path().join("run/samples.csv")).unwrap();
        let csv_b = std::fs::read(tmp_b.path().join("run/samples.csv")).unwrap();
        if csv_a != csv_b {
            eprintln!("{name}: samples.csv differs between identical runs");
            pass = false;
        }
    }
    report_line(17, "byte-identical samples.csv across replays", pass);
}
