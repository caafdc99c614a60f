//! Harmonic-measure estimation for planar domains.
//!
//! Two backends: exact boundary-arc measure through the known conformal map
//! of the domain kind (`Riemann`), and walk-on-spheres Brownian hitting
//! (`Wos`). For polynomial basins of infinity the hitting estimate is
//! replaced by external-ray pushforward sampling, which realizes the same
//! measure. Validators cover the `√(2r)` bound after the standard
//! normalization and power-law decay fitting.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{winding_number, Disk, GeometryError, MobiusTransform, SpherePoint};
use crate::maps::MapSpec;
use crate::rng::substream;

/// Walk-on-spheres absorption shell.
pub const WOS_SHELL: f64 = 1e-6;
/// Per-walk step cap; walks that exceed it are counted as censored.
pub const WOS_MAX_STEPS: usize = 100_000;

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("basepoint must lie strictly inside the domain")]
    BasepointOutside,
    #[error("sector half-angle parameter must lie in (0, 1], got {0}")]
    BadSectorAngle(f64),
    #[error("sampled boundary needs at least 3 vertices")]
    DegenerateBoundary,
    #[error("the {backend:?} backend is unavailable for this domain kind")]
    BackendUnavailable { backend: Backend },
    #[error("decay fit needs at least 4 strictly decreasing radii")]
    BadRadii,
    #[error("decay fit requires positive values, got {0}")]
    NonPositiveValue(f64),
    #[error("shrinking-target ratio must satisfy 0 < t < 1, got {0}")]
    BadRatio(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("map error: {0}")]
    Map(#[from] crate::maps::MapError),
    #[error("basepoint for this domain kind must be {expected}")]
    WrongBasepointKind { expected: &'static str },
}

/// Estimation backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Riemann,
    Wos,
}

/// Supported domain kinds.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    UnitDisk,
    /// `{ |Arg z| < π·alpha }` with `alpha ∈ (0, 1]`; `alpha = 1` is the
    /// slit plane.
    Sector { alpha: f64 },
    /// `ℂ ∖ (−∞, 0]`.
    SlitPlane,
    /// Basin of infinity of a polynomial; measured from infinity.
    PolyBasinOfInfinity { map: MapSpec },
    /// Jordan domain given by a closed boundary polyline.
    SampledJordan { boundary: Vec<Complex64> },
}

/// A domain together with its basepoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub basepoint: SpherePoint,
}

/// A harmonic-measure value with its sampling error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub backend: Backend,
    pub censored: usize,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, basepoint: SpherePoint) -> Result<DomainSpec, HarmonicError> {
        match (&kind, basepoint) {
            (DomainKind::PolyBasinOfInfinity { .. }, SpherePoint::Infinity) => {}
            (DomainKind::PolyBasinOfInfinity { .. }, _) => {
                return Err(HarmonicError::WrongBasepointKind { expected: "infinity" })
            }
            (_, SpherePoint::Infinity) => {
                return Err(HarmonicError::WrongBasepointKind { expected: "finite" })
            }
            (DomainKind::UnitDisk, SpherePoint::Finite(b)) => {
                if b.norm() >= 1.0 {
                    return Err(HarmonicError::BasepointOutside);
                }
            }
            (DomainKind::Sector { alpha }, SpherePoint::Finite(b)) => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(HarmonicError::BadSectorAngle(*alpha));
                }
                if b.norm() == 0.0 || b.arg().abs() >= std::f64::consts::PI * alpha {
                    return Err(HarmonicError::BasepointOutside);
                }
            }
            (DomainKind::SlitPlane, SpherePoint::Finite(b)) => {
                if b.im == 0.0 && b.re <= 0.0 {
                    return Err(HarmonicError::BasepointOutside);
                }
            }
            (DomainKind::SampledJordan { boundary }, SpherePoint::Finite(b)) => {
                if boundary.len() < 3 {
                    return Err(HarmonicError::DegenerateBoundary);
                }
                if winding_number(boundary, b) == 0 || distance_to_polyline(boundary, b).0 <= 0.0 {
                    return Err(HarmonicError::BasepointOutside);
                }
            }
        }
        Ok(DomainSpec { kind, basepoint })
    }

    pub fn unit_disk(basepoint: Complex64) -> Result<DomainSpec, HarmonicError> {
        DomainSpec::new(DomainKind::UnitDisk, SpherePoint::Finite(basepoint))
    }

    pub fn slit_plane(basepoint: Complex64) -> Result<DomainSpec, HarmonicError> {
        DomainSpec::new(DomainKind::SlitPlane, SpherePoint::Finite(basepoint))
    }

    pub fn sector(alpha: f64, basepoint: Complex64) -> Result<DomainSpec, HarmonicError> {
        DomainSpec::new(DomainKind::Sector { alpha }, SpherePoint::Finite(basepoint))
    }

    fn finite_basepoint(&self) -> Complex64 {
        match self.basepoint {
            SpherePoint::Finite(b) => b,
            SpherePoint::Infinity => unreachable!("validated at construction"),
        }
    }

    /// Distance to the boundary and the nearest boundary point.
    pub fn boundary_distance(&self, z: Complex64) -> (f64, Complex64) {
        match &self.kind {
            DomainKind::UnitDisk => {
                let r = z.norm();
                if r == 0.0 {
                    (1.0, Complex64::new(1.0, 0.0))
                } else {
                    (1.0 - r, z / r)
                }
            }
            DomainKind::SlitPlane => slit_distance(z),
            DomainKind::Sector { alpha } => {
                let phi = std::f64::consts::PI * alpha;
                let d1 = ray_distance(z, Complex64::from_polar(1.0, phi));
                let d2 = ray_distance(z, Complex64::from_polar(1.0, -phi));
                if d1.0 <= d2.0 {
                    d1
                } else {
                    d2
                }
            }
            DomainKind::SampledJordan { boundary } => distance_to_polyline(boundary, z),
            DomainKind::PolyBasinOfInfinity { .. } => {
                unreachable!("walk-on-spheres is not used on polynomial basins")
            }
        }
    }

    /// Cloud of boundary points, used for diameters and normalizations.
    /// Unbounded boundaries are sampled out to a large truncation radius.
    pub fn boundary_cloud(&self, m: usize) -> Vec<Complex64> {
        match &self.kind {
            DomainKind::UnitDisk => (0..m)
                .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m as f64))
                .collect(),
            DomainKind::SlitPlane => log_ray(m, std::f64::consts::PI),
            DomainKind::Sector { alpha } => {
                let phi = std::f64::consts::PI * alpha;
                let mut v = log_ray(m / 2, phi);
                v.extend(log_ray(m / 2, -phi));
                v
            }
            DomainKind::SampledJordan { boundary } => {
                let mut v = Vec::with_capacity(boundary.len() * 2);
                for i in 0..boundary.len() {
                    let a = boundary[i];
                    let b = boundary[(i + 1) % boundary.len()];
                    v.push(a);
                    v.push(0.5 * (a + b));
                }
                v
            }
            DomainKind::PolyBasinOfInfinity { map } => {
                map.boundary_cloud(m, 17).unwrap_or_default()
            }
        }
    }
}

fn log_ray(m: usize, angle: f64) -> Vec<Complex64> {
    // Radii log-spaced from the tip out to 1e8.
    (0..m)
        .map(|k| {
            let t = k as f64 / (m.max(2) - 1) as f64;
            let r = if k == 0 { 0.0 } else { 10f64.powf(-4.0 + 12.0 * t) };
            Complex64::from_polar(r, angle)
        })
        .collect()
}

fn slit_distance(z: Complex64) -> (f64, Complex64) {
    if z.re <= 0.0 {
        (z.im.abs(), Complex64::new(z.re, 0.0))
    } else {
        (z.norm(), Complex64::new(0.0, 0.0))
    }
}

fn ray_distance(z: Complex64, unit_dir: Complex64) -> (f64, Complex64) {
    let s = z.re * unit_dir.re + z.im * unit_dir.im;
    if s <= 0.0 {
        (z.norm(), Complex64::new(0.0, 0.0))
    } else {
        let foot = s * unit_dir;
        ((z - foot).norm(), foot)
    }
}

fn distance_to_polyline(poly: &[Complex64], z: Complex64) -> (f64, Complex64) {
    let mut best = (f64::INFINITY, poly[0]);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let d = b - a;
        let len2 = d.norm_sqr();
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((z - a).re * d.re + (z - a).im * d.im) / len2).clamp(0.0, 1.0)
        };
        let p = a + t * d;
        let dist = (z - p).norm();
        if dist < best.0 {
            best = (dist, p);
        }
    }
    best
}

/// Absorption points of `n` independent walk-on-spheres paths from the
/// basepoint, plus the number of censored walks.
pub fn wos_hit_points(
    dom: &DomainSpec,
    n: usize,
    seed: u64,
) -> Result<(Vec<Complex64>, usize), HarmonicError> {
    if matches!(dom.kind, DomainKind::PolyBasinOfInfinity { .. }) {
        return Err(HarmonicError::BackendUnavailable { backend: Backend::Wos });
    }
    let base = dom.finite_basepoint();
    let mut hits = Vec::with_capacity(n);
    let mut censored = 0usize;
    for trial in 0..n {
        let mut rng = substream(seed, trial as u64);
        let mut z = base;
        let mut absorbed = None;
        for _ in 0..WOS_MAX_STEPS {
            let (d, nearest) = dom.boundary_distance(z);
            if d < WOS_SHELL {
                absorbed = Some(nearest);
                break;
            }
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            z += Complex64::from_polar(d, theta);
        }
        match absorbed {
            Some(p) => hits.push(p),
            None => censored += 1,
        }
    }
    Ok((hits, censored))
}

/// External-ray landing points for a polynomial basin of infinity: uniform
/// angles pushed forward by backward ray tracing to tolerance 1e-8.
pub fn ray_hit_points(
    map: &MapSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Complex64>, HarmonicError> {
    let mut out = Vec::with_capacity(n);
    for trial in 0..n {
        let mut rng = substream(seed, trial as u64);
        let theta: f64 = rng.gen_range(0.0..1.0);
        out.push(land_external_ray(map, theta)?);
    }
    Ok(out)
}

/// Lands the external ray of angle `theta` (in turns) by iterated preimage
/// refinement toward the Julia set.
///
/// `f` maps the ray of angle φ at potential g to the ray of angle dφ at
/// potential dg, so refining one ray needs the whole forward angle orbit:
/// the table row `P[m]` holds the point of the ray of angle `d^m·θ` at the
/// current potential level. Each halving step takes the preimage of the
/// next-angle point, selecting the branch by the Böttcher approximation at
/// high potential and by ray continuity below.
pub fn land_external_ray(map: &MapSpec, theta: f64) -> Result<Complex64, HarmonicError> {
    let d = map
        .degree()
        .ok_or(HarmonicError::BackendUnavailable { backend: Backend::Wos })? as f64;
    let g0 = 8.0;
    let n_levels = 48usize;
    let mut angles = vec![0.0f64; n_levels + 1];
    angles[0] = theta.fract();
    for m in 1..=n_levels {
        angles[m] = (angles[m - 1] * d).fract();
    }
    let approx =
        |g: f64, a: f64| Complex64::from_polar(g.exp(), std::f64::consts::TAU * a);
    // Level 0: potential g0, Böttcher ≈ identity far out.
    let mut row: Vec<Complex64> = (0..=n_levels).map(|m| approx(g0, angles[m])).collect();
    for k in 1..=n_levels {
        let g = g0 / 2f64.powi(k as i32);
        let width = n_levels - k;
        let mut next = Vec::with_capacity(width + 1);
        for m in 0..=width {
            let pre = map.preimages_all(row[m + 1])?;
            let selector = if g >= 2.0 { approx(g, angles[m]) } else { row[m] };
            let z = pre
                .points
                .iter()
                .copied()
                .min_by(|a, b| {
                    (a - selector)
                        .norm()
                        .partial_cmp(&(b - selector).norm())
                        .unwrap()
                })
                .unwrap();
            next.push(z);
        }
        let moved = (next[0] - row[0]).norm();
        if moved < 1e-8 && g < 1e-4 {
            return Ok(next[0]);
        }
        row = next;
    }
    Ok(row[0])
}

/// Exact boundary-arc measure of `∂𝔻 ∩ D(x, r)` seen from a basepoint of the
/// unit disk.
fn unit_disk_riemann(basepoint: Complex64, target: &Disk) -> f64 {
    let x = target.center;
    let r = target.radius;
    let (alpha, beta) = if x.norm() == 0.0 {
        if r > 1.0 {
            return 1.0;
        }
        return 0.0;
    } else {
        let t = (1.0 + x.norm_sqr() - r * r) / (2.0 * x.norm());
        if t <= -1.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        let psi = t.acos();
        let phi = x.arg();
        (phi - psi, phi + psi)
    };
    arc_measure_from(basepoint, alpha, beta)
}

/// Harmonic measure from `b` of the counterclockwise arc `[alpha, beta]`.
pub fn arc_measure_from(b: Complex64, alpha: f64, beta: f64) -> f64 {
    let m = |theta: f64| {
        let xi = Complex64::from_polar(1.0, theta);
        ((xi - b) / (Complex64::new(1.0, 0.0) - b.conj() * xi)).arg()
    };
    let span = (m(beta) - m(alpha)).rem_euclid(std::f64::consts::TAU);
    let full = (beta - alpha).rem_euclid(std::f64::consts::TAU);
    if full == 0.0 {
        return 0.0;
    }
    span / std::f64::consts::TAU
}

/// Exact measure for sector-like kinds via `z ↦ z^{1/(2α)}` onto the right
/// half-plane and the Poisson kernel.
fn sector_riemann(alpha: f64, basepoint: Complex64, target: &Disk) -> f64 {
    let expo = 1.0 / (2.0 * alpha);
    let w0 = powf_principal(basepoint, expo);
    let (x0, y0) = (w0.re, w0.im);
    let phi = std::f64::consts::PI * alpha;
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let dir = Complex64::from_polar(1.0, sign * phi);
        // Ray parameter interval hit by the target disk.
        let x = target.center;
        let r = target.radius;
        let s = x.re * dir.re + x.im * dir.im;
        let disc = s * s - (x.norm_sqr() - r * r);
        if disc <= 0.0 {
            continue;
        }
        let (t0, t1) = ((s - disc.sqrt()).max(0.0), s + disc.sqrt());
        if t1 <= t0 {
            continue;
        }
        // Boundary images: t·e^{±iπα} ↦ ±i·t^{1/2α}.
        let (a, b) = (t0.powf(expo), t1.powf(expo));
        let (lo, hi) = if sign > 0.0 { (a, b) } else { (-b, -a) };
        total += (((hi - y0) / x0).atan() - ((lo - y0) / x0).atan()) / std::f64::consts::PI;
    }
    total
}

fn powf_principal(z: Complex64, p: f64) -> Complex64 {
    Complex64::from_polar(z.norm().powf(p), z.arg() * p)
}

/// Harmonic measure of a target disk. `Riemann` uses the exact conformal
/// form where the domain kind has one; `Wos` runs walk-on-spheres (or
/// external-ray sampling for polynomial basins).
pub fn estimate_disk_measure(
    dom: &DomainSpec,
    target: &Disk,
    n: usize,
    seed: u64,
    backend: Backend,
) -> Result<HarmonicEstimate, HarmonicError> {
    match backend {
        Backend::Riemann => {
            let value = match &dom.kind {
                DomainKind::UnitDisk => unit_disk_riemann(dom.finite_basepoint(), target),
                DomainKind::SlitPlane => sector_riemann(1.0, dom.finite_basepoint(), target),
                DomainKind::Sector { alpha } => {
                    sector_riemann(*alpha, dom.finite_basepoint(), target)
                }
                _ => return Err(HarmonicError::BackendUnavailable { backend }),
            };
            Ok(HarmonicEstimate {
                value,
                std_error: 0.0,
                n_samples: 0,
                backend,
                censored: 0,
            })
        }
        Backend::Wos => {
            let (hits, censored) = match &dom.kind {
                DomainKind::PolyBasinOfInfinity { map } => (ray_hit_points(map, n, seed)?, 0),
                _ => wos_hit_points(dom, n, seed)?,
            };
            let inside = hits.iter().filter(|p| target.contains(**p)).count();
            let total = hits.len().max(1);
            let p = inside as f64 / total as f64;
            Ok(HarmonicEstimate {
                value: p,
                std_error: (p * (1.0 - p) / total as f64).sqrt(),
                n_samples: total,
                backend,
                censored,
            })
        }
    }
}

/// One row of the normalized bound check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeurlingRow {
    pub radius: f64,
    pub radius_normalized: f64,
    pub value: f64,
    pub std_error: f64,
    /// `√(2·r_norm) − (value − 3σ)`; non-negative means the bound holds.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeurlingReport {
    pub rows: Vec<BeurlingRow>,
    pub worst_margin: f64,
    pub pass: bool,
}

/// Checks `value − 3σ ≤ √(2·r)` for each target after moving the basepoint
/// to infinity and rescaling the boundary to diameter 2 (inversion at the
/// basepoint followed by an affine map).
pub fn beurling_bound_check(
    dom: &DomainSpec,
    targets: &[Disk],
    n: usize,
    seed: u64,
) -> Result<BeurlingReport, HarmonicError> {
    let z0 = dom.finite_basepoint();
    let m1 = MobiusTransform::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        -z0,
    )?;
    let cloud = dom.boundary_cloud(2048);
    let imaged: Vec<Complex64> = cloud.iter().map(|&p| m1.apply_finite(p)).collect();
    let (mut xi, mut xj, mut diam) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 0.0);
    for i in 0..imaged.len() {
        for j in (i + 1)..imaged.len() {
            let d = (imaged[i] - imaged[j]).norm();
            if d > diam {
                diam = d;
                xi = imaged[i];
                xj = imaged[j];
            }
        }
    }
    let m2 = MobiusTransform::affine(
        Complex64::new(2.0 / diam, 0.0),
        -(xi + xj) / diam,
    )?;
    let normalization = m2.compose(&m1);

    let (hits, censored) = match &dom.kind {
        DomainKind::PolyBasinOfInfinity { map } => (ray_hit_points(map, n, seed)?, 0),
        _ => wos_hit_points(dom, n, seed)?,
    };
    let total = hits.len().max(1);
    let mut rows = Vec::with_capacity(targets.len());
    let mut worst = f64::INFINITY;
    for target in targets {
        let image = normalization.image_disk(target)?;
        let inside = hits.iter().filter(|p| target.contains(**p)).count();
        let p = inside as f64 / total as f64;
        let se = (p * (1.0 - p) / total as f64).sqrt();
        let bound = (2.0 * image.radius).sqrt();
        let margin = bound - (p - 3.0 * se);
        worst = worst.min(margin);
        rows.push(BeurlingRow {
            radius: target.radius,
            radius_normalized: image.radius,
            value: p,
            std_error: se,
            margin,
        });
    }
    let _ = censored;
    Ok(BeurlingReport {
        rows,
        worst_margin: worst,
        pass: worst >= 0.0,
    })
}

/// Least-squares slope of `log value` against `log radius`, with the
/// standard error of the slope.
pub fn fit_decay_exponent(radii: &[f64], values: &[f64]) -> Result<(f64, f64), HarmonicError> {
    if radii.len() < 4 || radii.len() != values.len() {
        return Err(HarmonicError::BadRadii);
    }
    for pair in radii.windows(2) {
        if pair[1] >= pair[0] {
            return Err(HarmonicError::BadRadii);
        }
    }
    for &v in values {
        if !(v > 0.0) {
            return Err(HarmonicError::NonPositiveValue(v));
        }
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (n - 2.0).max(1.0);
    let stderr = (ss_res / dof / sxx).sqrt();
    Ok((slope, stderr))
}

/// Partial sums of `ω(D(a, C·tⁿ))` for n = 0..N, with a convergence
/// diagnostic (`S_N − S_{N/2}`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub tail_diff: f64,
}

pub fn shrinking_target_series(
    dom: &DomainSpec,
    a: Complex64,
    c0: f64,
    t: f64,
    n_terms: usize,
    n: usize,
    seed: u64,
    backend: Backend,
) -> Result<SeriesReport, HarmonicError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(HarmonicError::BadRatio(t));
    }
    let mut terms = Vec::with_capacity(n_terms);
    let mut sums = Vec::with_capacity(n_terms);
    let mut acc = crate::rng::KahanSum::new();
    for k in 0..n_terms {
        let radius = c0 * t.powi(k as i32);
        let est = estimate_disk_measure(
            dom,
            &Disk { center: a, radius },
            n,
            seed.wrapping_add(k as u64),
            backend,
        )?;
        terms.push(est.value);
        acc.add(est.value);
        sums.push(acc.value());
    }
    let tail_diff = sums[n_terms - 1] - sums[n_terms / 2];
    Ok(SeriesReport {
        terms,
        partial_sums: sums,
        tail_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disk(x: Complex64, r: f64) -> Disk {
        Disk { center: x, radius: r }
    }

    #[test]
    fn unit_disk_exact_arc_measure() {
        let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
        // Boundary disk of radius r centered on the circle: (2/π)·asin(r/2).
        for r in [0.1, 0.3, 1.0] {
            let est =
                estimate_disk_measure(&dom, &disk(c(1.0, 0.0), r), 0, 0, Backend::Riemann).unwrap();
            let expected = 2.0 / std::f64::consts::PI * (r / 2.0).asin();
            assert!((est.value - expected).abs() < 1e-12, "r={r}");
            assert_eq!(est.std_error, 0.0);
        }
        // Radius 2 covers the whole boundary.
        let est =
            estimate_disk_measure(&dom, &disk(c(1.0, 0.0), 2.0), 0, 0, Backend::Riemann).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn unit_disk_wos_agrees_with_riemann() {
        let dom = DomainSpec::unit_disk(c(0.3, -0.1)).unwrap();
        let target = disk(c(0.0, 1.0), 0.5);
        let exact =
            estimate_disk_measure(&dom, &target, 0, 0, Backend::Riemann).unwrap();
        let mc = estimate_disk_measure(&dom, &target, 20_000, 7, Backend::Wos).unwrap();
        assert!(
            (mc.value - exact.value).abs() <= 3.0 * mc.std_error.max(1e-4),
            "mc={} exact={}",
            mc.value,
            exact.value
        );
    }

    #[test]
    fn slit_plane_off_tip_riemann_matches_wos() {
        let dom = DomainSpec::slit_plane(c(1.0, 0.0)).unwrap();
        let target = disk(c(-2.0, 0.0), 0.5);
        let exact = estimate_disk_measure(&dom, &target, 0, 0, Backend::Riemann).unwrap();
        let mc = estimate_disk_measure(&dom, &target, 20_000, 3, Backend::Wos).unwrap();
        assert!(
            (mc.value - exact.value).abs() <= 4.0 * mc.std_error.max(1e-4),
            "mc={} exact={}",
            mc.value,
            exact.value
        );
    }

    #[test]
    fn slit_plane_tip_decay_exponent() {
        // ω(D(0,r)) = (2/π)·atan(√r): slope 1/2 in the small-r limit.
        let dom = DomainSpec::slit_plane(c(1.0, 0.0)).unwrap();
        let radii = [1e-2, 1e-3, 1e-4, 1e-5];
        let values: Vec<f64> = radii
            .iter()
            .map(|&r| {
                estimate_disk_measure(&dom, &disk(c(0.0, 0.0), r), 0, 0, Backend::Riemann)
                    .unwrap()
                    .value
            })
            .collect();
        let (slope, _) = fit_decay_exponent(&radii, &values).unwrap();
        assert!((slope - 0.5).abs() < 0.01, "slope={slope}");
    }

    #[test]
    fn sector_exponent_is_inverse_two_alpha() {
        let dom = DomainSpec::sector(0.25, c(1.0, 0.0)).unwrap();
        let radii = [1e-2, 1e-3, 1e-4, 1e-5];
        let values: Vec<f64> = radii
            .iter()
            .map(|&r| {
                estimate_disk_measure(&dom, &disk(c(0.0, 0.0), r), 0, 0, Backend::Riemann)
                    .unwrap()
                    .value
            })
            .collect();
        let (slope, _) = fit_decay_exponent(&radii, &values).unwrap();
        assert!((slope - 2.0).abs() < 0.01, "slope={slope}");
    }

    #[test]
    fn decay_fit_exact_power_law() {
        let radii = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let values: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let (slope, se) = fit_decay_exponent(&radii, &values).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
        assert!(fit_decay_exponent(&radii[..3], &values[..3]).is_err());
        assert!(fit_decay_exponent(&radii, &[1.0, 2.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn backend_unavailable_for_sampled_jordan_riemann() {
        let square: Vec<Complex64> = vec![c(1.0, 1.0), c(-1.0, 1.0), c(-1.0, -1.0), c(1.0, -1.0)];
        let dom = DomainSpec::new(
            DomainKind::SampledJordan { boundary: square },
            SpherePoint::Finite(c(0.0, 0.0)),
        )
        .unwrap();
        let err = estimate_disk_measure(&dom, &disk(c(1.0, 1.0), 0.2), 10, 0, Backend::Riemann)
            .unwrap_err();
        assert!(matches!(err, HarmonicError::BackendUnavailable { .. }));
    }

    #[test]
    fn shrinking_series_far_target_is_zero() {
        let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
        let rep =
            shrinking_target_series(&dom, c(3.0, 0.0), 1.0, 0.5, 12, 0, 0, Backend::Riemann)
                .unwrap();
        assert!(rep.partial_sums.last().unwrap().abs() == 0.0);
    }

    #[test]
    fn shrinking_series_geometric_tail() {
        // a = 1, C = 1, t = 1/2 on the unit disk: terms (2/π)asin(tⁿ/2),
        // starting at 1/3.
        let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
        let rep =
            shrinking_target_series(&dom, c(1.0, 0.0), 1.0, 0.5, 20, 0, 0, Backend::Riemann)
                .unwrap();
        assert!((rep.terms[0] - 1.0 / 3.0).abs() < 1e-12);
        for k in 0..20 {
            let expected = 2.0 / std::f64::consts::PI * (0.5f64.powi(k as i32) / 2.0).asin();
            assert!((rep.terms[k] - expected).abs() < 1e-12);
        }
        assert!(rep.tail_diff < 2.0 * rep.terms[10]);
    }

    #[test]
    fn shrinking_series_slit_tip_summable() {
        // Terms at the slit tip decay like t^{n/2} for ratio t; still
        // summable at t = 0.9.
        let dom = DomainSpec::slit_plane(c(1.0, 0.0)).unwrap();
        let rep =
            shrinking_target_series(&dom, c(0.0, 0.0), 1.0, 0.9, 80, 0, 0, Backend::Riemann)
                .unwrap();
        let expected_ratio = 0.9f64.sqrt();
        for k in 40..79 {
            let ratio = rep.terms[k + 1] / rep.terms[k];
            assert!((ratio - expected_ratio).abs() < 0.01, "ratio {ratio} at {k}");
        }
        // Remaining tail is controlled by the geometric bound.
        let tail_bound = rep.terms[40] / (1.0 - expected_ratio);
        assert!(rep.partial_sums[79] - rep.partial_sums[40] <= tail_bound);
    }

    #[test]
    fn beurling_vacuous_for_huge_normalized_radius() {
        // A target swallowing most of the boundary normalizes to a radius
        // where √(2r) exceeds any probability; the margin stays positive.
        let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
        let rep = beurling_bound_check(&dom, &[disk(c(1.0, 0.0), 0.95)], 2_000, 3).unwrap();
        assert!(rep.rows[0].margin > 0.0);
        assert!((2.0 * rep.rows[0].radius_normalized).sqrt() >= 1.0);
    }

    #[test]
    fn external_ray_landing_on_circle() {
        // For z² the basin boundary is the unit circle and the ray of angle
        // θ lands at e^{2πiθ}.
        let map = MapSpec::quadratic(c(0.0, 0.0));
        for theta in [0.1, 0.37, 0.77] {
            let z = land_external_ray(&map, theta).unwrap();
            let expected = Complex64::from_polar(1.0, std::f64::consts::TAU * theta);
            assert!((z - expected).norm() < 1e-6, "theta={theta} z={z}");
        }
    }

    #[test]
    fn beurling_bound_on_unit_disk() {
        let dom = DomainSpec::unit_disk(c(0.0, 0.0)).unwrap();
        let targets = vec![disk(c(1.0, 0.0), 0.1), disk(c(0.0, 1.0), 0.01)];
        let rep = beurling_bound_check(&dom, &targets, 20_000, 5).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
