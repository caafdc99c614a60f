//! The punctured conformal metric: density `ε²/|z−v_i|²` inside each
//! puncture disk `D(v_i, ε)` and 1 elsewhere, with distances computed as a
//! candidate-path infimum; δ-separated subsets; and the thin-singular-value
//! checker.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::geometry::MobiusTransform;
use crate::maps::SingularData;
use crate::shortpath::{segment_hits_disk, shortest_path_length, Circle};

#[derive(Debug, Error)]
pub enum RhoError {
    #[error("point coincides with puncture {index} (distance {dist:e})")]
    PunctureHit { index: usize, dist: f64 },
    #[error("puncture disks must be pairwise disjoint with gaps > epsilon")]
    PuncturesTooClose,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("puncture {index} lies in D(x, 2r); the inclusion hypothesis fails")]
    HypothesisViolated { index: usize },
    #[error("boundary sampling gap {gap:e} exceeds mu^horizon = {needed:e}")]
    ResolutionTooCoarse { gap: f64, needed: f64 },
    #[error("thin-check parameters invalid: {0}")]
    BadParams(String),
}

/// Punctures `v_1..v_k` with their common disk radius ε. The disks
/// `D(v_i, ε)` must be pairwise disjoint with gaps greater than ε.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoConfig {
    pub punctures: Vec<Complex64>,
    pub epsilon: f64,
}

impl RhoConfig {
    pub fn new(punctures: Vec<Complex64>, epsilon: f64) -> Result<RhoConfig, RhoError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(RhoError::BadEpsilon(epsilon));
        }
        for i in 0..punctures.len() {
            for j in (i + 1)..punctures.len() {
                if (punctures[i] - punctures[j]).norm() <= 3.0 * epsilon {
                    return Err(RhoError::PuncturesTooClose);
                }
            }
        }
        Ok(RhoConfig { punctures, epsilon })
    }

    /// Config with no punctures: the metric is Euclidean.
    pub fn euclidean() -> RhoConfig {
        RhoConfig { punctures: vec![], epsilon: 1.0 }
    }

    fn circles(&self) -> Vec<Circle> {
        self.punctures
            .iter()
            .map(|&v| Circle { center: v, radius: self.epsilon })
            .collect()
    }

    fn guard(&self, z: Complex64) -> Result<(), RhoError> {
        for (index, &v) in self.punctures.iter().enumerate() {
            let dist = (z - v).norm();
            if dist < 1e-14 {
                return Err(RhoError::PunctureHit { index, dist });
            }
        }
        Ok(())
    }

    /// Index of the puncture disk strictly containing `z`, if any.
    fn disk_of(&self, z: Complex64) -> Option<usize> {
        self.punctures
            .iter()
            .position(|&v| (z - v).norm() < self.epsilon)
    }
}

/// Metric density at `z`: `ε²/|z−v_i|²` inside `D(v_i, ε)`, else 1. Always
/// at least 1 and continuous across the disk boundaries.
pub fn rho_density(cfg: &RhoConfig, z: Complex64) -> Result<f64, RhoError> {
    cfg.guard(z)?;
    Ok(match cfg.disk_of(z) {
        Some(i) => {
            let d = (z - cfg.punctures[i]).norm();
            cfg.epsilon * cfg.epsilon / (d * d)
        }
        None => 1.0,
    })
}

/// Weighted length of the straight segment `[a, b]`: piecewise closed form,
/// where each crossing of a puncture disk contributes
/// `∫ ε²/|z−v|² |dz| = (ε²/p)·Δ arctan` along the chord. Infinite when the
/// segment passes through a puncture.
fn segment_rho_length(a: Complex64, b: Complex64, punctures: &[Complex64], eps: f64) -> f64 {
    let dir = b - a;
    let len = dir.norm();
    if len == 0.0 {
        return 0.0;
    }
    let e = dir / len;
    // Collect crossing intervals [s0, s1] (arc-length along the segment) per
    // puncture disk; disks are disjoint so intervals do not overlap.
    let mut intervals: Vec<(f64, f64, usize)> = Vec::new();
    for (i, &v) in punctures.iter().enumerate() {
        // |a + s e − v|² = eps²  ⇒  s² − 2 s s_v + |a−v|² − eps² = 0
        let sv = (v - a).re * e.re + (v - a).im * e.im;
        let av2 = (a - v).norm_sqr();
        let disc = sv * sv - (av2 - eps * eps);
        if disc <= 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let s0 = (sv - root).max(0.0);
        let s1 = (sv + root).min(len);
        if s1 > s0 {
            intervals.push((s0, s1, i));
        }
    }
    intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut total = 0.0;
    let mut cursor = 0.0;
    for (s0, s1, i) in intervals {
        total += s0 - cursor;
        let v = punctures[i];
        let sv = (v - a).re * e.re + (v - a).im * e.im;
        let p = ((v - a) - sv * e).norm();
        if p < 1e-12 && s0 <= sv + 1e-12 && sv - 1e-12 <= s1 {
            return f64::INFINITY;
        }
        if p < 1e-12 {
            // Collinear but outside the chord: 1/(s−sv)² form.
            total += eps * eps * ((1.0 / (s0 - sv)).abs() - (1.0 / (s1 - sv)).abs()).abs();
        } else {
            total += eps * eps / p * (((s1 - sv) / p).atan() - ((s0 - sv) / p).atan());
        }
        cursor = s1;
    }
    total += len - cursor;
    total
}

/// Cost of travelling between two points of the chart of one funnel
/// (coordinates `u` with the isometric region `|u| ≥ ε`): the minimum of the
/// straight chart segment (weighted where it leaves the funnel) and the taut
/// path around the chart disk.
fn funnel_pair_cost(u1: Complex64, u2: Complex64, eps: f64) -> f64 {
    let origin = [Complex64::new(0.0, 0.0)];
    let straight = segment_rho_length(u1, u2, &origin, eps);
    let hole = Circle { center: origin[0], radius: eps };
    let taut = if segment_hits_disk(u1, u2, &hole) {
        shortest_path_length(u1, u2, &[hole])
    } else {
        (u1 - u2).norm()
    };
    straight.min(taut)
}

/// Best cost between points outside all puncture disks: straight weighted
/// segment vs taut obstacle-avoiding path.
fn outer_pair_cost(cfg: &RhoConfig, a: Complex64, b: Complex64) -> f64 {
    let straight = segment_rho_length(a, b, &cfg.punctures, cfg.epsilon);
    let circles = cfg.circles();
    let crossing = circles.iter().any(|c| segment_hits_disk(a, b, c));
    let taut = if crossing {
        shortest_path_length(a, b, &circles)
    } else {
        (a - b).norm()
    };
    straight.min(taut)
}

fn golden_min(mut lo: f64, mut hi: f64, f: &impl Fn(f64) -> f64, iters: usize) -> (f64, f64) {
    let phi = 0.618_033_988_749_894_9;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimize a periodic function of an angle: coarse scan plus golden-section
/// refinement around the best coarse brackets.
fn minimize_angle(f: impl Fn(f64) -> f64, coarse: usize) -> f64 {
    let step = std::f64::consts::TAU / coarse as f64;
    let mut samples: Vec<(f64, f64)> = (0..coarse)
        .map(|k| {
            let t = k as f64 * step;
            (t, f(t))
        })
        .collect();
    samples.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut best = f64::INFINITY;
    for &(t, _) in samples.iter().take(3) {
        let (_, v) = golden_min(t - step, t + step, &f, 64);
        best = best.min(v);
    }
    best
}

/// Distance in the punctured metric, computed as an infimum over candidate
/// paths: the straight segment (piecewise closed form), taut detours around
/// the puncture disks, chart ("pullback") segments inside a disk, and
/// crossing combinations optimized over the entry/exit points.
pub fn rho_distance(cfg: &RhoConfig, z: Complex64, w: Complex64) -> Result<f64, RhoError> {
    cfg.guard(z)?;
    cfg.guard(w)?;
    if z == w {
        return Ok(0.0);
    }
    let eps = cfg.epsilon;
    // Fast path: segment clear of every disk travels at density 1.
    let circles = cfg.circles();
    let rz = cfg.disk_of(z);
    let rw = cfg.disk_of(w);
    if rz.is_none() && rw.is_none() && circles.iter().all(|c| !segment_hits_disk(z, w, c)) {
        return Ok((z - w).norm());
    }
    let mut best = segment_rho_length(z, w, &cfg.punctures, eps);
    match (rz, rw) {
        (None, None) => {
            best = best.min(shortest_path_length(z, w, &circles));
        }
        (Some(i), Some(j)) if i == j => {
            let m = MobiusTransform::puncture(cfg.punctures[i], eps);
            best = best.min(funnel_pair_cost(m.apply_finite(z), m.apply_finite(w), eps));
        }
        (Some(i), None) => {
            best = best.min(cross_once(cfg, i, z, w));
        }
        (None, Some(j)) => {
            best = best.min(cross_once(cfg, j, w, z));
        }
        (Some(i), Some(j)) => {
            best = best.min(cross_twice(cfg, i, j, z, w));
        }
    }
    Ok(best)
}

/// Candidate cost for `z` inside disk `i` and `w` outside every disk:
/// optimize the boundary crossing point.
fn cross_once(cfg: &RhoConfig, i: usize, z: Complex64, w: Complex64) -> f64 {
    let eps = cfg.epsilon;
    let v = cfg.punctures[i];
    let m = MobiusTransform::puncture(v, eps);
    let uz = m.apply_finite(z);
    let cost = |theta: f64| {
        let c = v + Complex64::from_polar(eps, theta);
        let uc = m.apply_finite(c);
        funnel_pair_cost(uz, uc, eps) + outer_pair_cost(cfg, c, w)
    };
    minimize_angle(cost, 48)
}

/// Candidate cost between points of two different puncture disks.
fn cross_twice(cfg: &RhoConfig, i: usize, j: usize, z: Complex64, w: Complex64) -> f64 {
    let eps = cfg.epsilon;
    let (vi, vj) = (cfg.punctures[i], cfg.punctures[j]);
    let mi = MobiusTransform::puncture(vi, eps);
    let mj = MobiusTransform::puncture(vj, eps);
    let uz = mi.apply_finite(z);
    let uw = mj.apply_finite(w);
    let leg = |ta: f64, tb: f64| {
        let ca = vi + Complex64::from_polar(eps, ta);
        let cb = vj + Complex64::from_polar(eps, tb);
        funnel_pair_cost(uz, mi.apply_finite(ca), eps)
            + outer_pair_cost(cfg, ca, cb)
            + funnel_pair_cost(mj.apply_finite(cb), uw, eps)
    };
    // Coarse grid, then coordinate-wise golden refinement.
    let coarse = 24;
    let step = std::f64::consts::TAU / coarse as f64;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for a in 0..coarse {
        for b in 0..coarse {
            let (ta, tb) = (a as f64 * step, b as f64 * step);
            let v = leg(ta, tb);
            if v < best.2 {
                best = (ta, tb, v);
            }
        }
    }
    let (mut ta, mut tb, mut val) = best;
    for _ in 0..6 {
        let (na, va) = golden_min(ta - step, ta + step, &|t| leg(t, tb), 48);
        ta = na;
        let (nb, vb) = golden_min(tb - step, tb + step, &|t| leg(ta, t), 48);
        tb = nb;
        val = va.min(vb);
    }
    val
}

/// Report of the disk-inclusion sweep around one admissible configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionReport {
    pub pass: bool,
    /// min over samples of dist_ρ / Euclidean (must be ≥ 1 up to tolerance).
    pub worst_lower_ratio: f64,
    /// max over samples of dist_ρ / (16·r·ρ(x)) (must be ≤ 1).
    pub worst_upper_ratio: f64,
    pub n_samples: usize,
}

/// Checks `D_ρ(x,r) ⊆ D(x,r) ⊆ D_ρ(x, 16·r·ρ(x))` by sampling: every sampled
/// point of `D(x,r)` must satisfy `|x−y| ≤ dist_ρ(x,y) ≤ 16·r·ρ(x)`.
/// Requires every puncture to avoid `D(x, 2r)`.
pub fn rho_inclusion_check(
    cfg: &RhoConfig,
    x: Complex64,
    r: f64,
    n_samples: usize,
) -> Result<InclusionReport, RhoError> {
    for (index, &v) in cfg.punctures.iter().enumerate() {
        if (v - x).norm() < 2.0 * r {
            return Err(RhoError::HypothesisViolated { index });
        }
    }
    let rho_x = rho_density(cfg, x)?;
    let bound = 16.0 * r * rho_x;
    let rings = 16usize.max(n_samples / 16);
    let per_ring = n_samples.div_ceil(rings).max(1);
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = 0.0f64;
    let mut count = 0usize;
    for ring in 1..=rings {
        let rr = r * ring as f64 / rings as f64 * 0.999;
        for k in 0..per_ring {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5 * (ring % 2) as f64)
                / per_ring as f64;
            let y = x + Complex64::from_polar(rr, theta);
            let d = rho_distance(cfg, x, y)?;
            let euclid = (y - x).norm();
            worst_lower = worst_lower.min(d / euclid);
            worst_upper = worst_upper.max(d / bound);
            count += 1;
        }
    }
    Ok(InclusionReport {
        pass: worst_lower >= 1.0 - 1e-9 && worst_upper <= 1.0 + 1e-9,
        worst_lower_ratio: worst_lower,
        worst_upper_ratio: worst_upper,
        n_samples: count,
    })
}

/// Greedy maximal δ-separated subset in first-come order: every kept point
/// is ≥ δ from all previously kept points, and every input point is within δ
/// of some kept point.
pub fn separated_subset(points: &[Complex64], delta: f64) -> Vec<Complex64> {
    let cell = delta.max(1e-300);
    let mut grid: HashMap<(i64, i64), Vec<Complex64>> = HashMap::new();
    let key = |z: Complex64| ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64);
    let mut kept = Vec::new();
    'outer: for &p in points {
        let (kx, ky) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(kx + dx, ky + dy)) {
                    for &q in bucket {
                        if (p - q).norm() < delta {
                            continue 'outer;
                        }
                    }
                }
            }
        }
        grid.entry((kx, ky)).or_default().push(p);
        kept.push(p);
    }
    kept
}

/// Parameters of the thin-singular-value test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThinSVParams {
    /// Scale base μ ∈ (0,1); scale n tests distance μⁿ.
    pub mu: f64,
    /// Polynomial count exponent: at most n^d separated values per scale.
    pub d: u32,
    /// Required chart distance between boundary and singular values inside
    /// each puncture disk.
    pub eta: f64,
    /// Largest tested scale index.
    pub horizon: u32,
}

/// Per-scale account of the counting condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaleCount {
    pub n: u32,
    pub count: usize,
    pub bound: f64,
    pub pass: bool,
}

/// Verdict of the thin-singular-value check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThinVerdict {
    pub condition_a: bool,
    pub scale_counts: Vec<ScaleCount>,
    /// First scale violating the count bound, if any.
    pub witness_scale: Option<u32>,
    pub condition_b: bool,
    /// Chart separation margin per puncture (∞ when no singular values
    /// enter the disk).
    pub puncture_margins: Vec<f64>,
    pub pass: bool,
}

/// Checks the two defining conditions of thin singular values against a
/// sampled boundary: (a) at each scale n ≤ horizon and outside the puncture
/// disks, the greedy μⁿ-separated subset of singular values within μⁿ of the
/// boundary has at most n^d elements; (b) inside each puncture disk, the
/// puncture chart separates singular values from the boundary by more than
/// `eta`.
pub fn thin_sv_check(
    svs: &SingularData,
    boundary_samples: &[Complex64],
    cfg: &RhoConfig,
    params: &ThinSVParams,
) -> Result<ThinVerdict, RhoError> {
    if !(params.mu > 0.0 && params.mu < 1.0) {
        return Err(RhoError::BadParams(format!("mu = {}", params.mu)));
    }
    if !(params.eta > 0.0) {
        return Err(RhoError::BadParams(format!("eta = {}", params.eta)));
    }
    if boundary_samples.is_empty() {
        return Err(RhoError::BadParams("empty boundary sample".into()));
    }
    let needed = params.mu.powi(params.horizon as i32);
    let gap = max_nearest_neighbor_gap(boundary_samples);
    if gap > needed {
        return Err(RhoError::ResolutionTooCoarse { gap, needed });
    }
    let values = svs.finite_values();
    let index = PointGrid::build(boundary_samples, needed.max(1e-12));
    // Distance from each singular value to the sampled boundary, computed
    // once.
    let dists: Vec<f64> = values
        .iter()
        .map(|&s| index.nearest_distance(s, boundary_samples))
        .collect();
    let outside_punctures: Vec<bool> = values
        .iter()
        .map(|&s| cfg.disk_of(s).is_none())
        .collect();

    let mut scale_counts = Vec::new();
    let mut witness_scale = None;
    for n in 1..=params.horizon {
        let scale = params.mu.powi(n as i32);
        let near: Vec<Complex64> = values
            .iter()
            .zip(&dists)
            .zip(&outside_punctures)
            .filter(|((_, &d), &out)| out && d < scale)
            .map(|((&s, _), _)| s)
            .collect();
        let count = separated_subset(&near, scale).len();
        let bound = (n as f64).powi(params.d as i32);
        let pass = (count as f64) <= bound;
        if !pass && witness_scale.is_none() {
            witness_scale = Some(n);
        }
        scale_counts.push(ScaleCount { n, count, bound, pass });
    }
    let condition_a = witness_scale.is_none();

    let mut puncture_margins = Vec::new();
    let mut condition_b = true;
    for &v in &cfg.punctures {
        let m = MobiusTransform::puncture(v, cfg.epsilon);
        let sv_in: Vec<Complex64> = values
            .iter()
            .filter(|s| (*s - v).norm() < cfg.epsilon && (*s - v).norm() > 1e-14)
            .map(|&s| m.apply_finite(s))
            .collect();
        let bd_in: Vec<Complex64> = boundary_samples
            .iter()
            .filter(|x| (*x - v).norm() < cfg.epsilon && (*x - v).norm() > 1e-14)
            .map(|&x| m.apply_finite(x))
            .collect();
        let margin = if sv_in.is_empty() || bd_in.is_empty() {
            f64::INFINITY
        } else {
            let mut min = f64::INFINITY;
            for s in &sv_in {
                for x in &bd_in {
                    min = min.min((s - x).norm());
                }
            }
            min
        };
        if margin <= params.eta {
            condition_b = false;
        }
        puncture_margins.push(margin);
    }

    Ok(ThinVerdict {
        pass: condition_a && condition_b,
        condition_a,
        scale_counts,
        witness_scale,
        condition_b,
        puncture_margins,
    })
}

struct PointGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl PointGrid {
    fn build(points: &[Complex64], cell: f64) -> PointGrid {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, &p) in points.iter().enumerate() {
            let key = ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
            buckets.entry(key).or_default().push(k);
        }
        PointGrid { cell, buckets }
    }

    /// Distance to the nearest indexed point; expands the search ring until
    /// a hit is certain.
    fn nearest_distance(&self, z: Complex64, points: &[Complex64]) -> f64 {
        let kx = (z.re / self.cell).floor() as i64;
        let ky = (z.im / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    if let Some(bucket) = self.buckets.get(&(kx + dx, ky + dy)) {
                        for &k in bucket {
                            best = best.min((points[k] - z).norm());
                        }
                    }
                }
            }
            if best <= (ring as f64) * self.cell || ring > 1_000_000 {
                return best;
            }
            ring += 1;
        }
    }
}

fn max_nearest_neighbor_gap(points: &[Complex64]) -> f64 {
    if points.len() < 2 {
        return f64::INFINITY;
    }
    // Grid with cell ~ typical spacing estimated from a coarse pass.
    let mut span = 0.0f64;
    for p in points {
        span = span.max(p.re.abs().max(p.im.abs()));
    }
    let cell = (span.max(1e-9)) * 4.0 / (points.len() as f64).sqrt();
    let grid = PointGrid::build(points, cell);
    let mut worst = 0.0f64;
    for (k, &p) in points.iter().enumerate() {
        let kx = (p.re / cell).floor() as i64;
        let ky = (p.im / cell).floor() as i64;
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    if let Some(bucket) = grid.buckets.get(&(kx + dx, ky + dy)) {
                        for &j in bucket {
                            if j != k {
                                best = best.min((points[j] - p).norm());
                            }
                        }
                    }
                }
            }
            if best <= (ring as f64) * cell || ring as usize > points.len() {
                break;
            }
            ring += 1;
        }
        worst = worst.max(best);
    }
    worst
}
