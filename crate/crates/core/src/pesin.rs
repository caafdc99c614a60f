//! Natural-extension backward orbits in the plane, certified inverse-branch
//! towers with the quarter-power radius schedule, the first-return variant,
//! and the repelling-periodic-point finder.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::DdComplex;
use crate::ergodic::SetDescriptor;
use crate::geometry::Disk;
use crate::inner;
use crate::maps::{MapError, MapSpec};
use crate::rng::substream;

#[derive(Debug, Error)]
pub enum PesinError {
    #[error("backward orbit must contain at least {0} points")]
    OrbitTooShort(usize),
    #[error("forward verification failed at step {step} (residual {residual:e})")]
    VerificationFailed { step: usize, residual: f64 },
    #[error("chosen preimage stayed within 1e-8 of a critical point after 32 resamples")]
    CriticalFiberHit,
    #[error("the quarter-power schedule never starts: |(f^n)'(x_n)|^(-1/4) < M^n fails up to n = {checked}")]
    ScheduleNeverStarts { checked: usize },
    #[error("inverse branch obstructed at tower level {level}: {source}")]
    BranchObstructed { level: usize, source: MapError },
    #[error("contraction check needs at least 10 certified levels, got {0}")]
    InsufficientDepth(usize),
    #[error("search budget exhausted after {chains} chains")]
    BudgetExhausted { chains: usize },
    #[error("target disk does not meet the sampled boundary")]
    TargetMissesBoundary,
    #[error("return times exceeded n² repeatedly ({count} times, max T = {max_t})")]
    ReturnTimeBlowup { count: usize, max_t: u64 },
    #[error("first-return sampling exhausted the step cap before {wanted} returns")]
    ReturnSamplingStalled { wanted: usize },
    #[error("first-return orbit requires recorded return times")]
    MissingReturnTimes,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Inner(#[from] inner::InnerError),
}

/// How a backward orbit is sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OrbitMode {
    /// Uniform weight over the d preimages (finite-degree maps).
    PlaneEqualWeight,
    /// Transfer weights `1/|g'|` on the circle (centered Blaschke).
    CircleTransfer,
    /// Induced first-return steps on a positive-measure cell.
    FirstReturn { cell: SetDescriptor },
}

/// A sampled natural-extension trajectory `x_0 … x_N` with per-step data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BackwardOrbit {
    pub points: Vec<Complex64>,
    /// Derivative of the step map at `x_{k+1}` (composite for first-return
    /// steps).
    pub step_derivs: Vec<Complex64>,
    /// Log-probability of each sampled branch choice.
    pub log_weights: Vec<f64>,
    pub mode: OrbitMode,
    /// First-return times per step (empty in the plain modes).
    pub return_times: Vec<u64>,
    /// Underlying single-map chain for first-return steps: segment k lists
    /// the f-backward points from `x_k` (exclusive) down to `x_{k+1}`
    /// (inclusive).
    pub segments: Vec<Vec<Complex64>>,
}

impl BackwardOrbit {
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    /// `log |(f^n)'(x_n)|` for n = 0..=depth (composite along the chain).
    pub fn log_derivative_products(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.step_derivs.len() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for d in &self.step_derivs {
            acc += d.norm().ln();
            out.push(acc);
        }
        out
    }

    /// Empirical expansion exponent `log|(f^N)'(x_N)| / N`.
    pub fn empirical_exponent(&self) -> f64 {
        let logs = self.log_derivative_products();
        logs[logs.len() - 1] / self.depth().max(1) as f64
    }
}

/// Samples a backward orbit of depth `n` from `x0`; every consecutive pair
/// is verified by forward evaluation to residual 1e-10.
pub fn sample_backward_orbit(
    f: &MapSpec,
    x0: Complex64,
    n: usize,
    mode: OrbitMode,
    seed: u64,
) -> Result<BackwardOrbit, PesinError> {
    let orbit = match &mode {
        OrbitMode::PlaneEqualWeight => {
            let mut rng = substream(seed, 0);
            let mut points = vec![x0];
            let mut step_derivs = Vec::with_capacity(n);
            let mut log_weights = Vec::with_capacity(n);
            for _ in 0..n {
                let cur = *points.last().unwrap();
                let pre = f.preimages_all(cur)?;
                let d = pre.points.len();
                let mut pick = rng.gen_range(0..d);
                let mut tries = 0;
                while f.derivative(pre.points[pick]).norm() < 1e-8 {
                    if tries >= 32 {
                        return Err(PesinError::CriticalFiberHit);
                    }
                    pick = rng.gen_range(0..d);
                    tries += 1;
                }
                let z = pre.points[pick];
                points.push(z);
                step_derivs.push(f.derivative(z));
                log_weights.push(-(d as f64).ln());
            }
            BackwardOrbit {
                points,
                step_derivs,
                log_weights,
                mode,
                return_times: vec![],
                segments: vec![],
            }
        }
        OrbitMode::CircleTransfer => {
            let chain = inner::backward_sample_circle(f, x0, n, seed)?;
            let step_derivs = chain.points[1..]
                .iter()
                .map(|&z| f.derivative(z))
                .collect();
            BackwardOrbit {
                points: chain.points,
                step_derivs,
                log_weights: chain.log_weights,
                mode,
                return_times: vec![],
                segments: vec![],
            }
        }
        OrbitMode::FirstReturn { cell } => sample_first_return_orbit(f, x0, n, *cell, seed)?,
    };
    // Forward verification; first-return steps are checked one single-map
    // step at a time (forward powers would amplify rounding).
    for k in 0..orbit.depth() {
        match &orbit.mode {
            OrbitMode::FirstReturn { .. } => {
                let seg = &orbit.segments[k];
                let mut expect = orbit.points[k];
                for (j, &z) in seg.iter().enumerate() {
                    let residual = (f.evaluate(z) - expect).norm();
                    if residual > 1e-10 * (1.0 + expect.norm()) {
                        let _ = j;
                        return Err(PesinError::VerificationFailed { step: k, residual });
                    }
                    expect = z;
                }
            }
            _ => {
                let residual = (f.evaluate(orbit.points[k + 1]) - orbit.points[k]).norm();
                if residual > 1e-10 * (1.0 + orbit.points[k].norm()) {
                    return Err(PesinError::VerificationFailed { step: k, residual });
                }
            }
        }
    }
    Ok(orbit)
}

fn sample_first_return_orbit(
    f: &MapSpec,
    x0: Complex64,
    n: usize,
    cell: SetDescriptor,
    seed: u64,
) -> Result<BackwardOrbit, PesinError> {
    // Underlying f-backward chain, segmented at visits to the cell.
    let is_circle = matches!(f, MapSpec::Blaschke { .. });
    let mut rng = substream(seed, 0);
    let mut points = vec![x0];
    let mut step_derivs = Vec::new();
    let mut log_weights = Vec::new();
    let mut return_times = Vec::new();
    let mut segments = Vec::new();

    let mut cur = x0;
    let mut seg: Vec<Complex64> = Vec::new();
    let mut seg_deriv = Complex64::new(1.0, 0.0);
    let mut seg_logw = 0.0f64;
    let cap = 4_000_000usize;
    let mut total_steps = 0usize;
    while points.len() <= n {
        if total_steps >= cap {
            return Err(PesinError::ReturnSamplingStalled { wanted: n });
        }
        total_steps += 1;
        // One f-backward step with the mode-appropriate weights.
        let pre = f.preimages_all(cur)?;
        let (next, logw) = if is_circle {
            let weights: Vec<f64> = pre
                .points
                .iter()
                .map(|&e| 1.0 / f.derivative(e / e.norm()).norm())
                .collect();
            let raw: f64 = weights.iter().sum();
            let u: f64 = rng.gen_range(0.0..raw);
            let mut acc = 0.0;
            let mut pick = pre.points.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let e = pre.points[pick];
            (e / e.norm(), (weights[pick] / raw).ln())
        } else {
            let pick = rng.gen_range(0..pre.points.len());
            (pre.points[pick], -(pre.points.len() as f64).ln())
        };
        seg.push(next);
        seg_deriv *= f.derivative(next);
        seg_logw += logw;
        cur = next;
        if cell.contains(next) {
            points.push(next);
            step_derivs.push(seg_deriv);
            log_weights.push(seg_logw);
            return_times.push(seg.len() as u64);
            segments.push(std::mem::take(&mut seg));
            seg_deriv = Complex64::new(1.0, 0.0);
            seg_logw = 0.0;
        }
    }
    Ok(BackwardOrbit {
        points,
        step_derivs,
        log_weights,
        mode: OrbitMode::FirstReturn { cell },
        return_times,
        segments,
    })
}

/// Tower build policy: the base radius starts from the schedule maximum
/// `η/(32P)` (optionally capped) and halves on branch obstructions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RadiusPolicy {
    pub initial_cap: Option<f64>,
    pub max_halvings: usize,
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy { initial_cap: None, max_halvings: 20 }
    }
}

/// A certified inverse-branch tower above a backward orbit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchTower {
    /// Base disk `D(x_0, r)`.
    pub base: Disk,
    /// Contraction base `M ∈ (0,1)` of the schedule.
    pub m: f64,
    /// Admissible interval `(e^{-χ̂/4}, 1)` recorded with every tower.
    pub m_interval: (f64, f64),
    pub eta: f64,
    /// Schedule coefficients `b_n = |(f^{n+1})'(x_{n+1})|^{-1/4}/2` for
    /// `n = n2..depth-1`.
    pub b: Vec<f64>,
    /// `∏ (1-b_n)^{-1}` over the scheduled levels.
    pub p: f64,
    /// First scheduled level.
    pub n2: usize,
    /// Radius of the level-n disk about `x_0` (index 0..=depth).
    pub level_radii: Vec<f64>,
    /// Koebe-schedule diameter certificates (finite for n ≥ n2).
    pub diam_certs: Vec<f64>,
    /// Sampled diameters of the boundary images per level.
    pub sampled_diams: Vec<f64>,
    /// `|F_n'(x_0)|` per level.
    pub deriv_at_base: Vec<f64>,
    /// The orbit points the tower is built on.
    pub points: Vec<Complex64>,
    /// Return times when built over a first-return orbit.
    pub return_times: Vec<u64>,
}

impl BranchTower {
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }
}

/// Continues the composite inverse branch `F_n` (sending `x_0` to `x_n`)
/// from the base point to `y`, returning the image and, optionally, the
/// whole backward fiber `[y, F_1(y), …, F_n(y)]`.
fn branch_image(
    f: &MapSpec,
    orbit: &BackwardOrbit,
    n: usize,
    y: Complex64,
    fiber: Option<&mut Vec<Complex64>>,
) -> Result<Complex64, PesinError> {
    let path_steps = 6usize;
    let x0 = orbit.points[0];
    // Current curve above the segment x0 -> y, starting at depth 0.
    let mut curve: Vec<Complex64> = (0..=path_steps)
        .map(|j| x0 + (y - x0) * (j as f64 / path_steps as f64))
        .collect();
    let mut fiber_points = fiber;
    if let Some(fb) = fiber_points.as_deref_mut() {
        fb.clear();
        fb.push(y);
    }
    for level in 1..=n {
        let single_steps: &[Complex64] = match &orbit.mode {
            OrbitMode::FirstReturn { .. } => &orbit.segments[level - 1],
            _ => std::slice::from_ref(&orbit.points[level]),
        };
        // A first-return step is a composition of single-map branches whose
        // seeds are the recorded intermediate points.
        for seed in single_steps {
            let mut next = Vec::with_capacity(curve.len());
            let mut z = *seed;
            next.push(z);
            for j in 1..curve.len() {
                z = f
                    .preimage_step_refined(z, curve[j - 1], curve[j])
                    .map_err(|source| PesinError::BranchObstructed { level, source })?;
                next.push(z);
            }
            curve = next;
        }
        if let Some(fb) = fiber_points.as_deref_mut() {
            fb.push(*curve.last().unwrap());
        }
    }
    Ok(*curve.last().unwrap())
}

/// Builds the certified tower: detects the schedule start `n2`, fixes the
/// base radius from `32·r·P < η` (shrinking on obstructions), continues all
/// levels on 64 boundary samples, and certifies diameters by the schedule
/// bound cross-checked against the sampled images.
pub fn build_branch_tower(
    f: &MapSpec,
    orbit: &BackwardOrbit,
    eta: Option<f64>,
    m: Option<f64>,
    policy: RadiusPolicy,
) -> Result<BranchTower, PesinError> {
    let depth = orbit.depth();
    if depth < 4 {
        return Err(PesinError::OrbitTooShort(4));
    }
    let logs = orbit.log_derivative_products();
    let chi_hat = orbit.empirical_exponent();
    let m_interval = ((-chi_hat / 4.0).exp(), 1.0);
    let m = m.unwrap_or_else(|| (-chi_hat / 5.0).exp());
    // Schedule start: |(f^n)'(x_n)|^{-1/4} < M^n for all n ≥ n2.
    let ln_m = m.ln();
    let mut n2 = None;
    for start in 1..=depth {
        if (start..=depth).all(|k| -logs[k] / 4.0 < k as f64 * ln_m) {
            n2 = Some(start);
            break;
        }
    }
    let n2 = n2.ok_or(PesinError::ScheduleNeverStarts { checked: depth })?;
    if n2 > depth / 2 {
        return Err(PesinError::ScheduleNeverStarts { checked: n2 });
    }
    let eta = match eta {
        Some(e) => e,
        None => default_eta(f, orbit.points[0])?,
    };
    let b: Vec<f64> = (n2..depth)
        .map(|k| 0.5 * (-logs[k + 1] / 4.0).exp())
        .collect();
    let p: f64 = b.iter().map(|bk| 1.0 / (1.0 - bk)).product();

    let x0 = orbit.points[0];
    let mut r = eta / (32.0 * p) * (1.0 - 1e-9);
    if let Some(cap) = policy.initial_cap {
        r = r.min(cap);
    }
    let boundary_samples = 64usize;
    'radius: for _ in 0..=policy.max_halvings {
        // Level radii for this r.
        let mut level_radii = vec![0.0f64; depth + 1];
        let mut tail = 1.0f64;
        level_radii[depth] = r;
        for nn in (n2..depth).rev() {
            tail /= 1.0 - b[nn - n2];
            level_radii[nn] = r * tail;
        }
        for nn in 0..n2 {
            level_radii[nn] = r * tail;
        }
        // Definability of the first scheduled branch on D(x0, rP).
        for j in 0..boundary_samples {
            let theta = std::f64::consts::TAU * j as f64 / boundary_samples as f64;
            let y = x0 + Complex64::from_polar(level_radii[0], theta);
            if branch_image(f, orbit, n2, y, None).is_err() {
                r *= 0.5;
                continue 'radius;
            }
        }
        // Build all levels.
        let mut sampled_diams = vec![0.0f64; depth + 1];
        let mut diam_certs = vec![f64::INFINITY; depth + 1];
        let mut deriv_at_base = vec![0.0f64; depth + 1];
        deriv_at_base[0] = 1.0;
        let mut images = vec![Complex64::new(0.0, 0.0); boundary_samples];
        for n in 1..=depth {
            deriv_at_base[n] = (-logs[n]).exp();
            for (j, img) in images.iter_mut().enumerate() {
                let theta = std::f64::consts::TAU * j as f64 / boundary_samples as f64;
                let y = x0 + Complex64::from_polar(level_radii[n], theta);
                match branch_image(f, orbit, n, y, None) {
                    Ok(z) => *img = z,
                    Err(e) => {
                        if policy.max_halvings > 0 {
                            r *= 0.5;
                            continue 'radius;
                        }
                        return Err(e);
                    }
                }
            }
            let mut diam = 0.0f64;
            for a in 0..boundary_samples {
                for bb in (a + 1)..boundary_samples {
                    diam = diam.max((images[a] - images[bb]).norm());
                }
            }
            sampled_diams[n] = diam;
            if n > n2 {
                // Koebe bound from the enclosing level disk, and the
                // schedule form 32·|(f^n)'(x_n)|^{-1/4}·rP.
                let bn = b[n - 1 - n2];
                let form1 = (2.0 / bn.powi(3)) * deriv_at_base[n] * 2.0 * level_radii[n];
                let form2 = 32.0 * (-logs[n] / 4.0).exp() * r * p;
                diam_certs[n] = form1.min(form2);
            } else if n == n2 {
                diam_certs[n] = 32.0 * (-logs[n] / 4.0).exp() * r * p;
            }
        }
        return Ok(BranchTower {
            base: Disk { center: x0, radius: r },
            m,
            m_interval,
            eta,
            b,
            p,
            n2,
            level_radii,
            diam_certs,
            sampled_diams,
            deriv_at_base,
            points: orbit.points.clone(),
            return_times: orbit.return_times.clone(),
        });
    }
    Err(PesinError::BranchObstructed {
        level: n2,
        source: MapError::StepTooLarge { segment: 0 },
    })
}

fn default_eta(f: &MapSpec, x0: Complex64) -> Result<f64, PesinError> {
    // Half the distance from x0 to the forward orbit of the critical values
    // within a bounded window.
    let sd = f.singular_data()?;
    let escape = f.escape_radius();
    let mut min_dist = f64::INFINITY;
    for cv in sd.finite_values() {
        let mut z = cv;
        for _ in 0..64 {
            min_dist = min_dist.min((z - x0).norm());
            z = f.evaluate(z);
            if z.norm() > escape {
                break;
            }
        }
    }
    if !min_dist.is_finite() {
        min_dist = 1.0;
    }
    Ok(0.5 * min_dist)
}

/// Contraction report for a tower.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Least-squares slope of `log|F_n'(x_0)|` against n.
    pub slope: f64,
    /// Smallest constant making `|F_n'(x_0)| ≤ C·e^{-0.9·χ·n}` at all levels.
    pub c_constant: f64,
    pub levels_used: usize,
    pub pass: bool,
}

/// Verifies the exponential contraction of the tower derivatives against a
/// Lyapunov exponent `chi`: slope within 15 percent and a uniform constant
/// for the rate `0.9·chi`.
pub fn verify_contraction(t: &BranchTower, chi: f64) -> Result<ContractionReport, PesinError> {
    let depth = t.depth();
    let levels = depth - t.n2 + 1;
    if levels < 10 {
        return Err(PesinError::InsufficientDepth(levels));
    }
    let xs: Vec<f64> = (t.n2..=depth).map(|n| n as f64).collect();
    let ys: Vec<f64> = (t.n2..=depth).map(|n| t.deriv_at_base[n].ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let c_constant = (0..=depth)
        .map(|k| t.deriv_at_base[k] * (0.9 * chi * k as f64).exp())
        .fold(0.0f64, f64::max);
    Ok(ContractionReport {
        slope,
        c_constant,
        levels_used: levels,
        pass: slope <= -chi * 0.85 && c_constant.is_finite(),
    })
}

/// Double-double verification of the branch identity `f^n(F_n(y)) = y`.
///
/// The f64 tower stores each fiber to ~1e-16; forward iteration amplifies
/// that by `|(f^n)'|`, so the identity is re-checked by refining the fiber
/// in double-double precision and iterating forward in the same precision.
/// Returns the largest residual over the certified levels.
pub fn verify_branch_identity(
    f: &MapSpec,
    orbit: &BackwardOrbit,
    tower: &BranchTower,
    samples_per_level: usize,
) -> Result<f64, PesinError> {
    let mut worst = 0.0f64;
    let mut fiber: Vec<Complex64> = Vec::new();
    for n in tower.n2..=tower.depth() {
        for j in 0..samples_per_level {
            let theta = std::f64::consts::TAU * (j as f64 + 0.37) / samples_per_level as f64;
            let y = tower.base.center + Complex64::from_polar(tower.level_radii[n], theta);
            branch_image(f, orbit, n, y, Some(&mut fiber))?;
            // Refine the fiber: z_k solves f(z_k) = z_{k-1} step by step.
            let mut targets: Vec<DdComplex> = Vec::with_capacity(fiber.len());
            targets.push(DdComplex::from_c64(fiber[0]));
            for k in 1..fiber.len() {
                let steps = match &orbit.mode {
                    OrbitMode::FirstReturn { .. } => orbit.return_times[k - 1],
                    _ => 1,
                };
                // For composed steps refine through the stored intermediates.
                let mut w = targets[k - 1];
                if steps == 1 {
                    let z = f.newton_refine_dd(fiber[k], w, 3)?;
                    targets.push(z);
                } else {
                    let seg = &orbit.segments[k - 1];
                    let mut z = DdComplex::from_c64(seg[0]);
                    for (idx, &seed) in seg.iter().enumerate() {
                        z = f.newton_refine_dd(seed, w, 3)?;
                        let _ = idx;
                        w = z;
                    }
                    targets.push(z);
                }
            }
            // Forward in double-double.
            let total_steps: u64 = match &orbit.mode {
                OrbitMode::FirstReturn { .. } => orbit.return_times[..n].iter().sum(),
                _ => n as u64,
            };
            let mut z = *targets.last().unwrap();
            for _ in 0..total_steps {
                z = f.eval_dd(z)?.0;
            }
            let residual = z.sub(DdComplex::from_c64(y)).norm_f64();
            worst = worst.max(residual);
        }
    }
    Ok(worst)
}

/// A repelling periodic point produced by the tower construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicPointRecord {
    pub point: Complex64,
    pub period: u32,
    /// `|f^m(p) − p|`, evaluated in double-double precision.
    pub residual: f64,
    pub multiplier_modulus: f64,
    pub banach_iterations: u32,
}

/// Search budget for the periodic-point finder.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_chains: usize,
    pub chain_depth: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_chains: 48, chain_depth: 96 }
    }
}

/// Finds a repelling periodic point inside `target`: samples backward
/// orbits from a boundary point in the target until some `x_m` re-enters
/// `D(x_0, r/3)` with a certified image diameter `< r/3`, then iterates the
/// contracting branch `F_m` to its fixed point and polishes it in
/// double-double precision.
pub fn find_periodic_point(
    f: &MapSpec,
    target: &Disk,
    budget: SearchBudget,
    seed: u64,
) -> Result<PeriodicPointRecord, PesinError> {
    let cloud = f.boundary_cloud(2048, seed ^ 0x5eed)?;
    let x0 = cloud
        .iter()
        .filter(|z| target.contains(**z))
        .min_by(|a, b| {
            (*a - target.center)
                .norm()
                .partial_cmp(&(*b - target.center).norm())
                .unwrap()
        })
        .copied()
        .ok_or(PesinError::TargetMissesBoundary)?;
    let mode = match f {
        MapSpec::Blaschke { .. } => OrbitMode::CircleTransfer,
        _ => OrbitMode::PlaneEqualWeight,
    };
    // The working radius keeps D(x0, rho) inside the target; branches are
    // certified on the larger disk D(x0, margin·rho) so Koebe distortion
    // controls the image between the samples.
    let margin = 3.0f64;
    let rho = (target.radius - (x0 - target.center).norm()).min(target.radius) * 0.9 / margin;
    let lam = 1.0 / margin;
    let distortion = (1.0 + lam) / (1.0 - lam).powi(3);
    let boundary_samples = 64usize;
    let mut best: Option<PeriodicPointRecord> = None;
    for chain in 0..budget.max_chains {
        let orbit = match sample_backward_orbit(
            f,
            x0,
            budget.chain_depth,
            mode.clone(),
            seed.wrapping_add(chain as u64),
        ) {
            Ok(o) => o,
            Err(PesinError::CriticalFiberHit) => continue,
            Err(e) => return Err(e),
        };
        let logs = orbit.log_derivative_products();
        for m in 1..=orbit.depth() {
            if (orbit.points[m] - x0).norm() >= rho / 3.0 {
                continue;
            }
            let deriv_at_base = (-logs[m]).exp();
            // Quick reject: the sag term of the certificate alone already
            // exceeds rho/3 at this contraction level.
            let sag_coeff = distortion * std::f64::consts::TAU / boundary_samples as f64;
            if deriv_at_base * sag_coeff >= 1.0 / 3.0 {
                continue;
            }
            // Periods with multiplier beyond ~1e6 cannot satisfy the 1e-9
            // residual on an f64-rounded record (rounding is amplified by
            // the multiplier); skip them and wait for a shorter return.
            if deriv_at_base < 1e-6 {
                continue;
            }
            // Definability of F_m on the margin disk, sampled.
            let mut obstructed = false;
            for j in 0..boundary_samples / 2 {
                let theta = std::f64::consts::TAU * j as f64 / (boundary_samples / 2) as f64;
                let y = x0 + Complex64::from_polar(margin * rho, theta);
                if branch_image(f, &orbit, m, y, None).is_err() {
                    obstructed = true;
                    break;
                }
            }
            if obstructed {
                continue;
            }
            let mut images = Vec::with_capacity(boundary_samples);
            for j in 0..boundary_samples {
                let theta = std::f64::consts::TAU * j as f64 / boundary_samples as f64;
                let y = x0 + Complex64::from_polar(rho, theta);
                match branch_image(f, &orbit, m, y, None) {
                    Ok(z) => images.push(z),
                    Err(_) => {
                        obstructed = true;
                        break;
                    }
                }
            }
            if obstructed {
                continue;
            }
            let mut diam = 0.0f64;
            for a in 0..images.len() {
                for bb in (a + 1)..images.len() {
                    diam = diam.max((images[a] - images[bb]).norm());
                }
            }
            let sup_deriv = deriv_at_base * distortion;
            let cert = diam + sup_deriv * std::f64::consts::TAU * rho / boundary_samples as f64;
            if cert >= rho / 3.0 {
                continue;
            }
            // Banach iteration of F_m from x0.
            let mut z = x0;
            let mut iterations = 0u32;
            let mut converged = false;
            for _ in 0..256 {
                let next = match branch_image(f, &orbit, m, z, None) {
                    Ok(w) => w,
                    Err(_) => break,
                };
                iterations += 1;
                let delta = (next - z).norm();
                z = next;
                if delta < 1e-12 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                continue;
            }
            // The Banach point may have a shorter period than the branch
            // depth; reduce to the minimal one before polishing.
            let total_steps: u64 = match &orbit.mode {
                OrbitMode::FirstReturn { .. } => orbit.return_times[..m].iter().sum(),
                _ => m as u64,
            };
            let period = minimal_period(f, z, total_steps);
            // Double-double polish of f^period(p) = p and the residual of
            // the rounded record.
            let p = polish_periodic_dd(f, z, period)?;
            let (fp, mult) = dd_forward(f, p, period)?;
            let residual = fp.sub(DdComplex::from_c64(p)).norm_f64();
            if residual > 1e-9 || mult <= 1.0 {
                continue;
            }
            let record = PeriodicPointRecord {
                point: p,
                period: period as u32,
                residual,
                multiplier_modulus: mult,
                banach_iterations: iterations,
            };
            let better = match &best {
                None => true,
                Some(b) => record.period < b.period,
            };
            if better {
                best = Some(record);
            }
            break;
        }
        if best.as_ref().is_some_and(|b| b.period == 1) {
            break;
        }
    }
    best.ok_or(PesinError::BudgetExhausted { chains: budget.max_chains })
}

/// Smallest `k ≤ cap` with `f^k(p) ≈ p` at a loose tolerance (the caller
/// re-verifies in double-double precision).
fn minimal_period(f: &MapSpec, p: Complex64, cap: u64) -> u64 {
    let mut z = p;
    for k in 1..=cap {
        z = f.evaluate(z);
        if (z - p).norm() < 1e-5 * (1.0 + p.norm()) {
            return k;
        }
    }
    cap
}

/// Forward orbit in double-double precision with the chain-rule multiplier.
fn dd_forward(f: &MapSpec, p: Complex64, steps: u64) -> Result<(DdComplex, f64), PesinError> {
    let mut z = DdComplex::from_c64(p);
    let mut log_mult = 0.0f64;
    for _ in 0..steps {
        let (val, deriv) = f.eval_dd(z)?;
        log_mult += deriv.norm_f64().ln();
        z = val;
    }
    Ok((z, log_mult.exp()))
}

/// Newton polish of `f^m(z) − z = 0` in double-double precision.
fn polish_periodic_dd(f: &MapSpec, z0: Complex64, steps: u64) -> Result<Complex64, PesinError> {
    let one = DdComplex::from_c64(Complex64::new(1.0, 0.0));
    let mut z = DdComplex::from_c64(z0);
    for _ in 0..6 {
        let mut w = z;
        let mut deriv = one;
        for _ in 0..steps {
            let (val, d) = f.eval_dd(w)?;
            deriv = deriv.mul(d);
            w = val;
        }
        let g = w.sub(z);
        let gp = deriv.sub(one);
        if gp.norm_f64() < 1e-30 {
            break;
        }
        z = z.sub(g.div(gp));
    }
    Ok(z.to_c64())
}

/// Aggregate result of a periodic-point scan over a disk cover.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityScan {
    pub records: Vec<(usize, PeriodicPointRecord)>,
    pub failures: Vec<(usize, String)>,
    pub hit_rate: f64,
}

/// Runs the periodic-point finder once per cover disk.
pub fn density_scan(
    f: &MapSpec,
    cover: &[Disk],
    budget: SearchBudget,
    seed: u64,
) -> DensityScan {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, disk) in cover.iter().enumerate() {
        match find_periodic_point(f, disk, budget, seed.wrapping_add(1000 * i as u64)) {
            Ok(rec) => records.push((i, rec)),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let hit_rate = records.len() as f64 / cover.len().max(1) as f64;
    DensityScan { records, failures, hit_rate }
}

/// Positive-measure circle cells at a positive distance from the recorded
/// grand-orbit-finite points (the repelling fixed points used as anchors).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReturnPartition {
    pub cells: Vec<SetDescriptor>,
    pub exclusion_radius: f64,
}

impl ReturnPartition {
    /// Equal annular arc cells of the circle avoiding a neighborhood of the
    /// boundary fixed point of `f`.
    pub fn circle_cells(
        f: &MapSpec,
        n_cells: usize,
        exclusion_radius: f64,
    ) -> Result<ReturnPartition, PesinError> {
        let fixed = f.repelling_fixed_point()?;
        let fixed_angle = fixed.arg();
        let total = std::f64::consts::TAU - 4.0 * exclusion_radius;
        let width = total / n_cells as f64;
        let cells = (0..n_cells)
            .map(|k| SetDescriptor::Arc {
                center_angle: fixed_angle
                    + 2.0 * exclusion_radius
                    + width * (k as f64 + 0.5),
                length: width,
            })
            .collect();
        Ok(ReturnPartition { cells, exclusion_radius })
    }
}

/// Builds a tower over a first-return orbit on one partition cell: the same
/// quarter-power schedule, with each level composed of the recorded number
/// of single-map branch continuations and certificates `ε·Mⁿ`. Critical
/// values of `f^T` are checked against the level disks, and return times
/// exceeding `n²` repeatedly abort the build.
pub fn build_return_branch_tower(
    f: &MapSpec,
    partition: &ReturnPartition,
    cell_index: usize,
    orbit: &BackwardOrbit,
    eps: f64,
    m: Option<f64>,
) -> Result<BranchTower, PesinError> {
    let cell = partition.cells[cell_index];
    match &orbit.mode {
        OrbitMode::FirstReturn { cell: c } => {
            debug_assert!(matches!(c, SetDescriptor::Arc { .. }));
            let _ = c;
        }
        _ => return Err(PesinError::MissingReturnTimes),
    }
    let _ = cell;
    // Return-time tail guard: T(x_{n+1}) > n² counts as a blow-up event.
    let mut blowups = 0usize;
    let mut max_t = 0u64;
    for (n, &t) in orbit.return_times.iter().enumerate() {
        max_t = max_t.max(t);
        let bound = ((n + 1) * (n + 1)) as u64;
        if t > bound {
            blowups += 1;
        }
    }
    if blowups >= 3 {
        return Err(PesinError::ReturnTimeBlowup { count: blowups, max_t });
    }
    let tower = build_branch_tower(f, orbit, Some(eps), m, RadiusPolicy::default())?;
    // Critical values of f^{T} along each step must avoid the shrinking
    // level disks.
    let sd = f.singular_data()?;
    let cvs = sd.finite_values();
    for n in tower.n2..tower.depth() {
        let t = orbit.return_times[n] as usize;
        let scale = eps * tower.m.powi(n as i32);
        for cv in &cvs {
            let mut w = *cv;
            for _ in 0..t {
                if (w - tower.points[n]).norm() < scale {
                    return Err(PesinError::BranchObstructed {
                        level: n,
                        source: MapError::CriticalProximity { deriv: 0.0, segment: 0 },
                    });
                }
                w = f.evaluate(w);
            }
        }
    }
    Ok(tower)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn backward_orbit_on_circle_fiber() {
        let f = MapSpec::quadratic(c(0.0, 0.0));
        let orbit =
            sample_backward_orbit(&f, c(1.0, 0.0), 3, OrbitMode::PlaneEqualWeight, 3).unwrap();
        assert_eq!(orbit.points.len(), 4);
        for k in 0..3 {
            let fwd = f.evaluate(orbit.points[k + 1]);
            assert!((fwd - orbit.points[k]).norm() < 1e-12);
            assert!((orbit.points[k + 1].norm() - 1.0).abs() < 1e-12);
        }
        let single = sample_backward_orbit(&f, c(1.0, 0.0), 0, OrbitMode::PlaneEqualWeight, 3)
            .unwrap();
        assert_eq!(single.points.len(), 1);
    }

    #[test]
    fn backward_orbit_depth_forty_verified() {
        let f = MapSpec::quadratic(c(0.5, 0.0));
        let x0 = f.repelling_fixed_point().unwrap();
        let orbit = sample_backward_orbit(&f, x0, 40, OrbitMode::PlaneEqualWeight, 11).unwrap();
        for k in 0..orbit.depth() {
            let res = (f.evaluate(orbit.points[k + 1]) - orbit.points[k]).norm();
            assert!(res < 1e-10);
        }
    }

    #[test]
    fn tower_schedule_closed_form_doubling() {
        // For z² from x0 = 1: |(f^n)'(x_n)| = 2^n exactly, so
        // b_n = 2^{-(n+1)/4}/2 and the derivative ladder is 2^{-n}.
        let f = MapSpec::quadratic(c(0.0, 0.0));
        let orbit =
            sample_backward_orbit(&f, c(1.0, 0.0), 20, OrbitMode::PlaneEqualWeight, 5).unwrap();
        let tower = build_branch_tower(&f, &orbit, None, None, RadiusPolicy::default()).unwrap();
        assert_eq!(tower.n2, 1);
        for (k, &bk) in tower.b.iter().enumerate() {
            let n = tower.n2 + k;
            let expected = 0.5 * 2f64.powf(-((n + 1) as f64) / 4.0);
            assert!((bk - expected).abs() < 1e-12, "b[{k}]");
        }
        assert!(tower.p.is_finite() && tower.p > 1.0);
        for n in 0..=tower.depth() {
            assert!((tower.deriv_at_base[n] - 2f64.powi(-(n as i32))).abs() < 1e-12);
        }
        // Level radii decrease to the base radius.
        for n in 1..=tower.depth() {
            assert!(tower.level_radii[n] <= tower.level_radii[n - 1] + 1e-15);
            assert!(tower.level_radii[n] >= tower.base.radius - 1e-15);
        }
        // Certificates hold and dominate the sampled diameters.
        for n in tower.n2..=tower.depth() {
            assert!(tower.diam_certs[n] <= tower.eta * tower.m.powi(n as i32) + 1e-12);
            assert!(tower.sampled_diams[n] <= tower.diam_certs[n] + 1e-9);
        }
    }

    #[test]
    fn tower_certificates_quadratic_perturbed() {
        let f = MapSpec::quadratic(c(-0.1, 0.0));
        let x0 = f.repelling_fixed_point().unwrap();
        let orbit = sample_backward_orbit(&f, x0, 40, OrbitMode::PlaneEqualWeight, 7).unwrap();
        let tower = build_branch_tower(&f, &orbit, None, None, RadiusPolicy::default()).unwrap();
        for n in tower.n2..=tower.depth() {
            assert!(
                tower.diam_certs[n] <= tower.eta * tower.m.powi(n as i32) + 1e-12,
                "level {n}"
            );
            assert!(
                tower.sampled_diams[n] <= tower.diam_certs[n] + 1e-9,
                "sampled {} vs cert {} at level {n}",
                tower.sampled_diams[n],
                tower.diam_certs[n]
            );
        }
        let report = verify_contraction(&tower, 2.0f64.ln()).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn branch_identity_dd_depth_forty() {
        let f = MapSpec::quadratic(c(-0.1, 0.0));
        let x0 = f.repelling_fixed_point().unwrap();
        let orbit = sample_backward_orbit(&f, x0, 40, OrbitMode::PlaneEqualWeight, 13).unwrap();
        let tower = build_branch_tower(&f, &orbit, None, None, RadiusPolicy::default()).unwrap();
        let worst = verify_branch_identity(&f, &orbit, &tower, 8).unwrap();
        assert!(worst < 1e-8, "worst branch-identity residual {worst:e}");
    }

    #[test]
    fn composition_law_pointwise() {
        let f = MapSpec::quadratic(c(-0.1, 0.0));
        let x0 = f.repelling_fixed_point().unwrap();
        let orbit = sample_backward_orbit(&f, x0, 20, OrbitMode::PlaneEqualWeight, 19).unwrap();
        let tower = build_branch_tower(&f, &orbit, None, None, RadiusPolicy::default()).unwrap();
        for n in tower.n2..tower.depth() {
            for j in 0..8 {
                let theta = std::f64::consts::TAU * j as f64 / 8.0;
                let y = x0 + Complex64::from_polar(tower.level_radii[n + 1], theta);
                let direct = branch_image(&f, &orbit, n + 1, y, None).unwrap();
                let via = branch_image(&f, &orbit, n, y, None).unwrap();
                // One more single-branch step from x_n to x_{n+1}.
                let step = f
                    .preimage_step_refined(orbit.points[n + 1], orbit.points[n], via)
                    .unwrap();
                assert!((direct - step).norm() < 1e-9, "level {n}");
            }
        }
    }

    #[test]
    fn obstructed_orbit_reports_level() {
        // A synthetic orbit through the critical point of z².
        let f = MapSpec::quadratic(c(0.0, 0.0));
        let orbit = BackwardOrbit {
            points: vec![c(1e-16, 0.0), c(1e-8, 0.0), c(1e-4, 0.0), c(1e-2, 0.0), c(0.1, 0.0), c(0.1f64.sqrt(), 0.0)],
            step_derivs: vec![
                c(2e-8, 0.0),
                c(2e-4, 0.0),
                c(2e-2, 0.0),
                c(0.2, 0.0),
                c(2.0 * 0.1f64.sqrt(), 0.0),
            ],
            log_weights: vec![0.0; 5],
            mode: OrbitMode::PlaneEqualWeight,
            return_times: vec![],
            segments: vec![],
        };
        let err = build_branch_tower(
            &f,
            &orbit,
            Some(0.5),
            Some(0.9),
            RadiusPolicy { initial_cap: None, max_halvings: 0 },
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                PesinError::BranchObstructed { .. } | PesinError::ScheduleNeverStarts { .. }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn periodic_point_fixed_of_doubling() {
        let f = MapSpec::quadratic(c(0.0, 0.0));
        let target = Disk { center: c(1.0, 0.0), radius: 0.2 };
        let rec = find_periodic_point(&f, &target, SearchBudget::default(), 23).unwrap();
        assert!(rec.residual < 1e-9, "residual {:e}", rec.residual);
        assert!(rec.multiplier_modulus > 1.0);
        // The only periodic points in D(1, 0.2) on the circle are 1 itself
        // (for small periods).
        assert!((rec.point - c(1.0, 0.0)).norm() < 1e-6, "point {}", rec.point);
        assert!((rec.multiplier_modulus - 2f64.powi(rec.period as i32)).abs() < 1e-6);
    }

    #[test]
    fn periodic_point_period_two_cycle() {
        let f = MapSpec::quadratic(c(0.0, 0.0));
        let angle = std::f64::consts::TAU / 3.0;
        let target = Disk { center: Complex64::from_polar(1.0, angle), radius: 0.2 };
        let rec = find_periodic_point(&f, &target, SearchBudget::default(), 31).unwrap();
        assert!(rec.residual < 1e-9);
        assert!(rec.period % 2 == 0, "period {}", rec.period);
        // The record must be the period-two point e^{2πi/3} (up to the
        // sampled branch).
        assert!(
            (rec.point - Complex64::from_polar(1.0, angle)).norm() < 1e-6,
            "point {}",
            rec.point
        );
    }

    #[test]
    fn multiplier_matches_finite_differences() {
        let f = MapSpec::quadratic(c(-0.1, 0.0));
        let target = Disk { center: c(1.0, 0.0), radius: 0.25 };
        let rec = find_periodic_point(&f, &target, SearchBudget::default(), 7).unwrap();
        let m = rec.period as usize;
        let h = 1e-7;
        let fm = |z: Complex64| {
            let mut w = z;
            for _ in 0..m {
                w = f.evaluate(w);
            }
            w
        };
        let fd = (fm(rec.point + c(h, 0.0)) - fm(rec.point - c(h, 0.0))) / (2.0 * h);
        assert!(
            (fd.norm() - rec.multiplier_modulus).abs() / rec.multiplier_modulus < 1e-5,
            "fd {} vs chain {}",
            fd.norm(),
            rec.multiplier_modulus
        );
    }

    #[test]
    fn density_scan_trivial_cover() {
        let f = MapSpec::quadratic(c(0.0, 0.0));
        let cover = vec![Disk { center: c(1.0, 0.0), radius: 1.5 }];
        let scan = density_scan(&f, &cover, SearchBudget::default(), 3);
        assert_eq!(scan.records.len(), 1);
        let off = vec![Disk { center: c(5.0, 0.0), radius: 0.2 }];
        let scan = density_scan(&f, &off, SearchBudget::default(), 3);
        assert!(scan.records.is_empty());
        assert_eq!(scan.failures.len(), 1);
    }

    #[test]
    fn first_return_orbit_segments_consistent() {
        let g = MapSpec::power(2);
        let cell = SetDescriptor::Arc { center_angle: 0.8, length: std::f64::consts::TAU / 4.0 };
        let x0 = Complex64::from_polar(1.0, 0.8);
        let orbit = sample_backward_orbit(
            &g,
            x0,
            12,
            OrbitMode::FirstReturn { cell },
            41,
        )
        .unwrap();
        assert_eq!(orbit.points.len(), 13);
        assert_eq!(orbit.return_times.len(), 12);
        for (k, seg) in orbit.segments.iter().enumerate() {
            assert_eq!(seg.len() as u64, orbit.return_times[k]);
            assert!((seg.last().unwrap() - orbit.points[k + 1]).norm() < 1e-12);
            // Intermediate points stay outside the cell.
            for z in &seg[..seg.len() - 1] {
                assert!(!cell.contains(*z), "intermediate point in cell");
            }
        }
    }

    #[test]
    fn return_tower_whole_circle_reduces_to_plain() {
        let g = MapSpec::power(2);
        let part = ReturnPartition {
            cells: vec![SetDescriptor::Arc { center_angle: 0.0, length: std::f64::consts::TAU }],
            exclusion_radius: 0.0,
        };
        let x0 = Complex64::from_polar(1.0, 2.4);
        let ret_orbit = sample_backward_orbit(
            &g,
            x0,
            16,
            OrbitMode::FirstReturn { cell: part.cells[0] },
            9,
        )
        .unwrap();
        assert!(ret_orbit.return_times.iter().all(|&t| t == 1));
        let plain = BackwardOrbit {
            points: ret_orbit.points.clone(),
            step_derivs: ret_orbit.step_derivs.clone(),
            log_weights: ret_orbit.log_weights.clone(),
            mode: OrbitMode::CircleTransfer,
            return_times: vec![],
            segments: vec![],
        };
        let t1 = build_return_branch_tower(&g, &part, 0, &ret_orbit, 0.5, None).unwrap();
        let t2 = build_branch_tower(&g, &plain, Some(0.5), None, RadiusPolicy::default()).unwrap();
        assert_eq!(t1.n2, t2.n2);
        assert!((t1.p - t2.p).abs() < 1e-12);
        for (a, b) in t1.b.iter().zip(&t2.b) {
            assert!((a - b).abs() < 1e-12);
        }
        for n in t1.n2..=t1.depth() {
            assert!((t1.diam_certs[n] - t2.diam_certs[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn return_tower_arc_cell_certificates_decay() {
        let g = MapSpec::power(2);
        let part = ReturnPartition::circle_cells(&g, 4, 1e-3).unwrap();
        let cell = part.cells[1];
        let x0 = match cell {
            SetDescriptor::Arc { center_angle, .. } => Complex64::from_polar(1.0, center_angle),
            _ => unreachable!(),
        };
        let orbit = sample_backward_orbit(
            &g,
            x0,
            14,
            OrbitMode::FirstReturn { cell },
            77,
        )
        .unwrap();
        let tower = build_return_branch_tower(&g, &part, 1, &orbit, 0.4, None).unwrap();
        for n in tower.n2..=tower.depth() {
            assert!(tower.diam_certs[n] <= tower.eta * tower.m.powi(n as i32) + 1e-12);
        }
        // Certificates decay geometrically.
        let first = tower.diam_certs[tower.n2];
        let last = tower.diam_certs[tower.depth()];
        assert!(last < first * 0.5);
    }

    #[test]
    fn return_time_blowup_is_reported() {
        let g = MapSpec::power(2);
        let part = ReturnPartition {
            cells: vec![SetDescriptor::Arc { center_angle: 0.0, length: 0.5 }],
            exclusion_radius: 0.0,
        };
        let mut orbit = sample_backward_orbit(
            &g,
            c(1.0, 0.0),
            8,
            OrbitMode::FirstReturn { cell: part.cells[0] },
            5,
        )
        .unwrap();
        // Forge huge return times to hit the tail guard.
        for (k, t) in orbit.return_times.iter_mut().enumerate() {
            *t = ((k + 1) * (k + 1) + 100) as u64;
        }
        let err = build_return_branch_tower(&g, &part, 0, &orbit, 0.4, None).unwrap_err();
        assert!(matches!(err, PesinError::ReturnTimeBlowup { .. }), "{err:?}");
    }
}
