//! Lyapunov exponents (quadrature and Birkhoff, forward and backward),
//! first-return-map machinery with the Kac and return-exponent identities,
//! and order-of-growth diagnostics in sectors.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::SpherePoint;
use crate::inner;
use crate::maps::{MapError, MapSpec};
use crate::rng::{substream, KahanSum};

#[derive(Debug, Error)]
pub enum ErgodicError {
    #[error("operation requires a finite Blaschke product of degree >= 2")]
    NeedBlaschke,
    #[error("the integrand degenerates at a quadrature node (|g'| = {0:e})")]
    CriticalOnCircle(f64),
    #[error("orbit escaped the bounded region at step {step} (|z| = {modulus:e})")]
    OrbitEscaped { step: usize, modulus: f64 },
    #[error("every return trial exceeded the iteration cap")]
    AllCensored,
    #[error("first-return set has measure {0}, need (0, 1)")]
    BadSetMeasure(f64),
    #[error("growth shells were empty at radius index {0}")]
    EmptyShell(usize),
    #[error(transparent)]
    Inner(#[from] inner::InnerError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// How a Lyapunov exponent estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMethod {
    Quadrature,
    BirkhoffForward,
    BirkhoffBackward,
}

/// A Lyapunov exponent with its convergence trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub chi: f64,
    pub method: LyapunovMethod,
    pub n: usize,
    /// Running averages recorded at ten equal checkpoints.
    pub running_tail: Vec<f64>,
}

impl LyapunovResult {
    /// Cauchy diagnostic: gap between the two last recorded averages.
    pub fn tail_gap(&self) -> f64 {
        match self.running_tail.as_slice() {
            [.., a, b] => (a - b).abs(),
            _ => f64::NAN,
        }
    }
}

/// `∫ log|g'| dλ` over the unit circle by periodic trapezoid quadrature,
/// spectrally accurate for Blaschke products.
pub fn lyapunov_quadrature_circle(
    g: &MapSpec,
    n_quad: usize,
) -> Result<LyapunovResult, ErgodicError> {
    match g.degree() {
        Some(d) if d >= 2 => {}
        _ => return Err(ErgodicError::NeedBlaschke),
    }
    if !matches!(g, MapSpec::Blaschke { .. }) {
        return Err(ErgodicError::NeedBlaschke);
    }
    let mut acc = KahanSum::new();
    let mut tail = Vec::new();
    for k in 0..n_quad {
        let theta = std::f64::consts::TAU * k as f64 / n_quad as f64;
        let d = g.derivative(Complex64::from_polar(1.0, theta)).norm();
        if d < 1e-12 {
            return Err(ErgodicError::CriticalOnCircle(d));
        }
        acc.add(d.ln());
        if (k + 1) % (n_quad / 10).max(1) == 0 {
            tail.push(acc.value() / (k + 1) as f64);
        }
    }
    Ok(LyapunovResult {
        chi: acc.value() / n_quad as f64,
        method: LyapunovMethod::Quadrature,
        n: n_quad,
        running_tail: tail,
    })
}

/// Orbit direction for Birkhoff averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirkhoffDirection {
    Forward,
    Backward,
}

/// Birkhoff average of `log|f'|`: forward along the orbit of `x0` on the
/// invariant boundary set, or backward along a sampled natural-extension
/// chain (transfer weights on the circle, uniform weights for polynomial
/// basins).
pub fn birkhoff_average(
    f: &MapSpec,
    x0: Complex64,
    n: usize,
    direction: BirkhoffDirection,
    seed: u64,
) -> Result<LyapunovResult, ErgodicError> {
    let record_every = (n / 10).max(1);
    let mut acc = KahanSum::new();
    let mut tail = Vec::new();
    match direction {
        BirkhoffDirection::Forward => {
            let escape = f.escape_radius();
            let mut z = x0;
            for k in 0..n {
                acc.add(f.derivative(z).norm().ln());
                z = f.evaluate(z);
                if matches!(f, MapSpec::Polynomial { .. }) && z.norm() > escape {
                    return Err(ErgodicError::OrbitEscaped { step: k, modulus: z.norm() });
                }
                if matches!(f, MapSpec::Blaschke { .. }) {
                    z /= z.norm();
                }
                if (k + 1) % record_every == 0 {
                    tail.push(acc.value() / (k + 1) as f64);
                }
            }
            Ok(LyapunovResult {
                chi: acc.value() / n as f64,
                method: LyapunovMethod::BirkhoffForward,
                n,
                running_tail: tail,
            })
        }
        BirkhoffDirection::Backward => {
            match f {
                MapSpec::Blaschke { .. } => {
                    let chain = inner::backward_sample_circle(f, x0 / x0.norm(), n, seed)?;
                    for (k, d) in chain.step_derivs.iter().enumerate() {
                        acc.add(d.ln());
                        if (k + 1) % record_every == 0 {
                            tail.push(acc.value() / (k + 1) as f64);
                        }
                    }
                }
                MapSpec::Polynomial { .. } => {
                    let mut rng = substream(seed, 1);
                    let mut z = x0;
                    for k in 0..n {
                        let pre = f.preimages_all(z)?;
                        let mut pick = rng.gen_range(0..pre.points.len());
                        // Resample away from critical fibers.
                        let mut tries = 0;
                        while f.derivative(pre.points[pick]).norm() < 1e-10 && tries < 32 {
                            pick = rng.gen_range(0..pre.points.len());
                            tries += 1;
                        }
                        z = pre.points[pick];
                        acc.add(f.derivative(z).norm().ln());
                        if (k + 1) % record_every == 0 {
                            tail.push(acc.value() / (k + 1) as f64);
                        }
                    }
                }
                _ => return Err(ErgodicError::NeedBlaschke),
            }
            Ok(LyapunovResult {
                chi: acc.value() / n as f64,
                method: LyapunovMethod::BirkhoffBackward,
                n,
                running_tail: tail,
            })
        }
    }
}

/// Positive-measure subset of the circle for first-return experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SetDescriptor {
    /// Arc centered at `center_angle` with angular `length` (radians).
    Arc { center_angle: f64, length: f64 },
    /// Euclidean disk; membership for circle points.
    Disk { center: Complex64, radius: f64 },
}

impl SetDescriptor {
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            SetDescriptor::Arc { center_angle, length } => {
                let mut gap = z.arg() - center_angle;
                while gap > std::f64::consts::PI {
                    gap -= std::f64::consts::TAU;
                }
                while gap < -std::f64::consts::PI {
                    gap += std::f64::consts::TAU;
                }
                gap.abs() <= length / 2.0
            }
            SetDescriptor::Disk { center, radius } => (z - center).norm() < *radius,
        }
    }

    /// Normalized invariant measure for circle dynamics (arc length / 2π);
    /// disks are measured against the uniform angle distribution.
    pub fn circle_measure(&self) -> f64 {
        match self {
            SetDescriptor::Arc { length, .. } => length / std::f64::consts::TAU,
            SetDescriptor::Disk { center, radius } => {
                // Fraction of the unit circle inside the disk.
                let t = (1.0 + center.norm_sqr() - radius * radius) / (2.0 * center.norm());
                if center.norm() == 0.0 {
                    return if *radius > 1.0 { 1.0 } else { 0.0 };
                }
                if t <= -1.0 {
                    1.0
                } else if t >= 1.0 {
                    0.0
                } else {
                    t.acos() / std::f64::consts::PI
                }
            }
        }
    }

    /// A point of the set under the uniform angle distribution.
    fn sample_circle_point(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Option<Complex64> {
        match self {
            SetDescriptor::Arc { center_angle, length } => {
                let theta = center_angle + rng.gen_range(-length / 2.0..length / 2.0);
                Some(Complex64::from_polar(1.0, theta))
            }
            SetDescriptor::Disk { .. } => {
                for _ in 0..100_000 {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    let z = Complex64::from_polar(1.0, theta);
                    if self.contains(z) {
                        return Some(z);
                    }
                }
                None
            }
        }
    }
}

/// Iteration cap for one return trial.
pub const RETURN_CAP: usize = 1_000_000;

/// Sampled first-return data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReturnData {
    pub set: SetDescriptor,
    pub return_times: Vec<u64>,
    pub measure_of_set: f64,
    pub censored: usize,
    /// Mean of `Σ_{j<T} log|f'|` over the completed trials.
    pub mean_log_deriv_sum: f64,
}

/// Runs `n_trials` first-return experiments on the circle: start points are
/// drawn from the set under the invariant (uniform-angle) measure and
/// iterated until re-entry.
pub fn first_return(
    f: &MapSpec,
    set: SetDescriptor,
    n_trials: usize,
    seed: u64,
) -> Result<ReturnData, ErgodicError> {
    if !matches!(f, MapSpec::Blaschke { .. }) {
        return Err(ErgodicError::NeedBlaschke);
    }
    let mut return_times = Vec::with_capacity(n_trials);
    let mut censored = 0usize;
    let mut log_sums = KahanSum::new();
    for trial in 0..n_trials {
        let mut rng = substream(seed, trial as u64);
        let Some(start) = set.sample_circle_point(&mut rng) else {
            censored += 1;
            continue;
        };
        let mut z = start;
        let mut log_acc = 0.0f64;
        let mut time = 0u64;
        let mut returned = false;
        for _ in 0..RETURN_CAP {
            log_acc += f.derivative(z).norm().ln();
            let next = f.evaluate(z);
            z = next / next.norm();
            time += 1;
            if set.contains(z) {
                returned = true;
                break;
            }
        }
        if returned {
            return_times.push(time);
            log_sums.add(log_acc);
        } else {
            censored += 1;
        }
    }
    if return_times.is_empty() {
        return Err(ErgodicError::AllCensored);
    }
    let completed = return_times.len() as f64;
    Ok(ReturnData {
        set,
        measure_of_set: set.circle_measure(),
        censored,
        mean_log_deriv_sum: log_sums.value() / completed,
        return_times,
    })
}

/// Kac identity report: `mean(T)·μ(X) = 1` within sampling error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KacReport {
    pub mean_return: f64,
    pub measure_of_set: f64,
    pub product: f64,
    /// Three standard errors of the product.
    pub tolerance: f64,
    pub pass: bool,
}

pub fn kac_check(rd: &ReturnData) -> Result<KacReport, ErgodicError> {
    let mu = rd.measure_of_set;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(ErgodicError::BadSetMeasure(mu));
    }
    let n = rd.return_times.len() as f64;
    let mean = rd.return_times.iter().map(|&t| t as f64).sum::<f64>() / n;
    let var = rd
        .return_times
        .iter()
        .map(|&t| (t as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let se_mean = (var / n).sqrt();
    let product = mean * mu;
    let tolerance = 3.0 * se_mean * mu;
    Ok(KacReport {
        mean_return: mean,
        measure_of_set: mu,
        product,
        tolerance,
        pass: (product - 1.0).abs() <= tolerance,
    })
}

/// Two-sided estimate of the induced-map exponent identity:
/// `∫ log|f'_X| dμ_X = χ / μ(X)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReturnIdentityReport {
    /// Monte-Carlo mean of `Σ_{j<T} log|f'|` over return trials.
    pub lhs: f64,
    /// `χ / μ(X)` with χ from circle quadrature.
    pub rhs: f64,
    pub relative_gap: f64,
}

pub fn return_lyapunov_identity(
    f: &MapSpec,
    set: SetDescriptor,
    n_trials: usize,
    seed: u64,
) -> Result<ReturnIdentityReport, ErgodicError> {
    let rd = first_return(f, set, n_trials, seed)?;
    let chi = lyapunov_quadrature_circle(f, 4096)?.chi;
    let rhs = chi / rd.measure_of_set;
    let lhs = rd.mean_log_deriv_sum;
    Ok(ReturnIdentityReport {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / rhs.abs().max(1e-300),
    })
}

/// Sector parameters for the order-of-growth diagnostic. The sector opens
/// from `vertex` around `direction` with half-angle `π·alpha`; an infinite
/// vertex is encoded by `vertex: SpherePoint::Infinity`, in which case the
/// scale of a point is `1/|z|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthSectorParams {
    pub alpha: f64,
    pub vertex: SpherePoint,
    pub direction: Complex64,
}

/// Order-of-growth report: fitted envelope exponent and the integrability
/// predicate `β < 1/(2α)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub beta_hat: f64,
    pub integrable: bool,
    /// Per-shell max of `log|f'|`.
    pub shell_maxima: Vec<f64>,
}

/// Samples `|f'|` on the sector shells between consecutive radii and fits
/// the doubly-logarithmic envelope `log log|f'| ~ −β·log r`.
pub fn sector_growth_check(
    f: &MapSpec,
    params: &GrowthSectorParams,
    radii: &[f64],
) -> Result<GrowthReport, ErgodicError> {
    let samples_per_shell = 512;
    let mut shell_maxima = Vec::with_capacity(radii.len());
    let dir_angle = params.direction.arg();
    let half = std::f64::consts::PI * params.alpha;
    for (idx, &r) in radii.iter().enumerate() {
        let mut max_log = f64::NEG_INFINITY;
        let mut count = 0usize;
        for k in 0..samples_per_shell {
            let t = (k as f64 + 0.5) / samples_per_shell as f64;
            let phi = dir_angle + half * (2.0 * t - 1.0);
            let z = match params.vertex {
                SpherePoint::Finite(v) => v + Complex64::from_polar(r, phi),
                // Scale r means |z| = 1/r around the direction at infinity.
                SpherePoint::Infinity => Complex64::from_polar(1.0 / r, phi),
            };
            let log_d = f.log_derivative_modulus(z);
            if log_d.is_finite() {
                max_log = max_log.max(log_d);
                count += 1;
            }
        }
        if count == 0 {
            return Err(ErgodicError::EmptyShell(idx));
        }
        shell_maxima.push(max_log);
    }
    // Fit log(max log|f'|) against log(1/r) where the envelope is positive.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &m) in radii.iter().zip(&shell_maxima) {
        if m > 1e-9 {
            xs.push((1.0 / r).ln());
            ys.push(m.ln());
        }
    }
    let beta_hat = if xs.len() < 2 {
        0.0
    } else {
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let ybar = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
        sxy / sxx
    };
    Ok(GrowthReport {
        beta_hat,
        integrable: beta_hat < 1.0 / (2.0 * params.alpha),
        shell_maxima,
    })
}
