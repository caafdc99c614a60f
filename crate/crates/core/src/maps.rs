//! The catalog of iterated maps: concrete holomorphic families with
//! closed-form derivatives, critical/singular values, full preimage
//! enumeration for the finite-degree families, and Newton-based analytic
//! continuation of inverse branches for all of them.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::DdComplex;
use crate::geometry::SpherePoint;
use crate::polyroots;

/// Truncation window for the critical values of `z + e^{-z}` (they sit at
/// `1 + 2πik`; desk-scale experiments stay inside a bounded strip).
pub const BAKER_IM_WINDOW: f64 = 8.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("polynomial must have degree >= 2")]
    DegreeTooLow,
    #[error("blaschke zero must lie strictly inside the unit disk, got |a| = {0}")]
    ZeroNotInDisk(f64),
    #[error("blaschke rotation must have modulus 1, got {0}")]
    RotationNotUnit(f64),
    #[error("map family has infinite degree; full preimage enumeration is unavailable")]
    InfiniteDegree,
    #[error("root finding failed: {0}")]
    Roots(#[from] polyroots::RootsError),
    #[error("seed does not satisfy f(seed) = path start (residual {0:e})")]
    BadSeed(f64),
    #[error("continuation step too large; refine the path (segment {segment})")]
    StepTooLarge { segment: usize },
    #[error("continuation ran into a critical point (|f'| = {deriv:e} at segment {segment})")]
    CriticalProximity { deriv: f64, segment: usize },
    #[error("no repelling fixed point found for the boundary sampler")]
    NoRepellingFixedPoint,
    #[error("backward step left the escape-bounded region")]
    SamplerDiverged,
    #[error("double-double evaluation unsupported for this family")]
    DdUnsupported,
}

/// One of the concrete map families in the catalog.
///
/// Polynomials are stored with ascending coefficients. A Blaschke product is
/// `rotation · ∏ (z − a_j)/(1 − ā_j z)` with all zeros strictly inside the
/// unit disk. `FatouBaker` is the entire map `z + e^{-z}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapSpec {
    Polynomial { coeffs: Vec<Complex64> },
    Blaschke { zeros: Vec<Complex64>, rotation: Complex64 },
    ExpFamily { lambda: Complex64 },
    SineFamily { lambda: Complex64 },
    FatouBaker,
}

/// Critical values, asymptotic values and punctures of a catalog map.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SingularData {
    pub critical_values: Vec<Complex64>,
    pub asymptotic_values: Vec<Complex64>,
    /// Designated accumulation points; infinity is the usual one.
    pub punctures: Vec<SpherePoint>,
}

impl SingularData {
    /// All finite singular values (critical and asymptotic).
    pub fn finite_values(&self) -> Vec<Complex64> {
        let mut v = self.critical_values.clone();
        v.extend(self.asymptotic_values.iter().copied());
        v
    }
}

/// Output of full preimage enumeration. `clustered` is raised when two roots
/// come closer than 1e-8; the values are still returned.
#[derive(Clone, Debug)]
pub struct Preimages {
    pub points: Vec<Complex64>,
    pub clustered: bool,
}

impl MapSpec {
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<MapSpec, MapError> {
        let deg = coeffs.len().saturating_sub(1);
        if deg < 2 || coeffs[deg].norm() == 0.0 {
            return Err(MapError::DegreeTooLow);
        }
        Ok(MapSpec::Polynomial { coeffs })
    }

    /// `z ↦ z² + c`.
    pub fn quadratic(c: Complex64) -> MapSpec {
        MapSpec::Polynomial {
            coeffs: vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        }
    }

    /// `z ↦ z^d` as a Blaschke product.
    pub fn power(d: usize) -> MapSpec {
        MapSpec::Blaschke {
            zeros: vec![Complex64::new(0.0, 0.0); d],
            rotation: Complex64::new(1.0, 0.0),
        }
    }

    pub fn blaschke(zeros: Vec<Complex64>, rotation: Complex64) -> Result<MapSpec, MapError> {
        for a in &zeros {
            if a.norm() >= 1.0 {
                return Err(MapError::ZeroNotInDisk(a.norm()));
            }
        }
        if (rotation.norm() - 1.0).abs() > 1e-12 {
            return Err(MapError::RotationNotUnit(rotation.norm()));
        }
        Ok(MapSpec::Blaschke { zeros, rotation })
    }

    /// Topological degree for the finite-degree families.
    pub fn degree(&self) -> Option<usize> {
        match self {
            MapSpec::Polynomial { coeffs } => Some(coeffs.len() - 1),
            MapSpec::Blaschke { zeros, .. } => Some(zeros.len()),
            _ => None,
        }
    }

    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        match self {
            MapSpec::Polynomial { coeffs } => polyroots::eval(coeffs, z),
            MapSpec::Blaschke { zeros, rotation } => {
                let mut acc = *rotation;
                for a in zeros {
                    acc *= (z - a) / (Complex64::new(1.0, 0.0) - a.conj() * z);
                }
                acc
            }
            MapSpec::ExpFamily { lambda } => lambda * z.exp(),
            MapSpec::SineFamily { lambda } => lambda * z.sin(),
            MapSpec::FatouBaker => z + (-z).exp(),
        }
    }

    /// Evaluation with the infinity marker for overflow.
    pub fn evaluate_checked(&self, z: Complex64) -> SpherePoint {
        SpherePoint::from(self.evaluate(z))
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            MapSpec::Polynomial { coeffs } => polyroots::eval_with_derivative(coeffs, z).1,
            MapSpec::Blaschke { zeros, rotation } => {
                // Product rule over the factors; each factor derivative is
                // (1 - |a|²)/(1 - ā z)².
                let one = Complex64::new(1.0, 0.0);
                let factors: Vec<Complex64> =
                    zeros.iter().map(|a| (z - a) / (one - a.conj() * z)).collect();
                let mut total = Complex64::new(0.0, 0.0);
                for (j, a) in zeros.iter().enumerate() {
                    let dj = (one - a * a.conj()) / (one - a.conj() * z).powi(2);
                    let mut rest = *rotation;
                    for (k, f) in factors.iter().enumerate() {
                        if k != j {
                            rest *= f;
                        }
                    }
                    total += dj * rest;
                }
                total
            }
            MapSpec::ExpFamily { lambda } => lambda * z.exp(),
            MapSpec::SineFamily { lambda } => lambda * z.cos(),
            MapSpec::FatouBaker => Complex64::new(1.0, 0.0) - (-z).exp(),
        }
    }

    /// `log|f'(z)|`, overflow-safe for the transcendental families whose
    /// derivative modulus grows like `e^{|z|}`.
    pub fn log_derivative_modulus(&self, z: Complex64) -> f64 {
        match self {
            MapSpec::Polynomial { .. } | MapSpec::Blaschke { .. } => self.derivative(z).norm().ln(),
            MapSpec::ExpFamily { lambda } => lambda.norm().ln() + z.re,
            MapSpec::SineFamily { lambda } => {
                // |cos(x+iy)|² = cos²x + sinh²y; for large |y| this is
                // e^{2|y|}/4 up to lower order.
                let base = lambda.norm().ln();
                if z.im.abs() > 20.0 {
                    base + z.im.abs() - std::f64::consts::LN_2
                } else {
                    base + z.cos().norm().ln()
                }
            }
            MapSpec::FatouBaker => {
                // log|1 − e^{-z}|.
                let re = -z.re;
                if re > 40.0 {
                    re
                } else if re < -40.0 {
                    0.0
                } else {
                    (Complex64::new(1.0, 0.0) - (-z).exp()).norm().ln()
                }
            }
        }
    }

    /// Critical values, asymptotic values and punctures. Critical points come
    /// from the closed-form derivative and are verified to residual 1e-10.
    pub fn singular_data(&self) -> Result<SingularData, MapError> {
        match self {
            MapSpec::Polynomial { coeffs } => {
                let dcoeffs = polyroots::derivative_coeffs(coeffs);
                let crit = polyroots::roots(&dcoeffs)?;
                let mut cv = Vec::new();
                for c in crit {
                    debug_assert!(self.derivative(c).norm() < 1e-10 * scale_of(coeffs));
                    cv.push(self.evaluate(c));
                }
                Ok(SingularData {
                    critical_values: cv,
                    asymptotic_values: vec![],
                    punctures: vec![SpherePoint::Infinity],
                })
            }
            MapSpec::Blaschke { zeros, .. } => {
                if zeros.len() < 2 {
                    return Ok(SingularData::default());
                }
                // Roots of the numerator of B' (B = N/D ⇒ B' = (N'D − ND')/D²).
                let (num, den) = self.blaschke_fraction();
                let dnum = polyroots::derivative_coeffs(&num);
                let dden = polyroots::derivative_coeffs(&den);
                let a = convolve(&dnum, &den);
                let b = convolve(&num, &dden);
                let mut diff = vec![Complex64::new(0.0, 0.0); a.len().max(b.len())];
                for (k, &c) in a.iter().enumerate() {
                    diff[k] += c;
                }
                for (k, &c) in b.iter().enumerate() {
                    diff[k] -= c;
                }
                let crit = polyroots::roots(&diff)?;
                let mut cv = Vec::new();
                for c in crit {
                    // Skip critical points sitting on poles of B.
                    if polyroots::eval(&den, c).norm() < 1e-12 {
                        continue;
                    }
                    cv.push(self.evaluate(c));
                }
                Ok(SingularData {
                    critical_values: cv,
                    asymptotic_values: vec![],
                    punctures: vec![],
                })
            }
            MapSpec::ExpFamily { .. } => Ok(SingularData {
                critical_values: vec![],
                asymptotic_values: vec![Complex64::new(0.0, 0.0)],
                punctures: vec![SpherePoint::Infinity],
            }),
            MapSpec::SineFamily { lambda } => Ok(SingularData {
                critical_values: vec![*lambda, -*lambda],
                asymptotic_values: vec![],
                punctures: vec![SpherePoint::Infinity],
            }),
            MapSpec::FatouBaker => {
                // f'(z) = 1 − e^{-z} vanishes at 2πik; f(2πik) = 1 + 2πik.
                let mut cv = Vec::new();
                let kmax = (BAKER_IM_WINDOW / (2.0 * std::f64::consts::PI)).floor() as i64;
                for k in -kmax..=kmax {
                    let im = 2.0 * std::f64::consts::PI * k as f64;
                    cv.push(Complex64::new(1.0, im));
                }
                Ok(SingularData {
                    critical_values: cv,
                    asymptotic_values: vec![],
                    punctures: vec![SpherePoint::Infinity],
                })
            }
        }
    }

    /// Numerator and denominator polynomials of a Blaschke product.
    fn blaschke_fraction(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let (zeros, rotation) = match self {
            MapSpec::Blaschke { zeros, rotation } => (zeros, rotation),
            _ => unreachable!("blaschke_fraction on non-Blaschke map"),
        };
        let one = Complex64::new(1.0, 0.0);
        let mut num = vec![*rotation];
        let mut den = vec![one];
        for a in zeros {
            num = convolve(&num, &[-a, one]);
            den = convolve(&den, &[one, -a.conj()]);
        }
        (num, den)
    }

    /// All `d` preimages of `w`, Newton-polished to residual
    /// `|f(z) − w| < 1e-12·(1 + |w|)`. Finite-degree families only.
    pub fn preimages_all(&self, w: Complex64) -> Result<Preimages, MapError> {
        let mut points = match self {
            MapSpec::Polynomial { coeffs } => {
                if coeffs.len() == 3 && coeffs[1].norm() == 0.0 {
                    // Fast path for z² + c.
                    let s = ((w - coeffs[0]) / coeffs[2]).sqrt();
                    vec![s, -s]
                } else {
                    let mut shifted = coeffs.clone();
                    shifted[0] -= w;
                    polyroots::roots(&shifted)?
                }
            }
            MapSpec::Blaschke { .. } => {
                let (num, den) = self.blaschke_fraction();
                // N(z) − w·D(z) = 0
                let mut eqn = vec![Complex64::new(0.0, 0.0); num.len().max(den.len())];
                for (k, &c) in num.iter().enumerate() {
                    eqn[k] += c;
                }
                for (k, &c) in den.iter().enumerate() {
                    eqn[k] -= w * c;
                }
                polyroots::roots(&eqn)?
            }
            _ => return Err(MapError::InfiniteDegree),
        };
        for z in &mut points {
            *z = self.newton_refine(*z, w, 24);
        }
        let mut clustered = false;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if (points[i] - points[j]).norm() < 1e-8 {
                    clustered = true;
                }
            }
        }
        Ok(Preimages { points, clustered })
    }

    fn newton_refine(&self, mut z: Complex64, w: Complex64, iters: usize) -> Complex64 {
        let mut best = z;
        let mut best_res = (self.evaluate(z) - w).norm();
        for _ in 0..iters {
            let dz = self.derivative(z);
            if dz.norm() < 1e-140 {
                break;
            }
            z -= (self.evaluate(z) - w) / dz;
            let res = (self.evaluate(z) - w).norm();
            if res < best_res {
                best_res = res;
                best = z;
            } else {
                break;
            }
        }
        best
    }

    /// Analytic continuation of the inverse branch selected by `seed` along
    /// the given path of target values. Strict: the caller must supply path
    /// steps small enough for plain Newton tracking.
    pub fn preimage_continue(
        &self,
        path: &[Complex64],
        seed: Complex64,
    ) -> Result<Complex64, MapError> {
        let res = (self.evaluate(seed) - path[0]).norm();
        if res > 1e-10 * (1.0 + path[0].norm()) {
            return Err(MapError::BadSeed(res));
        }
        let mut z = seed;
        for k in 1..path.len() {
            z = self.track_step(z, path[k - 1], path[k], k - 1)?;
        }
        Ok(z)
    }

    /// One continuation step with Newton correction; fails rather than
    /// refining the step.
    fn track_step(
        &self,
        z: Complex64,
        w_from: Complex64,
        w_to: Complex64,
        segment: usize,
    ) -> Result<Complex64, MapError> {
        let dz0 = self.derivative(z);
        if dz0.norm() < 1e-8 {
            return Err(MapError::CriticalProximity {
                deriv: dz0.norm(),
                segment,
            });
        }
        // Euler predictor, Newton corrector.
        let mut cur = z + (w_to - w_from) / dz0;
        let tol = 1e-12 * (1.0 + w_to.norm());
        for _ in 0..8 {
            let d = self.derivative(cur);
            if d.norm() < 1e-8 {
                return Err(MapError::CriticalProximity {
                    deriv: d.norm(),
                    segment,
                });
            }
            let f = self.evaluate(cur) - w_to;
            cur -= f / d;
            if f.norm() < tol {
                break;
            }
        }
        let res = (self.evaluate(cur) - w_to).norm();
        if res > 1e-10 * (1.0 + w_to.norm()) {
            return Err(MapError::StepTooLarge { segment });
        }
        // Guard against branch jumps: the move must stay comparable with the
        // local inverse-derivative estimate.
        let local = (w_to - w_from).norm() / dz0.norm();
        if (cur - z).norm() > 16.0 * local + 1e-9 {
            return Err(MapError::StepTooLarge { segment });
        }
        Ok(cur)
    }

    /// Continuation from `w_from` to `w_to` that adaptively bisects the
    /// segment when plain tracking fails. Critical proximity still errors.
    pub fn preimage_step_refined(
        &self,
        z: Complex64,
        w_from: Complex64,
        w_to: Complex64,
    ) -> Result<Complex64, MapError> {
        self.step_refined_rec(z, w_from, w_to, 0, 28)
    }

    fn step_refined_rec(
        &self,
        z: Complex64,
        w_from: Complex64,
        w_to: Complex64,
        depth: usize,
        max_depth: usize,
    ) -> Result<Complex64, MapError> {
        match self.track_step(z, w_from, w_to, depth) {
            Ok(next) => Ok(next),
            Err(MapError::StepTooLarge { .. }) if depth < max_depth => {
                let mid = 0.5 * (w_from + w_to);
                let half = self.step_refined_rec(z, w_from, mid, depth + 1, max_depth)?;
                self.step_refined_rec(half, mid, w_to, depth + 1, max_depth)
            }
            Err(e) => Err(e),
        }
    }

    /// Double-double evaluation of `f` and `f'`; polynomials and Blaschke
    /// products only (field operations suffice there).
    pub fn eval_dd(&self, z: DdComplex) -> Result<(DdComplex, DdComplex), MapError> {
        match self {
            MapSpec::Polynomial { coeffs } => Ok(dd_horner(coeffs, z)),
            MapSpec::Blaschke { .. } => {
                let (num, den) = self.blaschke_fraction();
                let (n, dn) = dd_horner(&num, z);
                let (d, dd_) = dd_horner(&den, z);
                let val = n.div(d);
                // (n/d)' = (n'd − nd')/d²
                let deriv = dn.mul(d).sub(n.mul(dd_)).div(d.mul(d));
                Ok((val, deriv))
            }
            _ => Err(MapError::DdUnsupported),
        }
    }

    /// Newton iteration in double-double precision for `f(z) = w`.
    pub fn newton_refine_dd(
        &self,
        z0: Complex64,
        w: DdComplex,
        iters: usize,
    ) -> Result<DdComplex, MapError> {
        let mut z = DdComplex::from_c64(z0);
        for _ in 0..iters {
            let (p, dp) = self.eval_dd(z)?;
            z = z.sub(p.sub(w).div(dp));
        }
        Ok(z)
    }

    /// Escape radius for polynomials: beyond it, orbits grow monotonically.
    pub fn escape_radius(&self) -> f64 {
        match self {
            MapSpec::Polynomial { coeffs } => {
                let lead = coeffs[coeffs.len() - 1].norm();
                let rest: f64 = coeffs[..coeffs.len() - 1].iter().map(|c| c.norm()).sum();
                (2.0f64).max(2.0 * (1.0 + rest / lead))
            }
            _ => 1e6,
        }
    }

    /// A repelling fixed point (multiplier modulus > 1), used to anchor the
    /// boundary sampler.
    pub fn repelling_fixed_point(&self) -> Result<Complex64, MapError> {
        let fixed: Vec<Complex64> = match self {
            MapSpec::Polynomial { coeffs } => {
                let mut eqn = coeffs.clone();
                eqn[1] -= Complex64::new(1.0, 0.0);
                polyroots::roots(&eqn)?
            }
            MapSpec::Blaschke { .. } => {
                let (num, den) = self.blaschke_fraction();
                let z_den = convolve(&den, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
                let mut eqn = vec![Complex64::new(0.0, 0.0); num.len().max(z_den.len())];
                for (k, &c) in num.iter().enumerate() {
                    eqn[k] += c;
                }
                for (k, &c) in z_den.iter().enumerate() {
                    eqn[k] -= c;
                }
                polyroots::roots(&eqn)?
            }
            _ => return Err(MapError::NoRepellingFixedPoint),
        };
        fixed
            .into_iter()
            .filter(|p| self.derivative(*p).norm() > 1.0 + 1e-9)
            .max_by(|a, b| {
                self.derivative(*a)
                    .norm()
                    .partial_cmp(&self.derivative(*b).norm())
                    .unwrap()
            })
            .ok_or(MapError::NoRepellingFixedPoint)
    }

    /// Cloud of points of the relevant invariant boundary (Julia set for
    /// polynomials, unit circle for Blaschke products), sampled by backward
    /// iteration with uniform branch choice from a repelling fixed point.
    pub fn boundary_cloud(&self, n: usize, seed: u64) -> Result<Vec<Complex64>, MapError> {
        let burn_in = 64;
        let mut rng = crate::rng::substream(seed, 0xb0);
        let mut z = self.repelling_fixed_point()?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n + burn_in {
            let pre = self.preimages_all(z)?;
            let pick = rng.gen_range(0..pre.points.len());
            z = pre.points[pick];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(MapError::SamplerDiverged);
            }
            if k >= burn_in {
                out.push(z);
            }
        }
        Ok(out)
    }
}

fn scale_of(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max)
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn dd_horner(coeffs: &[Complex64], z: DdComplex) -> (DdComplex, DdComplex) {
    let mut p = DdComplex::default();
    let mut dp = DdComplex::default();
    for &c in coeffs.iter().rev() {
        dp = dp.mul(z).add(p);
        p = p.mul(z).add(DdComplex::from_c64(c));
    }
    (p, dp)
}
