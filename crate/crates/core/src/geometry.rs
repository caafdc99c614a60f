//! Planar geometry primitives: extended-plane points, Euclidean disks,
//! Möbius transformations, and the Koebe distortion constants used by the
//! branch machinery.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("möbius transform is numerically degenerate (|ad-bc| = {det:e})")]
    DegenerateMobius { det: f64 },
    #[error("disk radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("koebe inputs must be positive, got deriv_modulus={deriv}, r={r}")]
    NonPositiveKoebe { deriv: f64, r: f64 },
    #[error("distortion parameter must lie in [0,1), got {0}")]
    BadLambda(f64),
    #[error("möbius pole meets the closed disk; the image is unbounded")]
    PoleMeetsDisk,
}

/// A point of the Riemann sphere. Infinity is a tagged marker, never an
/// arithmetic value; every operation that can meet it pattern-matches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    pub fn is_infinity(self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }
}

impl From<Complex64> for SpherePoint {
    /// Non-finite components collapse to the marker.
    fn from(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }
}

/// Euclidean disk `D(center, radius)` with strictly positive finite radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Complex64, radius: f64) -> Result<Disk, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Disk { center, radius })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    pub fn boundary_point(&self, theta: f64) -> Complex64 {
        self.center + self.radius * Complex64::from_polar(1.0, theta)
    }
}

/// Möbius transformation `z ↦ (az + b)/(cz + d)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MobiusTransform {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MobiusTransform {
    /// Builds a transform, rejecting numerically degenerate coefficient
    /// quadruples. The tolerance is scale-invariant.
    pub fn new(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    ) -> Result<MobiusTransform, GeometryError> {
        let det = (a * d - b * c).norm();
        let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
        if det <= 1e-14 * scale * scale {
            return Err(GeometryError::DegenerateMobius { det });
        }
        Ok(MobiusTransform { a, b, c, d })
    }

    pub fn identity() -> MobiusTransform {
        MobiusTransform {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// The puncture transform `z ↦ ε²/(z − v)`, which swaps the circle
    /// `|z − v| = ε` with itself and sends `v + ε` to `ε`.
    pub fn puncture(v: Complex64, eps: f64) -> MobiusTransform {
        MobiusTransform {
            a: Complex64::new(0.0, 0.0),
            b: Complex64::new(eps * eps, 0.0),
            c: Complex64::new(1.0, 0.0),
            d: -v,
        }
    }

    /// Affine map `z ↦ αz + β`.
    pub fn affine(alpha: Complex64, beta: Complex64) -> Result<MobiusTransform, GeometryError> {
        MobiusTransform::new(
            alpha,
            beta,
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn pole(&self) -> SpherePoint {
        if self.c.norm() == 0.0 {
            SpherePoint::Infinity
        } else {
            SpherePoint::Finite(-self.d / self.c)
        }
    }

    pub fn apply(&self, z: SpherePoint) -> SpherePoint {
        match z {
            SpherePoint::Infinity => {
                if self.c.norm() == 0.0 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite(self.a / self.c)
                }
            }
            SpherePoint::Finite(z) => {
                let den = self.c * z + self.d;
                if den.norm() == 0.0 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::from((self.a * z + self.b) / den)
                }
            }
        }
    }

    /// Convenience wrapper for finite points expected to stay finite.
    pub fn apply_finite(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// `|m'(z)| = |ad − bc| / |cz + d|²`. For the puncture transform this is
    /// `ε²/|z−v|²`.
    pub fn derivative_modulus(&self, z: Complex64) -> f64 {
        let det = (self.a * self.d - self.b * self.c).norm();
        let den = (self.c * z + self.d).norm_sqr();
        det / den
    }

    pub fn inverse(&self) -> MobiusTransform {
        MobiusTransform {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusTransform) -> MobiusTransform {
        MobiusTransform {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// Image of a Euclidean disk. Errors when the pole meets the closed disk
    /// (the image would be unbounded).
    pub fn image_disk(&self, disk: &Disk) -> Result<Disk, GeometryError> {
        if let SpherePoint::Finite(p) = self.pole() {
            if (p - disk.center).norm() <= disk.radius * (1.0 + 1e-12) {
                return Err(GeometryError::PoleMeetsDisk);
            }
        }
        let p0 = self.apply_finite(disk.boundary_point(0.0));
        let p1 = self.apply_finite(disk.boundary_point(2.0 * std::f64::consts::FRAC_PI_3));
        let p2 = self.apply_finite(disk.boundary_point(4.0 * std::f64::consts::FRAC_PI_3));
        let (center, radius) = circumcircle(p0, p1, p2)?;
        Disk::new(center, radius)
    }
}

fn circumcircle(a: Complex64, b: Complex64, c: Complex64) -> Result<(Complex64, f64), GeometryError> {
    // Perpendicular-bisector intersection in real coordinates.
    let d = 2.0 * (a.re * (b.im - c.im) + b.re * (c.im - a.im) + c.re * (a.im - b.im));
    if d.abs() < 1e-30 {
        return Err(GeometryError::PoleMeetsDisk);
    }
    let ux = ((a.norm_sqr()) * (b.im - c.im)
        + (b.norm_sqr()) * (c.im - a.im)
        + (c.norm_sqr()) * (a.im - b.im))
        / d;
    let uy = ((a.norm_sqr()) * (c.re - b.re)
        + (b.norm_sqr()) * (a.re - c.re)
        + (c.norm_sqr()) * (b.re - a.re))
        / d;
    let center = Complex64::new(ux, uy);
    Ok((center, (a - center).norm()))
}

/// Certified inclusion radius from the quarter theorem: a univalent map on
/// `D(z, r)` covers `D(φ(z), deriv_modulus·r/4)`.
pub fn koebe_quarter_radius(deriv_modulus: f64, r: f64) -> Result<f64, GeometryError> {
    if !(deriv_modulus > 0.0) || !(r > 0.0) {
        return Err(GeometryError::NonPositiveKoebe {
            deriv: deriv_modulus,
            r,
        });
    }
    Ok(0.25 * deriv_modulus * r)
}

/// Two-sided derivative distortion on the sub-disk of relative radius `lam`:
/// `(1−λ)/(1+λ)³ ≤ |φ'(z)|/|φ'(x)| ≤ (1+λ)/(1−λ)³`.
pub fn koebe_distortion_factors(lam: f64) -> Result<(f64, f64), GeometryError> {
    if !(0.0..1.0).contains(&lam) {
        return Err(GeometryError::BadLambda(lam));
    }
    let lower = (1.0 - lam) / (1.0 + lam).powi(3);
    let upper = (1.0 + lam) / (1.0 - lam).powi(3);
    Ok((lower, upper))
}

/// Winding number of a closed polygon around `z`; the polygon is implicitly
/// closed between the last and first vertices.
pub fn winding_number(polygon: &[Complex64], z: Complex64) -> i32 {
    let mut total = 0.0f64;
    for i in 0..polygon.len() {
        let p = polygon[i] - z;
        let q = polygon[(i + 1) % polygon.len()] - z;
        let cross = p.re * q.im - p.im * q.re;
        let dot = p.re * q.re + p.im * q.im;
        total += cross.atan2(dot);
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}
