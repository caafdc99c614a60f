//! Double-double arithmetic (~31 significant decimal digits).
//!
//! Used only where plain f64 cannot witness an identity because of the
//! exponential error amplification along long forward orbits: refining
//! inverse-branch points and re-verifying `f^n(F_n(y)) = y` and periodic
//! residuals. Only the field operations needed for polynomials and rational
//! maps are provided.

use num_complex::Complex64;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r.hi / other.hi;
        let r2 = r.sub(other.mul(Dd::from_f64(q2)));
        let q3 = r2.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }
}

/// Complex number with double-double components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub fn from_c64(z: Complex64) -> Self {
        DdComplex {
            re: Dd::from_f64(z.re),
            im: Dd::from_f64(z.im),
        }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    pub fn sub(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re.sub(o.re),
            im: self.im.sub(o.im),
        }
    }

    pub fn mul(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn div(self, o: DdComplex) -> DdComplex {
        let den = o.re.mul(o.re).add(o.im.mul(o.im));
        let num_re = self.re.mul(o.re).add(self.im.mul(o.im));
        let num_im = self.im.mul(o.re).sub(self.re.mul(o.im));
        DdComplex {
            re: num_re.div(den),
            im: num_im.div(den),
        }
    }

    pub fn norm_sqr_f64(self) -> f64 {
        self.re.mul(self.re).add(self.im.mul(self.im)).to_f64()
    }

    pub fn norm_f64(self) -> f64 {
        self.norm_sqr_f64().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_mul_catches_f64_rounding() {
        // (1 + 2^-30)^2 = 1 + 2^-29 + 2^-60; the last term is lost in f64.
        let x = Dd::from_f64(1.0 + (0.5f64).powi(30));
        let sq = x.mul(x);
        let expected_lo = (0.5f64).powi(60);
        let err = (sq.hi - (1.0 + (0.5f64).powi(29))).abs() + (sq.lo - expected_lo).abs();
        assert!(err < 1e-25, "err={err:e}");
    }

    #[test]
    fn dd_div_roundtrips() {
        let a = Dd::from_f64(3.1).add(Dd::from_f64(1e-20));
        let b = Dd::from_f64(7.3);
        let q = a.div(b);
        let back = q.mul(b);
        assert!(back.sub(a).abs().to_f64() < 1e-30);
    }

    #[test]
    fn complex_div_roundtrips() {
        let a = DdComplex::from_c64(Complex64::new(1.25, -0.5));
        let b = DdComplex::from_c64(Complex64::new(0.3, 2.75));
        let q = a.div(b);
        let back = q.mul(b).sub(a);
        assert!(back.norm_f64() < 1e-30);
    }
}
