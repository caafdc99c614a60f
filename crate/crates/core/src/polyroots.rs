//! Complex polynomial root finding: companion-matrix eigenvalues via a
//! shifted Hessenberg QR iteration, followed by Newton polishing on the
//! original coefficients.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RootsError {
    #[error("polynomial is identically zero or empty")]
    ZeroPolynomial,
    #[error("QR iteration failed to converge on a {size}x{size} block")]
    QrStalled { size: usize },
}

/// Horner evaluation; `coeffs[k]` multiplies `z^k`.
pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Simultaneous Horner evaluation of `p(z)` and `p'(z)`.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Coefficients of the derivative polynomial.
pub fn derivative_coeffs(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Product expansion of `∏ (z - roots[i])`.
pub fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

/// All roots with multiplicity, sorted lexicographically by (re, im).
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, RootsError> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 || coeffs.is_empty() {
        return Err(RootsError::ZeroPolynomial);
    }
    // Trim negligible leading coefficients.
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-300 + 0.0 * scale {
        deg -= 1;
    }
    let work: Vec<Complex64> = coeffs[..=deg].to_vec();
    let mut out: Vec<Complex64> = Vec::with_capacity(deg);
    // Deflate exact zero roots.
    let mut low = 0;
    while low < deg && work[low].norm() == 0.0 {
        out.push(Complex64::new(0.0, 0.0));
        low += 1;
    }
    let monic: Vec<Complex64> = {
        let lead = work[deg];
        work[low..=deg].iter().map(|&c| c / lead).collect()
    };
    let n = monic.len() - 1;
    if n == 0 {
        out.sort_by(cmp_c);
        return Ok(out);
    }
    let mut eigs = if n == 1 {
        vec![-monic[0]]
    } else if n == 2 {
        quadratic(monic[0], monic[1])
    } else {
        hessenberg_qr(companion(&monic))?
    };
    for e in &mut eigs {
        *e = polish(coeffs, *e);
    }
    out.extend(eigs);
    out.sort_by(cmp_c);
    Ok(out)
}

fn cmp_c(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
}

/// Roots of `z² + bz + a` (monic coefficients in ascending order `[a, b]`).
fn quadratic(a: Complex64, b: Complex64) -> Vec<Complex64> {
    let disc = (b * b - 4.0 * a).sqrt();
    // Pick the sign that avoids cancellation.
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    if q.norm() == 0.0 {
        return vec![Complex64::new(0.0, 0.0); 2];
    }
    vec![q, a / q]
}

fn companion(monic: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = monic.len() - 1;
    let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 1..n {
        h[i][i - 1] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        h[i][n - 1] = -monic[i];
    }
    h
}

/// Shifted QR iteration on a complex upper-Hessenberg matrix.
fn hessenberg_qr(mut h: Vec<Vec<Complex64>>) -> Result<Vec<Complex64>, RootsError> {
    let n = h.len();
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut stall = 0usize;
    let mut total_iters = 0usize;
    let max_iters = 80 * n + 200;
    loop {
        // Deflate converged subdiagonals.
        loop {
            let mut deflated = false;
            for k in (1..=hi).rev() {
                let tol = 1e-15 * (h[k - 1][k - 1].norm() + h[k][k].norm()).max(1e-300);
                if h[k][k - 1].norm() <= tol {
                    h[k][k - 1] = Complex64::new(0.0, 0.0);
                    if k == hi {
                        eigs.push(h[hi][hi]);
                        if hi == 0 {
                            unreachable!()
                        }
                        hi -= 1;
                        stall = 0;
                        deflated = true;
                        break;
                    }
                }
            }
            if !deflated {
                break;
            }
            if hi == 0 {
                eigs.push(h[0][0]);
                return Ok(eigs);
            }
        }
        if hi == 0 {
            eigs.push(h[0][0]);
            return Ok(eigs);
        }
        // Find the start of the active (unreduced) block ending at hi.
        let mut lo = hi;
        while lo > 0 && h[lo][lo - 1].norm() != 0.0 {
            lo -= 1;
        }
        if lo == hi {
            eigs.push(h[hi][hi]);
            hi = hi.saturating_sub(1);
            if eigs.len() == n {
                return Ok(eigs);
            }
            continue;
        }
        total_iters += 1;
        if total_iters > max_iters {
            return Err(RootsError::QrStalled { size: hi - lo + 1 });
        }
        stall += 1;
        let mu = if stall % 12 == 0 {
            // Exceptional shift to break symmetry-induced cycles.
            h[hi][hi] + Complex64::new(0.75, 0.31) * h[hi][hi - 1].norm()
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_step(&mut h, lo, hi, mu);
    }
}

fn wilkinson_shift(h: &[Vec<Complex64>], hi: usize) -> Complex64 {
    let a = h[hi - 1][hi - 1];
    let b = h[hi - 1][hi];
    let c = h[hi][hi - 1];
    let d = h[hi][hi];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// One explicit shifted QR sweep on rows/columns `lo..=hi`.
fn qr_step(h: &mut [Vec<Complex64>], lo: usize, hi: usize, mu: Complex64) {
    let n = h.len();
    for k in lo..=hi {
        h[k][k] -= mu;
    }
    let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let f = h[k][k];
        let g = h[k + 1][k];
        let (c, s) = givens(f, g);
        rots.push((c, s));
        for j in k..n {
            let x = h[k][j];
            let y = h[k + 1][j];
            h[k][j] = c * x + s * y;
            h[k + 1][j] = -s.conj() * x + c * y;
        }
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let top = (hi).min(k + 1);
        for i in 0..=top {
            let x = h[i][k];
            let y = h[i][k + 1];
            h[i][k] = c * x + s.conj() * y;
            h[i][k + 1] = -s * x + c * y;
        }
    }
    for k in lo..=hi {
        h[k][k] += mu;
    }
}

fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let fn_ = f.norm();
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let r = (fn_ * fn_ + gn * gn).sqrt();
    let c = fn_ / r;
    let s = (f / fn_) * g.conj() / r;
    (c, s)
}

/// Newton refinement against the original coefficients, keeping the best
/// residual seen. Stalls (multiple roots) return the best iterate.
fn polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let mut best = z;
    let mut best_res = eval(coeffs, z).norm();
    for _ in 0..40 {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() < 1e-280 {
            break;
        }
        let step = p / dp;
        z -= step;
        let res = eval(coeffs, z).norm();
        if res < best_res {
            best_res = res;
            best = z;
        }
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    best
}
