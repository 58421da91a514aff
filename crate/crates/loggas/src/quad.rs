//! Quadrature helpers: adaptive Simpson (real and complex) and
//! Gauss–Chebyshev rules for square-root-weighted integrals.

use num_complex::Complex64;

use crate::error::{Error, Result};

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    if depth > 60 {
        return Err(Error::QuadratureFailure(format!(
            "adaptive Simpson recursion limit on [{a}, {b}]"
        )));
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let l = adaptive_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = adaptive_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::QuadratureFailure("non-finite integrand".into()));
    }
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_rec(&f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Adaptive Simpson quadrature of a complex-valued integrand over the real
/// interval `[a, b]`.
pub fn adaptive_complex<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Complex64> {
    let re = adaptive(|x| f(x).re, a, b, tol)?;
    let im = adaptive(|x| f(x).im, a, b, tol)?;
    Ok(Complex64::new(re, im))
}

/// Gauss–Chebyshev nodes/weights of the second kind:
/// `∫_{-1}^{1} f(u) √(1-u²) du ≈ Σ w_k f(u_k)`, exact for polynomials of
/// degree ≤ 2n-1.
pub fn gauss_chebyshev2(n: usize) -> Vec<(f64, f64)> {
    let np1 = (n + 1) as f64;
    (1..=n)
        .map(|k| {
            let th = k as f64 * std::f64::consts::PI / np1;
            (th.cos(), std::f64::consts::PI / np1 * th.sin() * th.sin())
        })
        .collect()
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
