//! Confining potential V, its derivatives, density moments, the polynomial
//! T(z) built from moments, and closed-form equilibrium measures for the
//! harmonic and quartic families.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;

/// Convex polynomial potential of even degree.
///
/// `coeffs[k]` is the coefficient of `x^k` in V.  `alpha > 0` is a caller
/// supplied convexity lower bound for V'', validated numerically on a
/// sampled grid at construction.
#[derive(Debug, Clone)]
pub struct Potential {
    coeffs: Vec<f64>,
    alpha: f64,
}

impl Potential {
    /// Build a potential, validating evenness, leading-coefficient
    /// positivity, and the convexity bound `alpha <= min V''` sampled with
    /// 10^4 points on `[-radius, radius]`.
    pub fn new(coeffs: Vec<f64>, alpha: f64, radius: f64) -> Result<Self> {
        let degree = coeffs.len().saturating_sub(1);
        if degree < 2 || degree % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "potential degree must be even and >= 2, got {degree}"
            )));
        }
        if coeffs[degree] <= 0.0 {
            return Err(Error::InvalidParameter(
                "leading coefficient of V must be positive".into(),
            ));
        }
        if alpha <= 0.0 {
            return Err(Error::InvalidParameter("alpha must be > 0".into()));
        }
        let p = Potential { coeffs, alpha };
        let n = 10_000;
        for i in 0..=n {
            let x = -radius + 2.0 * radius * i as f64 / n as f64;
            let vpp = p.eval(Complex64::new(x, 0.0), 2)?.re;
            if vpp < alpha {
                return Err(Error::InvalidParameter(format!(
                    "alpha={alpha} exceeds sampled V''({x}) = {vpp}"
                )));
            }
        }
        Ok(p)
    }

    /// The harmonic potential V(x) = x²/2.
    pub fn harmonic() -> Self {
        Potential {
            coeffs: vec![0.0, 0.0, 0.5],
            alpha: 1.0,
        }
    }

    /// The quartic family V(x) = x⁴/4 + c·x²/2 with c ≥ 0.
    pub fn quartic(c: f64) -> Result<Self> {
        if c < 0.0 {
            return Err(Error::InvalidParameter(
                "quartic family requires c >= 0".into(),
            ));
        }
        Ok(Potential {
            coeffs: vec![0.0, 0.0, c / 2.0, 0.0, 0.25],
            alpha: if c > 0.0 { c } else { 1e-12 },
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Coefficients of V' in ascending degree.
    pub fn dcoeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect()
    }

    /// Horner evaluation of V^(order)(z) for order 0..=3.
    pub fn eval(&self, z: Complex64, order: usize) -> Result<Complex64> {
        if order > 3 {
            return Err(Error::DerivativeOrder(order));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if k < order {
                break;
            }
            // falling factorial k (k-1) ... (k-order+1)
            let mut fall = 1.0;
            for j in 0..order {
                fall *= (k - j) as f64;
            }
            acc = acc * z + fall * c;
        }
        Ok(acc)
    }

    /// Real-argument convenience for V^(order)(x).
    pub fn eval_real(&self, x: f64, order: usize) -> Result<f64> {
        Ok(self.eval(Complex64::new(x, 0.0), order)?.re)
    }

    /// Canonical printable form "V(x) = Σ c_k x^k".
    pub fn display(&self) -> String {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}·x"),
                _ => format!("{c}·x^{k}"),
            })
            .collect();
        if terms.is_empty() {
            "V(x) = 0".into()
        } else {
            format!("V(x) = {}", terms.join(" + "))
        }
    }
}

/// Raw moments m_0..m_K of a probability density.
#[derive(Debug, Clone)]
pub struct MomentVector {
    m: Vec<f64>,
}

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InvalidParameter("empty moment vector".into()));
        }
        if (m[0] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "m_0 must be 1 (probability mass), got {}",
                m[0]
            )));
        }
        for (k, &v) in m.iter().enumerate() {
            if k % 2 == 0 && v < -1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "even moment m_{k} = {v} negative"
                )));
            }
        }
        Ok(MomentVector { m })
    }

    pub fn order(&self) -> usize {
        self.m.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.m.get(k).copied()
    }
}

/// Coefficients (ascending degree) of the polynomial
/// `T(z) = ∫ ρ(x) (V'(x) - V'(z)) / (x - z) dx`,
/// degree ≤ 2n-2.  With `V'(z) = Σ_j a_j z^j`, coefficient k of T is
/// `Σ_{j ≥ k+1} a_j m_{j-1-k}`.
pub fn t_polynomial(p: &Potential, m: &MomentVector) -> Result<Vec<f64>> {
    let a = p.dcoeffs(); // a[j] multiplies z^j, j = 0..2n-1
    let needed = p.degree().saturating_sub(2); // 2n-2
    if m.order() < needed {
        return Err(Error::InsufficientMoments {
            needed,
            have: m.order(),
        });
    }
    let mut t = vec![0.0; needed + 1];
    for (k, tk) in t.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &aj) in a.iter().enumerate().skip(k + 1) {
            acc += aj * m.values()[j - 1 - k];
        }
        *tk = acc;
    }
    Ok(t)
}

/// Supported closed-form equilibrium families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// V(x) = x²/2.
    Harmonic,
    /// V(x) = x⁴/4 + c·x²/2.
    Quartic { c: f64 },
}

/// Closed-form one-cut equilibrium measure on `[-A, A]`.
///
/// Both supported families share the representation
/// `ρ_eq(x) = (2/(βπ)) Q(x) √(A²-x²)` and
/// `U_eq(z) = (2/β) (−V'(z) + Q(z) √(z²−A²))`,
/// with Q ≡ 1 (harmonic) or Q(z) = z² + B, B = A²/2 + c (quartic).
/// The square root is the principal branch composed as √(z−A)·√(z+A),
/// which keeps the cut on the support and gives U_eq(z) ~ −1/z at infinity.
#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    pub family: Family,
    pub beta: f64,
    /// Support half-width A.
    pub half_width: f64,
}

impl Equilibrium {
    /// √(z−A)·√(z+A), the branch with cut on [−A, A].
    pub fn sqrt_branch(&self, z: Complex64) -> Complex64 {
        let a = self.half_width;
        (z - a).sqrt() * (z + a).sqrt()
    }

    /// The polynomial factor Q(z) of the density/Stieltjes closed forms.
    fn q(&self, z: Complex64) -> Complex64 {
        match self.family {
            Family::Harmonic => Complex64::new(1.0, 0.0),
            Family::Quartic { c } => {
                let b = 0.5 * self.half_width * self.half_width + c;
                z * z + b
            }
        }
    }

    fn q_prime(&self, z: Complex64) -> Complex64 {
        match self.family {
            Family::Harmonic => Complex64::new(0.0, 0.0),
            Family::Quartic { .. } => 2.0 * z,
        }
    }

    fn vp(&self, z: Complex64) -> Complex64 {
        match self.family {
            Family::Harmonic => z,
            Family::Quartic { c } => z * z * z + c * z,
        }
    }

    fn vpp(&self, z: Complex64) -> Complex64 {
        match self.family {
            Family::Harmonic => Complex64::new(1.0, 0.0),
            Family::Quartic { c } => 3.0 * z * z + c,
        }
    }

    /// Equilibrium density on the support (0 outside).
    pub fn density(&self, x: f64) -> f64 {
        let a = self.half_width;
        if x.abs() >= a {
            return 0.0;
        }
        let q = self.q(Complex64::new(x, 0.0)).re;
        2.0 / (self.beta * std::f64::consts::PI) * q * (a * a - x * x).sqrt()
    }

    /// Analytic continuation of the density to the upper half-plane:
    /// ρ_eq^C(z) = (U_eq(z) + (2/β) V'(z)) / (iπ) = (2/(βπ)) Q(z) √(A²−z²)
    /// with the branch continuous from the support interior.
    pub fn density_c(&self, z: Complex64) -> Complex64 {
        (self.stieltjes(z) + 2.0 / self.beta * self.vp(z)) / Complex64::new(0.0, std::f64::consts::PI)
    }

    /// Closed-form Stieltjes transform U_eq(z) = ∫ ρ_eq(x)/(x−z) dx.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        2.0 / self.beta * (-self.vp(z) + self.q(z) * self.sqrt_branch(z))
    }

    /// dU_eq/dz.
    pub fn stieltjes_prime(&self, z: Complex64) -> Complex64 {
        let s = self.sqrt_branch(z);
        2.0 / self.beta * (-self.vpp(z) + self.q_prime(z) * s + self.q(z) * z / s)
    }

    /// d²U_eq/dz².
    pub fn stieltjes_second(&self, z: Complex64) -> Complex64 {
        let s = self.sqrt_branch(z);
        let a2 = self.half_width * self.half_width;
        let vppp = match self.family {
            Family::Harmonic => Complex64::new(0.0, 0.0),
            Family::Quartic { .. } => 6.0 * z,
        };
        let qpp = match self.family {
            Family::Harmonic => Complex64::new(0.0, 0.0),
            Family::Quartic { .. } => Complex64::new(2.0, 0.0),
        };
        // d(z/s)/dz = -A²/s³
        2.0 / self.beta
            * (-vppp + qpp * s + 2.0 * self.q_prime(z) * z / s - self.q(z) * a2 / (s * s * s))
    }

    /// Boundary value U_eq(x + i0): −(2/β)V'(x) + iπρ_eq(x) inside the
    /// support, real closed form outside.
    pub fn boundary_value_plus(&self, x: f64) -> Complex64 {
        if x.abs() < self.half_width {
            Complex64::new(
                -2.0 / self.beta * self.vp(Complex64::new(x, 0.0)).re,
                std::f64::consts::PI * self.density(x),
            )
        } else {
            self.stieltjes(Complex64::new(x, 0.0))
        }
    }

    /// Exact raw moments via Gauss–Chebyshev quadrature of the second kind
    /// (the rule is exact for the polynomial factor).
    pub fn moment(&self, k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let a = self.half_width;
        let rule = quad::gauss_chebyshev2(k / 2 + 4);
        rule.iter()
            .map(|&(u, w)| {
                let x = a * u;
                let q = self.q(Complex64::new(x, 0.0)).re;
                // ρ(x) dx = (2/(βπ)) Q(Au) A√(1-u²) · A du
                w * x.powi(k as i32) * 2.0 / (self.beta * std::f64::consts::PI) * q * a * a
            })
            .sum()
    }
}

/// Closed-form equilibrium measure for the supported families.
///
/// The quartic support half-width solves the unit-mass condition
/// `3A⁴/8 + cA²/2 = β/2` (equivalently the cut equation plus ∫ρ_eq = 1),
/// giving `A² = (2/3)(√(c² + 3β) − c)`.
pub fn equilibrium_density(p: &Potential, beta: f64) -> Result<Equilibrium> {
    if beta < 1.0 {
        return Err(Error::InvalidParameter(format!("beta >= 1 required, got {beta}")));
    }
    let c = p.coeffs();
    let is_zero = |v: f64| v.abs() < 1e-14;
    // Constant offsets of V are irrelevant; match the derivative structure.
    let family = if c.len() == 3 && is_zero(c[1]) && (c[2] - 0.5).abs() < 1e-14 {
        Family::Harmonic
    } else if c.len() == 5
        && is_zero(c[1])
        && is_zero(c[3])
        && (c[4] - 0.25).abs() < 1e-14
        && c[2] >= 0.0
    {
        Family::Quartic { c: 2.0 * c[2] }
    } else {
        return Err(Error::UnsupportedPotential);
    };
    let half_width = match family {
        Family::Harmonic => beta.sqrt(),
        Family::Quartic { c } => (2.0 / 3.0 * ((c * c + 3.0 * beta).sqrt() - c)).sqrt(),
    };
    Ok(Equilibrium {
        family,
        beta,
        half_width,
    })
}
