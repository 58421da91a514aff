//! Hydrodynamic (McKean–Vlasov) limit: moment-ODE hierarchy, complex
//! Burgers characteristics, reconstruction of the Stieltjes field U_t and
//! the density ρ_t, and the harmonic scaling solution.
//!
//! The field U_t solves `∂_t U = ∂_z((β/4)U² + V'U + T_t)` on the upper
//! half-plane, where the polynomial source T_t is built from density
//! moments.  Along the characteristic `ż = −(β/2)U − V'(z)` the carried
//! value u(t) = U(t, z(t)) obeys the linear ODE `u̇ = V''(z)u + T'_t(z)`.
//! Point evaluation of U_t runs this system *backwards*: shoot from a
//! trial (z, u) at time t down to t = 0 and Newton-solve for the u that is
//! consistent with the initial datum U₀ at the foot point.  This gives
//! tolerance-limited accuracy at arbitrary (t, z) without interpolating a
//! scattered characteristic fan.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{equilibrium_density, t_polynomial, Equilibrium, MomentVector, Potential};
use crate::rk::Rk45;
use crate::transforms;

/// The harmonic scaling factor s(t) = √(1 + e^{−2t}(s₀² − 1)); the scaled
/// semicircle of half-width A·s(t) is an exact solution for harmonic V.
pub fn scaling_factor(s0: f64, t: f64) -> f64 {
    (1.0 + (-2.0 * t).exp() * (s0 * s0 - 1.0)).sqrt()
}

/// Initial density for the hydrodynamic solve, given in closed form so the
/// off-support analytic continuation of U₀ is available exactly.
#[derive(Debug, Clone)]
pub enum InitialData {
    /// Start at a closed-form equilibrium measure (stationary scenario).
    Equilibrium(Equilibrium),
    /// Semicircle dilated by s0: ρ₀(x) = ρ_eq(x/s0)/s0 for the harmonic
    /// β-equilibrium.  For harmonic V this evolves self-similarly with
    /// scale factor [`scaling_factor`].
    ScaledSemicircle { base: Equilibrium, s0: f64 },
}

impl InitialData {
    /// Scaled-semicircle initial data for the harmonic potential at `beta`.
    pub fn scaled_semicircle(beta: f64, s0: f64) -> Result<Self> {
        if !(s0 > 0.0) {
            return Err(Error::InvalidParameter("s0 must be > 0".into()));
        }
        let base = equilibrium_density(&Potential::harmonic(), beta)?;
        Ok(InitialData::ScaledSemicircle { base, s0 })
    }

    /// U₀(z): Stieltjes transform of the initial density, valid on Π₊ and
    /// on the real axis off the support.
    pub fn u0(&self, z: Complex64) -> Complex64 {
        match self {
            InitialData::Equilibrium(eq) => eq.stieltjes(z),
            InitialData::ScaledSemicircle { base, s0 } => base.stieltjes(z / s0) / s0,
        }
    }

    /// dU₀/dz.
    pub fn u0_prime(&self, z: Complex64) -> Complex64 {
        match self {
            InitialData::Equilibrium(eq) => eq.stieltjes_prime(z),
            InitialData::ScaledSemicircle { base, s0 } => base.stieltjes_prime(z / s0) / (s0 * s0),
        }
    }

    /// Initial support [a₀, b₀].
    pub fn support(&self) -> (f64, f64) {
        match self {
            InitialData::Equilibrium(eq) => (-eq.half_width, eq.half_width),
            InitialData::ScaledSemicircle { base, s0 } => {
                (-base.half_width * s0, base.half_width * s0)
            }
        }
    }

    /// Initial density ρ₀(x).
    pub fn density0(&self, x: f64) -> f64 {
        match self {
            InitialData::Equilibrium(eq) => eq.density(x),
            InitialData::ScaledSemicircle { base, s0 } => base.density(x / s0) / s0,
        }
    }

    /// Raw moments m_0..m_k of ρ₀.
    pub fn moments(&self, k: usize) -> Vec<f64> {
        match self {
            InitialData::Equilibrium(eq) => (0..=k).map(|j| eq.moment(j)).collect(),
            InitialData::ScaledSemicircle { base, s0 } => {
                (0..=k).map(|j| s0.powi(j as i32) * base.moment(j)).collect()
            }
        }
    }
}

/// Closure for the truncated moment hierarchy: how moments of order
/// above K, needed by the T-polynomial and the hierarchy RHS, are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentClosure {
    /// Freeze m_k, k > K, at their initial values (default).
    #[default]
    FreezeInitial,
    /// Treat m_k, k > K, as zero.
    Zero,
}

/// Moment trajectory from the hierarchy solve, with cubic Hermite
/// interpolation between accepted solver steps.
#[derive(Debug, Clone)]
pub struct MomentPath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    /// Closure tail (moments K+1 .. K+margin used by the RHS).
    tail: Vec<f64>,
}

impl MomentPath {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn order(&self) -> usize {
        self.values[0].len() - 1
    }

    /// Interpolated moments m_0..m_K at time t.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        if t < -1e-12 || t > self.t_end() + 1e-9 {
            return Err(Error::SourceUnavailable(t));
        }
        let t = t.clamp(0.0, self.t_end());
        let j = match self
            .times
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
        {
            Ok(j) => return Ok(self.values[j].clone()),
            Err(j) => j.saturating_sub(1).min(self.times.len() - 2),
        };
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        Ok((0..self.values[j].len())
            .map(|k| {
                h00 * self.values[j][k]
                    + h * h10 * self.derivs[j][k]
                    + h01 * self.values[j + 1][k]
                    + h * h11 * self.derivs[j + 1][k]
            })
            .collect())
    }

    fn extended(&self, m: &[f64]) -> Vec<f64> {
        let mut out = m.to_vec();
        out.extend_from_slice(&self.tail);
        out
    }
}

/// RHS of the moment hierarchy:
/// `dm_k/dt = −k·⟨x^{k−1} V'⟩ + (β/4)·k·Σ_{i+j=k−2} m_i m_j`,
/// for k = 0..=K.  `m_ext` must contain m_0..m_{K + deg V' − 1} (the
/// closure supplies the tail).
pub fn moment_rhs(m_ext: &[f64], k_max: usize, p: &Potential, beta: f64) -> Result<Vec<f64>> {
    let a = p.dcoeffs();
    let needed = k_max - 1 + a.len() - 1;
    if k_max >= 1 && m_ext.len() <= needed {
        return Err(Error::ClosureUnderflow(needed));
    }
    let mut dm = vec![0.0; k_max + 1];
    for (k, dmk) in dm.iter_mut().enumerate().skip(1) {
        let mut drift = 0.0;
        for (j, &aj) in a.iter().enumerate() {
            drift += aj * m_ext[k - 1 + j];
        }
        let mut pair = 0.0;
        if k >= 2 {
            for i in 0..=(k - 2) {
                pair += m_ext[i] * m_ext[k - 2 - i];
            }
        }
        *dmk = -(k as f64) * drift + beta / 4.0 * k as f64 * pair;
    }
    Ok(dm)
}

/// Solve the truncated moment hierarchy on [0, t_end].
pub fn solve_moments(
    init: &InitialData,
    p: &Potential,
    beta: f64,
    k_max: usize,
    t_end: f64,
    closure: MomentClosure,
) -> Result<MomentPath> {
    let margin = p.degree().saturating_sub(2); // extra orders used by the RHS
    if k_max < margin {
        return Err(Error::InsufficientMoments {
            needed: margin,
            have: k_max,
        });
    }
    let m_full = init.moments(k_max + margin);
    let tail: Vec<f64> = match closure {
        MomentClosure::FreezeInitial => m_full[k_max + 1..].to_vec(),
        MomentClosure::Zero => vec![0.0; margin],
    };
    let m0: Vec<f64> = m_full[..=k_max].to_vec();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    let rhs_of = |m: &[f64]| -> Vec<f64> {
        let mut ext = m.to_vec();
        ext.extend_from_slice(&tail);
        moment_rhs(&ext, k_max, p, beta).expect("validated closure margin")
    };
    let rk = Rk45 {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        ..Rk45::default()
    };
    rk.solve_observed(
        0.0,
        t_end,
        &m0,
        &mut |_, m, dm| {
            dm.copy_from_slice(&rhs_of(m));
        },
        &mut |t, m| {
            times.push(t);
            values.push(m.to_vec());
            derivs.push(rhs_of(m));
        },
    )?;
    Ok(MomentPath {
        times,
        values,
        derivs,
        tail,
    })
}

/// One sampled point of a characteristic path.
#[derive(Debug, Clone, Copy)]
pub struct CharState {
    pub t: f64,
    /// Position z(t).
    pub z: Complex64,
    /// Carried field value u(t) = U(t, z(t)) (the paper's −C(t)).
    pub u: Complex64,
    /// Accumulated ∫₀ᵗ V''(z(s)) ds (log of the A-factor).
    pub log_a: Complex64,
}

/// A forward characteristic path, possibly killed at the real axis.
#[derive(Debug, Clone)]
pub struct CharPath {
    pub states: Vec<CharState>,
    /// Time at which Im z crossed below 0, if it did.
    pub killed_at: Option<f64>,
}

impl CharPath {
    pub fn last(&self) -> &CharState {
        self.states.last().unwrap()
    }
}

/// The solved hydrodynamic field: potential, β, initial data, and the
/// moment trajectory driving the T_t source.  All evaluation methods are
/// `&self` and safe to call concurrently.
#[derive(Debug, Clone)]
pub struct HydroField {
    pub potential: Potential,
    pub beta: f64,
    pub init: InitialData,
    moments: MomentPath,
}

impl HydroField {
    pub fn new(
        potential: Potential,
        beta: f64,
        init: InitialData,
        t_end: f64,
        k_max: usize,
        closure: MomentClosure,
    ) -> Result<Self> {
        if beta < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "beta >= 1 required, got {beta}"
            )));
        }
        let needed = potential.degree().saturating_sub(2);
        if k_max < needed {
            return Err(Error::InsufficientMoments {
                needed,
                have: k_max,
            });
        }
        let moments = solve_moments(&init, &potential, beta, k_max, t_end, closure)?;
        Ok(HydroField {
            potential,
            beta,
            init,
            moments,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.moments.t_end()
    }

    pub fn moment_path(&self) -> &MomentPath {
        &self.moments
    }

    /// Coefficients of T_t (ascending degree) at time t.
    pub fn t_coeffs(&self, t: f64) -> Result<Vec<f64>> {
        let m = self.moments.at(t)?;
        let ext = self.moments.extended(&m);
        t_polynomial(&self.potential, &MomentVector::new(ext)?)
    }

    /// T'_t(z) by Horner on the differentiated coefficients.
    pub fn t_prime(&self, t: f64, z: Complex64) -> Result<Complex64> {
        let c = self.t_coeffs(t)?;
        Ok(horner_derivative(&c, z, 1))
    }

    /// T''_t(z).
    pub fn t_second(&self, t: f64, z: Complex64) -> Result<Complex64> {
        let c = self.t_coeffs(t)?;
        Ok(horner_derivative(&c, z, 2))
    }

    /// RHS of the coupled characteristic system, state = (z, u, logA):
    /// ż = −(β/2)u − V'(z),  u̇ = V''(z)u + T'_t(z),  d(logA)/dt = V''(z).
    fn char_rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let z = Complex64::new(y[0], y[1]);
        let u = Complex64::new(y[2], y[3]);
        let vp = self.potential.eval(z, 1).unwrap();
        let vpp = self.potential.eval(z, 2).unwrap();
        let tp = self
            .t_prime(t, z)
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let zdot = -(self.beta / 2.0) * u - vp;
        let udot = vpp * u + tp;
        dy[0] = zdot.re;
        dy[1] = zdot.im;
        dy[2] = udot.re;
        dy[3] = udot.im;
        dy[4] = vpp.re;
        dy[5] = vpp.im;
    }

    /// Forward characteristic from z0 with carried value U₀(z0), killed
    /// when Im z drops below 0 (kill rule optional for diagnostics).
    pub fn characteristic_with_options(
        &self,
        z0: Complex64,
        t_end: f64,
        kill: bool,
        rk: &Rk45,
    ) -> Result<CharPath> {
        let u0 = self.init.u0(z0);
        let y0 = [z0.re, z0.im, u0.re, u0.im, 0.0, 0.0];
        let mut states = Vec::new();
        let mut record = |t: f64, y: &[f64]| {
            states.push(CharState {
                t,
                z: Complex64::new(y[0], y[1]),
                u: Complex64::new(y[2], y[3]),
                log_a: Complex64::new(y[4], y[5]),
            });
        };
        let killed_at = if kill {
            let (t_hit, _, stopped) = rk.solve_until(
                0.0,
                t_end,
                &y0,
                &mut |t, y, dy| self.char_rhs(t, y, dy),
                &mut |_, y| y[1] < 0.0,
                &mut record,
            )?;
            stopped.then_some(t_hit)
        } else {
            rk.solve_observed(0.0, t_end, &y0, &mut |t, y, dy| self.char_rhs(t, y, dy), &mut record)?;
            None
        };
        Ok(CharPath { states, killed_at })
    }

    /// Forward characteristic with the kill rule and default tolerances.
    pub fn characteristic(&self, z0: Complex64, t_end: f64) -> Result<CharPath> {
        self.characteristic_with_options(z0, t_end, true, &Rk45::default())
    }

    /// Evaluate U(t, z) for z ∈ Π̄₊ by backward shooting.
    ///
    /// A trial (z, u) at time t is integrated backwards to t = 0; Newton
    /// iteration (in the complex unknown u) drives the mismatch
    /// `F(u) = u(0) − U₀(z(0))` to zero.  F is holomorphic in u, so a
    /// one-sided difference quotient gives the exact complex derivative up
    /// to truncation.  Continuation in t (rungs of 0.25) keeps the Newton
    /// start inside the basin of attraction.
    pub fn u(&self, t: f64, z: Complex64) -> Result<Complex64> {
        if z.im < 0.0 {
            return Err(Error::InvalidParameter(
                "u_field is defined on the closed upper half-plane".into(),
            ));
        }
        if t < 0.0 || t > self.t_end() + 1e-9 {
            return Err(Error::SourceUnavailable(t));
        }
        let mut guess = self.init.u0(z);
        if t == 0.0 {
            return Ok(guess);
        }
        let rungs = (t / 0.25).ceil() as usize;
        for r in 1..=rungs {
            let tr = t * r as f64 / rungs as f64;
            guess = self.shoot_for_u(tr, z, guess)?;
        }
        Ok(guess)
    }

    /// Backward integration of (z, u) from time t to 0; returns the foot
    /// point and carried value at t = 0.
    fn shoot_back(&self, t: f64, z: Complex64, u: Complex64, rk: &Rk45) -> Result<(Complex64, Complex64)> {
        let y0 = [z.re, z.im, u.re, u.im];
        let y = rk.solve(t, 0.0, &y0, &mut |s, y, dy| {
            let w = Complex64::new(y[0], y[1]);
            let v = Complex64::new(y[2], y[3]);
            let vp = self.potential.eval(w, 1).unwrap();
            let vpp = self.potential.eval(w, 2).unwrap();
            let tp = self
                .t_prime(s, w)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            let wdot = -(self.beta / 2.0) * v - vp;
            let vdot = vpp * v + tp;
            dy[0] = wdot.re;
            dy[1] = wdot.im;
            dy[2] = vdot.re;
            dy[3] = vdot.im;
        })?;
        Ok((Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])))
    }

    fn shoot_for_u(&self, t: f64, z: Complex64, guess: Complex64) -> Result<Complex64> {
        let rk = Rk45 {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            ..Rk45::default()
        };
        let residual = |u: Complex64| -> Result<Complex64> {
            let (w0, u_end) = self.shoot_back(t, z, u, &rk)?;
            Ok(u_end - self.init.u0(w0))
        };
        let mut u = guess;
        let mut f = residual(u)?;
        for _ in 0..40 {
            if f.norm() <= 1e-11 * (1.0 + u.norm()) {
                return Ok(u);
            }
            let h = 1e-7 * (1.0 + u.norm());
            let f2 = residual(u + h)?;
            let deriv = (f2 - f) / h;
            if deriv.norm() < 1e-14 {
                break;
            }
            let mut step = -f / deriv;
            // Backtracking: shrink the step until the residual decreases.
            let mut accepted = false;
            for _ in 0..20 {
                match residual(u + step) {
                    Ok(fnew) if fnew.norm().is_finite() && fnew.norm() < f.norm() => {
                        u += step;
                        f = fnew;
                        accepted = true;
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !accepted {
                break;
            }
        }
        if f.norm() <= 1e-9 * (1.0 + u.norm()) {
            Ok(u)
        } else {
            Err(Error::FieldNotConverged { t, z })
        }
    }

    /// Density ρ_t(x) by Plemelj boundary values with ε-extrapolation
    /// (ε ∈ {1e-4, 5e-5}, Richardson).
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        transforms::plemelj_extrapolate(
            |e| {
                self.u(t, Complex64::new(x, e))
                    .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            },
            1e-4,
        )
    }

    /// Finite-difference residual of the Burgers equation
    /// `∂_t U − ∂_z((β/4)U² + V'U + T_t)` at (t, z), step h.
    /// Second-order accurate in h; used by convergence tests.
    pub fn burgers_residual(&self, t: f64, z: Complex64, h: f64) -> Result<Complex64> {
        let du_dt = (self.u(t + h, z)? - self.u(t - h, z)?) / (2.0 * h);
        let flux = |zz: Complex64| -> Result<Complex64> {
            let u = self.u(t, zz)?;
            let vp = self.potential.eval(zz, 1)?;
            let tc = self.t_coeffs(t)?;
            Ok(self.beta / 4.0 * u * u + vp * u + horner_derivative(&tc, zz, 0))
        };
        let dflux = (flux(z + h)? - flux(z - h)?) / (2.0 * h);
        Ok(du_dt - dflux)
    }
}

/// Launch a fan of forward characteristics from a tensor grid: `nx` real
/// abscissas spanning 3× the initial support and `ny` log-spaced imaginary
/// levels in (1e-4, 1).  Killed paths stay in the output with their kill
/// time recorded.
pub fn characteristic_fan(
    field: &HydroField,
    t_end: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<CharPath>> {
    let (a0, b0) = field.init.support();
    let half_span = 1.5 * (b0 - a0) / 2.0;
    let mid = 0.5 * (a0 + b0);
    let mut seeds = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = mid - half_span + 2.0 * half_span * i as f64 / (nx - 1) as f64;
        for j in 0..ny {
            let s = j as f64 / (ny - 1) as f64;
            let y = 1e-4 * (1.0 / 1e-4f64).powf(s);
            seeds.push(Complex64::new(x, y));
        }
    }
    seeds
        .into_par_iter()
        .map(|z0| field.characteristic(z0, t_end))
        .collect()
}

/// Horner evaluation of the `order`-th derivative of the polynomial with
/// ascending coefficients `c`.
pub fn horner_derivative(c: &[f64], z: Complex64, order: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &ck) in c.iter().enumerate().rev() {
        if k < order {
            break;
        }
        let mut fall = 1.0;
        for j in 0..order {
            fall *= (k - j) as f64;
        }
        acc = acc * z + fall * ck;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn scaling_field(beta: f64, s0: f64, t_end: f64) -> HydroField {
        HydroField::new(
            Potential::harmonic(),
            beta,
            InitialData::scaled_semicircle(beta, s0).unwrap(),
            t_end,
            4,
            MomentClosure::FreezeInitial,
        )
        .unwrap()
    }

    fn equilibrium_field(p: Potential, beta: f64, t_end: f64) -> HydroField {
        let eq = equilibrium_density(&p, beta).unwrap();
        HydroField::new(
            p,
            beta,
            InitialData::Equilibrium(eq),
            t_end,
            12,
            MomentClosure::FreezeInitial,
        )
        .unwrap()
    }

    #[test]
    fn scaling_factor_examples() {
        assert_eq!(scaling_factor(1.0, 3.7), 1.0);
        assert_abs_diff_eq!(
            scaling_factor(2.0, 2.0f64.ln()),
            7.0f64.sqrt() / 2.0,
            epsilon = 1e-15
        );
        let s0 = 2.0;
        for &t in &[0.5, 1.0, 3.0] {
            assert!((scaling_factor(s0, t) - 1.0).abs() <= (-2.0 * t).exp() * (s0 * s0 - 1.0));
        }
    }

    #[test]
    fn moment_rhs_mass_is_conserved() {
        let p = Potential::harmonic();
        let dm = moment_rhs(&[1.0, 0.1, 0.6, 0.2, 0.9], 4, &p, 2.0).unwrap();
        assert_eq!(dm[0], 0.0);
    }

    #[test]
    fn moment_rhs_harmonic_m2_equation() {
        // dm₂/dt = −2 m₂ + (β/4)·2·m₀² = −2 m₂ + 1 at β = 2.
        let p = Potential::harmonic();
        for m2 in [0.2, 0.5, 1.3] {
            let dm = moment_rhs(&[1.0, 0.0, m2, 0.0], 2, &p, 2.0).unwrap();
            assert_abs_diff_eq!(dm[2], -2.0 * m2 + 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dm[1], 0.0, epsilon = 1e-15);
        }
        // Stationary point is the semicircle second moment 1/2.
        let dm = moment_rhs(&[1.0, 0.0, 0.5, 0.0], 2, &p, 2.0).unwrap();
        assert_abs_diff_eq!(dm[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn moment_rhs_vanishes_at_quartic_equilibrium() {
        // The hierarchy is stationary at the exact equilibrium moments.
        for c in [0.0, 1.0] {
            let p = Potential::quartic(c).unwrap();
            let eq = equilibrium_density(&p, 2.0).unwrap();
            let m: Vec<f64> = (0..=10).map(|k| eq.moment(k)).collect();
            let dm = moment_rhs(&m, 6, &p, 2.0).unwrap();
            for (k, &v) in dm.iter().enumerate() {
                assert!(v.abs() < 1e-12, "dm_{k} = {v} at c={c}");
            }
        }
    }

    #[test]
    fn moment_solve_matches_scaling_closed_form() {
        // m₂(t) = s(t)²/2 for the β=2 scaling solution.
        let field = scaling_field(2.0, 2.0, 2.0);
        for &t in &[0.0, 0.3, 1.0, 2.0] {
            let m = field.moment_path().at(t).unwrap();
            let s = scaling_factor(2.0, t);
            assert_abs_diff_eq!(m[2], s * s / 2.0, epsilon = 1e-8);
            assert_abs_diff_eq!(m[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn closure_underflow_is_reported() {
        let p = Potential::quartic(1.0).unwrap();
        let init = InitialData::Equilibrium(equilibrium_density(&p, 2.0).unwrap());
        assert!(matches!(
            solve_moments(&init, &p, 2.0, 1, 1.0, MomentClosure::FreezeInitial),
            Err(Error::InsufficientMoments { .. })
        ));
    }

    #[test]
    fn harmonic_characteristic_matches_closed_form() {
        // Z_t(z₀) = z₀ e^{−t} − (β/2) U₀(z₀) sinh t for harmonic V.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for &beta in &[1.0, 2.0, 4.0] {
            let field = scaling_field(beta, 2.0, 2.0);
            for _ in 0..10 {
                let z0 = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.05..1.5));
                let t = rng.gen_range(0.1..2.0);
                // Kill rule off: the closed form continues across the axis
                // and some characteristics legitimately cross.
                let path = field
                    .characteristic_with_options(z0, t, false, &Rk45::tight())
                    .unwrap();
                let u0 = field.init.u0(z0);
                let z_exact = z0 * (-t).exp() - beta / 2.0 * u0 * t.sinh();
                assert!(
                    (path.last().z - z_exact).norm() < 1e-9,
                    "beta={beta}, z0={z0}, t={t}"
                );
            }
        }
    }

    #[test]
    fn equilibrium_characteristic_is_stationary() {
        for field in [
            equilibrium_field(Potential::harmonic(), 2.0, 1.5),
            equilibrium_field(Potential::quartic(1.0).unwrap(), 2.0, 1.5),
        ] {
            let eq = match &field.init {
                InitialData::Equilibrium(eq) => *eq,
                _ => unreachable!(),
            };
            let z0 = Complex64::new(0.4, 0.6);
            let path = field
                .characteristic_with_options(z0, 1.5, true, &Rk45::tight())
                .unwrap();
            for s in path.states.iter() {
                // Skip the kill point itself: the frozen state can sit a few
                // ulps below the axis, where the closed form is on the other
                // side of the cut.
                if s.z.im <= 1e-9 {
                    continue;
                }
                assert!(
                    (s.u - eq.stieltjes(s.z)).norm() < 1e-8,
                    "stationarity broken at t={}",
                    s.t
                );
            }
        }
    }

    #[test]
    fn boundary_characteristic_traces_semi_ellipse() {
        // Harmonic β=2 equilibrium: the flow image of x + i0 lies on the
        // ellipse with semi-axes √2·cosh t and √2·sinh t (the carried
        // boundary value pushes the path across the axis, so the kill rule
        // is disabled for this diagnostic).
        let field = equilibrium_field(Potential::harmonic(), 2.0, 1.0);
        for &x in &[0.3, 0.9, -1.1] {
            let t = 0.7f64;
            let path = field
                .characteristic_with_options(Complex64::new(x, 0.0), t, false, &Rk45::tight())
                .unwrap();
            let z = path.last().z;
            assert_abs_diff_eq!(z.re, x * t.cosh(), epsilon = 1e-9);
            assert_abs_diff_eq!(z.im.abs(), (2.0 - x * x).sqrt() * t.sinh(), epsilon = 1e-9);
            let e = (z.re / t.cosh()).powi(2) + (z.im / t.sinh()).powi(2);
            assert_abs_diff_eq!(e, 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn kill_rule_fires_for_downward_characteristics() {
        let field = equilibrium_field(Potential::harmonic(), 2.0, 1.0);
        let path = field.characteristic(Complex64::new(0.5, 0.0), 1.0).unwrap();
        let kt = path.killed_at.expect("crossing characteristic must be killed");
        assert!(kt < 1e-6, "kill should fire immediately, got t={kt}");
    }

    #[test]
    fn u_field_at_time_zero_is_initial_datum() {
        let field = scaling_field(2.0, 0.5, 1.0);
        let z = Complex64::new(0.2, 0.4);
        assert_eq!(field.u(0.0, z).unwrap(), field.init.u0(z));
    }

    #[test]
    fn u_field_reproduces_scaling_solution() {
        // U_t(z) = U_eq(z/s(t))/s(t) at the spec probe point.
        let eq = equilibrium_density(&Potential::harmonic(), 2.0).unwrap();
        for s0 in [0.5, 2.0] {
            let field = scaling_field(2.0, s0, 2.0);
            let z = Complex64::new(0.5, 0.5);
            for &t in &[0.25, 1.0, 2.0] {
                let s = scaling_factor(s0, t);
                let exact = eq.stieltjes(z / s) / s;
                let got = field.u(t, z).unwrap();
                assert!(
                    (got - exact).norm() < 1e-6,
                    "s0={s0}, t={t}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn u_field_is_stationary_at_quartic_equilibrium() {
        let field = equilibrium_field(Potential::quartic(1.0).unwrap(), 2.0, 1.0);
        let eq = equilibrium_density(&Potential::quartic(1.0).unwrap(), 2.0).unwrap();
        for z in [Complex64::new(0.3, 0.4), Complex64::new(-0.8, 0.1), Complex64::new(1.5, 0.9)] {
            let got = field.u(1.0, z).unwrap();
            assert!((got - eq.stieltjes(z)).norm() < 1e-6, "z={z}");
        }
    }

    #[test]
    fn density_matches_scaled_semicircle() {
        let field = scaling_field(2.0, 2.0, 1.0);
        let t = 0.8;
        let s = scaling_factor(2.0, t);
        let rho0 = field.density(t, 0.0).unwrap();
        assert!(
            (rho0 - std::f64::consts::SQRT_2 / (std::f64::consts::PI * s)).abs() < 1e-5,
            "rho(0) = {rho0}"
        );
        // Far outside the support the density vanishes.
        let far = field.density(t, 5.0).unwrap();
        assert!(far < 1e-6);
    }

    #[test]
    fn density_has_unit_mass() {
        let field = scaling_field(2.0, 1.5, 0.6);
        let t = 0.5;
        let s = scaling_factor(1.5, t);
        // Substitute x = b·sin θ so the √-edges become smooth in θ and the
        // trapezoid rule converges fast.
        let b = std::f64::consts::SQRT_2 * s;
        let n = 81;
        let h = std::f64::consts::PI / (n - 1) as f64;
        let mut mass = 0.0;
        for i in 0..n {
            let th = -std::f64::consts::FRAC_PI_2 + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            mass += w * h * field.density(t, b * th.sin()).unwrap() * b * th.cos();
        }
        assert!((mass - 1.0).abs() < 1e-4, "mass = {mass}");
    }

    #[test]
    fn burgers_residual_is_second_order() {
        let field = scaling_field(2.0, 2.0, 1.0);
        let z = Complex64::new(0.4, 0.7);
        let r1 = field.burgers_residual(0.5, z, 2e-2).unwrap().norm();
        let r2 = field.burgers_residual(0.5, z, 1e-2).unwrap().norm();
        assert!(r1 < 1e-2, "coarse residual too large: {r1}");
        assert!(r2 < r1 / 2.5, "no O(h²) decay: {r1} -> {r2}");
    }

    #[test]
    fn fan_preserves_herglotz_property() {
        let field = scaling_field(2.0, 2.0, 1.0);
        let fan = characteristic_fan(&field, 1.0, 16, 8).unwrap();
        for path in &fan {
            for s in &path.states {
                if path.killed_at.map_or(true, |kt| s.t < kt) && s.z.im > 0.0 {
                    assert!(s.u.im > 0.0, "Herglotz violated at t={}, z={}", s.t, s.z);
                }
            }
        }
    }
}
