//! Tracking of the external support [a_t, b_t] of the evolving density.
//!
//! Characteristics launched from real points outside the initial support
//! stay real.  Eliminating the carried field value turns the flow into the
//! second-order form `z̈ = V''(z)V'(z) − (β/2)T'_t(z)`, which only needs
//! the moment trajectory (no field evaluation).  The edge at time t is the
//! image of the pre-image `b₀*(t) = sup{x₀ > b₀ : Z'_t(x₀) ≤ 0}`, where
//! the Jacobian Z'_t is integrated alongside as the variational system.
//! The supremum is located by a coarse far-field scan followed by
//! bisection.

use rayon::prelude::*;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hydro::HydroField;
use crate::rk::Rk45;

/// Which edge of the support to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Result of a single edge solve.
#[derive(Debug, Clone, Copy)]
pub struct EdgeResult {
    /// Pre-image x₀* of the edge under the characteristic flow.
    pub pre_image: f64,
    /// Edge position Z_t(x₀*).
    pub position: f64,
    /// True when no Jacobian sign change was found and the initial edge
    /// itself was returned (hard-edge boundary case).
    pub boundary_case: bool,
    /// Minimal Jacobian over scan points strictly beyond the pre-image.
    pub margin: f64,
}

/// Sampled trajectory of both edges with pre-images and Jacobian margins.
#[derive(Debug, Clone)]
pub struct EdgeTrajectory {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_star: Vec<f64>,
    pub b_star: Vec<f64>,
    pub jacobian_margin: Vec<f64>,
}

/// Integrate the real characteristic and its Jacobian from x₀ (strictly
/// outside the initial support) up to time t.  Returns (Z_t(x₀), Z'_t(x₀)).
///
/// State: (z, ż, δz, δż) with
/// `z̈ = V''(z)V'(z) − (β/2)T'_t(z)` and the linearization
/// `δz̈ = (V'''(z)V'(z) + V''(z)² − (β/2)T''_t(z))·δz`,
/// started from ż(0) = −(β/2)U₀(x₀) − V'(x₀) and
/// δż(0) = −(β/2)U₀'(x₀) − V''(x₀), δz(0) = 1.
pub fn real_characteristic_with_jacobian(
    field: &HydroField,
    x0: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let (a0, b0) = field.init.support();
    if x0 >= a0 && x0 <= b0 {
        return Err(Error::OffSupport(x0));
    }
    let zc = Complex64::new(x0, 0.0);
    let u0 = field.init.u0(zc).re;
    let u0p = field.init.u0_prime(zc).re;
    let beta = field.beta;
    let vp0 = field.potential.eval_real(x0, 1)?;
    let vpp0 = field.potential.eval_real(x0, 2)?;
    let y0 = [
        x0,
        -(beta / 2.0) * u0 - vp0,
        1.0,
        -(beta / 2.0) * u0p - vpp0,
    ];
    let rk = Rk45 {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        ..Rk45::default()
    };
    let y = rk.solve(0.0, t, &y0, &mut |s, y, dy| {
        let z = Complex64::new(y[0], 0.0);
        let vp = field.potential.eval(z, 1).unwrap().re;
        let vpp = field.potential.eval(z, 2).unwrap().re;
        let vppp = field.potential.eval(z, 3).unwrap().re;
        let tp = field.t_prime(s, z).map(|v| v.re).unwrap_or(f64::NAN);
        let tpp = field.t_second(s, z).map(|v| v.re).unwrap_or(f64::NAN);
        dy[0] = y[1];
        dy[1] = vpp * vp - beta / 2.0 * tp;
        dy[2] = y[3];
        dy[3] = (vppp * vp + vpp * vpp - beta / 2.0 * tpp) * y[2];
    })?;
    if !(y[0].is_finite() && y[2].is_finite()) {
        return Err(Error::NonFiniteCharacteristic);
    }
    Ok((y[0], y[2]))
}

/// Locate one support edge at time t.
///
/// Scans 256 log-spaced offsets from `edge·(1+1e-6)` out to
/// `edge + 10(1+|edge|)`, walking inward from the far field to find the
/// outermost Jacobian sign change, then bisects to |Δx₀| ≤ 1e-12.
pub fn edge(field: &HydroField, t: f64, side: Side) -> Result<EdgeResult> {
    let (a0, b0) = field.init.support();
    let base = match side {
        Side::Left => a0,
        Side::Right => b0,
    };
    let sgn = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    if t == 0.0 {
        return Ok(EdgeResult {
            pre_image: base,
            position: base,
            boundary_case: false,
            margin: 1.0,
        });
    }
    let d_min = (base.abs() * 1e-6).max(1e-8);
    let d_max = 10.0 * (1.0 + base.abs());
    let n = 256;
    let offsets: Vec<f64> = (0..n)
        .map(|i| d_min * (d_max / d_min).powf(i as f64 / (n - 1) as f64))
        .collect();
    let jac: Vec<f64> = offsets
        .par_iter()
        .map(|&d| {
            real_characteristic_with_jacobian(field, base + sgn * d, t)
                .map(|(_, j)| j)
                .unwrap_or(f64::NAN)
        })
        .collect();
    // Outermost index (largest offset) where the Jacobian is <= 0.
    let mut hit = None;
    for i in (0..n).rev() {
        if jac[i].is_nan() {
            return Err(Error::NonFiniteCharacteristic);
        }
        if jac[i] <= 0.0 {
            hit = Some(i);
            break;
        }
    }
    let margin_beyond = |idx: usize| -> f64 {
        jac[idx + 1..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let Some(i) = hit else {
        // Jacobian positive all the way down to the initial edge: the edge
        // has not detached; report the boundary case.
        let (z, _) = real_characteristic_with_jacobian(field, base + sgn * d_min, t)?;
        return Ok(EdgeResult {
            pre_image: base,
            position: z,
            boundary_case: true,
            margin: jac.iter().copied().fold(f64::INFINITY, f64::min),
        });
    };
    if i == n - 1 {
        return Err(Error::BracketingFailure(format!(
            "Jacobian non-positive at the far end of the scan range at t={t}"
        )));
    }
    // Bracket [offsets[i] (J<=0), offsets[i+1] (J>0)] and bisect.
    let mut lo = offsets[i];
    let mut hi = offsets[i + 1];
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let (_, j) = real_characteristic_with_jacobian(field, base + sgn * mid, t)?;
        if j <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pre = base + sgn * 0.5 * (lo + hi);
    let (pos, _) = real_characteristic_with_jacobian(field, pre, t)?;
    Ok(EdgeResult {
        pre_image: pre,
        position: pos,
        boundary_case: false,
        margin: margin_beyond(i),
    })
}

/// Track both edges over the given times.
pub fn track_support(field: &HydroField, times: &[f64]) -> Result<EdgeTrajectory> {
    let mut out = EdgeTrajectory {
        times: times.to_vec(),
        a: Vec::new(),
        b: Vec::new(),
        a_star: Vec::new(),
        b_star: Vec::new(),
        jacobian_margin: Vec::new(),
    };
    for &t in times {
        let left = edge(field, t, Side::Left)?;
        let right = edge(field, t, Side::Right)?;
        out.a.push(left.position);
        out.b.push(right.position);
        out.a_star.push(left.pre_image);
        out.b_star.push(right.pre_image);
        out.jacobian_margin.push(left.margin.min(right.margin));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::{scaling_factor, HydroField, InitialData, MomentClosure};
    use crate::potential::Potential;
    use approx::assert_abs_diff_eq;

    fn scaling_field(s0: f64, t_end: f64) -> HydroField {
        HydroField::new(
            Potential::harmonic(),
            2.0,
            InitialData::scaled_semicircle(2.0, s0).unwrap(),
            t_end,
            4,
            MomentClosure::FreezeInitial,
        )
        .unwrap()
    }

    #[test]
    fn identity_flow_at_time_zero() {
        let field = scaling_field(2.0, 1.0);
        let (z, j) = real_characteristic_with_jacobian(&field, 3.5, 0.0).unwrap();
        assert_eq!(z, 3.5);
        assert_eq!(j, 1.0);
    }

    #[test]
    fn inside_support_start_is_rejected() {
        let field = scaling_field(2.0, 1.0);
        assert!(matches!(
            real_characteristic_with_jacobian(&field, 0.3, 0.5),
            Err(Error::OffSupport(_))
        ));
    }

    #[test]
    fn harmonic_jacobian_matches_closed_form() {
        // Z'_t(x₀) = cosh t − [(β/2)U₀'(x₀)+1]·sinh t and
        // Z_t(x₀) = x₀ e^{−t} − (β/2)U₀(x₀)·sinh t for harmonic V.
        let field = scaling_field(2.0, 2.0);
        for &x0 in &[2.9, 3.5, 6.0, -4.2] {
            for &t in &[0.4, 1.1, 2.0] {
                let (z, j) = real_characteristic_with_jacobian(&field, x0, t).unwrap();
                let zc = Complex64::new(x0, 0.0);
                let u0 = field.init.u0(zc).re;
                let u0p = field.init.u0_prime(zc).re;
                let z_exact = x0 * (-t).exp() - u0 * t.sinh();
                let j_exact = t.cosh() - (u0p + 1.0) * t.sinh();
                assert_abs_diff_eq!(z, z_exact, epsilon = 1e-8);
                assert_abs_diff_eq!(j, j_exact, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn far_field_asymptotics() {
        // Z_t(x₀) ≈ e^{−t} x₀ + (β/2) sinh t / x₀ far from the support.
        let field = scaling_field(2.0, 1.0);
        let (t, x0) = (1.0, 50.0);
        let (z, _) = real_characteristic_with_jacobian(&field, x0, t).unwrap();
        let pred = (-t).exp() * x0 + t.sinh() / x0;
        assert!((z - pred).abs() < 1e-2 / x0, "z={z} vs {pred}");
    }

    #[test]
    fn edge_at_time_zero_is_initial_edge() {
        let field = scaling_field(2.0, 1.0);
        let r = edge(&field, 0.0, Side::Right).unwrap();
        let b0 = 2.0 * std::f64::consts::SQRT_2;
        assert_eq!(r.pre_image, b0);
        assert_eq!(r.position, b0);
        assert!(!r.boundary_case);
    }

    #[test]
    fn scaling_edge_matches_worked_example() {
        // b_t = √2·s(t); at s0=2, t=ln 2 this is √2·√7/2 ≈ 1.87083.
        let field = scaling_field(2.0, 1.0);
        let t = 2.0f64.ln();
        let r = edge(&field, t, Side::Right).unwrap();
        assert_abs_diff_eq!(
            r.position,
            std::f64::consts::SQRT_2 * 7.0f64.sqrt() / 2.0,
            epsilon = 1e-6
        );
        assert!(!r.boundary_case);
        assert!(r.margin > 0.0);
    }

    #[test]
    fn pre_image_satisfies_coth_identity() {
        // x₀*/√(x₀*² − b₀²) = 1 + (b₀²/2)(coth t − 1) for the β=2 scaling
        // scenario.
        let field = scaling_field(2.0, 2.0);
        let b0 = 2.0 * std::f64::consts::SQRT_2;
        for &t in &[0.3, 0.8, 1.7] {
            let r = edge(&field, t, Side::Right).unwrap();
            let x = r.pre_image;
            let lhs = x / (x * x - b0 * b0).sqrt();
            let rhs = 1.0 + b0 * b0 / 2.0 * (1.0 / t.tanh() - 1.0);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        }
    }

    #[test]
    fn monotone_relaxation_toward_equilibrium() {
        for s0 in [0.5f64, 2.0] {
            let field = scaling_field(s0, 2.0);
            let times: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
            let traj = track_support(&field, &times).unwrap();
            for (i, &t) in times.iter().enumerate() {
                let target = std::f64::consts::SQRT_2 * scaling_factor(s0, t);
                assert_abs_diff_eq!(traj.b[i], target, epsilon = 1e-6);
                // Symmetry for even data.
                assert_abs_diff_eq!(traj.a[i], -traj.b[i], epsilon = 1e-9);
            }
            for w in traj.b.windows(2) {
                if s0 > 1.0 {
                    assert!(w[1] < w[0], "b_t must decrease for s0>1");
                } else {
                    assert!(w[1] > w[0], "b_t must increase for s0<1");
                }
            }
        }
    }

    #[test]
    fn edges_are_consistent_with_density() {
        let field = scaling_field(2.0, 0.6);
        let t = 0.5;
        let r = edge(&field, t, Side::Right).unwrap();
        let inside = field.density(t, r.position - 0.05).unwrap();
        let outside = field.density(t, r.position + 0.05).unwrap();
        assert!(inside > 1e-3, "density inside the edge: {inside}");
        assert!(outside <= 1e-4, "density outside the edge: {outside}");
    }
}
