//! End-to-end verification suite: ten numbered checks, each pinning one
//! module-crossing contract against an independent closed form or a
//! statistical oracle.  The CLI `verify` command and the acceptance test
//! both run [`run_all`] and report one line per check.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use crate::error::Result;
use crate::fluctuation::{
    hermite_g, johansson_continued, johansson_equal_time, pde_evolve_kernel,
    quartic_flow_closed_form, short_distance, GMap, Sign,
};
use crate::hydro::{
    characteristic_fan, scaling_factor, HydroField, InitialData, MomentClosure,
};
use crate::ou;
use crate::potential::{equilibrium_density, Potential};
use crate::rk::Rk45;
use crate::sde;
use crate::support;
use crate::transforms::{hilbert_line, plemelj_extrapolate, stieltjes, GridFunction};

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Primary observed figure of merit (worst error, normalized
    /// deviation, or violation count depending on the check).
    pub observed: f64,
    /// Bound the observed figure must stay within.
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

fn run(
    id: usize,
    name: &'static str,
    threshold: f64,
    body: impl FnOnce() -> Result<(f64, String)>,
) -> CheckResult {
    let start = Instant::now();
    let (passed, observed, detail) = match body() {
        Ok((obs, detail)) => (obs <= threshold && obs.is_finite(), obs, detail),
        Err(e) => (false, f64::NAN, format!("failed: {e}")),
    };
    CheckResult {
        id,
        name,
        passed,
        observed,
        threshold,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn scaling_field(s0: f64, t_end: f64) -> Result<HydroField> {
    HydroField::new(
        Potential::harmonic(),
        2.0,
        InitialData::scaled_semicircle(2.0, s0)?,
        t_end,
        2,
        MomentClosure::FreezeInitial,
    )
}

/// Check 1: the harmonic β=2 field started from a dilated semicircle stays
/// a dilated semicircle, U_t(z) = U_eq(z/s(t))/s(t) with
/// s(t) = √(1 + e^{−2t}(s0²−1)), probed off the characteristic grid.
pub fn check_1() -> CheckResult {
    run(1, "scaling-solution hydrodynamics", 1e-6, || {
        let eq = equilibrium_density(&Potential::harmonic(), 2.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut worst = 0.0f64;
        for s0 in [0.5, 2.0] {
            let field = scaling_field(s0, 1.0)?;
            for _ in 0..25 {
                let t = 0.05 + 0.95 * rng.gen::<f64>();
                let z = Complex64::new(
                    -2.0 + 4.0 * rng.gen::<f64>(),
                    0.1 + 0.9 * rng.gen::<f64>(),
                );
                let s = scaling_factor(s0, t);
                let target = eq.stieltjes(z / s) / s;
                worst = worst.max((field.u(t, z)? - target).norm());
            }
        }
        Ok((worst, format!("50 probes, max |U − ansatz| = {worst:.3e}")))
    })
}

/// Check 2: support tracking on the s0=2 scaling scenario gives
/// b_t = √2·s(t), and the edge pre-image obeys
/// x₀*/√(x₀*² − b₀²) = 1 + (b₀²/2)(coth t − 1).
pub fn check_2() -> CheckResult {
    run(2, "support edge trajectory", 1e-4, || {
        let field = scaling_field(2.0, 2.0)?;
        let times: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
        let traj = support::track_support(&field, &times)?;
        let b0 = 2.0 * SQRT_2;
        let (mut worst_b, mut worst_coth) = (0.0f64, 0.0f64);
        for (i, &t) in times.iter().enumerate() {
            worst_b = worst_b.max((traj.b[i] - SQRT_2 * scaling_factor(2.0, t)).abs());
            let x = traj.b_star[i];
            let lhs = x / (x * x - b0 * b0).sqrt();
            let rhs = 1.0 + b0 * b0 / 2.0 * (1.0 / t.tanh() - 1.0);
            worst_coth = worst_coth.max((lhs - rhs).abs());
        }
        if worst_coth > 1e-8 {
            return Ok((
                f64::INFINITY,
                format!("pre-image coth identity residual {worst_coth:.3e} > 1e-8"),
            ));
        }
        Ok((
            worst_b,
            format!(
                "20 times, max |b_t − √2 s(t)| = {worst_b:.3e}, coth identity residual {worst_coth:.3e}"
            ),
        ))
    })
}

/// Check 3: the harmonic characteristic flow matches
/// Z_t(z0) = z0 e^{−t} − (β/2) U₀(z0) sinh t for β ∈ {1, 2, 4}.
pub fn check_3() -> CheckResult {
    run(3, "harmonic characteristics closed form", 1e-9, || {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let rk = Rk45::tight();
        let mut worst = 0.0f64;
        for (bi, &beta) in [1.0, 2.0, 4.0].iter().enumerate() {
            let n = if bi == 0 { 34 } else { 33 };
            let init = InitialData::scaled_semicircle(beta, 1.3)?;
            let field = HydroField::new(
                Potential::harmonic(),
                beta,
                init,
                2.0,
                2,
                MomentClosure::FreezeInitial,
            )?;
            for _ in 0..n {
                let z0 = Complex64::new(
                    -2.0 + 4.0 * rng.gen::<f64>(),
                    0.2 + 1.3 * rng.gen::<f64>(),
                );
                let t = 0.05 + 1.95 * rng.gen::<f64>();
                let path = field.characteristic_with_options(z0, t, false, &rk)?;
                let closed =
                    z0 * (-t).exp() - beta / 2.0 * field.init.u0(z0) * t.sinh();
                worst = worst.max((path.last().z - closed).norm());
            }
        }
        Ok((worst, format!("100 paths over β ∈ {{1,2,4}}, max |Z − closed form| = {worst:.3e}")))
    })
}

/// Check 4: consistency triangle for the Hermite kernel — signed-kernel
/// combination, equal-time closed form, and universal-scaling kernel agree
/// to 1e-12; the G-map stationary flow reproduces the two-time kernel to
/// 1e-8; conservative PDE transport reproduces it to 1e-6.
pub fn check_4() -> CheckResult {
    run(4, "hermite kernel consistency triangle", 1e-12, || {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let mut worst_tri = 0.0f64;
        for _ in 0..100 {
            let (th1, th2) = loop {
                let a = 0.15 + (PI - 0.3) * rng.gen::<f64>();
                let b = 0.15 + (PI - 0.3) * rng.gen::<f64>();
                if (a - b).abs() > 0.15 {
                    break (a, b);
                }
            };
            let (x1, x2) = (SQRT_2 * th1.cos(), SQRT_2 * th2.cos());
            let v_comb = hermite_g(0.0, x1, x2)?;
            let v_johansson = johansson_equal_time(x1, x2, SQRT_2)?.real;
            // Independent equal-time closed form,
            // g = −(1 − cosθ1cosθ2)/(4π² sinθ1 sinθ2 (cosθ1 − cosθ2)²).
            let (c1, c2) = (th1.cos(), th2.cos());
            let v_closed = -(1.0 - c1 * c2)
                / (4.0 * PI * PI * th1.sin() * th2.sin() * (c1 - c2) * (c1 - c2));
            worst_tri = worst_tri
                .max((v_comb - v_johansson).abs())
                .max((v_comb - v_closed).abs())
                .max((v_johansson - v_closed).abs());
        }
        // G-map stationary route vs the direct two-time kernel.
        let gm = GMap::new(equilibrium_density(&Potential::harmonic(), 2.0)?)?;
        let mut worst_gmap = 0.0f64;
        for _ in 0..20 {
            let dt = 0.05 + 0.95 * rng.gen::<f64>();
            let x1 = 1.2 * (2.0 * rng.gen::<f64>() - 1.0);
            let x2 = 1.2 * (2.0 * rng.gen::<f64>() - 1.0);
            let direct = hermite_g(dt, x1, x2)?;
            let flowed = gm.stationary_two_time_g(dt, 0.0, x1, x2)?;
            worst_gmap = worst_gmap.max((flowed - direct).abs());
        }
        if worst_gmap > 1e-8 {
            return Ok((
                f64::INFINITY,
                format!("G-map vs direct kernel error {worst_gmap:.3e} > 1e-8"),
            ));
        }
        // Conservative PDE transport of the t2-slice up to t1.
        let field = HydroField::new(
            Potential::harmonic(),
            2.0,
            InitialData::Equilibrium(equilibrium_density(&Potential::harmonic(), 2.0)?),
            0.4,
            6,
            MomentClosure::FreezeInitial,
        )?;
        let (t2, t1, x2) = (0.1, 0.35, 0.5);
        let xs = [-0.8, -0.3, 0.2, 0.7];
        let pp = pde_evolve_kernel(
            &field,
            &|z| johansson_continued(z, x2, SQRT_2, Sign::Plus, Sign::Plus).unwrap(),
            t2,
            t1,
            &xs,
        )?;
        let pm = pde_evolve_kernel(
            &field,
            &|z| johansson_continued(z, x2, SQRT_2, Sign::Plus, Sign::Minus).unwrap(),
            t2,
            t1,
            &xs,
        )?;
        let mut worst_pde = 0.0f64;
        for (i, &x1) in xs.iter().enumerate() {
            let real = -(pp[i] - pm[i]).re / (2.0 * PI * PI);
            worst_pde = worst_pde.max((real - hermite_g(t1 - t2, x1, x2)?).abs());
        }
        if worst_pde > 1e-6 {
            return Ok((
                f64::INFINITY,
                format!("PDE transport vs direct kernel error {worst_pde:.3e} > 1e-6"),
            ));
        }
        Ok((
            worst_tri,
            format!(
                "triangle {worst_tri:.3e} (≤1e-12), G-map {worst_gmap:.3e} (≤1e-8), PDE {worst_pde:.3e} (≤1e-6)"
            ),
        ))
    })
}

/// Check 5: quartic continuation flow endpoint vs the closed form, with
/// the G-map residual |G(z) − G(x1) − iπt| enforced at 1e-8 inside the
/// continuation (any excess surfaces as a flow error).
pub fn check_5() -> CheckResult {
    run(5, "quartic continuation flow", 1e-8, || {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let mut worst = 0.0f64;
        for c in [0.0, 1.0] {
            let eq = equilibrium_density(&Potential::quartic(c)?, 2.0)?;
            let gm = GMap::new(eq)?;
            let a = eq.half_width;
            let a2 = a * a;
            let tau = 1.0 / ((1.5 * a2 + c) * (0.5 * a2 + c)).sqrt();
            for _ in 0..25 {
                let sgn = if rng.gen::<f64>() < 0.5 { -1.0 } else { 1.0 };
                let x1 = sgn * a * (0.1 + 0.8 * rng.gen::<f64>());
                let t = (0.02 + 0.48 * rng.gen::<f64>()) * tau;
                let flowed = gm.continuation_flow(x1, t)?;
                let closed = quartic_flow_closed_form(&eq, x1, t)?;
                worst = worst.max((flowed - closed).norm());
            }
        }
        Ok((
            worst,
            format!(
                "50 flows at c ∈ {{0,1}}, max endpoint error {worst:.3e}; path residual ≤ 1e-8 enforced per flow"
            ),
        ))
    })
}

/// Check 6: Monte Carlo covariance of linear statistics f=x, g=x² at
/// N=200, β=2, harmonic, from an exactly equilibrated start, against
/// double quadrature of the analytic kernel, within 3 jackknife SE.
pub fn check_6(replicas: usize) -> CheckResult {
    run(6, "monte carlo vs analytic kernel", 3.0, || {
        let p = Potential::harmonic();
        let eq = equilibrium_density(&p, 2.0)?;
        let cfg = sde::McConfig {
            potential: p,
            beta: 2.0,
            init: InitialData::Equilibrium(eq),
            n: 200,
            dt: 0.02,
            burn_in: 0.0,
            replicas,
            seed: 606,
            radius: 50.0,
        };
        let f = |x: f64| x;
        let g = |x: f64| x * x;
        let theory_0 = crate::fluctuation::kernel_pairing_equal_time(f, g)?;
        let theory_half = crate::fluctuation::kernel_pairing_quadrature(f, g, 0.5)?;
        let (mc_0, se_0) = sde::mc_covariance_equilibrated(&cfg, f, g, 0.0)?;
        let (mc_half, se_half) = sde::mc_covariance_equilibrated(&cfg, f, g, 0.5)?;
        let dev_0 = (mc_0 - theory_0).abs() / se_0;
        let dev_half = (mc_half - theory_half).abs() / se_half;
        Ok((
            dev_0.max(dev_half),
            format!(
                "{replicas} replicas; Δt=0: mc {mc_0:.4e} vs quad {theory_0:.4e} ({dev_0:.2} SE); Δt=0.5: mc {mc_half:.4e} vs quad {theory_half:.4e} ({dev_half:.2} SE)"
            ),
        ))
    })
}

/// Check 7: the kernel under ε-scaling of its arguments approaches the
/// short-distance law, ratio within 2%.
pub fn check_7() -> CheckResult {
    run(7, "short-distance law", 2e-2, || {
        let eq = equilibrium_density(&Potential::harmonic(), 2.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        let eps = 1e-3;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let x = 1.2 * (2.0 * rng.gen::<f64>() - 1.0);
            let (dx, dt) = loop {
                let dx = 2.0 * rng.gen::<f64>() - 1.0;
                let dt = 1.4 * rng.gen::<f64>();
                if dx.abs() + dt > 0.2 {
                    break (dx, dt);
                }
            };
            let kernel = hermite_g(eps * dt, x + eps * dx, x)?;
            let pred = short_distance(eq.density(x), dx, dt, eps)?;
            worst = worst.max((kernel / pred - 1.0).abs());
        }
        Ok((worst, format!("20 probes at ε = 1e-3, max |ratio − 1| = {worst:.3e}")))
    })
}

/// Check 8: OU identification on the Hermite stationary mode kernel
/// recovers Â(n) = |n| and K̂_∞(n) = |n|/2π² (|n| ≤ 32), and the simulated
/// per-mode lag covariance matches e^{−|n|Δt}·K̂_∞(n) within 3 SE.
pub fn check_8() -> CheckResult {
    run(8, "ou identification", 3.0, || {
        let spec = ou::identify(ou::hermite_mode_kernel, 32)?;
        let (mut worst_a, mut worst_k) = (0.0f64, 0.0f64);
        for m in &spec.modes {
            let n = m.n as f64;
            worst_a = worst_a.max((m.drift - n).abs());
            worst_k = worst_k.max((m.stationary_cov - n / (2.0 * PI * PI)).abs());
        }
        if worst_a > 1e-5 || worst_k > 1e-10 {
            return Ok((
                f64::INFINITY,
                format!("drift error {worst_a:.3e} (≤1e-5), K̂ error {worst_k:.3e} (≤1e-10)"),
            ));
        }
        let dt = 0.005;
        let lag_steps = 50; // Δt = 0.25
        let traj = ou::simulate(&spec, 1000.0, dt, 808, None, 1.0)?;
        let batches = 20;
        let mut worst_dev = 0.0f64;
        for (mi, mode) in spec.modes.iter().enumerate() {
            let xs = &traj.values[mi];
            let per = xs.len() / batches;
            let means: Vec<f64> = (0..batches)
                .map(|b| {
                    (b * per..(b + 1) * per - lag_steps)
                        .map(|k| xs[k] * xs[k + lag_steps])
                        .sum::<f64>()
                        / (per - lag_steps) as f64
                })
                .collect();
            let mean = means.iter().sum::<f64>() / batches as f64;
            let sd = (means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (batches as f64 - 1.0))
                .sqrt();
            let se = sd / (batches as f64).sqrt();
            let target = mode.stationary_cov * (-mode.drift * dt * lag_steps as f64).exp();
            worst_dev = worst_dev.max((mean - target).abs() / se);
        }
        Ok((
            worst_dev,
            format!(
                "Â error {worst_a:.3e}, K̂ error {worst_k:.3e}, worst lag-covariance deviation {worst_dev:.2} SE over 32 modes"
            ),
        ))
    })
}

/// Check 9: transform toolbox — H² = −I to 1e-6, cut-equation residual
/// (β/2)·π·H(ρ_eq) − V' ≤ 1e-6 strictly inside the support, and Plemelj
/// extrapolation reconstructs the semicircle to 1e-4.
pub fn check_9() -> CheckResult {
    run(9, "transform toolbox", 1e-6, || {
        // H² = −I on a smooth decaying zero-mean function.
        let f = |x: f64| (6.0 * x).sin() * (-x * x / 2.0).exp();
        let grid = GridFunction::sample(f, -12.0, 12.0, 1 << 14)?;
        let hh = hilbert_line(&hilbert_line(&grid)?)?;
        let mut worst_inv = 0.0f64;
        for i in 0..grid.len() {
            if grid.x(i).abs() < 6.0 {
                worst_inv = worst_inv.max((hh.values()[i] + grid.values()[i]).abs());
            }
        }
        if worst_inv > 1e-6 {
            return Ok((f64::INFINITY, format!("H² + I error {worst_inv:.3e} > 1e-6")));
        }
        // Cut equation for the β=2 semicircle: π·H(ρ_eq)(x) = x interior.
        let eq = equilibrium_density(&Potential::harmonic(), 2.0)?;
        let a = eq.half_width;
        let rho = GridFunction::sample(|x| eq.density(x), -4.0, 4.0, 1 << 18)?;
        let h = hilbert_line(&rho)?;
        let mut worst_cut = 0.0f64;
        for i in 0..rho.len() {
            let x = rho.x(i);
            if x.abs() <= a - 0.2 {
                worst_cut = worst_cut.max((PI * h.values()[i] - x).abs());
            }
        }
        // Plemelj reconstruction from off-axis Stieltjes samples.
        let narrow = GridFunction::sample(|x| eq.density(x), -2.0, 2.0, 1 << 15)?;
        let mut worst_pl = 0.0f64;
        for i in 0..=24 {
            let x = -1.2 + 0.1 * i as f64;
            let rec = plemelj_extrapolate(
                |e| stieltjes(&narrow, Complex64::new(x, e)).unwrap(),
                5e-3,
            )?;
            worst_pl = worst_pl.max((rec - eq.density(x)).abs());
        }
        if worst_pl > 1e-4 {
            return Ok((
                f64::INFINITY,
                format!("Plemelj reconstruction error {worst_pl:.3e} > 1e-4"),
            ));
        }
        Ok((
            worst_cut,
            format!(
                "H²+I {worst_inv:.3e} (≤1e-6), cut equation {worst_cut:.3e} (≤1e-6), Plemelj {worst_pl:.3e} (≤1e-4)"
            ),
        ))
    })
}

/// Check 10: structural invariants — Herglotz preservation along live
/// characteristics, exact mass conservation in the moment solve, and the
/// SDE ordering invariant with zero unresolved collisions at N = 500.
pub fn check_10() -> CheckResult {
    run(10, "property suites", 0.0, || {
        let mut violations = 0usize;
        let mut notes = Vec::new();
        // Herglotz preservation: Im u > 0 on every recorded live state.
        let field = scaling_field(2.0, 1.5)?;
        let paths = characteristic_fan(&field, 1.5, 12, 4)?;
        let mut min_im = f64::INFINITY;
        for path in &paths {
            for st in &path.states {
                min_im = min_im.min(st.u.im);
            }
        }
        if min_im <= 0.0 {
            violations += 1;
        }
        notes.push(format!("min Im U over {} characteristics: {min_im:.3e}", paths.len()));
        // Mass conservation m0 = 1 to 1e-12 for harmonic and quartic solves.
        let mut worst_mass = 0.0f64;
        for field in [
            scaling_field(0.5, 1.0)?,
            HydroField::new(
                Potential::quartic(1.0)?,
                2.0,
                InitialData::Equilibrium(equilibrium_density(&Potential::quartic(1.0)?, 2.0)?),
                1.0,
                6,
                MomentClosure::FreezeInitial,
            )?,
        ] {
            for i in 0..=20 {
                let m = field.moment_path().at(0.05 * i as f64)?;
                worst_mass = worst_mass.max((m[0] - 1.0).abs());
            }
        }
        if worst_mass > 1e-12 {
            violations += 1;
        }
        notes.push(format!("max |m₀ − 1| = {worst_mass:.3e}"));
        // SDE ordering with zero unresolved collisions.  β=1 is the
        // critical non-collision case (Bessel dimension β+1 = 2): pair
        // gaps reach scales below any fixed refinement floor once N is
        // large, so the critical point is exercised at N=100 and the
        // larger sizes at β > 1.
        let mut ordering_ok = true;
        for (beta, n) in [(1.0, 100usize), (1.5, 300), (2.0, 500)] {
            let p = Potential::harmonic();
            let eq = equilibrium_density(&p, beta)?;
            let mut state = sde::quantile_init(&InitialData::Equilibrium(eq), n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(1010);
            for _ in 0..100 {
                sde::step(&mut state, 1e-3, &p, beta, 50.0, &mut rng, 1.0)?;
                if !state.is_ordered() {
                    ordering_ok = false;
                }
            }
            notes.push(format!(
                "β={beta}, N={n}: 100 steps ordered, {} bridge refinements",
                state.rejections
            ));
        }
        if !ordering_ok {
            violations += 1;
        }
        Ok((violations as f64, notes.join("; ")))
    })
}

/// Run the full verification suite.  `mc_replicas` sets the Monte Carlo
/// budget of check 6 (the reference scale is 20 000).
pub fn run_all(mc_replicas: usize) -> Vec<CheckResult> {
    vec![
        check_1(),
        check_2(),
        check_3(),
        check_4(),
        check_5(),
        check_6(mc_replicas),
        check_7(),
        check_8(),
        check_9(),
        check_10(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        // The cheap structural checks; the full suite (including the Monte
        // Carlo criterion at reference scale) runs in the acceptance test.
        for c in [check_7(), check_8()] {
            assert!(c.passed, "check {} failed: {} ({})", c.id, c.detail, c.observed);
        }
    }
}
