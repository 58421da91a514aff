//! Adaptive Runge–Kutta integration (Dormand–Prince 5(4)).
//!
//! A small embedded-pair integrator over `f64` state vectors, with helpers
//! for packing complex states.  Supports integration in either time
//! direction, dense observation of accepted steps, and event localization
//! by step bisection (used for the kill rule of characteristics crossing
//! the real axis).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dormand–Prince coefficients (the classic DOPRI5 tableau).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// 5th-order weights (identical to the last row of `A`).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Embedded 4th-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrator configuration.  Defaults match the project-wide ODE
/// tolerances (abs 1e-10 / rel 1e-9).
#[derive(Debug, Clone, Copy)]
pub struct Rk45 {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Rk45 {
    fn default() -> Self {
        Rk45 {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl Rk45 {
    /// Tighter tolerances for oracle comparisons at the 1e-9 .. 1e-12 level.
    pub fn tight() -> Self {
        Rk45 {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            ..Rk45::default()
        }
    }

    /// One Dormand–Prince step of (signed) size `h` from `(t, y)`.
    /// Returns the 5th-order solution and the embedded error estimate.
    fn step_once<F>(&self, rhs: &mut F, t: f64, y: &[f64], h: f64) -> (Vec<f64>, f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dim = y.len();
        let mut k = vec![vec![0.0; dim]; 7];
        let mut scratch = vec![0.0; dim];
        for stage in 0..7 {
            for (d, s) in scratch.iter_mut().enumerate() {
                let mut acc = y[d];
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += h * A[stage][j] * kj[d];
                }
                *s = acc;
            }
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            rhs(t + C[stage] * h, &scratch, &mut tail[0]);
        }
        let mut y5 = vec![0.0; dim];
        let mut err = 0.0f64;
        for d in 0..dim {
            let mut s5 = y[d];
            let mut s4 = y[d];
            for (j, kj) in k.iter().enumerate() {
                s5 += h * B5[j] * kj[d];
                s4 += h * B4[j] * kj[d];
            }
            y5[d] = s5;
            let sc = self.abs_tol + self.rel_tol * y[d].abs().max(s5.abs());
            let e = (s5 - s4) / sc;
            err += e * e;
        }
        (y5, (err / dim as f64).sqrt())
    }

    /// Integrate from `t0` to `t1` (either direction), returning the final
    /// state.  `observer` is called at `t0` and after every accepted step.
    pub fn solve_observed<F, O>(
        &self,
        t0: f64,
        t1: f64,
        y0: &[f64],
        rhs: &mut F,
        observer: &mut O,
    ) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]),
    {
        let span = t1 - t0;
        if span == 0.0 {
            observer(t0, y0);
            return Ok(y0.to_vec());
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0.to_vec();
        observer(t, &y);
        let mut h = dir * self.h_init.min(span.abs()).min(self.h_max);
        for _ in 0..self.max_steps {
            if (t1 - t) * dir <= 0.0 {
                return Ok(y);
            }
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            let (y5, err) = self.step_once(rhs, t, &y, h);
            if err <= 1.0 {
                t += h;
                y = y5;
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFiniteCharacteristic);
                }
                observer(t, &y);
                let grow = if err > 0.0 {
                    (0.9 * err.powf(-0.2)).min(5.0)
                } else {
                    5.0
                };
                h = (h * grow).clamp(-self.h_max, self.h_max);
            } else {
                h *= (0.9 * err.powf(-0.2)).max(0.1);
            }
            if h.abs() < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StepUnderflow(t));
            }
        }
        Err(Error::TooManySteps)
    }

    /// Integrate from `t0` to `t1`, returning only the endpoint state.
    pub fn solve<F>(&self, t0: f64, t1: f64, y0: &[f64], rhs: &mut F) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.solve_observed(t0, t1, y0, rhs, &mut |_, _| {})
    }

    /// Integrate forward until either `t1` is reached or `stop` fires.
    ///
    /// When `stop` first holds at the end of an accepted step, the crossing
    /// is localized by bisecting the step size from the previous accepted
    /// state.  Returns `(t_final, y_final, stopped)`.
    pub fn solve_until<F, S>(
        &self,
        t0: f64,
        t1: f64,
        y0: &[f64],
        rhs: &mut F,
        stop: &mut S,
        observer: &mut impl FnMut(f64, &[f64]),
    ) -> Result<(f64, Vec<f64>, bool)>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        S: FnMut(f64, &[f64]) -> bool,
    {
        if stop(t0, y0) {
            return Ok((t0, y0.to_vec(), true));
        }
        let dir = (t1 - t0).signum();
        let mut t = t0;
        let mut y = y0.to_vec();
        observer(t, &y);
        let mut h = dir * self.h_init.min((t1 - t0).abs()).min(self.h_max);
        for _ in 0..self.max_steps {
            if (t1 - t) * dir <= 0.0 {
                return Ok((t, y, false));
            }
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            let (y5, err) = self.step_once(rhs, t, &y, h);
            if err <= 1.0 {
                if stop(t + h, &y5) {
                    // Bisect on the step size to localize the event.
                    let mut lo = 0.0f64;
                    let mut hi = h;
                    let mut y_hit = y5;
                    for _ in 0..60 {
                        if (hi - lo).abs() < 1e-13 * (1.0 + t.abs()) {
                            break;
                        }
                        let mid = 0.5 * (lo + hi);
                        let (ym, _) = self.step_once(rhs, t, &y, mid);
                        if stop(t + mid, &ym) {
                            hi = mid;
                            y_hit = ym;
                        } else {
                            lo = mid;
                        }
                    }
                    let t_hit = t + hi;
                    observer(t_hit, &y_hit);
                    return Ok((t_hit, y_hit, true));
                }
                t += h;
                y = y5;
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFiniteCharacteristic);
                }
                observer(t, &y);
                let grow = if err > 0.0 {
                    (0.9 * err.powf(-0.2)).min(5.0)
                } else {
                    5.0
                };
                h = (h * grow).clamp(-self.h_max, self.h_max);
            } else {
                h *= (0.9 * err.powf(-0.2)).max(0.1);
            }
            if h.abs() < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StepUnderflow(t));
            }
        }
        Err(Error::TooManySteps)
    }
}

/// Pack complex values into a flat real vector (re, im pairs).
pub fn pack(zs: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * zs.len());
    for z in zs {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

/// Inverse of [`pack`].
pub fn unpack(ys: &[f64]) -> Vec<Complex64> {
    ys.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}
