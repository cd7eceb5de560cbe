//! Adaptive explicit Runge-Kutta integration, Dormand-Prince 5(4).
//!
//! The right-hand side is autonomous: the only caller integrates vehicle
//! dynamics with the input frozen over the horizon, which removes the
//! explicit time dependence.

use nalgebra::SVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    /// Error control pushed the step size below the resolvable scale.
    #[error("step size underflow at t={t:.6e} (state {state:?})")]
    StepUnderflow { t: f64, state: Vec<f64> },
}

/// Dormand-Prince coefficients (the classic DOPRI5 tableau).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights, for the error estimate.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: usize = 100_000;

/// Integrates `dy/dt = f(y)` from `y0` over `[0, t_end]` and returns the
/// terminal state. `t_end = 0` returns `y0` unchanged.
pub fn integrate<const N: usize, F>(
    f: F,
    y0: SVector<f64, N>,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<SVector<f64, N>, OdeError>
where
    F: Fn(&SVector<f64, N>) -> SVector<f64, N>,
{
    if t_end == 0.0 {
        return Ok(y0);
    }

    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);
    let mut h = initial_step(&f, &y, &k1, t_end, rel_tol, abs_tol);

    for _ in 0..MAX_STEPS {
        let remaining = t_end - t;
        if remaining <= f64::EPSILON * t_end.max(1.0) {
            return Ok(y);
        }
        h = h.min(remaining);
        if h < f64::EPSILON * t_end.max(1.0) {
            return Err(OdeError::StepUnderflow {
                t,
                state: y.iter().copied().collect(),
            });
        }

        let k2 = f(&(y + h * A21 * k1));
        let k3 = f(&(y + h * (A31 * k1 + A32 * k2)));
        let k4 = f(&(y + h * (A41 * k1 + A42 * k2 + A43 * k3)));
        let k5 = f(&(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)));
        let k6 = f(&(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)));
        let y_next = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        // FSAL stage: the derivative at the candidate point doubles as the
        // first stage of the next step.
        let k7 = f(&y_next);
        let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);

        let mut err_norm_sq = 0.0;
        for i in 0..N {
            let scale = abs_tol + rel_tol * y[i].abs().max(y_next[i].abs());
            let r = err_vec[i] / scale;
            err_norm_sq += r * r;
        }
        let err = (err_norm_sq / N as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_next;
            k1 = k7;
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= factor;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }

    // Only reachable through pathological step-size thrash.
    Err(OdeError::StepUnderflow {
        t,
        state: y.iter().copied().collect(),
    })
}

/// Conservative first step from the derivative magnitude at the initial
/// point (Hairer-Nørsett-Wanner style, simplified).
fn initial_step<const N: usize, F>(
    f: &F,
    y0: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> f64
where
    F: Fn(&SVector<f64, N>) -> SVector<f64, N>,
{
    let scale = |y: &SVector<f64, N>, v: &SVector<f64, N>| -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            let sc = abs_tol + rel_tol * y[i].abs();
            let r = v[i] / sc;
            s += r * r;
        }
        (s / N as f64).sqrt()
    };
    let d0 = scale(y0, y0);
    let d1 = scale(y0, k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_end);

    let y1 = y0 + h0 * k1;
    let k2 = f(&y1);
    let d2 = scale(y0, &(k2 - k1)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{SVector, Vector1, Vector2};

    #[test]
    fn zero_horizon_returns_input_bitwise() {
        let y0 = Vector2::new(1.234_f64, -9.876);
        let y = integrate(|y| *y, y0, 0.0, 1e-8, 1e-8).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let y0 = Vector1::new(1.0);
        let y = integrate(|y: &Vector1<f64>| -y, y0, 2.0, 1e-10, 1e-10).unwrap();
        assert!((y[0] - (-2.0_f64).exp()).abs() < 1e-9, "got {}", y[0]);
    }

    #[test]
    fn circular_orbit_preserves_radius_and_phase() {
        let y0 = Vector2::new(1.0, 0.0);
        let t = 3.0;
        let y = integrate(
            |y: &Vector2<f64>| Vector2::new(-y[1], y[0]),
            y0,
            t,
            1e-10,
            1e-10,
        )
        .unwrap();
        assert!((y[0] - t.cos()).abs() < 1e-8);
        assert!((y[1] - t.sin()).abs() < 1e-8);
    }

    #[test]
    fn blow_up_reports_underflow_with_state() {
        // dy/dt = y² escapes to infinity at t = 1/y0 = 1e-3.
        let y0 = Vector1::new(1e3);
        let err = integrate(
            |y: &Vector1<f64>| Vector1::new(y[0] * y[0]),
            y0,
            1.0,
            1e-8,
            1e-8,
        )
        .unwrap_err();
        match err {
            OdeError::StepUnderflow { t, state } => {
                assert!(t < 2e-3, "blow-up time {t}");
                assert_eq!(state.len(), 1);
                assert!(state[0] > 1e3);
            }
        }
    }

    #[test]
    fn constant_rhs_is_exact() {
        let y0 = SVector::<f64, 3>::zeros();
        let y = integrate(
            |_: &SVector<f64, 3>| SVector::<f64, 3>::new(1.0, 2.0, -3.0),
            y0,
            0.5,
            1e-8,
            1e-8,
        )
        .unwrap();
        assert!((y[0] - 0.5).abs() < 1e-12);
        assert!((y[1] - 1.0).abs() < 1e-12);
        assert!((y[2] + 1.5).abs() < 1e-12);
    }
}
