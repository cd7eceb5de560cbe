//! Newton-Raphson consensus law on predicted outputs, plus the leader's
//! reference signal.
//!
//! Each follower drives the disagreement between its own predicted output
//! and its neighbors' toward zero through the inverse input-Jacobian of
//! its predictor, scaled by a per-follower speedup factor.

use crate::graph::Topology;
use crate::predictor::Prediction;
use nalgebra::Vector2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    /// The predictor's input-Jacobian is numerically singular, so the
    /// inverse-Jacobian flow is undefined at this point.
    #[error(
        "singular input-Jacobian for follower {follower} (|det|={det:.3e}, ‖J‖²={norm_sq:.3e})"
    )]
    SingularJacobian {
        follower: usize,
        det: f64,
        norm_sq: f64,
    },
    #[error("speedup factor must be ≥ 1, got {0}")]
    InvalidSpeedup(f64),
    #[error("reference signal invalid: {0}")]
    InvalidReference(String),
}

/// Per-follower gain on the consensus flow. Larger values tighten the
/// steady-state consensus error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupConfig {
    pub alpha: f64,
}

impl SpeedupConfig {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        if !(self.alpha >= 1.0) {
            return Err(ConsensusError::InvalidSpeedup(self.alpha));
        }
        Ok(())
    }
}

/// One segment of a piecewise reference curve, active from `start` until
/// the next piece takes over. The local clock `s = t - start` resets per
/// piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceShape {
    /// p(s) = origin + velocity·s
    Line {
        origin: Vector2<f64>,
        velocity: Vector2<f64>,
    },
    /// p(s) = (amp_x·sin(freq_x·s), amp_y·sin(freq_y·s))
    Sinusoid {
        amplitude: Vector2<f64>,
        angular_freq: Vector2<f64>,
    },
}

impl PieceShape {
    fn eval(&self, s: f64) -> Vector2<f64> {
        match self {
            PieceShape::Line { origin, velocity } => origin + velocity * s,
            PieceShape::Sinusoid {
                amplitude,
                angular_freq,
            } => Vector2::new(
                amplitude.x * (angular_freq.x * s).sin(),
                amplitude.y * (angular_freq.y * s).sin(),
            ),
        }
    }

    /// Supremum of ‖dp/ds‖ over the piece.
    fn rate_bound(&self) -> f64 {
        match self {
            PieceShape::Line { velocity, .. } => velocity.norm(),
            PieceShape::Sinusoid {
                amplitude,
                angular_freq,
            } => Vector2::new(amplitude.x * angular_freq.x, amplitude.y * angular_freq.y).norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePiece {
    pub start: f64,
    pub shape: PieceShape,
}

/// Trajectory the leader broadcasts. The signal is defined on [0, ∞) and
/// must be continuous; its future values are available to follower 1's
/// controller by assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSignal {
    /// Bundled platoon course: a straight diagonal approach ramp that
    /// hands over to a slow 1:2 Lissajous sweep at the origin.
    LissajousCourse,
    Constant(Vector2<f64>),
    Piecewise(Vec<CurvePiece>),
}

/// Course geometry for [`ReferenceSignal::LissajousCourse`].
const APPROACH_ORIGIN: (f64, f64) = (-50.0, -60.0);
const APPROACH_VELOCITY: (f64, f64) = (3.75, 4.5);
const HANDOFF_TIME: f64 = 40.0 / 3.0;
const SWEEP_AMPLITUDE: (f64, f64) = (350.0, 210.0);
const SWEEP_FREQ: (f64, f64) = (0.01, 0.02);

impl ReferenceSignal {
    /// Position of the reference at time `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Vector2<f64> {
        match self {
            ReferenceSignal::LissajousCourse => {
                if t <= HANDOFF_TIME {
                    Vector2::new(
                        APPROACH_ORIGIN.0 + APPROACH_VELOCITY.0 * t,
                        APPROACH_ORIGIN.1 + APPROACH_VELOCITY.1 * t,
                    )
                } else {
                    let s = t - HANDOFF_TIME;
                    Vector2::new(
                        SWEEP_AMPLITUDE.0 * (SWEEP_FREQ.0 * s).sin(),
                        SWEEP_AMPLITUDE.1 * (SWEEP_FREQ.1 * s).sin(),
                    )
                }
            }
            ReferenceSignal::Constant(p) => *p,
            ReferenceSignal::Piecewise(pieces) => {
                let idx = pieces.iter().rposition(|p| p.start <= t).unwrap_or(0);
                pieces[idx].shape.eval(t - pieces[idx].start)
            }
        }
    }

    /// Bound on the reference rate ‖dr/dt‖ over the asymptotically active
    /// piece. Logged as a diagnostic; nothing enforces it.
    pub fn rate_bound(&self) -> f64 {
        match self {
            ReferenceSignal::LissajousCourse => Vector2::new(
                SWEEP_AMPLITUDE.0 * SWEEP_FREQ.0,
                SWEEP_AMPLITUDE.1 * SWEEP_FREQ.1,
            )
            .norm(),
            ReferenceSignal::Constant(_) => 0.0,
            ReferenceSignal::Piecewise(pieces) => {
                pieces.last().map(|p| p.shape.rate_bound()).unwrap_or(0.0)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        let ReferenceSignal::Piecewise(pieces) = self else {
            return Ok(());
        };
        if pieces.is_empty() {
            return Err(ConsensusError::InvalidReference("no pieces".into()));
        }
        if pieces[0].start != 0.0 {
            return Err(ConsensusError::InvalidReference(format!(
                "first piece must start at 0, starts at {}",
                pieces[0].start
            )));
        }
        for w in pieces.windows(2) {
            if !(w[0].start < w[1].start) {
                return Err(ConsensusError::InvalidReference(format!(
                    "piece starts must strictly increase ({} then {})",
                    w[0].start, w[1].start
                )));
            }
            // Value continuity at the junction.
            let end_of_prev = w[0].shape.eval(w[1].start - w[0].start);
            let start_of_next = w[1].shape.eval(0.0);
            if (end_of_prev - start_of_next).norm() > 1e-6 {
                return Err(ConsensusError::InvalidReference(format!(
                    "discontinuity at t={}: {:?} vs {:?}",
                    w[1].start, end_of_prev, start_of_next
                )));
            }
        }
        Ok(())
    }
}

/// Newton-Raphson input rate for one follower:
///
///   u̇_i = -α_i · (∂g_i/∂u_i)⁻¹ · Σ_{j∈N_i} (g_i - g_j)
///
/// `predictions` holds one entry per agent, leader first; only the
/// follower's own Jacobian is consulted. Exact zero disagreement
/// short-circuits to a zero rate without touching the Jacobian.
pub fn nominal_input_rate(
    follower: usize,
    predictions: &[Prediction],
    speedup: &SpeedupConfig,
    topology: &Topology,
) -> Result<Vector2<f64>, ConsensusError> {
    let mut disagreement = Vector2::zeros();
    for &j in topology.neighbors(follower) {
        disagreement += predictions[follower].value - predictions[j].value;
    }
    if disagreement == Vector2::zeros() {
        return Ok(Vector2::zeros());
    }

    let j = &predictions[follower].jacobian_u;
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let norm_sq = j.norm_squared();
    if det.abs() < 1e-12 * norm_sq || norm_sq == 0.0 {
        return Err(ConsensusError::SingularJacobian {
            follower,
            det,
            norm_sq,
        });
    }
    // Direct 2×2 solve of J·x = disagreement.
    let x = Vector2::new(
        (j[(1, 1)] * disagreement.x - j[(0, 1)] * disagreement.y) / det,
        (-j[(1, 0)] * disagreement.x + j[(0, 0)] * disagreement.y) / det,
    );
    Ok(-speedup.alpha * x)
}

/// Chain disagreement energy ½·Σ ‖g_i - g_{i+1}‖² over consecutive agents,
/// leader included. A runtime diagnostic for convergence plots.
pub fn lyapunov_value(predicted_outputs: &[Vector2<f64>]) -> f64 {
    0.5 * predicted_outputs
        .windows(2)
        .map(|w| (w[0] - w[1]).norm_squared())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    fn pred(value: Vector2<f64>, jac: Matrix2<f64>) -> Prediction {
        Prediction {
            value,
            jacobian_u: jac,
        }
    }

    #[test]
    fn course_starts_at_approach_origin() {
        let r = ReferenceSignal::LissajousCourse;
        assert_eq!(r.eval(0.0), Vector2::new(-50.0, -60.0));
    }

    #[test]
    fn course_branches_agree_at_handoff() {
        let r = ReferenceSignal::LissajousCourse;
        let at = r.eval(40.0 / 3.0);
        assert_relative_eq!(at.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(at.y, 0.0, epsilon = 1e-12);
        // Approaching from the right stays continuous.
        let after = r.eval(40.0 / 3.0 + 1e-9);
        assert!((after - at).norm() < 1e-7);
    }

    #[test]
    fn course_quarter_period_of_slow_axis() {
        let r = ReferenceSignal::LissajousCourse;
        let p = r.eval(40.0 / 3.0 + 50.0 * std::f64::consts::PI);
        assert_relative_eq!(p.x, 350.0, epsilon = 1e-3);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn constant_reference_everywhere() {
        let r = ReferenceSignal::Constant(Vector2::new(7.0, -3.0));
        for t in [0.0, 1.0, 1e4] {
            assert_eq!(r.eval(t), Vector2::new(7.0, -3.0));
        }
        assert_eq!(r.rate_bound(), 0.0);
    }

    #[test]
    fn course_rate_bound_is_sweep_peak() {
        let r = ReferenceSignal::LissajousCourse;
        assert_relative_eq!(
            r.rate_bound(),
            (3.5f64 * 3.5 + 4.2 * 4.2).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn piecewise_validation_catches_discontinuity() {
        let bad = ReferenceSignal::Piecewise(vec![
            CurvePiece {
                start: 0.0,
                shape: PieceShape::Line {
                    origin: Vector2::zeros(),
                    velocity: Vector2::new(1.0, 0.0),
                },
            },
            CurvePiece {
                start: 1.0,
                shape: PieceShape::Line {
                    origin: Vector2::new(5.0, 5.0),
                    velocity: Vector2::zeros(),
                },
            },
        ]);
        assert!(bad.validate().is_err());

        let good = ReferenceSignal::Piecewise(vec![
            CurvePiece {
                start: 0.0,
                shape: PieceShape::Line {
                    origin: Vector2::zeros(),
                    velocity: Vector2::new(1.0, 0.0),
                },
            },
            CurvePiece {
                start: 1.0,
                shape: PieceShape::Line {
                    origin: Vector2::new(1.0, 0.0),
                    velocity: Vector2::new(0.0, 1.0),
                },
            },
        ]);
        assert!(good.validate().is_ok());
        assert_eq!(good.eval(1.5), Vector2::new(1.0, 0.5));
    }

    #[test]
    fn zero_disagreement_gives_zero_rate() {
        let topo = Topology::path_graph(2).unwrap();
        let p = vec![
            pred(Vector2::new(1.0, 2.0), Matrix2::zeros()),
            pred(Vector2::new(1.0, 2.0), Matrix2::zeros()),
            pred(Vector2::new(1.0, 2.0), Matrix2::zeros()),
        ];
        // Even a singular Jacobian is fine at the consensus point.
        let rate = nominal_input_rate(1, &p, &SpeedupConfig::new(10.0), &topo).unwrap();
        assert_eq!(rate, Vector2::zeros());
    }

    #[test]
    fn identity_jacobian_single_neighbor() {
        let topo = Topology::path_graph(1).unwrap();
        let p = vec![
            pred(Vector2::new(0.0, 0.0), Matrix2::zeros()),
            pred(Vector2::new(0.1, 0.0), Matrix2::identity()),
        ];
        let rate = nominal_input_rate(1, &p, &SpeedupConfig::new(10.0), &topo).unwrap();
        assert_relative_eq!(rate.x, -1.0, epsilon = 1e-15);
        assert_relative_eq!(rate.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rate_is_linear_in_speedup() {
        let topo = Topology::path_graph(1).unwrap();
        let jac = Matrix2::new(0.5, 0.1, -0.2, 0.8);
        let p = vec![
            pred(Vector2::new(0.0, 0.0), Matrix2::zeros()),
            pred(Vector2::new(0.3, -0.4), jac),
        ];
        let r1 = nominal_input_rate(1, &p, &SpeedupConfig::new(5.0), &topo).unwrap();
        let r2 = nominal_input_rate(1, &p, &SpeedupConfig::new(10.0), &topo).unwrap();
        assert_relative_eq!(r2.x, 2.0 * r1.x, epsilon = 1e-12);
        assert_relative_eq!(r2.y, 2.0 * r1.y, epsilon = 1e-12);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let topo = Topology::path_graph(1).unwrap();
        let jac = Matrix2::new(1.0, 2.0, 0.5, 1.0); // det = 0
        let p = vec![
            pred(Vector2::new(0.0, 0.0), Matrix2::zeros()),
            pred(Vector2::new(1.0, 0.0), jac),
        ];
        let err = nominal_input_rate(1, &p, &SpeedupConfig::new(1.0), &topo).unwrap_err();
        assert!(matches!(
            err,
            ConsensusError::SingularJacobian { follower: 1, .. }
        ));
    }

    #[test]
    fn stacked_rates_match_laplacian_action() {
        // With identity Jacobians the flow reduces to the follower rows of
        // -diag(α)·(L ⊗ I₂) acting on the stacked predictions.
        let k = 4;
        let topo = Topology::path_graph(k).unwrap();
        let lap = topo.laplacian();
        let alphas = [3.0, 10.0, 7.0, 1.0];
        let preds: Vec<Prediction> = (0..=k)
            .map(|i| {
                let s = i as f64 * 1.3 + 0.4;
                pred(
                    Vector2::new(s.sin() * 20.0, s.cos() * 30.0),
                    Matrix2::identity(),
                )
            })
            .collect();
        for i in 1..=k {
            let rate =
                nominal_input_rate(i, &preds, &SpeedupConfig::new(alphas[i - 1]), &topo).unwrap();
            let mut lap_row = Vector2::zeros();
            for j in 0..=k {
                lap_row += lap.matrix()[(i, j)] * preds[j].value;
            }
            let expected = -alphas[i - 1] * lap_row;
            assert!((rate - expected).norm() <= 1e-12, "follower {i}");
        }
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_value(&[Vector2::new(1.0, 1.0); 4]), 0.0);
        let v = lyapunov_value(&[
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 0.0),
        ]);
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn rate_equivariant_under_disagreement_scaling(
            scale in 0.1..10.0f64,
            gx in -5.0..5.0f64,
            gy in -5.0..5.0f64,
        ) {
            let topo = Topology::path_graph(1).unwrap();
            let jac = Matrix2::new(0.7, 0.2, -0.1, 0.9);
            let base = vec![
                pred(Vector2::zeros(), Matrix2::zeros()),
                pred(Vector2::new(gx, gy), jac),
            ];
            let scaled = vec![
                pred(Vector2::zeros(), Matrix2::zeros()),
                pred(Vector2::new(gx * scale, gy * scale), jac),
            ];
            let cfg = SpeedupConfig::new(4.0);
            let r0 = nominal_input_rate(1, &base, &cfg, &topo).unwrap();
            let r1 = nominal_input_rate(1, &scaled, &cfg, &topo).unwrap();
            prop_assert!((r1 - scale * r0).norm() <= 1e-9 * (1.0 + r0.norm()));
        }

        #[test]
        fn lyapunov_nonnegative_and_translation_invariant(
            n in 2usize..7,
            dx in -100.0..100.0f64,
            dy in -100.0..100.0f64,
            seed in 0u64..500,
        ) {
            let vals: Vec<Vector2<f64>> = (0..n)
                .map(|i| {
                    let s = seed as f64 * 0.11 + i as f64;
                    Vector2::new((s * 1.7).sin() * 15.0, (s * 0.9).cos() * 10.0)
                })
                .collect();
            let v = lyapunov_value(&vals);
            prop_assert!(v >= 0.0);
            let shifted: Vec<Vector2<f64>> =
                vals.iter().map(|p| p + Vector2::new(dx, dy)).collect();
            let vs = lyapunov_value(&shifted);
            prop_assert!((v - vs).abs() <= 1e-9 * (1.0 + v));
        }

        #[test]
        fn lyapunov_zero_iff_chain_adjacent_equal(seed in 0u64..100) {
            let a = Vector2::new(seed as f64, -(seed as f64));
            let equal = vec![a, a, a];
            prop_assert_eq!(lyapunov_value(&equal), 0.0);
            let bumped = vec![a, a + Vector2::new(1e-3, 0.0), a];
            prop_assert!(lyapunov_value(&bumped) > 0.0);
        }
    }
}
