//! Integral control barrier function safety filter.
//!
//! The barrier keeps the squared distance to a neighbor above the squared
//! speed-proportional headway. The filter bias enters the input *rate*,
//! not the input, so the bias never appears in the first barrier
//! derivative and the order-2 chain h² = ḣ¹ + κ(h¹) is required; that
//! chain is worked out analytically for the bicycle barrier below and
//! cross-checked against finite differences in the tests.
//!
//! Neighbors are treated as frozen over a step: their velocities enter
//! logging only, never the barrier derivative. A moving neighbor at equal
//! velocity would otherwise cancel the headway term entirely.

use crate::model::{BicycleInput, BicycleParams, BicycleState};
use nalgebra::{Vector2, Vector4};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafetyError {
    /// The constraint normal vanished (stationary vehicle) while the
    /// constraint itself is violated: no bias can help.
    #[error(
        "follower {ego} cannot filter against neighbor {neighbor}: \
         constraint active while speed ≈ {speed:.3e} makes the bias ineffective"
    )]
    UnfilterableConstraint {
        ego: usize,
        neighbor: usize,
        speed: f64,
    },
    /// No bias satisfies every constraint (contradictory half-spaces).
    #[error("safety QP infeasible: contradictory constraints")]
    Infeasible,
}

/// Headway factor, QP weights, and the class-K slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConfig {
    /// Time headway (s): minimum distance is k_v·V.
    pub k_v: f64,
    /// Weight on the acceleration bias.
    pub q1: f64,
    /// Weight on the steering bias. Chosen much larger than `q1` because
    /// the path is far more sensitive to the steering channel.
    pub q2: f64,
    /// Slope of the (linear) class-K function κ(h) = cbf_gain·h.
    pub cbf_gain: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            k_v: 2.0,
            q1: 1.0,
            q2: 999.0,
            cbf_gain: 1.0,
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_v >= 2.0) {
            return Err(format!("k_v must be ≥ 2 s, got {}", self.k_v));
        }
        if !(self.q1 > 0.0 && self.q2 > 0.0) {
            return Err(format!(
                "QP weights must be positive, got ({}, {})",
                self.q1, self.q2
            ));
        }
        if !(self.cbf_gain > 0.0) {
            return Err(format!("cbf_gain must be positive, got {}", self.cbf_gain));
        }
        Ok(())
    }
}

/// Neighbor state as sampled at the step barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSnapshot {
    pub position: Vector2<f64>,
    /// Logged for diagnostics only; the barrier treats the neighbor as
    /// static.
    pub velocity: Vector2<f64>,
}

/// Barrier values and gradients for one ego-neighbor pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEvaluation {
    /// h¹ = -k_v²V² + ‖Δp‖² (m²): positive inside the safe set.
    pub h1: f64,
    /// Time derivative of h¹ along the ego dynamics, neighbor frozen.
    pub h1_dot: f64,
    /// Order-2 barrier h² = ḣ¹ + cbf_gain·h¹.
    pub h2: f64,
    /// ∂h²/∂x over (east, north, speed, heading).
    pub grad_x_h2: Vector4<f64>,
    /// ∂h²/∂u over (accel, slip_angle).
    pub grad_u_h2: Vector2<f64>,
}

/// Evaluates the headway barrier and its order-2 chain for one pair.
pub fn barrier_eval(
    state: &BicycleState,
    input: &BicycleInput,
    neighbor: &NeighborSnapshot,
    cfg: &SafetyConfig,
) -> BarrierEvaluation {
    let k_sq = cfg.k_v * cfg.k_v;
    let c = cfg.cbf_gain;
    let v = state.speed;
    let a = input.accel;
    let dx = state.east - neighbor.position.x;
    let dy = state.north - neighbor.position.y;
    let course = state.heading + input.slip_angle;
    let (sin_c, cos_c) = course.sin_cos();

    let h1 = -k_sq * v * v + dx * dx + dy * dy;
    let h1_dot = -2.0 * k_sq * v * a + 2.0 * dx * v * cos_c + 2.0 * dy * v * sin_c;
    let h2 = h1_dot + c * h1;

    // ∂h²/∂ψ and ∂h²/∂γ coincide: the course angle enters only as ψ+γ.
    let angle_grad = -2.0 * dx * v * sin_c + 2.0 * dy * v * cos_c;
    let grad_x_h2 = Vector4::new(
        2.0 * v * cos_c + 2.0 * c * dx,
        2.0 * v * sin_c + 2.0 * c * dy,
        -2.0 * k_sq * a + 2.0 * dx * cos_c + 2.0 * dy * sin_c - 2.0 * c * k_sq * v,
        angle_grad,
    );
    let grad_u_h2 = Vector2::new(-2.0 * k_sq * v, angle_grad);

    BarrierEvaluation {
        h1,
        h1_dot,
        h2,
        grad_x_h2,
        grad_u_h2,
    }
}

/// Half-space requirement `normalᵀ·w ≥ offset` on the bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspaceConstraint {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

/// Norm below which a constraint normal counts as vanished.
const DEGENERATE_NORMAL: f64 = 1e-12;

/// Builds the bias constraint enforcing ḣ² + κ(h²) ≥ 0 for one pair:
///
///   (∂h²/∂u)ᵀ·w ≥ -(∂h²/∂x)ᵀ·f(x,u) - (∂h²/∂u)ᵀ·Φ - κ(h²)
///
/// with Φ the nominal (unfiltered) input rate.
pub fn assemble_constraint(
    ego: usize,
    neighbor_idx: usize,
    state: &BicycleState,
    input: &BicycleInput,
    params: &BicycleParams,
    nominal_rate: &Vector2<f64>,
    neighbor: &NeighborSnapshot,
    cfg: &SafetyConfig,
) -> Result<HalfspaceConstraint, SafetyError> {
    let eval = barrier_eval(state, input, neighbor, cfg);
    let flow = params.derivative(state, input);
    let offset =
        -eval.grad_x_h2.dot(&flow) - eval.grad_u_h2.dot(nominal_rate) - cfg.cbf_gain * eval.h2;
    if eval.grad_u_h2.norm() < DEGENERATE_NORMAL && offset > 0.0 {
        return Err(SafetyError::UnfilterableConstraint {
            ego,
            neighbor: neighbor_idx,
            speed: state.speed,
        });
    }
    Ok(HalfspaceConstraint {
        normal: eval.grad_u_h2,
        offset,
    })
}

/// Slack tolerance when testing candidate feasibility, relative to the
/// offset magnitude: boundary candidates carry rounding error ~ε·|b|.
const FEAS_TOL: f64 = 1e-9;

/// Exact minimizer of wᵀ·diag(q1,q2)·w subject to every half-space, by
/// active-set enumeration: w = 0 first (returned exactly when feasible,
/// keeping the filter least-invasive), then each constraint alone via the
/// closed-form KKT projection, then both at once via the 2×2 system.
pub fn solve_weighted_qp(
    q1: f64,
    q2: f64,
    constraints: &[HalfspaceConstraint],
) -> Result<Vector2<f64>, SafetyError> {
    debug_assert!(q1 > 0.0 && q2 > 0.0);
    let feasible = |w: &Vector2<f64>| {
        constraints
            .iter()
            .all(|c| c.normal.dot(w) - c.offset >= -FEAS_TOL * c.offset.abs().max(1.0))
    };

    let zero = Vector2::zeros();
    if feasible(&zero) {
        return Ok(zero);
    }

    let objective = |w: &Vector2<f64>| q1 * w.x * w.x + q2 * w.y * w.y;
    let mut best: Option<(f64, Vector2<f64>)> = None;
    let mut consider = |w: Vector2<f64>| {
        if feasible(&w) {
            let obj = objective(&w);
            if best.map_or(true, |(b, _)| obj < b) {
                best = Some((obj, w));
            }
        }
    };

    // Single active constraint: w = Q⁻¹a·b / (aᵀQ⁻¹a).
    for c in constraints {
        if c.normal.norm() < DEGENERATE_NORMAL {
            continue;
        }
        let q_inv_a = Vector2::new(c.normal.x / q1, c.normal.y / q2);
        let denom = c.normal.dot(&q_inv_a);
        consider(q_inv_a * (c.offset / denom));
    }

    // Both active: the vertex of the two half-space boundaries.
    if constraints.len() == 2 {
        let (c1, c2) = (&constraints[0], &constraints[1]);
        let det = c1.normal.x * c2.normal.y - c1.normal.y * c2.normal.x;
        if det.abs() > DEGENERATE_NORMAL * c1.normal.norm().max(1.0) * c2.normal.norm().max(1.0) {
            consider(Vector2::new(
                (c1.offset * c2.normal.y - c2.offset * c1.normal.y) / det,
                (c1.normal.x * c2.offset - c2.normal.x * c1.offset) / det,
            ));
        }
    }

    best.map(|(_, w)| w).ok_or(SafetyError::Infeasible)
}

/// Filtered input rate: the nominal consensus rate plus the QP bias.
pub fn filtered_input_rate(nominal: &Vector2<f64>, bias: &Vector2<f64>) -> Vector2<f64> {
    nominal + bias
}
