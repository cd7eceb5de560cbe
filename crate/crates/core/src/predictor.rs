//! Output prediction over a fixed horizon: integrate the vehicle forward
//! with the input frozen at its current value and read off the position
//! output. The controller consumes both the predicted output and its
//! sensitivity to the input, obtained by central finite differences over
//! the same integration — the predictor stays dynamics-agnostic and never
//! needs an analytic form of the flow map.

use crate::consensus::ReferenceSignal;
use crate::model::{BicycleInput, BicycleParams, BicycleState};
use crate::ode::{self, OdeError};
use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("prediction integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("invalid predictor config: {0}")]
    InvalidConfig(String),
}

/// Prediction horizon and numerical knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    /// Lookahead horizon T (s).
    pub horizon: f64,
    /// Integrator tolerances. Prediction error must sit well below the
    /// consensus-error scale, hence the tight defaults.
    pub rk_rel_tol: f64,
    pub rk_abs_tol: f64,
    /// Step for the central-difference input-Jacobian.
    pub fd_step: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            horizon: 0.3,
            rk_rel_tol: 1e-8,
            rk_abs_tol: 1e-8,
            fd_step: 1e-5,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if !(self.horizon >= 0.0) {
            return Err(PredictorError::InvalidConfig(format!(
                "horizon must be ≥ 0, got {}",
                self.horizon
            )));
        }
        if !(self.rk_rel_tol > 0.0 && self.rk_abs_tol > 0.0) {
            return Err(PredictorError::InvalidConfig(
                "integrator tolerances must be positive".into(),
            ));
        }
        if !(self.fd_step > 0.0) {
            return Err(PredictorError::InvalidConfig(format!(
                "fd_step must be positive, got {}",
                self.fd_step
            )));
        }
        Ok(())
    }
}

/// Predicted output and its input sensitivity at one operating point.
/// Invertibility of the Jacobian is the consumer's business.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: Vector2<f64>,
    pub jacobian_u: Matrix2<f64>,
}

/// Predicted position after the horizon, holding the input constant.
/// A zero horizon returns the current output exactly.
pub fn predict_output(
    state: &BicycleState,
    input: &BicycleInput,
    params: &BicycleParams,
    cfg: &PredictorConfig,
) -> Result<Vector2<f64>, PredictorError> {
    if cfg.horizon == 0.0 {
        return Ok(state.output());
    }
    let frozen = *input;
    let p = *params;
    let terminal = ode::integrate(
        move |y| p.derivative(&BicycleState::from_vector(y), &frozen),
        state.as_vector(),
        cfg.horizon,
        cfg.rk_rel_tol,
        cfg.rk_abs_tol,
    )?;
    Ok(BicycleState::from_vector(&terminal).output())
}

/// Central finite-difference Jacobian ∂(predicted output)/∂(input).
pub fn predict_jacobian_u(
    state: &BicycleState,
    input: &BicycleInput,
    params: &BicycleParams,
    cfg: &PredictorConfig,
) -> Result<Matrix2<f64>, PredictorError> {
    let h = cfg.fd_step;
    let mut jac = Matrix2::zeros();
    for col in 0..2 {
        let mut plus = *input;
        let mut minus = *input;
        match col {
            0 => {
                plus.accel += h;
                minus.accel -= h;
            }
            _ => {
                plus.slip_angle += h;
                minus.slip_angle -= h;
            }
        }
        let g_plus = predict_output(state, &plus, params, cfg)?;
        let g_minus = predict_output(state, &minus, params, cfg)?;
        let col_val = (g_plus - g_minus) / (2.0 * h);
        jac[(0, col)] = col_val.x;
        jac[(1, col)] = col_val.y;
    }
    Ok(jac)
}

/// Value and Jacobian in one call.
pub fn predict(
    state: &BicycleState,
    input: &BicycleInput,
    params: &BicycleParams,
    cfg: &PredictorConfig,
) -> Result<Prediction, PredictorError> {
    Ok(Prediction {
        value: predict_output(state, input, params, cfg)?,
        jacobian_u: predict_jacobian_u(state, input, params, cfg)?,
    })
}

/// The leader's predicted output: the reference is known ahead of time, so
/// this is an exact evaluation at t + T.
pub fn leader_prediction(reference: &ReferenceSignal, t: f64, horizon: f64) -> Vector2<f64> {
    reference.eval(t + horizon)
}
