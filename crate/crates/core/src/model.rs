//! Kinematic bicycle model: dynamics, output map, input saturation, and
//! the conversion between the velocity-direction angle and the physical
//! steering angle.

use nalgebra::{Vector2, Vector4};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    /// The requested angle has no physical steering angle in (-π/2, π/2).
    #[error("velocity-direction angle {gamma} rad is outside the steerable range")]
    SteeringOutOfRange { gamma: f64 },
    #[error("invalid bicycle parameters: {0}")]
    InvalidParams(String),
}

/// Planar state of one vehicle: position, speed, heading.
///
/// The heading is deliberately not wrapped into (-π, π]; every consumer
/// feeds it through sin/cos, and wrapping would put kinks into
/// finite-difference Jacobians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleState {
    /// Position east (m).
    pub east: f64,
    /// Position north (m).
    pub north: f64,
    /// Longitudinal speed (m/s). May be negative; the dynamics stay well defined.
    pub speed: f64,
    /// Heading of the vehicle frame (rad, unwrapped).
    pub heading: f64,
}

impl BicycleState {
    pub fn new(east: f64, north: f64, speed: f64, heading: f64) -> Self {
        Self {
            east,
            north,
            speed,
            heading,
        }
    }

    /// Output map: the position the consensus protocol acts on.
    pub fn output(&self) -> Vector2<f64> {
        Vector2::new(self.east, self.north)
    }

    pub fn is_finite(&self) -> bool {
        self.east.is_finite()
            && self.north.is_finite()
            && self.speed.is_finite()
            && self.heading.is_finite()
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.east, self.north, self.speed, self.heading)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            east: v[0],
            north: v[1],
            speed: v[2],
            heading: v[3],
        }
    }
}

/// Control input: acceleration and the angle of the velocity vector
/// relative to the vehicle frame heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleInput {
    /// Longitudinal acceleration (m/s²).
    pub accel: f64,
    /// Velocity direction relative to the frame heading (rad).
    pub slip_angle: f64,
}

impl BicycleInput {
    pub fn new(accel: f64, slip_angle: f64) -> Self {
        Self { accel, slip_angle }
    }

    pub fn zero() -> Self {
        Self {
            accel: 0.0,
            slip_angle: 0.0,
        }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.accel, self.slip_angle)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self {
            accel: v[0],
            slip_angle: v[1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.slip_angle.is_finite()
    }
}

/// Geometry and input bounds of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleParams {
    /// Front axle to center of gravity (m).
    pub lf: f64,
    /// Rear axle to center of gravity (m).
    pub lr: f64,
    /// Acceleration bounds (m/s²).
    pub accel_min: f64,
    pub accel_max: f64,
    /// Velocity-direction angle bounds (rad), strictly inside (-π/2, π/2).
    pub slip_min: f64,
    pub slip_max: f64,
}

impl BicycleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lf > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "lf must be > 0, got {}",
                self.lf
            )));
        }
        if !(self.lr > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "lr must be > 0, got {}",
                self.lr
            )));
        }
        if !(self.accel_min < self.accel_max) {
            return Err(ModelError::InvalidParams(format!(
                "acceleration bounds [{}, {}] are not an interval",
                self.accel_min, self.accel_max
            )));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(-half_pi < self.slip_min && self.slip_min < self.slip_max && self.slip_max < half_pi) {
            return Err(ModelError::InvalidParams(format!(
                "slip-angle bounds [{}, {}] must satisfy -π/2 < min < max < π/2",
                self.slip_min, self.slip_max
            )));
        }
        Ok(())
    }

    /// Time derivative of the state under the kinematic bicycle dynamics,
    /// ordered (east_rate, north_rate, accel, heading_rate):
    ///
    ///   (V·cos(ψ+γ), V·sin(ψ+γ), a, (V/Lr)·sin(γ))
    pub fn derivative(&self, state: &BicycleState, input: &BicycleInput) -> Vector4<f64> {
        let course = state.heading + input.slip_angle;
        Vector4::new(
            state.speed * course.cos(),
            state.speed * course.sin(),
            input.accel,
            state.speed / self.lr * input.slip_angle.sin(),
        )
    }

    /// Projects each input component onto its bound interval.
    pub fn clamp_input(&self, input: BicycleInput) -> BicycleInput {
        BicycleInput {
            accel: input.accel.clamp(self.accel_min, self.accel_max),
            slip_angle: input.slip_angle.clamp(self.slip_min, self.slip_max),
        }
    }

    /// Physical front-steering angle δ_f producing the velocity-direction
    /// angle γ: tan(γ) = Lr/(Lf+Lr)·tan(δ_f).
    pub fn slip_to_steering(&self, gamma: f64) -> Result<f64, ModelError> {
        if !gamma.is_finite() || gamma.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(ModelError::SteeringOutOfRange { gamma });
        }
        // Lr/(Lf+Lr) < 1, so the required |δ_f| exceeds |γ| but atan keeps
        // it below π/2 for every admissible γ.
        Ok(((self.lf + self.lr) / self.lr * gamma.tan()).atan())
    }

    /// Inverse of [`Self::slip_to_steering`].
    pub fn steering_to_slip(&self, delta_f: f64) -> Result<f64, ModelError> {
        if !delta_f.is_finite() || delta_f.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(ModelError::SteeringOutOfRange { gamma: delta_f });
        }
        Ok((self.lr / (self.lf + self.lr) * delta_f.tan()).atan())
    }
}
