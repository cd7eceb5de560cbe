//! Safe leader-follower platoon control, simulated.
//!
//! A platoon of heterogeneous kinematic bicycles reaches consensus on
//! predicted outputs through a Newton-Raphson input-rate flow, while an
//! integral control barrier function filter biases each input rate just
//! enough to keep inter-vehicle distances above a speed-proportional
//! headway. The crate provides the vehicle model, communication graph
//! algebra, RK45 output predictor, consensus law, safety filter, and a
//! deterministic forward-Euler simulation engine with per-step metrics.

pub mod consensus;
pub mod graph;
pub mod model;
pub mod ode;
pub mod predictor;
pub mod safety;
pub mod sim;
