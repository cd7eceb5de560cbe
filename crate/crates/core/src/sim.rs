//! Deterministic forward-Euler closed-loop simulation of the platoon:
//! prediction, consensus rates, safety filtering, and input/state updates
//! over a synchronized per-step snapshot.
//!
//! Every per-follower computation inside a step reads only the time-t
//! snapshot, so within-step parallelism cannot change results; the engine
//! produces bitwise-identical logs with parallelism on or off.

use crate::consensus::{self, ConsensusError, ReferenceSignal, SpeedupConfig};
use crate::graph::Topology;
use crate::model::{BicycleInput, BicycleParams, BicycleState};
use crate::predictor::{self, Prediction, PredictorConfig, PredictorError};
use crate::safety::{self, NeighborSnapshot, SafetyConfig, SafetyError};
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario: {0}")]
pub struct ScenarioError(pub String);

/// Everything one follower brings to the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerConfig {
    pub params: BicycleParams,
    pub initial_state: BicycleState,
    pub initial_input: BicycleInput,
    pub speedup: SpeedupConfig,
}

/// Complete experiment description. Identical scenarios produce
/// byte-identical trajectory logs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub followers: Vec<FollowerConfig>,
    pub topology: Topology,
    pub reference: ReferenceSignal,
    pub predictor: PredictorConfig,
    pub safety: SafetyConfig,
    pub safety_enabled: bool,
    /// Euler step (s).
    pub dt: f64,
    /// Duration (s).
    pub t_end: f64,
}

impl Scenario {
    pub fn follower_count(&self) -> usize {
        self.followers.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.dt > 0.0) {
            return Err(ScenarioError(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(ScenarioError(format!(
                "t_end ({}) must be at least one step ({})",
                self.t_end, self.dt
            )));
        }
        if self.followers.is_empty() {
            return Err(ScenarioError("at least one follower required".into()));
        }
        if self.followers.len() + 1 != self.topology.agent_count() {
            return Err(ScenarioError(format!(
                "{} followers but topology has {} agents (leader + followers)",
                self.followers.len(),
                self.topology.agent_count()
            )));
        }
        for (idx, f) in self.followers.iter().enumerate() {
            f.params
                .validate()
                .map_err(|e| ScenarioError(format!("follower {}: {e}", idx + 1)))?;
            if !f.initial_state.is_finite() || !f.initial_input.is_finite() {
                return Err(ScenarioError(format!(
                    "follower {}: non-finite initial condition",
                    idx + 1
                )));
            }
            f.speedup
                .validate()
                .map_err(|e| ScenarioError(format!("follower {}: {e}", idx + 1)))?;
        }
        self.predictor
            .validate()
            .map_err(|e| ScenarioError(e.to_string()))?;
        self.safety.validate().map_err(ScenarioError)?;
        self.reference
            .validate()
            .map_err(|e| ScenarioError(e.to_string()))?;
        Ok(())
    }

    /// Stable hash of the full configuration, independent of platform.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let f64s = |h: &mut Sha256, xs: &[f64]| {
            for x in xs {
                h.update(x.to_bits().to_le_bytes());
            }
        };
        h.update(b"scenario-v1");
        h.update((self.followers.len() as u64).to_le_bytes());
        for f in &self.followers {
            f64s(
                &mut h,
                &[
                    f.params.lf,
                    f.params.lr,
                    f.params.accel_min,
                    f.params.accel_max,
                    f.params.slip_min,
                    f.params.slip_max,
                    f.initial_state.east,
                    f.initial_state.north,
                    f.initial_state.speed,
                    f.initial_state.heading,
                    f.initial_input.accel,
                    f.initial_input.slip_angle,
                    f.speedup.alpha,
                ],
            );
        }
        for list in self.topology.neighbor_lists() {
            h.update((list.len() as u64).to_le_bytes());
            for &j in list {
                h.update((j as u64).to_le_bytes());
            }
        }
        match &self.reference {
            ReferenceSignal::LissajousCourse => h.update([0u8]),
            ReferenceSignal::Constant(p) => {
                h.update([1u8]);
                f64s(&mut h, &[p.x, p.y]);
            }
            ReferenceSignal::Piecewise(pieces) => {
                h.update([2u8]);
                h.update((pieces.len() as u64).to_le_bytes());
                for p in pieces {
                    match p.shape {
                        consensus::PieceShape::Line { origin, velocity } => {
                            h.update([0u8]);
                            f64s(
                                &mut h,
                                &[p.start, origin.x, origin.y, velocity.x, velocity.y],
                            );
                        }
                        consensus::PieceShape::Sinusoid {
                            amplitude,
                            angular_freq,
                        } => {
                            h.update([1u8]);
                            f64s(
                                &mut h,
                                &[
                                    p.start,
                                    amplitude.x,
                                    amplitude.y,
                                    angular_freq.x,
                                    angular_freq.y,
                                ],
                            );
                        }
                    }
                }
            }
        }
        f64s(
            &mut h,
            &[
                self.predictor.horizon,
                self.predictor.rk_rel_tol,
                self.predictor.rk_abs_tol,
                self.predictor.fd_step,
                self.safety.k_v,
                self.safety.q1,
                self.safety.q2,
                self.safety.cbf_gain,
                self.dt,
                self.t_end,
            ],
        );
        h.update([self.safety_enabled as u8]);
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Barrier value for one ordered filter pair (agent indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBarrier {
    pub ego: usize,
    pub neighbor: usize,
    pub h1: f64,
}

/// Snapshot of everything computed at one step, taken before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub states: Vec<BicycleState>,
    pub inputs: Vec<BicycleInput>,
    /// Predicted outputs at t+T, leader first (length K+1).
    pub predicted_outputs: Vec<Vector2<f64>>,
    pub nominal_rates: Vec<Vector2<f64>>,
    pub biases: Vec<Vector2<f64>>,
    pub pair_barriers: Vec<PairBarrier>,
    /// Distance between adjacent followers (i, i+1), length K-1.
    pub pair_distances: Vec<f64>,
    /// Binding headway requirement per adjacent pair: k_v·max(V_i, V_{i+1}).
    pub pair_min_safe: Vec<f64>,
    /// Reference-to-follower-1 distance. Logged only; the leader is
    /// virtual and never constrained against.
    pub leader_distance: f64,
    pub local_errors: Vec<f64>,
    pub lyapunov: f64,
    /// ‖ŷ_i(t+T) - y_i(t+T)‖, backfilled after the run; None within T of
    /// the end.
    pub prediction_gaps: Vec<Option<f64>>,
    pub clamp_active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminationStatus {
    Completed,
    SingularJacobian {
        step: usize,
        follower: usize,
    },
    QpInfeasible {
        step: usize,
        follower: usize,
    },
    UnfilterableConstraint {
        step: usize,
        follower: usize,
        neighbor: usize,
    },
    IntegratorFailure {
        step: usize,
        follower: usize,
    },
}

impl TerminationStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TerminationStatus::Completed)
    }
}

impl std::fmt::Display for TerminationStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminationStatus::Completed => write!(f, "completed"),
            TerminationStatus::SingularJacobian { step, follower } => {
                write!(f, "singular-jacobian at step {step} (follower {follower})")
            }
            TerminationStatus::QpInfeasible { step, follower } => {
                write!(f, "qp-infeasible at step {step} (follower {follower})")
            }
            TerminationStatus::UnfilterableConstraint {
                step,
                follower,
                neighbor,
            } => write!(
                f,
                "unfilterable-constraint at step {step} (follower {follower} vs {neighbor})"
            ),
            TerminationStatus::IntegratorFailure { step, follower } => {
                write!(f, "integrator-failure at step {step} (follower {follower})")
            }
        }
    }
}

/// Full run output: per-step records up to completion or abort.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub fingerprint: String,
    pub records: Vec<StepRecord>,
    pub status: TerminationStatus,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Evaluate follower predictions in parallel. Output is identical
    /// either way.
    pub parallel: bool,
}

/// Why a step aborted; converted into the log's termination status.
#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    SingularJacobian {
        follower: usize,
    },
    QpInfeasible {
        follower: usize,
    },
    Unfilterable {
        follower: usize,
        neighbor: usize,
    },
    Integrator {
        follower: usize,
        source: PredictorError,
    },
}

impl StepError {
    fn into_status(self, step: usize) -> TerminationStatus {
        match self {
            StepError::SingularJacobian { follower } => {
                TerminationStatus::SingularJacobian { step, follower }
            }
            StepError::QpInfeasible { follower } => {
                TerminationStatus::QpInfeasible { step, follower }
            }
            StepError::Unfilterable { follower, neighbor } => {
                TerminationStatus::UnfilterableConstraint {
                    step,
                    follower,
                    neighbor,
                }
            }
            StepError::Integrator { follower, .. } => {
                TerminationStatus::IntegratorFailure { step, follower }
            }
        }
    }
}

/// Agents the safety filter guards follower `agent` against: predecessor
/// and successor among the followers. Follower 1 skips the virtual leader
/// and only watches its successor.
fn filter_neighbors(agent: usize, follower_count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2);
    if agent >= 2 {
        out.push(agent - 1);
    }
    if agent + 1 <= follower_count {
        out.push(agent + 1);
    }
    out
}

/// One synchronized Euler step from the (states, inputs) snapshot at time
/// `t`. Rates, biases, and the record all come from the snapshot; the
/// state update uses the pre-update inputs.
pub fn step(
    states: &[BicycleState],
    inputs: &[BicycleInput],
    t: f64,
    scenario: &Scenario,
    opts: &RunOptions,
) -> Result<(Vec<BicycleState>, Vec<BicycleInput>, StepRecord), StepError> {
    let k = scenario.follower_count();
    let horizon = scenario.predictor.horizon;

    // 1. Follower predictions and Jacobians from the snapshot.
    let results: Vec<Result<Prediction, PredictorError>> = if opts.parallel {
        (0..k)
            .into_par_iter()
            .map(|i| {
                predictor::predict(
                    &states[i],
                    &inputs[i],
                    &scenario.followers[i].params,
                    &scenario.predictor,
                )
            })
            .collect()
    } else {
        (0..k)
            .map(|i| {
                predictor::predict(
                    &states[i],
                    &inputs[i],
                    &scenario.followers[i].params,
                    &scenario.predictor,
                )
            })
            .collect()
    };
    let mut predictions = Vec::with_capacity(k + 1);
    // 2. The leader's prediction is the reference evaluated at t+T.
    predictions.push(Prediction {
        value: predictor::leader_prediction(&scenario.reference, t, horizon),
        jacobian_u: Matrix2::zeros(),
    });
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => predictions.push(p),
            Err(source) => {
                return Err(StepError::Integrator {
                    follower: i + 1,
                    source,
                });
            }
        }
    }

    // 3. Nominal consensus rates.
    let mut nominal_rates = Vec::with_capacity(k);
    for agent in 1..=k {
        let rate = consensus::nominal_input_rate(
            agent,
            &predictions,
            &scenario.followers[agent - 1].speedup,
            &scenario.topology,
        )
        .map_err(|e| match e {
            ConsensusError::SingularJacobian { follower, .. } => {
                StepError::SingularJacobian { follower }
            }
            other => {
                // Only singularity can occur here; anything else is a bug.
                unreachable!("unexpected consensus error: {other}")
            }
        })?;
        nominal_rates.push(rate);
    }

    // 4. Safety constraints and QP biases from the same snapshot.
    let snapshot_of = |agent: usize| {
        let s = &states[agent - 1];
        let course = s.heading + inputs[agent - 1].slip_angle;
        NeighborSnapshot {
            position: s.output(),
            velocity: Vector2::new(s.speed * course.cos(), s.speed * course.sin()),
        }
    };
    let mut pair_barriers = Vec::new();
    let mut biases = vec![Vector2::zeros(); k];
    for agent in 1..=k {
        let neighbors = filter_neighbors(agent, k);
        for &j in &neighbors {
            let eval = safety::barrier_eval(
                &states[agent - 1],
                &inputs[agent - 1],
                &snapshot_of(j),
                &scenario.safety,
            );
            pair_barriers.push(PairBarrier {
                ego: agent,
                neighbor: j,
                h1: eval.h1,
            });
        }
        if !scenario.safety_enabled || neighbors.is_empty() {
            continue;
        }
        let mut constraints = Vec::with_capacity(neighbors.len());
        for &j in &neighbors {
            let c = safety::assemble_constraint(
                agent,
                j,
                &states[agent - 1],
                &inputs[agent - 1],
                &scenario.followers[agent - 1].params,
                &nominal_rates[agent - 1],
                &snapshot_of(j),
                &scenario.safety,
            )
            .map_err(|e| match e {
                SafetyError::UnfilterableConstraint { ego, neighbor, .. } => {
                    StepError::Unfilterable {
                        follower: ego,
                        neighbor,
                    }
                }
                SafetyError::Infeasible => StepError::QpInfeasible { follower: agent },
            })?;
            constraints.push(c);
        }
        biases[agent - 1] =
            safety::solve_weighted_qp(scenario.safety.q1, scenario.safety.q2, &constraints)
                .map_err(|_| StepError::QpInfeasible { follower: agent })?;
    }

    // 5. Integrate the input rate, then saturate.
    let dt = scenario.dt;
    let mut next_inputs = Vec::with_capacity(k);
    let mut clamp_active = Vec::with_capacity(k);
    for i in 0..k {
        let rate = safety::filtered_input_rate(&nominal_rates[i], &biases[i]);
        let raw = BicycleInput {
            accel: inputs[i].accel + dt * rate.x,
            slip_angle: inputs[i].slip_angle + dt * rate.y,
        };
        let clamped = scenario.followers[i].params.clamp_input(raw);
        clamp_active.push(clamped != raw);
        next_inputs.push(clamped);
    }

    // 6. Advance the states with the pre-update inputs.
    let mut next_states = Vec::with_capacity(k);
    for i in 0..k {
        let d = scenario.followers[i]
            .params
            .derivative(&states[i], &inputs[i]);
        next_states.push(BicycleState {
            east: states[i].east + dt * d[0],
            north: states[i].north + dt * d[1],
            speed: states[i].speed + dt * d[2],
            heading: states[i].heading + dt * d[3],
        });
    }

    // 7. Record the snapshot and everything derived from it.
    let values: Vec<Vector2<f64>> = predictions.iter().map(|p| p.value).collect();
    let pair_distances: Vec<f64> = (0..k.saturating_sub(1))
        .map(|i| (states[i].output() - states[i + 1].output()).norm())
        .collect();
    let pair_min_safe: Vec<f64> = (0..k.saturating_sub(1))
        .map(|i| scenario.safety.k_v * states[i].speed.abs().max(states[i + 1].speed.abs()))
        .collect();
    let record = StepRecord {
        t,
        states: states.to_vec(),
        inputs: inputs.to_vec(),
        predicted_outputs: values.clone(),
        nominal_rates,
        biases,
        pair_barriers,
        pair_distances,
        pair_min_safe,
        leader_distance: (scenario.reference.eval(t) - states[0].output()).norm(),
        local_errors: scenario.topology.local_consensus_errors(&values),
        lyapunov: consensus::lyapunov_value(&values),
        prediction_gaps: vec![None; k],
        clamp_active,
    };
    Ok((next_states, next_inputs, record))
}

/// Runs a scenario to completion or first controller error.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog, ScenarioError> {
    run_with_options(scenario, &RunOptions::default())
}

pub fn run_with_options(
    scenario: &Scenario,
    opts: &RunOptions,
) -> Result<TrajectoryLog, ScenarioError> {
    scenario.validate()?;
    let n_steps = ((scenario.t_end / scenario.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut states: Vec<BicycleState> =
        scenario.followers.iter().map(|f| f.initial_state).collect();
    let mut inputs: Vec<BicycleInput> =
        scenario.followers.iter().map(|f| f.initial_input).collect();
    let mut records = Vec::with_capacity(n_steps);
    let mut status = TerminationStatus::Completed;

    for step_idx in 0..n_steps {
        let t = step_idx as f64 * scenario.dt;
        match step(&states, &inputs, t, scenario, opts) {
            Ok((next_states, next_inputs, record)) => {
                records.push(record);
                states = next_states;
                inputs = next_inputs;
            }
            Err(e) => {
                status = e.into_status(step_idx);
                break;
            }
        }
    }

    backfill_prediction_gaps(&mut records, scenario);
    Ok(TrajectoryLog {
        fingerprint: scenario.fingerprint(),
        records,
        status,
    })
}

/// Fills in ‖ŷ(t+T) - y(t+T)‖ by pairing each record with the record
/// nearest t+T. Records whose horizon extends past the log stay None.
fn backfill_prediction_gaps(records: &mut [StepRecord], scenario: &Scenario) {
    let offset = (scenario.predictor.horizon / scenario.dt).round() as usize;
    let n = records.len();
    let k = scenario.follower_count();
    for idx in 0..n {
        let target = idx + offset;
        if target >= n {
            continue;
        }
        for f in 0..k {
            let predicted = records[idx].predicted_outputs[f + 1];
            let realized = records[target].states[f].output();
            records[idx].prediction_gaps[f] = Some((predicted - realized).norm());
        }
    }
}

/// Bias norms above this count as an active safety filter.
pub const ACTIVATION_THRESHOLD: f64 = 1e-6;

/// Aggregate metrics over a finished log.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub status: TerminationStatus,
    pub steps: usize,
    /// min over time and adjacent follower pairs of (distance - k_v·V).
    pub min_pair_margin: f64,
    pub per_pair_min_margin: Vec<f64>,
    /// Mean local consensus error over the final 10% of steps, averaged
    /// across followers.
    pub steady_state_local_error: f64,
    pub steady_state_local_error_per_follower: Vec<f64>,
    /// Maximal intervals of nonzero bias, per follower.
    pub activations_per_follower: Vec<usize>,
    /// Maximal intervals during which any follower's bias is nonzero.
    pub any_activation_intervals: usize,
    /// Steps where saturation clipped an input while that follower's
    /// filter was active.
    pub clamp_while_constrained_steps: usize,
    pub min_leader_distance: f64,
    pub max_prediction_gap: Option<f64>,
    pub final_lyapunov: f64,
}

/// Computes summary metrics from a non-empty log.
pub fn summarize(log: &TrajectoryLog) -> Summary {
    let n = log.records.len();
    assert!(n > 0, "cannot summarize an empty log");
    let k = log.records[0].states.len();
    let pairs = k.saturating_sub(1);

    let mut per_pair_min_margin = vec![f64::INFINITY; pairs];
    for r in &log.records {
        for p in 0..pairs {
            let margin = r.pair_distances[p] - r.pair_min_safe[p];
            if margin < per_pair_min_margin[p] {
                per_pair_min_margin[p] = margin;
            }
        }
    }
    let min_pair_margin = per_pair_min_margin
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let tail_start = n - (n / 10).max(1);
    let tail = &log.records[tail_start..];
    let mut steady_per_follower = vec![0.0; k];
    for r in tail {
        for f in 0..k {
            steady_per_follower[f] += r.local_errors[f];
        }
    }
    for v in &mut steady_per_follower {
        *v /= tail.len() as f64;
    }
    let steady_state_local_error = steady_per_follower.iter().sum::<f64>() / k as f64;

    let mut activations_per_follower = vec![0usize; k];
    for f in 0..k {
        let mut active = false;
        for r in &log.records {
            let now = r.biases[f].norm() > ACTIVATION_THRESHOLD;
            if now && !active {
                activations_per_follower[f] += 1;
            }
            active = now;
        }
    }
    let mut any_activation_intervals = 0;
    let mut any_active = false;
    for r in &log.records {
        let now = r.biases.iter().any(|b| b.norm() > ACTIVATION_THRESHOLD);
        if now && !any_active {
            any_activation_intervals += 1;
        }
        any_active = now;
    }

    let clamp_while_constrained_steps = log
        .records
        .iter()
        .filter(|r| (0..k).any(|f| r.clamp_active[f] && r.biases[f].norm() > ACTIVATION_THRESHOLD))
        .count();

    let min_leader_distance = log
        .records
        .iter()
        .map(|r| r.leader_distance)
        .fold(f64::INFINITY, f64::min);
    let max_prediction_gap = log
        .records
        .iter()
        .flat_map(|r| r.prediction_gaps.iter().flatten().cloned())
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.max(g)))
        });

    Summary {
        status: log.status.clone(),
        steps: n,
        min_pair_margin,
        per_pair_min_margin,
        steady_state_local_error,
        steady_state_local_error_per_follower: steady_per_follower,
        activations_per_follower,
        any_activation_intervals,
        clamp_while_constrained_steps,
        min_leader_distance,
        max_prediction_gap,
        final_lyapunov: log.records[n - 1].lyapunov,
    }
}
