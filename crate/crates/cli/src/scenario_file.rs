//! Scenario documents: a schema-versioned TOML format mirroring the
//! engine's `Scenario` one-to-one. Unknown keys are rejected so typos
//! surface as parse errors instead of silently ignored settings.
//!
//! Units: meters, seconds, radians, m/s, m/s² throughout.

use nalgebra::Vector2;
use platoon_core::consensus::{CurvePiece, PieceShape, ReferenceSignal, SpeedupConfig};
use platoon_core::graph::Topology;
use platoon_core::model::{BicycleInput, BicycleParams, BicycleState};
use platoon_core::predictor::PredictorConfig;
use platoon_core::safety::SafetyConfig;
use platoon_core::sim::{FollowerConfig, Scenario};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported schema_version {found} (this build reads version {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub simulation: SimulationSection,
    pub topology: TopologySection,
    pub reference: ReferenceSection,
    pub predictor: PredictorSection,
    pub safety: SafetySection,
    pub followers: Vec<FollowerSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Euler step (s).
    pub dt: f64,
    /// Duration (s).
    pub t_end: f64,
    pub safety_enabled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// "path" derives the platoon chain from the follower count;
    /// "custom" takes explicit neighbor lists (leader is agent 0).
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    /// "lissajous_course" | "constant" | "piecewise"
    pub kind: String,
    /// Constant reference point (m), for kind = "constant".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    /// Curve pieces, for kind = "piecewise".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceSection>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PieceSection {
    /// Activation time (s) of this piece; the piece clock restarts here.
    pub start: f64,
    /// "line" | "sinusoid"
    pub shape: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    /// Velocity (m/s), for "line".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
    /// Amplitudes (m), for "sinusoid".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<[f64; 2]>,
    /// Angular frequencies (rad/s), for "sinusoid".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular_freq: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PredictorSection {
    /// Prediction horizon T (s).
    pub horizon: f64,
    pub rk_rel_tol: f64,
    pub rk_abs_tol: f64,
    pub fd_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SafetySection {
    /// Headway factor (s): minimum distance is k_v·V.
    pub k_v: f64,
    /// QP weight on the acceleration bias.
    pub q1: f64,
    /// QP weight on the steering bias.
    pub q2: f64,
    /// Class-K slope.
    pub cbf_gain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FollowerSection {
    /// Front axle to center of gravity (m).
    #[serde(rename = "Lf")]
    pub lf: f64,
    /// Rear axle to center of gravity (m).
    #[serde(rename = "Lr")]
    pub lr: f64,
    /// Acceleration bounds (m/s²).
    pub a_min: f64,
    pub a_max: f64,
    /// Velocity-direction angle bounds (rad).
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Consensus speedup factor.
    pub alpha: f64,
    pub initial_state: StateSection,
    pub initial_input: InputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    /// Position east (m).
    pub z1: f64,
    /// Position north (m).
    pub z2: f64,
    /// Speed (m/s).
    pub v: f64,
    /// Heading (rad).
    pub psi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Acceleration (m/s²).
    pub a: f64,
    /// Velocity-direction angle (rad).
    pub gamma: f64,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ScenarioFileError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        let file: ScenarioFile = toml::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(ScenarioFileError::Version {
                found: file.schema_version,
            });
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioFileError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Builds the engine scenario, validating every section.
    pub fn to_scenario(&self) -> Result<Scenario, ScenarioFileError> {
        let follower_count = self.followers.len();
        let topology = match self.topology.kind.as_str() {
            "path" => Topology::path_graph(follower_count)
                .map_err(|e| ScenarioFileError::Invalid(format!("topology: {e}")))?,
            "custom" => {
                let lists = self.topology.neighbors.clone().ok_or_else(|| {
                    ScenarioFileError::Invalid(
                        "topology.kind = \"custom\" requires topology.neighbors".into(),
                    )
                })?;
                Topology::new(lists)
                    .map_err(|e| ScenarioFileError::Invalid(format!("topology: {e}")))?
            }
            other => {
                return Err(ScenarioFileError::Invalid(format!(
                    "topology.kind must be \"path\" or \"custom\", got \"{other}\""
                )))
            }
        };

        let reference = match self.reference.kind.as_str() {
            "lissajous_course" => ReferenceSignal::LissajousCourse,
            "constant" => {
                let p = self.reference.point.ok_or_else(|| {
                    ScenarioFileError::Invalid(
                        "reference.kind = \"constant\" requires reference.point".into(),
                    )
                })?;
                ReferenceSignal::Constant(Vector2::new(p[0], p[1]))
            }
            "piecewise" => {
                let pieces = self.reference.pieces.as_ref().ok_or_else(|| {
                    ScenarioFileError::Invalid(
                        "reference.kind = \"piecewise\" requires reference.pieces".into(),
                    )
                })?;
                let mut curve = Vec::with_capacity(pieces.len());
                for (i, p) in pieces.iter().enumerate() {
                    let shape = match p.shape.as_str() {
                        "line" => {
                            let origin = p.origin.ok_or_else(|| {
                                ScenarioFileError::Invalid(format!(
                                    "pieces[{i}]: shape \"line\" requires origin"
                                ))
                            })?;
                            let velocity = p.velocity.ok_or_else(|| {
                                ScenarioFileError::Invalid(format!(
                                    "pieces[{i}]: shape \"line\" requires velocity"
                                ))
                            })?;
                            PieceShape::Line {
                                origin: Vector2::new(origin[0], origin[1]),
                                velocity: Vector2::new(velocity[0], velocity[1]),
                            }
                        }
                        "sinusoid" => {
                            let amplitude = p.amplitude.ok_or_else(|| {
                                ScenarioFileError::Invalid(format!(
                                    "pieces[{i}]: shape \"sinusoid\" requires amplitude"
                                ))
                            })?;
                            let angular_freq = p.angular_freq.ok_or_else(|| {
                                ScenarioFileError::Invalid(format!(
                                    "pieces[{i}]: shape \"sinusoid\" requires angular_freq"
                                ))
                            })?;
                            PieceShape::Sinusoid {
                                amplitude: Vector2::new(amplitude[0], amplitude[1]),
                                angular_freq: Vector2::new(angular_freq[0], angular_freq[1]),
                            }
                        }
                        other => {
                            return Err(ScenarioFileError::Invalid(format!(
                                "pieces[{i}]: unknown shape \"{other}\""
                            )))
                        }
                    };
                    curve.push(CurvePiece {
                        start: p.start,
                        shape,
                    });
                }
                ReferenceSignal::Piecewise(curve)
            }
            other => {
                return Err(ScenarioFileError::Invalid(format!(
                    "reference.kind must be \"lissajous_course\", \"constant\" or \
                     \"piecewise\", got \"{other}\""
                )))
            }
        };

        let followers = self
            .followers
            .iter()
            .map(|f| FollowerConfig {
                params: BicycleParams {
                    lf: f.lf,
                    lr: f.lr,
                    accel_min: f.a_min,
                    accel_max: f.a_max,
                    slip_min: f.gamma_min,
                    slip_max: f.gamma_max,
                },
                initial_state: BicycleState::new(
                    f.initial_state.z1,
                    f.initial_state.z2,
                    f.initial_state.v,
                    f.initial_state.psi,
                ),
                initial_input: BicycleInput::new(f.initial_input.a, f.initial_input.gamma),
                speedup: SpeedupConfig::new(f.alpha),
            })
            .collect();

        let scenario = Scenario {
            followers,
            topology,
            reference,
            predictor: PredictorConfig {
                horizon: self.predictor.horizon,
                rk_rel_tol: self.predictor.rk_rel_tol,
                rk_abs_tol: self.predictor.rk_abs_tol,
                fd_step: self.predictor.fd_step,
            },
            safety: SafetyConfig {
                k_v: self.safety.k_v,
                q1: self.safety.q1,
                q2: self.safety.q2,
                cbf_gain: self.safety.cbf_gain,
            },
            safety_enabled: self.simulation.safety_enabled,
            dt: self.simulation.dt,
            t_end: self.simulation.t_end,
        };
        scenario
            .validate()
            .map_err(|e| ScenarioFileError::Invalid(e.to_string()))?;
        Ok(scenario)
    }

    /// Inverse of [`Self::to_scenario`]; parse → serialize → parse is the
    /// identity on documents this produces.
    pub fn from_scenario(sc: &Scenario) -> Self {
        let is_path = {
            let derived = Topology::path_graph(sc.followers.len()).ok();
            derived.as_ref() == Some(&sc.topology)
        };
        let topology = if is_path {
            TopologySection {
                kind: "path".into(),
                neighbors: None,
            }
        } else {
            TopologySection {
                kind: "custom".into(),
                neighbors: Some(sc.topology.neighbor_lists().to_vec()),
            }
        };
        let reference = match &sc.reference {
            ReferenceSignal::LissajousCourse => ReferenceSection {
                kind: "lissajous_course".into(),
                point: None,
                pieces: None,
            },
            ReferenceSignal::Constant(p) => ReferenceSection {
                kind: "constant".into(),
                point: Some([p.x, p.y]),
                pieces: None,
            },
            ReferenceSignal::Piecewise(pieces) => ReferenceSection {
                kind: "piecewise".into(),
                point: None,
                pieces: Some(
                    pieces
                        .iter()
                        .map(|p| match p.shape {
                            PieceShape::Line { origin, velocity } => PieceSection {
                                start: p.start,
                                shape: "line".into(),
                                origin: Some([origin.x, origin.y]),
                                velocity: Some([velocity.x, velocity.y]),
                                amplitude: None,
                                angular_freq: None,
                            },
                            PieceShape::Sinusoid {
                                amplitude,
                                angular_freq,
                            } => PieceSection {
                                start: p.start,
                                shape: "sinusoid".into(),
                                origin: None,
                                velocity: None,
                                amplitude: Some([amplitude.x, amplitude.y]),
                                angular_freq: Some([angular_freq.x, angular_freq.y]),
                            },
                        })
                        .collect(),
                ),
            },
        };
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            simulation: SimulationSection {
                dt: sc.dt,
                t_end: sc.t_end,
                safety_enabled: sc.safety_enabled,
            },
            topology,
            reference,
            predictor: PredictorSection {
                horizon: sc.predictor.horizon,
                rk_rel_tol: sc.predictor.rk_rel_tol,
                rk_abs_tol: sc.predictor.rk_abs_tol,
                fd_step: sc.predictor.fd_step,
            },
            safety: SafetySection {
                k_v: sc.safety.k_v,
                q1: sc.safety.q1,
                q2: sc.safety.q2,
                cbf_gain: sc.safety.cbf_gain,
            },
            followers: sc
                .followers
                .iter()
                .map(|f| FollowerSection {
                    lf: f.params.lf,
                    lr: f.params.lr,
                    a_min: f.params.accel_min,
                    a_max: f.params.accel_max,
                    gamma_min: f.params.slip_min,
                    gamma_max: f.params.slip_max,
                    alpha: f.speedup.alpha,
                    initial_state: StateSection {
                        z1: f.initial_state.east,
                        z2: f.initial_state.north,
                        v: f.initial_state.speed,
                        psi: f.initial_state.heading,
                    },
                    initial_input: InputSection {
                        a: f.initial_input.accel,
                        gamma: f.initial_input.slip_angle,
                    },
                })
                .collect(),
        }
    }
}

/// Scalar overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    /// Sets every follower's speedup factor.
    pub alpha: Option<f64>,
    pub disable_safety: bool,
}

pub fn apply_overrides(scenario: &mut Scenario, ov: &Overrides) {
    if let Some(t_end) = ov.t_end {
        scenario.t_end = t_end;
    }
    if let Some(dt) = ov.dt {
        scenario.dt = dt;
    }
    if let Some(alpha) = ov.alpha {
        for f in &mut scenario.followers {
            f.speedup.alpha = alpha;
        }
    }
    if ov.disable_safety {
        scenario.safety_enabled = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1

[simulation]
dt = 0.01
t_end = 1.0
safety_enabled = true

[topology]
kind = "path"

[reference]
kind = "constant"
point = [0.0, 0.0]

[predictor]
horizon = 0.3
rk_rel_tol = 1e-8
rk_abs_tol = 1e-8
fd_step = 1e-5

[safety]
k_v = 2.0
q1 = 1.0
q2 = 999.0
cbf_gain = 1.0

[[followers]]
Lf = 1.105
Lr = 1.738
a_min = -2.0
a_max = 2.0
gamma_min = -0.5235987755982988
gamma_max = 0.5235987755982988
alpha = 10.0
initial_state = { z1 = -10.0, z2 = 0.0, v = 3.0, psi = 0.0 }
initial_input = { a = 0.0, gamma = 0.0 }
"#;

    #[test]
    fn minimal_document_parses_and_validates() {
        let file = ScenarioFile::parse(MINIMAL).unwrap();
        let sc = file.to_scenario().unwrap();
        assert_eq!(sc.followers.len(), 1);
        assert_eq!(sc.topology.agent_count(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let doc = MINIMAL.replace("[safety]", "[safety]\nbogus_knob = 3.0");
        let err = ScenarioFile::parse(&doc).unwrap_err();
        assert!(err.to_string().contains("bogus_knob"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let doc = MINIMAL.replace("Lr = 1.738\n", "");
        let err = ScenarioFile::parse(&doc).unwrap_err();
        assert!(err.to_string().contains("Lr"), "{err}");
    }

    #[test]
    fn schema_version_is_checked() {
        let doc = MINIMAL.replace("schema_version = 1", "schema_version = 9");
        assert!(matches!(
            ScenarioFile::parse(&doc).unwrap_err(),
            ScenarioFileError::Version { found: 9 }
        ));
    }

    #[test]
    fn parse_serialize_parse_is_identity() {
        let file = ScenarioFile::parse(MINIMAL).unwrap();
        let text = file.to_toml().unwrap();
        let reparsed = ScenarioFile::parse(&text).unwrap();
        assert_eq!(file, reparsed);
        // And the derived engine scenarios coincide exactly.
        assert_eq!(file.to_scenario().unwrap(), reparsed.to_scenario().unwrap());
    }

    #[test]
    fn scenario_round_trips_through_document() {
        let sc = ScenarioFile::parse(MINIMAL).unwrap().to_scenario().unwrap();
        let doc = ScenarioFile::from_scenario(&sc);
        let back = doc.to_scenario().unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn overrides_apply() {
        let mut sc = ScenarioFile::parse(MINIMAL).unwrap().to_scenario().unwrap();
        apply_overrides(
            &mut sc,
            &Overrides {
                t_end: Some(2.0),
                dt: Some(0.02),
                alpha: Some(7.0),
                disable_safety: true,
            },
        );
        assert_eq!(sc.t_end, 2.0);
        assert_eq!(sc.dt, 0.02);
        assert!(!sc.safety_enabled);
        assert!(sc.followers.iter().all(|f| f.speedup.alpha == 7.0));
    }
}
