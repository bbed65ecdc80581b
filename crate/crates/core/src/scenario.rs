//! Scenario documents: one JSON file describing a navigation run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::CorridorParams;
use crate::dynobs::CbfParams;
use crate::gridmap::{load_map, MapError};
use crate::navsim::{AgentSpec, NavConfig, ScriptedObstacle, SimSetup};
use crate::ocp::{OcpConfig, Pose};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Map {
        path: PathBuf,
        #[source]
        source: MapError,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

fn default_robot_radius() -> f64 {
    CbfParams::default().robot_radius
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    /// Map file, relative to the scenario file.
    pub map: PathBuf,
    pub starts: Vec<Pose>,
    pub goals: Vec<Pose>,
    #[serde(default)]
    pub obstacles: Vec<ScriptedObstacle>,
    #[serde(default)]
    pub corridor_params: CorridorParams,
    #[serde(default)]
    pub ocp_config: OcpConfig,
    #[serde(default)]
    pub nav_config: NavConfig,
    /// Body radius of every agent, meters.
    #[serde(default = "default_robot_radius")]
    pub robot_radius: f64,
    /// Extra clearance the solver keeps from obstacles, meters.
    #[serde(default)]
    pub safety_margin: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        s.validate().map_err(|reason| ScenarioError::Invalid {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.starts.is_empty() {
            return Err("at least one agent is required".into());
        }
        if self.starts.len() != self.goals.len() {
            return Err(format!("{} starts but {} goals", self.starts.len(), self.goals.len()));
        }
        if self.starts.iter().chain(&self.goals).any(|p| !p.is_finite()) {
            return Err("poses must be finite".into());
        }
        if !(self.robot_radius >= 0.0 && self.robot_radius.is_finite()) {
            return Err("robot_radius must be finite and nonnegative".into());
        }
        if !(self.safety_margin >= 0.0 && self.safety_margin.is_finite()) {
            return Err("safety_margin must be finite and nonnegative".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.radius.is_finite()) || !o.position.is_finite() || !o.velocity.is_finite() {
                return Err(format!("obstacle {i}: radius must be positive and all values finite"));
            }
        }
        self.corridor_params.validate().map_err(|e| e.to_string())?;
        self.ocp_config.validate().map_err(|e| e.to_string())?;
        self.nav_config.validate(self.ocp_config.dt).map_err(|e| e.to_string())?;
        Ok(())
    }

    /// Builds the simulation input, loading the map relative to `base_dir`.
    pub fn to_sim(&self, base_dir: &Path) -> Result<SimSetup, ScenarioError> {
        let map_path = base_dir.join(&self.map);
        let text = fs::read_to_string(&map_path).map_err(|source| ScenarioError::Io {
            path: map_path.clone(),
            source,
        })?;
        let grid = load_map(&text).map_err(|source| ScenarioError::Map {
            path: map_path.clone(),
            source,
        })?;
        for (i, s) in self.starts.iter().enumerate() {
            if !grid.is_free(s.position()) {
                return Err(ScenarioError::Invalid {
                    path: map_path,
                    reason: format!("start {i} at ({}, {}) is not in free space", s.x, s.y),
                });
            }
        }
        Ok(SimSetup {
            grid,
            agents: self
                .starts
                .iter()
                .zip(&self.goals)
                .map(|(&start, &goal)| AgentSpec { start, goal })
                .collect(),
            obstacles: self.obstacles.clone(),
            corridor_params: self.corridor_params,
            ocp: self.ocp_config.clone(),
            cbf: CbfParams {
                gamma: self.ocp_config.gamma,
                robot_radius: self.robot_radius,
                margin: self.safety_margin,
            },
            nav: self.nav_config,
        })
    }
}

/// Reads and validates a scenario file and loads its map.
pub fn load_scenario(path: &Path) -> Result<(Scenario, SimSetup), ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let scenario = Scenario::from_json(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let setup = scenario.to_sim(base)?;
    Ok((scenario, setup))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "map": "m.map",
        "starts": [[1.0, 1.0, 0.0]],
        "goals": [[3.0, 1.0, 0.0]],
        "obstacles": [{"position": [2.0, 2.0], "velocity": [0.0, -0.1], "radius": 0.5, "script": [[2.0, 0.0]]}]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = Scenario::from_json(MINIMAL, Path::new("x.json")).unwrap();
        assert_eq!(s.ocp_config, OcpConfig::default());
        assert_eq!(s.robot_radius, 0.3);
        assert_eq!(s.obstacles[0].waypoints.len(), 1);
        let back = Scenario::from_json(&s.to_json(), Path::new("x.json")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn mismatched_agents_are_rejected() {
        let text = MINIMAL.replace(r#""goals": [[3.0, 1.0, 0.0]]"#, r#""goals": []"#);
        assert!(matches!(
            Scenario::from_json(&text, Path::new("x.json")),
            Err(ScenarioError::Invalid { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Scenario::from_json("{\n  \"schema_version\": 1,\n  oops\n}", Path::new("bad.json")).unwrap_err();
        match err {
            ScenarioError::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, Path::new("bad.json"));
            }
            other => panic!("unexpected {other}"),
        }
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(Scenario::from_json(&text, Path::new("x.json")).is_err());
        let text = MINIMAL.replace("\"map\"", "\"mapp\"");
        assert!(matches!(
            Scenario::from_json(&text, Path::new("x.json")),
            Err(ScenarioError::Parse { .. })
        ));
    }
}
