//! Frozen configurations of the two reference experiments.

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 2] = ["paper-crs", "paper-brs"];

/// Adjacency read off the published Laplacian: agent 3 observes agent 1 only.
pub const PAPER_ADJACENCY: [[u8; 5]; 5] = [
    [0, 1, 0, 0, 1],
    [1, 0, 0, 1, 0],
    [1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0],
];

const PAPER_CRS: &str = r#"{
  "name": "paper-crs",
  "topology": {
    "adjacency": [[0,1,0,0,1],[1,0,0,1,0],[1,0,0,0,0],[0,0,1,0,0],[0,0,0,0,0]]
  },
  "initial_state": [-30, -10, 20, 10, 15],
  "noise": {"family": "gaussian", "variance": 10, "thresholds": 0},
  "estimator": {"W": 50, "beta": 150, "initial_estimates": {"per_agent": [-4, -5, 2, 0, 5]}},
  "control": {"controller": "crs"},
  "reference": {"type": "summable"},
  "run": {"horizon": 100000, "replicas": 100, "seed": 20240601, "log": {"per_decade": 20}, "trajectory_replicas": 1},
  "analysis": {"kappa": 1, "c1": 3.8}
}"#;

// The leader is 10·sin(0.02k) exactly, so its first state is 10·sin(0.02).
const PAPER_BRS: &str = r#"{
  "name": "paper-brs",
  "topology": {
    "adjacency": [[0,1,0,0,1],[1,0,0,1,0],[1,0,0,0,0],[0,0,1,0,0],[0,0,0,0,0]]
  },
  "initial_state": [-30, -10, 20, 10, 0.1999866669333308],
  "noise": {"family": "gaussian", "variance": 10, "thresholds": 0},
  "estimator": {"W": 50, "beta": 3, "initial_estimates": {"per_agent": [-4, -5, 2, 0, 5]}},
  "control": {"controller": "brs", "N": 40},
  "reference": {"type": "sinusoid", "amplitude": 10, "omega": 0.02},
  "run": {"horizon": 100000, "replicas": 20, "seed": 20240602, "log": {"per_decade": 20}, "trajectory_replicas": 1},
  "analysis": {"kappa": 1, "c1": 3.8}
}"#;

pub fn preset_json(name: &str) -> Result<&'static str> {
    match name {
        "paper-crs" => Ok(PAPER_CRS),
        "paper-brs" => Ok(PAPER_BRS),
        other => Err(Error::config(
            "preset",
            format!("unknown preset {other:?}; available: {}", PRESET_NAMES.join(", ")),
        )),
    }
}

pub fn preset(name: &str) -> Result<RunConfig> {
    RunConfig::from_json(preset_json(name)?)
}
