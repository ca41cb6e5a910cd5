//! Strict JSON run configuration.
//!
//! Unknown fields are rejected. Validation errors carry a dotted field path.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{NoiseModel, SensorBank};
use crate::control::{GainPolicy, ReferenceGenerator};
use crate::engine::{Experiment, LogSchedule};
use crate::error::{Error, Result};
use crate::estimation::StepPolicy;
use crate::theory::EnvelopeParams;
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// `(n+1)×(n+1)` 0/1 matrix, leader last; `a_ij = 1` when `i` observes `j`.
    pub adjacency: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Thresholds {
    Uniform(f64),
    PerEdge(Vec<f64>),
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Uniform(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "gaussian")]
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn gaussian() -> String {
    "gaussian".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerAgent {
    /// Estimate every observer starts with for agent `j`, indexed by `j`.
    pub per_agent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialEstimates {
    Uniform(f64),
    PerEdge(Vec<f64>),
    PerAgent(PerAgent),
}

impl Default for InitialEstimates {
    fn default() -> Self {
        InitialEstimates::Uniform(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(rename = "W")]
    pub bound: f64,
    pub beta: f64,
    /// Defaults to the controller's own schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<StepPolicy>,
    #[serde(default)]
    pub initial_estimates: InitialEstimates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Crs,
    Brs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub controller: Controller,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: u64,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub log: LogSchedule,
    #[serde(default = "one")]
    pub trajectory_replicas: usize,
    #[serde(default)]
    pub check_dynamics: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "unit")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_b_override: Option<f64>,
    /// Auxiliary constant of the alternate threshold formula.
    #[serde(default = "default_c1")]
    pub c1: f64,
    /// Rate exponent for classification; defaults to the reference's decay exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub envelope: EnvelopeParams,
}

fn unit() -> f64 {
    1.0
}

fn default_c1() -> f64 {
    3.8
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { kappa: 1.0, f_b_override: None, c1: default_c1(), epsilon: None, envelope: EnvelopeParams::default() }
    }
}

/// One experiment. Required sections are optional here so that a missing
/// section yields `missing <section>` rather than a serde message.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))
}

fn missing<T>(v: Option<&T>, name: &str) -> Result<()> {
    v.map(|_| ()).ok_or_else(|| Error::config(name, format!("missing {name}")))
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and positive, got {v}")))
    }
}

impl RunConfig {
    /// Parses and checks presence of every section. Empty input is an empty object.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.check_sections()?;
        Ok(cfg)
    }

    /// Strict field checking but no required sections.
    pub fn parse(text: &str) -> Result<Self> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&read(path)?)
    }

    /// Like [`RunConfig::from_path`] but only the topology section is required.
    pub fn topology_from_path(path: &std::path::Path) -> Result<Topology> {
        Self::parse(&read(path)?)?.topology()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_sections(&self) -> Result<()> {
        missing(self.topology.as_ref(), "topology")?;
        missing(self.initial_state.as_ref(), "initial_state")?;
        missing(self.noise.as_ref(), "noise")?;
        missing(self.estimator.as_ref(), "estimator")?;
        missing(self.control.as_ref(), "control")?;
        missing(self.reference.as_ref(), "reference")?;
        missing(self.run.as_ref(), "run")
    }

    pub fn topology(&self) -> Result<Topology> {
        missing(self.topology.as_ref(), "topology")?;
        Topology::from_adjacency(self.topology.as_ref().unwrap().adjacency.clone())
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        self.check_sections()?;
        let n = self.noise.as_ref().unwrap();
        if n.family != "gaussian" {
            return Err(Error::config("noise.family", format!("unsupported family {:?}; only \"gaussian\"", n.family)));
        }
        match (n.variance, n.sigma) {
            (Some(v), None) => {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::config("noise.variance", "must be finite and non-negative"));
                }
                NoiseModel::from_variance(v)
            }
            (None, Some(s)) => {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::config("noise.sigma", "must be finite and non-negative"));
                }
                NoiseModel::gaussian(s)
            }
            (None, None) => Err(Error::config("noise", "give exactly one of variance or sigma")),
            (Some(_), Some(_)) => Err(Error::config("noise", "give exactly one of variance or sigma, not both")),
        }
    }

    pub fn gain(&self) -> Result<GainPolicy> {
        self.check_sections()?;
        let c = self.control.as_ref().unwrap();
        match (c.controller, c.n) {
            (Controller::Crs, None) => Ok(GainPolicy::Crs),
            (Controller::Crs, Some(_)) => Err(Error::config("control.N", "N applies to the brs controller only")),
            (Controller::Brs, Some(n)) => {
                positive("control.N", n)?;
                Ok(GainPolicy::Brs { n })
            }
            (Controller::Brs, None) => Err(Error::config("control.N", "missing control.N for brs")),
        }
    }

    /// Structural validation and conversion. The `N` floor, which needs
    /// theory constants, is checked by [`crate::analysis::prepare`].
    pub fn experiment(&self) -> Result<Experiment> {
        self.check_sections()?;
        let topology = self.topology()?;
        let n = topology.n_followers();
        let idx = topology.edge_index().clone();
        let noise = self.noise()?;
        let gain = self.gain()?;
        let est = self.estimator.as_ref().unwrap();
        let run = self.run.as_ref().unwrap();
        let reference = self.reference.clone().unwrap();

        let x0 = self.initial_state.clone().unwrap();
        if x0.len() != n + 1 {
            return Err(Error::config("initial_state", format!("expected {} entries (followers then leader), got {}", n + 1, x0.len())));
        }
        if let Some(p) = x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("initial_state[{p}]"), "must be finite"));
        }
        reference.validate()?;
        if let Some(v) = reference.initial_state() {
            if (x0[n] - v).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::config(
                    format!("initial_state[{n}]"),
                    format!("this reference fixes the leader's first state at {v:.17}"),
                ));
            }
        }

        let thresholds = self.noise.as_ref().unwrap().thresholds.clone();
        let sensors = match thresholds {
            Thresholds::Uniform(b) => SensorBank::uniform(&idx, b),
            Thresholds::PerEdge(v) => SensorBank::per_edge(&idx, v),
        }
        .map_err(|e| match e {
            Error::Config { message, .. } => Error::config("noise.thresholds", message),
            other => other,
        })?;

        positive("estimator.W", est.bound)?;
        positive("estimator.beta", est.beta)?;
        let default_policy = match gain {
            GainPolicy::Crs => StepPolicy::Decaying,
            GainPolicy::Brs { .. } => StepPolicy::Constant,
        };
        let step_policy = est.policy.unwrap_or(default_policy);
        if step_policy != default_policy {
            return Err(Error::config(
                "estimator.policy",
                format!("{step_policy:?} step does not match the {:?} controller", self.control.as_ref().unwrap().controller),
            ));
        }
        let initial_estimates = match &est.initial_estimates {
            InitialEstimates::Uniform(v) => vec![*v; idx.len()],
            InitialEstimates::PerEdge(v) => {
                if v.len() != idx.len() {
                    return Err(Error::config(
                        "estimator.initial_estimates",
                        format!("expected {} per-edge entries, got {}", idx.len(), v.len()),
                    ));
                }
                v.clone()
            }
            InitialEstimates::PerAgent(p) => {
                if p.per_agent.len() != n + 1 {
                    return Err(Error::config(
                        "estimator.initial_estimates.per_agent",
                        format!("expected {} entries, got {}", n + 1, p.per_agent.len()),
                    ));
                }
                idx.edges().iter().map(|e| p.per_agent[e.observed]).collect()
            }
        };
        if let Some(p) = initial_estimates.iter().position(|v| !(v.abs() <= est.bound)) {
            return Err(Error::config(
                format!("estimator.initial_estimates[{p}]"),
                format!("|{}| exceeds W = {}", initial_estimates[p], est.bound),
            ));
        }

        if run.horizon == 0 {
            return Err(Error::config("run.horizon", "must be at least 1"));
        }
        if run.replicas == 0 {
            return Err(Error::config("run.replicas", "must be at least 1"));
        }
        positive("analysis.kappa", self.analysis.kappa)?;
        if !topology.has_spanning_tree_rooted_at_leader() {
            return Err(Error::config("topology", Error::NoRootedSpanningTree.to_string()));
        }

        Ok(Experiment {
            topology,
            noise,
            sensors,
            bound: est.bound,
            beta: est.beta,
            step_policy,
            gain,
            reference,
            initial_state: x0,
            initial_estimates,
            horizon: run.horizon,
            replicas: run.replicas,
            seed: run.seed,
            log: run.log.clone(),
            trajectory_replicas: run.trajectory_replicas.min(run.replicas),
            check_dynamics: run.check_dynamics,
            kappa: self.analysis.kappa,
        })
    }

    /// Applies command-line overrides to the run section.
    pub fn with_overrides(mut self, seed: Option<u64>, replicas: Option<usize>, horizon: Option<u64>) -> Self {
        if let Some(run) = self.run.as_mut() {
            if let Some(s) = seed {
                run.seed = s;
            }
            if let Some(r) = replicas {
                run.replicas = r;
            }
            if let Some(h) = horizon {
                run.horizon = h;
            }
        }
        self
    }
}
