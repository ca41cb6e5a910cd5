//! Theory report for a configured experiment.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::control::GainPolicy;
use crate::engine::{Experiment, Model};
use crate::error::Result;
use crate::theory::{
    brs_bound, compute_constants, crs_condition, crs_rate, l1_alternate, l2_alternate, BrsBound, ChannelInputs,
    CrsCondition, RateReport, TheoryConstants,
};

/// Everything needed to run and analyze one configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub experiment: Experiment,
    pub model: Model,
    pub constants: TheoryConstants,
}

/// Validates the configuration, builds the reduction and checks the gain floor.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let experiment = cfg.experiment()?;
    let model = Model::build(&experiment.topology, experiment.kappa)?;
    let n_gain = match experiment.gain {
        GainPolicy::Brs { n } => Some(n),
        GainPolicy::Crs => None,
    };
    let constants = compute_constants(
        &experiment.topology,
        &model.reduction,
        &model.lyapunov,
        &ChannelInputs {
            noise: &experiment.noise,
            sensors: &experiment.sensors,
            bound: experiment.bound,
            f_b_override: cfg.analysis.f_b_override,
        },
        n_gain,
        &experiment.reference,
    )?;
    experiment.gain.validate(constants.lambda_h, constants.lambda_l)?;
    Ok(Prepared { experiment, model, constants })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub pi: Vec<f64>,
    /// `(re, im)` of the nonzero Laplacian eigenvalues, in `L̃` order.
    pub eigenvalues: Vec<[f64; 2]>,
    pub l_tilde: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub lyapunov_residual: f64,
    /// `‖ξ‖ = ‖η‖` holds for every state.
    pub isometric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub beta: f64,
    pub condition: CrsCondition,
    pub l1: f64,
    pub l1_alternate: f64,
    pub l2_alternate: f64,
    pub c1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub controller: String,
    pub n_followers: usize,
    pub n_edges: usize,
    pub laplacian: Vec<Vec<i64>>,
    pub spectral: SpectralSummary,
    pub constants: TheoryConstants,
    pub crs: ThresholdReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brs: Option<BrsBound>,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn theory_report(cfg: &RunConfig, p: &Prepared) -> Result<TheoryReport> {
    let exp = &p.experiment;
    let tc = &p.constants;
    let sr = &p.model.reduction;
    let d = tc.d_star as f64;
    let epsilon = cfg.analysis.epsilon.or_else(|| exp.reference.decay_exponent().filter(|e| *e < 1.0));
    let rate = match (exp.gain, epsilon) {
        (GainPolicy::Crs, Some(e)) => Some(crs_rate(tc, exp.beta, e)?),
        _ => None,
    };
    let brs = match exp.gain {
        GainPolicy::Brs { n } => Some(brs_bound(tc, exp.beta, n)?),
        GainPolicy::Crs => None,
    };
    Ok(TheoryReport {
        controller: match exp.gain {
            GainPolicy::Crs => "crs".into(),
            GainPolicy::Brs { .. } => "brs".into(),
        },
        n_followers: exp.topology.n_followers(),
        n_edges: exp.topology.edge_index().len(),
        laplacian: exp.topology.laplacian_int(),
        spectral: SpectralSummary {
            pi: sr.pi.iter().copied().collect(),
            eigenvalues: sr.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            l_tilde: rows(&sr.l_tilde),
            h: rows(&p.model.lyapunov.h),
            lyapunov_residual: p.model.lyapunov.residual(&sr.l_tilde),
            isometric: sr.is_isometric(1e-9),
        },
        constants: tc.clone(),
        crs: ThresholdReport {
            beta: exp.beta,
            condition: crs_condition(tc, exp.beta),
            l1: tc.l1,
            l1_alternate: l1_alternate(tc.h, tc.lambda_w, tc.lambda_l, tc.lambda_phi, cfg.analysis.c1, d),
            l2_alternate: l2_alternate(tc.h, tc.lambda_w, tc.lambda_l, tc.lambda_phi, cfg.analysis.c1, d),
            c1: cfg.analysis.c1,
            epsilon,
            rate,
        },
        brs,
    })
}

/// Canonical text of a theory report. The `analyze` output and the theory
/// section of a run report are both this string.
pub fn render(report: &TheoryReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}
