//! Simulation loop, Monte Carlo replication and metric reduction.
//!
//! Loop convention: iteration `k = 1, 2, ..., K` observes the current state,
//! updates the estimates with step `β/k` (or `β`), applies the control with
//! gain `1/(k+1)` (or `1/N`) and advances the leader by `f(k)`. The
//! configured initial state is what iteration 1 observes. Logged index `k`
//! is the number of completed iterations, so `k = 0` is the initial state.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{observe_bit, NoiseModel, SensorBank};
use crate::control::{GainPolicy, ReferenceGenerator};
use crate::error::{Error, Result};
use crate::estimation::{EstimatorBank, StepPolicy};
use crate::spectral::{reduce, solve_lyapunov, LyapunovSolution, SpectralReduction};
use crate::topology::Topology;

/// Which iterations are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LogSchedule {
    /// `0, 1, 2, 4, 8, ...` plus the horizon.
    #[default]
    Geometric,
    /// `round(10^(i/m))` for `m` points per decade, plus `0` and the horizon.
    PerDecade(u32),
    /// Every `n`-th iteration, plus `0` and the horizon.
    Every(u64),
    /// Explicit iteration counts (`0` and the horizon are always added).
    Points(Vec<u64>),
}

impl LogSchedule {
    pub fn steps(&self, horizon: u64) -> Vec<u64> {
        let mut out = vec![0];
        match self {
            LogSchedule::Geometric => {
                let mut k = 1u64;
                while k < horizon {
                    out.push(k);
                    k = k.saturating_mul(2);
                }
            }
            LogSchedule::PerDecade(m) => {
                let m = (*m).max(1) as f64;
                let mut i = 0u32;
                loop {
                    let k = 10f64.powf(i as f64 / m).round() as u64;
                    if k >= horizon {
                        break;
                    }
                    out.push(k);
                    i += 1;
                }
            }
            LogSchedule::Every(n) => {
                let n = (*n).max(1);
                out.extend((1..).map(|i| i * n).take_while(|&k| k < horizon));
            }
            LogSchedule::Points(p) => out.extend(p.iter().copied().filter(|&k| k > 0 && k < horizon)),
        }
        out.push(horizon);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub topology: Topology,
    pub noise: NoiseModel,
    pub sensors: SensorBank,
    pub bound: f64,
    pub beta: f64,
    pub step_policy: StepPolicy,
    pub gain: GainPolicy,
    pub reference: ReferenceGenerator,
    /// `n + 1` entries, leader last.
    pub initial_state: Vec<f64>,
    /// One per edge in edge-index order.
    pub initial_estimates: Vec<f64>,
    pub horizon: u64,
    pub replicas: usize,
    pub seed: u64,
    pub log: LogSchedule,
    /// Keep full trajectories for the first this-many replicas.
    pub trajectory_replicas: usize,
    /// Cross-check the scalar update against the matrix form every iteration.
    pub check_dynamics: bool,
    pub kappa: f64,
}

/// Precomputed matrices shared read-only by all replicas.
#[derive(Debug, Clone)]
pub struct Model {
    pub reduction: SpectralReduction,
    pub lyapunov: LyapunovSolution,
    pub laplacian: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// `(I−J)ᵀ φᵀ H φ (I−J)`, so `L₁ = ξᵀ G ξ` as a second route.
    pub xi_weight: DMatrix<f64>,
}

impl Model {
    pub fn build(t: &Topology, kappa: f64) -> Result<Self> {
        let laplacian = t.laplacian();
        let reduction = reduce(&laplacian)?;
        let lyapunov = solve_lyapunov(&reduction.l_tilde, kappa)?;
        let idx = t.edge_index();
        let proj = reduction.disagreement_projector();
        let xi_weight = proj.transpose() * reduction.phi.transpose() * &lyapunov.h * &reduction.phi * &proj;
        Ok(Self { m: t.build_m(idx)?, w: t.build_w(idx)?, laplacian, reduction, lyapunov, xi_weight })
    }
}

/// State owned by one replica.
#[derive(Debug, Clone)]
pub struct ReplicaState {
    pub x: Vec<f64>,
    pub bank: EstimatorBank,
    /// One stream per edge.
    rngs: Vec<ChaCha8Rng>,
    /// Completed iterations.
    pub k: u64,
    pub last_u: Vec<f64>,
    pub last_f: f64,
}

/// Independent stream for `(replica, edge)` derived from the master seed.
pub fn edge_stream(seed: u64, replica: usize, edge: usize, n_edges: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replica as u64) * (n_edges as u64) + edge as u64);
    rng
}

impl ReplicaState {
    pub fn new(exp: &Experiment, replica: usize) -> Result<Self> {
        let e = exp.topology.edge_index().len();
        let bank = EstimatorBank::new(exp.initial_estimates.clone(), exp.bound, exp.beta, exp.step_policy)?;
        Ok(Self {
            x: exp.initial_state.clone(),
            bank,
            rngs: (0..e).map(|edge| edge_stream(exp.seed, replica, edge, e)).collect(),
            k: 0,
            last_u: vec![0.0; exp.initial_state.len()],
            last_f: 0.0,
        })
    }

    /// Draws one bit per edge from the current state.
    pub fn observe(&mut self, exp: &Experiment) -> Vec<bool> {
        exp.topology
            .edge_index()
            .edges()
            .iter()
            .zip(self.rngs.iter_mut())
            .enumerate()
            .map(|(p, (e, rng))| observe_bit(self.x[e.observed], exp.sensors.threshold(p), &exp.noise, rng))
            .collect()
    }
}

/// Outcome of one iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepCheck {
    /// `max |x_scalar − x_matrix|`, when checked.
    pub dynamics_residual: f64,
}

/// One iteration with externally supplied bits.
pub fn step_with_bits(
    state: &mut ReplicaState,
    exp: &Experiment,
    model: Option<&Model>,
    bits: &[bool],
) -> Result<StepCheck> {
    let k = state.k + 1;
    let t = &exp.topology;
    let idx = t.edge_index();
    let n = t.n_followers();
    if bits.len() != idx.len() {
        return Err(Error::Dimension(format!("{} bits for {} edges", bits.len(), idx.len())));
    }

    state.bank.update(bits, exp.sensors.thresholds(), &exp.noise, k);
    let est = state.bank.estimates();
    let gain = exp.gain.gain(k);

    let mut next = state.x.clone();
    for i in 0..n {
        let range = idx.range_of(i).expect("follower has an edge range");
        let u = -gain * est[range].iter().map(|e| state.x[i] - e).sum::<f64>();
        state.last_u[i] = u;
        next[i] = state.x[i] + u;
    }
    let f = exp.reference.increment(k);
    state.last_u[n] = f;
    state.last_f = f;
    next[n] = state.x[n] + f;

    let mut check = StepCheck::default();
    if let (true, Some(model)) = (exp.check_dynamics, model) {
        // x(k+1) = (I − gℒ)x + gMθ + Γ
        let x = DVector::from_column_slice(&state.x);
        let theta = DVector::from_column_slice(est) - &model.w * &x;
        let mut vector = &x - (&model.laplacian * &x) * gain + (&model.m * theta) * gain;
        vector[n] += f;
        check.dynamics_residual = vector.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    }

    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { step: k, replica: usize::MAX });
    }
    state.x = next;
    state.k = k;
    Ok(check)
}

/// One iteration: observe, estimate, control, advance the leader.
pub fn step(state: &mut ReplicaState, exp: &Experiment, model: Option<&Model>) -> Result<StepCheck> {
    let bits = state.observe(exp);
    step_with_bits(state, exp, model, &bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub k: u64,
    pub x: Vec<f64>,
    pub estimates: Vec<f64>,
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    /// Inputs applied in iteration `k` (leader entry is `f(k)`); zeros at `k = 0`.
    pub u: Vec<f64>,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryLog {
    /// `replicas[r]` holds the logged points of replica `r`.
    pub replicas: Vec<Vec<TrajectoryPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub k: Vec<u64>,
    /// Mean of `ηᵀHη`.
    pub l1: Vec<f64>,
    /// Mean of `θᵀθ`.
    pub l2: Vec<f64>,
    /// Mean of `ηᵀη`.
    pub eta_sq: Vec<f64>,
    /// `mse[i][t]`: mean of `(x_i − x_{n+1})²` at `k[t]`.
    pub mse: Vec<Vec<f64>>,
    pub leader: Vec<f64>,
    pub replicas: usize,
}

impl MetricSeries {
    /// `max_i mse[i][t]`.
    pub fn max_mse(&self) -> Vec<f64> {
        (0..self.k.len())
            .map(|t| self.mse.iter().map(|m| m[t]).fold(0.0, f64::max))
            .collect()
    }

    pub fn index_of(&self, k: u64) -> Option<usize> {
        self.k.binary_search(&k).ok()
    }
}

/// Run-wide diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Largest scalar-vs-matrix dynamics residual seen (0 when not checked).
    pub max_dynamics_residual: f64,
    /// Largest relative gap between the two routes to `L₁`.
    pub max_l1_route_gap: f64,
    /// `max |x_i|` over followers, replicas and every `k >= d*`.
    pub max_follower_abs_after_dstar: f64,
    /// Largest `ηᵀHη − λ_min(H)ηᵀη` violation (should be <= 0).
    pub l1_lower_bound_violation: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectories: TrajectoryLog,
    pub metrics: MetricSeries,
    pub summary: RunSummary,
}

struct ReplicaResult {
    // samples[t] = (l1, l2, eta_sq, per-agent squared tracking errors)
    samples: Vec<(f64, f64, f64, Vec<f64>)>,
    leader: Vec<f64>,
    trajectory: Option<Vec<TrajectoryPoint>>,
    max_residual: f64,
    max_route_gap: f64,
    max_abs_after_dstar: f64,
    l1_violation: f64,
}

fn run_replica(exp: &Experiment, model: &Model, replica: usize, schedule: &[u64]) -> Result<ReplicaResult> {
    let t = &exp.topology;
    let n = t.n_followers();
    let d_star = t.max_degree() as u64;
    let enforce_bound = matches!(exp.gain, GainPolicy::Crs)
        && exp.initial_state[..n].iter().all(|v| v.abs() <= exp.bound);
    let h_min = model.lyapunov.lambda_min();
    let keep = replica < exp.trajectory_replicas;

    let mut state = ReplicaState::new(exp, replica)?;
    let mut out = ReplicaResult {
        samples: Vec::with_capacity(schedule.len()),
        leader: Vec::with_capacity(schedule.len()),
        trajectory: keep.then(Vec::new),
        max_residual: 0.0,
        max_route_gap: 0.0,
        max_abs_after_dstar: 0.0,
        l1_violation: f64::NEG_INFINITY,
    };

    let mut next_log = 0;
    loop {
        if next_log < schedule.len() && schedule[next_log] == state.k {
            record(exp, model, &state, &mut out, keep, h_min);
            next_log += 1;
        }
        if state.k >= d_star {
            let m = state.x[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            out.max_abs_after_dstar = out.max_abs_after_dstar.max(m);
        }
        if state.k >= exp.horizon {
            break;
        }
        let check = step(&mut state, exp, Some(model)).map_err(|e| match e {
            Error::Diverged { step, .. } => Error::Diverged { step, replica },
            other => other,
        })?;
        out.max_residual = out.max_residual.max(check.dynamics_residual);
        if enforce_bound && state.k >= d_star {
            for i in 0..n {
                if state.x[i].abs() > exp.bound * (1.0 + 1e-12) {
                    return Err(Error::StateBound { step: state.k, agent: i, value: state.x[i], bound: exp.bound });
                }
            }
        }
    }
    Ok(out)
}

fn record(exp: &Experiment, model: &Model, state: &ReplicaState, out: &mut ReplicaResult, keep: bool, h_min: f64) {
    let n = exp.topology.n_followers();
    let x = DVector::from_column_slice(&state.x);
    let sr = &model.reduction;
    let weighted = sr.pi.dot(&x);
    let xi = x.map(|v| v - weighted);
    let eta = &sr.phi * &xi;
    let l1 = eta.dot(&(&model.lyapunov.h * &eta));
    let l1_alt = xi.dot(&(&model.xi_weight * &xi));
    let gap = (l1 - l1_alt).abs() / l1.abs().max(1e-300);
    if l1.abs() > 1e-200 {
        out.max_route_gap = out.max_route_gap.max(gap);
    }
    let eta_sq = eta.norm_squared();
    out.l1_violation = out.l1_violation.max(h_min * eta_sq - l1);
    let theta = DVector::from_column_slice(state.bank.estimates()) - &model.w * &x;
    let l2 = theta.norm_squared();
    let leader = state.x[n];
    let sq: Vec<f64> = state.x[..n].iter().map(|v| (v - leader).powi(2)).collect();
    out.samples.push((l1, l2, eta_sq, sq));
    out.leader.push(leader);
    if let (true, Some(traj)) = (keep, out.trajectory.as_mut()) {
        traj.push(TrajectoryPoint {
            k: state.k,
            x: state.x.clone(),
            estimates: state.bank.estimates().to_vec(),
            theta: theta.iter().copied().collect(),
            eta: eta.iter().copied().collect(),
            u: if state.k == 0 { vec![0.0; n + 1] } else { state.last_u.clone() },
            f: if state.k == 0 { 0.0 } else { state.last_f },
        });
    }
}

/// Sum in a fixed binary-tree order so the result does not depend on scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Runs all replicas (in parallel) and reduces the metrics.
pub fn run(exp: &Experiment) -> Result<RunOutput> {
    let model = Model::build(&exp.topology, exp.kappa)?;
    run_with_model(exp, &model)
}

pub fn run_with_model(exp: &Experiment, model: &Model) -> Result<RunOutput> {
    if exp.horizon == 0 || exp.replicas == 0 {
        return Err(Error::config("run", "horizon and replicas must be at least 1"));
    }
    let schedule = exp.log.steps(exp.horizon);
    let results: Vec<ReplicaResult> = (0..exp.replicas)
        .into_par_iter()
        .map(|r| run_replica(exp, model, r, &schedule))
        .collect::<Result<_>>()?;

    let n = exp.topology.n_followers();
    let r = results.len() as f64;
    let mean = |f: &dyn Fn(&ReplicaResult) -> f64| {
        let v: Vec<f64> = results.iter().map(f).collect();
        pairwise_sum(&v) / r
    };
    let mut metrics = MetricSeries {
        k: schedule.clone(),
        l1: Vec::with_capacity(schedule.len()),
        l2: Vec::with_capacity(schedule.len()),
        eta_sq: Vec::with_capacity(schedule.len()),
        mse: vec![Vec::with_capacity(schedule.len()); n],
        leader: Vec::with_capacity(schedule.len()),
        replicas: results.len(),
    };
    for t in 0..schedule.len() {
        metrics.l1.push(mean(&|res| res.samples[t].0));
        metrics.l2.push(mean(&|res| res.samples[t].1));
        metrics.eta_sq.push(mean(&|res| res.samples[t].2));
        for i in 0..n {
            metrics.mse[i].push(mean(&|res| res.samples[t].3[i]));
        }
        metrics.leader.push(mean(&|res| res.leader[t]));
    }
    let summary = RunSummary {
        max_dynamics_residual: results.iter().map(|r| r.max_residual).fold(0.0, f64::max),
        max_l1_route_gap: results.iter().map(|r| r.max_route_gap).fold(0.0, f64::max),
        max_follower_abs_after_dstar: results.iter().map(|r| r.max_abs_after_dstar).fold(0.0, f64::max),
        l1_lower_bound_violation: results.iter().map(|r| r.l1_violation).fold(f64::NEG_INFINITY, f64::max),
    };
    let trajectories = TrajectoryLog { replicas: results.into_iter().filter_map(|r| r.trajectory).collect() };
    Ok(RunOutput { trajectories, metrics, summary })
}

/// Least-squares slope of `ln(value)` against `ln(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

impl RateFit {
    /// Two-sided interval `slope ± z·stderr`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.slope - z * self.stderr, self.slope + z * self.stderr)
    }
}

/// Fits over the points with `k_min <= k <= k_max` and positive values.
pub fn fit_rate(k: &[u64], values: &[f64], k_min: u64, k_max: u64) -> Result<RateFit> {
    if k_min == 0 || (k_max as f64) < 10.0 * k_min as f64 {
        return Err(Error::config("rates", "fit window needs k_min >= 1 and k_max >= 10·k_min"));
    }
    let pts: Vec<(f64, f64)> = k
        .iter()
        .zip(values)
        .filter(|(&kk, &v)| kk >= k_min && kk <= k_max && v > 0.0)
        .map(|(&kk, &v)| ((kk as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::config("rates", format!("only {} usable points in the fit window", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>();
    let stderr = (sse / (m - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, stderr, intercept, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(LogSchedule::Geometric.steps(10), vec![0, 1, 2, 4, 8, 10]);
        assert_eq!(LogSchedule::Every(3).steps(10), vec![0, 3, 6, 9, 10]);
        let d = LogSchedule::PerDecade(10).steps(1000);
        assert!(d.contains(&10) && d.contains(&100) && d.contains(&1000));
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(LogSchedule::Points(vec![5, 50, 7]).steps(20), vec![0, 5, 7, 20]);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_ints() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn exact_power_law_fit() {
        let k: Vec<u64> = (0..=60).map(|i| 10f64.powf(1.0 + i as f64 / 10.0).round() as u64).collect();
        let v: Vec<f64> = k.iter().map(|&k| 3.0 / (k as f64).sqrt()).collect();
        let fit = fit_rate(&k, &v, 10, 10_000_000).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-6);
    }

    #[test]
    fn log_corrected_power_law_fit() {
        let k: Vec<u64> = (0..=30).map(|i| 10f64.powf(3.0 + i as f64 / 10.0).round() as u64).collect();
        let v: Vec<f64> = k.iter().map(|&k| 2.0 * (k as f64).ln() / (k as f64).sqrt()).collect();
        let fit = fit_rate(&k, &v, 1000, 1_000_000).unwrap();
        assert!(fit.slope > -0.6 && fit.slope < -0.4, "{}", fit.slope);
    }

    #[test]
    fn fit_window_must_span_a_decade() {
        assert!(fit_rate(&[1, 2, 3], &[1.0, 1.0, 1.0], 1, 5).is_err());
    }
}
