use std::path::Path;

use bitrack::engine::{RunSummary, TrajectoryLog};
use bitrack::{Experiment, MetricSeries, RunConfig};
use serde::Serialize;
use serde_json::value::RawValue;

#[derive(Serialize)]
pub struct RunReport<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub preset: Option<String>,
    pub config: &'a RunConfig,
    pub theory: &'a RawValue,
    pub summary: &'a RunSummary,
    pub logged_steps: usize,
    pub fits: Option<serde_json::Value>,
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn mean_mse(m: &MetricSeries) -> Vec<f64> {
    let n = m.mse.len() as f64;
    (0..m.k.len()).map(|t| m.mse.iter().map(|s| s[t]).sum::<f64>() / n).collect()
}

pub fn write_metrics(path: &Path, m: &MetricSeries) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["k".to_string(), "L1".into(), "L2".into()];
    header.extend((1..=m.mse.len()).map(|i| format!("mse_{i}")));
    header.push("leader".into());
    w.write_record(&header)?;
    for t in 0..m.k.len() {
        let mut row = vec![m.k[t].to_string(), num(m.l1[t]), num(m.l2[t])];
        row.extend(m.mse.iter().map(|s| num(s[t])));
        row.push(num(m.leader[t]));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_trajectories(path: &Path, exp: &Experiment, log: &TrajectoryLog) -> std::io::Result<()> {
    let n = exp.topology.n_followers();
    let edges = exp.topology.edge_index().edges();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["replica".to_string(), "k".into()];
    header.extend((1..=n + 1).map(|i| format!("x_{i}")));
    header.extend(edges.iter().map(|e| format!("xhat_{}_{}", e.observer + 1, e.observed + 1)));
    header.extend(edges.iter().map(|e| format!("theta_{}_{}", e.observer + 1, e.observed + 1)));
    header.extend((1..=n).map(|i| format!("eta_{i}")));
    header.extend((1..=n).map(|i| format!("u_{i}")));
    header.push("f".into());
    w.write_record(&header)?;
    for (r, points) in log.replicas.iter().enumerate() {
        for p in points {
            let mut row = vec![r.to_string(), p.k.to_string()];
            row.extend(p.x.iter().map(|v| num(*v)));
            row.extend(p.estimates.iter().map(|v| num(*v)));
            row.extend(p.theta.iter().map(|v| num(*v)));
            row.extend(p.eta.iter().map(|v| num(*v)));
            row.extend(p.u[..n].iter().map(|v| num(*v)));
            row.push(num(p.f));
            w.write_record(&row)?;
        }
    }
    w.flush()
}
