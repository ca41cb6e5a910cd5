use approx::assert_relative_eq;
use bitrack::analysis::Prepared;
use bitrack::engine::{run_with_model, step_with_bits, ReplicaState};
use bitrack::{prepare, preset, Error, RunConfig};

const PHI_HALF: f64 = 0.691_462_461_274_013_1;

fn single_follower(controller: &str) -> Prepared {
    let control = match controller {
        "crs" => r#"{"controller": "crs"}"#,
        _ => r#"{"controller": "brs", "N": 4}"#,
    };
    let text = format!(
        r#"{{
          "topology": {{"adjacency": [[0, 1], [0, 0]]}},
          "initial_state": [2, 0],
          "noise": {{"sigma": 1, "thresholds": 0}},
          "estimator": {{"W": 10, "beta": 1, "initial_estimates": 0}},
          "control": {control},
          "reference": {{"type": "constant"}},
          "run": {{"horizon": 2, "replicas": 1, "seed": 1}}
        }}"#
    );
    prepare(&RunConfig::from_json(&text).unwrap()).unwrap()
}

#[test]
fn crs_hand_trace_with_forced_bits() {
    let p = single_follower("crs");
    let mut s = ReplicaState::new(&p.experiment, 0).unwrap();

    // k = 1: x̂ = 0 + (Φ(0) − 1), u = −(2 − x̂)/2
    step_with_bits(&mut s, &p.experiment, Some(&p.model), &[true]).unwrap();
    assert_eq!(s.bank.estimates(), &[-0.5]);
    assert_eq!(s.x, vec![0.75, 0.0]);

    // k = 2: x̂ = −0.5 + Φ(0.5)/2, u = −(0.75 − x̂)/3
    step_with_bits(&mut s, &p.experiment, Some(&p.model), &[false]).unwrap();
    let est = -0.5 + 0.5 * PHI_HALF;
    assert_relative_eq!(s.bank.estimates()[0], est, epsilon = 1e-15);
    assert_relative_eq!(s.x[0], 0.75 - (0.75 - est) / 3.0, epsilon = 1e-15);
    assert_eq!(s.x[1], 0.0);
    assert_eq!(s.k, 2);
}

#[test]
fn brs_hand_trace_with_forced_bits() {
    let p = single_follower("brs");
    let mut s = ReplicaState::new(&p.experiment, 0).unwrap();
    step_with_bits(&mut s, &p.experiment, Some(&p.model), &[true]).unwrap();
    assert_eq!(s.bank.estimates(), &[-0.5]);
    assert_eq!(s.x[0], 2.0 - 2.5 / 4.0);

    step_with_bits(&mut s, &p.experiment, Some(&p.model), &[false]).unwrap();
    let est = -0.5 + PHI_HALF;
    assert_relative_eq!(s.bank.estimates()[0], est, epsilon = 1e-15);
    assert_relative_eq!(s.x[0], 1.375 - (1.375 - est) / 4.0, epsilon = 1e-15);
}

#[test]
fn wrong_bit_count_is_rejected() {
    let p = single_follower("crs");
    let mut s = ReplicaState::new(&p.experiment, 0).unwrap();
    assert!(matches!(step_with_bits(&mut s, &p.experiment, None, &[true, false]), Err(Error::Dimension(_))));
}

#[test]
fn noiseless_consensus_is_a_fixed_point() {
    let text = r#"{
      "topology": {"adjacency": [[0,1,0,0,1],[1,0,0,1,0],[1,0,0,0,0],[0,0,1,0,0],[0,0,0,0,0]]},
      "initial_state": [3, 3, 3, 3, 3],
      "noise": {"sigma": 0, "thresholds": 3},
      "estimator": {"W": 10, "beta": 5, "initial_estimates": 3},
      "control": {"controller": "crs"},
      "reference": {"type": "constant"},
      "run": {"horizon": 500, "replicas": 2, "seed": 4, "log": {"every": 50}, "check_dynamics": true}
    }"#;
    let p = prepare(&RunConfig::from_json(text).unwrap()).unwrap();
    let out = run_with_model(&p.experiment, &p.model).unwrap();
    assert!(out.metrics.l1.iter().all(|&v| v == 0.0));
    assert!(out.metrics.l2.iter().all(|&v| v == 0.0));
    assert!(out.metrics.mse.iter().flatten().all(|&v| v == 0.0));
    let last = out.trajectories.replicas[0].last().unwrap();
    assert_eq!(last.x, vec![3.0; 5]);
    assert_eq!(last.estimates, vec![3.0; 6]);
}

#[test]
fn exact_estimates_shrink_the_spread() {
    // with θ = 0 the CRS update is x ← (I − ℒ/(k+1))x, a stochastic matrix when d* <= 2
    let mut p = prepare(&preset("paper-crs").unwrap()).unwrap();
    p.experiment.beta = 1e-300;
    let w = p.model.w.clone();
    let mut s = ReplicaState::new(&p.experiment, 0).unwrap();
    let spread = |x: &[f64]| x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut prev = spread(&s.x);
    let initial = prev;
    for _ in 0..2000 {
        let exact = &w * nalgebra::DVector::from_column_slice(&s.x);
        s.bank.set_estimates(exact.as_slice());
        let bits = vec![false; w.nrows()];
        step_with_bits(&mut s, &p.experiment, Some(&p.model), &bits).unwrap();
        let now = spread(&s.x[..]);
        assert!(now <= prev + 1e-12, "spread grew from {prev} to {now} at k = {}", s.k);
        prev = now;
    }
    // decays like k^(−0.283), the smallest nonzero eigenvalue of ℒ
    assert!(prev < 2001f64.powf(-0.283) * initial, "{prev} vs {initial}");
}

#[test]
fn leader_follows_the_sinusoid_exactly() {
    let mut p = prepare(&preset("paper-brs").unwrap()).unwrap();
    p.experiment.horizon = 300;
    p.experiment.replicas = 1;
    p.experiment.log = bitrack::LogSchedule::Every(1);
    let out = run_with_model(&p.experiment, &p.model).unwrap();
    for (t, &k) in out.metrics.k.iter().enumerate() {
        let want = 10.0 * (0.02 * (k + 1) as f64).sin();
        assert_relative_eq!(out.metrics.leader[t], want, epsilon = 1e-9);
    }
}

#[test]
fn overflow_is_reported_as_divergence() {
    let mut p = prepare(&preset("paper-crs").unwrap()).unwrap();
    p.experiment.initial_state[0] = 1.7e308;
    p.experiment.horizon = 10;
    p.experiment.replicas = 2;
    let err = run_with_model(&p.experiment, &p.model).unwrap_err();
    assert!(matches!(err, Error::Diverged { step: 1, .. }), "{err}");
}

fn short_crs(replicas: usize, trajectories: usize) -> Prepared {
    let mut p = prepare(&preset("paper-crs").unwrap()).unwrap();
    p.experiment.horizon = 300;
    p.experiment.replicas = replicas;
    p.experiment.trajectory_replicas = trajectories;
    p
}

#[test]
fn runs_are_reproducible() {
    let p = short_crs(4, 1);
    let a = run_with_model(&p.experiment, &p.model).unwrap();
    let b = run_with_model(&p.experiment, &p.model).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.trajectories, b.trajectories);
}

#[test]
fn replica_streams_do_not_depend_on_replica_count() {
    let small = short_crs(2, 2);
    let large = short_crs(6, 2);
    let a = run_with_model(&small.experiment, &small.model).unwrap();
    let b = run_with_model(&large.experiment, &large.model).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
}

#[test]
fn different_seeds_give_different_paths() {
    let p = short_crs(1, 1);
    let mut q = short_crs(1, 1);
    q.experiment.seed += 1;
    let a = run_with_model(&p.experiment, &p.model).unwrap();
    let b = run_with_model(&q.experiment, &q.model).unwrap();
    assert_ne!(a.trajectories, b.trajectories);
}

#[test]
fn bits_on_different_edges_are_uncorrelated() {
    // agents 2 and 3 both observe agent 1; at x = B the bits are fair coins
    let mut p = prepare(&preset("paper-crs").unwrap()).unwrap();
    p.experiment.initial_state = vec![0.0; 5];
    let idx = p.experiment.topology.edge_index().clone();
    let (e21, e31) = (idx.position(1, 0).unwrap(), idx.position(2, 0).unwrap());
    let mut s = ReplicaState::new(&p.experiment, 0).unwrap();
    let mut other = ReplicaState::new(&p.experiment, 1).unwrap();
    let draws = 100_000;
    let (mut sa, mut sb, mut sab, mut sr, mut sar) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let bits = s.observe(&p.experiment);
        let rep = other.observe(&p.experiment);
        let (a, b, r) = (bits[e21] as u8 as f64, bits[e31] as u8 as f64, rep[e21] as u8 as f64);
        sa += a;
        sb += b;
        sab += a * b;
        sr += r;
        sar += a * r;
    }
    let n = draws as f64;
    let corr = |sxy: f64, sx: f64, sy: f64| {
        let (mx, my) = (sx / n, sy / n);
        (sxy / n - mx * my) / (mx * (1.0 - mx) * my * (1.0 - my)).sqrt()
    };
    let limit = 4.0 / n.sqrt();
    assert!((sa / n - 0.5).abs() < limit);
    assert!(corr(sab, sa, sb).abs() < limit, "edges {}", corr(sab, sa, sb));
    assert!(corr(sar, sa, sr).abs() < limit, "replicas {}", corr(sar, sa, sr));
}

#[test]
fn logged_start_is_the_initial_condition() {
    let p = short_crs(3, 1);
    let out = run_with_model(&p.experiment, &p.model).unwrap();
    let m = &out.metrics;
    assert_eq!(m.k[0], 0);
    let x0 = [-30.0, -10.0, 20.0, 10.0];
    for (i, x) in x0.iter().enumerate() {
        assert_eq!(m.mse[i][0], (x - 15.0f64).powi(2));
    }
    // per-agent initial estimates (−4, −5, 2, 0, 5) against the true states
    let errors = [(-5.0, -10.0), (5.0, 15.0), (-4.0, -30.0), (0.0, 10.0), (-4.0, -30.0), (2.0, 20.0)];
    let l2: f64 = errors.iter().map(|(e, x)| (e - x) * (e - x)).sum();
    assert_relative_eq!(m.l2[0], l2, epsilon = 1e-9);
}

#[test]
fn lyapunov_routes_agree_and_respect_the_lower_bound() {
    let p = short_crs(4, 1);
    let out = run_with_model(&p.experiment, &p.model).unwrap();
    assert!(out.summary.max_l1_route_gap < 1e-9, "{}", out.summary.max_l1_route_gap);
    assert!(out.summary.l1_lower_bound_violation <= 1e-9, "{}", out.summary.l1_lower_bound_violation);
}
