use approx::assert_relative_eq;
use bitrack::channel::observe_bit;
use bitrack::estimation::rpa_step;
use bitrack::theory::{compute_constants, l1_threshold, ChannelInputs};
use bitrack::{reduce, solve_lyapunov, Error, NoiseModel, ReferenceGenerator, SensorBank, Topology};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::random_adjacency;

fn kronecker_lyapunov(lt: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    let n = lt.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a = lt.transpose().kronecker(&id) + id.kronecker(&lt.transpose());
    let rhs = DMatrix::<f64>::identity(n, n) * kappa;
    let vec_rhs = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = a.lu().solve(&vec_rhs).expect("Kronecker system is nonsingular");
    DMatrix::from_column_slice(n, n, sol.as_slice())
}

#[test]
fn lyapunov_matches_kronecker_solve_on_random_topologies() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 100 {
        let t = Topology::from_adjacency(random_adjacency(&mut rng, 7, true)).unwrap();
        let sr = match reduce(&t.laplacian()) {
            Ok(sr) => sr,
            Err(Error::Defective { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let kappa = rng.random_range(0.1..5.0);
        let sol = solve_lyapunov(&sr.l_tilde, kappa).unwrap();
        let oracle = kronecker_lyapunov(&sr.l_tilde, kappa);
        let scale = oracle.amax().max(1.0);
        assert!((&sol.h - &oracle).amax() <= 1e-9 * scale, "{} vs {}", sol.h, oracle);
        assert!(sol.residual(&sr.l_tilde) <= 1e-9 * kappa.max(1.0));
        assert!(sol.lambda_min() > 0.0);
        checked += 1;
    }
}

#[test]
fn lyapunov_matches_kronecker_solve_on_random_triangular_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let mut lt = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            lt[(i, i)] = rng.random_range(0.1..4.0);
            for j in i + 1..n {
                lt[(i, j)] = rng.random_range(-2.0..2.0);
            }
        }
        let sol = solve_lyapunov(&lt, 1.0).unwrap();
        let oracle = kronecker_lyapunov(&lt, 1.0);
        assert!((&sol.h - &oracle).amax() <= 1e-9 * oracle.amax().max(1.0));
    }
}

#[test]
fn rootedness_matches_laplacian_rank() {
    // rooted at the leader iff zero is a simple eigenvalue of ℒ
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let adj = random_adjacency(&mut rng, 8, false);
        let t = Topology::from_adjacency(adj).unwrap();
        let sv = t.laplacian().singular_values();
        let zeros = sv.iter().filter(|&&s| s < 1e-9).count();
        assert_eq!(t.has_spanning_tree_rooted_at_leader(), zeros == 1, "{:?}", t.adjacency());
    }
}

#[test]
fn reduction_identities_on_random_topologies() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 100 {
        let t = Topology::from_adjacency(random_adjacency(&mut rng, 7, true)).unwrap();
        let lap = t.laplacian();
        let Ok(sr) = reduce(&lap) else { continue };
        let size = t.n_agents();
        let ones = DMatrix::from_element(size, 1, 1.0);

        assert_relative_eq!((sr.pi.transpose() * &ones)[(0, 0)], 1.0, epsilon = 1e-9);
        assert!((sr.pi.transpose() * &lap).amax() < 1e-9);
        assert!((&lap * &sr.psi - &sr.psi * &sr.l_tilde).amax() < 1e-8);
        assert!((&sr.theta * &sr.theta_inv - DMatrix::identity(size, size)).amax() < 1e-8);
        assert!((&sr.phi * &ones).amax() < 1e-9);

        let mut want: Vec<(f64, f64)> = lap.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        want.remove(0);
        let mut got: Vec<(f64, f64)> = sr.l_tilde.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for (g, w) in got.iter().zip(&want) {
            assert!((g.0 - w.0).abs() < 1e-6 && (g.1 - w.1).abs() < 1e-6, "{got:?} vs {want:?}");
            assert!(g.0 > 0.0);
        }
        checked += 1;
    }
}

#[test]
fn incidence_matrices_rebuild_the_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let t = Topology::from_adjacency(random_adjacency(&mut rng, 8, false)).unwrap();
        let idx = t.edge_index();
        let (m, w) = (t.build_m(idx).unwrap(), t.build_w(idx).unwrap());
        let ones = DMatrix::from_element(idx.len(), 1, 1.0);
        let degrees = DMatrix::from_diagonal(&(&m * ones).column(0).into_owned());
        assert_eq!(degrees - &m * &w, t.laplacian());
    }
}

#[test]
fn l1_from_unit_constants() {
    assert_relative_eq!(l1_threshold(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), 5.25, epsilon = 1e-15);
}

#[test]
fn one_follower_constants_by_hand() {
    let t = Topology::from_adjacency(vec![vec![0, 1], vec![0, 0]]).unwrap();
    let sr = reduce(&t.laplacian()).unwrap();
    let lyap = solve_lyapunov(&sr.l_tilde, 1.0).unwrap();
    let noise = NoiseModel::gaussian(1.0).unwrap();
    let sensors = SensorBank::uniform(t.edge_index(), 0.0).unwrap();
    let tc = compute_constants(
        &t,
        &sr,
        &lyap,
        &ChannelInputs { noise: &noise, sensors: &sensors, bound: 1.0, f_b_override: None },
        Some(10.0),
        &ReferenceGenerator::Constant,
    )
    .unwrap();
    assert_relative_eq!(tc.lambda_h, 0.5, epsilon = 1e-12);
    assert_relative_eq!(tc.h, 2.0, epsilon = 1e-12);
    assert_eq!(tc.d_star, 1);
    // ℒ = [[1, -1], [0, 0]], ℒℒᵀ = [[2, 0], [0, 0]]
    assert_relative_eq!(tc.lambda_l, 2.0, epsilon = 1e-12);
    assert_relative_eq!(tc.lambda_w, 1.0, epsilon = 1e-12);
    // I − WM/N = 1 − 0
    assert_relative_eq!(tc.lambda_m.unwrap(), 1.0, epsilon = 1e-12);
    // φ = (1, -1) up to sign, H = 1/2
    assert_relative_eq!(tc.lambda_phi, 0.5 * 2.0 / sr.psi.norm_squared(), epsilon = 1e-12);
    assert_relative_eq!(tc.f_b, (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-15);
}

fn estimator_mse(start: f64, replicas: u64, checkpoints: &[u64]) -> Vec<f64> {
    let noise = NoiseModel::from_variance(10.0).unwrap();
    let (x_true, beta, bound) = (5.0, 150.0, 50.0);
    let mut sq = vec![0.0; checkpoints.len()];
    for r in 0..replicas {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
        let mut est = start;
        let mut next = 0;
        for k in 1..=*checkpoints.last().unwrap() {
            let bit = observe_bit(x_true, 0.0, &noise, &mut rng);
            est = rpa_step(est, bit, 0.0, &noise, beta / k as f64, bound);
            if k == checkpoints[next] {
                sq[next] += (est - x_true).powi(2);
                next += 1;
            }
        }
    }
    sq.iter().map(|s| s / replicas as f64).collect()
}

#[test]
fn estimator_variance_matches_stochastic_approximation_theory() {
    // started at the truth: k·E(x̂ − x)² → β²F(1−F) / (2βf − 1)
    let noise = NoiseModel::from_variance(10.0).unwrap();
    let (beta, k) = (150.0, 10_000u64);
    let mse = estimator_mse(5.0, 200, &[k])[0];
    let (f, p) = (noise.pdf(-5.0), noise.cdf(-5.0));
    let predicted = beta * beta * p * (1.0 - p) / (2.0 * beta * f - 1.0) / k as f64;
    assert!(mse / predicted > 0.7 && mse / predicted < 1.4, "mse {mse}, predicted {predicted}");
}

#[test]
fn estimator_static_target_from_threshold() {
    // x̂(0) = 0, x = 5, 100 replicas, 10⁴ steps: MSE must fall and end 100x below its start
    let checkpoints = [10, 100, 1_000, 10_000];
    let mse = estimator_mse(0.0, 100, &checkpoints);
    let initial = 25.0;
    println!("mse at {checkpoints:?}: {mse:?}, reduction {:.1}x", initial / mse[3]);
    assert!(mse.windows(2).all(|w| w[1] < w[0]), "{mse:?}");
    assert!(mse[3] <= initial / 100.0, "final MSE {} is only {:.1}x below the initial 25", mse[3], initial / mse[3]);
}
