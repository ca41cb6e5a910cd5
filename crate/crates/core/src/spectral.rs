//! Disagreement coordinates and the Lyapunov machinery.
//!
//! The Laplacian is brought to the block form `Θ⁻¹ ℒ Θ = diag(0, L̃)` with
//! `Θ = [1, ψ]` and `Θ⁻¹ = [π; φ]`. The columns of `ψ` are real eigenvectors
//! of `ℒ` (or real/imaginary parts of complex ones), so `L̃` is block
//! diagonal with 1x1 blocks for real eigenvalues and 2x2 rotation blocks
//! `[[α, β], [-β, α]]` for each conjugate pair `α ± iβ`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{complex_null_space, eigenvalues, null_space, schur, smallest_singular_values, sym_max_eig, sym_min_eig, to_complex};

/// Residual tolerance on the reduction invariants.
pub const REDUCTION_TOL: f64 = 1e-8;
const LOOSE_CLUSTER_TOL: f64 = 1e-3;
/// Nearly parallel eigenvector columns mean a split Jordan block, not a basis.
const MAX_THETA_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct SpectralReduction {
    /// Left null vector of `ℒ`, normalized so `π·1 = 1`.
    pub pi: DVector<f64>,
    /// `J = 1·π`.
    pub j: DMatrix<f64>,
    /// `Θ = [1, ψ]`.
    pub theta: DMatrix<f64>,
    pub theta_inv: DMatrix<f64>,
    /// `(n+1) x n`.
    pub psi: DMatrix<f64>,
    /// `n x (n+1)`, bottom block of `Θ⁻¹`.
    pub phi: DMatrix<f64>,
    pub l_tilde: DMatrix<f64>,
    /// Nonzero eigenvalues of `ℒ` in the order they appear along `L̃`.
    pub eigenvalues: Vec<Complex<f64>>,
}

impl SpectralReduction {
    pub fn n_followers(&self) -> usize {
        self.l_tilde.nrows()
    }

    /// `ψᵀψ`; its extreme eigenvalues bound `‖ξ‖² / ‖η‖²`.
    pub fn psi_gram(&self) -> DMatrix<f64> {
        self.psi.transpose() * &self.psi
    }

    /// Whether `Θ` restricted to the disagreement subspace is an isometry,
    /// i.e. `‖ξ‖ = ‖η‖` for every state.
    pub fn is_isometric(&self, tol: f64) -> bool {
        let g = self.psi_gram();
        (g - DMatrix::identity(self.n_followers(), self.n_followers())).amax() <= tol
    }

    /// `(I - J)`.
    pub fn disagreement_projector(&self) -> DMatrix<f64> {
        DMatrix::identity(self.pi.len(), self.pi.len()) - &self.j
    }
}

/// `ξ = (I - J)x` and `η = φξ`.
pub fn error_coordinates(x: &DVector<f64>, sr: &SpectralReduction) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != sr.pi.len() {
        return Err(Error::Dimension(format!("state has {} entries, expected {}", x.len(), sr.pi.len())));
    }
    let weighted = sr.pi.dot(x);
    let xi = x.map(|v| v - weighted);
    let eta = &sr.phi * &xi;
    Ok((xi, eta))
}

/// Computes the reduction for a Laplacian with a simple zero eigenvalue.
pub fn reduce(lap: &DMatrix<f64>) -> Result<SpectralReduction> {
    let size = lap.nrows();
    if size != lap.ncols() || size < 2 {
        return Err(Error::Dimension("Laplacian must be square with at least 2 agents".into()));
    }
    let scale = lap.amax().max(1.0);
    let zero_tol = 1e-9 * scale;
    let cluster_tol = 1e-6 * scale;
    let null_tol = 1e-6 * scale;

    let spectrum = eigenvalues(lap)?;
    let zeros = spectrum.iter().filter(|l| l.norm() <= zero_tol).count();
    if zeros != 1 {
        // rank(ℒ) < n means more than one zero eigenvalue
        let small = smallest_singular_values(lap, 2);
        if small.len() == 2 && small[1] <= zero_tol {
            return Err(Error::NoRootedSpanningTree);
        }
        if zeros == 0 {
            return Err(Error::Numerical("Laplacian has no numerically zero eigenvalue".into()));
        }
        return Err(Error::NoRootedSpanningTree);
    }

    let pi = left_null_vector(lap, zero_tol)?;

    let mut nonzero: Vec<Complex<f64>> = spectrum.into_iter().filter(|l| l.norm() > zero_tol).collect();
    nonzero.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    match assemble(lap, &pi, &nonzero, cluster_tol, null_tol, scale) {
        // a Jordan block of size m splits by about eps^(1/m); regroup loosely to expose it
        Err(Error::Numerical(_)) => assemble(lap, &pi, &nonzero, LOOSE_CLUSTER_TOL * scale, null_tol, scale),
        other => other,
    }
}

fn assemble(
    lap: &DMatrix<f64>,
    pi: &DVector<f64>,
    nonzero: &[Complex<f64>],
    cluster_tol: f64,
    null_tol: f64,
    scale: f64,
) -> Result<SpectralReduction> {
    let size = lap.nrows();
    let n = size - 1;
    let clusters = cluster_eigenvalues(nonzero, cluster_tol);

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    for cluster in clusters {
        let lambda = cluster.value;
        if lambda.im.abs() <= cluster_tol {
            let shifted = lap - DMatrix::identity(size, size) * lambda.re;
            let basis = null_space(&shifted, null_tol)?;
            if basis.len() < cluster.multiplicity {
                return Err(Error::Defective { re: lambda.re, im: 0.0 });
            }
            for v in basis.into_iter().take(cluster.multiplicity) {
                columns.push(gauge_real(v));
                eigenvalues.push(Complex::new(lambda.re, 0.0));
            }
        } else if lambda.im > 0.0 {
            let shifted = to_complex(lap) - DMatrix::identity(size, size) * lambda;
            let basis = complex_null_space(&shifted, null_tol)?;
            if basis.len() < cluster.multiplicity {
                return Err(Error::Defective { re: lambda.re, im: lambda.im });
            }
            for v in basis.into_iter().take(cluster.multiplicity) {
                let v = gauge_complex(v);
                columns.push(v.map(|c| c.re));
                columns.push(v.map(|c| c.im));
                eigenvalues.push(lambda);
                eigenvalues.push(lambda.conj());
            }
        }
        // negative-imaginary partners are covered by their conjugates
    }
    if columns.len() != n {
        return Err(Error::Numerical(format!(
            "recovered {} eigenvector columns, expected {n}",
            columns.len()
        )));
    }

    let psi = DMatrix::from_columns(&columns);
    let mut theta = DMatrix::zeros(size, size);
    theta.column_mut(0).fill(1.0);
    theta.view_mut((0, 1), (size, n)).copy_from(&psi);
    let sv = theta.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= MAX_THETA_CONDITION) {
        return Err(Error::Numerical(format!("Θ is ill-conditioned (condition number {cond:.3e})")));
    }
    let theta_inv = theta
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Θ is singular".into()))?;
    let phi = theta_inv.rows(1, n).into_owned();

    let block = &theta_inv * lap * &theta;
    let l_tilde = block.view((1, 1), (n, n)).into_owned();
    let off = block[(0, 0)]
        .abs()
        .max(block.view((0, 1), (1, n)).amax())
        .max(block.view((1, 0), (n, 1)).amax());
    if off > REDUCTION_TOL * scale {
        return Err(Error::Numerical(format!("reduction off-block residual {off:.3e}")));
    }
    let row_gap = (theta_inv.row(0).transpose() - pi).amax();
    if row_gap > REDUCTION_TOL {
        return Err(Error::Numerical(format!("first row of Θ⁻¹ differs from π by {row_gap:.3e}")));
    }
    if let Some(bad) = eigenvalues.iter().find(|l| l.re <= 0.0) {
        return Err(Error::NotHurwitz(bad.re));
    }

    let j = DMatrix::from_fn(size, size, |_, c| pi[c]);
    Ok(SpectralReduction { pi: pi.clone(), j, theta, theta_inv, psi, phi, l_tilde, eigenvalues })
}

fn left_null_vector(lap: &DMatrix<f64>, tol: f64) -> Result<DVector<f64>> {
    let basis = null_space(&lap.transpose(), tol.max(1e-12))?;
    let v = basis
        .into_iter()
        .next()
        .ok_or_else(|| Error::Numerical("no left null vector found".into()))?;
    let sum = v.sum();
    if sum.abs() < 1e-12 {
        return Err(Error::Numerical("left null vector sums to zero".into()));
    }
    let mut pi = v / sum;
    // exact zeros keep π·1 = 1 readable; tiny negatives are rounding noise
    pi.apply(|p| {
        if p.abs() < 1e-14 {
            *p = 0.0
        }
    });
    let s = pi.sum();
    Ok(pi / s)
}

struct Cluster {
    value: Complex<f64>,
    multiplicity: usize,
}

fn cluster_eigenvalues(sorted: &[Complex<f64>], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<(Complex<f64>, usize)> = Vec::new();
    for &l in sorted {
        match out.iter_mut().find(|(c, m)| (*c / *m as f64 - l).norm() <= tol) {
            Some((sum, m)) => {
                *sum += l;
                *m += 1;
            }
            None => out.push((l, 1)),
        }
    }
    out.into_iter()
        .map(|(sum, m)| {
            let mut value = sum / m as f64;
            if value.im.abs() <= tol {
                value.im = 0.0;
            }
            Cluster { value, multiplicity: m }
        })
        .collect()
}

/// Unit norm, first non-negligible entry positive.
fn gauge_real(v: DVector<f64>) -> DVector<f64> {
    let v = v.normalize();
    let sign = v.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
    v * sign
}

/// Unit norm, largest-modulus entry real and positive.
fn gauge_complex(v: DVector<Complex<f64>>) -> DVector<Complex<f64>> {
    let v = v.normalize();
    let (mut best, mut best_norm) = (0, -1.0);
    for (k, c) in v.iter().enumerate() {
        // earliest index wins among near-ties so the choice is reproducible
        if c.norm() > best_norm + 1e-12 {
            best = k;
            best_norm = c.norm();
        }
    }
    let phase = v[best].conj() / v[best].norm();
    v * phase
}

/// Solution of `H L̃ + L̃ᵀ H = κ I`.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub h: DMatrix<f64>,
    pub kappa: f64,
}

impl LyapunovSolution {
    pub fn lambda_max(&self) -> f64 {
        sym_max_eig(&self.h)
    }

    pub fn lambda_min(&self) -> f64 {
        sym_min_eig(&self.h)
    }

    /// `‖H L̃ + L̃ᵀH − κI‖_F`.
    pub fn residual(&self, l_tilde: &DMatrix<f64>) -> f64 {
        let n = l_tilde.nrows();
        (&self.h * l_tilde + l_tilde.transpose() * &self.h - DMatrix::identity(n, n) * self.kappa).norm()
    }
}

/// Solves `H L̃ + L̃ᵀ H = κ I` by complex Schur triangularization of `L̃`.
///
/// With `L̃ = U T Uᴴ` the equation becomes `X T + Tᴴ X = κ I` for
/// `X = Uᴴ H U`, which is solved entry by entry in increasing row/column order.
pub fn solve_lyapunov(l_tilde: &DMatrix<f64>, kappa: f64) -> Result<LyapunovSolution> {
    let n = l_tilde.nrows();
    if n != l_tilde.ncols() {
        return Err(Error::Dimension("L̃ must be square".into()));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::config("analysis.kappa", "must be a positive finite number"));
    }
    if n == 0 {
        return Ok(LyapunovSolution { h: DMatrix::zeros(0, 0), kappa });
    }
    let (u, t) = schur(&to_complex(l_tilde))?;
    if let Some(bad) = (0..n).map(|k| t[(k, k)].re).find(|&re| re <= 0.0) {
        return Err(Error::NotHurwitz(bad));
    }

    let scale = t.iter().map(|c| c.norm()).fold(1.0f64, f64::max);
    let mut sep = f64::INFINITY;
    let mut x = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut rhs = if i == j { Complex::new(kappa, 0.0) } else { Complex::new(0.0, 0.0) };
            for k in 0..j {
                rhs -= x[(i, k)] * t[(k, j)];
            }
            for k in 0..i {
                rhs -= t[(k, i)].conj() * x[(k, j)];
            }
            let pivot = t[(j, j)] + t[(i, i)].conj();
            sep = sep.min(pivot.norm());
            x[(i, j)] = rhs / pivot;
        }
    }
    if sep < 1e-12 * scale {
        return Err(Error::IllConditioned(sep / scale));
    }
    let h_c = &u * x * u.adjoint();
    let h = h_c.map(|c| c.re);
    let h = (&h + h.transpose()) * 0.5;
    if h.clone().cholesky().is_none() {
        return Err(Error::Numerical("Lyapunov solution is not positive definite".into()));
    }
    Ok(LyapunovSolution { h, kappa })
}
