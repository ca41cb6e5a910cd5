//! Convergence constants, conditions and bound recursions for both controllers.
//!
//! Every quantity here is derived from the topology, the reduction, the
//! Lyapunov solution `H` and the channel. Nothing is simulated.

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::channel::{excitation_gain, NoiseModel, SensorBank};
use crate::control::ReferenceGenerator;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, sym_max_eig};
use crate::spectral::{LyapunovSolution, SpectralReduction};
use crate::topology::Topology;

/// Tolerance for declaring `ε = λ_min(Q)`.
pub const RATE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub n_followers: usize,
    pub kappa: f64,
    /// `λ_max(H)`
    pub lambda_h: f64,
    /// `1 / λ_min(H)`
    pub h: f64,
    /// `λ_max((I−J)ᵀ φᵀ H φ (I−J))`
    pub lambda_phi: f64,
    /// `λ_max(W Wᵀ)`
    pub lambda_w: f64,
    /// `λ_max(ℒ ℒᵀ)`
    pub lambda_l: f64,
    /// `λ_max((I − WM/N)ᵀ (I − WM/N))`, bounded-reference gain only.
    pub lambda_m: Option<f64>,
    pub d_star: usize,
    /// Excitation gain used by the conditions (override if given).
    pub f_b: f64,
    /// `f(B + W)` from the configured noise.
    pub f_b_computed: f64,
    pub f_b_overridden: bool,
    /// `f_B = 0`: the convergence conditions say nothing.
    pub vacuous: bool,
    pub l1: f64,
    /// `ϵ >= |f(k)|`.
    pub epsilon_bound: f64,
}

/// Inputs that are not part of the graph/reduction.
#[derive(Debug, Clone)]
pub struct ChannelInputs<'a> {
    pub noise: &'a NoiseModel,
    pub sensors: &'a SensorBank,
    pub bound: f64,
    pub f_b_override: Option<f64>,
}

pub fn compute_constants(
    t: &Topology,
    sr: &SpectralReduction,
    lyap: &LyapunovSolution,
    channel: &ChannelInputs<'_>,
    n_gain: Option<f64>,
    reference: &ReferenceGenerator,
) -> Result<TheoryConstants> {
    let d_star = t.max_degree();
    if d_star == 0 {
        return Err(Error::config("topology", "no follower has a neighbor; constants are undefined"));
    }
    let idx = t.edge_index();
    let w = t.build_w(idx)?;
    let m = t.build_m(idx)?;
    let lap = t.laplacian();

    let lambda_h = lyap.lambda_max();
    let h = 1.0 / lyap.lambda_min();
    let proj = sr.disagreement_projector();
    let weighted = proj.transpose() * sr.phi.transpose() * &lyap.h * &sr.phi * &proj;
    let lambda_phi = sym_max_eig(&weighted);
    let lambda_w = sym_max_eig(&(&w * w.transpose()));
    let lambda_l = sym_max_eig(&(&lap * lap.transpose()));
    let lambda_m = n_gain.map(|n| {
        let e = idx.len();
        let r = DMatrix::identity(e, e) - (&w * &m) / n;
        sym_max_eig(&(r.transpose() * r))
    });

    let computed = excitation_gain(channel.noise, channel.sensors.max_abs(), channel.bound);
    let f_b = channel.f_b_override.unwrap_or(computed.value);
    if let Some(o) = channel.f_b_override {
        if !(o >= 0.0 && o.is_finite()) {
            return Err(Error::config("analysis.f_b_override", "must be finite and non-negative"));
        }
    }
    let l1 = l1_threshold(h, lambda_w, lambda_l, lambda_h, lambda_phi, d_star as f64);

    Ok(TheoryConstants {
        n_followers: t.n_followers(),
        kappa: lyap.kappa,
        lambda_h,
        h,
        lambda_phi,
        lambda_w,
        lambda_l,
        lambda_m,
        d_star,
        f_b,
        f_b_computed: computed.value,
        f_b_overridden: channel.f_b_override.is_some(),
        vacuous: f_b <= 0.0,
        l1,
        epsilon_bound: reference.increment_bound(),
    })
}

/// `l₁ = hλ_Wλ_L/(4λ_Hλ_φd*) + 4λ_φ²λ_H³d*² + d*`.
pub fn l1_threshold(h: f64, lambda_w: f64, lambda_l: f64, lambda_h: f64, lambda_phi: f64, d_star: f64) -> f64 {
    h * lambda_w * lambda_l / (4.0 * lambda_h * lambda_phi * d_star)
        + 4.0 * lambda_phi.powi(2) * lambda_h.powi(3) * d_star.powi(2)
        + d_star
}

/// Alternate threshold `h²λ_Wλ_L/(4λ_φ) + 4c₁²d*²/λ_φ³ + d*` with an auxiliary constant `c₁`.
pub fn l1_alternate(h: f64, lambda_w: f64, lambda_l: f64, lambda_phi: f64, c1: f64, d_star: f64) -> f64 {
    h * h * lambda_w * lambda_l / (4.0 * lambda_phi) + 4.0 * c1 * c1 * d_star * d_star / lambda_phi.powi(3) + d_star
}

/// Companion `l₂ = 8λ_φ²d*²/(c₁³ − 2λ_φ²) + c₁hλ_Wλ_L/(2λ_φ) + 2d* + 1`.
pub fn l2_alternate(h: f64, lambda_w: f64, lambda_l: f64, lambda_phi: f64, c1: f64, d_star: f64) -> f64 {
    8.0 * lambda_phi.powi(2) * d_star.powi(2) / (c1.powi(3) - 2.0 * lambda_phi.powi(2))
        + c1 * h * lambda_w * lambda_l / (2.0 * lambda_phi)
        + 2.0 * d_star
        + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrsCondition {
    /// `l₁ / f_B` (infinite when `f_B = 0`).
    pub threshold: f64,
    pub satisfied: bool,
    pub vacuous: bool,
}

/// `β > l₁ / f_B`.
pub fn crs_condition(tc: &TheoryConstants, beta: f64) -> CrsCondition {
    let threshold = if tc.f_b > 0.0 { tc.l1 / tc.f_b } else { f64::INFINITY };
    CrsCondition { threshold, satisfied: beta > threshold, vacuous: tc.vacuous }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "exponent", rename_all = "snake_case")]
pub enum RateClass {
    /// `O(1/k^{λ_min(Q)})`, when `ε > λ_min(Q)`.
    TopologyLimited(f64),
    /// `O(log k / k^ε)`, when `ε = λ_min(Q)`.
    LogBoundary(f64),
    /// `O(1/k^ε)`, when `ε < λ_min(Q)`.
    ReferenceLimited(f64),
    /// `λ_min(Q) <= 0`: the recursion gives no decay.
    NoGuarantee,
}

impl RateClass {
    /// Predicted decay exponent of the mean-square errors, if any.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            RateClass::TopologyLimited(e) | RateClass::LogBoundary(e) | RateClass::ReferenceLimited(e) => Some(e),
            RateClass::NoGuarantee => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub q: [[f64; 2]; 2],
    pub lambda_min_q: f64,
    pub rate_class: RateClass,
    pub beta_threshold: f64,
}

/// Smaller eigenvalue of the symmetric matrix `[[a, b], [b, c]]`.
pub fn lambda_min_sym2(a: f64, b: f64, c: f64) -> f64 {
    // (a+c)² − 4(ac − b²) rewritten as (a−c)² + 4b² to stay non-negative
    (a + c - ((a - c).powi(2) + 4.0 * b * b).sqrt()) / 2.0
}

/// The symmetric `Q` coupling the tracking and estimation recursions.
pub fn crs_q(tc: &TheoryConstants, beta: f64) -> [[f64; 2]; 2] {
    let d = tc.d_star as f64;
    let a = 1.0 / (2.0 * tc.lambda_h);
    let b = -2.0 * tc.lambda_h * tc.lambda_phi * d;
    let c = 2.0 * beta * tc.f_b - tc.h * tc.lambda_w * tc.lambda_l / (2.0 * tc.lambda_h * tc.lambda_phi * d) - 2.0 * d;
    [[a, b], [b, c]]
}

pub fn crs_rate(tc: &TheoryConstants, beta: f64, epsilon: f64) -> Result<RateReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config("analysis.epsilon", "rate classification requires 0 < ε < 1"));
    }
    let q = crs_q(tc, beta);
    let lambda_min_q = lambda_min_sym2(q[0][0], q[0][1], q[1][1]);
    let rate_class = classify_rate(lambda_min_q, epsilon);
    Ok(RateReport { q, lambda_min_q, rate_class, beta_threshold: crs_condition(tc, beta).threshold })
}

pub fn classify_rate(lambda_min_q: f64, epsilon: f64) -> RateClass {
    if lambda_min_q <= 0.0 {
        RateClass::NoGuarantee
    } else if (epsilon - lambda_min_q).abs() <= RATE_TIE_TOL {
        RateClass::LogBoundary(epsilon)
    } else if epsilon > lambda_min_q {
        RateClass::TopologyLimited(lambda_min_q)
    } else {
        RateClass::ReferenceLimited(epsilon)
    }
}

/// Entries `a, b, c, d` of the bounded-reference recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrsCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BrsCoefficients {
    pub fn from_constants(tc: &TheoryConstants, n_gain: f64) -> Result<Self> {
        let lambda_m = tc
            .lambda_m
            .ok_or_else(|| Error::config("control.N", "λ_M needs the constant gain N"))?;
        let n2 = n_gain * n_gain;
        Ok(Self {
            a: 3.0 * (1.0 - 1.0 / (n_gain * tc.lambda_h)),
            b: 3.0 * tc.lambda_phi * tc.d_star as f64 / n2,
            c: 3.0 * tc.lambda_w * tc.lambda_l * tc.h / n2,
            d: 3.0 * lambda_m,
        })
    }
}

/// Why the bounded-reference condition fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasibility {
    /// `1 − a² − b² <= 0`: no `β` works.
    NumeratorNonPositive,
    /// `c² + d² − (ad − bc)² <= 0`.
    DenominatorNonPositive,
    /// The condition is well defined but `β` violates it.
    BetaOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrsBound {
    pub coefficients: BrsCoefficients,
    pub q: [[f64; 2]; 2],
    pub d_vec: [f64; 2],
    pub norm_q: f64,
    pub norm_d: f64,
    /// `(1 − βf_B/2)²`
    pub condition_lhs: f64,
    /// `(1 − a² − b²) / (c² + d² − (ad − bc)²)`
    pub condition_rhs: f64,
    pub feasible: bool,
    pub reason_code: Option<Infeasibility>,
    pub reason: Option<String>,
    /// `‖D‖ / (1 − ‖Q‖)`, only when `‖Q‖ < 1`.
    pub steady_bound: Option<f64>,
}

pub fn brs_bound(tc: &TheoryConstants, beta: f64, n_gain: f64) -> Result<BrsBound> {
    let floor = 2.0 * tc.lambda_h * tc.lambda_l;
    if !(n_gain > floor) {
        return Err(Error::config("control.N", format!("N = {n_gain} must exceed 2·λ_H·λ_L = {floor:.6}")));
    }
    let coeffs = BrsCoefficients::from_constants(tc, n_gain)?;
    let d0 = 3.0 * tc.lambda_phi * tc.epsilon_bound.powi(2);
    let forcing_tail = tc.n_followers as f64 * tc.d_star as f64 * beta * beta / 4.0;
    Ok(brs_bound_from(coeffs, beta * tc.f_b, d0, 3.0 * tc.lambda_w * tc.epsilon_bound.powi(2), forcing_tail))
}

/// Bound from explicit coefficients. `D = (d0, (1 − βf_B/2)·d1 + tail)`.
pub fn brs_bound_from(coefficients: BrsCoefficients, beta_fb: f64, d0: f64, d1: f64, tail: f64) -> BrsBound {
    let BrsCoefficients { a, b, c, d } = coefficients;
    let s = 1.0 - beta_fb / 2.0;
    let q = [[a, b], [s * c, s * d]];
    let d_vec = [d0, s * d1 + tail];
    let qm = DMatrix::from_row_slice(2, 2, &[q[0][0], q[0][1], q[1][0], q[1][1]]);
    let norm_q = spectral_norm(&qm);
    let norm_d = Vector2::new(d_vec[0], d_vec[1]).norm();

    let numerator = 1.0 - a * a - b * b;
    let denominator = c * c + d * d - (a * d - b * c).powi(2);
    let condition_lhs = s * s;
    let condition_rhs = numerator / denominator;
    let (reason_code, reason) = if numerator <= 0.0 {
        (
            Some(Infeasibility::NumeratorNonPositive),
            Some(format!("1 − a² − b² = {numerator:.6e} <= 0 (a = {a:.6}); no β satisfies the condition")),
        )
    } else if denominator <= 0.0 {
        (
            Some(Infeasibility::DenominatorNonPositive),
            Some(format!("c² + d² − (ad − bc)² = {denominator:.6e} <= 0; condition undefined")),
        )
    } else if condition_lhs < condition_rhs {
        (None, None)
    } else {
        (
            Some(Infeasibility::BetaOutOfRange),
            Some(format!("(1 − βf_B/2)² = {condition_lhs:.6e} >= {condition_rhs:.6e}")),
        )
    };
    let feasible = reason_code.is_none();
    let steady_bound = (norm_q < 1.0).then(|| norm_d / (1.0 - norm_q));
    BrsBound {
        coefficients,
        q,
        d_vec,
        norm_q,
        norm_d,
        condition_lhs,
        condition_rhs,
        feasible,
        reason_code,
        reason,
        steady_bound,
    }
}

/// Multiplicative constants standing in for the unstated `O(f(k−1))` and `O(1/k²)` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeParams {
    pub c_f: f64,
    pub c_k2: f64,
    pub l1_0: f64,
    pub l2_0: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self { c_f: 1.0, c_k2: 1.0, l1_0: 0.0, l2_0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub k: Vec<u64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

/// Iterates the coupled decaying-gain upper-bound recursions up to `horizon`.
///
/// Iteration starts at the first `k` where both contraction factors lie in
/// `[0, 1]`; values before that are held at the initial ones. Shape diagnostic only.
pub fn crs_envelope(
    tc: &TheoryConstants,
    beta: f64,
    reference: &ReferenceGenerator,
    params: EnvelopeParams,
    horizon: u64,
) -> Envelope {
    let d = tc.d_star as f64;
    let alpha = 2.0 * tc.lambda_h * tc.lambda_phi * d / tc.h;
    let r1 = 1.0 / (2.0 * tc.lambda_h);
    let r2 = 2.0 * beta * tc.f_b - tc.lambda_w * tc.lambda_l / alpha - 2.0 * d;
    let start = r1.max(r2).max(1.0).ceil() as u64 + 1;

    let mut env = Envelope { k: Vec::with_capacity(horizon as usize), l1: Vec::new(), l2: Vec::new() };
    let (mut l1, mut l2) = (params.l1_0, params.l2_0);
    for k in 1..=horizon {
        if k >= start {
            let kf = k as f64;
            let forcing = params.c_f * reference.increment(k - 1).abs() + params.c_k2 / (kf * kf);
            let n1 = (1.0 - r1 / kf) * l1 + 2.0 * tc.lambda_h * tc.lambda_phi * d / kf * l2 + forcing;
            let n2 = (1.0 - r2 / kf) * l2 + alpha * tc.h / kf * l1 + forcing;
            l1 = n1;
            l2 = n2;
        }
        env.k.push(k);
        env.l1.push(l1);
        env.l2.push(l2);
    }
    env
}

/// Iterates `Z(k) = Q Z(k−1) + D` for the bounded-reference recursions.
pub fn brs_envelope(bound: &BrsBound, z0: [f64; 2], horizon: u64) -> Envelope {
    let q = bound.q;
    let mut z = z0;
    let mut env = Envelope { k: Vec::with_capacity(horizon as usize), l1: Vec::new(), l2: Vec::new() };
    for k in 1..=horizon {
        z = [
            q[0][0] * z[0] + q[0][1] * z[1] + bound.d_vec[0],
            q[1][0] * z[0] + q[1][1] * z[1] + bound.d_vec[1],
        ];
        env.k.push(k);
        env.l1.push(z[0]);
        env.l2.push(z[1]);
    }
    env
}
