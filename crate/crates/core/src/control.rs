//! Tracking controllers and leader reference generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "controller", rename_all = "snake_case")]
pub enum GainPolicy {
    /// Gain `1/(k+1)` with estimator step `β/k`.
    Crs,
    /// Gain `1/N` with constant estimator step `β`.
    Brs {
        #[serde(rename = "N")]
        n: f64,
    },
}

impl GainPolicy {
    pub fn gain(&self, k: u64) -> f64 {
        match *self {
            GainPolicy::Crs => 1.0 / (k as f64 + 1.0),
            GainPolicy::Brs { n } => 1.0 / n,
        }
    }

    /// Requires `N > 2 λ_H λ_L` for the bounded-reference variant.
    pub fn validate(&self, lambda_h: f64, lambda_l: f64) -> Result<()> {
        if let GainPolicy::Brs { n } = *self {
            let floor = 2.0 * lambda_h * lambda_l;
            if !(n > floor) {
                return Err(Error::config(
                    "control.N",
                    format!("N = {n} must exceed 2·λ_H·λ_L = {floor:.6}"),
                ));
            }
        }
        Ok(())
    }
}

/// `-gain · Σ_j a_ij (x_i − x̂_ij)` over follower `i`'s neighbor estimates.
fn consensus_input(x_i: f64, estimates: &[f64], gain: f64) -> f64 {
    -gain * estimates.iter().map(|e| x_i - e).sum::<f64>()
}

/// `u_i(k) = −(1/(k+1)) Σ_j a_ij (x_i − x̂_ij)`.
///
/// `estimates` are follower `i`'s neighbor estimates in edge-index order.
pub fn crs_control(i: usize, x_i: f64, estimates: &[f64], k: u64, t: &Topology) -> f64 {
    debug_assert_eq!(estimates.len(), t.degree(i));
    consensus_input(x_i, estimates, GainPolicy::Crs.gain(k))
}

/// `u_i(k) = −(1/N) Σ_j a_ij (x_i − x̂_ij)`.
pub fn brs_control(i: usize, x_i: f64, estimates: &[f64], n: f64, t: &Topology) -> f64 {
    debug_assert_eq!(estimates.len(), t.degree(i));
    consensus_input(x_i, estimates, 1.0 / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceGenerator {
    /// `f(k) = 0`.
    Constant,
    /// `f(k) = 1/k^{1+ε}`, `0 < ε < 1`.
    PowerLaw { epsilon: f64 },
    /// `f(k) = 1/k²`.
    Summable,
    /// Leader follows `A sin(ω k)`; `f(k) = A sin(ω(k+1)) − A sin(ωk)`.
    Sinusoid { amplitude: f64, omega: f64 },
    /// Recorded leader states `values[k-1]` for `k = 1, 2, ...`; increments by differencing,
    /// held constant past the end of the table.
    Table { values: Vec<f64> },
}

impl ReferenceGenerator {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceGenerator::PowerLaw { epsilon } if !(*epsilon > 0.0 && *epsilon < 1.0) => {
                Err(Error::config("reference.epsilon", "power-law exponent requires 0 < ε < 1"))
            }
            ReferenceGenerator::Sinusoid { amplitude, omega }
                if !(amplitude.is_finite() && omega.is_finite() && *amplitude >= 0.0) =>
            {
                Err(Error::config("reference", "sinusoid needs finite amplitude >= 0 and finite omega"))
            }
            ReferenceGenerator::Table { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(Error::config("reference.values", "table entries must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Leader increment applied at iteration `k >= 1`.
    pub fn increment(&self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            ReferenceGenerator::Constant => 0.0,
            ReferenceGenerator::PowerLaw { epsilon } => kf.powf(-(1.0 + epsilon)),
            ReferenceGenerator::Summable => 1.0 / (kf * kf),
            ReferenceGenerator::Sinusoid { amplitude, omega } => {
                amplitude * ((omega * (kf + 1.0)).sin() - (omega * kf).sin())
            }
            ReferenceGenerator::Table { values } => {
                let k = k as usize;
                if k == 0 || k >= values.len() {
                    0.0
                } else {
                    values[k] - values[k - 1]
                }
            }
        }
    }

    /// Leader state that iteration `k = 1` observes, when the generator fixes it.
    pub fn initial_state(&self) -> Option<f64> {
        match self {
            ReferenceGenerator::Sinusoid { amplitude, omega } => Some(amplitude * omega.sin()),
            ReferenceGenerator::Table { values } => values.first().copied(),
            _ => None,
        }
    }

    /// Uniform bound `ϵ >= |f(k)|`.
    pub fn increment_bound(&self) -> f64 {
        match self {
            ReferenceGenerator::Constant => 0.0,
            ReferenceGenerator::PowerLaw { .. } | ReferenceGenerator::Summable => 1.0,
            ReferenceGenerator::Sinusoid { amplitude, omega } => amplitude * omega.abs(),
            ReferenceGenerator::Table { values } => {
                values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
            }
        }
    }

    /// Rate exponent `ε` when the increments decay as `1/k^{1+ε}`.
    pub fn decay_exponent(&self) -> Option<f64> {
        match self {
            ReferenceGenerator::PowerLaw { epsilon } => Some(*epsilon),
            ReferenceGenerator::Summable => Some(1.0),
            _ => None,
        }
    }
}

/// `(x_{n+1}(k+1), f(k))`.
pub fn leader_step(gen: &ReferenceGenerator, x_leader: f64, k: u64) -> (f64, f64) {
    let f = gen.increment(k);
    (x_leader + f, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> Topology {
        Topology::from_neighbor_lists(&[vec![1, 2], vec![2]]).unwrap()
    }

    #[test]
    fn controls_vanish_on_perfect_agreement() {
        let t = topo();
        assert_eq!(crs_control(0, 4.0, &[4.0, 4.0], 7, &t), 0.0);
        assert_eq!(brs_control(0, 4.0, &[4.0, 4.0], 10.0, &t), 0.0);
    }

    #[test]
    fn control_arithmetic() {
        let t = topo();
        assert_eq!(crs_control(1, 10.0, &[0.0], 0, &t), -10.0);
        // deviations x_i − x̂ = (4, −2)
        let u = brs_control(0, 1.0, &[-3.0, 3.0], 10.0, &t);
        assert!((u - (-0.2)).abs() < 1e-15);
    }

    #[test]
    fn gain_policy_floor() {
        assert!(GainPolicy::Brs { n: 10.0 }.validate(2.0, 3.0).is_err());
        assert!(GainPolicy::Brs { n: 12.5 }.validate(2.0, 3.0).is_ok());
        assert!(GainPolicy::Crs.validate(2.0, 3.0).is_ok());
    }

    #[test]
    fn constant_leader_is_fixed() {
        let g = ReferenceGenerator::Constant;
        let mut x = 3.0;
        for k in 1..100 {
            x = leader_step(&g, x, k).0;
        }
        assert_eq!(x, 3.0);
    }

    #[test]
    fn summable_increments_telescope() {
        let g = ReferenceGenerator::Summable;
        let x1 = 15.0;
        let mut x = x1;
        let mut sum = 0.0;
        for k in 1..=1000 {
            let (next, f) = leader_step(&g, x, k);
            sum += f;
            x = next;
            assert!((sum - (x - x1)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_law_leader_approaches_zeta() {
        // ζ(1.5) = 2.612375348685488
        let g = ReferenceGenerator::PowerLaw { epsilon: 0.5 };
        let mut x = 0.0;
        for k in 1..=1_000_000 {
            x = leader_step(&g, x, k).0;
        }
        // tail Σ_{k>K} k^{-1.5} ≈ 2/√K
        let oracle: f64 = (1..=1_000_000u64).map(|k| (k as f64).powf(-1.5)).sum();
        assert!((x - oracle).abs() < 1e-9);
        assert!((x + 2.0 / 1000.0 - 2.612_375_348_685_488).abs() < 1e-5);
    }

    #[test]
    fn sinusoid_stays_bounded() {
        let g = ReferenceGenerator::Sinusoid { amplitude: 10.0, omega: 0.02 };
        let mut x = g.initial_state().unwrap();
        for k in 1..20_000 {
            let (next, f) = leader_step(&g, x, k);
            assert!(f.abs() <= g.increment_bound() + 1e-12);
            x = next;
            assert!(x.abs() <= 10.0 + 1e-9);
            assert!((x - 10.0 * (0.02 * (k + 1) as f64).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn table_differences() {
        let g = ReferenceGenerator::Table { values: vec![1.0, 3.0, 2.0] };
        assert_eq!(g.increment(1), 2.0);
        assert_eq!(g.increment(2), -1.0);
        assert_eq!(g.increment(3), 0.0);
        assert_eq!(g.increment_bound(), 2.0);
        assert!(ReferenceGenerator::PowerLaw { epsilon: 1.0 }.validate().is_err());
    }
}
