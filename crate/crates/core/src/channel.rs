//! Binary-valued sensing: `S = 1{x_j + ξ <= B_ij}` with zero-mean Gaussian noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::topology::EdgeIndex;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Zero-mean Gaussian noise law with standard deviation `sigma`.
///
/// `sigma = 0` is the noiseless limit: the channel becomes a deterministic
/// comparator and the CDF a unit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config("noise.sigma", "must be finite and non-negative"));
        }
        Ok(Self { sigma })
    }

    pub fn from_variance(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::config("noise.variance", "must be finite and non-negative"));
        }
        Self::gaussian(variance.sqrt())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma == 0.0
    }

    /// `F(x) = P(ξ <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            return if x >= 0.0 { 1.0 } else { 0.0 };
        }
        0.5 * erfc(-x / (self.sigma * std::f64::consts::SQRT_2))
    }

    /// `f(x) = F'(x)`.
    pub fn pdf(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            return if x == 0.0 { f64::INFINITY } else { 0.0 };
        }
        let z = x / self.sigma;
        FRAC_1_SQRT_2PI / self.sigma * (-0.5 * z * z).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let z: f64 = rng.sample(StandardNormal);
        self.sigma * z
    }
}

/// One bit: `1` iff `x_j + ξ <= threshold`. `P(bit = 1) = F(threshold - x_j)`.
pub fn observe_bit<R: Rng + ?Sized>(x_j: f64, threshold: f64, noise: &NoiseModel, rng: &mut R) -> bool {
    x_j + noise.sample(rng) <= threshold
}

/// `f_B = f(B + W)`, the smallest noise density over the range estimates can reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationGain {
    pub value: f64,
    /// Set when the density underflowed to zero, which voids the convergence condition.
    pub unexcitable: bool,
}

pub fn excitation_gain(noise: &NoiseModel, max_threshold: f64, bound: f64) -> ExcitationGain {
    let value = noise.pdf(max_threshold.abs() + bound);
    ExcitationGain { value, unexcitable: value <= 0.0 }
}

/// Per-edge thresholds in edge-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorBank {
    thresholds: Vec<f64>,
}

impl SensorBank {
    pub fn uniform(idx: &EdgeIndex, threshold: f64) -> Result<Self> {
        Self::per_edge(idx, vec![threshold; idx.len()])
    }

    pub fn per_edge(idx: &EdgeIndex, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != idx.len() {
            return Err(Error::config(
                "noise.thresholds",
                format!("{} thresholds given for {} edges", thresholds.len(), idx.len()),
            ));
        }
        if let Some(p) = thresholds.iter().position(|b| !b.is_finite()) {
            return Err(Error::config(format!("noise.thresholds[{p}]"), "must be finite"));
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn threshold(&self, edge: usize) -> f64 {
        self.thresholds[edge]
    }

    /// `B = max |B_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.thresholds.iter().fold(0.0, |m, b| m.max(b.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cdf_symmetry_and_pdf_at_mode() {
        for sigma in [0.3, 1.0, 10f64.sqrt(), 10.0] {
            let n = NoiseModel::gaussian(sigma).unwrap();
            assert_eq!(n.cdf(0.0), 0.5);
            let g = excitation_gain(&n, 0.0, 0.0);
            assert!((g.value - 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_reference_values() {
        // Φ(1), Φ(-3), Φ(2.5) from tables, 1e-12 relative
        let n = NoiseModel::gaussian(1.0).unwrap();
        for (x, want) in [
            (1.0, 0.841_344_746_068_542_9),
            (-3.0, 0.001_349_898_031_630_094_6),
            (2.5, 0.993_790_334_674_223_8),
            (-8.0, 6.220_960_574_271_785e-16),
        ] {
            let got = n.cdf(x);
            assert!(((got - want) / want).abs() < 1e-12, "{x}: {got:e}");
        }
    }

    #[test]
    fn pdf_is_cdf_derivative() {
        let n = NoiseModel::from_variance(10.0).unwrap();
        let h = 1e-4;
        for x in [-9.0, -3.0, -0.5, 0.0, 1.0, 4.0, 12.0] {
            let fd = (n.cdf(x + h) - n.cdf(x - h)) / (2.0 * h);
            assert!((fd - n.pdf(x)).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn degenerate_channel_is_a_comparator() {
        let n = NoiseModel::gaussian(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(!observe_bit(3.0, 0.0, &n, &mut rng));
        assert!(observe_bit(-3.0, 0.0, &n, &mut rng));
    }

    #[test]
    fn bit_frequency_at_threshold_is_half() {
        let n = NoiseModel::gaussian(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let ones = (0..draws).filter(|_| observe_bit(1.5, 1.5, &n, &mut rng)).count();
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 3.0 * (0.25 / draws as f64).sqrt());
    }

    #[test]
    fn preset_excitation_gain_underflows() {
        // B = 0, W = 50: both readings of "N(0, 10)" give a density near zero
        let var10 = excitation_gain(&NoiseModel::from_variance(10.0).unwrap(), 0.0, 50.0);
        let sd10 = excitation_gain(&NoiseModel::gaussian(10.0).unwrap(), 0.0, 50.0);
        assert!(var10.value < 1e-50 && sd10.value < 1e-6);
        assert!(!var10.unexcitable);
        let far = excitation_gain(&NoiseModel::gaussian(1.0).unwrap(), 0.0, 100.0);
        assert!(far.unexcitable);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NoiseModel::gaussian(-1.0).is_err());
        assert!(NoiseModel::from_variance(f64::NAN).is_err());
    }
}
