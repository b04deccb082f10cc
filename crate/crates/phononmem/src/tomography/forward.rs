//! Forward model: Born-rule expected counts and Poisson count simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::MeasurementSetting;
use crate::error::{Error, Result};
use crate::quantum::DensityMatrix;

/// Rate calibration linking Born probabilities to detected rates.
///
/// `pair_rate_hz` is the total coincidence rate summed over any complete
/// projective decomposition, so a setting with projector Π detects
/// `pair_rate_hz · tr(Π ρ)` plus the accidental floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub pair_rate_hz: f64,
    pub accidental_hz: f64,
}

impl RateModel {
    pub fn new(pair_rate_hz: f64) -> Self {
        RateModel {
            pair_rate_hz,
            accidental_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pair_rate_hz < 0.0 || self.accidental_hz < 0.0 {
            return Err(Error::Domain("rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Expected counts for one setting:
/// integration × (pair_rate × tr(Π ρ) + accidental floor).
pub fn expected_counts(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
    rates: &RateModel,
) -> Result<f64> {
    setting.validate()?;
    rates.validate()?;
    if rho.dim() != setting.dim() {
        return Err(Error::InvalidDimension(format!(
            "state dim {} does not match setting dim {}",
            rho.dim(),
            setting.dim()
        )));
    }
    let born = rho.expectation(&setting.projector()).max(0.0);
    Ok(setting.integration_s * (rates.pair_rate_hz * born + rates.accidental_hz))
}

/// Deterministic Poisson count source.
///
/// Fixed seed gives an identical draw sequence; independent substreams are
/// derived with [`derive_seed`] so per-τ, per-setting and per-resample
/// streams never overlap.
pub struct CountSampler {
    rng: ChaCha8Rng,
}

impl CountSampler {
    pub fn from_seed(seed: u64) -> Self {
        CountSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Draw Poisson(expected). Zero expectation draws zero exactly.
    pub fn sample(&mut self, expected: f64) -> Result<u64> {
        if !expected.is_finite() || expected < 0.0 {
            return Err(Error::Domain(format!(
                "expected counts must be finite and non-negative, got {expected}"
            )));
        }
        if expected == 0.0 {
            return Ok(0);
        }
        let dist = Poisson::new(expected)
            .map_err(|e| Error::Domain(format!("invalid Poisson mean {expected}: {e}")))?;
        Ok(dist.sample(&mut self.rng).round() as u64)
    }
}

/// Derive a child seed from a master seed and a label path.
///
/// SplitMix64 finalizer applied per label; the same (master, labels) pair
/// always yields the same child, and distinct label paths give independent
/// streams. Storage times are labelled by their bit pattern so results do
/// not depend on grid ordering.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut state = splitmix(master);
    for &label in labels {
        state = splitmix(state ^ splitmix(label));
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::PureState;
    use crate::tomography::Polarization;

    #[test]
    fn expected_counts_aligned_projector() {
        let rho = PureState::zero().density();
        let setting = MeasurementSetting::single(Polarization::H, 0.0, 1.0);
        let n = expected_counts(&rho, &setting, &RateModel::new(100.0)).unwrap();
        assert!((n - 100.0).abs() < 1e-12);
    }

    #[test]
    fn expected_counts_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        for pol in Polarization::ALL {
            let setting = MeasurementSetting::single(pol, 0.0, 1.0);
            let n = expected_counts(&rho, &setting, &RateModel::new(100.0)).unwrap();
            assert!((n - 50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_counts_werner_state_settings() {
        // rate normalized so the |00⟩ setting detects 2.3 Hz at p = 0.416;
        // tr(|00⟩⟨00| ρ_W) = p/2 + (1−p)/4
        let rho = crate::memory::werner_state(0.416).unwrap();
        let setting = MeasurementSetting::pair(Polarization::H, Polarization::H, 0.0, 1.0);
        let born = 0.416 / 2.0 + (1.0 - 0.416) / 4.0;
        let rate = 2.3 / born;
        let n = expected_counts(&rho, &setting, &RateModel::new(rate)).unwrap();
        assert!((n - 2.3).abs() < 1e-12);
        // an orthogonal product setting sees only the depolarized part
        let off = MeasurementSetting::pair(Polarization::H, Polarization::V, 0.0, 1.0);
        let n_off = expected_counts(&rho, &off, &RateModel::new(rate)).unwrap();
        assert!((n_off - rate * (1.0 - 0.416) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn born_rule_pair_completeness() {
        // counts over {Π, 1−Π} sum to rate × time
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rho = crate::quantum::random::random_density_matrix(2, &mut rng);
        let rates = RateModel::new(123.4);
        for pol in Polarization::ALL {
            let a = MeasurementSetting::single(pol, 0.0, 2.5);
            let b = MeasurementSetting::single(pol.complement(), 0.0, 2.5);
            let total = expected_counts(&rho, &a, &rates).unwrap()
                + expected_counts(&rho, &b, &rates).unwrap();
            assert!((total - 123.4 * 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn expected_counts_dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        let setting = MeasurementSetting::single(Polarization::H, 0.0, 1.0);
        assert!(expected_counts(&rho, &setting, &RateModel::new(1.0)).is_err());
    }

    #[test]
    fn sampler_zero_mean_draws_zero() {
        let mut sampler = CountSampler::from_seed(1);
        for _ in 0..100 {
            assert_eq!(sampler.sample(0.0).unwrap(), 0);
        }
    }

    #[test]
    fn sampler_rejects_negative_mean() {
        let mut sampler = CountSampler::from_seed(1);
        assert!(sampler.sample(-1.0).is_err());
        assert!(sampler.sample(f64::NAN).is_err());
    }

    #[test]
    fn sampler_is_deterministic() {
        let draws = |seed: u64| -> Vec<u64> {
            let mut s = CountSampler::from_seed(seed);
            (0..20).map(|_| s.sample(13.7).unwrap()).collect()
        };
        assert_eq!(draws(42), draws(42));
        assert_ne!(draws(42), draws(43));
    }

    #[test]
    fn sampler_mean_matches_poisson() {
        // mean of 1000 draws at λ = 1e6 within 3σ/√1000
        let mut sampler = CountSampler::from_seed(7);
        let n = 1000;
        let lambda = 1e6;
        let mean: f64 = (0..n)
            .map(|_| sampler.sample(lambda).unwrap() as f64)
            .sum::<f64>()
            / n as f64;
        let bound = 3.0 * lambda.sqrt() / (n as f64).sqrt();
        assert!(
            (mean - lambda).abs() < bound,
            "mean {mean} deviates from {lambda} by more than {bound}"
        );
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(1, &[2, 3]);
        assert_eq!(a, derive_seed(1, &[2, 3]));
        assert_ne!(a, derive_seed(1, &[3, 2]));
        assert_ne!(a, derive_seed(2, &[2, 3]));
        assert_ne!(a, derive_seed(1, &[2]));
    }
}
