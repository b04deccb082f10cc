//! Simulated coincidence counting and maximum-likelihood reconstruction.
//!
//! States leaving the memory are probed with the over-complete six-state
//! polarization basis {H, V, D, A, R, L} ↔ {|0⟩, |1⟩, |±⟩, |±y⟩}; each
//! analyzer setting projects onto one of the six states and coincidences
//! with the herald are counted for a stated integration time. Forward
//! simulation draws Poisson counts from the Born-rule rates; inverse
//! reconstruction maximizes the Poisson likelihood over physical states or
//! processes, with a linear-inversion estimate as the independent oracle
//! and Monte Carlo resampling for uncertainties.

pub mod forward;
pub mod linear;
pub mod mle;
pub mod uncertainty;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::linalg::CMatrix;
use crate::quantum::{DensityMatrix, ProcessMatrix, PureState};

pub use forward::{derive_seed, expected_counts, CountSampler, RateModel};
pub use linear::{linear_inversion_process, linear_inversion_state};
pub use mle::{mle_process_tomography, mle_state_tomography, MleOptions};
pub use uncertainty::{monte_carlo_uncertainty, MetricUncertainty, UncertaintyReport};

/// One of the six analyzer settings, named by its polarization token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    /// Horizontal, |0⟩.
    H,
    /// Vertical, |1⟩.
    V,
    /// Diagonal, |+⟩.
    D,
    /// Anti-diagonal, |−⟩.
    A,
    /// Right circular, |+y⟩ = (|0⟩ + i|1⟩)/√2.
    R,
    /// Left circular, |−y⟩ = (|0⟩ − i|1⟩)/√2.
    L,
}

/// The measurement basis a polarization setting belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    Z,
    X,
    Y,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    /// The pure state this setting projects onto.
    pub fn state(&self) -> PureState {
        match self {
            Polarization::H => PureState::zero(),
            Polarization::V => PureState::one(),
            Polarization::D => PureState::plus(),
            Polarization::A => PureState::minus(),
            Polarization::R => PureState::plus_y(),
            Polarization::L => PureState::minus_y(),
        }
    }

    /// The rank-1 projector onto `state()`.
    pub fn projector(&self) -> CMatrix {
        self.state().projector()
    }

    /// The orthogonal setting completing the projective pair.
    pub fn complement(&self) -> Polarization {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
            Polarization::D => Polarization::A,
            Polarization::A => Polarization::D,
            Polarization::R => Polarization::L,
            Polarization::L => Polarization::R,
        }
    }

    pub fn axis(&self) -> PauliAxis {
        match self {
            Polarization::H | Polarization::V => PauliAxis::Z,
            Polarization::D | Polarization::A => PauliAxis::X,
            Polarization::R | Polarization::L => PauliAxis::Y,
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::D => "D",
            Polarization::A => "A",
            Polarization::R => "R",
            Polarization::L => "L",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "H" => Ok(Polarization::H),
            "V" => Ok(Polarization::V),
            "D" => Ok(Polarization::D),
            "A" => Ok(Polarization::A),
            "R" => Ok(Polarization::R),
            "L" => Ok(Polarization::L),
            other => Err(Error::Domain(format!(
                "unknown polarization token {other:?}; expected one of H, V, D, A, R, L"
            ))),
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// One analyzer configuration at one storage time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    /// Analyzer on the signal arm.
    pub signal: Polarization,
    /// Analyzer on the herald arm; `None` for single-qubit measurements
    /// where the herald is detected without polarization analysis.
    pub herald: Option<Polarization>,
    pub storage_time_ps: f64,
    pub integration_s: f64,
}

impl MeasurementSetting {
    pub fn single(signal: Polarization, storage_time_ps: f64, integration_s: f64) -> Self {
        MeasurementSetting {
            signal,
            herald: None,
            storage_time_ps,
            integration_s,
        }
    }

    pub fn pair(
        signal: Polarization,
        herald: Polarization,
        storage_time_ps: f64,
        integration_s: f64,
    ) -> Self {
        MeasurementSetting {
            signal,
            herald: Some(herald),
            storage_time_ps,
            integration_s,
        }
    }

    /// Hilbert-space dimension this setting analyzes.
    pub fn dim(&self) -> usize {
        if self.herald.is_some() {
            4
        } else {
            2
        }
    }

    /// The projector measured by this setting (2×2 or 4×4).
    pub fn projector(&self) -> CMatrix {
        match self.herald {
            None => self.signal.projector(),
            Some(h) => self.signal.projector().kronecker(&h.projector()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.integration_s > 0.0) {
            return Err(Error::Domain(format!(
                "integration time must be positive, got {}",
                self.integration_s
            )));
        }
        if self.storage_time_ps < 0.0 {
            return Err(Error::Domain(format!(
                "storage time must be non-negative, got {}",
                self.storage_time_ps
            )));
        }
        Ok(())
    }
}

/// Counts observed (or simulated) for one measurement setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub setting: MeasurementSetting,
    pub counts: u64,
    /// Forward-model rate the counts were drawn from, when simulated.
    pub expected_rate_hz: Option<f64>,
}

impl CoincidenceRecord {
    pub fn new(setting: MeasurementSetting, counts: u64) -> Self {
        CoincidenceRecord {
            setting,
            counts,
            expected_rate_hz: None,
        }
    }
}

/// A reconstructed state or process with its likelihood and provenance.
#[derive(Debug, Clone)]
pub struct TomographyResult<T> {
    pub estimate: T,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Degenerate-data notes (e.g. all counts zero).
    pub warnings: Vec<String>,
    /// Filled by the caller after Monte Carlo resampling.
    pub uncertainty: Option<UncertaintyReport>,
}

/// Best iterate carried by a convergence-failure error.
#[derive(Debug, Clone)]
pub enum BestIterate {
    State(DensityMatrix),
    Process(ProcessMatrix),
    None,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg;

    #[test]
    fn projectors_are_rank_one_idempotent() {
        for pol in Polarization::ALL {
            let p = pol.projector();
            assert!((linalg::trace_re(&p) - 1.0).abs() < 1e-12, "{pol} trace");
            assert!((&p * &p - &p).norm() < 1e-12, "{pol} idempotence");
            assert!(linalg::hermiticity_error(&p) < 1e-15, "{pol} hermiticity");
        }
    }

    #[test]
    fn complements_are_orthogonal_and_complete() {
        for pol in Polarization::ALL {
            let p = pol.projector();
            let q = pol.complement().projector();
            assert!((&p * &q).norm() < 1e-12);
            let sum = &p + &q;
            let eye = CMatrix::from_diagonal_element(2, 2, num_complex::Complex64::new(1.0, 0.0));
            assert!((sum - eye).norm() < 1e-12);
        }
    }

    #[test]
    fn pair_setting_projects_in_dim_four() {
        let setting = MeasurementSetting::pair(Polarization::H, Polarization::H, 0.0, 1.0);
        assert_eq!(setting.dim(), 4);
        let p = setting.projector();
        assert!((linalg::trace_re(&p) - 1.0).abs() < 1e-12);
        assert!((&p * &p - &p).norm() < 1e-12);
    }

    #[test]
    fn token_round_trip() {
        for pol in Polarization::ALL {
            assert_eq!(Polarization::parse(pol.token()).unwrap(), pol);
        }
        assert!(Polarization::parse("Q").is_err());
    }

    #[test]
    fn setting_validation() {
        let mut s = MeasurementSetting::single(Polarization::H, 0.0, 1.0);
        assert!(s.validate().is_ok());
        s.integration_s = 0.0;
        assert!(s.validate().is_err());
        s.integration_s = 1.0;
        s.storage_time_ps = -1.0;
        assert!(s.validate().is_err());
    }
}
