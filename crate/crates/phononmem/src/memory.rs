//! Phenomenological model of the optical-phonon Raman memory.
//!
//! The memory is a time-dependent depolarizing channel: a stored qubit is
//! retrieved intact with probability p(τ) and replaced by the maximally
//! mixed state otherwise,
//!
//! ```text
//! ρ_out = p(τ) ρ_in + [1 − p(τ)] 𝟙/2,
//! p(τ)  = S₀ e^{−τ/τ_m} / [N_c + (S₀ + N₀) e^{−τ/τ_m}],
//! ```
//!
//! where S₀ is the retrieved-signal rate at zero delay, N_c the constant
//! noise rate, N₀ the amplitude of the delay-dependent noise and τ_m the
//! phonon lifetime. Detected rates use a different convention than p(τ):
//! polarization analysis passes only half of the unpolarized noise, so the
//! aligned-analyzer rate is S₀e^{−τ/τ_m} + [N_c + N₀e^{−τ/τ_m}]/2. Both
//! conventions are kept side by side and never mixed: `retrieval_probability`
//! uses the unhalved rates, `detected_rate` applies the halving.
//!
//! Noise decomposes into a thermal part N_th = N_c − N₀ (read pulse
//! scattering off thermally populated phonons, suppressed on cooling by the
//! Bose occupation) and a four-wave-mixing part N_4WM = N₀ whose
//! delay-dependent rate is N_4WM(1 + e^{−τ/τ_m}). Signal and 4WM scale
//! quadratically with the control-pulse energies, thermal noise linearly
//! with the read pulse only; `scale_params` and `predict_cooling` build the
//! corresponding what-if parameter sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, ProcessMatrix, PureState};


/// Planck constant, J·s (exact SI value).
pub const PLANCK_J_S: f64 = 6.62607015e-34;
/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// The phenomenological parameter set of one memory configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Retrieved-signal coincidence rate at τ = 0, Hz.
    #[serde(rename = "S0_hz")]
    pub s0_hz: f64,
    /// Constant noise rate, Hz.
    #[serde(rename = "Nc_hz")]
    pub nc_hz: f64,
    /// Amplitude of the delay-dependent noise rate, Hz.
    #[serde(rename = "N0_hz")]
    pub n0_hz: f64,
    /// Memory lifetime, ps.
    pub tau_m_ps: f64,
    /// Write efficiency (fraction).
    pub eta_w: f64,
    /// Retrieval efficiency (fraction).
    pub eta_r: f64,
    /// Write pulse energy, nJ.
    #[serde(rename = "E_w_nj")]
    pub e_w_nj: f64,
    /// Read pulse energy, nJ.
    #[serde(rename = "E_r_nj")]
    pub e_r_nj: f64,
    /// Crystal temperature, K.
    pub temperature_k: f64,
    /// Phonon frequency, THz.
    pub phonon_thz: f64,
}

impl MemoryParams {
    /// Parameters of the qubit-storage dataset: 4.4 nJ pulses at room
    /// temperature, S₀ = 6.2 Hz, N_c = 3.737 Hz, N₀ = 0.464 Hz, τ_m = 3.5 ps,
    /// η_w = 6.2% and η_m = 0.76% (η_r = η_m/η_w).
    pub fn qubit_storage() -> Self {
        MemoryParams {
            s0_hz: 6.2,
            nc_hz: 3.737,
            n0_hz: 0.464,
            tau_m_ps: 3.5,
            eta_w: 0.062,
            eta_r: 0.0076 / 0.062,
            e_w_nj: 4.4,
            e_r_nj: 4.4,
            temperature_k: 295.0,
            phonon_thz: 40.0,
        }
    }

    /// Parameters of the entangled-storage dataset: S₀ = 1.39 Hz,
    /// N_c = 1.41 Hz, N₀ = 0.46 Hz, same lifetime, efficiencies, pulse
    /// energies and temperature as the qubit dataset.
    pub fn entangled_storage() -> Self {
        MemoryParams {
            s0_hz: 1.39,
            nc_hz: 1.41,
            n0_hz: 0.46,
            ..Self::qubit_storage()
        }
    }

    /// Derived memory efficiency η_m = η_w · η_r.
    pub fn eta_m(&self) -> f64 {
        self.eta_w * self.eta_r
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0_hz >= 0.0 && self.nc_hz >= 0.0 && self.n0_hz >= 0.0) {
            return Err(Error::Domain("rates must be non-negative".into()));
        }
        if !(self.tau_m_ps > 0.0) {
            return Err(Error::Domain("tau_m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eta_w) || !(0.0..=1.0).contains(&self.eta_r) {
            return Err(Error::Domain("efficiencies must lie in [0, 1]".into()));
        }
        if !(self.eta_m() >= 0.0 && self.eta_m() <= 1.0) {
            return Err(Error::Domain("memory efficiency must lie in [0, 1]".into()));
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::Domain("temperature must be positive".into()));
        }
        if !(self.phonon_thz > 0.0) {
            return Err(Error::Domain("phonon frequency must be positive".into()));
        }
        Ok(())
    }
}

/// Thermal vs four-wave-mixing split of the measured noise rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBreakdown {
    /// Thermal noise rate N_th = N_c − N₀, Hz; constant in delay.
    pub n_th_hz: f64,
    /// Four-wave-mixing amplitude N_4WM = N₀, Hz.
    pub n_4wm_hz: f64,
}

impl NoiseBreakdown {
    /// Delay-dependent four-wave-mixing rate N_4WM (1 + e^{−τ/τ_m}), Hz.
    pub fn four_wave_mixing_rate(&self, tau_ps: f64, tau_m_ps: f64) -> f64 {
        self.n_4wm_hz * (1.0 + (-tau_ps / tau_m_ps).exp())
    }

    /// Thermal rate; constant in delay.
    pub fn thermal_rate(&self) -> f64 {
        self.n_th_hz
    }

    /// Reassemble (N_c, N₀) from the decomposition.
    pub fn recompose(&self) -> (f64, f64) {
        (self.n_th_hz + self.n_4wm_hz, self.n_4wm_hz)
    }

    /// Fraction of the total noise at τ = 0 that is thermal:
    /// N_th / (N_th + 2 N_4WM).
    pub fn thermal_fraction_at_zero(&self) -> f64 {
        let total = self.n_th_hz + 2.0 * self.n_4wm_hz;
        if total == 0.0 {
            0.0
        } else {
            self.n_th_hz / total
        }
    }
}

/// Probability that a photon retrieved after delay τ is stored signal
/// rather than noise.
pub fn retrieval_probability(params: &MemoryParams, tau_ps: f64) -> Result<f64> {
    params.validate()?;
    if tau_ps < 0.0 {
        return Err(Error::Domain(format!(
            "storage time must be non-negative, got {tau_ps}"
        )));
    }
    // Degenerate noiseless and signal-free limits first.
    if params.s0_hz == 0.0 {
        return Ok(0.0);
    }
    if params.nc_hz == 0.0 && params.n0_hz == 0.0 {
        return Ok(1.0);
    }
    let decay = (-tau_ps / params.tau_m_ps).exp();
    let p = params.s0_hz * decay / (params.nc_hz + (params.s0_hz + params.n0_hz) * decay);
    Ok(p.clamp(0.0, 1.0))
}

/// The memory channel at retrieval probability p: χ diagonal in the Pauli
/// basis with entries {(1+3p)/4, (1−p)/4, (1−p)/4, (1−p)/4}.
pub fn storage_channel(p: f64) -> Result<ProcessMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "retrieval probability must lie in [0, 1], got {p}"
        )));
    }
    ProcessMatrix::from_diagonal([
        (1.0 + 3.0 * p) / 4.0,
        (1.0 - p) / 4.0,
        (1.0 - p) / 4.0,
        (1.0 - p) / 4.0,
    ])
}

/// Send a qubit state through the memory: p(τ) ρ + [1 − p(τ)] 𝟙/2.
pub fn apply_memory(rho_in: &DensityMatrix, params: &MemoryParams, tau_ps: f64) -> Result<DensityMatrix> {
    if rho_in.dim() != 2 {
        return Err(Error::InvalidDimension(format!(
            "apply_memory takes a qubit state, got dim {}",
            rho_in.dim()
        )));
    }
    let p = retrieval_probability(params, tau_ps)?;
    depolarize(rho_in, p)
}

/// p ρ + (1 − p) 𝟙/d for any supported dimension.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "mixing probability must lie in [0, 1], got {p}"
        )));
    }
    let dim = rho.dim();
    let mixed = DensityMatrix::maximally_mixed(dim)?;
    let mat = rho.matrix() * num_complex::Complex64::new(p, 0.0)
        + mixed.matrix() * num_complex::Complex64::new(1.0 - p, 0.0);
    DensityMatrix::new(mat)
}

/// The Werner state p|Φ⁺⟩⟨Φ⁺| + (1 − p) 𝟙₄/4 produced when the channel
/// acts on the signal half of |Φ⁺⟩.
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    depolarize(&PureState::phi_plus().density(), p)
}

/// Detected coincidence rate at the analyzer aligned with the input, Hz.
///
/// With a signal photon present this is S₀e^{−τ/τ_m} plus half of the
/// produced noise; with the input blocked only the halved noise remains.
pub fn detected_rate(params: &MemoryParams, tau_ps: f64, signal_present: bool) -> Result<f64> {
    params.validate()?;
    if tau_ps < 0.0 {
        return Err(Error::Domain(format!(
            "storage time must be non-negative, got {tau_ps}"
        )));
    }
    let decay = (-tau_ps / params.tau_m_ps).exp();
    let noise = (params.nc_hz + params.n0_hz * decay) / 2.0;
    Ok(if signal_present {
        params.s0_hz * decay + noise
    } else {
        noise
    })
}

/// Split the measured noise rates into thermal and four-wave-mixing parts.
pub fn noise_decompose(params: &MemoryParams) -> Result<NoiseBreakdown> {
    params.validate()?;
    if params.nc_hz < params.n0_hz {
        return Err(Error::InconsistentParameters(format!(
            "Nc = {} Hz is below N0 = {} Hz; thermal rate would be negative",
            params.nc_hz, params.n0_hz
        )));
    }
    Ok(NoiseBreakdown {
        n_th_hz: params.nc_hz - params.n0_hz,
        n_4wm_hz: params.n0_hz,
    })
}

/// Mean thermal occupation n̄ = 1/(e^{hν/kT} − 1) of a phonon mode at
/// frequency ν (THz) and temperature T (K).
pub fn bose_occupation(temperature_k: f64, phonon_thz: f64) -> Result<f64> {
    if temperature_k <= 0.0 {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature_k}"
        )));
    }
    if phonon_thz <= 0.0 {
        return Err(Error::Domain(format!(
            "phonon frequency must be positive, got {phonon_thz}"
        )));
    }
    let x = PLANCK_J_S * phonon_thz * 1e12 / (BOLTZMANN_J_PER_K * temperature_k);
    Ok(1.0 / x.exp_m1())
}

/// Pulse energies above which the quadratic scaling is unvalidated, nJ.
pub const SCALING_VALIDATED_MAX_NJ: f64 = 10.0;

/// A rescaled parameter set plus any validity warnings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaledParams {
    pub params: MemoryParams,
    pub warnings: Vec<String>,
}

/// Rescale the memory parameters to new pulse energies and temperature.
///
/// S₀, η_m and the four-wave-mixing rate scale with (E_w'·E_r')/(E_w·E_r);
/// thermal noise scales with E_r'/E_r times the Bose occupation ratio.
/// The noise rates are then recomposed as N_c' = N_th' + N_4WM' and
/// N₀' = N_4WM'. Energies above 10 nJ produce a warning, not an error.
pub fn scale_params(
    params: &MemoryParams,
    new_e_w_nj: f64,
    new_e_r_nj: f64,
    new_temperature_k: f64,
) -> Result<ScaledParams> {
    params.validate()?;
    if new_e_w_nj <= 0.0 || new_e_r_nj <= 0.0 {
        return Err(Error::Domain("pulse energies must be positive".into()));
    }
    if new_temperature_k <= 0.0 {
        return Err(Error::Domain("temperature must be positive".into()));
    }

    let mut warnings = Vec::new();
    for (label, energy) in [("write", new_e_w_nj), ("read", new_e_r_nj)] {
        if energy > SCALING_VALIDATED_MAX_NJ {
            warnings.push(format!(
                "{label} pulse energy {energy} nJ exceeds the validated range ({} nJ)",
                SCALING_VALIDATED_MAX_NJ
            ));
        }
    }

    let quad = (new_e_w_nj * new_e_r_nj) / (params.e_w_nj * params.e_r_nj);
    let read = new_e_r_nj / params.e_r_nj;
    let occupation = bose_occupation(new_temperature_k, params.phonon_thz)?
        / bose_occupation(params.temperature_k, params.phonon_thz)?;

    let breakdown = noise_decompose(params)?;
    let n_th = breakdown.n_th_hz * read * occupation;
    let n_4wm = breakdown.n_4wm_hz * quad;

    let scaled = MemoryParams {
        s0_hz: params.s0_hz * quad,
        nc_hz: n_th + n_4wm,
        n0_hz: n_4wm,
        eta_w: params.eta_w * (new_e_w_nj / params.e_w_nj),
        eta_r: params.eta_r * (new_e_r_nj / params.e_r_nj),
        e_w_nj: new_e_w_nj,
        e_r_nj: new_e_r_nj,
        temperature_k: new_temperature_k,
        ..params.clone()
    };
    scaled.validate()?;
    Ok(ScaledParams {
        params: scaled,
        warnings,
    })
}

/// Where (if anywhere) p(τ) falls to a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundCrossing {
    /// p(τ*) = threshold at this storage time, ps.
    At(f64),
    /// p never reaches the threshold (p(0) ≤ threshold, or no decay).
    Never,
}

impl BoundCrossing {
    pub fn time_ps(&self) -> Option<f64> {
        match self {
            BoundCrossing::At(t) => Some(*t),
            BoundCrossing::Never => None,
        }
    }
}

/// Storage time at which p(τ) crosses `threshold`, solved in closed form.
///
/// p(τ) = θ is linear in u = e^{−τ/τ_m}: u = θ N_c / [S₀ − θ(S₀ + N₀)],
/// so τ* = −τ_m ln u. Returns `Never` when p(0) ≤ θ or when p does not
/// decay (N_c = 0).
pub fn classical_bound_crossing(params: &MemoryParams, threshold: f64) -> Result<BoundCrossing> {
    params.validate()?;
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::Domain(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let p0 = retrieval_probability(params, 0.0)?;
    if p0 <= threshold {
        return Ok(BoundCrossing::Never);
    }
    if params.nc_hz == 0.0 {
        // p(τ) = S0/(S0 + N0), constant: never decays through the bound.
        return Ok(BoundCrossing::Never);
    }
    let denom = params.s0_hz - threshold * (params.s0_hz + params.n0_hz);
    debug_assert!(denom > 0.0, "p(0) > threshold guarantees a positive denominator");
    let u = threshold * params.nc_hz / denom;
    Ok(BoundCrossing::At(-params.tau_m_ps * u.ln()))
}

/// Classical memory bound on the retrieval probability: p > 1/3 is needed
/// to beat a measure-and-resend strategy (average fidelity 2/3).
pub const CLASSICAL_P_BOUND: f64 = 1.0 / 3.0;

/// Model predictions for a memory cooled (or heated) to a new temperature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoolingPrediction {
    pub params: MemoryParams,
    /// p(0) of the rescaled memory.
    pub p0: f64,
    /// Peak average fidelity (1 + p(0))/2.
    pub peak_average_fidelity: f64,
    /// Storage time over which the memory beats the classical bound, ps.
    pub classical_bound_crossing_ps: Option<f64>,
    /// Peak fidelity of the stored Werner state with |Φ⁺⟩: (1 + 3p(0))/4.
    pub werner_fidelity: f64,
    /// Storage time at which the Werner concurrence reaches zero, ps.
    pub concurrence_zero_crossing_ps: Option<f64>,
}

/// Predict the memory figures of merit at a new operating temperature.
///
/// Only the thermal noise changes, scaled by the Bose occupation ratio;
/// pulse energies stay fixed.
pub fn predict_cooling(params: &MemoryParams, new_temperature_k: f64) -> Result<CoolingPrediction> {
    let scaled = scale_params(params, params.e_w_nj, params.e_r_nj, new_temperature_k)?;
    let cooled = scaled.params;
    let p0 = retrieval_probability(&cooled, 0.0)?;
    let classical = classical_bound_crossing(&cooled, CLASSICAL_P_BOUND)?;
    Ok(CoolingPrediction {
        p0,
        peak_average_fidelity: (1.0 + p0) / 2.0,
        classical_bound_crossing_ps: classical.time_ps(),
        werner_fidelity: (1.0 + 3.0 * p0) / 4.0,
        // concurrence of a Werner state is positive exactly when p > 1/3
        concurrence_zero_crossing_ps: classical.time_ps(),
        params: cooled,
    })
}
