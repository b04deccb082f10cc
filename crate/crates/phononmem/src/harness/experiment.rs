//! End-to-end experiment drivers: simulate counts through the memory
//! channel, reconstruct, attach uncertainties, assemble reports.
//!
//! Determinism contract: every stochastic stage draws from a substream
//! derived from the master seed and the storage time's bit pattern, so
//! per-τ results are identical regardless of grid order or execution
//! schedule, and a fixed (config, seed) pair reproduces a run bit for bit.

use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode};
use super::report::{FitSection, LabeledFit, RunReport, TauMetrics};
use crate::analysis::fit::{fit_memory_rates, DecayPoint, RateFitMode};
use crate::analysis::{self, fit_exponential};
use crate::error::{Error, Result};
use crate::memory;
use crate::quantum::{apply_chi, apply_one_sided, DensityMatrix, PureState, Qubit};
use crate::tomography::{
    derive_seed, expected_counts, mle_process_tomography, mle_state_tomography,
    monte_carlo_uncertainty, CoincidenceRecord, CountSampler, MeasurementSetting, MleOptions,
    Polarization, RateModel,
};

/// Seed-stream labels; storage times are appended as bit patterns.
const STREAM_SIM: u64 = 1;
const STREAM_MC: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// A finished run: the report plus the raw counts it was built from, in
/// exportable form.
pub struct ExperimentOutput {
    pub report: RunReport,
    /// Records in the counts-file schema (signal-present data).
    pub counts: Vec<CoincidenceRecord>,
    /// Noise-only records (input blocked), for the rate-extraction fit.
    pub noise_counts: Vec<CoincidenceRecord>,
}

/// Total detected pair rate entering the analyzer at delay τ, Hz:
/// rate_scale × [S(τ) + N(τ)].
fn pair_rate_hz(config: &ExperimentConfig, tau_ps: f64) -> Result<f64> {
    let with_signal = memory::detected_rate(&config.memory, tau_ps, true)?;
    let noise_only = memory::detected_rate(&config.memory, tau_ps, false)?;
    Ok(config.counts.rate_scale * (with_signal + noise_only))
}

fn rate_model(config: &ExperimentConfig, tau_ps: f64) -> Result<RateModel> {
    Ok(RateModel {
        pair_rate_hz: pair_rate_hz(config, tau_ps)?,
        accidental_hz: config.counts.accidental_hz,
    })
}

/// The six preparation states of the over-complete basis, in fixed order.
pub fn tomography_inputs() -> Vec<PureState> {
    Polarization::ALL.iter().map(|p| p.state()).collect()
}

// ---------------------------------------------------------------------------
// qubit storage
// ---------------------------------------------------------------------------

/// Simulate the full 6-input × 6-analyzer process-tomography count set at
/// one storage time.
pub fn simulate_qubit_counts(
    config: &ExperimentConfig,
    tau_ps: f64,
) -> Result<Vec<Vec<CoincidenceRecord>>> {
    let p = memory::retrieval_probability(&config.memory, tau_ps)?;
    let chi = memory::storage_channel(p)?;
    let rates = rate_model(config, tau_ps)?;
    let mut sampler = CountSampler::from_seed(derive_seed(
        config.seed(),
        &[STREAM_SIM, tau_ps.to_bits()],
    ));

    let mut per_input = Vec::with_capacity(6);
    for input in tomography_inputs() {
        let rho_out = apply_chi(&chi, &input.density())?;
        let mut records = Vec::with_capacity(6);
        for analyzer in Polarization::ALL {
            let setting =
                MeasurementSetting::single(analyzer, tau_ps, config.counts.integration_s);
            let expected = expected_counts(&rho_out, &setting, &rates)?;
            let counts = sampler.sample(expected)?;
            records.push(CoincidenceRecord {
                setting,
                counts,
                expected_rate_hz: Some(expected / config.counts.integration_s),
            });
        }
        per_input.push(records);
    }
    Ok(per_input)
}

/// Noise-only record (input blocked) at one storage time and analyzer.
fn simulate_noise_record(
    config: &ExperimentConfig,
    tau_ps: f64,
    analyzer: Polarization,
) -> Result<CoincidenceRecord> {
    let rate = config.counts.rate_scale * memory::detected_rate(&config.memory, tau_ps, false)?
        + config.counts.accidental_hz;
    let expected = rate * config.counts.integration_s;
    let mut sampler = CountSampler::from_seed(derive_seed(
        config.seed(),
        &[STREAM_NOISE, tau_ps.to_bits()],
    ));
    let counts = sampler.sample(expected)?;
    Ok(CoincidenceRecord {
        setting: MeasurementSetting::single(analyzer, tau_ps, config.counts.integration_s),
        counts,
        expected_rate_hz: Some(rate),
    })
}

fn qubit_metrics_at(
    config: &ExperimentConfig,
    tau_ps: f64,
    per_input: &[Vec<CoincidenceRecord>],
) -> Result<TauMetrics> {
    let mut row = TauMetrics::model_only(tau_ps, &config.memory)?;
    let inputs = tomography_inputs();
    let opts = MleOptions {
        accidental_hz: config.counts.accidental_hz,
        ..MleOptions::default()
    };

    let recon = mle_process_tomography(&inputs, per_input, &opts)?;
    let identity = crate::quantum::ProcessMatrix::identity();
    row.f_proc = Some(analysis::process_fidelity(&recon.estimate, &identity)?);
    row.f_avg = Some(analysis::average_fidelity(&recon.estimate)?);

    if config.mc_resamples > 0 {
        let flat: Vec<CoincidenceRecord> = per_input.iter().flatten().cloned().collect();
        let mc_seed = derive_seed(config.seed(), &[STREAM_MC, tau_ps.to_bits()]);
        let inputs_mc = inputs.clone();
        let opts_mc = opts.clone();
        let uncertainty = monte_carlo_uncertainty(&flat, config.mc_resamples, mc_seed, |records| {
            let chunks: Vec<Vec<CoincidenceRecord>> =
                records.chunks(6).map(|c| c.to_vec()).collect();
            let recon = mle_process_tomography(&inputs_mc, &chunks, &opts_mc)?;
            let identity = crate::quantum::ProcessMatrix::identity();
            Ok(vec![
                (
                    "f_proc".to_string(),
                    analysis::process_fidelity(&recon.estimate, &identity)?,
                ),
                (
                    "f_avg".to_string(),
                    analysis::average_fidelity(&recon.estimate)?,
                ),
            ])
        })?;
        row.f_proc_err = uncertainty.std_dev("f_proc");
        row.f_avg_err = uncertainty.std_dev("f_avg");
        row.mc_failed_resamples = Some(uncertainty.failed_resamples);
    }
    Ok(row)
}

/// Simulated qubit-storage experiment: per τ, process tomography of the
/// memory channel, reported next to the model curves, plus the lifetime
/// fit of the aligned-analyzer rate.
pub fn run_qubit_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let fit_setting = config.fit.polarization()?;

    struct PerTau {
        row: TauMetrics,
        export: Vec<CoincidenceRecord>,
        noise: CoincidenceRecord,
        signal_point: DecayPoint,
        noise_point: DecayPoint,
    }

    let per_tau: Result<Vec<PerTau>> = config
        .tau_grid
        .par_iter()
        .map(|&tau| {
            let per_input = simulate_qubit_counts(config, tau)?;
            let row = qubit_metrics_at(config, tau, &per_input)?;
            let noise = simulate_noise_record(config, tau, fit_setting)?;

            // rate curve: the fit-setting input analyzed in the same basis
            let input_idx = Polarization::ALL
                .iter()
                .position(|&p| p == fit_setting)
                .expect("fit setting is one of the six");
            let aligned = &per_input[input_idx][input_idx];
            let signal_rate = aligned.counts as f64 / aligned.setting.integration_s;
            let noise_rate = noise.counts as f64 / noise.setting.integration_s;

            Ok(PerTau {
                row,
                export: per_input[input_idx].clone(),
                noise: noise.clone(),
                signal_point: DecayPoint::poisson_weighted(tau, signal_rate),
                noise_point: DecayPoint::poisson_weighted(tau, noise_rate),
            })
        })
        .collect();
    let mut per_tau = per_tau?;
    per_tau.sort_by(|a, b| a.row.tau_ps.partial_cmp(&b.row.tau_ps).unwrap());

    let signal_points: Vec<DecayPoint> = per_tau.iter().map(|t| t.signal_point).collect();
    let noise_points: Vec<DecayPoint> = per_tau.iter().map(|t| t.noise_point).collect();

    let mut fits = FitSection::default();
    fits.decay.push(LabeledFit {
        label: format!("signal_{}_rate", fit_setting.token().to_lowercase()),
        fit: fit_exponential(&signal_points)?,
    });
    fits.decay.push(LabeledFit {
        label: "noise_rate".to_string(),
        fit: fit_exponential(&noise_points)?,
    });
    let mode = if config.fit.joint {
        RateFitMode::Joint
    } else {
        RateFitMode::Sequential
    };
    fits.rates = Some(fit_memory_rates(&signal_points, &noise_points, mode)?);

    let mut report = RunReport::new(config.clone(), Mode::QubitStorage);
    report.per_tau = per_tau.iter().map(|t| t.row.clone()).collect();
    report.fits = fits;

    Ok(ExperimentOutput {
        report,
        counts: per_tau.iter().flat_map(|t| t.export.clone()).collect(),
        noise_counts: per_tau.iter().map(|t| t.noise.clone()).collect(),
    })
}

// ---------------------------------------------------------------------------
// entangled storage
// ---------------------------------------------------------------------------

/// Simulate the 36-setting two-qubit count set at one storage time.
pub fn simulate_entangled_counts(
    config: &ExperimentConfig,
    rho_in: &DensityMatrix,
    tau_ps: f64,
) -> Result<Vec<CoincidenceRecord>> {
    let p = memory::retrieval_probability(&config.memory, tau_ps)?;
    let chi = memory::storage_channel(p)?;
    let rho_out = apply_one_sided(&chi, rho_in, Qubit::Signal)?;
    let rates = rate_model(config, tau_ps)?;
    let mut sampler = CountSampler::from_seed(derive_seed(
        config.seed(),
        &[STREAM_SIM, tau_ps.to_bits()],
    ));

    let mut records = Vec::with_capacity(36);
    for signal in Polarization::ALL {
        for herald in Polarization::ALL {
            let setting =
                MeasurementSetting::pair(signal, herald, tau_ps, config.counts.integration_s);
            let expected = expected_counts(&rho_out, &setting, &rates)?;
            let counts = sampler.sample(expected)?;
            records.push(CoincidenceRecord {
                setting,
                counts,
                expected_rate_hz: Some(expected / config.counts.integration_s),
            });
        }
    }
    Ok(records)
}

/// Reconstruct a two-qubit state from one storage time's records and
/// attach fidelities, concurrence and model curves. The same path serves
/// simulated and ingested data, so exported counts analyze identically.
pub fn two_qubit_metrics_at(
    config: &ExperimentConfig,
    tau_ps: f64,
    records: &[CoincidenceRecord],
) -> Result<TauMetrics> {
    let mut row = TauMetrics::model_only(tau_ps, &config.memory)?;
    let rho_in = config.entangled.state()?;
    let bell = PureState::phi_plus().density();
    let opts = MleOptions {
        accidental_hz: config.counts.accidental_hz,
        ..MleOptions::default()
    };

    let recon = mle_state_tomography(records, 4, &opts)?;
    row.f_phi = Some(analysis::state_fidelity(&recon.estimate, &bell)?);
    row.f_input = Some(analysis::state_fidelity(&recon.estimate, &rho_in)?);
    row.concurrence = Some(analysis::concurrence(&recon.estimate)?);

    let p = row.p_model;
    let model_out = apply_one_sided(&memory::storage_channel(p)?, &rho_in, Qubit::Signal)?;
    row.f_input_model = Some(analysis::state_fidelity(&model_out, &rho_in)?);

    if config.mc_resamples > 0 {
        let mc_seed = derive_seed(config.seed(), &[STREAM_MC, tau_ps.to_bits()]);
        let opts_mc = opts.clone();
        let bell_mc = bell.clone();
        let rho_in_mc = rho_in.clone();
        let uncertainty =
            monte_carlo_uncertainty(records, config.mc_resamples, mc_seed, |resampled| {
                let recon = mle_state_tomography(resampled, 4, &opts_mc)?;
                Ok(vec![
                    (
                        "f_phi".to_string(),
                        analysis::state_fidelity(&recon.estimate, &bell_mc)?,
                    ),
                    (
                        "f_input".to_string(),
                        analysis::state_fidelity(&recon.estimate, &rho_in_mc)?,
                    ),
                    (
                        "concurrence".to_string(),
                        analysis::concurrence(&recon.estimate)?,
                    ),
                ])
            })?;
        row.f_phi_err = uncertainty.std_dev("f_phi");
        row.f_input_err = uncertainty.std_dev("f_input");
        row.concurrence_err = uncertainty.std_dev("concurrence");
        row.mc_failed_resamples = Some(uncertainty.failed_resamples);
    }
    row.state = Some(recon.estimate);
    Ok(row)
}

/// Simulated entangled-storage experiment: one half of the input pair
/// passes through the memory, 36-setting tomography per τ.
pub fn run_entangled_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let rho_in = config.entangled.state()?;

    let per_tau: Result<Vec<(TauMetrics, Vec<CoincidenceRecord>)>> = config
        .tau_grid
        .par_iter()
        .map(|&tau| {
            let records = simulate_entangled_counts(config, &rho_in, tau)?;
            let row = two_qubit_metrics_at(config, tau, &records)?;
            Ok((row, records))
        })
        .collect();
    let mut per_tau = per_tau?;
    per_tau.sort_by(|a, b| a.0.tau_ps.partial_cmp(&b.0.tau_ps).unwrap());

    let mut report = RunReport::new(config.clone(), Mode::EntangledStorage);
    report.per_tau = per_tau.iter().map(|(row, _)| row.clone()).collect();

    Ok(ExperimentOutput {
        report,
        counts: per_tau.into_iter().flat_map(|(_, records)| records).collect(),
        noise_counts: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// analysis of ingested records
// ---------------------------------------------------------------------------

fn single_qubit_metrics_at(
    config: &ExperimentConfig,
    tau_ps: f64,
    records: &[CoincidenceRecord],
) -> Result<TauMetrics> {
    let mut row = TauMetrics::model_only(tau_ps, &config.memory)?;
    let opts = MleOptions {
        accidental_hz: config.counts.accidental_hz,
        ..MleOptions::default()
    };
    let recon = mle_state_tomography(records, 2, &opts)?;

    let bloch = |rho: &DensityMatrix, axis: usize| rho.expectation(&crate::quantum::pauli(axis));
    row.bloch_x = Some(bloch(&recon.estimate, 1));
    row.bloch_y = Some(bloch(&recon.estimate, 2));
    row.bloch_z = Some(bloch(&recon.estimate, 3));
    row.purity = Some(recon.estimate.purity());

    if config.mc_resamples > 0 {
        let mc_seed = derive_seed(config.seed(), &[STREAM_MC, tau_ps.to_bits()]);
        let opts_mc = opts.clone();
        let uncertainty =
            monte_carlo_uncertainty(records, config.mc_resamples, mc_seed, |resampled| {
                let recon = mle_state_tomography(resampled, 2, &opts_mc)?;
                Ok(vec![("purity".to_string(), recon.estimate.purity())])
            })?;
        row.purity_err = uncertainty.std_dev("purity");
        row.mc_failed_resamples = Some(uncertainty.failed_resamples);
    }
    Ok(row)
}

/// Group records by storage time.
fn group_by_tau(records: &[CoincidenceRecord]) -> Vec<(f64, Vec<CoincidenceRecord>)> {
    let mut groups: Vec<(f64, Vec<CoincidenceRecord>)> = Vec::new();
    for r in records {
        let tau = r.setting.storage_time_ps;
        match groups.iter_mut().find(|(t, _)| t.to_bits() == tau.to_bits()) {
            Some((_, group)) => group.push(r.clone()),
            None => groups.push((tau, vec![r.clone()])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    groups
}

/// State tomography per storage time on ingested (or exported) records.
pub fn analyze_records(
    config: &ExperimentConfig,
    records: &[CoincidenceRecord],
) -> Result<RunReport> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to analyze".into()));
    }
    let dim = records[0].setting.dim();
    if records.iter().any(|r| r.setting.dim() != dim) {
        return Err(Error::InvalidDimension(
            "counts file mixes single-qubit and two-qubit rows".into(),
        ));
    }

    let groups = group_by_tau(records);
    let rows: Result<Vec<TauMetrics>> = groups
        .par_iter()
        .map(|(tau, group)| {
            if dim == 4 {
                two_qubit_metrics_at(config, *tau, group)
            } else {
                single_qubit_metrics_at(config, *tau, group)
            }
        })
        .collect();

    let mut report = RunReport::new(config.clone(), Mode::Analyze);
    report.per_tau = rows?;
    Ok(report)
}

/// Decay fit of an ingested rate curve, optionally with a noise-only file
/// for the rate extraction.
pub fn run_fit(
    config: &ExperimentConfig,
    records: &[CoincidenceRecord],
    noise_records: Option<&[CoincidenceRecord]>,
) -> Result<RunReport> {
    let setting = config.fit.polarization()?;
    let points = |records: &[CoincidenceRecord]| -> Vec<DecayPoint> {
        let mut pts: Vec<DecayPoint> = records
            .iter()
            .filter(|r| r.setting.signal == setting && r.setting.herald.is_none())
            .map(|r| {
                DecayPoint::poisson_weighted(
                    r.setting.storage_time_ps,
                    r.counts as f64 / r.setting.integration_s,
                )
            })
            .collect();
        pts.sort_by(|a, b| a.tau_ps.partial_cmp(&b.tau_ps).unwrap());
        pts
    };

    let signal_points = points(records);
    if signal_points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "found only {} rows for setting {} — the decay fit needs at least 3",
            signal_points.len(),
            setting
        )));
    }

    let mut fits = FitSection::default();
    fits.decay.push(LabeledFit {
        label: format!("signal_{}_rate", setting.token().to_lowercase()),
        fit: fit_exponential(&signal_points)?,
    });

    if let Some(noise) = noise_records {
        let noise_points = points(noise);
        if noise_points.len() >= 3 {
            fits.decay.push(LabeledFit {
                label: "noise_rate".to_string(),
                fit: fit_exponential(&noise_points)?,
            });
            let mode = if config.fit.joint {
                RateFitMode::Joint
            } else {
                RateFitMode::Sequential
            };
            fits.rates = Some(fit_memory_rates(&signal_points, &noise_points, mode)?);
        }
    }

    let mut report = RunReport::new(config.clone(), Mode::Fit);
    report.fits = fits;
    Ok(report)
}
