//! Persistent run reports: a structured JSON document plus flat CSV tables
//! keyed by storage time. Output is byte-stable for a fixed config and
//! seed: provenance carries a config hash, never a timestamp.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Mode};
use crate::analysis::fit::{DecayFit, MemoryRateFit};
use crate::error::Result;
use crate::quantum::DensityMatrix;

/// Metrics at one storage time. Mode-irrelevant fields stay `None` and are
/// omitted from JSON; uncertainty fields are always present (null when
/// mc_resamples = 0) so the schema does not change shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMetrics {
    pub tau_ps: f64,
    /// Model retrieval probability p(τ).
    pub p_model: f64,
    /// Model average fidelity (1 + p)/2.
    pub f_model: f64,
    /// Model process fidelity / Werner fidelity (1 + 3p)/4.
    pub f_proc_model: f64,
    /// Model Werner concurrence max{0, (3p − 1)/2}.
    pub c_werner_model: f64,
    /// Detected aligned-analyzer rate with signal, Hz.
    pub detected_rate_hz: f64,
    /// Noise-only detected rate, Hz.
    pub noise_rate_hz: f64,

    // qubit-storage reconstruction
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_proc: Option<f64>,
    pub f_proc_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_avg: Option<f64>,
    pub f_avg_err: Option<f64>,

    // entangled-storage / two-qubit analysis reconstruction
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_phi: Option<f64>,
    pub f_phi_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_input: Option<f64>,
    pub f_input_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concurrence: Option<f64>,
    pub concurrence_err: Option<f64>,
    /// Model fidelity of the stored state with the configured input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_input_model: Option<f64>,

    // single-qubit analysis of ingested data
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    pub purity_err: Option<f64>,

    /// Reconstructed state (two-qubit modes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<DensityMatrix>,
    /// Monte Carlo resamples whose reconstruction failed, if any ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_failed_resamples: Option<usize>,
}

impl TauMetrics {
    pub fn model_only(tau_ps: f64, params: &crate::memory::MemoryParams) -> Result<Self> {
        let p = crate::memory::retrieval_probability(params, tau_ps)?;
        Ok(TauMetrics {
            tau_ps,
            p_model: p,
            f_model: (1.0 + p) / 2.0,
            f_proc_model: (1.0 + 3.0 * p) / 4.0,
            c_werner_model: crate::analysis::werner_concurrence(p),
            detected_rate_hz: crate::memory::detected_rate(params, tau_ps, true)?,
            noise_rate_hz: crate::memory::detected_rate(params, tau_ps, false)?,
            f_proc: None,
            f_proc_err: None,
            f_avg: None,
            f_avg_err: None,
            f_phi: None,
            f_phi_err: None,
            f_input: None,
            f_input_err: None,
            concurrence: None,
            concurrence_err: None,
            f_input_model: None,
            bloch_x: None,
            bloch_y: None,
            bloch_z: None,
            purity: None,
            purity_err: None,
            state: None,
            mc_failed_resamples: None,
        })
    }
}

/// A named decay fit in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledFit {
    pub label: String,
    pub fit: DecayFit,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitSection {
    pub decay: Vec<LabeledFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<MemoryRateFit>,
}

/// One derived-vs-reported comparison row from the prediction engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub scenario: String,
    pub quantity: String,
    /// Value from the model at this configuration.
    pub derived: f64,
    /// Value at the baseline configuration, for delta inspection.
    pub baseline: f64,
    /// Published measured/claimed value this derived number is compared to.
    pub reported: f64,
    /// Agreement tolerance used for the flag.
    pub tolerance: f64,
    /// True when |derived − reported| exceeds the tolerance.
    pub discrepancy: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: String,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
}

/// The complete result of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub per_tau: Vec<TauMetrics>,
    pub fits: FitSection,
    pub predictions: Vec<PredictionRow>,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, mode: Mode) -> Self {
        let seed = config.seed();
        let config_sha256 = config_hash(&config);
        RunReport {
            provenance: Provenance {
                mode: mode.as_str().to_string(),
                seed,
                config_sha256,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            config,
            per_tau: Vec::new(),
            fits: FitSection::default(),
            predictions: Vec::new(),
        }
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// The flat per-τ table. Columns depend on which metric families are
/// populated; uncertainty columns are always present (empty when no Monte
/// Carlo ran) so downstream parsers see a fixed schema per mode.
pub fn per_tau_csv(report: &RunReport) -> String {
    let rows = &report.per_tau;
    let has_process = rows.iter().any(|r| r.f_proc.is_some());
    let has_two_qubit = rows.iter().any(|r| r.f_phi.is_some());
    let has_single = rows.iter().any(|r| r.purity.is_some());

    let mut header: Vec<&str> = vec![
        "tau_ps",
        "p_model",
        "f_model",
        "f_proc_model",
        "c_werner_model",
        "detected_rate_hz",
        "noise_rate_hz",
    ];
    if has_process {
        header.extend(["f_proc", "f_proc_err", "f_avg", "f_avg_err"]);
    }
    if has_two_qubit {
        header.extend([
            "f_phi",
            "f_phi_err",
            "f_input",
            "f_input_err",
            "concurrence",
            "concurrence_err",
            "f_input_model",
        ]);
    }
    if has_single {
        header.extend(["bloch_x", "bloch_y", "bloch_z", "purity", "purity_err"]);
    }

    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let mut fields: Vec<String> = vec![
            format!("{:.6}", r.tau_ps),
            format!("{:.6}", r.p_model),
            format!("{:.6}", r.f_model),
            format!("{:.6}", r.f_proc_model),
            format!("{:.6}", r.c_werner_model),
            format!("{:.6}", r.detected_rate_hz),
            format!("{:.6}", r.noise_rate_hz),
        ];
        if has_process {
            fields.extend([cell(r.f_proc), cell(r.f_proc_err), cell(r.f_avg), cell(r.f_avg_err)]);
        }
        if has_two_qubit {
            fields.extend([
                cell(r.f_phi),
                cell(r.f_phi_err),
                cell(r.f_input),
                cell(r.f_input_err),
                cell(r.concurrence),
                cell(r.concurrence_err),
                cell(r.f_input_model),
            ]);
        }
        if has_single {
            fields.extend([
                cell(r.bloch_x),
                cell(r.bloch_y),
                cell(r.bloch_z),
                cell(r.purity),
                cell(r.purity_err),
            ]);
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn predictions_csv(report: &RunReport) -> String {
    let mut out = String::from("scenario,quantity,derived,baseline,reported,tolerance,discrepancy\n");
    for row in &report.predictions {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
            row.scenario,
            row.quantity,
            row.derived,
            row.baseline,
            row.reported,
            row.tolerance,
            row.discrepancy
        ));
    }
    out
}

/// Write the report files and return their paths.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let format = report.config.output.format;
    let mut written = Vec::new();

    if format.wants_json() {
        let path = dir.join("report.json");
        let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
        bytes.push(b'\n');
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    if format.wants_csv() {
        if !report.per_tau.is_empty() {
            let path = dir.join("per_tau.csv");
            std::fs::write(&path, per_tau_csv(report))?;
            written.push(path);
        }
        if !report.predictions.is_empty() {
            let path = dir.join("predictions.csv");
            std::fs::write(&path, predictions_csv(report))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Preset;

    #[test]
    fn empty_uncertainty_columns_keep_schema() {
        let mut config = Preset::QubitFig2.config();
        config.resolve_seed();
        let mut report = RunReport::new(config.clone(), Mode::QubitStorage);
        let mut row = TauMetrics::model_only(0.0, &config.memory).unwrap();
        row.f_proc = Some(0.69);
        row.f_avg = Some(0.79);
        report.per_tau.push(row);

        let csv = per_tau_csv(&report);
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let data: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), data.len());
        // err columns are present but empty
        let err_idx = header.iter().position(|c| *c == "f_avg_err").unwrap();
        assert!(data[err_idx].is_empty());
        let val_idx = header.iter().position(|c| *c == "f_avg").unwrap();
        assert!(!data[val_idx].is_empty());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let mut a = Preset::QubitFig2.config();
        a.resolve_seed();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.mc_resamples += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn json_emission_is_byte_stable() {
        let mut config = Preset::QubitFig2.config();
        config.resolve_seed();
        let mut report = RunReport::new(config.clone(), Mode::QubitStorage);
        report
            .per_tau
            .push(TauMetrics::model_only(0.0, &config.memory).unwrap());

        let a = serde_json::to_vec_pretty(&report).unwrap();
        let b = serde_json::to_vec_pretty(&report).unwrap();
        assert_eq!(a, b);
    }
}
