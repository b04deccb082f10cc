//! Experiment configuration: TOML files with dotted keys, shipped presets,
//! and the seed-resolution chain.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::MemoryParams;
use crate::quantum::{DensityMatrix, PureState};
use crate::tomography::Polarization;

/// What a run does. Usually set by the CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    QubitStorage,
    EntangledStorage,
    Predict,
    Analyze,
    Fit,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::QubitStorage => "qubit-storage",
            Mode::EntangledStorage => "entangled-storage",
            Mode::Predict => "predict",
            Mode::Analyze => "analyze",
            Mode::Fit => "fit",
        }
    }

    /// Whether the mode draws random numbers and therefore needs a seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Mode::QubitStorage | Mode::EntangledStorage)
    }
}

/// Calibration linking model rates to detected counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsScale {
    /// Multiplier on the model pair rate S(τ) + N(τ).
    #[serde(default = "default_rate_scale")]
    pub rate_scale: f64,
    /// Integration time per setting, seconds.
    #[serde(default = "default_integration")]
    pub integration_s: f64,
    /// Accidental-coincidence floor, Hz.
    #[serde(default)]
    pub accidental_hz: f64,
}

fn default_rate_scale() -> f64 {
    1.0
}
fn default_integration() -> f64 {
    60.0
}

impl Default for CountsScale {
    fn default() -> Self {
        CountsScale {
            rate_scale: default_rate_scale(),
            integration_s: default_integration(),
            accidental_hz: 0.0,
        }
    }
}

/// Input state for entangled-storage runs: the ideal |Φ⁺⟩ by default, a
/// Werner state of given weight, or an explicit density matrix from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntangledInput {
    /// Werner weight of the prepared pair; 1 is the ideal |Φ⁺⟩.
    pub werner_p: Option<f64>,
    /// Path to a JSON-serialized two-qubit density matrix.
    pub dm_path: Option<PathBuf>,
}

impl EntangledInput {
    pub fn state(&self) -> Result<DensityMatrix> {
        if let Some(path) = &self.dm_path {
            let text = std::fs::read_to_string(path)?;
            let dm: DensityMatrix = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("bad input density matrix: {e}")))?;
            if dm.dim() != 4 {
                return Err(Error::Config("input density matrix must be 4x4".into()));
            }
            return Ok(dm);
        }
        if let Some(p) = self.werner_p {
            return crate::memory::werner_state(p);
        }
        Ok(PureState::phi_plus().density())
    }
}

/// What-if scenario parameters for predict mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictScenario {
    /// Target temperature for the cooling scenario, K.
    #[serde(default = "default_t_new")]
    pub t_new_k: f64,
    /// Target write pulse energy, nJ.
    #[serde(default = "default_e_new")]
    pub e_w_nj: f64,
    /// Target read pulse energy, nJ.
    #[serde(default = "default_e_new")]
    pub e_r_nj: f64,
}

fn default_t_new() -> f64 {
    233.0
}
fn default_e_new() -> f64 {
    10.0
}

impl Default for PredictScenario {
    fn default() -> Self {
        PredictScenario {
            t_new_k: default_t_new(),
            e_w_nj: default_e_new(),
            e_r_nj: default_e_new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Analyzer setting whose rate curve is fitted.
    #[serde(default = "default_fit_setting")]
    pub setting: String,
    /// Fit the signal and noise curves jointly (shared lifetime) instead
    /// of sequentially.
    #[serde(default)]
    pub joint: bool,
}

fn default_fit_setting() -> String {
    "H".to_string()
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            setting: default_fit_setting(),
            joint: false,
        }
    }
}

impl FitConfig {
    pub fn polarization(&self) -> Result<Polarization> {
        Polarization::parse(&self.setting)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl ReportFormat {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "both" => Ok(ReportFormat::Both),
            other => Err(Error::Config(format!(
                "unknown format {other:?}; available: json, csv, both"
            ))),
        }
    }

    pub fn wants_json(&self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }

    pub fn wants_csv(&self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_format() -> ReportFormat {
    ReportFormat::Both
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            format: default_format(),
        }
    }
}

/// Full description of one run. Parses from TOML with dotted keys, e.g.
///
/// ```toml
/// seed = 7
/// memory.S0_hz = 6.2
/// counts.integration_s = 60.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_mc_resamples")]
    pub mc_resamples: usize,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<f64>,
    #[serde(default = "MemoryParams::qubit_storage")]
    pub memory: MemoryParams,
    #[serde(default)]
    pub counts: CountsScale,
    #[serde(default)]
    pub entangled: EntangledInput,
    #[serde(default)]
    pub predict: PredictScenario,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_mc_resamples() -> usize {
    100
}

/// 0 to 8 ps in 0.5 ps steps: spans every crossing the datasets exhibit.
pub fn default_tau_grid() -> Vec<f64> {
    (0..=16).map(|k| 0.5 * k as f64).collect()
}

/// Seed used when neither flag, config file nor environment provide one.
pub const DEFAULT_SEED: u64 = 7;

/// Environment variable consulted when no explicit seed is given.
pub const SEED_ENV_VAR: &str = "PHONONMEM_SEED";

impl ExperimentConfig {
    /// Parse a TOML config file.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Resolve the seed: explicit field, then the environment variable,
    /// then the built-in default.
    pub fn resolve_seed(&mut self) -> u64 {
        let seed = self
            .seed
            .or_else(|| {
                std::env::var(SEED_ENV_VAR)
                    .ok()
                    .and_then(|s| s.trim().parse().ok())
            })
            .unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        seed
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        self.memory.validate()?;
        if self.tau_grid.is_empty() {
            return Err(Error::Config("tau_grid must not be empty".into()));
        }
        if self.tau_grid.iter().any(|&t| t < 0.0) {
            return Err(Error::Config("tau_grid entries must be non-negative".into()));
        }
        if self.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tau_grid must be strictly increasing".into()));
        }
        if self.counts.rate_scale <= 0.0 || self.counts.integration_s <= 0.0 {
            return Err(Error::Config(
                "counts.rate_scale and counts.integration_s must be positive".into(),
            ));
        }
        if self.counts.accidental_hz < 0.0 {
            return Err(Error::Config(
                "counts.accidental_hz must be non-negative".into(),
            ));
        }
        if let Some(p) = self.entangled.werner_p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config("entangled.werner_p must lie in [0, 1]".into()));
            }
        }
        if let Some(mode) = self.mode {
            if mode.is_stochastic() && self.seed.is_none() {
                return Err(Error::Config(format!(
                    "mode {} is stochastic and needs a seed",
                    mode.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// The two shipped parameter sets, reproducing the qubit-storage and
/// entangled-storage figures with one flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    QubitFig2,
    EntangledFig4,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "qubit-fig2" => Ok(Preset::QubitFig2),
            "entangled-fig4" => Ok(Preset::EntangledFig4),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; available: qubit-fig2, entangled-fig4"
            ))),
        }
    }

    pub fn config(&self) -> ExperimentConfig {
        match self {
            Preset::QubitFig2 => ExperimentConfig {
                mode: Some(Mode::QubitStorage),
                seed: None,
                mc_resamples: default_mc_resamples(),
                tau_grid: default_tau_grid(),
                memory: MemoryParams::qubit_storage(),
                counts: CountsScale {
                    rate_scale: 1.0,
                    integration_s: 60.0,
                    accidental_hz: 0.0,
                },
                entangled: EntangledInput::default(),
                predict: PredictScenario::default(),
                fit: FitConfig::default(),
                output: OutputConfig::default(),
            },
            Preset::EntangledFig4 => ExperimentConfig {
                mode: Some(Mode::EntangledStorage),
                memory: MemoryParams::entangled_storage(),
                // rate_scale calibrated so the |00⟩ analyzer pair detects
                // ~2.3 Hz at zero delay
                counts: CountsScale {
                    rate_scale: 1.9785,
                    integration_s: 180.0,
                    accidental_hz: 0.0,
                },
                ..Preset::QubitFig2.config()
            },
        }
    }
}

/// Parse a τ-grid flag: either `start:step:stop` or a comma-separated list.
pub fn parse_tau_grid(spec: &str) -> Result<Vec<f64>> {
    let parse_num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?} in tau grid")))
    };
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "range grid must be start:step:stop, got {spec:?}"
            )));
        }
        let (start, step, stop) =
            (parse_num(parts[0])?, parse_num(parts[1])?, parse_num(parts[2])?);
        if step <= 0.0 || stop < start {
            return Err(Error::Config("grid needs step > 0 and stop >= start".into()));
        }
        let n = ((stop - start) / step).round() as usize;
        (0..=n)
            .map(|k| start + step * k as f64)
            .filter(|&t| t <= stop + 1e-9)
            .collect()
    } else {
        spec.split(',').map(parse_num).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(Error::Config("tau grid is empty".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for preset in [Preset::QubitFig2, Preset::EntangledFig4] {
            let mut config = preset.config();
            config.resolve_seed();
            config.validate().unwrap();
        }
    }

    #[test]
    fn dotted_key_toml_round_trip() {
        let text = r#"
seed = 11
mc_resamples = 50
tau_grid = [0.0, 1.0, 2.0]
memory.S0_hz = 6.2
memory.Nc_hz = 3.737
memory.N0_hz = 0.464
memory.tau_m_ps = 3.5
memory.eta_w = 0.062
memory.eta_r = 0.1226
memory.E_w_nj = 4.4
memory.E_r_nj = 4.4
memory.temperature_k = 295.0
memory.phonon_thz = 40.0
counts.rate_scale = 1.0
counts.integration_s = 30.0
"#;
        let config = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(config.seed, Some(11));
        assert_eq!(config.mc_resamples, 50);
        assert_eq!(config.tau_grid, vec![0.0, 1.0, 2.0]);
        assert_eq!(config.memory.s0_hz, 6.2);
        assert_eq!(config.counts.integration_s, 30.0);
        config.validate().unwrap();
    }

    #[test]
    fn omitted_sections_take_defaults() {
        let config = ExperimentConfig::from_toml("seed = 3").unwrap();
        assert_eq!(config.memory, MemoryParams::qubit_storage());
        assert_eq!(config.tau_grid.len(), 17);
        assert_eq!(config.mc_resamples, 100);
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut config = Preset::QubitFig2.config();
        config.resolve_seed();
        config.tau_grid = vec![];
        assert!(config.validate().is_err());
        config.tau_grid = vec![1.0, 0.5];
        assert!(config.validate().is_err());
        config.tau_grid = vec![-1.0, 0.5];
        assert!(config.validate().is_err());
        config.tau_grid = vec![0.0, 0.0];
        assert!(config.validate().is_err());
    }

    #[test]
    fn seed_resolution_chain() {
        let mut config = Preset::QubitFig2.config();
        config.seed = Some(42);
        assert_eq!(config.resolve_seed(), 42);

        let mut config = Preset::QubitFig2.config();
        config.seed = None;
        std::env::set_var(SEED_ENV_VAR, "1234");
        assert_eq!(config.resolve_seed(), 1234);
        std::env::remove_var(SEED_ENV_VAR);

        let mut config = Preset::QubitFig2.config();
        config.seed = None;
        assert_eq!(config.resolve_seed(), DEFAULT_SEED);
    }

    #[test]
    fn tau_grid_parsing() {
        assert_eq!(parse_tau_grid("0:0.5:1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_tau_grid("0,1.5,3").unwrap(), vec![0.0, 1.5, 3.0]);
        assert!(parse_tau_grid("").is_err());
        assert!(parse_tau_grid("0:-1:5").is_err());
        assert!(parse_tau_grid("0:1").is_err());
    }

    #[test]
    fn entangled_input_variants() {
        let ideal = EntangledInput::default().state().unwrap();
        let bell = PureState::phi_plus().density();
        assert!((ideal.matrix() - bell.matrix()).norm() < 1e-15);

        let werner = EntangledInput {
            werner_p: Some(0.9187),
            dm_path: None,
        };
        let rho = werner.state().unwrap();
        let expect = crate::memory::werner_state(0.9187).unwrap();
        assert!((rho.matrix() - expect.matrix()).norm() < 1e-15);
    }
}
