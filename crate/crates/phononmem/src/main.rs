//! Command-line front end. All real work lives in the library; this binary
//! resolves configuration, runs the requested mode and writes the report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phononmem::harness::config::{parse_tau_grid, ExperimentConfig, Mode, Preset, ReportFormat};
use phononmem::harness::{self, counts, predict, report};
use phononmem::Error;

#[derive(Parser)]
#[command(name = "phononmem", version, about = "Raman quantum-memory simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; replaces the preset as the base configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (falls back to the config file, then PHONONMEM_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for reports and exported counts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format: json, csv or both.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Monte Carlo resamples per reconstructed quantity.
    #[arg(long, global = true)]
    mc_resamples: Option<usize>,

    /// Storage-time grid: start:step:stop or a comma-separated list, ps.
    #[arg(long, global = true)]
    tau_grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate qubit storage: process tomography per storage time.
    SimulateQubit {
        /// Parameter preset to start from.
        #[arg(long, default_value = "qubit-fig2")]
        preset: String,
    },
    /// Simulate storage of one half of an entangled pair.
    SimulateEntangled {
        #[arg(long, default_value = "entangled-fig4")]
        preset: String,
    },
    /// Tabulate cooling and pulse-energy predictions against the
    /// published values.
    Predict {
        /// cooling, energy or both.
        #[arg(long, default_value = "both")]
        scenario: String,
        /// Cooling target temperature, K.
        #[arg(long)]
        t_new: Option<f64>,
        /// Scaled write pulse energy, nJ.
        #[arg(long)]
        e_w: Option<f64>,
        /// Scaled read pulse energy, nJ.
        #[arg(long)]
        e_r: Option<f64>,
    },
    /// State tomography per storage time on a counts file.
    Analyze {
        /// Counts CSV (setting_a,setting_b,tau_ps,counts,integration_s).
        #[arg(long)]
        counts: PathBuf,
    },
    /// Exponential decay fit of a rate curve from a counts file.
    Fit {
        #[arg(long)]
        counts: PathBuf,
        /// Noise-only counts file enabling the rate extraction.
        #[arg(long)]
        noise_counts: Option<PathBuf>,
        /// Analyzer setting whose curve is fitted.
        #[arg(long)]
        setting: Option<String>,
        /// Fit signal and noise jointly with a shared lifetime.
        #[arg(long)]
        joint: bool,
    },
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::SimulateQubit { .. } => Mode::QubitStorage,
            Command::SimulateEntangled { .. } => Mode::EntangledStorage,
            Command::Predict { .. } => Mode::Predict,
            Command::Analyze { .. } => Mode::Analyze,
            Command::Fit { .. } => Mode::Fit,
        }
    }

    fn default_preset(&self) -> Preset {
        match self {
            Command::SimulateEntangled { .. } => Preset::EntangledFig4,
            _ => Preset::QubitFig2,
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let preset = match &cli.command {
                Command::SimulateQubit { preset } | Command::SimulateEntangled { preset } => {
                    Preset::parse(preset)?
                }
                _ => cli.command.default_preset(),
            };
            preset.config()
        }
    };
    config.mode = Some(cli.command.mode());

    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    if let Some(format) = &cli.format {
        config.output.format = ReportFormat::parse(format)?;
    }
    if let Some(mc) = cli.mc_resamples {
        config.mc_resamples = mc;
    }
    if let Some(grid) = &cli.tau_grid {
        config.tau_grid = parse_tau_grid(grid)?;
    }
    match &cli.command {
        Command::Predict { t_new, e_w, e_r, .. } => {
            if let Some(t) = t_new {
                config.predict.t_new_k = *t;
            }
            if let Some(e) = e_w {
                config.predict.e_w_nj = *e;
            }
            if let Some(e) = e_r {
                config.predict.e_r_nj = *e;
            }
        }
        Command::Fit { setting, joint, .. } => {
            if let Some(s) = setting {
                config.fit.setting = s.clone();
            }
            if *joint {
                config.fit.joint = true;
            }
        }
        _ => {}
    }

    config.resolve_seed();
    config.validate()?;
    Ok(config)
}

fn print_per_tau(report: &harness::RunReport) {
    if report.per_tau.is_empty() {
        return;
    }
    let two_qubit = report.per_tau.iter().any(|r| r.f_phi.is_some());
    let process = report.per_tau.iter().any(|r| r.f_proc.is_some());
    if process {
        println!("  tau_ps   f_avg        f_proc       f_model");
        for r in &report.per_tau {
            println!(
                "  {:6.2}   {}   {}   {:8.4}",
                r.tau_ps,
                fmt_pm(r.f_avg, r.f_avg_err),
                fmt_pm(r.f_proc, r.f_proc_err),
                r.f_model,
            );
        }
    } else if two_qubit {
        println!("  tau_ps   f_phi        concurrence    f_werner_model  c_werner_model");
        for r in &report.per_tau {
            println!(
                "  {:6.2}   {}   {}   {:8.4}        {:8.4}",
                r.tau_ps,
                fmt_pm(r.f_phi, r.f_phi_err),
                fmt_pm(r.concurrence, r.concurrence_err),
                r.f_proc_model,
                r.c_werner_model,
            );
        }
    }
}

fn fmt_pm(value: Option<f64>, err: Option<f64>) -> String {
    match (value, err) {
        (Some(v), Some(e)) => format!("{v:.3}±{e:.3}"),
        (Some(v), None) => format!("{v:.4}     "),
        _ => "     -     ".to_string(),
    }
}

fn print_fits(report: &harness::RunReport) {
    for labeled in &report.fits.decay {
        let f = &labeled.fit;
        println!(
            "  fit {}: a = {:.3} Hz, b = {:.3} Hz, tau_m = {:.3} ps{}",
            labeled.label,
            f.a,
            f.b,
            f.tau_m_ps,
            if f.tau_m_identifiable {
                ""
            } else {
                " (lifetime unidentifiable)"
            }
        );
    }
    if let Some(rates) = &report.fits.rates {
        println!(
            "  rates ({:?}): S0 = {:.3} Hz, Nc = {:.3} Hz, N0 = {:.3} Hz, tau_m = {:.3} ps",
            rates.mode, rates.s0_hz, rates.nc_hz, rates.n0_hz, rates.tau_m_ps
        );
    }
}

fn print_predictions(report: &harness::RunReport) {
    if report.predictions.is_empty() {
        return;
    }
    println!("  scenario             quantity                        derived   reported  flag");
    for row in &report.predictions {
        println!(
            "  {:<20} {:<30} {:>8.4}  {:>8.4}  {}",
            row.scenario,
            row.quantity,
            row.derived,
            row.reported,
            if row.discrepancy { "DISCREPANCY" } else { "agrees" }
        );
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = build_config(cli)?;
    let out_dir = config.output.dir.clone();

    let (report, exports) = match &cli.command {
        Command::SimulateQubit { .. } => {
            let output = harness::run_qubit_experiment(&config)?;
            let mut exports = vec![("counts.csv", output.counts)];
            if !output.noise_counts.is_empty() {
                exports.push(("counts_noise.csv", output.noise_counts));
            }
            (output.report, exports)
        }
        Command::SimulateEntangled { .. } => {
            let output = harness::run_entangled_experiment(&config)?;
            (output.report, vec![("counts.csv", output.counts)])
        }
        Command::Predict { scenario, .. } => {
            let scenario = predict::Scenario::parse(scenario)?;
            (harness::run_prediction(&config, scenario)?, vec![])
        }
        Command::Analyze { counts } => {
            let records = counts::ingest_counts(counts)?;
            (harness::analyze_records(&config, &records)?, vec![])
        }
        Command::Fit {
            counts: counts_path,
            noise_counts,
            ..
        } => {
            let records = counts::ingest_counts(counts_path)?;
            let noise = noise_counts
                .as_ref()
                .map(|p| counts::ingest_counts(p))
                .transpose()?;
            (
                harness::run_fit(&config, &records, noise.as_deref())?,
                vec![],
            )
        }
    };

    println!(
        "mode: {}  seed: {}",
        report.provenance.mode, report.provenance.seed
    );
    print_per_tau(&report);
    print_fits(&report);
    print_predictions(&report);

    let written = report::emit_report(&report, &out_dir)?;
    for (name, records) in exports {
        let path = out_dir.join(name);
        counts::export_counts(&records, &path)?;
        println!("wrote {}", path.display());
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
