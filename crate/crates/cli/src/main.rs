//! `fedsat` — drive the constellation-federation simulator from the shell.
//!
//! Verbs: `run` (preset scenarios A–E), `sweep` (custom parameter sweep from
//! a TOML config), `table2` (six-altitude link/access report) and `presets`
//! (list the preset grids). Data goes to stdout or `--out`; diagnostics go
//! to stderr. Exit codes: 0 success, 2 configuration error, 1 runtime error.

use clap::{Parser, Subcommand};
use fedsat_core::link::{standard_report, LinkConfig};
use fedsat_core::scenario::{
    emit_csv, parse_config_file, run_preset_points, run_scenario, scenario_presets, CsvGroup,
    ScenarioError, SweepParam,
};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(
    name = "fedsat",
    about = "Deterministic simulator of opportunistic CubeSat-constellation federation",
    version
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Execute a preset scenario (A–E) and emit its CSV results.
    Run {
        /// Preset name: A, B, C, D or E (case-insensitive).
        #[arg(long)]
        scenario: String,
        /// Master seed override (FEDSAT_SEED, when set, wins over this).
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo runs per sweep point (default: the preset's count).
        #[arg(long)]
        runs: Option<u32>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a custom sweep over one parameter of a TOML configuration.
    Sweep {
        /// TOML file whose keys mirror the scenario configuration fields.
        #[arg(long)]
        config: PathBuf,
        /// Parameter to vary: constellation_count, sats_per_constellation,
        /// altitude_km or task_load.
        #[arg(long)]
        param: String,
        /// Comma-separated list of values for the swept parameter.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the six-altitude access/registration/deliverable-data CSV.
    Table2 {
        /// Registration request size [bytes].
        #[arg(long)]
        req_bytes: Option<u32>,
        /// Registration response size [bytes].
        #[arg(long)]
        resp_bytes: Option<u32>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the preset scenario definitions as CSV.
    Presets,
}

/// Errors carry the exit status they should terminate with.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_CONFIG,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_RUNTIME,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(_) | ScenarioError::Parse(_) | ScenarioError::Catalog(_) => {
                CliError::config(e.to_string())
            }
            other => CliError::runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version to stdout (exit 0) and usage errors
            // to stderr (exit 2).
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedsat: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.verb {
        Verb::Run {
            scenario,
            seed,
            runs,
            out,
        } => {
            let mut points = scenario_presets(&scenario)?;
            if let Some(seed) = effective_seed(seed)? {
                for p in &mut points {
                    p.config.master_seed = seed;
                }
            }
            if let Some(runs) = runs {
                if runs == 0 {
                    return Err(CliError::config("--runs must be at least 1"));
                }
                for p in &mut points {
                    p.config.runs = runs;
                }
            }
            eprintln!(
                "running scenario {} ({} points, {} runs each)...",
                scenario.to_ascii_uppercase(),
                points.len(),
                points.first().map_or(0, |p| p.config.runs)
            );
            let groups = run_preset_points(&points)?;
            write_output(out.as_deref(), &emit_csv(&groups)?)
        }
        Verb::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let contents = std::fs::read_to_string(&config).map_err(|e| {
                CliError::config(format!("cannot read {}: {e}", config.display()))
            })?;
            let cfg = parse_config_file(&contents)?;
            let param: SweepParam = param.parse()?;
            eprintln!(
                "sweeping {param} over {} values ({} runs each)...",
                values.len(),
                cfg.runs
            );
            let results = run_scenario(&cfg, param, &values)?;
            let groups = vec![CsvGroup {
                scenario: "custom".into(),
                swept_param: param.to_string(),
                results,
            }];
            write_output(out.as_deref(), &emit_csv(&groups)?)
        }
        Verb::Table2 {
            req_bytes,
            resp_bytes,
            out,
        } => {
            let mut link = LinkConfig::default();
            if let Some(b) = req_bytes {
                link.reg_request_bytes = b;
            }
            if let Some(b) = resp_bytes {
                link.reg_response_bytes = b;
            }
            let reports = standard_report(&link).map_err(|e| CliError::config(e.to_string()))?;
            let mut csv = String::from(
                "altitude_km,access_time_s,registration_overhead_s,registration_load_pct,deliverable_dl_bytes,deliverable_ul_bytes\n",
            );
            for r in reports {
                // Full-precision floats: the downlink/uplink byte columns
                // must reproduce their exact rate ratio after a round-trip.
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.altitude_km,
                    r.access_time_s,
                    r.registration_overhead_s,
                    r.registration_load_pct,
                    r.deliverable_dl_bytes,
                    r.deliverable_ul_bytes,
                ));
            }
            write_output(out.as_deref(), &csv)
        }
        Verb::Presets => {
            let mut csv = String::from(
                "scenario,swept_param,value,constellation_count,sats_per_constellation,altitude_km,task_load,homogeneity,type_mix,runs\n",
            );
            for name in ["A", "B", "C", "D", "E"] {
                for p in scenario_presets(name)? {
                    let c = &p.config;
                    let mix = c
                        .type_mix
                        .fractions()
                        .iter()
                        .map(|f| format!("{f}"))
                        .collect::<Vec<_>>()
                        .join(";");
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{:?},{},{}\n",
                        p.scenario,
                        p.swept_param,
                        p.swept_value,
                        c.constellation_count,
                        c.sats_per_constellation,
                        c.altitude_km,
                        c.task_load,
                        c.homogeneity,
                        mix,
                        c.runs,
                    ));
                }
            }
            write_output(None, &csv)
        }
    }
}

/// Resolve the master seed: FEDSAT_SEED beats `--seed`; unset means "keep
/// the preset default".
fn effective_seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    match std::env::var("FEDSAT_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::config(format!("FEDSAT_SEED is not a valid seed: {raw:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(CliError::config(format!("cannot read FEDSAT_SEED: {e}"))),
    }
}

fn write_output(out: Option<&std::path::Path>, data: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, data)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}
