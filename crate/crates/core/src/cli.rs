//! Command-line front end: argument parsing, dispatch, and result files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel::path_loss_db;
use crate::config::{parse_config, LinkBudgetParams, SystemConfig};
use crate::error::Error;
use crate::simulate::{ber_experiment, run_trial, sweep, BerTable, ResultTable, SweepVariable, MIN_BER_SYMBOLS};
use crate::theory::validation_battery;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const MSE_HEADER: &str = "sweep_var,value,estimator,nmse_db,support_rate,trials,stderr";
pub const BER_HEADER: &str = "snr_db,csi_source,ber,symbols";

/// Path loss of the three reference scenarios as printed in the source
/// prose, which the formula does not reproduce.
const PROSE_PATH_LOSS_DB: [f64; 3] = [192.62, 188.27, 161.78];
const FORMULA_PATH_LOSS_DB: [f64; 3] = [102.04, 100.55, 88.69];

#[derive(Debug, Parser)]
#[command(name = "scs-mimo", version, about = "Structured compressive sensing channel estimation for hybrid mmWave MIMO")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` system configuration; desk-scale defaults otherwise.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for trial parallelism, 0 = all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Format of the result printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, default_value = "scs-mimo-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    /// Time-slot overhead G.
    G,
    Snr,
}

impl From<SweepVar> for SweepVariable {
    fn from(v: SweepVar) -> Self {
        match v {
            SweepVar::G => SweepVariable::Slots,
            SweepVar::Snr => SweepVariable::SnrDb,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the path-loss budget.
    Linkbudget {
        #[arg(long)]
        fc_mhz: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        d_km: f64,
        #[arg(long, default_value_t = 0.0)]
        atmos: f64,
        #[arg(long, default_value_t = 0.0)]
        rain: f64,
    },
    /// Run one trial and report per-estimator metrics.
    Estimate,
    /// NMSE and support recovery versus G or SNR.
    SweepMse {
        #[arg(long, value_enum)]
        variable: SweepVar,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Downlink BER versus SNR for each CSI source.
    SweepBer {
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        snrs: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        symbols: usize,
    },
    /// Certificate versus exhaustive-search battery on small random instances.
    TheoryCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Linkbudget { .. } => "linkbudget",
            Command::Estimate => "estimate",
            Command::SweepMse { .. } => "sweep-mse",
            Command::SweepBer { .. } => "sweep-ber",
            Command::TheoryCheck { .. } => "theory-check",
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<SystemConfig>,
    pub seed: u64,
    pub workers: usize,
    pub version: String,
    pub timestamp: String,
    pub arguments: Vec<String>,
    pub long_running: bool,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Config { .. } | Error::ConfigInvariant { .. } | Error::InvalidParameter(_)) => {
                EXIT_CONFIG
            }
            _ => EXIT_NUMERICAL,
        }
    }
}

struct Output {
    csv: String,
    json: serde_json::Value,
}

pub fn mse_csv(table: &ResultTable) -> String {
    let mut s = format!("{MSE_HEADER}\n");
    for r in &table.rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.sweep_var, r.value, r.estimator.name(), r.nmse_db, r.support_rate, r.trials, r.stderr
        )
        .unwrap();
    }
    s
}

pub fn ber_csv(table: &BerTable) -> String {
    let mut s = format!("{BER_HEADER}\n");
    for r in &table.rows {
        writeln!(s, "{},{},{},{}", r.snr_db, r.csi_source.name(), r.ber, r.symbols).unwrap();
    }
    s
}

fn load_config(global: &GlobalArgs) -> Result<SystemConfig, CliError> {
    let cfg = match &global.config {
        Some(path) => parse_config(path)?,
        None => SystemConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: &Command, cfg: Option<&SystemConfig>, g: &GlobalArgs) -> Result<Output, CliError> {
    let out = match cmd {
        Command::Linkbudget { fc_mhz, alpha, d_km, atmos, rain } => {
            let params = LinkBudgetParams {
                carrier_freq_mhz: *fc_mhz,
                path_loss_exponent: *alpha,
                distance_km: *d_km,
                atmos_atten_db_per_km: *atmos,
                rain_atten_db_per_km: *rain,
            };
            let db = path_loss_db(&params)?;
            Output {
                csv: format!("fc_mhz,alpha,d_km,atmos,rain,path_loss_db\n{fc_mhz},{alpha},{d_km},{atmos},{rain},{db}\n"),
                json: serde_json::json!({ "params": params, "path_loss_db": db, "note": discrepancy_note() }),
            }
        }
        Command::Estimate => {
            let cfg = cfg.expect("estimate needs a config");
            let rec = run_trial(cfg, g.seed)?;
            let mut csv = String::from("estimator,nmse_db,exact_support_match,precision,recall,iterations,wall_time_s\n");
            for m in &rec.metrics {
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    m.estimator.name(),
                    m.nmse_db,
                    m.exact_support_match,
                    m.precision,
                    m.recall,
                    m.iterations,
                    m.wall_time_s
                )
                .unwrap();
            }
            Output { csv, json: serde_json::to_value(&rec).expect("record serializes") }
        }
        Command::SweepMse { variable, values, trials } => {
            let cfg = cfg.expect("sweep-mse needs a config");
            let table = sweep(cfg, (*variable).into(), values, *trials, g.seed, g.workers)?;
            Output { csv: mse_csv(&table), json: serde_json::to_value(&table).expect("table serializes") }
        }
        Command::SweepBer { snrs, symbols } => {
            let cfg = cfg.expect("sweep-ber needs a config");
            if *symbols < MIN_BER_SYMBOLS {
                return Err(Error::InvalidParameter(format!("--symbols must be at least {MIN_BER_SYMBOLS}")).into());
            }
            let table = ber_experiment(cfg, snrs, *symbols, g.seed, g.workers)?;
            Output { csv: ber_csv(&table), json: serde_json::to_value(&table).expect("table serializes") }
        }
        Command::TheoryCheck { trials } => {
            let report = validation_battery(*trials, g.seed)?;
            Output {
                csv: format!(
                    "certified,consistent,generated,not_certified,not_evaluable\n{},{},{},{},{}\n",
                    report.certified, report.consistent, report.generated, report.not_certified, report.not_evaluable
                ),
                json: serde_json::to_value(&report).expect("report serializes"),
            }
        }
    };
    Ok(out)
}

fn discrepancy_note() -> String {
    format!(
        "the printed formula gives {:?} dB for the three reference links; the accompanying prose reports {:?} dB",
        FORMULA_PATH_LOSS_DB, PROSE_PATH_LOSS_DB
    )
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Runs a parsed command line, writing `<subcommand>.csv`,
/// `<subcommand>.json` and `manifest.json` into the output directory.
pub fn run(cli: &Cli, arguments: Vec<String>) -> Result<RunManifest, CliError> {
    let g = &cli.global;
    let cfg = match cli.command {
        Command::Linkbudget { .. } | Command::TheoryCheck { .. } => None,
        _ => Some(load_config(g)?),
    };
    let long_running = cfg.as_ref().is_some_and(SystemConfig::is_long_running);
    if long_running {
        eprintln!("warning: unknown dimension above {} per subcarrier, expect a long run", crate::config::LONG_RUNNING_DIM);
    }

    let out = execute(&cli.command, cfg.as_ref(), g)?;

    std::fs::create_dir_all(&g.out_dir).map_err(|source| CliError::Io { path: g.out_dir.clone(), source })?;
    let name = cli.command.name();
    let csv_path = g.out_dir.join(format!("{name}.csv"));
    let json_path = g.out_dir.join(format!("{name}.json"));
    let manifest_path = g.out_dir.join("manifest.json");
    write_file(&csv_path, &out.csv)?;
    write_file(&json_path, &serde_json::to_string_pretty(&out.json).expect("summary serializes"))?;

    let manifest = RunManifest {
        subcommand: name.to_string(),
        config: cfg,
        seed: g.seed,
        workers: g.workers,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        arguments,
        long_running,
        outputs: vec![csv_path, json_path, manifest_path.clone()],
    };
    write_file(&manifest_path, &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;

    match g.format {
        Format::Csv => print!("{}", out.csv),
        Format::Json => println!("{}", serde_json::to_string_pretty(&out.json).expect("summary serializes")),
    }
    if let Command::Linkbudget { .. } = cli.command {
        if let Some(db) = out.json["path_loss_db"].as_f64() {
            eprintln!("path loss: {db:.2} dB");
        }
        eprintln!("note: {}", discrepancy_note());
    }
    Ok(manifest)
}

/// Binary entry point; returns the process exit code.
pub fn main() -> i32 {
    let arguments: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&arguments) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, arguments) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
