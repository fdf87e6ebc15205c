//! `nlqnd`: protocol evaluation, parameter sweeps, cluster fusion and the
//! validation suite.

mod commands;
mod config;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlqnd::oracle::Mutation;
use nlqnd::protocols::{BellMeasurement, Case, Scheme, SchemeParams};

use config::{FileConfig, OptimizerOverrides, SweepKind};
use table::Format;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<nlqnd::Error> for CliError {
    fn from(e: nlqnd::Error) -> Self {
        match e {
            nlqnd::Error::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "nlqnd", version, about = "Nonlocal CV QND gates over lossy links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one protocol instance.
    Protocol(ProtocolArgs),
    /// Optimize over a grid and write CSV or JSON.
    Sweep(GridArgs),
    /// Edge-node nullifier variance of two fused clusters.
    Cluster(GridArgs),
    /// Run the invariant suite.
    Validate {
        /// Inject a deliberate fault to check that the suite catches it.
        #[arg(long, value_enum, default_value = "none")]
        mutation: MutationArg,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MutationArg {
    None,
    NoiseVariance,
    GammaSign,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BellArg {
    Qnd,
    Bs,
}

#[derive(Args)]
struct ProtocolArgs {
    scheme: Scheme,
    #[arg(long)]
    g: f64,
    #[arg(long = "T")]
    transmissivity: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, conflicts_with = "ideal")]
    case: Option<Case>,
    /// Shorthand for `--case ideal`.
    #[arg(long)]
    ideal: bool,
    /// Optimize the free gains.
    #[arg(long)]
    optimal: bool,
    /// Explicit parameters as JSON for the scheme's parameter record.
    #[arg(long, conflicts_with = "optimal")]
    params: Option<String>,
    #[arg(long, value_enum, default_value = "qnd")]
    bell: BellArg,
    /// GP finite offline gain G₁.
    #[arg(long)]
    g1: Option<f64>,
    /// GP mediator thermal occupation (with --g1).
    #[arg(long, default_value_t = 0.0, requires = "g1")]
    nbar: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GridArgs {
    /// TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<SweepKind>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    #[arg(long)]
    case: Option<Case>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long = "loss-db", value_delimiter = ',', allow_negative_numbers = true)]
    loss_db: Option<Vec<f64>>,
    #[arg(long = "T", value_delimiter = ',')]
    transmissivity: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Cluster input squeezing S.
    #[arg(long = "S", value_delimiter = ',')]
    squeezing: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    g1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    nbar: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    starts: Option<usize>,
}

impl GridArgs {
    fn resolve(self) -> Result<config::Resolved, CliError> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            kind: self.kind,
            schemes: self.schemes,
            case: self.case,
            g: self.g,
            loss_db: self.loss_db,
            transmissivity: self.transmissivity,
            eta: self.eta,
            squeezing: self.squeezing,
            g1: self.g1,
            nbar: self.nbar,
            format: self.format,
            output: self.output,
            optimizer: OptimizerOverrides {
                starts: self.starts,
                ..Default::default()
            },
        };
        file.overridden_by(flags).resolve()
    }
}

fn emit(table: &table::Table, cfg: &config::Resolved) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            table.write(cfg.format, cfg, &mut w)?;
            w.flush()?;
        }
        None => table.write(cfg.format, cfg, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Protocol(a) => {
            let case = if a.ideal { Case::Ideal } else { a.case.unwrap_or(Case::Ideal) };
            if case == Case::Ideal && a.eta != 1.0 {
                return Err(CliError::Usage("case ideal takes --eta 1".into()));
            }
            let params = match (&a.params, a.optimal) {
                (Some(json), false) => {
                    let mut v: serde_json::Value =
                        serde_json::from_str(json).map_err(|e| CliError::Usage(format!("--params: {e}")))?;
                    v["scheme"] = serde_json::Value::String(a.scheme.to_string());
                    let p: SchemeParams =
                        serde_json::from_value(v).map_err(|e| CliError::Usage(format!("--params: {e}")))?;
                    Some(p)
                }
                (None, true) => None,
                _ => return Err(CliError::Usage("give exactly one of --optimal or --params".into())),
            };
            let req = commands::ProtocolRequest {
                scheme: a.scheme,
                g: a.g,
                transmissivity: a.transmissivity,
                eta: a.eta,
                case,
                bell: match a.bell {
                    BellArg::Qnd => BellMeasurement::Qnd,
                    BellArg::Bs => BellMeasurement::BeamSplitter,
                },
                offline: a.g1.map(|g1| (g1, a.nbar)),
                params,
                json: a.json,
            };
            commands::protocol(req, &mut io::stdout().lock())
        }
        Command::Sweep(a) => {
            let cfg = a.resolve()?;
            emit(&commands::sweep(&cfg)?, &cfg)
        }
        Command::Cluster(a) => {
            let cfg = a.resolve()?;
            emit(&commands::cluster(&cfg)?, &cfg)
        }
        Command::Validate { mutation } => {
            let m = match mutation {
                MutationArg::None => Mutation::None,
                MutationArg::NoiseVariance => Mutation::NoiseVariance,
                MutationArg::GammaSign => Mutation::GammaSign,
            };
            if commands::validate(m, &mut io::stdout().lock())? {
                Ok(())
            } else {
                Err(CliError::Numeric("invariant suite reported failures".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlqnd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
