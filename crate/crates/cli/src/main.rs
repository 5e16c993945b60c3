use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soilsd_cli::{cmd_analyze, cmd_fleet, cmd_synth, cmd_validate, AnalyzeOptions, CliError, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "soilsd", version, about = "Soiling loss estimation by convex signal decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON model config
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Input is a performance index rather than raw energy
    #[arg(long)]
    labeled: bool,
    /// Residual quantile, overriding the config
    #[arg(long)]
    tau: Option<f64>,
    /// CSV `date,good` of day quality flags
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn options(&self, dump_qp: bool) -> AnalyzeOptions {
        AnalyzeOptions {
            config: self.config.clone(),
            labeled: self.labeled,
            tau: self.tau,
            mask: self.mask.clone(),
            dump_qp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decompose one site's CSV (`timestamp,power` or `date,energy`)
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also write the assembled QP
        #[arg(long)]
        dump_qp: bool,
    },
    /// Analyze every CSV in a directory
    Fleet {
        input_dir: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Total loss fraction above which a site is flagged
        #[arg(long, default_value_t = 0.05)]
        outlier_loss: f64,
    },
    /// Synthetic validation study over the six scenarios
    Validate {
        #[arg(long, default_value_t = 10)]
        realizations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 730)]
        days: usize,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write one synthetic realization
    Synth {
        #[arg(long, default_value_t = 1)]
        scenario: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 730)]
        days: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { input, common, dump_qp } => {
            cmd_analyze(&input, &common.out, &common.options(dump_qp)).map(|_| ())
        }
        Command::Fleet {
            input_dir,
            common,
            jobs,
            outlier_loss,
        } => cmd_fleet(&input_dir, &common.out, &common.options(false), jobs, outlier_loss).map(|_| ()),
        Command::Validate {
            realizations,
            seed,
            days,
            common,
            jobs,
        } => cmd_validate(realizations, seed, days, &common.out, &common.options(false), jobs).map(|_| ()),
        Command::Synth { scenario, seed, days, out } => cmd_synth(scenario, seed, days, &out).map(|_| ()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
