mod commands;
mod error;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slicesim_core::io::{HuWindow, DEFAULT_TOL_MM};

use crate::commands::Context;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "slicesim",
    version,
    about = "Simulate thick-slice CT volumes from thin-slice volumes and benchmark degradation methods"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Lower end of the HU window mapped to 0.
    #[arg(long, global = true, default_value_t = -1024.0, allow_negative_numbers = true)]
    hu_lo: f64,
    /// Upper end of the HU window mapped to 1.
    #[arg(
        long,
        global = true,
        default_value_t = 3071.0,
        allow_negative_numbers = true
    )]
    hu_hi: f64,
    /// Peak intensity used in PSNR.
    #[arg(
        long,
        global = true,
        default_value_t = 1.0,
        allow_negative_numbers = true
    )]
    max_i: f64,
    /// Slice-location matching tolerance in mm.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL_MM, allow_negative_numbers = true)]
    tol_mm: f64,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the `generated_at` field from JSON outputs.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade one thin volume into a thick volume.
    Simulate(commands::simulate::SimulateArgs),
    /// Compare a predicted volume with a reference volume.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Run every method on thin/true-thick pairs and test baselines against the proposed method.
    Compare(commands::compare::CompareArgs),
    /// Generate thick counterparts for a directory of thin volumes and write a pair manifest.
    ExportPairs(commands::export_pairs::ExportPairsArgs),
    /// Write windowed PNG views of a volume.
    Snapshot(commands::snapshot::SnapshotArgs),
    /// Write synthetic thin and true-thick phantom volumes.
    Phantom(commands::phantom::PhantomArgs),
}

fn context(global: &GlobalOpts) -> CliResult<Context> {
    let hu_window = HuWindow::new(global.hu_lo, global.hu_hi)?;
    if !(global.max_i.is_finite() && global.max_i > 0.0) {
        return Err(CliError::Usage(format!(
            "--max-i must be finite and positive, got {}",
            global.max_i
        )));
    }
    if !(global.tol_mm.is_finite() && global.tol_mm >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tol-mm must be finite and non-negative, got {}",
            global.tol_mm
        )));
    }
    if let Some(n) = global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let generated_at = (!global.no_timestamp)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    Ok(Context {
        hu_window,
        max_i: global.max_i,
        tol_mm: global.tol_mm,
        generated_at,
    })
}

fn run(cli: Cli) -> CliResult {
    let ctx = context(&cli.global)?;
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(&ctx, args),
        Command::Evaluate(args) => commands::evaluate::run(&ctx, args),
        Command::Compare(args) => commands::compare::run(&ctx, args),
        Command::ExportPairs(args) => commands::export_pairs::run(&ctx, args),
        Command::Snapshot(args) => commands::snapshot::run(&ctx, args),
        Command::Phantom(args) => commands::phantom::run(&ctx, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
