//! `ep3`: eigenvalue sweeps, EP location, encirclement and phase tracking
//! for the three-level non-Hermitian model, with CSV/JSON outputs.

mod commands;
mod output;
mod trajectory;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ep3_core::{LambdaImPolicy, SystemConfig};

use output::{Manifest, OutDir};

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "EP3_THREADS";

#[derive(Parser, Debug)]
#[command(name = "ep3", version, about = "Exceptional points of a three-level non-Hermitian Hamiltonian")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML file with [passive] eps/tau and [coupling] gamma/kappa
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// λ_I = scale · λ_R + offset
    #[arg(long, global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda_im_scale: f64,
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_im_offset: f64,
    /// Accepted for interface stability; no default path draws random numbers
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep λ at fixed δ and classify avoided crossings
    Arc(commands::ArcArgs),
    /// Scan a (δ, λ_R) box for second-order EPs
    Locate(commands::LocateArgs),
    /// Track the spectrum around an elliptical contour
    Encircle(commands::EncircleArgs),
    /// Accumulated eigenvector phases along a contour or a saved trajectory
    Phase(commands::PhaseArgs),
    /// Regenerate every figure dataset with the built-in parameters
    Reproduce,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numeric(#[from] ep3_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numeric(ep3_core::Error::Config(_)) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io { .. } => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Numeric(ep3_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

fn report(err: &CliError) -> ExitCode {
    let body = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    eprintln!("{body}");
    ExitCode::from(err.exit_code())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A second initialisation only happens in tests; the first one wins.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub struct Context {
    pub cfg: SystemConfig,
    pub policy: LambdaImPolicy,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    configure_threads()?;
    let g = &cli.global;
    if !g.lambda_im_scale.is_finite() || !g.lambda_im_offset.is_finite() {
        return Err(CliError::Usage("λ_I policy parameters must be finite".into()));
    }
    let cfg = match &g.config {
        Some(p) => SystemConfig::from_file(p)?,
        None => SystemConfig::default(),
    };
    let ctx = Context { cfg, policy: LambdaImPolicy { scale: g.lambda_im_scale, offset: g.lambda_im_offset } };
    let mut out = OutDir::create(&g.out)?;
    match &cli.command {
        Command::Arc(a) => commands::arc(&ctx, a, &mut out)?,
        Command::Locate(a) => commands::locate(&ctx, a, &mut out)?,
        Command::Encircle(a) => commands::encircle(&ctx, a, &mut out)?,
        Command::Phase(a) => commands::phase(&ctx, a, &mut out)?,
        Command::Reproduce => commands::reproduce(&ctx, &mut out)?,
    }
    let files = out.files().to_vec();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().skip(1).collect(),
        config: &ctx.cfg,
        lambda_im_policy: ctx.policy,
        outputs: &files,
        duration_secs: started.elapsed().as_secs_f64(),
    };
    out.write_json("manifest.json", &manifest)?;
    println!("wrote {} files to {}", files.len() + 1, out.root().display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
