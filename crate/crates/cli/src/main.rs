//! `hyperdetect` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation, 2 file and format errors,
//! 3 numerical failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyperdetect::Error;

use crate::config::Config;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                Error::Argument(_) | Error::Validation(_) | Error::Dimension(_) => 1,
                Error::Io { .. }
                | Error::Format { .. }
                | Error::MissingKey(_)
                | Error::Unsupported { .. }
                | Error::SizeMismatch { .. } => 2,
                Error::Numerical(_)
                | Error::Degenerate(_)
                | Error::Infeasible
                | Error::Unbounded
                | Error::Extraction(_) => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperdetect", version, about = "Nonlinear mixture detection and endmember extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; also the default location of input files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// paper-main, paper-roc or paper-extract.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Synthesize a scene with ground truth.
    Generate,
    /// Calibrate the threshold and label every pixel.
    Detect,
    /// Sweep thresholds against ground truth.
    Roc,
    /// Estimate endmembers with vca, mves or the detector-guided loop.
    Extract,
    /// Detect, then unmix each pixel with its branch.
    Pipeline,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Detect => "detect",
            Command::Roc => "roc",
            Command::Extract => "extract",
            Command::Pipeline => "pipeline",
        }
    }
}

pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub verbose: bool,
}

impl Context {
    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[hyperdetect] {}", msg.as_ref());
        }
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.config
            .get("seed")?
            .ok_or_else(|| CliError::Usage("this command needs --seed".into()))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let name = cli.command.name();
    let mut cfg = match &cli.preset {
        Some(p) => config::preset(p, name)?,
        None => Config::default(),
    };
    if let Some(path) = &cli.config {
        cfg.merge(Config::load(path)?);
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    let ctx = Context {
        config: cfg,
        out: cli.out,
        verbose: cli.verbose,
    };
    std::fs::create_dir_all(&ctx.out).map_err(|source| Error::Io {
        path: ctx.out.clone(),
        source,
    })?;
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Detect => commands::detect(&ctx),
        Command::Roc => commands::roc(&ctx),
        Command::Extract => commands::extract(&ctx),
        Command::Pipeline => commands::pipeline(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
