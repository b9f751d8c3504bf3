//! `hypolog` experiment runner.
//!
//! Precedence: command-line flags override fields of the `--config` file,
//! which override built-in defaults. Exit codes: 0 success, 1 usage error,
//! 2 an invariant check failed.

mod artifact;
mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, ExperimentConfig, TimeGrid};

#[derive(Debug, Clone)]
pub struct UsageError(pub String);

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(std::io::Error),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<hypolog::Error> for CliError {
    fn from(e: hypolog::Error) -> Self {
        match e {
            hypolog::Error::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hypolog", version, about = "Reproducible experiments for hypoelliptic log-Sobolev constants")]
struct Cli {
    /// Cap on worker threads (falls back to HYPOLOG_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the command named in a JSON config file.
    Run(Common),
    ReprValidate(Common),
    QmsSpectrum(Common),
    MlsiEstimate(Common),
    CmlsiTable(Common),
    GradientCurve(Common),
    KappaLambda(Common),
    TransferenceCheck(Common),
    DecayTrajectory(Common),
    PropGradientCheck(Common),
    /// Plot a results CSV.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Debug, Subcommand)]
enum ReportAction {
    Render {
        results: PathBuf,
        /// Write an SVG plot; the path defaults to the CSV path with `.svg`.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// `default`, `log:a:b:k`, `log0:a:b:k`, `lin:a:b:k` or a comma list.
    #[arg(long)]
    t_grid: Option<TimeGrid>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    multistarts: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda_hat: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rho0_diag: Option<Vec<f64>>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Keep per-start optimizer traces in the JSON output.
    #[arg(long)]
    trace: bool,
}

impl Common {
    fn flags(&self, command: Option<CommandKind>) -> ExperimentConfig {
        ExperimentConfig {
            command,
            m: self.m,
            n: self.n,
            m_max: self.m_max,
            m_list: self.m_list.clone(),
            n_list: self.n_list.clone(),
            t_grid: self.t_grid.clone(),
            ensemble: self.ensemble,
            points: self.points,
            multistarts: self.multistarts,
            budget: self.budget,
            seed: self.seed,
            lambda_hat: self.lambda_hat,
            rho0_diag: self.rho0_diag.clone(),
            output_dir: self.output_dir.clone(),
            trace: self.trace.then_some(true),
            tolerances: None,
        }
    }
}

fn set_threads(cli: Option<usize>) -> Result<(), CliError> {
    let threads = match cli {
        Some(t) => Some(t),
        None => match std::env::var("HYPOLOG_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("HYPOLOG_THREADS={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run_experiment(common: &Common, command: Option<CommandKind>) -> Result<(), CliError> {
    let file = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let (Some(cmd), Some(in_file)) = (command, file.command) {
        if cmd != in_file {
            return Err(CliError::Usage(format!("config file names command {in_file}, but {cmd} was invoked")));
        }
    }
    let resolved = file.overlay(&common.flags(command)).resolve()?;
    let outcome = commands::execute(&resolved)?;
    let paths = artifact::write(&resolved, &outcome).map_err(CliError::Io)?;
    for p in &paths {
        println!("{}", p.display());
    }
    let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("checks failed: {}", failed.join(", "))))
    }
}

fn report(results: &PathBuf, svg: bool, out: &Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(results)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", results.display())))?;
    let csv = artifact::ResultsCsv::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", results.display())))?;
    let (kind, body) = render::render(&csv).map_err(|e| CliError::Usage(format!("{}: {e}", results.display())))?;
    if !svg {
        println!("{}: {kind:?} plot with {} rows (pass --svg to write it)", results.display(), csv.rows.len());
        return Ok(());
    }
    let path = out.clone().unwrap_or_else(|| results.with_extension("svg"));
    std::fs::write(&path, body).map_err(CliError::Io)?;
    println!("{}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    set_threads(cli.threads)?;
    let (common, kind) = match &cli.command {
        Command::Run(c) => (c, None),
        Command::ReprValidate(c) => (c, Some(CommandKind::ReprValidate)),
        Command::QmsSpectrum(c) => (c, Some(CommandKind::QmsSpectrum)),
        Command::MlsiEstimate(c) => (c, Some(CommandKind::MlsiEstimate)),
        Command::CmlsiTable(c) => (c, Some(CommandKind::CmlsiTable)),
        Command::GradientCurve(c) => (c, Some(CommandKind::GradientCurve)),
        Command::KappaLambda(c) => (c, Some(CommandKind::KappaLambda)),
        Command::TransferenceCheck(c) => (c, Some(CommandKind::TransferenceCheck)),
        Command::DecayTrajectory(c) => (c, Some(CommandKind::DecayTrajectory)),
        Command::PropGradientCheck(c) => (c, Some(CommandKind::PropGradientCheck)),
        Command::Report { action: ReportAction::Render { results, svg, out } } => return report(results, *svg, out),
    };
    if kind.is_none() && common.config.is_none() {
        return Err(CliError::Usage("run needs --config".into()));
    }
    run_experiment(common, kind)
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
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hypolog: {e}");
            ExitCode::from(e.code())
        }
    }
}
