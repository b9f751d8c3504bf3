use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    ReprValidate,
    QmsSpectrum,
    MlsiEstimate,
    CmlsiTable,
    GradientCurve,
    KappaLambda,
    TransferenceCheck,
    DecayTrajectory,
    PropGradientCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::ReprValidate => "repr-validate",
            CommandKind::QmsSpectrum => "qms-spectrum",
            CommandKind::MlsiEstimate => "mlsi-estimate",
            CommandKind::CmlsiTable => "cmlsi-table",
            CommandKind::GradientCurve => "gradient-curve",
            CommandKind::KappaLambda => "kappa-lambda",
            CommandKind::TransferenceCheck => "transference-check",
            CommandKind::DecayTrajectory => "decay-trajectory",
            CommandKind::PropGradientCheck => "prop-gradient-check",
        }
    }

    /// Fields the command cannot run without.
    fn required(self) -> &'static [&'static str] {
        match self {
            CommandKind::ReprValidate
            | CommandKind::QmsSpectrum
            | CommandKind::MlsiEstimate
            | CommandKind::TransferenceCheck
            | CommandKind::DecayTrajectory => &["m"],
            CommandKind::CmlsiTable => &["m_list", "n_list"],
            CommandKind::GradientCurve | CommandKind::KappaLambda | CommandKind::PropGradientCheck => &["m_max"],
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A time grid: explicit values, or `default`, `log:a:b:k`, `log0:a:b:k`
/// (with a leading 0) or `lin:a:b:k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Spec(String),
}

impl TimeGrid {
    pub fn resolve(&self) -> Result<Vec<f64>, UsageError> {
        let grid = match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Spec(s) => parse_grid_spec(s)?,
        };
        if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite())
        {
            return Err(UsageError(format!("t_grid must be nonempty, nonnegative and strictly increasing: {self}")));
        }
        Ok(grid)
    }
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeGrid::List(v) => write!(f, "{v:?}"),
            TimeGrid::Spec(s) => f.write_str(s),
        }
    }
}

impl FromStr for TimeGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') || s == "default" {
            Ok(TimeGrid::Spec(s.to_string()))
        } else {
            s.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad time {x:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(TimeGrid::List)
        }
    }
}

fn parse_grid_spec(s: &str) -> Result<Vec<f64>, UsageError> {
    if s == "default" {
        return Ok(hypolog::gradest::default_time_grid());
    }
    let bad = || UsageError(format!("malformed t_grid spec {s:?}; expected default, log:a:b:k, log0:a:b:k or lin:a:b:k"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let a: f64 = parts[1].parse().map_err(|_| bad())?;
    let b: f64 = parts[2].parse().map_err(|_| bad())?;
    let k: usize = parts[3].parse().map_err(|_| bad())?;
    if k < 2 || !(b > a) {
        return Err(bad());
    }
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    match parts[0] {
        "lin" => Ok((0..k).map(|i| step(a, b, i)).collect()),
        "log" | "log0" if a > 0.0 => {
            let (la, lb) = (a.ln(), b.ln());
            let mut v: Vec<f64> = (0..k).map(|i| step(la, lb, i).exp()).collect();
            if parts[0] == "log0" {
                v.insert(0, 0.0);
            }
            Ok(v)
        }
        _ => Err(bad()),
    }
}

/// Tolerances in force; every field can be overridden from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bracket: f64,
    pub casimir: f64,
    pub trace_defect: f64,
    pub choi_min: f64,
    pub semigroup: f64,
    pub gap_slack: f64,
    pub c_hat_zero: f64,
    pub transfer_exact: f64,
    pub transfer_fd_rel: f64,
    pub entropy_transfer: f64,
    pub matrix_ge_rel: f64,
    pub lieb_stderr: f64,
    pub derivative_rel: f64,
    pub envelope_rel: f64,
    pub table_noise: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            bracket: 1e-10,
            casimir: 1e-10,
            trace_defect: 1e-10,
            choi_min: 1e-9,
            semigroup: 1e-9,
            gap_slack: 1e-6,
            c_hat_zero: 1e-9,
            transfer_exact: 1e-10,
            transfer_fd_rel: 1e-6,
            entropy_transfer: 1e-9,
            matrix_ge_rel: 1e-6,
            lieb_stderr: 3.0,
            derivative_rel: 1e-3,
            envelope_rel: 1e-6,
            table_noise: 0.1,
        }
    }
}

/// The JSON config document. Every field is optional in the file; command
/// line flags override file fields, and defaults fill the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multistarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0_diag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("malformed config {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay!(
            self, top, command, m, n, m_max, m_list, n_list, t_grid, ensemble, points, multistarts, budget, seed,
            lambda_hat, rho0_diag, output_dir, trace, tolerances
        );
        self
    }

    /// Fills command defaults and validates; the result is what gets hashed.
    pub fn resolve(&self) -> Result<Resolved, UsageError> {
        let command = self.command.ok_or_else(|| UsageError("missing required fields: command".into()))?;
        let missing: Vec<&str> = command
            .required()
            .iter()
            .copied()
            .filter(|f| match *f {
                "m" => self.m.is_none(),
                "m_max" => self.m_max.is_none(),
                "m_list" => self.m_list.is_none(),
                "n_list" => self.n_list.is_none(),
                _ => false,
            })
            .collect();
        if !missing.is_empty() {
            return Err(UsageError(format!("missing required fields for {command}: {}", missing.join(", "))));
        }
        let default_grid = match command {
            CommandKind::DecayTrajectory => TimeGrid::Spec("lin:0:2:51".into()),
            CommandKind::TransferenceCheck => TimeGrid::List(vec![0.0, 0.1, 1.0]),
            CommandKind::PropGradientCheck => TimeGrid::List(vec![0.2, 1.0]),
            _ => TimeGrid::Spec("default".into()),
        };
        let needs_grid = matches!(
            command,
            CommandKind::GradientCurve
                | CommandKind::KappaLambda
                | CommandKind::DecayTrajectory
                | CommandKind::TransferenceCheck
                | CommandKind::PropGradientCheck
        );
        let r = ExperimentConfig {
            command: Some(command),
            m: self.m,
            n: self.n.or(Some(1)),
            m_max: self.m_max,
            m_list: self.m_list.clone(),
            n_list: self.n_list.clone(),
            t_grid: if needs_grid { Some(self.t_grid.clone().unwrap_or(default_grid)) } else { None },
            ensemble: Some(self.ensemble.unwrap_or(64)),
            points: Some(self.points.unwrap_or(match command {
                CommandKind::TransferenceCheck => 50,
                _ => 2000,
            })),
            multistarts: Some(self.multistarts.unwrap_or(16)),
            budget: Some(self.budget.unwrap_or(2000)),
            seed: Some(self.seed.unwrap_or(0)),
            lambda_hat: self.lambda_hat,
            rho0_diag: self.rho0_diag.clone(),
            output_dir: None,
            trace: Some(self.trace.unwrap_or(false)),
            tolerances: Some(self.tolerances.clone().unwrap_or_default()),
        };
        let positive = [
            ("m", r.m),
            ("n", r.n),
            ("m_max", r.m_max),
            ("ensemble", r.ensemble),
            ("points", r.points),
            ("multistarts", r.multistarts),
            ("budget", r.budget),
        ];
        let zero: Vec<&str> = positive.iter().filter(|(_, v)| *v == Some(0)).map(|(k, _)| *k).collect();
        if !zero.is_empty() {
            return Err(UsageError(format!("fields must be positive: {}", zero.join(", "))));
        }
        for (name, list) in [("m_list", &r.m_list), ("n_list", &r.n_list)] {
            if let Some(l) = list {
                if l.is_empty() || l.contains(&0) {
                    return Err(UsageError(format!("{name} must be a nonempty list of positive integers")));
                }
            }
        }
        let times = match &r.t_grid {
            Some(g) => g.resolve()?,
            None => vec![],
        };
        Ok(Resolved {
            command,
            times,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("hypolog-out")),
            config: r,
        })
    }
}

/// A validated config with defaults filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: CommandKind,
    pub times: Vec<f64>,
    pub output_dir: PathBuf,
    /// Everything that influences the data; the output path is excluded.
    pub config: ExperimentConfig,
}

impl Resolved {
    pub fn tolerances(&self) -> &Tolerances {
        self.config.tolerances.as_ref().expect("filled by resolve")
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.expect("filled by resolve")
    }

    pub fn get(&self, v: Option<usize>) -> usize {
        v.expect("filled or required by resolve")
    }

    pub fn config_sha256(&self) -> String {
        let bytes = serde_json::to_vec(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
