use std::path::PathBuf;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use isym_core::matrix_file::read_matrix_file;
use isym_core::{builtin_system, ConsistencyRule, PhasePoint, SolverConfig, SystemParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UsageError {
    /// `--help` or `--version` output; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{flag}: {message}")]
    Invalid { flag: String, message: String },
}

impl UsageError {
    fn invalid(flag: &str, message: impl Into<String>) -> Self {
        UsageError::Invalid {
            flag: flag.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            UsageError::Info(_) => 0,
            UsageError::Invalid { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Integrate,
    Verify,
    Converge,
    Geometry,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub system: String,
    pub params: SystemParams,
    pub scheme: String,
    pub rule: ConsistencyRule,
    pub h: f64,
    pub steps: usize,
    pub z0: PhasePoint,
    pub out_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub tol: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    pub t_final: f64,
    pub h0: f64,
    pub levels: usize,
}

#[derive(Parser, Debug)]
#[command(name = "isym", version, about = "Implicit symplectic integrators and their certification")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Integrate and write the trajectory as CSV.
    Integrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stepping: Stepping,
    },
    /// Integrate, then certify every step; exit 0 only when symplectic.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stepping: Stepping,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate the global order of accuracy.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 0.2)]
        h0: f64,
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
    /// Residuals of the consistency-map checks for the scheme's decomposition.
    Geometry {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0.1", allow_hyphen_values = true)]
        h: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    system: String,
    /// `key=v1,v2,...`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    /// midpoint | alpha:<a> | bmatrix:<path> | affine:<pathB>,<pathC>
    #[arg(long, default_value = "midpoint")]
    scheme: String,
    #[arg(long, allow_hyphen_values = true)]
    z0: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Solver::Newton)]
    solver: Solver,
}

#[derive(Args, Debug)]
struct Stepping {
    #[arg(long, allow_hyphen_values = true)]
    h: String,
    #[arg(long)]
    steps: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Solver {
    Newton,
    FixedPoint,
}

fn clap_usage(err: clap::Error) -> UsageError {
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            return UsageError::Info(err.render().to_string());
        }
        _ => {}
    }
    let flag = [ContextKind::InvalidArg, ContextKind::InvalidSubcommand]
        .iter()
        .find_map(|k| match err.get(*k) {
            Some(ContextValue::String(s)) => Some(s.clone()),
            Some(ContextValue::Strings(v)) => v.first().cloned(),
            _ => None,
        })
        .unwrap_or_else(|| "command".to_string());
    let message = err.render().to_string();
    let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
    UsageError::invalid(&flag, first)
}

fn parse_real(flag: &str, text: &str) -> Result<f64, UsageError> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(UsageError::invalid(flag, format!("expected a finite number, got '{text}'"))),
    }
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, UsageError> {
    text.split(',').map(|s| parse_real(flag, s)).collect()
}

fn parse_params(raw: &[String]) -> Result<SystemParams, UsageError> {
    let mut params = SystemParams::new();
    for entry in raw {
        let (key, values) = entry
            .split_once('=')
            .ok_or_else(|| UsageError::invalid("--param", format!("expected key=v1,v2,..., got '{entry}'")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(UsageError::invalid("--param", "empty parameter name"));
        }
        if params.insert(key.to_string(), parse_list("--param", values)?).is_some() {
            return Err(UsageError::invalid("--param", format!("'{key}' given twice")));
        }
    }
    Ok(params)
}

fn matrix_for(path: &str, n: usize) -> Result<isym_core::SquareMatrix2n, UsageError> {
    let m = read_matrix_file(path).map_err(|e| UsageError::invalid("--scheme", e.to_string()))?;
    if m.dim_n() != n {
        return Err(UsageError::invalid(
            "--scheme",
            format!("{path} has n = {}, system has n = {n}", m.dim_n()),
        ));
    }
    Ok(m)
}

/// Resolves a scheme string against a system with `n` degrees of freedom.
pub fn parse_scheme(text: &str, n: usize) -> Result<ConsistencyRule, UsageError> {
    let bad = |msg: String| UsageError::invalid("--scheme", msg);
    let (head, arg) = text.split_once(':').unwrap_or((text, ""));
    match (head, arg) {
        ("midpoint", "") => Ok(ConsistencyRule::midpoint(n)),
        ("alpha", a) => {
            let alpha = parse_real("--scheme", a)?;
            ConsistencyRule::alpha(n, alpha).map_err(|e| bad(e.to_string()))
        }
        ("bmatrix", path) if !path.is_empty() => Ok(ConsistencyRule::bmatrix(matrix_for(path, n)?)),
        ("affine", paths) => {
            let (pb, pc) = paths
                .split_once(',')
                .ok_or_else(|| bad("affine expects <pathB>,<pathC>".into()))?;
            ConsistencyRule::affine(matrix_for(pb, n)?, matrix_for(pc, n)?).map_err(|e| bad(e.to_string()))
        }
        _ => Err(bad(format!(
            "unknown scheme '{text}' (expected midpoint, alpha:<a>, bmatrix:<path> or affine:<pathB>,<pathC>)"
        ))),
    }
}

pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("isym")).chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(clap_usage)?;

    let defaults = (1.0, 0.2, 5);
    let (command, common, h, steps, report, (t_final, h0, levels)) = match cli.command {
        Sub::Integrate { common, stepping } => (Command::Integrate, common, stepping.h, stepping.steps, None, defaults),
        Sub::Verify { common, stepping, report } => {
            (Command::Verify, common, stepping.h, stepping.steps, report, defaults)
        }
        Sub::Converge { common, t_final, h0, levels } => {
            (Command::Converge, common, "0.1".to_string(), 1, None, (t_final, h0, levels))
        }
        Sub::Geometry { common, h } => (Command::Geometry, common, h, 1, None, defaults),
    };

    let params = parse_params(&common.params)?;
    let sys = builtin_system(&common.system, &params).map_err(|e| {
        let flag = if matches!(e, isym_core::Error::UnknownSystem(_)) { "--system" } else { "--param" };
        UsageError::invalid(flag, e.to_string())
    })?;
    let n = sys.dim_n();
    let rule = parse_scheme(&common.scheme, n)?;

    let h = parse_real("--h", &h)?;
    if h == 0.0 {
        return Err(UsageError::invalid("--h", "step size must be non-zero"));
    }
    if steps == 0 {
        return Err(UsageError::invalid("--steps", "at least one step is required"));
    }
    let z0 = PhasePoint::new(parse_list("--z0", &common.z0)?).map_err(|e| UsageError::invalid("--z0", e.to_string()))?;
    if z0.dim_n() != n {
        return Err(UsageError::invalid(
            "--z0",
            format!("expected {} coordinates for system '{}', got {}", 2 * n, common.system, z0.len()),
        ));
    }
    if !(common.tol.is_finite() && common.tol > 0.0) {
        return Err(UsageError::invalid("--tol", "tolerance must be positive"));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(UsageError::invalid("--T", "final time must be positive"));
    }
    if !(h0.is_finite() && h0 > 0.0) {
        return Err(UsageError::invalid("--h0", "h0 must be positive"));
    }
    if levels < 3 {
        return Err(UsageError::invalid("--levels", "at least 3 levels are needed for a slope"));
    }

    Ok(RunConfig {
        command,
        system: common.system,
        params,
        scheme: common.scheme,
        rule,
        h,
        steps,
        z0,
        out_path: common.out,
        report_path: report,
        tol: common.tol,
        seed: common.seed,
        solver: match common.solver {
            Solver::Newton => SolverConfig::default(),
            Solver::FixedPoint => SolverConfig::fixed_point(),
        },
        t_final,
        h0,
        levels,
    })
}
