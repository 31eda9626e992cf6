//! Flag parsing, config-file merging and validation.
//!
//! Every value can come from (in order of precedence) a command-line flag, a
//! `key=value` config file, the selected preset, or a built-in default. The
//! seed additionally falls back to the `TCLEVY_SEED` environment variable.
//! Stepsizes are accepted only as negative power-of-two exponents
//! (`--delta-exp 8` means 2^-8): the coupled experiments need exact grid
//! refinement ratios, so arbitrary reals are rejected.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for CliError {}

fn err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError(msg.into()))
}

#[derive(Parser, Debug)]
#[command(
    name = "tclevy",
    version,
    about = "Path simulation and convergence-order experiments for SDEs driven by time-changed Levy noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate an alpha-stable subordinator and dump (n, t_n, D_t_n) rows
    Subordinator(CommonArgs),
    /// Simulate the discretized inverse subordinator and dump (t, E_delta_t)
    Inverse(CommonArgs),
    /// Simulate one time-changed path and dump (t, X_delta_t)
    Path(CommonArgs),
    /// Coupled-noise strong (RMS) convergence-order experiment
    StrongOrder(CommonArgs),
    /// Coupled-noise weak convergence-order experiment (explicit scheme)
    WeakOrder(CommonArgs),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Subordinator(_) => CommandKind::Subordinator,
            Command::Inverse(_) => CommandKind::Inverse,
            Command::Path(_) => CommandKind::Path,
            Command::StrongOrder(_) => CommandKind::StrongOrder,
            Command::WeakOrder(_) => CommandKind::WeakOrder,
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Subordinator(a)
            | Command::Inverse(a)
            | Command::Path(a)
            | Command::StrongOrder(a)
            | Command::WeakOrder(a) => a,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Flat key=value config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Parameter preset: "paper" (full protocol) or "desk" (reduced scale)
    #[arg(long)]
    pub preset: Option<String>,
    /// Problem name: "paper-example" or "linear:a,b,s"
    #[arg(long)]
    pub problem: Option<String>,
    /// Stability index of the subordinator, in (0,1)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Drift implicitness of the scheme, between 0 and 1
    #[arg(long)]
    pub theta: Option<f64>,
    /// Stepsize exponents e meaning delta = 2^-e; comma-separated ladder
    /// for order commands
    #[arg(long, value_delimiter = ',')]
    pub delta_exp: Option<Vec<u32>>,
    /// Reference stepsize exponent for order commands
    #[arg(long)]
    pub ref_exp: Option<u32>,
    /// Monte Carlo path count for order commands
    #[arg(long)]
    pub paths: Option<usize>,
    /// Terminal time T of the time-changed problem
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Random seed (also TCLEVY_SEED env var)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extra output: original-clock path (n, t_n, Y_n) for `path` runs
    #[arg(long)]
    pub original_out: Option<PathBuf>,
    /// Worker thread cap for the experiment harness
    #[arg(long)]
    pub threads: Option<usize>,
    /// Query-grid intervals for inverse/path dumps
    #[arg(long)]
    pub points: Option<usize>,
    /// Weak-order test functional: "identity" or "square"
    #[arg(long)]
    pub phi: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Subordinator,
    Inverse,
    Path,
    StrongOrder,
    WeakOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemChoice {
    Example,
    Linear { a: f64, b: f64, jump_scale: f64 },
}

impl ProblemChoice {
    pub fn build(&self) -> tclevy_core::SdeProblem {
        match *self {
            ProblemChoice::Example => tclevy_core::paper_example(),
            ProblemChoice::Linear { a, b, jump_scale } => {
                tclevy_core::linear_problem(a, b, jump_scale)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiChoice {
    Identity,
    Square,
}

/// Fully validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: ProblemChoice,
    pub alpha: f64,
    pub theta: f64,
    pub delta_exps: Vec<u32>,
    pub ref_exp: u32,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub original_out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub points: usize,
    pub phi: PhiChoice,
}

impl RunConfig {
    pub fn deltas(&self) -> Vec<f64> {
        self.delta_exps
            .iter()
            .map(|e| 2f64.powi(-(*e as i32)))
            .collect()
    }

    pub fn ref_delta(&self) -> f64 {
        2f64.powi(-(self.ref_exp as i32))
    }
}

struct Preset {
    delta_exps: Vec<u32>,
    ref_exp: u32,
    paths: usize,
}

fn preset_for(name: &str, kind: CommandKind) -> Result<Preset, CliError> {
    match (name, kind) {
        ("paper", CommandKind::StrongOrder) => Ok(Preset {
            delta_exps: vec![15, 14, 13],
            ref_exp: 16,
            paths: 5000,
        }),
        ("paper", CommandKind::WeakOrder) => Ok(Preset {
            delta_exps: vec![10, 9, 8],
            ref_exp: 12,
            paths: 10_000,
        }),
        ("desk", CommandKind::StrongOrder) => Ok(Preset {
            delta_exps: vec![9, 8, 7, 6],
            ref_exp: 12,
            paths: 2000,
        }),
        ("desk", CommandKind::WeakOrder) => Ok(Preset {
            delta_exps: vec![8, 7, 6],
            ref_exp: 12,
            paths: 10_000,
        }),
        ("paper", CommandKind::Subordinator) | ("desk", CommandKind::Subordinator) => Ok(Preset {
            delta_exps: vec![8],
            ref_exp: 8,
            paths: 1,
        }),
        ("paper", CommandKind::Inverse) | ("desk", CommandKind::Inverse) => Ok(Preset {
            delta_exps: vec![9],
            ref_exp: 9,
            paths: 1,
        }),
        ("paper", CommandKind::Path) => Ok(Preset {
            delta_exps: vec![15],
            ref_exp: 15,
            paths: 1,
        }),
        ("desk", CommandKind::Path) => Ok(Preset {
            delta_exps: vec![8],
            ref_exp: 8,
            paths: 1,
        }),
        _ => err(format!(
            "unknown preset \"{name}\" (expected \"paper\" or \"desk\")"
        )),
    }
}

const VALID_KEYS: &[&str] = &[
    "preset",
    "problem",
    "alpha",
    "theta",
    "delta-exp",
    "ref-exp",
    "paths",
    "horizon",
    "seed",
    "out",
    "original-out",
    "threads",
    "points",
    "phi",
];

fn parse_config_file(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!(
                "config line {} is not key=value: {line}",
                line_no + 1
            ));
        };
        let key = key.trim().to_string();
        if !VALID_KEYS.contains(&key.as_str()) {
            return err(format!("unknown config key \"{key}\""));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T, CliError> {
    raw.parse::<T>()
        .map_err(|_| CliError(format!("config value for {key} is invalid: {raw}")))
}

pub fn parse_problem(raw: &str) -> Result<ProblemChoice, CliError> {
    if raw == "paper-example" {
        return Ok(ProblemChoice::Example);
    }
    if let Some(spec) = raw.strip_prefix("linear:") {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 3 {
            return err(format!(
                "problem \"linear\" needs three coefficients \"linear:a,b,s\", got {raw}"
            ));
        }
        let mut vals = [0.0; 3];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse::<f64>()
                .map_err(|_| CliError(format!("invalid linear coefficient \"{part}\"")))?;
            if !slot.is_finite() {
                return err(format!(
                    "linear coefficients must be finite, got \"{part}\""
                ));
            }
        }
        return Ok(ProblemChoice::Linear {
            a: vals[0],
            b: vals[1],
            jump_scale: vals[2],
        });
    }
    err(format!(
        "unknown problem \"{raw}\" (expected \"paper-example\" or \"linear:a,b,s\")"
    ))
}

/// Merge flags, config file, preset and defaults into a validated RunConfig.
pub fn resolve(
    kind: CommandKind,
    args: &CommonArgs,
    env_seed: Option<u64>,
) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError(format!("cannot read config file {}: {e}", path.display()))
            })?;
            parse_config_file(&text)?
        }
        None => HashMap::new(),
    };

    let preset_name = match (&args.preset, file.get("preset")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(p.clone()),
        (None, None) => None,
    };
    let preset = match &preset_name {
        Some(name) => Some(preset_for(name, kind)?),
        None => None,
    };

    let alpha = match (args.alpha, file.get("alpha")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_value(raw, "alpha")?,
        (None, None) => return err("missing required --alpha"),
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return err(format!("alpha must lie in (0,1), got {alpha}"));
    }

    let theta_given = match (args.theta, file.get("theta")) {
        (Some(v), _) => Some(v),
        (None, Some(raw)) => Some(parse_value(raw, "theta")?),
        (None, None) => None,
    };
    let theta = match kind {
        CommandKind::Subordinator | CommandKind::Inverse => theta_given.unwrap_or(0.0),
        CommandKind::WeakOrder => {
            let t = theta_given.unwrap_or(0.0);
            if t != 0.0 {
                return err(format!(
                    "weak-order runs use the explicit scheme; theta must be 0, got {t}"
                ));
            }
            t
        }
        CommandKind::Path | CommandKind::StrongOrder => match theta_given {
            Some(t) => t,
            None => return err("missing required --theta"),
        },
    };
    if !(0.0..=1.0).contains(&theta) {
        return err(format!("theta must be in [0,1], got {theta}"));
    }

    let delta_exps = match (&args.delta_exp, file.get("delta-exp")) {
        (Some(v), _) => v.clone(),
        (None, Some(raw)) => {
            let mut exps = Vec::new();
            for part in raw.split(',') {
                exps.push(parse_value(part.trim(), "delta-exp")?);
            }
            exps
        }
        (None, None) => match &preset {
            Some(p) => p.delta_exps.clone(),
            None => return err("missing required --delta-exp"),
        },
    };
    if delta_exps.is_empty() {
        return err("missing required --delta-exp");
    }
    for &e in &delta_exps {
        if e == 0 || e > 48 {
            return err(format!(
                "delta exponent must be in 1..=48 (delta = 2^-e in (0,1)), got {e}"
            ));
        }
    }
    let needs_ladder = matches!(kind, CommandKind::StrongOrder | CommandKind::WeakOrder);
    if !needs_ladder && delta_exps.len() != 1 {
        return err("exactly one --delta-exp is expected for this command");
    }

    let ref_exp = match (args.ref_exp, file.get("ref-exp")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_value(raw, "ref-exp")?,
        (None, None) => match &preset {
            Some(p) => p.ref_exp,
            None if needs_ladder => return err("missing required --ref-exp"),
            None => delta_exps[0],
        },
    };
    if needs_ladder {
        if ref_exp > 48 {
            return err(format!("ref exponent must be at most 48, got {ref_exp}"));
        }
        if let Some(&max_exp) = delta_exps.iter().max() {
            if ref_exp < max_exp {
                return err(format!(
                    "reference stepsize must divide every delta: ref-exp {ref_exp} must be >= \
                     the largest delta-exp {max_exp}"
                ));
            }
        }
    }

    let n_paths = match (args.paths, file.get("paths")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_value(raw, "paths")?,
        (None, None) => match &preset {
            Some(p) => p.paths,
            None if needs_ladder => return err("missing required --paths"),
            None => 1,
        },
    };
    if needs_ladder && n_paths < 2 {
        return err(format!(
            "order experiments need at least 2 paths, got {n_paths}"
        ));
    }

    let horizon = match (args.horizon, file.get("horizon")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_value(raw, "horizon")?,
        (None, None) => 1.0,
    };
    if !(horizon > 0.0 && horizon.is_finite()) {
        return err(format!(
            "horizon must be positive and finite, got {horizon}"
        ));
    }

    let seed = match (args.seed, file.get("seed")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_value(raw, "seed")?,
        (None, None) => env_seed.unwrap_or(0),
    };

    let out = match (&args.out, file.get("out")) {
        (Some(v), _) => v.clone(),
        (None, Some(raw)) => PathBuf::from(raw),
        (None, None) => return err("missing required --out"),
    };

    let original_out = match (&args.original_out, file.get("original-out")) {
        (Some(v), _) => Some(v.clone()),
        (None, Some(raw)) => Some(PathBuf::from(raw)),
        (None, None) => None,
    };

    let threads = match (args.threads, file.get("threads")) {
        (Some(v), _) => Some(v),
        (None, Some(raw)) => Some(parse_value(raw, "threads")?),
        (None, None) => None,
    };
    if threads == Some(0) {
        return err("threads must be at least 1");
    }

    let points = match (args.points, file.get("points")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_value(raw, "points")?,
        (None, None) => 1000,
    };
    if points == 0 {
        return err("points must be at least 1");
    }

    let phi = match (&args.phi, file.get("phi")) {
        (Some(v), _) => v.as_str(),
        (None, Some(raw)) => raw.as_str(),
        (None, None) => "identity",
    };
    let phi = match phi {
        "identity" => PhiChoice::Identity,
        "square" => PhiChoice::Square,
        other => {
            return err(format!(
                "unknown phi \"{other}\" (expected identity or square)"
            ))
        }
    };

    let problem = match (&args.problem, file.get("problem")) {
        (Some(v), _) => parse_problem(v)?,
        (None, Some(raw)) => parse_problem(raw)?,
        (None, None) => ProblemChoice::Example,
    };

    let config = RunConfig {
        command: kind,
        problem,
        alpha,
        theta,
        delta_exps,
        ref_exp,
        n_paths,
        horizon,
        seed,
        out,
        original_out,
        threads,
        points,
        phi,
    };

    // the solvability guard, checked here so the message names the constraint
    let cstar = config.problem.build().lipschitz_bound();
    let max_delta = config.deltas().iter().cloned().fold(0.0, f64::max);
    if config.theta * cstar.sqrt() * max_delta >= 1.0 {
        return err(format!(
            "theta*sqrt(Cstar)*delta must be < 1, got {}",
            config.theta * cstar.sqrt() * max_delta
        ));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strong_args() -> CommonArgs {
        CommonArgs {
            preset: Some("paper".into()),
            alpha: Some(0.9),
            theta: Some(0.5),
            out: Some(PathBuf::from("x.csv")),
            ..Default::default()
        }
    }

    #[test]
    fn paper_preset_matches_protocol() {
        let cfg = resolve(CommandKind::StrongOrder, &strong_args(), None).unwrap();
        assert_eq!(cfg.delta_exps, vec![15, 14, 13]);
        assert_eq!(cfg.ref_exp, 16);
        assert_eq!(cfg.n_paths, 5000);
        assert_eq!(cfg.theta, 0.5);
        assert_eq!(cfg.alpha, 0.9);
        assert_eq!(cfg.horizon, 1.0);
        assert_eq!(cfg.ref_delta(), 2f64.powi(-16));
    }

    #[test]
    fn missing_alpha_is_named() {
        let mut args = strong_args();
        args.alpha = None;
        let e = resolve(CommandKind::StrongOrder, &args, None).unwrap_err();
        assert!(e.0.contains("--alpha"), "{e}");
    }

    #[test]
    fn theta_domain_is_enforced() {
        let mut args = strong_args();
        args.theta = Some(1.5);
        let e = resolve(CommandKind::StrongOrder, &args, None).unwrap_err();
        assert!(e.0.contains("[0,1]"), "{e}");
    }

    #[test]
    fn weak_rejects_nonzero_theta() {
        let mut args = strong_args();
        args.theta = Some(0.5);
        let e = resolve(CommandKind::WeakOrder, &args, None).unwrap_err();
        assert!(e.0.contains("theta must be 0"), "{e}");
    }

    #[test]
    fn env_seed_is_a_fallback_only() {
        let mut args = strong_args();
        let cfg = resolve(CommandKind::StrongOrder, &args, Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        args.seed = Some(3);
        let cfg = resolve(CommandKind::StrongOrder, &args, Some(99)).unwrap();
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn config_file_fills_and_flags_override() {
        let dir = std::env::temp_dir().join("tclevy-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(
            &path,
            "alpha=0.45\ntheta=1\nseed=5\nout=file.csv\npreset=desk\n",
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path.clone()),
            theta: Some(0.0),
            ..Default::default()
        };
        let cfg = resolve(CommandKind::StrongOrder, &args, None).unwrap();
        assert_eq!(cfg.alpha, 0.45);
        assert_eq!(cfg.theta, 0.0); // flag wins over file
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.delta_exps, vec![9, 8, 7, 6]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        assert!(parse_config_file("bogus=1\n").is_err());
        assert!(parse_config_file("# comment\nalpha=0.9\n").is_ok());
    }

    #[test]
    fn problem_names_parse() {
        assert_eq!(
            parse_problem("paper-example").unwrap(),
            ProblemChoice::Example
        );
        assert_eq!(
            parse_problem("linear:-1,0.5,1").unwrap(),
            ProblemChoice::Linear {
                a: -1.0,
                b: 0.5,
                jump_scale: 1.0
            }
        );
        assert!(parse_problem("linear:1,2").is_err());
        assert!(parse_problem("linear:inf,0,0").is_err());
        assert!(parse_problem("linear:0,NaN,0").is_err());
        assert!(parse_problem("cubic").is_err());
    }

    #[test]
    fn guard_violation_names_the_constraint() {
        let args = CommonArgs {
            problem: Some("linear:-20,0,0".into()), // C* = 400
            alpha: Some(0.9),
            theta: Some(1.0),
            delta_exp: Some(vec![1]), // delta = 0.5: 1*20*0.5 = 10 >= 1
            ref_exp: Some(4),
            paths: Some(10),
            out: Some(PathBuf::from("x.csv")),
            ..Default::default()
        };
        let e = resolve(CommandKind::StrongOrder, &args, None).unwrap_err();
        assert!(e.0.contains("theta*sqrt(Cstar)*delta must be < 1"), "{e}");
    }

    #[test]
    fn ladder_must_refine() {
        let args = CommonArgs {
            alpha: Some(0.9),
            theta: Some(0.0),
            delta_exp: Some(vec![6, 7]),
            ref_exp: Some(5),
            paths: Some(10),
            out: Some(PathBuf::from("x.csv")),
            ..Default::default()
        };
        let e = resolve(CommandKind::StrongOrder, &args, None).unwrap_err();
        assert!(e.0.contains("ref-exp"), "{e}");
    }
}
