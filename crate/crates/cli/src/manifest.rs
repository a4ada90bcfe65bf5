//! Command-line parsing into a validated [`RunManifest`].

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spinsim_core::experiments::{DEFAULT_AZ_STEP, DEFAULT_EVENTS, DEFAULT_GAMMA};
use spinsim_core::{AnalyzerModel, MagneticMoment, Vec3};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Probabilistic,
    Dlm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// A 3-vector given on the command line as `x`, `y`, `z` or `ax,ay,az`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentArg(pub Vec3);

impl MomentArg {
    pub fn moment(self) -> MagneticMoment {
        MagneticMoment::normalized(self.0).expect("validated at parse time")
    }

    fn to_arg(self) -> String {
        match self.0 {
            v if v == Vec3::X => "x".into(),
            v if v == Vec3::Y => "y".into(),
            v if v == Vec3::Z => "z".into(),
            v => format!("{:?},{:?},{:?}", v.x, v.y, v.z),
        }
    }
}

fn parse_moment(s: &str) -> Result<MomentArg, String> {
    let v = match s.trim() {
        "x" => Vec3::X,
        "y" => Vec3::Y,
        "z" => Vec3::Z,
        other => {
            let parts: Vec<f64> = other
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
                .collect::<Result<_, _>>()?;
            match parts[..] {
                [x, y, z] => Vec3::new(x, y, z),
                _ => return Err("expected x|y|z or three comma-separated components".into()),
            }
        }
    };
    if !v.norm().is_finite() || (v.norm() - 1.0).abs() > 1e-9 {
        return Err(format!("moment {v} must have unit norm"));
    }
    Ok(MomentArg(v))
}

/// Parses a real number, also accepting multiples and fractions of pi such
/// as `pi`, `2pi`, `-pi/2`, `3*pi/4`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{s}' is not finite"))
        };
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (
            n,
            d.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}"))?,
        ),
        None => (t.as_str(), 1.0),
    };
    let coef = num
        .trim()
        .strip_suffix("pi")
        .ok_or_else(|| format!("cannot parse angle '{s}'"))?;
    let coef = coef.trim().trim_end_matches('*').trim();
    let k = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|e| format!("'{s}': {e}"))?,
    };
    let v = k * PI / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spinsim",
    version,
    about = "Event-by-event simulation of single-neutron spin experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detuning sweep with a = x and a = y: expectations, error, disturbance.
    UncertaintySweep(SweepArgs),
    /// Three levels of splitting analyzers (b = d along phi, c = y).
    FilteringTriple(TripleArgs),
    /// Robertson relation over a grid of a_z with random azimuth.
    RobertsonSweep(RobertsonArgs),
    /// Theory-only tables over the detuning grid.
    OracleTable(OracleArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; defaults to <subcommand>.<format>
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "probabilistic")]
    model: ModelKind,
    /// DLM learning parameter in [0, 1)
    #[arg(long, default_value_t = DEFAULT_GAMMA, allow_hyphen_values = true)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// First detuning angle (radians; `pi` multiples accepted)
    #[arg(long, value_parser = parse_angle, default_value = "0", allow_hyphen_values = true)]
    phi_start: f64,
    /// Exclusive end of the detuning grid
    #[arg(long, value_parser = parse_angle, default_value = "2pi", allow_hyphen_values = true)]
    phi_end: f64,
    #[arg(long, value_parser = parse_angle, default_value = "pi/24", allow_hyphen_values = true)]
    phi_step: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EVENTS)]
    n_events: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Write per-figure data files and a gnuplot script next to the output
    #[arg(long)]
    emit_plots: bool,
    /// CSV of measured (phi, ozawa_lhs, product) points to overlay
    #[arg(long)]
    lab_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TripleArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    n_events: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = parse_moment, default_value = "x", allow_hyphen_values = true)]
    initial_moment: MomentArg,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct RobertsonArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EVENTS)]
    n_events: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_AZ_STEP, allow_hyphen_values = true)]
    az_step: f64,
    #[command(flatten)]
    out: OutputArgs,
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = parse_moment, default_value = "x", allow_hyphen_values = true)]
    initial_moment: MomentArg,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        spinsim_core::experiments::phi_grid(self.start, self.end, self.step).expect("validated")
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: TAU,
            step: PI / 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub gamma: f64,
}

impl Model {
    pub fn analyzer(&self) -> AnalyzerModel {
        match self.kind {
            ModelKind::Probabilistic => AnalyzerModel::Probabilistic,
            ModelKind::Dlm => AnalyzerModel::Dlm { gamma: self.gamma },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    UncertaintySweep {
        n_events: u64,
        model: Model,
        grid: Grid,
        emit_plots: bool,
        lab_data: Option<PathBuf>,
    },
    FilteringTriple {
        n_events: u64,
        model: Model,
        grid: Grid,
        initial_moment: MomentArg,
    },
    RobertsonSweep {
        n_events: u64,
        model: Model,
        az_step: f64,
        emit_plots: bool,
    },
    OracleTable {
        grid: Grid,
        initial_moment: MomentArg,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::UncertaintySweep { .. } => "uncertainty-sweep",
            Experiment::FilteringTriple { .. } => "filtering-triple",
            Experiment::RobertsonSweep { .. } => "robertson-sweep",
            Experiment::OracleTable { .. } => "oracle-table",
        }
    }
}

/// Fully validated description of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub experiment: Experiment,
    /// `None` only for `oracle-table`, which draws no random numbers.
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub format: OutputFormat,
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid value for '--{flag}': {msg}"))
}

fn check_model(m: &ModelArgs) -> Result<Model, CliError> {
    if !(0.0..1.0).contains(&m.gamma) {
        return Err(usage("gamma", format!("{} is outside [0, 1)", m.gamma)));
    }
    Ok(Model {
        kind: m.model,
        gamma: m.gamma,
    })
}

fn check_grid(g: &GridArgs) -> Result<Grid, CliError> {
    if g.phi_step <= 0.0 {
        return Err(usage(
            "phi-step",
            format!("{} must be positive", g.phi_step),
        ));
    }
    if g.phi_end <= g.phi_start {
        return Err(usage(
            "phi-end",
            format!("{} must exceed --phi-start {}", g.phi_end, g.phi_start),
        ));
    }
    let grid = Grid {
        start: g.phi_start,
        end: g.phi_end,
        step: g.phi_step,
    };
    if grid.points().len() > 1_000_000 {
        return Err(usage("phi-step", "grid has more than 10^6 points"));
    }
    Ok(grid)
}

fn check_events(n: u64) -> Result<u64, CliError> {
    if n == 0 {
        Err(usage("n-events", "must be at least 1"))
    } else {
        Ok(n)
    }
}

fn output_path(out: &OutputArgs, name: &str) -> PathBuf {
    out.output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}.{}", out.format.extension())))
}

/// Parses `args` (without the program name).
pub fn parse_cli<I, S>(args: I) -> Result<RunManifest, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("spinsim"))
        .chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let manifest = match cli.command {
        Command::UncertaintySweep(a) => {
            let experiment = Experiment::UncertaintySweep {
                n_events: check_events(a.n_events)?,
                model: check_model(&a.model)?,
                grid: check_grid(&a.grid)?,
                emit_plots: a.emit_plots,
                lab_data: a.lab_data,
            };
            RunManifest {
                output: output_path(&a.out, experiment.name()),
                experiment,
                seed: Some(a.seed),
                format: a.out.format,
            }
        }
        Command::FilteringTriple(a) => {
            let experiment = Experiment::FilteringTriple {
                n_events: check_events(a.n_events)?,
                model: check_model(&a.model)?,
                grid: check_grid(&a.grid)?,
                initial_moment: a.initial_moment,
            };
            RunManifest {
                output: output_path(&a.out, experiment.name()),
                experiment,
                seed: Some(a.seed),
                format: a.out.format,
            }
        }
        Command::RobertsonSweep(a) => {
            spinsim_core::experiments::az_grid(a.az_step).map_err(|e| usage("az-step", e))?;
            let experiment = Experiment::RobertsonSweep {
                n_events: check_events(a.n_events)?,
                model: check_model(&a.model)?,
                az_step: a.az_step,
                emit_plots: a.emit_plots,
            };
            RunManifest {
                output: output_path(&a.out, experiment.name()),
                experiment,
                seed: Some(a.seed),
                format: a.out.format,
            }
        }
        Command::OracleTable(a) => {
            let experiment = Experiment::OracleTable {
                grid: check_grid(&a.grid)?,
                initial_moment: a.initial_moment,
            };
            RunManifest {
                output: output_path(&a.out, experiment.name()),
                experiment,
                seed: None,
                format: a.out.format,
            }
        }
    };
    Ok(manifest)
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

impl RunManifest {
    /// The full flag set that reproduces this manifest.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec![self.experiment.name().to_string()];
        let mut push = |k: &str, v: String| {
            args.push(format!("--{k}"));
            args.push(v);
        };
        if let Some(seed) = self.seed {
            push("seed", seed.to_string());
        }
        let model_args = |push: &mut dyn FnMut(&str, String), m: &Model| {
            push(
                "model",
                m.kind
                    .to_possible_value()
                    .expect("no skipped variants")
                    .get_name()
                    .to_string(),
            );
            push("gamma", f(m.gamma));
        };
        let grid_args = |push: &mut dyn FnMut(&str, String), g: &Grid| {
            push("phi-start", f(g.start));
            push("phi-end", f(g.end));
            push("phi-step", f(g.step));
        };
        let mut flags = Vec::new();
        match &self.experiment {
            Experiment::UncertaintySweep {
                n_events,
                model,
                grid,
                emit_plots,
                lab_data,
            } => {
                push("n-events", n_events.to_string());
                model_args(&mut push, model);
                grid_args(&mut push, grid);
                if let Some(p) = lab_data {
                    push("lab-data", p.display().to_string());
                }
                if *emit_plots {
                    flags.push("--emit-plots");
                }
            }
            Experiment::FilteringTriple {
                n_events,
                model,
                grid,
                initial_moment,
            } => {
                push("n-events", n_events.to_string());
                model_args(&mut push, model);
                grid_args(&mut push, grid);
                push("initial-moment", initial_moment.to_arg());
            }
            Experiment::RobertsonSweep {
                n_events,
                model,
                az_step,
                emit_plots,
            } => {
                push("n-events", n_events.to_string());
                model_args(&mut push, model);
                push("az-step", f(*az_step));
                if *emit_plots {
                    flags.push("--emit-plots");
                }
            }
            Experiment::OracleTable {
                grid,
                initial_moment,
            } => {
                grid_args(&mut push, grid);
                push("initial-moment", initial_moment.to_arg());
            }
        }
        push("output", self.output.display().to_string());
        push(
            "format",
            self.format
                .to_possible_value()
                .expect("no skipped variants")
                .get_name()
                .to_string(),
        );
        args.extend(flags.into_iter().map(String::from));
        args
    }

    /// `to_args` joined into a shell command line.
    pub fn command_line(&self) -> String {
        std::iter::once("spinsim".to_string())
            .chain(self.to_args().into_iter().map(|a| shell_quote(&a)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./,=:+".contains(c))
    {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}
