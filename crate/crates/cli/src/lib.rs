//! Command-line front end: argument grammar, command dispatch and report output.

pub mod commands;
pub mod report;
pub mod specs;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use report::{Format, Report, ReportProvenance, SampleRow};

#[derive(Debug, Parser, Serialize)]
#[command(name = "evdom", version, about = "Eventual positivity and domination checks for discretized semigroups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Margin tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    #[serde(serialize_with = "ser_format")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn ser_format<S: serde::Serializer>(f: &Format, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match f {
        Format::Json => "json",
        Format::Csv => "csv",
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Node count.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Parameter of `nonlocal-beta`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// endpoints, interior, periodic or cell-centered.
    #[arg(long)]
    pub scheme: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VectorArgs {
    /// Initial vector SPEC.
    #[arg(long, default_value = "ones")]
    pub f: String,
    /// Reference vector SPEC (default: ones, or sin-bulk when B is Dirichlet).
    #[arg(long)]
    pub u: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SideArg {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Individual,
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WindowArgs {
    /// Critical value; defaults to the spectral bound of B (or of the operator).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda0: Option<f64>,
    #[arg(long, value_enum, default_value_t = SideArg::Right)]
    pub side: SideArg,
    /// Largest offset from lambda0.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Offsets delta·2^-j for j = 0..=levels.
    #[arg(long, default_value_t = 20)]
    pub levels: u32,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build an operator and describe it.
    OpBuild {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Leading eigenvalues and spectral bound.
    Spectrum {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Number of eigenvalues to report.
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sample e^{tA}: smallest entry, or the gauge margin of e^{tA}f when --f is given.
    Semigroup {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "log:0.01:50:50")]
        t_grid: String,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        u: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample Res(λ, A): smallest entry, or the gauge margin of Res(λ, A)f when --f is given.
    Resolvent {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated λ values.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        u: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Distance of the Cesàro means of A − s(A) from the mean-ergodic projection.
    Cesaro {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "list:1,10,100,1000")]
        r_grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Domination and positivity checks.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Named experiments with expected outcomes.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Write an operator as Matrix Market plus a JSON sidecar.
    Export {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Matrix Market output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        #[serde(serialize_with = "ser_format")]
        format: Format,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckCommand {
    /// |e^{tA}f| ≤ e^{tB}|f| per vector, or |e^{tA}| ≤ e^{tB} entrywise.
    Dominate {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Individual)]
        mode: ModeArg,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        #[arg(long, default_value = "log:0.01:50:200")]
        t_grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Resolvent domination on one side of lambda0.
    Window {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Maximum (right) or anti-maximum (left) principle near lambda0.
    MaxAntimax {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Seeded search for f ≥ 0 and λ > lambda0 with 0 ≤ Res(λ,A)f ≤ Res(λ,B)f violated.
    Converse {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda0: Option<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Eventual strong positivity of the Cesàro means of A − s(A).
    Cesaro {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        #[arg(long, default_value = "log:0.1:1000:60")]
        r_grid: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioCommand {
    RankOne {
        #[arg(long, default_value_t = 128)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    AntisymVsNeumann {
        #[arg(long, default_value_t = 64)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    NonlocalBeta {
        #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
        beta1: f64,
        #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
        beta2: f64,
        #[arg(long, default_value_t = 64)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    Sandwich {
        #[arg(long, default_value_t = 64)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    OddOrder {
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long, default_value_t = 1)]
        l: u32,
        #[arg(long, default_value_t = 64)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    Cesaro {
        #[arg(long, default_value_t = 64)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Configure the rayon pool from `EVDOM_THREADS` (unset: all cores).
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("EVDOM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("EVDOM_THREADS={value:?} is not a positive integer"))?;
    if threads == 0 {
        bail!("EVDOM_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

/// Run a parsed command: write the report and return the exit code
/// (0 success, 1 check or scenario failure).
pub fn execute(cli: &Cli) -> Result<i32> {
    let (report, format, out) = commands::dispatch(cli)?;
    let text = report.encode(format)?;
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(if report.pass { 0 } else { 1 })
}

/// Full entry point: parse `argv`, run, map errors to exit code 2.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return 2;
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
