//! Batch front end: each subcommand reads upstream artifacts from the output
//! directory, writes its own, and exits 0 (checks passed), 1 (checks
//! failed) or 2 (configuration or dependency error).

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde_json::{json, Map, Value};

use commands::Fixture;
use config::{Format, RunConfig, StrategyName, OUT_ENV};
use error::CliError;
use output::Manifest;

#[derive(Parser, Debug)]
#[command(
    name = "bethe-tau",
    version,
    about = "Bethe roots, master T-operator and the motion of its zeros"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact spectrum of the Hamiltonian, by magnon number.
    Spectrum,
    /// Solve the Bethe equations and match energies to the spectrum.
    BetheSolve,
    /// TQ relation against the diagonalized transfer matrix.
    VerifyTq,
    /// Build the master T-operator and calibrate its `t_0` step.
    BuildMaster,
    /// Hirota equation for the master T-operator or for a reference tau.
    VerifyHirota {
        #[arg(long, value_enum)]
        fixture: Option<Fixture>,
    },
    /// Track the zeros of the master T-operator along `t_1`.
    ZerosFlow,
    /// Equations of motion of the tracked zeros.
    RsCheck,
    /// Shared initial positions and per-state initial velocities.
    InverseVelocities,
    /// Summary of all artifacts with a verdict per criterion.
    Report,
}

/// Each flag sets the config field of the same name; a `--config` file
/// overrides them.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// JSON file with any subset of the config fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "L", global = true)]
    l: Option<usize>,
    #[arg(long = "J", global = true)]
    j: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyName>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Fixed truncation order of the master series (adaptive if absent).
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    /// Candidates for the `t_0` step, e.g. `1,1i,2i`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    delta_candidates: Option<Vec<C64>>,
    #[arg(long, global = true)]
    t_radius: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    u_base: Option<f64>,
    #[arg(long, global = true)]
    h: Option<f64>,
    /// `start,end` of the `t_1` window.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    t1_range: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    eta_candidates: Option<Vec<C64>>,
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Number of random samples.
    #[arg(long, global = true)]
    count: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (the environment variable wins over both this and
    /// the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',', value_enum)]
    formats: Option<Vec<Format>>,
}

fn put(obj: &mut Map<String, Value>, section: &str, key: &str, value: Option<Value>) {
    if let Some(v) = value {
        let entry = obj.entry(section).or_insert_with(|| json!({}));
        entry
            .as_object_mut()
            .expect("section is an object")
            .insert(key.to_string(), v);
    }
}

impl ConfigFlags {
    fn to_value(&self) -> Value {
        let mut obj = Map::new();
        put(&mut obj, "chain", "L", self.l.map(Value::from));
        put(&mut obj, "chain", "J", self.j.map(Value::from));
        put(&mut obj, "chain", "theta", self.theta.as_ref().map(|v| json!(v)));
        put(&mut obj, "solver", "tol", self.tol.map(Value::from));
        put(&mut obj, "solver", "max_iter", self.max_iter.map(Value::from));
        put(&mut obj, "solver", "strategy", self.strategy.map(|s| json!(s)));
        put(&mut obj, "solver", "grid", self.grid.map(Value::from));
        put(&mut obj, "solver", "restarts", self.restarts.map(Value::from));
        put(&mut obj, "master", "K", self.k.map(Value::from));
        put(
            &mut obj,
            "master",
            "delta_candidates",
            self.delta_candidates.as_ref().map(|v| json!(v)),
        );
        put(&mut obj, "master", "t_radius", self.t_radius.map(Value::from));
        put(&mut obj, "master", "u_base", self.u_base.map(Value::from));
        put(&mut obj, "rs", "h", self.h.map(Value::from));
        put(&mut obj, "rs", "t1_range", self.t1_range.as_ref().map(|v| json!(v)));
        put(
            &mut obj,
            "rs",
            "eta_candidates",
            self.eta_candidates.as_ref().map(|v| json!(v)),
        );
        put(&mut obj, "rs", "fd_step", self.fd_step.map(Value::from));
        put(&mut obj, "sampling", "count", self.count.map(Value::from));
        put(&mut obj, "sampling", "seed", self.seed.map(Value::from));
        put(&mut obj, "output", "directory", self.out.as_ref().map(|p| json!(p)));
        put(&mut obj, "output", "formats", self.formats.as_ref().map(|v| json!(v)));
        Value::Object(obj)
    }
}

fn print_checks(m: &Manifest) {
    for c in &m.checks {
        let value = c.value.map_or("-".to_string(), output::num);
        println!(
            "{} {:<40} {} ({:?} {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            value,
            c.relation,
            output::num(c.threshold)
        );
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = RunConfig::resolve(
        cli.flags.to_value(),
        cli.flags.config.as_deref(),
        std::env::var(OUT_ENV).ok(),
    )?;
    let manifest = match cli.command {
        Command::Spectrum => commands::spectrum(&cfg)?,
        Command::BetheSolve => commands::bethe_solve(&cfg)?,
        Command::VerifyTq => commands::verify_tq(&cfg)?,
        Command::BuildMaster => commands::build_master(&cfg)?,
        Command::VerifyHirota { fixture: Some(f) } => commands::verify_fixture(&cfg, f)?,
        Command::VerifyHirota { fixture: None } => commands::verify_hirota(&cfg)?,
        Command::ZerosFlow => commands::zeros_flow(&cfg)?,
        Command::RsCheck => commands::rs_check(&cfg)?,
        Command::InverseVelocities => commands::inverse_velocities(&cfg)?,
        Command::Report => {
            let (_, doc) = commands::report(&cfg)?;
            for c in &doc.criteria {
                println!("AC{:<2} {:?} [{}]", c.id, c.status, c.source);
            }
            return Ok(doc.passed());
        }
    };
    print_checks(&manifest);
    Ok(manifest.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
