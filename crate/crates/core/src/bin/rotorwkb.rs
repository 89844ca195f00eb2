use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rotorwkb::error::{Error, Result};
use rotorwkb::harness::config::{load_config, SweepMode};
use rotorwkb::harness::{compare_files, epsilon_sweep, run, sweep};
use rotorwkb::observables::{Observables, CSV_HEADER};
use rotorwkb::snapshot::Snapshot;

/// Semiclassical rotating superfluid solvers.
///
/// Any configuration key can be overridden with `--section.key=value`.
#[derive(Parser, Debug)]
#[command(name = "rotorwkb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split-step spectral NLS run.
    RunNls(RunArgs),
    /// Modified-WKB system run.
    RunWkb(RunArgs),
    /// Limit superfluid system run.
    RunHydro(RunArgs),
    /// Ray bundle for the Hamilton-Jacobi phase.
    RunRays(RunArgs),
    /// Epsilon sweep against the eps = 0 limit.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Comma separated, strictly decreasing; defaults to `[sweep].eps`.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Norms of the difference of two snapshots.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Sobolev index of the H^s difference.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Observables of a wave function snapshot.
    Observables {
        snapshot: PathBuf,
        #[arg(short, long)]
        config: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Nls,
    Wkb,
    Both,
}

/// `--section.key=value` arguments are configuration overrides.
fn is_override(arg: &str) -> bool {
    arg.strip_prefix("--")
        .and_then(|rest| rest.split_once('='))
        .is_some_and(|(path, _)| path.contains('.'))
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("ROTORWKB_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::ConfigSyntax(format!("ROTORWKB_THREADS={raw} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ConfigSyntax(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli, mut overrides: Vec<String>) -> Result<i32> {
    configure_threads()?;
    let solver_run = |solver: &str, args: &RunArgs, mut overrides: Vec<String>| -> Result<i32> {
        overrides.insert(0, format!("--run.solver={solver}"));
        let cfg = load_config(&args.config, &overrides)?;
        let out = run(&cfg)?;
        println!(
            "run-{solver}: {} records, {} artifacts in {}",
            out.records.len(),
            out.manifest.artifacts.len(),
            out.dir.display()
        );
        Ok(0)
    };
    match &cli.command {
        Command::RunNls(a) => solver_run("nls", a, overrides),
        Command::RunWkb(a) => solver_run("wkb", a, overrides),
        Command::RunHydro(a) => solver_run("hydro", a, overrides),
        Command::RunRays(a) => solver_run("rays", a, overrides),
        Command::Sweep { config, eps, mode } => {
            let cfg = load_config(config, &overrides)?;
            let list = eps
                .clone()
                .or_else(|| cfg.sweep.as_ref().map(|s| s.eps.clone()))
                .ok_or_else(|| Error::Config {
                    section: "sweep".into(),
                    key: "eps".into(),
                    reason: "no eps list given".into(),
                })?;
            let mode = match mode {
                Some(ModeArg::Nls) => SweepMode::Nls,
                Some(ModeArg::Wkb) => SweepMode::Wkb,
                Some(ModeArg::Both) => SweepMode::Both,
                None => cfg.sweep.as_ref().map(|s| s.mode).unwrap_or_default(),
            };
            let result = epsilon_sweep(&cfg, &list, cfg.run.t_final, mode)?;
            sweep::write_sweep(&cfg.run.output, &result, cfg.to_toml())?;
            for (name, fit) in [
                ("density_l1", result.density_fit),
                ("current_l2", result.current_fit),
                ("amplitude_l2", result.amplitude_fit),
            ] {
                if let Some(f) = fit {
                    println!(
                        "{name}: slope {:.4} intercept {:.4}{}{}",
                        f.slope,
                        f.intercept,
                        if f.monotone { "" } else { " non-monotone" },
                        if f.floor_limited { " floor-limited" } else { "" }
                    );
                }
            }
            for f in &result.failures {
                eprintln!("eps = {}: {}", f.eps, f.message);
            }
            Ok(if result.failures.is_empty() { 0 } else { 3 })
        }
        Command::Compare { a, b, s } => {
            if !overrides.is_empty() {
                return Err(Error::ConfigSyntax("compare takes no overrides".into()));
            }
            let m = compare_files(a, b, *s)?;
            println!("{}", serde_json::to_string_pretty(&m).map_err(|e| Error::Format(e.to_string()))?);
            Ok(0)
        }
        Command::Observables { snapshot, config } => {
            let snap = Snapshot::read(snapshot)?;
            overrides.insert(0, format!("--sim.eps={:e}", snap.eps));
            let cfg = load_config(config, &overrides)?;
            let params = cfg.params()?;
            let psi = snap.into_wave()?;
            let rec = Observables::new(&psi.grid).record(&psi, &params);
            println!("{CSV_HEADER}\n{}", rec.csv_row());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let (overrides, rest): (Vec<String>, Vec<String>) = std::env::args().partition(|a| is_override(a));
    let cli = Cli::parse_from(rest);
    match execute(cli, overrides) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
