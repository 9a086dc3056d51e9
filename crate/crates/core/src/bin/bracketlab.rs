use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use bracketlab::fields::Grid;
use bracketlab::harness::catalog::{self, build_system, default_bracket, default_monitors, sample_state};
use bracketlab::harness::config::{parse_grid, parse_wavevector, Config};
use bracketlab::harness::suite::checks_for;
use bracketlab::harness::{dispersion_check, run_suite, simulate};
use bracketlab::systems::vlasov::ParentD;
use bracketlab::{Error, Result};

#[derive(Parser)]
#[command(name = "bracketlab", version, about = "Property checks and simulations for constrained Hamiltonian field systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check of a system and report residuals.
    Verify {
        system: Option<String>,
        /// `N`, `NX,NY,NZ` or `NX,NY,NZ,NVX,NVY,NVZ`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Tolerance applied to every check except the negative controls.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Integrate a system with RK4 and track conserved quantities.
    Simulate {
        system: Option<String>,
        #[arg(long)]
        bracket: Option<String>,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        /// Monitor names (default: all monitors of the system).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        monitors: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Measure the constraint-wave frequency of the parent bracket.
    Dispersion {
        #[arg(long, value_enum)]
        d: DChoice,
        /// Integer wavevector `KX,KY,KZ`.
        #[arg(long, allow_hyphen_values = true)]
        k: String,
        /// Spatial grid `N` or `NX,NY,NZ`.
        #[arg(long, default_value = "16")]
        grid: String,
        /// Allowed frequency error.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// List systems and their checks.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum DChoice {
    #[value(name = "inv_lap")]
    InvLap,
    #[value(name = "inv_sqrt_neg_lap")]
    InvSqrtNegLap,
}

impl From<DChoice> for ParentD {
    fn from(d: DChoice) -> Self {
        match d {
            DChoice::InvLap => ParentD::InvLap,
            DChoice::InvSqrtNegLap => ParentD::InvSqrtNegLap,
        }
    }
}

fn load_config(path: Option<&PathBuf>, system: Option<String>, grid: Option<&str>, seed: Option<u64>) -> Result<(String, Config)> {
    let mut config = match path {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    if system.is_some() {
        config.system = system;
    }
    if let Some(g) = grid {
        config.grid = Some(parse_grid(g)?);
    }
    if let Some(s) = seed {
        config.seeds = vec![s];
    }
    let system = config
        .system
        .clone()
        .ok_or_else(|| Error::Usage("no system given on the command line or in the config".into()))?;
    Ok((system, config))
}

fn verify(
    system: Option<String>,
    grid: Option<String>,
    seed: Option<u64>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
) -> Result<bool> {
    let (system, mut config) = load_config(config.as_ref(), system, grid.as_deref(), seed)?;
    if let Some(t) = tol {
        config.tolerances.clear();
        config.tolerances.insert("default".into(), t);
    }
    let report = run_suite(&system, &config)?;
    println!("{report}");
    if let Some(path) = out.or(config.output.report.clone()) {
        report.write_json(&path)?;
    }
    Ok(report.passed())
}

#[allow(clippy::too_many_arguments)]
fn run_simulation(
    system: Option<String>,
    bracket: Option<String>,
    dt: f64,
    steps: usize,
    monitors: Vec<String>,
    csv: Option<PathBuf>,
    grid: Option<String>,
    seed: Option<u64>,
    config: Option<PathBuf>,
) -> Result<bool> {
    let (system, config) = load_config(config.as_ref(), system, grid.as_deref(), seed)?;
    let params = &config.system_params;
    let spec = build_system(&system, config.grid.as_deref(), params)?;
    let bracket = match bracket {
        Some(b) => b,
        None => default_bracket(&system)?.to_string(),
    };
    let mut available = default_monitors(&spec, params)?;
    if !monitors.is_empty() {
        if let Some(bad) = monitors.iter().find(|m| !available.iter().any(|a| &a.name == *m)) {
            let names: Vec<&str> = available.iter().map(|a| a.name.as_str()).collect();
            return Err(Error::Usage(format!("unknown monitor {bad:?}; available: {}", names.join(", "))));
        }
        available.retain(|a| monitors.contains(&a.name));
    }
    let chi0 = sample_state(&spec, config.seeds[0], params)?;
    let traj = simulate(&spec, &bracket, &chi0, dt, steps, &available)?;
    println!("{system} with bracket {bracket}: {steps} steps of {dt}");
    for h in &traj.monitors {
        let tag = if h.within_tolerance() { "PASS" } else { "FAIL" };
        println!("  {tag} {:<24} drift {:.6e}  tolerance {:.3e}", h.name, h.max_drift(), h.tolerance);
    }
    if let Some(path) = csv.or(config.output.csv.clone()) {
        traj.write_csv(File::create(path)?)?;
    }
    Ok(traj.monitors.iter().all(|h| h.within_tolerance()))
}

fn dispersion(d: DChoice, k: &str, grid: &str, tol: f64) -> Result<bool> {
    let k = parse_wavevector(k)?;
    let sizes = parse_grid(grid)?;
    let sizes = match sizes.as_slice() {
        [n] => vec![*n; 3],
        [_, _, _] => sizes,
        _ => return Err(Error::Usage(format!("spatial grid must be N or NX,NY,NZ, got {grid}"))),
    };
    let grid = Arc::new(Grid::new(sizes, vec![2.0 * PI; 3])?);
    let d = ParentD::from(d);
    let result = dispersion_check(d, &grid, &k)?;
    let k_norm = k.iter().map(|&ki| (ki * ki) as f64).sum::<f64>().sqrt();
    let expected = match d {
        ParentD::InvSqrtNegLap => k_norm,
        _ => 1.0,
    };
    let error = (result.fit.frequency - expected).abs();
    let tag = if error <= tol { "PASS" } else { "FAIL" };
    println!(
        "{tag} D = {} k = {k:?}: frequency {:.9} expected {expected:.9} (error {error:.3e}, fit misfit {:.2e})",
        d.name(),
        result.fit.frequency,
        result.fit.relative_misfit
    );
    Ok(error <= tol)
}

fn list() -> Result<bool> {
    let mut out = std::io::stdout().lock();
    for system in catalog::SYSTEMS {
        let grid = catalog::default_grid(system)?;
        writeln!(out, "{system} (default grid {grid:?}, bracket {})", default_bracket(system)?)?;
        for c in checks_for(system)? {
            writeln!(out, "  {:<44} {}", c.name, c.anchor)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify { system, grid, seed, tol, out, config } => verify(system, grid, seed, tol, out, config),
        Command::Simulate { system, bracket, dt, steps, monitors, csv, grid, seed, config } => {
            run_simulation(system, bracket, dt, steps, monitors, csv, grid, seed, config)
        }
        Command::Dispersion { d, k, grid, tol } => dispersion(d, &k, &grid, tol),
        Command::List => list(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
