use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rqt_core::analytic::AnalyticEnsemble;
use rqt_core::diagnostics::invariant_report;
use rqt_core::io::{
    parse_config, read_snapshots, tables_from_series, unix_now, write_figure_data, write_report, write_snapshots,
    RunManifest,
};
use rqt_core::nonrel::nonrel_integrate;
use rqt_core::{integrate, make_grid, Dynamics, Error, SimConfig, SnapshotSeries};

const REPORT_FILE: &str = "report.tsv";

#[derive(Parser)]
#[command(name = "rqt", version, about = "Relativistic quantum trajectory ensembles in 1+1 dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the ensemble described by a config file.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Snapshot cadence in ensemble time, overriding `time.every`.
        #[arg(long)]
        every: Option<f64>,
    },
    /// Sample a closed-form ensemble onto a grid.
    Analytic {
        #[arg(value_enum)]
        kind: AnalyticKind,
        /// beta0 for inertial, kappa for exponential, A for hyperbolic-gamma-t.
        #[arg(long, allow_hyphen_values = true)]
        param: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        grid_min: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        grid_max: f64,
        #[arg(long, default_value_t = 25)]
        grid_n: usize,
        #[arg(long, default_value_t = 0.0)]
        t_start: f64,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1.0)]
        every: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the invariant report for a snapshot directory.
    Verify {
        dir: PathBuf,
        /// Report path; defaults to report.tsv inside the directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare a relativistic run with the non-relativistic reference solver.
    CompareLimits {
        config: PathBuf,
        /// Bound on both the relative x deviation and |t - T|.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Emit plot data for a snapshot directory.
    Figures {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyticKind {
    Inertial,
    Exponential,
    HyperbolicGammaT,
}

/// Exit status 1 for bad input, 2 for failures discovered while running.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig { .. }
            | Error::InvalidGrid(_)
            | Error::Parse { .. }
            | Error::WrongWeightKind { .. }
            | Error::Domain { .. }
    )
}

fn classify(e: Error) -> Failure {
    if is_validation(&e) {
        Failure::Validation(e.into())
    } else {
        Failure::Runtime(e.into())
    }
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Validation)?;
    parse_config(&text).with_context(|| format!("in {}", path.display())).map_err(Failure::Validation)
}

fn save(series: &SnapshotSeries, mut manifest: RunManifest, dir: &Path) -> Result<RunManifest, Failure> {
    let tables = tables_from_series(series, &manifest.config.weight, manifest.config.c);
    let names = write_snapshots(&tables, dir).map_err(classify)?;
    manifest.snapshots = tables.iter().map(|t| t.tau).zip(names).collect();
    manifest.set_invariants(&invariant_report(series, &manifest.config));
    manifest.finished_unix = unix_now();
    manifest.write(dir).map_err(classify)?;
    Ok(manifest)
}

fn simulate(config: &Path, out: &Path, every: Option<f64>) -> Result<(), Failure> {
    let mut config = load_config(config)?;
    if let Some(every) = every {
        config.snapshot_every = every;
    }
    config.validate().map_err(classify)?;
    let manifest = RunManifest::new(config.clone(), "simulate");
    match integrate(&config) {
        Ok(series) => {
            let manifest = save(&series, manifest, out)?;
            println!("wrote {} snapshots to {}", manifest.snapshots.len(), out.display());
            Ok(())
        }
        Err(failure) => {
            if !failure.partial.is_empty() {
                save(&failure.partial, manifest, out)?;
            }
            Err(Failure::Runtime(anyhow!(failure.error).context(format!(
                "integration stopped; {} snapshots written to {}",
                failure.partial.len(),
                out.display()
            ))))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn analytic(
    kind: AnalyticKind,
    param: f64,
    c: f64,
    mass: f64,
    hbar: f64,
    grid: (f64, f64, usize),
    times: (f64, f64, f64),
    out: &Path,
) -> Result<(), Failure> {
    let ensemble = match kind {
        AnalyticKind::Inertial => AnalyticEnsemble::Inertial { beta0: param },
        AnalyticKind::Exponential => AnalyticEnsemble::Exponential { kappa: param },
        AnalyticKind::HyperbolicGammaT => AnalyticEnsemble::HyperbolicGammaT { a: param },
    };
    let (t_start, t_final, every) = times;
    if !(every > 0.0) || !(t_final >= t_start) {
        return Err(Failure::Validation(anyhow!("need every > 0 and t-final >= t-start")));
    }
    let grid = make_grid(grid.0, grid.1, grid.2).map_err(classify)?;
    let weight = ensemble.weight().expect("listed kinds have closed-form weights");
    let mut config = SimConfig::new(c, weight, grid.clone(), t_final - t_start);
    config.mass = mass;
    config.hbar = hbar;
    config.snapshot_every = every;
    if let AnalyticEnsemble::Inertial { beta0 } = ensemble {
        config.boost = beta0;
    }
    config.validate().map_err(classify)?;

    let count = ((t_final - t_start) / every + 1e-9).floor() as usize;
    let states = (0..=count)
        .map(|k| ensemble.sample(&grid, t_start + k as f64 * every, mass, hbar, c))
        .collect::<rqt_core::Result<Vec<_>>>()
        .map_err(classify)?;
    let series = SnapshotSeries::from_states(states, &Dynamics::new(&config)).map_err(classify)?;
    let manifest = save(&series, RunManifest::new(config, format!("analytic {}", ensemble.name())), out)?;
    println!("wrote {} snapshots to {}", manifest.snapshots.len(), out.display());
    Ok(())
}

fn load_series(dir: &Path) -> Result<(RunManifest, SnapshotSeries), Failure> {
    let manifest = RunManifest::read(dir).map_err(classify)?;
    let tables = read_snapshots(dir).map_err(classify)?;
    let states = tables.iter().map(|t| t.state()).collect::<rqt_core::Result<Vec<_>>>().map_err(classify)?;
    let series = SnapshotSeries::from_states(states, &Dynamics::new(&manifest.config)).map_err(classify)?;
    Ok((manifest, series))
}

fn verify(dir: &Path, report_path: Option<PathBuf>) -> Result<(), Failure> {
    let (manifest, series) = load_series(dir)?;
    let report = invariant_report(&series, &manifest.config);
    let path = report_path.unwrap_or_else(|| dir.join(REPORT_FILE));
    write_report(&report, &path).map_err(classify)?;
    print!("{}", report.to_tsv());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("invariant check failed; report in {}", path.display())))
    }
}

fn compare_limits(config: &Path, tol: f64) -> Result<(), Failure> {
    let config = load_config(config)?;
    let rel = integrate(&config).map_err(|f| Failure::Runtime(anyhow!(f).context("relativistic run")))?;
    let nonrel = nonrel_integrate(&config).map_err(|f| {
        if is_validation(&f.error) {
            Failure::Validation(anyhow!(f))
        } else {
            Failure::Runtime(anyhow!(f).context("non-relativistic run"))
        }
    })?;
    let (lo, hi) = nonrel
        .iter()
        .flat_map(|s| s.x.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mut dx: f64 = 0.0;
    let mut dt: f64 = 0.0;
    for (r, n) in rel.snapshots.iter().zip(&nonrel) {
        for i in 0..n.x.len() {
            dx = dx.max((r.state.x[i] - n.x[i]).abs());
            dt = dt.max((r.state.t[i] - r.tau()).abs());
        }
    }
    let rel_dx = dx / (hi - lo);
    println!("max_abs_dx\t{dx:.6e}");
    println!("relative_dx\t{rel_dx:.6e}");
    println!("max_abs_t_minus_T\t{dt:.6e}");
    if rel_dx <= tol && dt <= tol {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("deviation exceeds {tol:e}")))
    }
}

fn figures(dir: &Path, out: &Path) -> Result<(), Failure> {
    let manifest = RunManifest::read(dir).map_err(classify)?;
    let tables = read_snapshots(dir).map_err(classify)?;
    let files = write_figure_data(&tables, &manifest.config.grid, out).map_err(classify)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, every } => simulate(&config, &out, every),
        Command::Analytic { kind, param, c, mass, hbar, grid_min, grid_max, grid_n, t_start, t_final, every, out } => {
            analytic(kind, param, c, mass, hbar, (grid_min, grid_max, grid_n), (t_start, t_final, every), &out)
        }
        Command::Verify { dir, report } => verify(&dir, report),
        Command::CompareLimits { config, tol } => compare_limits(&config, tol),
        Command::Figures { dir, out } => figures(&dir, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
