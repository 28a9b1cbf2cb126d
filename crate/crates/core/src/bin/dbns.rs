use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use dolbeault_ns::dolbeault::pressure_recover;
use dolbeault_ns::dynamics::{simulate, solve_linearized, Forcing, SimConfig};
use dolbeault_ns::initial::gen_initial;
use dolbeault_ns::io::{load_field, load_manifest, load_trajectory, save_field, save_trajectory};
use dolbeault_ns::norms::{bochner_for, bochner_pre, bochner_vel, energy_report, lps_exponent, lps_integral};
use dolbeault_ns::spectral::SpectralGrid;
use dolbeault_ns::verify::{run_checks, Check, VerifyOptions};
use dolbeault_ns::{Error, FormField, Representation};

#[derive(Parser)]
#[command(name = "dbns", version, about = "Navier-Stokes on the Dolbeault complex of the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write a trajectory directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomized operator and nonlinearity checks; prints a JSON report.
    Verify {
        #[arg(long, default_value = "all")]
        op: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[arg(long = "N")]
        size: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Space-time norms of a saved trajectory.
    Norms {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long = "lps-r")]
        lps_r: Option<f64>,
    },
    /// Recover the pressure of an exact force field.
    Pressure {
        #[arg(long)]
        forces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the linearized problem about a saved base trajectory.
    Linearize {
        #[arg(long = "base-traj")]
        base_traj: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Outcome {
    Pass,
    CheckFailed,
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn initial_field(config: &SimConfig) -> Result<FormField, Error> {
    let spec = config
        .initial
        .as_ref()
        .ok_or_else(|| Error::Config("config has no \"initial\" entry".into()))?;
    let grid = SpectralGrid::new(config.n, config.size)?;
    gen_initial(spec, &grid, config.q, config.seed)
}

fn load_config(path: &Path) -> Result<SimConfig, Error> {
    let config = SimConfig::load(path).map_err(|err| match err {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    })?;
    config.validate()?;
    Ok(config)
}

fn run_simulate(config_path: &Path, out: &Path) -> Result<Outcome, Error> {
    let config = load_config(config_path)?;
    let u0 = initial_field(&config)?;
    let traj = simulate(&config, &u0)?;
    save_trajectory(out, &traj)?;
    let last = traj.diagnostics.last();
    print_json(&json!({
        "out": out,
        "config_hash": config.hash(),
        "snapshots": traj.len(),
        "dt": traj.dt,
        "final_time": traj.times.last(),
        "final_energy": last.map(|d| d.energy),
        "lps_accum": last.map(|d| d.lps_accum),
    }));
    Ok(Outcome::Pass)
}

fn run_verify(op: &str, n: usize, q: usize, size: usize, trials: usize, seed: u64) -> Result<Outcome, Error> {
    let checks = Check::parse(op)?;
    let opts = VerifyOptions {
        n,
        q,
        size,
        trials,
        seed,
        spec: VerifyOptions::default_spec(q),
    };
    let report = run_checks(&checks, &opts)?;
    print_json(&serde_json::to_value(&report)?);
    Ok(if report.pass { Outcome::Pass } else { Outcome::CheckFailed })
}

fn run_norms(dir: &Path, k: usize, s: usize, lps_r: Option<f64>) -> Result<Outcome, Error> {
    let traj = load_trajectory(dir)?;
    let grid = traj.grid().clone();
    let forcing = Forcing::resolve(&traj.config.forcing, &grid, traj.config.q)?;
    let h = traj.snapshot_dt();
    let mut report = energy_report(&traj, &forcing)?;
    let r = lps_r.unwrap_or_else(|| traj.config.lps_exponent_r());
    report.params.k = Some(k);
    report.params.s = Some(s);
    report.params.lps_r = Some(r);
    report.params.lps_s = Some(lps_exponent(traj.config.n, r)?);
    report.insert("lps", lps_integral(&traj, r)?);
    report.insert("bochner_vel", bochner_vel(&traj, k, s)?);
    report.insert("bochner_pre", bochner_pre(&traj.pressure, h, k, s, traj.config.n)?);
    let forces: Vec<FormField> = traj
        .times
        .iter()
        .map(|&t| match forcing.at(t) {
            Some(f) => Ok(f),
            None => FormField::zeros(&grid, traj.config.q, Representation::Fourier),
        })
        .collect::<Result<_, Error>>()?;
    report.insert("bochner_for", bochner_for(&forces, h, k, s)?);
    print_json(&serde_json::to_value(&report)?);
    Ok(if report.all_finite() { Outcome::Pass } else { Outcome::CheckFailed })
}

fn run_pressure(forces: &Path, out: &Path) -> Result<Outcome, Error> {
    let manifest = load_manifest(forces)?;
    let f = load_field(forces)?;
    let p = pressure_recover(&f)?;
    save_field(out, &p, &manifest.metadata)?;
    print_json(&json!({
        "out": out,
        "degree": p.degree(),
        "norm": p.norm(),
    }));
    Ok(Outcome::Pass)
}

fn run_linearize(base: &Path, config_path: &Path, out: Option<&Path>) -> Result<Outcome, Error> {
    let base = load_trajectory(base)?;
    let config = load_config(config_path)?;
    let u0 = initial_field(&config)?;
    let traj = solve_linearized(&base, &config, &u0)?;
    if let Some(out) = out {
        save_trajectory(out, &traj)?;
    }
    let last = traj.diagnostics.last();
    print_json(&json!({
        "out": out,
        "snapshots": traj.len(),
        "final_time": traj.times.last(),
        "final_energy": last.map(|d| d.energy),
    }));
    Ok(Outcome::Pass)
}

fn configure_threads() {
    let Ok(value) = std::env::var("DBNS_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(threads) if threads > 0 => {
            if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
                log::warn!("could not size the thread pool: {err}");
            }
        }
        _ => log::warn!("ignoring DBNS_THREADS={value:?}"),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parameter(_) | Error::InvalidGrid(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Simulate { config, out } => run_simulate(config, out),
        Command::Verify {
            op,
            n,
            q,
            size,
            trials,
            seed,
        } => run_verify(op, *n, *q, *size, *trials, *seed),
        Command::Norms { traj, k, s, lps_r } => run_norms(traj, *k, *s, *lps_r),
        Command::Pressure { forces, out } => run_pressure(forces, out),
        Command::Linearize {
            base_traj,
            config,
            out,
        } => run_linearize(base_traj, config, out.as_deref()),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(err) => {
            eprintln!("dbns: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
