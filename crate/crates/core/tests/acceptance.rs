//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dolbeault_ns::dolbeault::{constraint_residual, dbar, dbar_star, laplacian_q, leray_project, pressure_recover};
use dolbeault_ns::dynamics::{
    frechet_residual, simulate, solve_linearized, verify_key1, Forcing, ForcingSpec, SimConfig, Trajectory,
};
use dolbeault_ns::forms::l2_inner;
use dolbeault_ns::initial::{gen_initial, random_form, InitialSpec};
use dolbeault_ns::io::save_trajectory;
use dolbeault_ns::norms::{energy_report, lps_exponent, lps_integral, lr_norm};
use dolbeault_ns::reference::{dense_build, dense_build_independent, frobenius, oracle_compare, OperatorTag};
use dolbeault_ns::{BilinearSpec, FormField, Representation, SpectralGrid};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn grid(n: usize, size: usize) -> Arc<SpectralGrid> {
    SpectralGrid::new(n, size).expect("valid grid")
}

fn verdict(value: f64, tolerance: f64) -> bool {
    value.is_finite() && value < tolerance
}

/// Shared simulation runs reused by several criteria.
struct Runs {
    stokes_u0: FormField,
    stokes: Trajectory,
    stokes_elapsed: Duration,
    lamb: Vec<Trajectory>,
    forced: Trajectory,
}

const STOKES_DT: f64 = 0.01;
const LAMB_DTS: [f64; 3] = [0.05, 0.025, 0.0125];

fn stokes_config() -> SimConfig {
    SimConfig::stokes(2, 1, 16, 1.0, 1.0, STOKES_DT)
}

fn lamb_config(dt: f64) -> SimConfig {
    SimConfig::stokes(2, 1, 8, 0.1, 0.5, dt).with_nonlinearity(BilinearSpec::Lamb)
}

fn lamb_initial() -> FormField {
    let spec = InitialSpec::RandomSolenoidal {
        decay: 2.0,
        amplitude: 0.5,
    };
    gen_initial(&spec, &grid(2, 8), 1, 7).expect("initial datum")
}

impl Runs {
    fn compute() -> Result<Self, Box<dyn std::error::Error>> {
        let g16 = grid(2, 16);
        let stokes_u0 = gen_initial(
            &InitialSpec::RandomSolenoidal {
                decay: 1.0,
                amplitude: 1.0,
            },
            &g16,
            1,
            11,
        )?;
        let start = Instant::now();
        let stokes = simulate(&stokes_config(), &stokes_u0)?;
        let stokes_elapsed = start.elapsed();

        let u0 = lamb_initial();
        let lamb = LAMB_DTS
            .iter()
            .map(|&dt| simulate(&lamb_config(dt), &u0))
            .collect::<Result<Vec<_>, _>>()?;

        let mut forced_cfg = lamb_config(0.0125);
        forced_cfg.forcing = ForcingSpec::SingleMode {
            zeta: vec![1, 0, 0, 1],
            component: vec![2],
            re: 1.0,
            im: 0.5,
            omega: 2.0,
        };
        let forced = simulate(&forced_cfg, &u0)?;
        Ok(Self {
            stokes_u0,
            stokes,
            stokes_elapsed,
            lamb,
            forced,
        })
    }

    fn all(&self) -> Vec<(&'static str, &Trajectory)> {
        let mut runs = vec![("stokes", &self.stokes), ("forced lamb", &self.forced)];
        for traj in &self.lamb {
            runs.push(("lamb", traj));
        }
        runs
    }
}

fn complex_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (n, size) in [(2, 8), (3, 8)] {
        let g = grid(n, size);
        for q in 0..n - 1 {
            for seed in 0..50 {
                let u = random_form(&g, q, 0.0, 1000 + seed)?;
                worst = worst.max(dbar(&dbar(&u)?)?.norm() / u.norm());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        verdict(worst, 1e-12) && elapsed < 10.0,
        format!("max |dbar dbar u|/|u| = {worst:.2e} (tol 1e-12), n = 2, 3, {elapsed:.2} s (limit 10 s)"),
    ))
}

fn adjointness() -> Outcome {
    let mut worst = 0.0f64;
    for (n, size) in [(2, 8), (3, 8)] {
        let g = grid(n, size);
        for q in 0..n {
            for seed in 0..50 {
                let u = random_form(&g, q, 0.0, 2000 + seed)?.into_physical();
                let v = random_form(&g, q + 1, 0.0, 3000 + seed)?.into_physical();
                let gap = (l2_inner(&dbar(&u)?, &v)? - l2_inner(&u, &dbar_star(&v)?)?).norm();
                worst = worst.max(gap / (u.norm() * v.norm()));
            }
        }
    }
    Ok((verdict(worst, 1e-12), format!("max relative pairing gap = {worst:.2e} (tol 1e-12)")))
}

fn laplacian_diagonal() -> Outcome {
    let mut composed = 0.0f64;
    let mut spectral = 0.0f64;
    for (n, size) in [(2, 8), (3, 8)] {
        let g = grid(n, size);
        let symbol: Vec<f64> = (0..g.len())
            .map(|i| g.lattice_point(i).iter().map(|&z| (z * z) as f64).sum::<f64>() / 4.0)
            .collect();
        for q in 0..=n {
            for seed in 0..10 {
                let u = random_form(&g, q, 0.0, 4000 + seed)?;
                let mut expect = u.clone();
                for c in 0..expect.num_components() {
                    for (x, s) in expect.component_mut(c).iter_mut().zip(&symbol) {
                        *x *= s;
                    }
                }
                let mut lap = FormField::zeros(&g, q, Representation::Fourier)?;
                if q < n {
                    lap = lap.add(&dbar_star(&dbar(&u)?)?)?;
                }
                if q > 0 {
                    lap = lap.add(&dbar(&dbar_star(&u)?)?)?;
                }
                composed = composed.max(lap.sub(&expect)?.norm() / u.norm());
                spectral = spectral.max(laplacian_q(&u).sub(&expect)?.norm() / u.norm());
            }
        }
    }
    let worst = composed.max(spectral);
    Ok((
        verdict(worst, 1e-12),
        format!("dbar* dbar + dbar dbar*: {composed:.2e}, laplacian_q: {spectral:.2e} (tol 1e-12)"),
    ))
}

fn projector_algebra() -> Outcome {
    let mut stats = BTreeMap::from([("idempotence", 0.0f64), ("symmetry", 0.0), ("exact", 0.0), ("constraint", 0.0)]);
    let mut bump = |key: &'static str, value: f64| {
        let slot = stats.get_mut(key).expect("known key");
        *slot = slot.max(value);
    };
    for (n, size) in [(2, 8), (3, 8)] {
        let g = grid(n, size);
        for q in 1..=n {
            for seed in 0..20 {
                let u = random_form(&g, q, 0.0, 5000 + seed)?;
                let v = random_form(&g, q, 0.0, 6000 + seed)?;
                let h = random_form(&g, q - 1, 0.0, 7000 + seed)?;
                let pu = leray_project(&u);
                bump("idempotence", leray_project(&pu).sub(&pu)?.norm() / u.norm());
                let gap = (l2_inner(&pu, &v)? - l2_inner(&u, &leray_project(&v))?).norm();
                bump("symmetry", gap / (u.norm() * v.norm()));
                let dh = dbar(&h)?;
                bump("exact", leray_project(&dh).norm() / dh.norm());
                bump("constraint", constraint_residual(&pu) / u.norm());
            }
        }
    }
    let worst = stats.values().copied().fold(0.0, f64::max);
    let detail = stats
        .iter()
        .map(|(k, v)| format!("{k} {v:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((verdict(worst, 1e-10), format!("{detail} (tol 1e-10)")))
}

fn pressure_recovery() -> Outcome {
    let mut recovery = 0.0f64;
    let mut constraint = 0.0f64;
    for (n, size) in [(2, 8), (3, 8)] {
        let g = grid(n, size);
        for q in 1..=n {
            for seed in 0..20 {
                let h = random_form(&g, q - 1, 0.0, 8000 + seed)?;
                let f = dbar(&h)?;
                let p = pressure_recover(&f)?;
                recovery = recovery.max(dbar(&p)?.sub(&f)?.norm() / f.norm());
                if q >= 2 {
                    constraint = constraint.max(constraint_residual(&p) / p.norm());
                }
            }
        }
    }
    Ok((
        verdict(recovery, 1e-10) && verdict(constraint, 1e-12),
        format!("|dbar p - F|/|F| = {recovery:.2e} (tol 1e-10), |dbar* p|/|p| = {constraint:.2e} (tol 1e-12)"),
    ))
}

fn key1_lamb() -> Outcome {
    let main = verify_key1(&BilinearSpec::Lamb, &grid(2, 8), 1, 100, 9)?;
    let spot = verify_key1(&BilinearSpec::Lamb, &grid(3, 8), 1, 10, 9)?;
    let worst = main.max_normalized.max(spot.max_normalized);
    Ok((
        verdict(worst, 1e-12),
        format!(
            "max normalized pairing n=2: {:.2e} (100 trials), n=3: {:.2e} (tol 1e-12)",
            main.max_normalized, spot.max_normalized
        ),
    ))
}

fn stokes_exactness(runs: &Runs) -> Outcome {
    let g = runs.stokes.grid();
    let mu = runs.stokes.config.mu;
    let horizon = *runs.stokes.times.last().expect("snapshots");
    let got = runs.stokes.final_velocity().to_fourier();
    let start = runs.stokes_u0.to_fourier();
    let mut worst = 0.0f64;
    for c in 0..got.num_components() {
        for (i, (a, b)) in got.component(c).iter().zip(start.component(c)).enumerate() {
            let k2: f64 = g.lattice_point(i).iter().map(|&z| (z * z) as f64).sum();
            let exact = b * (-mu * k2 * horizon / 4.0).exp();
            if exact.norm() > 0.0 {
                worst = worst.max((a - exact).norm() / exact.norm());
            } else if a.norm() > 0.0 {
                worst = f64::INFINITY;
            }
        }
    }
    let elapsed = runs.stokes_elapsed.as_secs_f64();
    Ok((
        verdict(worst, 1e-8) && elapsed < 60.0,
        format!("max per-mode relative error = {worst:.2e} (tol 1e-8), N=16, {elapsed:.2} s (limit 60 s)"),
    ))
}

fn richardson(runs: &Runs) -> Outcome {
    let u: Vec<FormField> = runs.lamb.iter().map(|t| t.final_velocity().to_fourier()).collect();
    let coarse = u[0].sub(&u[1])?.norm();
    let fine = u[1].sub(&u[2])?.norm();
    let ratio = coarse / fine;
    Ok((
        ratio.is_finite() && (3.2..=4.8).contains(&ratio),
        format!("|u_dt - u_dt/2| / |u_dt/2 - u_dt/4| = {ratio:.3} (band [3.2, 4.8])"),
    ))
}

fn energy_law(runs: &Runs) -> Outcome {
    let mut increase = 0.0f64;
    let mut residuals = Vec::new();
    for traj in &runs.lamb {
        let report = energy_report(traj, &Forcing::Zero)?;
        increase = increase.max(report.get("max_energy_increase").unwrap_or(f64::NAN));
        residuals.push(report.get("energy_balance_residual_max").unwrap_or(f64::NAN));
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let in_band = ratios.iter().all(|r| r.is_finite() && (3.2..=4.8).contains(r));
    Ok((
        increase <= 0.0 && in_band,
        format!(
            "max energy increase = {increase:.2e}, residuals {:.2e} / {:.2e} / {:.2e}, ratios {:.3}, {:.3} (band [3.2, 4.8])",
            residuals[0], residuals[1], residuals[2], ratios[0], ratios[1]
        ),
    ))
}

fn constraint_preservation(runs: &Runs) -> Outcome {
    let mut worst = 0.0f64;
    for (_, traj) in runs.all() {
        for d in &traj.diagnostics {
            if d.energy > 0.0 {
                worst = worst.max(d.dbar_star_residual / d.energy.sqrt());
            }
        }
    }
    Ok((
        verdict(worst, 1e-10),
        format!("max |dbar* u|/|u| over all steps of 5 runs = {worst:.2e} (tol 1e-10)"),
    ))
}

fn frechet_identity() -> Outcome {
    let g = grid(2, 8);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let w = random_form(&g, 1, 1.0, 9000 + seed)?;
        let v = random_form(&g, 1, 1.0, 9500 + seed)?;
        let scaled: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&eps| frechet_residual(&w, &v, eps, &BilinearSpec::Lamb).map(|r| r / (eps * eps)))
            .collect::<Result<_, _>>()?;
        let hi = scaled.iter().copied().fold(f64::MIN, f64::max);
        let lo = scaled.iter().copied().fold(f64::MAX, f64::min);
        worst = worst.max((hi - lo) / hi);
    }
    Ok((
        verdict(worst, 1e-8),
        format!("max relative spread of residual/eps^2 = {worst:.2e} (tol 1e-8)"),
    ))
}

fn linearized_solver(runs: &Runs) -> Outcome {
    let g16 = grid(2, 16);
    let zero16 = FormField::zeros(&g16, 1, Representation::Fourier)?;
    let base = simulate(&stokes_config(), &zero16)?;
    let config = stokes_config().with_nonlinearity(BilinearSpec::Lamb);
    let lin = solve_linearized(&base, &config, &runs.stokes_u0)?;
    let expect = runs.stokes.final_velocity();
    let gap = lin.final_velocity().max_abs_diff(expect)? / expect.max_abs();

    let zero8 = FormField::zeros(&grid(2, 8), 1, Representation::Fourier)?;
    let rest = solve_linearized(&runs.lamb[2], &lamb_config(LAMB_DTS[2]), &zero8)?;
    let peak = rest
        .velocity
        .iter()
        .chain(&rest.pressure)
        .map(|u| u.max_abs())
        .fold(0.0, f64::max);
    Ok((
        verdict(gap, 1e-10) && peak == 0.0,
        format!("w = 0 vs Stokes run: {gap:.2e} (tol 1e-10); zero data: max |u|, |p| = {peak:e} (expect 0)"),
    ))
}

fn oracle_equivalence() -> Outcome {
    let n = 2;
    let size = 4;
    let g = grid(n, size);
    let mut matrices = 0.0f64;
    let mut fields = 0.0f64;
    for tag in OperatorTag::ALL {
        for q in 0..=n {
            let Ok((input, _)) = tag.degrees(n, q) else {
                continue;
            };
            let spectral = dense_build(tag, n, q, size)?;
            let independent = dense_build_independent(tag, n, q, size)?;
            let scale = frobenius(&independent.matrix).max(1.0);
            matrices = matrices.max(frobenius(&(&spectral.matrix - &independent.matrix)) / scale);
            let u = random_form(&g, input, 0.0, 10_000 + q as u64)?;
            fields = fields.max(oracle_compare(tag, &u)?);
        }
    }
    let worst = matrices.max(fields);
    Ok((
        verdict(worst, 1e-10),
        format!("max Frobenius residual = {matrices:.2e}, max field residual = {fields:.2e} (tol 1e-10), 4^4 grid"),
    ))
}

fn lps_monitor(runs: &Runs) -> Outcome {
    let r = 5.0;
    let mut all_finite = true;
    for (_, traj) in runs.all() {
        let value = lps_integral(traj, r)?;
        all_finite &= value.is_finite() && traj.diagnostics.iter().all(|d| d.lps_accum.is_finite());
    }

    let g = grid(2, 8);
    let u0 = gen_initial(
        &InitialSpec::SingleMode {
            zeta: vec![0, 1, 0, 0],
            component: vec![1],
            re: 0.7,
            im: -0.2,
        },
        &g,
        1,
        0,
    )?;
    let mu = 0.1;
    let traj = simulate(&SimConfig::stokes(2, 1, 8, mu, 1.0, 1.0 / 256.0), &u0)?;
    let s = lps_exponent(2, r)?;
    let rate = mu / 4.0;
    let exact = lr_norm(&u0.to_physical(), r)?.powf(s) * (1.0 - (-s * rate).exp()) / (s * rate);
    let integral = lps_integral(&traj, r)?;
    let running = traj.diagnostics.last().map_or(f64::NAN, |d| d.lps_accum);
    let err = ((integral - exact) / exact).abs().max(((running - exact) / exact).abs());
    Ok((
        all_finite && verdict(err, 1e-6),
        format!("finite on all runs: {all_finite}; single-mode decay relative error = {err:.2e} (tol 1e-6)"),
    ))
}

fn files_equal(a: &Path, b: &Path) -> std::io::Result<(usize, bool)> {
    let mut names_a: Vec<_> = std::fs::read_dir(a)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    let mut names_b: Vec<_> = std::fs::read_dir(b)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    names_a.sort();
    names_b.sort();
    if names_a != names_b {
        return Ok((0, false));
    }
    let mut count = 0;
    for name in names_a {
        let (pa, pb) = (a.join(&name), b.join(&name));
        if pa.is_dir() {
            let (c, same) = files_equal(&pa, &pb)?;
            if !same {
                return Ok((count + c, false));
            }
            count += c;
        } else {
            if std::fs::read(&pa)? != std::fs::read(&pb)? {
                return Ok((count, false));
            }
            count += 1;
        }
    }
    Ok((count, true))
}

fn reproducibility() -> Outcome {
    let mut config = SimConfig::stokes(2, 1, 8, 0.1, 0.2, 0.02).with_nonlinearity(BilinearSpec::Lamb);
    config.output_stride = 2;
    config.seed = 3;
    config.initial = Some(InitialSpec::RandomSolenoidal {
        decay: 2.0,
        amplitude: 1.0,
    });
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for dir in &dirs {
        let u0 = gen_initial(config.initial.as_ref().expect("set above"), &grid(2, 8), 1, config.seed)?;
        save_trajectory(dir.path(), &simulate(&config, &u0)?)?;
    }
    let (count, same) = files_equal(dirs[0].path(), dirs[1].path())?;
    Ok((same && count > 0, format!("{count} files compared, identical: {same}")))
}

fn main() -> ExitCode {
    let runs = Runs::compute();
    let shared = |f: fn(&Runs) -> Outcome| -> Outcome {
        match &runs {
            Ok(r) => f(r),
            Err(e) => Err(format!("shared simulations failed: {e}").into()),
        }
    };
    let criteria: Vec<Criterion> = vec![
        ("complex identity", Box::new(complex_identity)),
        ("adjointness", Box::new(adjointness)),
        ("laplacian diagonalization", Box::new(laplacian_diagonal)),
        ("projector algebra", Box::new(projector_algebra)),
        ("pressure recovery", Box::new(pressure_recovery)),
        ("lamb orthogonality", Box::new(key1_lamb)),
        ("stokes exactness", Box::new(move || shared(stokes_exactness))),
        ("nonlinear convergence", Box::new(move || shared(richardson))),
        ("energy law", Box::new(move || shared(energy_law))),
        ("constraint preservation", Box::new(move || shared(constraint_preservation))),
        ("frechet identity", Box::new(frechet_identity)),
        ("linearized solver", Box::new(move || shared(linearized_solver))),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("lps monitor", Box::new(move || shared(lps_monitor))),
        ("reproducibility", Box::new(reproducibility)),
    ];
    let mut failures = 0;
    for (number, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Ok(result)) => result,
            Ok(Err(err)) => (false, format!("error: {err}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            number + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of 15 criteria passed", 15 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
