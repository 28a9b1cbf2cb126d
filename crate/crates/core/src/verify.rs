//! Randomized invariant checks behind `dbns verify`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::dolbeault::{constraint_residual, dbar, dbar_star, leray_project};
use crate::dynamics::{frechet_residual, nonlinearity, verify_key1, KEY1_TOLERANCE};
use crate::error::{Error, Result};
use crate::forms::{l2_inner, BilinearSpec};
use crate::initial::random_form;
use crate::spectral::SpectralGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Dbar,
    Adjoint,
    Leray,
    Key1,
    Frechet,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::Dbar, Check::Adjoint, Check::Leray, Check::Key1, Check::Frechet];

    pub fn parse(name: &str) -> Result<Vec<Check>> {
        Ok(match name {
            "all" => Self::ALL.to_vec(),
            "dbar" => vec![Check::Dbar],
            "adjoint" => vec![Check::Adjoint],
            "leray" => vec![Check::Leray],
            "key1" => vec![Check::Key1],
            "frechet" => vec![Check::Frechet],
            other => return Err(Error::Parameter(format!("unknown check {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            pass: value.is_finite() && value < tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub q: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub trials: usize,
    pub seed: u64,
    pub checks: BTreeMap<String, CheckResult>,
    pub pass: bool,
}

pub struct VerifyOptions {
    pub n: usize,
    pub q: usize,
    pub size: usize,
    pub trials: usize,
    pub seed: u64,
    pub spec: BilinearSpec,
}

impl VerifyOptions {
    /// Lamb at `q = 1`, Stokes otherwise.
    pub fn default_spec(q: usize) -> BilinearSpec {
        if q == 1 {
            BilinearSpec::Lamb
        } else {
            BilinearSpec::Stokes
        }
    }
}

fn seeds(base: u64, trials: usize) -> impl Iterator<Item = u64> {
    (0..trials as u64).map(move |t| base.wrapping_mul(1_000_003).wrapping_add(t))
}

fn complex_identity(grid: &Arc<SpectralGrid>, opts: &VerifyOptions) -> Result<f64> {
    let mut worst = 0.0f64;
    for level in 0..grid.n().saturating_sub(1) {
        for seed in seeds(opts.seed, opts.trials) {
            let u = random_form(grid, level, 0.0, seed)?;
            let dd = dbar(&dbar(&u)?)?;
            worst = worst.max(dd.norm() / u.norm());
        }
    }
    Ok(worst)
}

fn adjointness(grid: &Arc<SpectralGrid>, opts: &VerifyOptions) -> Result<f64> {
    let mut worst = 0.0f64;
    for level in 0..grid.n() {
        for seed in seeds(opts.seed, opts.trials) {
            let u = random_form(grid, level, 0.0, seed)?.into_physical();
            let v = random_form(grid, level + 1, 0.0, seed ^ 0x5555)?.into_physical();
            let lhs = l2_inner(&dbar(&u)?, &v)?;
            let rhs = l2_inner(&u, &dbar_star(&v)?)?;
            worst = worst.max((lhs - rhs).norm() / (u.norm() * v.norm()));
        }
    }
    Ok(worst)
}

fn projector(grid: &Arc<SpectralGrid>, opts: &VerifyOptions) -> Result<BTreeMap<String, f64>> {
    let q = opts.q;
    let mut idem = 0.0f64;
    let mut sym = 0.0f64;
    let mut exact = 0.0f64;
    let mut constraint = 0.0f64;
    for seed in seeds(opts.seed, opts.trials) {
        let u = random_form(grid, q, 0.0, seed)?;
        let v = random_form(grid, q, 0.0, seed ^ 0xaaaa)?;
        let pu = leray_project(&u);
        idem = idem.max(leray_project(&pu).sub(&pu)?.norm() / u.norm());
        let a = l2_inner(&pu, &v)?;
        let b = l2_inner(&u, &leray_project(&v))?;
        sym = sym.max((a - b).norm() / (u.norm() * v.norm()));
        constraint = constraint.max(constraint_residual(&pu) / u.norm());
        if q >= 1 {
            let g = random_form(grid, q - 1, 0.0, seed ^ 0x3333)?;
            let dg = dbar(&g)?;
            if dg.norm() > 0.0 {
                exact = exact.max(leray_project(&dg).norm() / dg.norm());
            }
        }
    }
    Ok(BTreeMap::from([
        ("leray_idempotence".to_string(), idem),
        ("leray_self_adjoint".to_string(), sym),
        ("leray_kills_exact".to_string(), exact),
        ("leray_constraint".to_string(), constraint),
    ]))
}

/// Largest relative spread of `residual(ε)/ε²` about `‖𝒩v‖` for `ε ∈ {1e−1, 1e−2, 1e−3}`.
fn frechet(grid: &Arc<SpectralGrid>, opts: &VerifyOptions) -> Result<f64> {
    let mut worst = 0.0f64;
    for seed in seeds(opts.seed, opts.trials.min(5)) {
        let w = random_form(grid, opts.q, 1.0, seed)?;
        let v = random_form(grid, opts.q, 1.0, seed ^ 0x7777)?;
        let nv = nonlinearity(&v, &opts.spec)?.norm();
        for eps in [1e-1, 1e-2, 1e-3] {
            let r = frechet_residual(&w, &v, eps, &opts.spec)? / (eps * eps);
            let spread = if nv > 0.0 { (r - nv).abs() / nv } else { r };
            worst = worst.max(spread);
        }
    }
    Ok(worst)
}

pub fn run_checks(checks: &[Check], opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.q > opts.n {
        return Err(Error::Parameter(format!("q = {} exceeds n = {}", opts.q, opts.n)));
    }
    if opts.trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    opts.spec.validate(opts.n, opts.q)?;
    let grid = SpectralGrid::new(opts.n, opts.size)?;
    let mut results = BTreeMap::new();
    for check in checks {
        match check {
            Check::Dbar => {
                results.insert("complex_identity".into(), CheckResult::new(complex_identity(&grid, opts)?, 1e-12));
            }
            Check::Adjoint => {
                results.insert("adjointness".into(), CheckResult::new(adjointness(&grid, opts)?, 1e-12));
            }
            Check::Leray => {
                for (name, value) in projector(&grid, opts)? {
                    results.insert(name, CheckResult::new(value, 1e-10));
                }
            }
            Check::Key1 => {
                if opts.q < opts.n {
                    let report = verify_key1(&opts.spec, &grid, opts.q, opts.trials, opts.seed)?;
                    results.insert("key1".into(), CheckResult::new(report.max_normalized, KEY1_TOLERANCE));
                }
            }
            Check::Frechet => {
                results.insert("frechet".into(), CheckResult::new(frechet(&grid, opts)?, 1e-8));
            }
        }
    }
    let pass = results.values().all(|r| r.pass);
    Ok(VerifyReport {
        n: opts.n,
        q: opts.q,
        size: opts.size,
        trials: opts.trials,
        seed: opts.seed,
        checks: results,
        pass,
    })
}
