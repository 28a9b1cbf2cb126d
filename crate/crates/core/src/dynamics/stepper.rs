use std::sync::Arc;

use log::{debug, info};

use super::{
    check_constraint, linearized_prepared, nonlinearity_prepared, verify_key1, zero_form, Forcing, Prepared,
    SimConfig, StepDiagnostics, Trajectory,
};
use crate::dolbeault::{dbar_fourier, dbar_star_fourier, leray_fourier, pressure_fourier};
use crate::error::{Error, Result};
use crate::forms::{BilinearSpec, FormField};
use crate::norms::{lps_exponent, lr_norm};
use crate::spectral::{SpectralGrid, C64};

/// Largest number of halvings the CFL shrink mode applies to one step.
const MAX_HALVINGS: u32 = 20;

enum Drift<'a> {
    Nonlinear,
    /// `𝐁(w(t), u)` around a stored base trajectory.
    Linearized(&'a Trajectory),
}

struct Integrator<'a> {
    config: &'a SimConfig,
    spec: &'a BilinearSpec,
    grid: Arc<SpectralGrid>,
    forcing: &'a Forcing,
    drift: Drift<'a>,
    /// Advective speed of the base flow, used by the CFL limit in linearized mode.
    base_speed: f64,
}

impl Integrator<'_> {
    /// `f(t) − 𝒩u` or `f(t) − 𝐁(w(t), u)`, in Fourier representation.
    fn source(&self, u: &FormField, t: f64) -> Result<FormField> {
        let mut g = match (&self.drift, self.spec.is_stokes()) {
            (_, true) => zero_form(&self.grid, self.config.q),
            (Drift::Nonlinear, false) => {
                let mut n = nonlinearity_prepared(self.spec, &Prepared::new(u))?;
                n.scale_in_place(C64::new(-1.0, 0.0));
                n
            }
            (Drift::Linearized(base), false) => {
                let w = base.velocity_at(t)?;
                let mut b = linearized_prepared(self.spec, &Prepared::new(&w), &Prepared::new(u))?;
                b.scale_in_place(C64::new(-1.0, 0.0));
                b
            }
        };
        if let Some(f) = self.forcing.at(t) {
            g.axpy(C64::new(1.0, 0.0), &f)?;
        }
        Ok(g)
    }

    fn tendency(&self, u: &FormField, t: f64) -> Result<FormField> {
        Ok(leray_fourier(&self.source(u, t)?))
    }

    /// One ETD-Heun step of size `dt` with heat multipliers `heat`.
    fn step(&self, u: &FormField, t: f64, dt: f64, heat: &[f64]) -> Result<FormField> {
        let dt_c = C64::new(dt, 0.0);
        let k1 = self.tendency(u, t)?;
        let mut stage = u.clone();
        stage.axpy(dt_c, &k1)?;
        stage.apply_multiplier(heat);
        let k2 = self.tendency(&stage, t + dt)?;
        let mut ek1 = k1;
        ek1.apply_multiplier(heat);
        let mut next = u.clone();
        next.apply_multiplier(heat);
        next.axpy(dt_c * 0.5, &ek1)?;
        next.axpy(dt_c * 0.5, &k2)?;
        Ok(leray_fourier(&next))
    }

    fn cfl_limit(&self, max_u: f64) -> Option<f64> {
        if self.spec.is_stokes() {
            return None;
        }
        let speed = match self.drift {
            Drift::Nonlinear => max_u,
            Drift::Linearized(_) => self.base_speed,
        };
        Some(self.config.cfl_safety * self.grid.spacing() / speed.max(1.0))
    }

    fn pressure(&self, u: &FormField, t: f64) -> Result<FormField> {
        let source = self.source(u, t)?;
        let exact = source.sub(&leray_fourier(&source))?;
        Ok(pressure_fourier(&exact))
    }

    fn run(&self, u0: &FormField) -> Result<Trajectory> {
        let cfg = self.config;
        let steps = cfg.num_steps();
        let dt = cfg.step_size();
        let stride = cfg.output_stride;
        let r = cfg.lps_exponent_r();
        let s = lps_exponent(cfg.n, r)?;
        let heat = self.grid.heat_multipliers(cfg.mu, dt);

        let mut u = u0.to_fourier();
        let (mut diag, mut power) = diagnostics(&u, 0.0, r, s, None, dt);
        let mut traj = Trajectory {
            config: cfg.clone(),
            dt,
            times: vec![0.0],
            velocity: vec![u.clone()],
            pressure: vec![self.pressure(&u, 0.0)?],
            diagnostics: vec![diag.clone()],
        };
        info!("integrating {steps} steps of size {dt:e}");
        for m in 0..steps {
            let t = m as f64 * dt;
            let t_next = (m + 1) as f64 * dt;
            let substeps = match self.cfl_limit(diag.max_abs_u) {
                Some(limit) if dt > limit => match cfg.cfl_mode {
                    super::CflMode::Fail => return Err(Error::Cfl { t, dt, limit }),
                    super::CflMode::Shrink => {
                        let k = (dt / limit).log2().ceil().max(1.0) as u32;
                        if k > MAX_HALVINGS {
                            return Err(Error::Cfl { t, dt, limit });
                        }
                        debug!("t = {t}: splitting the step into {} substeps", 1u64 << k);
                        1usize << k
                    }
                },
                _ => 1,
            };
            if substeps == 1 {
                u = self.step(&u, t, dt, &heat)?;
            } else {
                let h = dt / substeps as f64;
                let sub_heat = self.grid.heat_multipliers(cfg.mu, h);
                for j in 0..substeps {
                    u = self.step(&u, t + j as f64 * h, h, &sub_heat)?;
                }
            }
            if !u.is_finite() {
                return Err(Error::BlowUp { t: t_next });
            }
            (diag, power) = diagnostics(&u, t_next, r, s, Some((diag.lps_accum, power)), dt);
            if !diag.max_abs_u.is_finite() || !diag.energy.is_finite() {
                return Err(Error::BlowUp { t: t_next });
            }
            traj.diagnostics.push(diag.clone());
            if (m + 1) % stride == 0 {
                traj.times.push(t_next);
                traj.pressure.push(self.pressure(&u, t_next)?);
                traj.velocity.push(u.clone());
            }
        }
        Ok(traj)
    }
}

/// Monitors of `u` at time `t`; `prev` carries the previous accumulator and
/// integrand of the `L^𝔰(L^𝔯)` trapezoid rule. Returns the new integrand too.
fn diagnostics(u: &FormField, t: f64, r: f64, s: f64, prev: Option<(f64, f64)>, dt: f64) -> (StepDiagnostics, f64) {
    let physical = u.to_physical();
    let power = lr_norm(&physical, r).expect("physical field, r > 2n").powf(s);
    let lps_accum = match prev {
        None => 0.0,
        Some((accum, prev_power)) => accum + 0.5 * dt * (prev_power + power),
    };
    let diag = StepDiagnostics {
        t,
        energy: u.norm_sqr(),
        dbar_norm_sq: dbar_fourier(u).norm_sqr(),
        dbar_star_residual: dbar_star_fourier(u).norm(),
        max_abs_u: physical.max_abs(),
        lps_accum,
    };
    (diag, power)
}

fn prepare(config: &SimConfig, u0: &FormField) -> Result<()> {
    config.validate()?;
    if u0.n() != config.n || u0.grid().size() != config.size {
        return Err(Error::GridMismatch);
    }
    if u0.degree() != config.q {
        return Err(Error::BidegreeMismatch {
            expected: config.q,
            found: u0.degree(),
        });
    }
    check_constraint(u0)?;
    if let BilinearSpec::Custom { .. } = &config.nonlinearity {
        let report = verify_key1(&config.nonlinearity, u0.grid(), config.q, 3, config.seed)?;
        if !report.pass {
            return Err(Error::InadmissibleSpec(format!(
                "M1 is not orthogonal to solenoidal fields: normalized pairing {:e}",
                report.max_normalized
            )));
        }
    }
    Ok(())
}

/// Integrates the nonlinear problem from `u0` with the forcing of `config`.
pub fn simulate(config: &SimConfig, u0: &FormField) -> Result<Trajectory> {
    config.validate()?;
    let forcing = Forcing::resolve(&config.forcing, u0.grid(), config.q)?;
    simulate_with_forcing(config, u0, &forcing)
}

/// As [`simulate`] with an already resolved forcing.
pub fn simulate_with_forcing(config: &SimConfig, u0: &FormField, forcing: &Forcing) -> Result<Trajectory> {
    prepare(config, u0)?;
    Integrator {
        config,
        spec: &config.nonlinearity,
        grid: Arc::clone(u0.grid()),
        forcing,
        drift: Drift::Nonlinear,
        base_speed: 0.0,
    }
    .run(u0)
}

/// Integrates `∂_t u + μΔu + P𝐁(w(t), u) = Pf` around the base trajectory `base`.
pub fn solve_linearized(base: &Trajectory, config: &SimConfig, u0: &FormField) -> Result<Trajectory> {
    prepare(config, u0)?;
    base.check()?;
    if **base.grid() != **u0.grid() {
        return Err(Error::GridMismatch);
    }
    if base.config.q != config.q {
        return Err(Error::BidegreeMismatch {
            expected: config.q,
            found: base.config.q,
        });
    }
    let end = *base.times.last().expect("checked");
    if end < config.horizon * (1.0 - 1e-12) {
        return Err(Error::Parameter(format!(
            "base trajectory ends at {end}, before T = {}",
            config.horizon
        )));
    }
    let forcing = Forcing::resolve(&config.forcing, u0.grid(), config.q)?;
    let base_speed = base.velocity.iter().map(|w| w.max_abs()).fold(0.0, f64::max);
    Integrator {
        config,
        spec: &config.nonlinearity,
        grid: Arc::clone(u0.grid()),
        forcing: &forcing,
        drift: Drift::Linearized(base),
        base_speed,
    }
    .run(u0)
}
