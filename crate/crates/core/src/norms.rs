//! Sobolev, Lebesgue and mixed space-time norms of fields and trajectories.
//!
//! Spatial derivatives are Fourier multipliers: `∂^α` contributes
//! `Π ζ_a^{2α_a}` to `|û|²` and the full gradient tensor `∇^i` contributes
//! `|ζ|^{2i}`. Time derivatives of stored snapshots use second-order finite
//! differences, `C(I,·)` is the maximum over snapshots and `L²(I,·)` the
//! trapezoid rule.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dolbeault::dbar;
use crate::dynamics::{Forcing, Trajectory};
use crate::error::{Error, Result};
use crate::forms::{l2_inner, FormField};
use crate::spectral::{Representation, SpectralGrid, C64};

/// Accuracy order of the time-difference stencils.
pub const STENCIL_ORDER: u32 = 2;

/// `(Σ_J Σ_ζ (1+|ζ|²)^s |û_J(ζ)|² vol)^{1/2}` for a Fourier-represented field.
pub fn sobolev_hs(u: &FormField, s: u32) -> Result<f64> {
    u.expect_repr(Representation::Fourier)?;
    let grid = u.grid();
    let weights: Vec<f64> = grid.ksq().iter().map(|k| (1.0 + k).powi(s as i32)).collect();
    let sum: f64 = u
        .components()
        .iter()
        .map(|c| c.iter().zip(&weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>())
        .sum();
    Ok((sum * grid.volume()).sqrt())
}

/// `(Σ_J ∫ |u_J|^r dx)^{1/r}` by the rectangle rule on a physical field.
pub fn lr_norm(u: &FormField, r: f64) -> Result<f64> {
    u.expect_repr(Representation::Physical)?;
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("L^r norm needs finite r >= 1, got {r}")));
    }
    let sum: f64 = u
        .components()
        .iter()
        .map(|c| c.iter().map(|v| v.norm().powf(r)).sum::<f64>())
        .sum();
    Ok((sum * u.grid().cell_volume()).powf(1.0 / r))
}

/// Time exponent `𝔰` with `2/𝔰 + 2n/𝔯 = 1`; requires `𝔯 > 2n`.
pub fn lps_exponent(n: usize, r: f64) -> Result<f64> {
    let d = (2 * n) as f64;
    if !(r > d && r.is_finite()) {
        return Err(Error::Parameter(format!("need r > 2n = {d}, got {r}")));
    }
    Ok(2.0 * r / (r - d))
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        m => h * (0.5 * (values[0] + values[m - 1]) + values[1..m - 1].iter().sum::<f64>()),
    }
}

/// `∫₀ᵀ ‖u(t)‖^𝔰_{L^𝔯} dt` over snapshots spaced `h` apart, trapezoid rule.
pub fn lps_integral_series(fields: &[FormField], h: f64, r: f64) -> Result<f64> {
    let Some(first) = fields.first() else {
        return Ok(0.0);
    };
    let s = lps_exponent(first.n(), r)?;
    let values = fields
        .iter()
        .map(|u| Ok(lr_norm(&u.to_physical(), r)?.powf(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(&values, h))
}

/// The strong-solution monitor `‖u‖^𝔰_{L^𝔰(I, L^𝔯)}` of a trajectory.
pub fn lps_integral(traj: &Trajectory, r: f64) -> Result<f64> {
    lps_integral_series(&traj.velocity, traj.snapshot_dt(), r)
}

/// Finite-difference weights for the `order`-th derivative at `x0` from nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// Stencil `(first node, weights)` for `∂_t^j` at snapshot `m` of `len`:
/// centered where it fits, one-sided with `j+2` nodes otherwise.
fn time_stencil(j: usize, m: usize, len: usize, h: f64) -> (usize, Vec<f64>) {
    if j == 0 {
        return (m, vec![1.0]);
    }
    let half = j.div_ceil(2);
    let (start, count) = if m >= half && m + half < len {
        (m - half, 2 * half + 1)
    } else if m < half {
        (0, j + 2)
    } else {
        (len - (j + 2), j + 2)
    };
    let xs: Vec<f64> = (start..start + count).map(|i| i as f64).collect();
    let scale = h.powi(j as i32);
    let w = fornberg_weights(m as f64, &xs, j).into_iter().map(|w| w / scale).collect();
    (start, w)
}

/// `Σ_J |∂_t^j û_J(ζ)|²` for every snapshot.
fn derivative_spectra(fields: &[FormField], h: f64, j: usize) -> Result<Vec<Vec<f64>>> {
    let len = fields.len();
    let four: Vec<FormField> = fields.iter().map(|f| f.to_fourier()).collect();
    let points = four[0].grid().len();
    (0..len)
        .map(|m| {
            let (start, w) = time_stencil(j, m, len, h);
            let mut acc = four[0].zeros_like();
            for (o, &wt) in w.iter().enumerate() {
                acc.axpy(C64::new(wt, 0.0), &four[start + o])?;
            }
            let mut e = vec![0.0; points];
            for c in acc.components() {
                for (ei, v) in e.iter_mut().zip(c) {
                    *ei += v.norm_sqr();
                }
            }
            Ok(e)
        })
        .collect()
}

/// All multi-indices `α ∈ ℕ^{dim}` with `|α| ≤ max`.
fn multi_indices(dim: usize, max: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for a in &out {
            let used: u32 = a.iter().sum();
            for v in 0..=(max as u32 - used) {
                let mut b = a.clone();
                b.push(v);
                next.push(b);
            }
        }
        out = next;
    }
    out
}

fn squared_wavenumbers(grid: &Arc<SpectralGrid>) -> Vec<Vec<f64>> {
    (0..grid.len())
        .map(|i| grid.lattice_point(i).iter().map(|&z| (z * z) as f64).collect())
        .collect()
}

/// `Σ_{i≤k} Σ_{|α|+2j≤2s} (‖∇^i∂^α∂_t^j u‖²_{C(I,L²)} + weight·‖∇^{i+1}∂^α∂_t^j u‖²_{L²(I,L²)})`.
fn bochner_sum(fields: &[FormField], h: f64, k: usize, s: usize, weight: f64) -> Result<f64> {
    let needed = 2 * s + 1;
    if fields.len() < needed {
        return Err(Error::TooFewSnapshots {
            needed,
            have: fields.len(),
        });
    }
    let grid = fields[0].grid();
    for f in fields {
        if **f.grid() != **grid {
            return Err(Error::GridMismatch);
        }
    }
    let vol = grid.volume();
    let ksq = grid.ksq();
    let zsq = squared_wavenumbers(grid);
    let mut total = 0.0;
    for j in 0..=s {
        let spectra = derivative_spectra(fields, h, j)?;
        for alpha in multi_indices(2 * grid.n(), 2 * (s - j)) {
            let partial: Vec<f64> = zsq
                .iter()
                .map(|z| z.iter().zip(&alpha).map(|(x, &a)| x.powi(a as i32)).product())
                .collect();
            for i in 0..=k {
                let mult: Vec<f64> = partial.iter().zip(ksq).map(|(p, kk)| p * kk.powi(i as i32)).collect();
                let mut sup = 0.0f64;
                let mut grads = Vec::with_capacity(spectra.len());
                for e in &spectra {
                    let mut a = 0.0;
                    let mut b = 0.0;
                    for ((ei, m), kk) in e.iter().zip(&mult).zip(ksq) {
                        a += m * ei;
                        b += m * kk * ei;
                    }
                    sup = sup.max(a * vol);
                    grads.push(b * vol);
                }
                total += sup + weight * trapezoid(&grads, h);
            }
        }
    }
    Ok(total)
}

/// `‖u‖_{B_vel^{k,2s,s}}` of the velocity snapshots of a trajectory.
pub fn bochner_vel(traj: &Trajectory, k: usize, s: usize) -> Result<f64> {
    bochner_vel_series(&traj.velocity, traj.snapshot_dt(), traj.config.mu, k, s)
}

/// As [`bochner_vel`] for snapshots spaced `h` apart and viscosity `mu`.
pub fn bochner_vel_series(fields: &[FormField], h: f64, mu: f64, k: usize, s: usize) -> Result<f64> {
    Ok(bochner_sum(fields, h, k, s, mu)?.sqrt())
}

/// `‖f‖_{B_for^{k,2s,s}}` of snapshots spaced `h` apart.
pub fn bochner_for(fields: &[FormField], h: f64, k: usize, s: usize) -> Result<f64> {
    Ok(bochner_sum(fields, h, k, s, 1.0)?.sqrt())
}

/// Which bounded-function terms enter the pressure norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureCase {
    /// `2s + k ≤ n`
    GradientOnly,
    /// `2s + k = n + 1`: adds `‖p‖_{L²(I,C_b)}`.
    WithL2Bounded,
    /// `2s + k > n + 1`: adds `‖p‖_{L²(I,C_b)} + ‖p‖_{C(I,C_b)}`.
    WithL2AndSupBounded,
}

pub fn pressure_case(k: usize, s: usize, n: usize) -> PressureCase {
    match (2 * s + k).cmp(&(n + 1)) {
        std::cmp::Ordering::Less => PressureCase::GradientOnly,
        std::cmp::Ordering::Equal => PressureCase::WithL2Bounded,
        std::cmp::Ordering::Greater => PressureCase::WithL2AndSupBounded,
    }
}

/// `‖p‖_{B_pre^{k+1,2s,s}}` of pressure snapshots spaced `h` apart, in dimension `n`.
pub fn bochner_pre(fields: &[FormField], h: f64, k: usize, s: usize, n: usize) -> Result<f64> {
    let Some(first) = fields.first() else {
        return Err(Error::TooFewSnapshots {
            needed: 2 * s + 1,
            have: 0,
        });
    };
    if first.n() != n {
        return Err(Error::Parameter(format!("pressure lives in dimension {}, not {n}", first.n())));
    }
    let grads = fields.iter().map(dbar).collect::<Result<Vec<_>>>()?;
    let mut value = bochner_for(&grads, h, k, s)?;
    let case = pressure_case(k, s, n);
    if case != PressureCase::GradientOnly {
        let sup: Vec<f64> = fields.iter().map(|p| p.max_abs()).collect();
        let squares: Vec<f64> = sup.iter().map(|v| v * v).collect();
        value += trapezoid(&squares, h).sqrt();
        if case == PressureCase::WithL2AndSupBounded {
            value += sup.iter().cloned().fold(0.0, f64::max);
        }
    }
    Ok(value)
}

/// Labeled values with the parameters that produced them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub values: BTreeMap<String, f64>,
    pub params: NormParams,
    pub time: TimeMetadata,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lps_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lps_s: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeMetadata {
    /// Integrator step.
    pub dt: f64,
    /// Spacing of the stored snapshots.
    pub snapshot_dt: f64,
    pub stencil_order: u32,
}

impl NormReport {
    pub fn for_trajectory(traj: &Trajectory) -> Self {
        Self {
            values: BTreeMap::new(),
            params: NormParams::default(),
            time: TimeMetadata {
                dt: traj.dt,
                snapshot_dt: traj.snapshot_dt(),
                stencil_order: STENCIL_ORDER,
            },
        }
    }

    pub fn insert(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// True when every value is finite and non-negative.
    pub fn all_finite(&self) -> bool {
        self.values.values().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// `∫` of `|û(ζ,t)|²` between two snapshots under exponential interpolation.
fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.5 * (a + b);
    }
    let ratio = a / b;
    if (ratio - 1.0).abs() < 1e-6 {
        // series of (a−b)/ln(a/b) around a = b
        let d = ratio - 1.0;
        return b * (1.0 + d / 2.0 - d * d / 12.0 + d * d * d / 24.0);
    }
    (a - b) / ratio.ln()
}

/// `∫_{t_m}^{t_{m+1}} (‖∂̄u‖² + ‖∂̄*u‖²) dt` from the end-point spectra.
fn dissipation_between(a: &FormField, b: &FormField, h: f64) -> f64 {
    let grid = a.grid();
    let ksq = grid.ksq();
    let mut sum = 0.0;
    for (ca, cb) in a.components().iter().zip(b.components()) {
        for ((x, y), k) in ca.iter().zip(cb).zip(ksq) {
            sum += 0.25 * k * log_mean(x.norm_sqr(), y.norm_sqr());
        }
    }
    sum * grid.volume() * h
}

/// Energy inequality and balance monitors of a trajectory driven by `forcing`.
///
/// Reported keys:
/// - `energy_norm`: `max_t (‖u(t)‖² + 2μ∫₀ᵗ(‖∂̄u‖² + ‖∂̄*u‖²))^{1/2}`
/// - `data_norm`: `‖u₀‖ + ∫₀ᵀ ‖f‖ dt`, which bounds `energy_norm`
/// - `u_0qT`: `(‖u‖²_{C(I,L²)} + μ‖∇u‖²_{L²(I,L²)})^{1/2}`
/// - `energy_balance_residual`, `energy_balance_residual_max`: the defect of
///   `½‖u(t)‖² − ½‖u₀‖² + μ∫(‖∂̄u‖² + ‖∂̄*u‖²) − ∫Re(f,u)` at `T` and its maximum
/// - `max_constraint_residual`: `max ‖(∂̄^{q−1})*u‖/‖u‖` over all steps
/// - `max_energy_increase`: largest step-to-step growth of `‖u‖²`
/// - `lps`: `∫‖u‖^𝔰_{L^𝔯}` for the configured `𝔯`
pub fn energy_report(traj: &Trajectory, forcing: &Forcing) -> Result<NormReport> {
    traj.check()?;
    let mu = traj.config.mu;
    let h = traj.snapshot_dt();
    let r = traj.config.lps_exponent_r();
    let mut report = NormReport::for_trajectory(traj);
    report.params.lps_r = Some(r);
    report.params.lps_s = Some(lps_exponent(traj.config.n, r)?);

    let four: Vec<FormField> = traj.velocity.iter().map(|u| u.to_fourier()).collect();
    let forces: Vec<Option<FormField>> = traj.times.iter().map(|&t| forcing.at(t)).collect();
    let work: Vec<f64> = four
        .iter()
        .zip(&forces)
        .map(|(u, f)| match f {
            Some(f) => l2_inner(f, u).map(|z| z.re),
            None => Ok(0.0),
        })
        .collect::<Result<_>>()?;
    let force_norms: Vec<f64> = forces.iter().map(|f| f.as_ref().map_or(0.0, |f| f.norm())).collect();

    let e0 = four[0].norm_sqr();
    let mut dissipated = 0.0;
    let mut worked = 0.0;
    let mut energy_norm_sq = e0;
    let mut residual = 0.0;
    let mut residual_max = 0.0f64;
    for m in 1..four.len() {
        dissipated += dissipation_between(&four[m - 1], &four[m], h);
        worked += 0.5 * h * (work[m - 1] + work[m]);
        let e = four[m].norm_sqr();
        energy_norm_sq = energy_norm_sq.max(e + 2.0 * mu * dissipated);
        residual = 0.5 * e - 0.5 * e0 + mu * dissipated - worked;
        residual_max = residual_max.max(residual.abs());
    }
    report.insert("energy_norm", energy_norm_sq.sqrt());
    report.insert("data_norm", e0.sqrt() + trapezoid(&force_norms, h));
    report.insert("u_0qT", bochner_vel(traj, 0, 0)?);
    report.insert("energy_balance_residual", residual.abs());
    report.insert("energy_balance_residual_max", residual_max);

    let constraint = traj
        .diagnostics
        .iter()
        .filter(|d| d.energy > 0.0)
        .map(|d| d.dbar_star_residual / d.energy.sqrt())
        .fold(0.0, f64::max);
    report.insert("max_constraint_residual", constraint);
    let increase = traj
        .diagnostics
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(0.0, f64::max);
    report.insert("max_energy_increase", increase);
    report.insert("lps", lps_integral(traj, r)?);
    Ok(report)
}
