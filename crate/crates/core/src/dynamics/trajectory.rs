use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SimConfig;
use crate::error::{Error, Result};
use crate::forms::FormField;
use crate::spectral::{SpectralGrid, C64};

/// Per-step scalar monitors, one row of `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    /// `‖u‖²_{L²}`
    pub energy: f64,
    /// `‖∂̄u‖²_{L²}`
    pub dbar_norm_sq: f64,
    /// `‖(∂̄^{q−1})* u‖_{L²}`
    pub dbar_star_residual: f64,
    pub max_abs_u: f64,
    /// Trapezoid rule for `∫₀ᵗ ‖u‖^𝔰_{L^𝔯} dt`.
    pub lps_accum: f64,
}

/// Velocity and pressure snapshots at uniformly spaced times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SimConfig,
    /// Step size of the integrator.
    pub dt: f64,
    pub times: Vec<f64>,
    /// (0,q)-forms in Fourier representation.
    pub velocity: Vec<FormField>,
    /// (0,q−1)-forms in Fourier representation.
    pub pressure: Vec<FormField>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.velocity[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spacing between consecutive snapshots.
    pub fn snapshot_dt(&self) -> f64 {
        self.dt * self.config.output_stride as f64
    }

    pub fn final_velocity(&self) -> &FormField {
        self.velocity.last().expect("trajectories are never empty")
    }

    /// Piecewise linear interpolation of the velocity snapshots.
    pub fn velocity_at(&self, t: f64) -> Result<FormField> {
        let h = self.snapshot_dt();
        let last = self.len() - 1;
        let end = self.times[last];
        if t < -1e-9 * h || t > end + 1e-9 * h {
            return Err(Error::Parameter(format!("t = {t} outside the stored interval [0, {end}]")));
        }
        let s = (t / h).clamp(0.0, last as f64);
        let m = (s.floor() as usize).min(last);
        let theta = s - m as f64;
        if m == last || theta == 0.0 {
            return Ok(self.velocity[m].clone());
        }
        let mut out = self.velocity[m].scale(C64::new(1.0 - theta, 0.0));
        out.axpy(C64::new(theta, 0.0), &self.velocity[m + 1])?;
        Ok(out)
    }

    /// Checks uniform spacing and grid/degree consistency of the snapshots.
    pub fn check(&self) -> Result<()> {
        if self.is_empty() || self.velocity.len() != self.len() || self.pressure.len() != self.len() {
            return Err(Error::Format("snapshot counts disagree".into()));
        }
        let h = self.snapshot_dt();
        for (m, &t) in self.times.iter().enumerate() {
            if (t - m as f64 * h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::Format(format!("snapshot {m} at t = {t} is off the uniform lattice")));
            }
        }
        let grid = self.grid();
        for (u, p) in self.velocity.iter().zip(&self.pressure) {
            if **u.grid() != **grid || **p.grid() != **grid {
                return Err(Error::GridMismatch);
            }
            if u.degree() != self.config.q || p.degree() + 1 != self.config.q {
                return Err(Error::BidegreeMismatch {
                    expected: self.config.q,
                    found: u.degree(),
                });
            }
        }
        Ok(())
    }
}
