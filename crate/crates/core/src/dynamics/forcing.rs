use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{FormField, MultiIndex};
use crate::spectral::{Representation, SpectralGrid, C64};

/// Right-hand side `f` as written in a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    #[default]
    Zero,
    /// `f_J(x, t) = (re + i·im) · exp(i(ζ·x + ωt))`, other components zero.
    SingleMode {
        zeta: Vec<i64>,
        component: Vec<usize>,
        re: f64,
        #[serde(default)]
        im: f64,
        #[serde(default)]
        omega: f64,
    },
    /// A time-independent field stored in the field directory format.
    File { path: PathBuf },
}

impl ForcingSpec {
    pub fn validate(&self, n: usize, q: usize, size: usize) -> Result<()> {
        match self {
            ForcingSpec::Zero | ForcingSpec::File { .. } => Ok(()),
            ForcingSpec::SingleMode { zeta, component, .. } => {
                if zeta.len() != 2 * n {
                    return Err(Error::Config(format!("forcing mode needs {} wavenumbers", 2 * n)));
                }
                let half = (size / 2) as i64;
                if zeta.iter().any(|&z| z <= -half || z > half) {
                    return Err(Error::Config(format!("forcing mode {zeta:?} outside the lattice")));
                }
                if component.len() != q {
                    return Err(Error::Config(format!("forcing component {component:?} is not a (0,{q}) index")));
                }
                MultiIndex::new(component.clone(), n).map_err(|e| Error::Config(e.to_string()))?;
                Ok(())
            }
        }
    }
}

/// Forcing resolved against a grid, evaluated in Fourier representation.
#[derive(Clone, Debug)]
pub enum Forcing {
    Zero,
    Static(FormField),
    SingleMode {
        flat: usize,
        component: usize,
        amplitude: C64,
        omega: f64,
        degree: usize,
        grid: Arc<SpectralGrid>,
    },
}

impl Forcing {
    pub fn resolve(spec: &ForcingSpec, grid: &Arc<SpectralGrid>, q: usize) -> Result<Self> {
        spec.validate(grid.n(), q, grid.size())?;
        match spec {
            ForcingSpec::Zero => Ok(Forcing::Zero),
            ForcingSpec::SingleMode {
                zeta,
                component,
                re,
                im,
                omega,
            } => {
                let flat = grid
                    .flat_index(zeta)
                    .ok_or_else(|| Error::Config(format!("forcing mode {zeta:?} outside the lattice")))?;
                let idx = MultiIndex::new(component.clone(), grid.n())?;
                Ok(Forcing::SingleMode {
                    flat,
                    component: idx.rank(grid.n()),
                    amplitude: C64::new(*re, *im),
                    omega: *omega,
                    degree: q,
                    grid: Arc::clone(grid),
                })
            }
            ForcingSpec::File { path } => {
                let field = crate::io::load_field(path)?;
                Self::from_field(field, grid, q)
            }
        }
    }

    pub fn from_field(field: FormField, grid: &Arc<SpectralGrid>, q: usize) -> Result<Self> {
        if **field.grid() != **grid {
            return Err(Error::GridMismatch);
        }
        if field.degree() != q {
            return Err(Error::BidegreeMismatch {
                expected: q,
                found: field.degree(),
            });
        }
        Ok(Forcing::Static(field.into_fourier()))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// `f(t)` in Fourier representation, `None` when identically zero.
    pub fn at(&self, t: f64) -> Option<FormField> {
        match self {
            Forcing::Zero => None,
            Forcing::Static(f) => Some(f.clone()),
            Forcing::SingleMode {
                flat,
                component,
                amplitude,
                omega,
                degree,
                grid,
            } => {
                let mut f = FormField::zeros(grid, *degree, Representation::Fourier).expect("validated degree");
                f.component_mut(*component)[*flat] = amplitude * C64::new(0.0, omega * t).exp();
                Some(f)
            }
        }
    }
}
