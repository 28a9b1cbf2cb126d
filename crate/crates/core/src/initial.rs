//! Initial data and random test fields.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dolbeault::leray_project;
use crate::error::{Error, Result};
use crate::forms::{FormField, MultiIndex};
use crate::spectral::{Representation, SpectralGrid, C64};

fn default_decay() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

/// Recipe for `u₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// Gaussian modes with modulus `|ζ|^{−decay}` inside the dealiasing band,
    /// projected and rescaled to RMS value `amplitude`.
    RandomSolenoidal {
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    SingleMode {
        zeta: Vec<i64>,
        component: Vec<usize>,
        #[serde(default = "one")]
        re: f64,
        #[serde(default)]
        im: f64,
    },
    /// `u_j = cos(x_j) sin(x_{j+1})` for `j = 1..n` (axes cyclic mod 2n), projected. `q = 1` only.
    TaylorGreenAnalog,
    File {
        path: PathBuf,
    },
}

/// Gaussian Fourier coefficients with modulus `|ζ|^{−decay}` on the nonzero
/// dealiased modes of every component; everything else is zero.
pub fn random_spectrum<R: Rng>(grid: &Arc<SpectralGrid>, q: usize, decay: f64, rng: &mut R) -> Result<FormField> {
    let mut u = FormField::zeros(grid, q, Representation::Fourier)?;
    let ksq = grid.ksq();
    let mask = grid.mask();
    for c in 0..u.num_components() {
        for (i, v) in u.component_mut(c).iter_mut().enumerate() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if i == 0 || !mask[i] {
                continue;
            }
            let amp = ksq[i].powf(-decay / 2.0) / std::f64::consts::SQRT_2;
            *v = C64::new(re, im) * amp;
        }
    }
    Ok(u)
}

/// A random field from a seed, as used by the verification routines.
pub fn random_form(grid: &Arc<SpectralGrid>, q: usize, decay: f64, seed: u64) -> Result<FormField> {
    random_spectrum(grid, q, decay, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Builds `u₀` on `grid` as a (0,q)-form in Fourier representation.
pub fn gen_initial(spec: &InitialSpec, grid: &Arc<SpectralGrid>, q: usize, seed: u64) -> Result<FormField> {
    let n = grid.n();
    if q == 0 || q > n {
        return Err(Error::Parameter(format!("initial data needs 1 <= q <= n, got q = {q}")));
    }
    match spec {
        InitialSpec::RandomSolenoidal { decay, amplitude } => {
            if !decay.is_finite() || !amplitude.is_finite() || *amplitude < 0.0 {
                return Err(Error::Parameter("decay and amplitude must be finite, amplitude >= 0".into()));
            }
            let raw = random_form(grid, q, *decay, seed)?;
            let mut u = leray_project(&raw);
            u.dealias_in_place();
            let rms = (u.norm_sqr() / grid.volume()).sqrt();
            if rms == 0.0 {
                return Err(Error::Parameter("random field vanishes after projection".into()));
            }
            u.scale_in_place(C64::new(amplitude / rms, 0.0));
            Ok(u)
        }
        InitialSpec::SingleMode { zeta, component, re, im } => {
            let flat = grid
                .flat_index(zeta)
                .ok_or_else(|| Error::Parameter(format!("mode {zeta:?} is not on the lattice")))?;
            if !grid.mask()[flat] {
                return Err(Error::Parameter(format!("mode {zeta:?} lies outside the dealiasing band")));
            }
            if component.len() != q {
                return Err(Error::Parameter(format!("component {component:?} is not a (0,{q}) index")));
            }
            let idx = MultiIndex::new(component.clone(), n)?;
            let amp = C64::new(*re, *im);
            let mut u = FormField::zeros(grid, q, Representation::Fourier)?;
            u.component_mut(idx.rank(n))[flat] = amp;
            let p = leray_project(&u);
            if p.norm() <= 1e-12 * u.norm() || amp.norm() == 0.0 {
                return Err(Error::Parameter(format!(
                    "mode {zeta:?} in component {component:?} has no solenoidal part"
                )));
            }
            Ok(p)
        }
        InitialSpec::TaylorGreenAnalog => {
            if q != 1 {
                return Err(Error::Parameter("taylor_green_analog is a (0,1)-form".into()));
            }
            let u = FormField::from_fn(grid, 1, |j, x| {
                let next = (j + 1) % (2 * n);
                C64::new(x[j].cos() * x[next].sin(), 0.0)
            })?;
            let p = leray_project(&u.into_fourier());
            if p.norm() == 0.0 {
                return Err(Error::Parameter("taylor_green_analog vanishes on this grid".into()));
            }
            Ok(p)
        }
        InitialSpec::File { path } => {
            let u = crate::io::load_field(path)?;
            if **u.grid() != **grid {
                return Err(Error::GridMismatch);
            }
            if u.degree() != q {
                return Err(Error::BidegreeMismatch {
                    expected: q,
                    found: u.degree(),
                });
            }
            Ok(u.into_fourier())
        }
    }
}
