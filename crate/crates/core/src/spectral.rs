//! Torus geometry and Fourier machinery.
//!
//! The real domain is the torus `[0, 2π)^{2n}` sampled on `N` points per axis,
//! standing in for `ℂⁿ ≅ ℝ^{2n}` with `z_j = x_j + i x_{j+n}`. Samples are stored
//! row-major over `(x₁, …, x_{2n})` with the last axis fastest. Fourier
//! coefficients use the forward-normalized convention
//!
//! ```text
//! f̂(ζ) = N^{-2n} Σ_x f(x) e^{-iζ·x},     f(x) = Σ_ζ f̂(ζ) e^{iζ·x},
//! ```
//!
//! so a coefficient is the amplitude of the analytic mode. Wavenumbers per axis
//! run over `{-N/2+1, …, N/2}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

/// Columns gathered per pass when transforming a strided axis.
const COLUMN_TILE: usize = 64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

/// Upper bound on the number of grid points a single grid may hold.
const MAX_POINTS: usize = 1 << 24;

/// Whether values are grid samples or Fourier coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Physical,
    Fourier,
}

/// Geometry, frequency lattice, symbol tables and FFT plans of the periodic grid.
pub struct SpectralGrid {
    n: usize,
    size: usize,
    len: usize,
    wavenumbers: Vec<i64>,
    ksq: Vec<f64>,
    mask: Vec<bool>,
    dbar_sym: Vec<Vec<C64>>,
    del_sym: Vec<Vec<C64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("size", &self.size)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.size == other.size
    }
}

/// Eigenvalue of `∂̄_j = ½(∂/∂x_j + i ∂/∂x_{j+n})` on `e^{iζ·x}`; `j` is 1-based.
pub fn dbar_symbol(j: usize, zeta: &[i64]) -> C64 {
    let n = zeta.len() / 2;
    debug_assert!(j >= 1 && j <= n);
    let re = zeta[j - 1] as f64;
    let im = zeta[j - 1 + n] as f64;
    // (i/2)(ζ_j + i ζ_{j+n})
    C64::new(-im / 2.0, re / 2.0)
}

/// Eigenvalue of `∂_j = ½(∂/∂x_j − i ∂/∂x_{j+n})` on `e^{iζ·x}`; `j` is 1-based.
pub fn del_symbol(j: usize, zeta: &[i64]) -> C64 {
    let n = zeta.len() / 2;
    debug_assert!(j >= 1 && j <= n);
    let re = zeta[j - 1] as f64;
    let im = zeta[j - 1 + n] as f64;
    // (i/2)(ζ_j − i ζ_{j+n})
    C64::new(im / 2.0, re / 2.0)
}

/// Exact multiplier `exp(−μ|ζ|²dt/4)` of the diffusion `∂_t û = −μ(|ζ|²/4)û`.
pub fn heat_multiplier(mu: f64, dt: f64, zeta: &[i64]) -> f64 {
    let ksq: f64 = zeta.iter().map(|&z| (z * z) as f64).sum();
    heat_factor(mu, dt, ksq)
}

pub(crate) fn heat_factor(mu: f64, dt: f64, ksq: f64) -> f64 {
    (-mu * ksq * dt / 4.0).exp()
}

impl SpectralGrid {
    /// Builds the grid for complex dimension `n` with `size` samples per real axis.
    pub fn new(n: usize, size: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidGrid("complex dimension must be positive".into()));
        }
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "samples per axis must be a power of two >= 4, got {size}"
            )));
        }
        let dim = 2 * n;
        let len = (0..dim)
            .try_fold(1usize, |acc, _| acc.checked_mul(size))
            .filter(|&l| l <= MAX_POINTS)
            .ok_or_else(|| Error::InvalidGrid(format!("{size}^{dim} points exceed the grid bound")))?;

        let half = (size / 2) as i64;
        let wavenumbers: Vec<i64> = (0..size as i64)
            .map(|i| if i <= half { i } else { i - size as i64 })
            .collect();
        let cutoff = size as f64 / 3.0;

        let mut ksq = vec![0.0; len];
        let mut mask = vec![true; len];
        let mut dbar_sym = vec![vec![ZERO; len]; n];
        let mut del_sym = vec![vec![ZERO; len]; n];
        let mut zeta = vec![0i64; dim];
        let mut digits = vec![0usize; dim];
        for flat in 0..len {
            for (z, &d) in zeta.iter_mut().zip(&digits) {
                *z = wavenumbers[d];
            }
            ksq[flat] = zeta.iter().map(|&z| (z * z) as f64).sum();
            mask[flat] = zeta.iter().all(|&z| (z.abs() as f64) <= cutoff);
            for j in 1..=n {
                dbar_sym[j - 1][flat] = dbar_symbol(j, &zeta);
                del_sym[j - 1][flat] = del_symbol(j, &zeta);
            }
            // odometer, last axis fastest
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < size {
                    break;
                }
                *d = 0;
            }
        }

        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        Ok(Arc::new(Self {
            n,
            size,
            len,
            wavenumbers,
            ksq,
            mask,
            dbar_sym,
            del_sym,
            forward,
            inverse,
        }))
    }

    /// Complex dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Samples per axis `N`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Real dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Number of grid points `N^{2n}`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Torus volume `(2π)^{2n}`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim() as i32)
    }

    /// Quadrature weight of one sample, `(2π/N)^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len as f64
    }

    /// Grid spacing `2π/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    /// Wavenumber carried by axis index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        self.wavenumbers[i]
    }

    /// Lattice point `ζ` of a flat Fourier index.
    pub fn lattice_point(&self, flat: usize) -> Vec<i64> {
        self.digits(flat).into_iter().map(|d| self.wavenumbers[d]).collect()
    }

    /// Flat index of a lattice point, if it lies on the lattice.
    pub fn flat_index(&self, zeta: &[i64]) -> Option<usize> {
        if zeta.len() != self.dim() {
            return None;
        }
        let half = (self.size / 2) as i64;
        let mut flat = 0usize;
        for &z in zeta {
            if z <= -half || z > half {
                return None;
            }
            let d = if z >= 0 { z } else { z + self.size as i64 } as usize;
            flat = flat * self.size + d;
        }
        Some(flat)
    }

    /// Physical coordinates of a flat sample index.
    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.digits(flat).into_iter().map(|d| d as f64 * h).collect()
    }

    fn digits(&self, mut flat: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dim()];
        for d in digits.iter_mut().rev() {
            *d = flat % self.size;
            flat /= self.size;
        }
        digits
    }

    /// `|ζ|²` per flat Fourier index.
    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    /// Dealiasing mask: `true` where every `|ζ_a| ≤ N/3`.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Tabulated `σ_j(ζ)` over the lattice, `j` 1-based.
    pub fn dbar_symbols(&self, j: usize) -> &[C64] {
        &self.dbar_sym[j - 1]
    }

    /// Tabulated `∂_j` symbol over the lattice, `j` 1-based.
    pub fn del_symbols(&self, j: usize) -> &[C64] {
        &self.del_sym[j - 1]
    }

    /// `exp(−μ|ζ|²dt/4)` over the lattice.
    pub fn heat_multipliers(&self, mu: f64, dt: f64) -> Vec<f64> {
        self.ksq.iter().map(|&k| heat_factor(mu, dt, k)).collect()
    }

    /// In-place forward transform (normalized by `N^{-2n}`).
    pub fn forward_in_place(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.len, "buffer does not match grid");
        self.transform_axes(data, &self.forward);
        let scale = 1.0 / self.len as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    /// In-place inverse transform (unnormalized synthesis).
    pub fn inverse_in_place(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.len, "buffer does not match grid");
        self.transform_axes(data, &self.inverse);
    }

    fn transform_axes(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.size;
        let dim = self.dim();
        let scratch_len = plan.get_inplace_scratch_len();
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                let lines = (4096 / n).max(1);
                data.par_chunks_mut(n * lines).for_each(|chunk| {
                    let mut scratch = vec![ZERO; scratch_len];
                    plan.process_with_scratch(chunk, &mut scratch);
                });
            } else {
                let block = n * stride;
                let width = stride.min(COLUMN_TILE);
                data.par_chunks_mut(block).for_each(|blk| {
                    let mut buf = vec![ZERO; n * width];
                    let mut scratch = vec![ZERO; scratch_len];
                    for c0 in (0..stride).step_by(width) {
                        for k in 0..n {
                            let row = &blk[k * stride + c0..k * stride + c0 + width];
                            for (i, &v) in row.iter().enumerate() {
                                buf[i * n + k] = v;
                            }
                        }
                        plan.process_with_scratch(&mut buf, &mut scratch);
                        for k in 0..n {
                            let row = &mut blk[k * stride + c0..k * stride + c0 + width];
                            for (i, v) in row.iter_mut().enumerate() {
                                *v = buf[i * n + k];
                            }
                        }
                    }
                });
            }
        }
    }

    pub(crate) fn dealias_in_place(&self, data: &mut [C64]) {
        data.par_iter_mut()
            .zip(self.mask.par_iter())
            .for_each(|(v, &keep)| {
                if !keep {
                    *v = ZERO;
                }
            });
    }

    pub(crate) fn inv_laplacian_in_place(&self, data: &mut [C64]) {
        data.par_iter_mut()
            .zip(self.ksq.par_iter())
            .for_each(|(v, &k)| {
                if k == 0.0 {
                    *v = ZERO;
                } else {
                    *v *= 4.0 / k;
                }
            });
    }
}

/// One complex scalar field on the grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<SpectralGrid>,
    repr: Representation,
    data: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<SpectralGrid>, repr: Representation) -> Self {
        Self {
            grid: Arc::clone(grid),
            repr,
            data: vec![ZERO; grid.len()],
        }
    }

    pub fn from_data(grid: &Arc<SpectralGrid>, repr: Representation, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Format(format!(
                "scalar field has {} values, grid expects {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            repr,
            data,
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(&[f64]) -> C64) -> Self {
        let data = (0..grid.len()).map(|i| f(&grid.coordinates(i))).collect();
        Self {
            grid: Arc::clone(grid),
            repr: Representation::Physical,
            data,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn repr(&self) -> Representation {
        self.repr
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(Error::Representation { expected: repr })
        }
    }
}

/// Physical samples to Fourier coefficients.
pub fn forward_transform(f: &ScalarField) -> Result<ScalarField> {
    f.expect(Representation::Physical)?;
    let mut out = f.clone();
    out.grid.forward_in_place(&mut out.data);
    out.repr = Representation::Fourier;
    Ok(out)
}

/// Fourier coefficients to physical samples.
pub fn inverse_transform(f: &ScalarField) -> Result<ScalarField> {
    f.expect(Representation::Fourier)?;
    let mut out = f.clone();
    out.grid.inverse_in_place(&mut out.data);
    out.repr = Representation::Physical;
    Ok(out)
}

/// Applies the torus fundamental solution: `4/|ζ|²` off the zero mode, zero on it.
pub fn inv_laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.expect(Representation::Fourier)?;
    let mut out = f.clone();
    out.grid.inv_laplacian_in_place(&mut out.data);
    Ok(out)
}

/// 2/3-rule truncation.
pub fn dealias(f: &ScalarField) -> Result<ScalarField> {
    f.expect(Representation::Fourier)?;
    let mut out = f.clone();
    out.grid.dealias_in_place(&mut out.data);
    Ok(out)
}
