//! Operators of the Dolbeault complex on form fields.
//!
//! Everything here is a Fourier multiplier: `∂̄` acts through the symbols
//! `σ_j(ζ)`, its formal adjoint through `−∂_j`, and `Δ^q = ∂̄*∂̄ + ∂̄∂̄*`
//! reduces to `|ζ|²/4` on every component. Operators accept either
//! representation and return their result in the representation of the input.
//!
//! The zero mode is the one place where the torus differs from `ℂⁿ`: constants
//! lie in the kernel of `∂̄` and `∂̄*`, so they are assigned to the solenoidal
//! sector by [`leray_project`] and excluded from recovered pressures.

use log::warn;

use crate::error::{Error, Result};
use crate::forms::{binomial, insert_sign, FormField, MultiIndex};
use crate::spectral::{dbar_symbol, Representation, C64, ZERO};

/// Default relative bound on `‖P F‖/‖F‖` accepted by [`pressure_recover`].
pub const PRESSURE_TOLERANCE: f64 = 1e-8;

/// `(symbol index j, source component, sign)` per output component.
type Table = Vec<Vec<(usize, usize, f64)>>;

/// Coupling of `∂̄^q`: `(∂̄u)_K = Σ_a (−1)^{a−1} ∂̄_{k_a} u_{K∖k_a}`.
fn dbar_table(n: usize, q: usize) -> Table {
    MultiIndex::enumerate(n, q + 1)
        .iter()
        .map(|k| {
            k.as_slice()
                .iter()
                .map(|&j| {
                    let (sign, rest) = k.remove(j).expect("j is in K");
                    (j, rest.rank(n), sign)
                })
                .collect()
        })
        .collect()
}

/// Coupling of `(∂̄^q)*`: `(∂̄*v)_J = −Σ_{j∉J} ε(j,J) ∂_j v_{J∪j}`.
fn dbar_star_table(n: usize, q: usize) -> Table {
    MultiIndex::enumerate(n, q)
        .iter()
        .map(|set| {
            (1..=n)
                .filter(|&j| !set.contains(j))
                .map(|j| {
                    let (sign, merged) = insert_sign(j, set, n).expect("j is not in J");
                    (j, merged.rank(n), -(sign as f64))
                })
                .collect()
        })
        .collect()
}

fn apply_table(u: &FormField, table: &Table, out_degree: usize, adjoint: bool) -> FormField {
    debug_assert_eq!(u.repr(), Representation::Fourier);
    let grid = u.grid();
    let mut out = FormField::zeros(grid, out_degree, Representation::Fourier).expect("degree within range");
    for (o, terms) in table.iter().enumerate() {
        let dst = out.component_mut(o);
        for &(j, src, sign) in terms {
            let sym = if adjoint { grid.del_symbols(j) } else { grid.dbar_symbols(j) };
            let s = u.component(src);
            for ((d, &a), &b) in dst.iter_mut().zip(sym).zip(s) {
                *d += sign * a * b;
            }
        }
    }
    out
}

/// `∂̄` on a Fourier-represented field; `q < n` is the caller's responsibility.
pub(crate) fn dbar_fourier(u: &FormField) -> FormField {
    let table = dbar_table(u.n(), u.degree());
    apply_table(u, &table, u.degree() + 1, false)
}

/// `(∂̄)*` on a Fourier-represented field of degree `≥ 1`.
pub(crate) fn dbar_star_fourier(v: &FormField) -> FormField {
    let table = dbar_star_table(v.n(), v.degree() - 1);
    apply_table(v, &table, v.degree() - 1, true)
}

fn in_fourier<F>(u: &FormField, op: F) -> FormField
where
    F: FnOnce(&FormField) -> FormField,
{
    match u.repr() {
        Representation::Fourier => op(u),
        Representation::Physical => op(&u.to_fourier()).into_physical(),
    }
}

/// `∂̄^q`: (0,q) → (0,q+1).
pub fn dbar(u: &FormField) -> Result<FormField> {
    if u.degree() >= u.n() {
        return Err(Error::Undefined(format!("dbar on (0,{})-forms in complex dimension {}", u.degree(), u.n())));
    }
    Ok(in_fourier(u, dbar_fourier))
}

/// `(∂̄^{q})*`: (0,q+1) → (0,q), the formal adjoint under the L² pairing.
pub fn dbar_star(v: &FormField) -> Result<FormField> {
    if v.degree() == 0 {
        return Err(Error::Undefined("dbar_star on (0,0)-forms".into()));
    }
    Ok(in_fourier(v, dbar_star_fourier))
}

pub(crate) fn laplacian_fourier(u: &FormField) -> FormField {
    let (n, q) = (u.n(), u.degree());
    let mut out = u.zeros_like();
    if q < n {
        let up = dbar_star_fourier(&dbar_fourier(u));
        out.axpy(C64::new(1.0, 0.0), &up).expect("same shape");
    }
    if q > 0 {
        let down = dbar_fourier(&dbar_star_fourier(u));
        out.axpy(C64::new(1.0, 0.0), &down).expect("same shape");
    }
    out
}

/// `Δ^q = (∂̄^q)*∂̄^q + ∂̄^{q−1}(∂̄^{q−1})*`, with `∂̄^{−1} = ∂̄^n = 0`.
pub fn laplacian_q(u: &FormField) -> FormField {
    in_fourier(u, laplacian_fourier)
}

pub(crate) fn leray_fourier(u: &FormField) -> FormField {
    let (n, q) = (u.n(), u.degree());
    if q == 0 {
        return u.clone();
    }
    let mut out = if q < n {
        dbar_star_fourier(&dbar_fourier(u))
    } else {
        u.zeros_like()
    };
    let grid = u.grid().clone();
    for c in 0..out.num_components() {
        grid.inv_laplacian_in_place(out.component_mut(c));
        out.component_mut(c)[0] = u.component(c)[0];
    }
    out
}

/// The projector `P^q = φ^q (∂̄^q)* ∂̄^q` onto forms with `(∂̄^{q−1})* u = 0`.
///
/// The zero mode passes through unchanged. At `q = 0` there is no constraint
/// and the input is returned as is.
pub fn leray_project(u: &FormField) -> FormField {
    in_fourier(u, leray_fourier)
}

/// Splits `u` into `(P u, u − P u)`; the second part is `∂̄`-exact.
pub fn hodge_split(u: &FormField) -> (FormField, FormField) {
    let solenoidal = leray_project(u);
    let exact = u.sub(&solenoidal).expect("same shape");
    (solenoidal, exact)
}

/// `‖(∂̄^{q−1})* u‖_{L²}`, zero for (0,0)-forms.
pub fn constraint_residual(u: &FormField) -> f64 {
    if u.degree() == 0 {
        return 0.0;
    }
    let uf;
    let u = if u.repr() == Representation::Fourier {
        u
    } else {
        uf = u.to_fourier();
        &uf
    };
    dbar_star_fourier(u).norm()
}

/// Recovers `p` with `∂̄^{q−1} p = F` from an exact source via `p = (∂̄^{q−1})* φ^q F`.
pub fn pressure_recover(source: &FormField) -> Result<FormField> {
    pressure_recover_with_tolerance(source, PRESSURE_TOLERANCE)
}

/// As [`pressure_recover`], rejecting sources with `‖P F‖ > tolerance · ‖F‖`.
pub fn pressure_recover_with_tolerance(source: &FormField, tolerance: f64) -> Result<FormField> {
    if source.degree() == 0 {
        return Err(Error::Undefined("pressure of a (0,0)-form".into()));
    }
    let sf = source.to_fourier();
    let norm = sf.norm();
    if norm > 0.0 {
        let residual = leray_fourier(&sf).norm() / norm;
        if residual > tolerance {
            warn!("pressure source is not exact: relative residual {residual:e}");
            return Err(Error::PressureResidual { residual });
        }
    }
    Ok(pressure_fourier(&sf).into_repr(source.repr()))
}

/// `(∂̄^{q−1})* φ^q F` with the zero mode removed, for a Fourier-represented `F`
/// already known to be exact.
pub(crate) fn pressure_fourier(source: &FormField) -> FormField {
    let mut phi = source.clone();
    let grid = phi.grid().clone();
    for c in 0..phi.num_components() {
        grid.inv_laplacian_in_place(phi.component_mut(c));
    }
    let mut p = dbar_star_fourier(&phi);
    for c in 0..p.num_components() {
        p.component_mut(c)[0] = ZERO;
    }
    p
}

/// Dense Hermitian matrix of `P^q(ζ)` acting on the `binomial(n,q)` components at one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl FiberMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &FiberMatrix) -> FiberMatrix {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[r * d + c] = (0..d).map(|k| self.get(r, k) * other.get(k, c)).sum();
            }
        }
        FiberMatrix { dim: d, entries }
    }

    pub fn adjoint(&self) -> FiberMatrix {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.get(r, c).conj();
            }
        }
        FiberMatrix { dim: d, entries }
    }

    pub fn max_abs_diff(&self, other: &FiberMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Materializes `P^q(ζ) = (4/|ζ|²) σ^q(ζ)* σ^q(ζ)`, the identity at `ζ = 0`.
pub fn fiber_matrix(n: usize, q: usize, zeta: &[i64]) -> FiberMatrix {
    let dim = binomial(n, q);
    let ksq: f64 = zeta.iter().map(|&z| (z * z) as f64).sum();
    if ksq == 0.0 || q == 0 {
        return FiberMatrix::identity(dim);
    }
    if q >= n {
        return FiberMatrix {
            dim,
            entries: vec![ZERO; dim * dim],
        };
    }
    // rows of σ^q(ζ): one per (0,q+1) component
    let rows = binomial(n, q + 1);
    let mut sigma = vec![ZERO; rows * dim];
    for (r, terms) in dbar_table(n, q).iter().enumerate() {
        for &(j, src, sign) in terms {
            sigma[r * dim + src] += sign * dbar_symbol(j, zeta);
        }
    }
    let mut entries = vec![ZERO; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let s: C64 = (0..rows).map(|r| sigma[r * dim + a].conj() * sigma[r * dim + b]).sum();
            entries[a * dim + b] = s * (4.0 / ksq);
        }
    }
    FiberMatrix { dim, entries }
}
