//! Dense-matrix versions of the complex's operators on tiny grids.
//!
//! Two constructions are provided. [`dense_build`] applies the spectral
//! operators to every basis field. [`dense_build_independent`] never touches
//! the FFT: it assembles the operators from the 1-D spectral differentiation
//! matrix `D[j][l] = (1/N) Σ_k ik e^{ik(x_j − x_l)}` (evaluated as a direct sum,
//! wavenumbers `−N/2+1 ..= N/2`) through Kronecker products, with `P^q`
//! obtained from the inverse of the assembled Laplacian shifted by the
//! projector onto constants.
//!
//! Fields are flattened component-major in physical representation: entry
//! `c·N^{2n} + i` holds component `c` at grid point `i`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dolbeault::{dbar, dbar_star, laplacian_q, leray_project};
use crate::error::{Error, Result};
use crate::forms::{binomial, insert_sign, FormField, MultiIndex};
use crate::spectral::{Representation, SpectralGrid, C64, ZERO};

/// Largest admissible row or column count of a dense operator.
pub const SIZE_BOUND: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorTag {
    /// `∂̄^q`: (0,q) → (0,q+1).
    Dbar,
    /// `(∂̄^q)*`: (0,q+1) → (0,q).
    DbarStar,
    /// `Δ^q`: (0,q) → (0,q).
    Laplacian,
    /// `P^q`: (0,q) → (0,q).
    Leray,
}

impl OperatorTag {
    pub const ALL: [OperatorTag; 4] = [
        OperatorTag::Dbar,
        OperatorTag::DbarStar,
        OperatorTag::Laplacian,
        OperatorTag::Leray,
    ];

    /// `(input degree, output degree)` at level `q`.
    pub fn degrees(self, n: usize, q: usize) -> Result<(usize, usize)> {
        let ok = match self {
            OperatorTag::Dbar | OperatorTag::DbarStar => q < n,
            OperatorTag::Laplacian | OperatorTag::Leray => q <= n,
        };
        if !ok {
            return Err(Error::Undefined(format!("{self} at level q = {q} in dimension {n}")));
        }
        Ok(match self {
            OperatorTag::Dbar => (q, q + 1),
            OperatorTag::DbarStar => (q + 1, q),
            _ => (q, q),
        })
    }

    /// The spectral implementation.
    pub fn apply(self, u: &FormField) -> Result<FormField> {
        match self {
            OperatorTag::Dbar => dbar(u),
            OperatorTag::DbarStar => dbar_star(u),
            OperatorTag::Laplacian => Ok(laplacian_q(u)),
            OperatorTag::Leray => Ok(leray_project(u)),
        }
    }

    /// Level `q` of the operator that accepts a (0,degree)-form.
    fn level_for_input(self, degree: usize) -> Result<usize> {
        match self {
            OperatorTag::DbarStar => degree
                .checked_sub(1)
                .ok_or_else(|| Error::Undefined("dbar_star on (0,0)-forms".into())),
            _ => Ok(degree),
        }
    }
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorTag::Dbar => "dbar",
            OperatorTag::DbarStar => "dbar_star",
            OperatorTag::Laplacian => "laplacian",
            OperatorTag::Leray => "leray",
        })
    }
}

impl FromStr for OperatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dbar" => Ok(OperatorTag::Dbar),
            "dbar_star" => Ok(OperatorTag::DbarStar),
            "laplacian" => Ok(OperatorTag::Laplacian),
            "leray" => Ok(OperatorTag::Leray),
            other => Err(Error::Parameter(format!("unknown operator tag {other:?}"))),
        }
    }
}

/// An operator materialized as a complex matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub tag: OperatorTag,
    pub n: usize,
    pub q: usize,
    pub size: usize,
    pub matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn apply(&self, u: &FormField) -> Result<DVector<C64>> {
        let v = flatten(u);
        if v.len() != self.matrix.ncols() {
            return Err(Error::Parameter(format!(
                "field of length {} does not fit a {}x{} operator",
                v.len(),
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        Ok(&self.matrix * v)
    }
}

fn check_size(n: usize, size: usize, degrees: (usize, usize)) -> Result<()> {
    let points = size
        .checked_pow(2 * n as u32)
        .ok_or(Error::SizeBound { dim: usize::MAX, bound: SIZE_BOUND })?;
    let dim = points * binomial(n, degrees.0).max(binomial(n, degrees.1));
    if dim > SIZE_BOUND {
        return Err(Error::SizeBound { dim, bound: SIZE_BOUND });
    }
    Ok(())
}

/// Physical samples of all components stacked into one vector.
pub fn flatten(u: &FormField) -> DVector<C64> {
    let phys = u.to_physical();
    DVector::from_iterator(
        phys.num_components() * phys.grid().len(),
        phys.components().iter().flat_map(|c| c.iter().copied()),
    )
}

/// Columns are the spectral operator applied to the unit basis fields.
pub fn dense_build(tag: OperatorTag, n: usize, q: usize, size: usize) -> Result<DenseOperator> {
    let degrees = tag.degrees(n, q)?;
    check_size(n, size, degrees)?;
    let grid = SpectralGrid::new(n, size)?;
    let points = grid.len();
    let cols = binomial(n, degrees.0) * points;
    let rows = binomial(n, degrees.1) * points;
    let mut matrix = DMatrix::from_element(rows, cols, ZERO);
    let mut basis = FormField::zeros(&grid, degrees.0, Representation::Physical)?;
    for col in 0..cols {
        let (c, i) = (col / points, col % points);
        basis.component_mut(c)[i] = C64::new(1.0, 0.0);
        let image = flatten(&tag.apply(&basis)?);
        matrix.set_column(col, &image);
        basis.component_mut(c)[i] = ZERO;
    }
    Ok(DenseOperator { tag, n, q, size, matrix })
}

/// 1-D spectral differentiation matrix by direct summation.
pub fn differentiation_matrix(size: usize) -> DMatrix<C64> {
    let h = 2.0 * std::f64::consts::PI / size as f64;
    let half = (size / 2) as i64;
    DMatrix::from_fn(size, size, |j, l| {
        let dx = (j as f64 - l as f64) * h;
        let sum: C64 = (-half + 1..=half)
            .map(|k| C64::new(0.0, k as f64) * C64::new(0.0, k as f64 * dx).exp())
            .sum();
        sum / size as f64
    })
}

/// `D` acting along real axis `axis` of the `2n`-dimensional grid.
fn axis_derivative(d: &DMatrix<C64>, n: usize, size: usize, axis: usize) -> DMatrix<C64> {
    let dims = 2 * n;
    let points = size.pow(dims as u32);
    let stride = size.pow((dims - 1 - axis) as u32);
    let mut out = DMatrix::from_element(points, points, ZERO);
    for row in 0..points {
        let xa = (row / stride) % size;
        let base = row - xa * stride;
        for l in 0..size {
            out[(row, base + l * stride)] = d[(xa, l)];
        }
    }
    out
}

/// Places `block` at block position `(r, c)` of a block matrix with `points`-sized blocks.
fn add_block(target: &mut DMatrix<C64>, r: usize, c: usize, points: usize, block: &DMatrix<C64>, scale: C64) {
    let mut view = target.view_mut((r * points, c * points), (points, points));
    view += block * scale;
}

struct Pieces {
    points: usize,
    /// `∂̄_j`, `j = 1..n`
    dbar: Vec<DMatrix<C64>>,
    /// `∂_j`, `j = 1..n`
    del: Vec<DMatrix<C64>>,
    /// `−¼ Σ_a D_a²`
    laplacian: DMatrix<C64>,
}

fn pieces(n: usize, size: usize) -> Pieces {
    let d = differentiation_matrix(size);
    let axes: Vec<DMatrix<C64>> = (0..2 * n).map(|a| axis_derivative(&d, n, size, a)).collect();
    let points = size.pow(2 * n as u32);
    let half = C64::new(0.5, 0.0);
    let i = C64::new(0.0, 1.0);
    let dbar = (0..n).map(|j| (&axes[j] + &axes[j + n] * i) * half).collect();
    let del = (0..n).map(|j| (&axes[j] - &axes[j + n] * i) * half).collect();
    let mut laplacian = DMatrix::from_element(points, points, ZERO);
    for a in &axes {
        laplacian -= (a * a) * C64::new(0.25, 0.0);
    }
    Pieces {
        points,
        dbar,
        del,
        laplacian,
    }
}

fn assemble_dbar(p: &Pieces, n: usize, q: usize) -> DMatrix<C64> {
    let rows = MultiIndex::enumerate(n, q + 1);
    let mut m = DMatrix::from_element(rows.len() * p.points, binomial(n, q) * p.points, ZERO);
    for (r, k) in rows.iter().enumerate() {
        for &j in k.as_slice() {
            let (sign, rest) = k.remove(j).expect("j in K");
            add_block(&mut m, r, rest.rank(n), p.points, &p.dbar[j - 1], C64::new(sign, 0.0));
        }
    }
    m
}

fn assemble_dbar_star(p: &Pieces, n: usize, q: usize) -> DMatrix<C64> {
    let rows = MultiIndex::enumerate(n, q);
    let mut m = DMatrix::from_element(rows.len() * p.points, binomial(n, q + 1) * p.points, ZERO);
    for (r, set) in rows.iter().enumerate() {
        for j in (1..=n).filter(|&j| !set.contains(j)) {
            let (sign, merged) = insert_sign(j, set, n).expect("j not in J");
            add_block(&mut m, r, merged.rank(n), p.points, &p.del[j - 1], C64::new(-(sign as f64), 0.0));
        }
    }
    m
}

fn block_diagonal(block: &DMatrix<C64>, count: usize, points: usize) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(count * points, count * points, ZERO);
    for c in 0..count {
        add_block(&mut m, c, c, points, block, C64::new(1.0, 0.0));
    }
    m
}

/// The same operators assembled from differentiation matrices, without FFTs.
pub fn dense_build_independent(tag: OperatorTag, n: usize, q: usize, size: usize) -> Result<DenseOperator> {
    let degrees = tag.degrees(n, q)?;
    check_size(n, size, degrees)?;
    SpectralGrid::new(n, size)?;
    let p = pieces(n, size);
    let count = binomial(n, q);
    let matrix = match tag {
        OperatorTag::Dbar => assemble_dbar(&p, n, q),
        OperatorTag::DbarStar => assemble_dbar_star(&p, n, q),
        OperatorTag::Laplacian => block_diagonal(&p.laplacian, count, p.points),
        OperatorTag::Leray => {
            if q == 0 {
                DMatrix::identity(count * p.points, count * p.points)
            } else {
                let mean = DMatrix::from_element(p.points, p.points, C64::new(1.0 / p.points as f64, 0.0));
                let mut m = block_diagonal(&mean, count, p.points);
                if q < n {
                    // the kernel of Δ is the constants, so Δ⁺ = (Δ + Z)⁻¹ − Z
                    let up = assemble_dbar_star(&p, n, q) * assemble_dbar(&p, n, q);
                    let shifted = block_diagonal(&(&p.laplacian + &mean), count, p.points);
                    let inverse = shifted
                        .try_inverse()
                        .ok_or_else(|| Error::Format("shifted Laplacian is singular".into()))?
                        - &m;
                    m += inverse * up;
                }
                m
            }
        }
    };
    Ok(DenseOperator { tag, n, q, size, matrix })
}

/// `‖A·vec(u) − vec(op(u))‖ / ‖vec(u)‖` with `A` from [`dense_build_independent`].
pub fn oracle_compare(tag: OperatorTag, u: &FormField) -> Result<f64> {
    let q = tag.level_for_input(u.degree())?;
    let dense = dense_build_independent(tag, u.n(), q, u.grid().size())?;
    oracle_compare_with(&dense, u)
}

/// As [`oracle_compare`] against a prebuilt matrix.
pub fn oracle_compare_with(dense: &DenseOperator, u: &FormField) -> Result<f64> {
    let expect = dense.apply(u)?;
    let got = flatten(&dense.tag.apply(u)?);
    let norm = flatten(u).norm();
    if norm == 0.0 {
        return Ok((expect - got).norm());
    }
    Ok((expect - got).norm() / norm)
}

pub fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.norm()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// A grid for fields fed to [`oracle_compare`].
pub fn oracle_grid(n: usize, size: usize) -> Result<Arc<SpectralGrid>> {
    check_size(n, size, (0, 0))?;
    SpectralGrid::new(n, size)
}
