//! (0,q)-forms on the grid and the zero-order bilinear maps `M₁`, `M₂`.
//!
//! A (0,q)-form `Σ_J u_J dz̄_J` is stored as one scalar field per strictly
//! increasing multi-index `J ⊂ {1..n}` of length `q`, in lexicographic order.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Representation, ScalarField, SpectralGrid, C64, ZERO};

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Strictly increasing tuple of 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let increasing = indices.windows(2).all(|w| w[0] < w[1]);
        let in_range = indices.iter().all(|&j| j >= 1 && j <= n);
        if increasing && in_range {
            Ok(Self(indices))
        } else {
            Err(Error::InvalidMultiIndex { indices, n })
        }
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// All multi-indices of length `q` in `{1..n}`, lexicographically ordered.
    pub fn enumerate(n: usize, q: usize) -> Vec<MultiIndex> {
        let mut out = Vec::with_capacity(binomial(n, q));
        let mut current = Vec::with_capacity(q);
        fn rec(start: usize, n: usize, q: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if current.len() == q {
                out.push(MultiIndex(current.clone()));
                return;
            }
            for j in start..=n {
                current.push(j);
                rec(j + 1, n, q, current, out);
                current.pop();
            }
        }
        rec(1, n, q, &mut current, &mut out);
        out
    }

    /// Position of `self` in [`MultiIndex::enumerate`]`(n, self.len())`.
    pub fn rank(&self, n: usize) -> usize {
        let q = self.0.len();
        let mut rank = 0;
        let mut prev = 0;
        for (i, &c) in self.0.iter().enumerate() {
            for v in prev + 1..c {
                rank += binomial(n - v, q - i - 1);
            }
            prev = c;
        }
        rank
    }

    /// The index with `j` removed, together with the sign of moving `dz̄_j` to the front.
    pub fn remove(&self, j: usize) -> Option<(f64, MultiIndex)> {
        let pos = self.0.binary_search(&j).ok()?;
        let mut rest = self.0.clone();
        rest.remove(pos);
        let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
        Some((sign, MultiIndex(rest)))
    }
}

/// `dz̄_j ∧ dz̄_J = sign · dz̄_K` with `K = sorted(J ∪ {j})`.
pub fn insert_sign(j: usize, set: &MultiIndex, n: usize) -> Result<(i32, MultiIndex)> {
    if j == 0 || j > n || set.len() >= n {
        return Err(Error::InvalidMultiIndex {
            indices: set.0.clone(),
            n,
        });
    }
    match set.0.binary_search(&j) {
        Ok(_) => Err(Error::DuplicateIndex {
            index: j,
            existing: set.0.clone(),
        }),
        Err(pos) => {
            let mut merged = set.0.clone();
            merged.insert(pos, j);
            let sign = if pos % 2 == 0 { 1 } else { -1 };
            Ok((sign, MultiIndex(merged)))
        }
    }
}

/// A (0,q)-form with one scalar field per multi-index.
#[derive(Clone, Debug)]
pub struct FormField {
    grid: Arc<SpectralGrid>,
    degree: usize,
    repr: Representation,
    components: Vec<Vec<C64>>,
}

impl FormField {
    pub fn zeros(grid: &Arc<SpectralGrid>, degree: usize, repr: Representation) -> Result<Self> {
        let count = Self::component_count(grid, degree)?;
        Ok(Self {
            grid: Arc::clone(grid),
            degree,
            repr,
            components: vec![vec![ZERO; grid.len()]; count],
        })
    }

    pub fn from_components(
        grid: &Arc<SpectralGrid>,
        degree: usize,
        repr: Representation,
        components: Vec<Vec<C64>>,
    ) -> Result<Self> {
        let count = Self::component_count(grid, degree)?;
        if components.len() != count {
            return Err(Error::Format(format!(
                "(0,{degree})-form needs {count} components, got {}",
                components.len()
            )));
        }
        if components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Format("component length does not match the grid".into()));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            degree,
            repr,
            components,
        })
    }

    /// Scalar fields wrapped as (0,0)-forms.
    pub fn from_scalar(f: ScalarField) -> Self {
        let grid = Arc::clone(f.grid());
        let repr = f.repr();
        Self {
            grid,
            degree: 0,
            repr,
            components: vec![f.into_data()],
        }
    }

    /// Samples `f(component, x)` in physical space.
    pub fn from_fn(
        grid: &Arc<SpectralGrid>,
        degree: usize,
        f: impl Fn(usize, &[f64]) -> C64 + Sync,
    ) -> Result<Self> {
        let count = Self::component_count(grid, degree)?;
        let coords: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.coordinates(i)).collect();
        let components = (0..count)
            .map(|c| coords.iter().map(|x| f(c, x)).collect())
            .collect();
        Ok(Self {
            grid: Arc::clone(grid),
            degree,
            repr: Representation::Physical,
            components,
        })
    }

    fn component_count(grid: &SpectralGrid, degree: usize) -> Result<usize> {
        if degree > grid.n() {
            return Err(Error::Parameter(format!(
                "bidegree (0,{degree}) exceeds complex dimension {}",
                grid.n()
            )));
        }
        Ok(binomial(grid.n(), degree))
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// The `q` of the bidegree (0,q).
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn repr(&self) -> Representation {
        self.repr
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        MultiIndex::enumerate(self.n(), self.degree)
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[C64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.components[c]
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.components
    }

    pub fn by_index(&self, index: &MultiIndex) -> Option<&[C64]> {
        if index.len() != self.degree {
            return None;
        }
        self.components.get(index.rank(self.n())).map(Vec::as_slice)
    }

    pub fn scalar(&self, c: usize) -> ScalarField {
        ScalarField::from_data(&self.grid, self.repr, self.components[c].clone())
            .expect("component length matches grid")
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            degree: self.degree,
            repr: self.repr,
            components: vec![vec![ZERO; self.grid.len()]; self.components.len()],
        }
    }

    pub fn into_fourier(mut self) -> Self {
        if self.repr == Representation::Physical {
            let grid = Arc::clone(&self.grid);
            self.components
                .par_iter_mut()
                .for_each(|c| grid.forward_in_place(c));
            self.repr = Representation::Fourier;
        }
        self
    }

    pub fn into_physical(mut self) -> Self {
        if self.repr == Representation::Fourier {
            let grid = Arc::clone(&self.grid);
            self.components
                .par_iter_mut()
                .for_each(|c| grid.inverse_in_place(c));
            self.repr = Representation::Physical;
        }
        self
    }

    pub fn to_fourier(&self) -> Self {
        self.clone().into_fourier()
    }

    pub fn to_physical(&self) -> Self {
        self.clone().into_physical()
    }

    pub fn into_repr(self, repr: Representation) -> Self {
        match repr {
            Representation::Physical => self.into_physical(),
            Representation::Fourier => self.into_fourier(),
        }
    }

    pub(crate) fn expect_repr(&self, repr: Representation) -> Result<()> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(Error::Representation { expected: repr })
        }
    }

    /// Checks that `other` lives on the same grid with the same bidegree.
    pub fn check_compatible(&self, other: &FormField) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        if self.degree != other.degree {
            return Err(Error::BidegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        Ok(())
    }

    /// `self + a·x`, with `x` converted to this representation if needed.
    pub fn axpy(&mut self, a: C64, x: &FormField) -> Result<()> {
        self.check_compatible(x)?;
        let converted;
        let x = if x.repr == self.repr {
            x
        } else {
            converted = x.clone().into_repr(self.repr);
            &converted
        };
        for (dst, src) in self.components.iter_mut().zip(&x.components) {
            dst.par_iter_mut().zip(src.par_iter()).for_each(|(d, s)| *d += a * s);
        }
        Ok(())
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &FormField) -> Result<FormField> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn scale(&self, a: C64) -> FormField {
        let mut out = self.clone();
        out.scale_in_place(a);
        out
    }

    pub fn scale_in_place(&mut self, a: C64) {
        for c in &mut self.components {
            c.par_iter_mut().for_each(|v| *v *= a);
        }
    }

    /// Multiplies every component by a real multiplier given per Fourier mode.
    pub(crate) fn apply_multiplier(&mut self, multiplier: &[f64]) {
        debug_assert_eq!(self.repr, Representation::Fourier);
        for c in &mut self.components {
            c.par_iter_mut().zip(multiplier.par_iter()).for_each(|(v, &m)| *v *= m);
        }
    }

    pub(crate) fn dealias_in_place(&mut self) {
        debug_assert_eq!(self.repr, Representation::Fourier);
        let grid = Arc::clone(&self.grid);
        for c in &mut self.components {
            grid.dealias_in_place(c);
        }
    }

    /// `‖u‖²_{L²}` (Parseval in Fourier representation, rectangle rule otherwise).
    pub fn norm_sqr(&self) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        match self.repr {
            Representation::Physical => sum * self.grid.cell_volume(),
            Representation::Fourier => sum * self.grid.volume(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `sup_x (Σ_J |u_J(x)|²)^{1/2}` over the grid samples.
    pub fn max_abs(&self) -> f64 {
        let phys;
        let field = if self.repr == Representation::Physical {
            self
        } else {
            phys = self.to_physical();
            &phys
        };
        (0..self.grid.len())
            .map(|i| field.components.iter().map(|c| c[i].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    /// Largest absolute difference over all stored values.
    pub fn max_abs_diff(&self, other: &FormField) -> Result<f64> {
        self.check_compatible(other)?;
        let converted;
        let other = if other.repr == self.repr {
            other
        } else {
            converted = other.clone().into_repr(self.repr);
            &converted
        };
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }
}

/// Sesquilinear pairing `(u, v)_{L²} = Σ_J ∫ u_J conj(v_J) dx`.
pub fn l2_inner(u: &FormField, v: &FormField) -> Result<C64> {
    u.check_compatible(v)?;
    let converted;
    let v = if v.repr == u.repr {
        v
    } else {
        converted = v.clone().into_repr(u.repr);
        &converted
    };
    let sum: C64 = u
        .components
        .iter()
        .zip(&v.components)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>())
        .sum();
    let weight = match u.repr {
        Representation::Physical => u.grid.cell_volume(),
        Representation::Fourier => u.grid.volume(),
    };
    Ok(sum * weight)
}

/// One sparse coefficient of a custom bilinear tensor.
///
/// For `M₁` the entry contributes `c · ω_A · u_B` to output `K`; for `M₂` it
/// contributes `c · u_A · w_B`. `conj_u` conjugates the second argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default, alias = "conj_w", alias = "conj")]
    pub conj_u: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    #[serde(default)]
    pub entries: Vec<TensorEntry>,
}

/// The pair of constant-coefficient bilinear maps defining the nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BilinearSpec {
    /// `M₁ ≡ 0`, `M₂ ≡ 0`.
    Stokes,
    /// Conjugate contraction analogue of the Lamb form, `q = 1` only.
    Lamb,
    Custom {
        #[serde(default)]
        m1: TensorSpec,
        #[serde(default)]
        m2: TensorSpec,
    },
}

/// Compiled entry: output component, first-argument component, second-argument component.
#[derive(Clone, Copy, Debug)]
struct Term {
    out: usize,
    first: usize,
    second: usize,
    coeff: C64,
    conj: bool,
}

impl BilinearSpec {
    pub fn is_stokes(&self) -> bool {
        matches!(self, BilinearSpec::Stokes)
    }

    /// Checks the maps against the bidegree `q` on `ℂⁿ`.
    pub fn validate(&self, n: usize, q: usize) -> Result<()> {
        match self {
            BilinearSpec::Stokes => Ok(()),
            BilinearSpec::Lamb => {
                if q == 1 && n >= 2 {
                    Ok(())
                } else {
                    Err(Error::InadmissibleSpec(format!("lamb requires q = 1 and n >= 2, got n = {n}, q = {q}")))
                }
            }
            BilinearSpec::Custom { m1, m2 } => {
                self.m1_terms(n, q)?;
                if q == 0 && !m2.entries.is_empty() {
                    return Err(Error::InadmissibleSpec("M2 needs q >= 1".into()));
                }
                if q >= 1 {
                    self.m2_terms(n, q)?;
                }
                if q >= n && !m1.entries.is_empty() {
                    return Err(Error::InadmissibleSpec("M1 needs q < n".into()));
                }
                Ok(())
            }
        }
    }

    fn compile(entries: &[TensorEntry], n: usize, degrees: [usize; 3]) -> Result<Vec<Term>> {
        entries
            .iter()
            .map(|e| {
                let parts = [&e.k, &e.a, &e.b];
                let mut ranks = [0usize; 3];
                for ((idx, &deg), rank) in parts.iter().zip(&degrees).zip(&mut ranks) {
                    if idx.len() != deg {
                        return Err(Error::InadmissibleSpec(format!(
                            "tensor index {idx:?} should have length {deg}"
                        )));
                    }
                    let mi = MultiIndex::new((*idx).clone(), n)
                        .map_err(|e| Error::InadmissibleSpec(e.to_string()))?;
                    *rank = mi.rank(n);
                }
                Ok(Term {
                    out: ranks[0],
                    first: ranks[1],
                    second: ranks[2],
                    coeff: C64::new(e.re, e.im),
                    conj: e.conj_u,
                })
            })
            .collect()
    }

    fn m1_terms(&self, n: usize, q: usize) -> Result<Vec<Term>> {
        match self {
            BilinearSpec::Stokes => Ok(Vec::new()),
            BilinearSpec::Lamb => {
                if q != 1 {
                    return Err(Error::InadmissibleSpec("lamb requires q = 1".into()));
                }
                // (M₁(ω,u))_k = Σ_{j≠k} ε(j,k) ω_{sort(j,k)} conj(u_j)
                let mut terms = Vec::new();
                for k in 1..=n {
                    for j in (1..=n).filter(|&j| j != k) {
                        let pair = MultiIndex(vec![j.min(k), j.max(k)]);
                        let sign = if j < k { 1.0 } else { -1.0 };
                        terms.push(Term {
                            out: k - 1,
                            first: pair.rank(n),
                            second: j - 1,
                            coeff: C64::new(sign, 0.0),
                            conj: true,
                        });
                    }
                }
                Ok(terms)
            }
            BilinearSpec::Custom { m1, .. } => Self::compile(&m1.entries, n, [q, q + 1, q]),
        }
    }

    fn m2_terms(&self, n: usize, q: usize) -> Result<Vec<Term>> {
        if q == 0 {
            return Err(Error::InadmissibleSpec("M2 needs q >= 1".into()));
        }
        match self {
            BilinearSpec::Stokes => Ok(Vec::new()),
            BilinearSpec::Lamb => {
                if q != 1 {
                    return Err(Error::InadmissibleSpec("lamb requires q = 1".into()));
                }
                Ok((0..n)
                    .map(|j| Term {
                        out: 0,
                        first: j,
                        second: j,
                        coeff: C64::new(1.0, 0.0),
                        conj: true,
                    })
                    .collect())
            }
            BilinearSpec::Custom { m2, .. } => Self::compile(&m2.entries, n, [q - 1, q, q]),
        }
    }
}

fn contract(terms: &[Term], first: &FormField, second: &FormField, out_degree: usize) -> Result<FormField> {
    let mut out = FormField::zeros(first.grid(), out_degree, Representation::Physical)?;
    for (c, dst) in out.components.iter_mut().enumerate() {
        let mine: Vec<&Term> = terms.iter().filter(|t| t.out == c).collect();
        if mine.is_empty() {
            continue;
        }
        dst.par_iter_mut().enumerate().for_each(|(i, d)| {
            let mut acc = ZERO;
            for t in &mine {
                let a = first.components[t.first][i];
                let b = second.components[t.second][i];
                let b = if t.conj { b.conj() } else { b };
                acc += t.coeff * a * b;
            }
            *d = acc;
        });
    }
    Ok(out)
}

/// `M₁(ω, u)`: (0,q+1) × (0,q) → (0,q), evaluated pointwise in physical space.
pub fn apply_m1(spec: &BilinearSpec, omega: &FormField, u: &FormField) -> Result<FormField> {
    omega.expect_repr(Representation::Physical)?;
    u.expect_repr(Representation::Physical)?;
    if *omega.grid != *u.grid {
        return Err(Error::GridMismatch);
    }
    if omega.degree != u.degree + 1 {
        return Err(Error::BidegreeMismatch {
            expected: u.degree + 1,
            found: omega.degree,
        });
    }
    let terms = spec.m1_terms(u.n(), u.degree)?;
    contract(&terms, omega, u, u.degree)
}

/// `M₂(u, w)`: (0,q) × (0,q) → (0,q−1), evaluated pointwise in physical space.
pub fn apply_m2(spec: &BilinearSpec, u: &FormField, w: &FormField) -> Result<FormField> {
    u.expect_repr(Representation::Physical)?;
    w.expect_repr(Representation::Physical)?;
    u.check_compatible(w)?;
    if u.degree == 0 {
        return Err(Error::Undefined("M2 maps into (0,q-1)-forms and needs q >= 1".into()));
    }
    let terms = spec.m2_terms(u.n(), u.degree)?;
    contract(&terms, u, w, u.degree - 1)
}
