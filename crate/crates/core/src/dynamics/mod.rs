//! The constrained evolution `∂_t u + μΔu + P𝒩u = Pf`, its linearization, and
//! checks on the nonlinearity.

mod config;
mod forcing;
mod stepper;
mod trajectory;

pub use config::{CflMode, SimConfig};
pub use forcing::{Forcing, ForcingSpec};
pub use stepper::{simulate, simulate_with_forcing, solve_linearized};
pub use trajectory::{StepDiagnostics, Trajectory};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dolbeault::{constraint_residual, dbar_fourier, leray_fourier};
use crate::error::{Error, Result};
use crate::forms::{apply_m1, apply_m2, l2_inner, BilinearSpec, FormField};
use crate::initial::random_spectrum;
use crate::norms::sobolev_hs;
use crate::spectral::{Representation, SpectralGrid, C64};

/// A field together with the physical-space data the bilinear maps consume.
pub(crate) struct Prepared {
    fourier: FormField,
    physical: FormField,
    dbar_physical: Option<FormField>,
}

impl Prepared {
    pub(crate) fn new(u: &FormField) -> Self {
        let fourier = u.to_fourier();
        let physical = fourier.to_physical();
        let dbar_physical = (u.degree() < u.n()).then(|| dbar_fourier(&fourier).into_physical());
        Self {
            fourier,
            physical,
            dbar_physical,
        }
    }
}

/// `D M₁(∂̄a, b) + ∂̄ D M₂(a, b)` in Fourier representation, `D` the dealiasing filter.
fn pair_term(spec: &BilinearSpec, a: &Prepared, b: &Prepared) -> Result<FormField> {
    let mut out = a.fourier.zeros_like();
    if let Some(omega) = &a.dbar_physical {
        let mut m1 = apply_m1(spec, omega, &b.physical)?.into_fourier();
        m1.dealias_in_place();
        out.axpy(C64::new(1.0, 0.0), &m1)?;
    }
    if a.fourier.degree() >= 1 {
        let mut m2 = apply_m2(spec, &a.physical, &b.physical)?.into_fourier();
        m2.dealias_in_place();
        out.axpy(C64::new(1.0, 0.0), &dbar_fourier(&m2))?;
    }
    Ok(out)
}

pub(crate) fn nonlinearity_prepared(spec: &BilinearSpec, u: &Prepared) -> Result<FormField> {
    if spec.is_stokes() {
        return Ok(u.fourier.zeros_like());
    }
    pair_term(spec, u, u)
}

pub(crate) fn linearized_prepared(spec: &BilinearSpec, w: &Prepared, u: &Prepared) -> Result<FormField> {
    if spec.is_stokes() {
        return Ok(u.fourier.zeros_like());
    }
    let mut out = pair_term(spec, w, u)?;
    out.axpy(C64::new(1.0, 0.0), &pair_term(spec, u, w)?)?;
    Ok(out)
}

/// `𝒩u = M₁(∂̄u, u) + ∂̄M₂(u, u)`, products formed on the grid and dealiased.
/// The result has the representation of `u`.
pub fn nonlinearity(u: &FormField, spec: &BilinearSpec) -> Result<FormField> {
    spec.validate(u.n(), u.degree())?;
    Ok(nonlinearity_prepared(spec, &Prepared::new(u))?.into_repr(u.repr()))
}

/// The symmetric form `𝐁(w,u)` with `𝒩(w+u) = 𝒩w + 𝐁(w,u) + 𝒩u`.
pub fn linearized_b(w: &FormField, u: &FormField, spec: &BilinearSpec) -> Result<FormField> {
    w.check_compatible(u)?;
    spec.validate(u.n(), u.degree())?;
    Ok(linearized_prepared(spec, &Prepared::new(w), &Prepared::new(u))?.into_repr(u.repr()))
}

/// Relative constraint residual above which a velocity is rejected.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;

pub(crate) fn check_constraint(u: &FormField) -> Result<()> {
    let norm = u.norm();
    if norm == 0.0 {
        return Ok(());
    }
    let residual = constraint_residual(u) / norm;
    if residual > CONSTRAINT_TOLERANCE {
        return Err(Error::Constraint { residual });
    }
    Ok(())
}

/// `P(f − 𝒩u)`, the velocity tendency apart from diffusion.
pub fn projected_rhs(u: &FormField, f: Option<&FormField>, spec: &BilinearSpec) -> Result<FormField> {
    check_constraint(u)?;
    spec.validate(u.n(), u.degree())?;
    let mut g = nonlinearity_prepared(spec, &Prepared::new(u))?;
    g.scale_in_place(C64::new(-1.0, 0.0));
    if let Some(f) = f {
        g.axpy(C64::new(1.0, 0.0), &f.to_fourier())?;
    }
    Ok(leray_fourier(&g).into_repr(u.repr()))
}

/// `‖𝒩(w+εv) − 𝒩w − ε𝐁(w,v)‖_{L²}`; equal to `ε²‖𝒩v‖` for a quadratic `𝒩`.
pub fn frechet_residual(w: &FormField, v: &FormField, eps: f64, spec: &BilinearSpec) -> Result<f64> {
    w.check_compatible(v)?;
    let eps_c = C64::new(eps, 0.0);
    let mut shifted = w.clone();
    shifted.axpy(eps_c, v)?;
    let mut r = nonlinearity(&shifted, spec)?;
    r.axpy(C64::new(-1.0, 0.0), &nonlinearity(w, spec)?)?;
    r.axpy(-eps_c, &linearized_b(w, v, spec)?)?;
    Ok(r.norm())
}

/// Outcome of the orthogonality check `(M₁(∂̄w, v), v) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Key1Report {
    pub trials: usize,
    /// Largest `|(M₁(∂̄w, v), v)|`.
    pub max_pairing: f64,
    /// Largest `|(M₁(∂̄w, v), v)| / (‖∂̄w‖_{L∞} ‖v‖²)`.
    pub max_normalized: f64,
    pub pass: bool,
}

/// Normalized pairing accepted by [`verify_key1`].
pub const KEY1_TOLERANCE: f64 = 1e-10;

/// Draws `trials` random band-limited `w` and solenoidal `v` and evaluates the
/// pairing `(M₁(∂̄w, v), v)`.
pub fn verify_key1(
    spec: &BilinearSpec,
    grid: &Arc<SpectralGrid>,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<Key1Report> {
    if trials == 0 {
        return Err(Error::Parameter("verify_key1 needs at least one trial".into()));
    }
    spec.validate(grid.n(), q)?;
    if q >= grid.n() {
        return Err(Error::Undefined(format!("M1 on (0,{q})-forms in dimension {}", grid.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_pairing = 0.0f64;
    let mut max_normalized = 0.0f64;
    for _ in 0..trials {
        let w = random_spectrum(grid, q, 1.0, &mut rng)?;
        let v = leray_fourier(&random_spectrum(grid, q, 1.0, &mut rng)?);
        let omega = dbar_fourier(&w).into_physical();
        let vp = v.to_physical();
        let m1 = apply_m1(spec, &omega, &vp)?;
        let pairing = l2_inner(&m1, &vp)?.norm();
        let scale = omega.max_abs() * vp.norm_sqr();
        max_pairing = max_pairing.max(pairing);
        if scale > 0.0 {
            max_normalized = max_normalized.max(pairing / scale);
        }
    }
    Ok(Key1Report {
        trials,
        max_pairing,
        max_normalized,
        pass: max_normalized < KEY1_TOLERANCE,
    })
}

/// Largest `‖𝐁(w,u)‖_{L²} / (‖w‖_{H²} ‖u‖_{H²})` over `pairs` random smooth pairs.
pub fn continuity_ratio(
    spec: &BilinearSpec,
    grid: &Arc<SpectralGrid>,
    q: usize,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate(grid.n(), q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let w = random_spectrum(grid, q, 2.0, &mut rng)?;
        let u = random_spectrum(grid, q, 2.0, &mut rng)?;
        let b = linearized_b(&w, &u, spec)?;
        let denom = sobolev_hs(&w, 2)? * sobolev_hs(&u, 2)?;
        if denom > 0.0 {
            worst = worst.max(b.norm() / denom);
        }
    }
    Ok(worst)
}

pub(crate) fn zero_form(grid: &Arc<SpectralGrid>, q: usize) -> FormField {
    FormField::zeros(grid, q, Representation::Fourier).expect("degree checked by config")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dolbeault::{dbar, leray_project};
    use crate::forms::{TensorEntry, TensorSpec};
    use crate::initial::random_form;

    fn grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(2, 8).unwrap()
    }

    #[test]
    fn stokes_nonlinearity_vanishes() {
        let g = grid();
        let u = random_form(&g, 1, 1.0, 1).unwrap();
        assert_eq!(nonlinearity(&u, &BilinearSpec::Stokes).unwrap().norm(), 0.0);
    }

    #[test]
    fn lamb_of_constant_form_vanishes() {
        let g = grid();
        let u = FormField::from_fn(&g, 1, |k, _| C64::new(1.0 + k as f64, -0.5)).unwrap();
        assert!(nonlinearity(&u, &BilinearSpec::Lamb).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn lamb_single_mode_hand_oracle() {
        // u = e^{i x₂} dz̄₁: ∂̄u = −(i/2)e^{ix₂} dz̄₁∧dz̄₂ and |u|² = 1, so
        // 𝒩u has the single component (k = 2, j = 1): ε(1,2) ω₁₂ conj(u₁) = −i/2.
        let g = grid();
        let u = FormField::from_fn(&g, 1, |k, x| if k == 0 { C64::new(0.0, x[1]).exp() } else { C64::new(0.0, 0.0) })
            .unwrap();
        let nu = nonlinearity(&u, &BilinearSpec::Lamb).unwrap();
        assert_eq!(nu.repr(), Representation::Physical);
        for i in 0..g.len() {
            assert!(nu.component(0)[i].norm() < 1e-13);
            assert!((nu.component(1)[i] - C64::new(0.0, -0.5)).norm() < 1e-13);
        }
    }

    #[test]
    fn quadratic_expansion_identity() {
        let g = grid();
        let w = random_form(&g, 1, 1.0, 2).unwrap();
        let v = random_form(&g, 1, 1.0, 3).unwrap();
        let spec = BilinearSpec::Lamb;
        let lhs = nonlinearity(&w.add(&v).unwrap(), &spec)
            .unwrap()
            .sub(&nonlinearity(&w, &spec).unwrap())
            .unwrap()
            .sub(&nonlinearity(&v, &spec).unwrap())
            .unwrap();
        let b = linearized_b(&w, &v, &spec).unwrap();
        let scale = nonlinearity(&w.add(&v).unwrap(), &spec).unwrap().norm();
        assert!(lhs.sub(&b).unwrap().norm() < 1e-12 * scale);

        let buu = linearized_b(&w, &w, &spec).unwrap();
        let two_n = nonlinearity(&w, &spec).unwrap().scale(C64::new(2.0, 0.0));
        assert_eq!(buu.max_abs_diff(&two_n).unwrap(), 0.0);

        let zero = w.zeros_like();
        assert_eq!(linearized_b(&w, &zero, &spec).unwrap().norm(), 0.0);
    }

    #[test]
    fn frechet_residual_scales_quadratically() {
        let g = grid();
        let w = random_form(&g, 1, 1.0, 4).unwrap();
        let v = random_form(&g, 1, 1.0, 5).unwrap();
        let spec = BilinearSpec::Lamb;
        assert!(frechet_residual(&w, &v, 0.0, &spec).unwrap() == 0.0);
        assert_eq!(frechet_residual(&w, &v, 0.1, &BilinearSpec::Stokes).unwrap(), 0.0);
        let nv = nonlinearity(&v, &spec).unwrap().norm();
        for eps in [1e-1, 1e-2] {
            let r = frechet_residual(&w, &v, eps, &spec).unwrap() / (eps * eps);
            assert!((r - nv).abs() < 1e-10 * nv, "eps {eps}: {r} vs {nv}");
        }
    }

    #[test]
    fn projected_rhs_examples() {
        let g = grid();
        let u = leray_project(&random_form(&g, 1, 1.0, 6).unwrap());
        assert_eq!(projected_rhs(&u, None, &BilinearSpec::Stokes).unwrap().norm(), 0.0);
        let f = leray_project(&random_form(&g, 1, 1.0, 7).unwrap());
        let r = projected_rhs(&u, Some(&f), &BilinearSpec::Stokes).unwrap();
        assert!(r.sub(&f).unwrap().norm() < 1e-13 * f.norm());
        let exact = dbar(&random_form(&g, 0, 1.0, 8).unwrap()).unwrap();
        let r = projected_rhs(&u, Some(&exact), &BilinearSpec::Stokes).unwrap();
        assert!(r.norm() < 1e-13 * exact.norm());
        let raw = random_form(&g, 1, 1.0, 9).unwrap();
        assert!(matches!(
            projected_rhs(&raw, None, &BilinearSpec::Stokes),
            Err(Error::Constraint { .. })
        ));
    }

    #[test]
    fn key1_holds_for_stokes_and_lamb() {
        let g = grid();
        let stokes = verify_key1(&BilinearSpec::Stokes, &g, 1, 3, 0).unwrap();
        assert_eq!(stokes.max_pairing, 0.0);
        assert!(stokes.pass);
        let lamb = verify_key1(&BilinearSpec::Lamb, &g, 1, 10, 1).unwrap();
        assert!(lamb.pass);
        assert!(lamb.max_normalized < 1e-12);
    }

    #[test]
    fn key1_fails_for_non_antisymmetric_tensor() {
        let g = grid();
        let entry = |k: usize| TensorEntry {
            k: vec![k],
            a: vec![1, 2],
            b: vec![k],
            re: 1.0,
            im: 0.0,
            conj_u: false,
        };
        let spec = BilinearSpec::Custom {
            m1: TensorSpec {
                entries: vec![entry(1), entry(2)],
            },
            m2: TensorSpec::default(),
        };
        let report = verify_key1(&spec, &g, 1, 5, 2).unwrap();
        assert!(!report.pass);
        assert!(report.max_normalized > 1e-3);
    }

    #[test]
    fn continuity_ratio_is_bounded() {
        let g = grid();
        let ratio = continuity_ratio(&BilinearSpec::Lamb, &g, 1, 20, 3).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
    }
}
