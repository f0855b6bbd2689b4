//! Dense solves on sections, the extensions `A_n + lambda_+ (I - P_n)` and
//! spectral bounds for hermitian models.

mod lu;

pub use lu::{LuFactor, PIVOT_RTOL};

use crate::algebra::norm_av1;
use crate::error::{FsmError, Result};
use crate::lattice;
use crate::models::{finite_section, Embedded, FiniteSection, MatrixModel};
use crate::weights::{inverse_power_tail, SparseVector, WeightSpec};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Tolerance on `max |B B^-1 - I|` accepted by [`section_inverse`].
pub const INVERSE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSolve {
    pub x: Vec<C64>,
    /// `|B x - rhs|_2`
    pub residual: f64,
}

pub(crate) fn l2(v: &[C64]) -> f64 {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    max * v
        .iter()
        .map(|z| (z.norm() / max).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn residual(m: &DMatrix<C64>, x: &[C64], rhs: &[C64]) -> f64 {
    let r = m * DVector::from_column_slice(x) - DVector::from_column_slice(rhs);
    l2(r.as_slice())
}

pub fn solve_matrix(m: &DMatrix<C64>, rhs: &[C64]) -> Result<DenseSolve> {
    if rhs.len() != m.nrows() {
        return Err(FsmError::DimensionMismatch {
            expected: m.nrows(),
            got: rhs.len(),
        });
    }
    let x = LuFactor::new(m)?.solve(rhs);
    let residual = residual(m, &x, rhs);
    Ok(DenseSolve { x, residual })
}

/// Solves `B x = rhs` by row-pivoted elimination; `rhs` is enumerated like
/// the section's cube.
pub fn solve_dense(b: &FiniteSection, rhs: &[C64]) -> Result<DenseSolve> {
    solve_matrix(b.matrix(), rhs)
}

/// Dense inverse with the check `max |B B^-1 - I| <= INVERSE_TOL`.
pub fn section_inverse(b: &FiniteSection) -> Result<FiniteSection> {
    let inv = LuFactor::new(b.matrix())?.inverse();
    let size = b.size();
    let check = b.matrix() * &inv - DMatrix::<C64>::identity(size, size);
    let residual = check.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > INVERSE_TOL {
        return Err(FsmError::InaccurateInverse { residual });
    }
    Ok(FiniteSection::from_matrix(b.n(), b.dim(), inv)?.with_anchor(b.anchor()))
}

/// `A_n + lambda_+ (I - P_n)` with a factorized base.
#[derive(Clone, Debug)]
pub struct ExtensionHandle {
    base: FiniteSection,
    lambda_plus: f64,
    factor: LuFactor,
}

impl ExtensionHandle {
    pub fn new(base: FiniteSection, lambda_plus: f64) -> Result<Self> {
        if !(lambda_plus > 0.0) {
            return Err(FsmError::invalid(format!(
                "lambda_plus = {lambda_plus} must be positive"
            )));
        }
        let factor = LuFactor::new(base.matrix())?;
        Ok(ExtensionHandle {
            base,
            lambda_plus,
            factor,
        })
    }

    pub fn base(&self) -> &FiniteSection {
        &self.base
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    /// The extension as an (infinite) model.
    pub fn to_model(&self) -> MatrixModel {
        let base = self.base.clone();
        let lp = self.lambda_plus;
        let n = base.n() as u64;
        let anchor = base.anchor().to_vec();
        let dim = base.dim();
        let constant = base.max_abs().max(lp);
        MatrixModel::new(
            dim,
            move |k, l| {
                let inside = |p: &[i64]| lattice::sup_norm(&lattice::diff(p, &anchor)) <= n;
                match (inside(k), inside(l)) {
                    (true, true) => base.get(k, l),
                    (false, false) if k == l => C64::new(lp, 0.0),
                    _ => C64::default(),
                }
            },
            crate::models::Envelope::new(constant, WeightSpec::constant(dim)),
        )
        .with_band_width(Some(2 * self.base.n()))
        .with_label("extension")
    }
}

/// `A_n^-1 P_n y + lambda_+^-1 (I - P_n) y`.
pub fn extension_inverse_apply(h: &ExtensionHandle, y: &SparseVector) -> SparseVector {
    let base = &h.base;
    let pts = base.points();
    let d = base.dim();
    let rhs: Vec<C64> = pts.chunks(d).map(|k| y.get(k)).collect();
    let inner = h.factor.solve(&rhs);
    let mut out = SparseVector::zeros(d);
    for (k, v) in pts.chunks(d).zip(inner) {
        out.insert(k, v);
    }
    let inv = 1.0 / h.lambda_plus;
    for (k, v) in y.iter() {
        if lattice::position(k, base.n(), base.anchor()).is_none() {
            out.insert(k, v * inv);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    /// extreme eigenvalues of the probe section
    #[default]
    EigOfLargestSection,
    /// Gershgorin lower bound and Schur upper bound on the probe section
    SchurBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub method: SpectralMethod,
    pub n_probe: usize,
    /// widening applied on both sides for coupling not seen by the probe
    pub margin: f64,
}

impl SpectralBounds {
    pub fn is_positive(&self) -> bool {
        self.lambda_minus > 0.0
    }
}

/// Eigenvalues of a hermitian matrix in increasing order.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `C_env sum_{j not in C_2n} v(j)^-1`: a Schur bound for the part of the
/// off-diagonal decay that no pair inside `C_n` can see.
pub fn envelope_margin(a: &MatrixModel, n_probe: usize) -> f64 {
    let reach = 2 * n_probe;
    if a.band_width().is_some_and(|w| w <= reach) {
        return 0.0;
    }
    let env = a.envelope();
    match inverse_power_tail(&env.weight, 1.0, reach as i64) {
        Ok(t) => env.constant * t,
        Err(_) => f64::INFINITY,
    }
}

pub fn estimate_spectral_bounds(a: &MatrixModel, n_probe: usize) -> Result<SpectralBounds> {
    estimate_spectral_bounds_with(a, n_probe, SpectralMethod::EigOfLargestSection)
}

pub fn estimate_spectral_bounds_with(
    a: &MatrixModel,
    n_probe: usize,
    method: SpectralMethod,
) -> Result<SpectralBounds> {
    if !a.is_hermitian() {
        return Err(FsmError::NotHermitian);
    }
    let probe = finite_section(a, n_probe);
    let margin = envelope_margin(a, n_probe);
    let (lo, hi) = match method {
        SpectralMethod::EigOfLargestSection => {
            let ev = hermitian_eigenvalues(probe.matrix());
            (ev[0], ev[ev.len() - 1])
        }
        SpectralMethod::SchurBound => {
            let m = probe.matrix();
            let gersh = (0..m.nrows())
                .map(|i| {
                    let off: f64 = (0..m.ncols())
                        .filter(|&j| j != i)
                        .map(|j| m[(i, j)].norm())
                        .sum();
                    m[(i, i)].re - off
                })
                .fold(f64::INFINITY, f64::min);
            (
                gersh,
                norm_av1(&probe, &WeightSpec::constant(a.dim())).value,
            )
        }
    };
    Ok(SpectralBounds {
        lambda_minus: lo - margin,
        lambda_plus: hi + margin,
        method,
        n_probe,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{jaffard_synthetic, laurent_geometric};

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn two_by_two() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[re(2.0), re(1.0), re(1.0), re(2.0)])
    }

    #[test]
    fn identity_solve() {
        let id = FiniteSection::identity(2, 1);
        let mut rhs = vec![C64::default(); 5];
        rhs[2] = re(1.0);
        let s = solve_dense(&id, &rhs).unwrap();
        assert_eq!(s.x, rhs);
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn small_system() {
        let s = solve_matrix(&two_by_two(), &[re(3.0), re(3.0)]).unwrap();
        assert!((s.x[0] - re(1.0)).norm() < 1e-15 && (s.x[1] - re(1.0)).norm() < 1e-15);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn counterexample_sections_are_singular() {
        let a = laurent_geometric(0.5).unwrap();
        for n in [0, 1, 4, 9] {
            let sec = finite_section(&a, n);
            let rhs = vec![re(1.0); sec.size()];
            assert!(matches!(
                solve_dense(&sec, &rhs),
                Err(FsmError::SingularSection { .. })
            ));
        }
    }

    #[test]
    fn inverses() {
        let id = FiniteSection::identity(1, 2);
        assert_eq!(section_inverse(&id).unwrap(), id);
        // an even-sized matrix is not a cube section
        let inv = LuFactor::new(&two_by_two()).unwrap().inverse();
        let adj = DMatrix::from_row_slice(2, 2, &[re(2.0), re(-1.0), re(-1.0), re(2.0)]) / re(3.0);
        assert!((inv - adj).iter().all(|z| z.norm() < 1e-15));
        let diag = FiniteSection::from_rows(&[
            vec![2.0, 0.0, 0.0],
            vec![0.0, 4.0, 0.0],
            vec![0.0, 0.0, 8.0],
        ])
        .unwrap();
        let want = FiniteSection::from_rows(&[
            vec![0.5, 0.0, 0.0],
            vec![0.0, 0.25, 0.0],
            vec![0.0, 0.0, 0.125],
        ])
        .unwrap();
        assert_eq!(section_inverse(&diag).unwrap(), want);
    }

    #[test]
    fn extension_cases() {
        let id = ExtensionHandle::new(FiniteSection::identity(1, 1), 1.0).unwrap();
        let y = SparseVector::from_entries(1, [(vec![0], re(1.0)), (vec![7], re(-2.0))]);
        assert_eq!(extension_inverse_apply(&id, &y), y);

        let two = FiniteSection::from_matrix(1, 1, DMatrix::identity(3, 3) * re(2.0)).unwrap();
        let h = ExtensionHandle::new(two, 2.0).unwrap();
        let y = SparseVector::from_entries(1, [(vec![0], re(1.0)), (vec![5], re(1.0))]);
        let want = SparseVector::from_entries(1, [(vec![0], re(0.5)), (vec![5], re(0.5))]);
        assert_eq!(extension_inverse_apply(&h, &y), want);

        let outside = SparseVector::from_entries(1, [(vec![4], re(3.0))]);
        assert_eq!(
            extension_inverse_apply(&h, &outside),
            outside.scaled(re(0.5))
        );
    }

    #[test]
    fn extension_matches_dense_inverse_on_larger_cube() {
        let a = jaffard_synthetic(3.0, 0.2, 11, 1, true)
            .unwrap()
            .shifted(re(1.0));
        let h = ExtensionHandle::new(finite_section(&a, 3), 1.7).unwrap();
        let big = finite_section(&h.to_model(), 7);
        let y = SparseVector::from_fn(1, 7, |k| {
            C64::new(1.0 / (1.0 + k[0].abs() as f64), k[0] as f64 * 0.1)
        });
        let dense = solve_dense(&big, &y.to_dense(7)).unwrap();
        let got = extension_inverse_apply(&h, &y).to_dense(7);
        let err = dense
            .x
            .iter()
            .zip(&got)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn spectral_bounds_examples() {
        let two = MatrixModel::scaled_identity(1, re(2.0));
        let b = estimate_spectral_bounds(&two, 8).unwrap();
        assert!((b.lambda_minus - 2.0).abs() < 1e-13 && (b.lambda_plus - 2.0).abs() < 1e-13);

        let alt = MatrixModel::diagonal(
            1,
            |k| re(if k[0].rem_euclid(2) == 0 { 1.0 } else { 3.0 }),
            3.0,
            true,
        );
        let b = estimate_spectral_bounds(&alt, 4).unwrap();
        assert!((b.lambda_minus - 1.0).abs() < 1e-13 && (b.lambda_plus - 3.0).abs() < 1e-13);

        let c = laurent_geometric(0.5).unwrap();
        assert_eq!(
            estimate_spectral_bounds(&c, 4).unwrap_err(),
            FsmError::NotHermitian
        );
    }

    #[test]
    fn perturbed_identity_is_positive() {
        let a = jaffard_synthetic(3.0, 0.1, 1, 1, true)
            .unwrap()
            .shifted(re(1.0));
        // Gershgorin: 1 - 0.1 - 2 * 0.1 * sum_{m >= 1} (1 + m)^-3
        let zeta3 = 1.202_056_903_159_594_2;
        let oracle = 1.0 - 0.1 - 0.2 * (zeta3 - 1.0);
        for method in [
            SpectralMethod::EigOfLargestSection,
            SpectralMethod::SchurBound,
        ] {
            let b = estimate_spectral_bounds_with(&a, 32, method).unwrap();
            assert!(b.margin > 0.0 && b.margin < 1e-3);
            assert!(
                b.lambda_minus + b.margin >= oracle - 1e-12,
                "{method:?}: {b:?}"
            );
            assert!(b.lambda_minus > 0.0);
        }
    }
}
