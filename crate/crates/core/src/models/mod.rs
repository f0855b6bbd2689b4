//! Infinite matrices over `Z^d` as entry oracles with decay envelopes.
//!
//! A [`MatrixModel`] carries a pure function `(k, l) -> a_kl` together with an
//! envelope `(C, v)` such that `|a_kl| <= C / v(k - l)` for all pairs.
//! Sections are materialized densely from the oracle.

mod build;
mod section;

pub use build::{
    block_stack, channel_matrix, channel_matrix_with_decay, jaffard_synthetic, laurent_from_rule,
    laurent_from_symbol, laurent_geometric,
};
pub use section::{Embedded, FiniteSection, RectSection};

use crate::error::{FsmError, Result};
use crate::lattice;
use crate::weights::{inverse_power_tail, SparseVector, WeightSpec};
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

pub type EntryFn = dyn Fn(&[i64], &[i64]) -> C64 + Send + Sync;

/// Certified bound `|a_kl| <= constant / weight(k - l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub constant: f64,
    pub weight: WeightSpec,
}

impl Envelope {
    pub fn new(constant: f64, weight: WeightSpec) -> Self {
        Envelope { constant, weight }
    }

    /// Upper bound for `|a_kl|` at offset `k - l`.
    pub fn bound(&self, offset: &[i64]) -> f64 {
        self.constant * (-self.weight.ln_eval(offset)).exp()
    }
}

#[derive(Clone)]
pub struct MatrixModel {
    dim: usize,
    entry: Arc<EntryFn>,
    envelope: Envelope,
    hermitian: bool,
    band_width: Option<usize>,
    label: String,
}

impl fmt::Debug for MatrixModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixModel")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("envelope", &self.envelope)
            .field("hermitian", &self.hermitian)
            .field("band_width", &self.band_width)
            .finish()
    }
}

impl MatrixModel {
    /// Wraps an arbitrary oracle. The caller is responsible for the envelope,
    /// the hermitian flag and the band width being truthful.
    pub fn new<F>(dim: usize, entry: F, envelope: Envelope) -> Self
    where
        F: Fn(&[i64], &[i64]) -> C64 + Send + Sync + 'static,
    {
        MatrixModel {
            dim,
            entry: Arc::new(entry),
            envelope,
            hermitian: false,
            band_width: None,
            label: "custom".into(),
        }
    }

    pub fn with_hermitian(mut self, hermitian: bool) -> Self {
        self.hermitian = hermitian;
        self
    }

    pub fn with_band_width(mut self, band_width: Option<usize>) -> Self {
        self.band_width = band_width;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, C64::new(1.0, 0.0))
    }

    pub fn scaled_identity(dim: usize, c: C64) -> Self {
        Self::new(
            dim,
            move |k, l| if k == l { c } else { C64::default() },
            Envelope::new(c.norm(), WeightSpec::constant(dim)),
        )
        .with_hermitian(c.im == 0.0)
        .with_band_width(Some(0))
        .with_label(if c == C64::new(1.0, 0.0) {
            "identity".to_string()
        } else {
            format!("{c} I")
        })
    }

    /// Diagonal model `a_kk = f(k)` with `|f| <= bound`.
    pub fn diagonal<F>(dim: usize, f: F, bound: f64, real: bool) -> Self
    where
        F: Fn(&[i64]) -> C64 + Send + Sync + 'static,
    {
        Self::new(
            dim,
            move |k, l| if k == l { f(k) } else { C64::default() },
            Envelope::new(bound, WeightSpec::constant(dim)),
        )
        .with_hermitian(real)
        .with_band_width(Some(0))
        .with_label("diagonal")
    }

    #[inline]
    pub fn entry(&self, k: &[i64], l: &[i64]) -> C64 {
        (self.entry)(k, l)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn band_width(&self) -> Option<usize> {
        self.band_width
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `c A`.
    pub fn scale(&self, c: C64) -> Self {
        let inner = self.entry.clone();
        MatrixModel {
            dim: self.dim,
            entry: Arc::new(move |k, l| c * inner(k, l)),
            envelope: Envelope::new(
                self.envelope.constant * c.norm(),
                self.envelope.weight.clone(),
            ),
            hermitian: self.hermitian && c.im == 0.0,
            band_width: self.band_width,
            label: format!("{c} ({})", self.label),
        }
    }

    /// `A + B`. The envelope uses the weaker of the two weights when they are
    /// comparable, and the constant weight otherwise.
    pub fn add(&self, other: &MatrixModel) -> Result<Self> {
        if self.dim != other.dim {
            return Err(FsmError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let envelope = sum_envelope(self, other);
        let (f, g) = (self.entry.clone(), other.entry.clone());
        Ok(MatrixModel {
            dim: self.dim,
            entry: Arc::new(move |k, l| f(k, l) + g(k, l)),
            envelope,
            hermitian: self.hermitian && other.hermitian,
            band_width: match (self.band_width, other.band_width) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            },
            label: format!("{} + {}", self.label, other.label),
        })
    }

    /// `A + lambda I`.
    pub fn shifted(&self, lambda: C64) -> Self {
        self.add(&Self::scaled_identity(self.dim, lambda))
            .expect("same dimension")
    }

    /// The adjoint `A*` with entries `conj(a_lk)`.
    pub fn adjoint(&self) -> Self {
        let inner = self.entry.clone();
        MatrixModel {
            dim: self.dim,
            entry: Arc::new(move |k, l| inner(l, k).conj()),
            // radial weights are even, so the envelope carries over
            envelope: self.envelope.clone(),
            hermitian: self.hermitian,
            band_width: self.band_width,
            label: format!("({})*", self.label),
        }
    }

    /// `A* A` for a banded model, evaluated exactly as a finite sum.
    pub fn gram_banded(&self) -> Result<Self> {
        let w = self
            .band_width
            .ok_or_else(|| FsmError::invalid("gram_banded needs a banded model"))?;
        let inner = self.entry.clone();
        let dim = self.dim;
        let stencil = lattice::cube_points(w, dim, &vec![0; dim]);
        let c = self.envelope.constant;
        let count = lattice::cube_len(w, dim) as f64;
        Ok(MatrixModel {
            dim,
            entry: Arc::new(move |k, l| {
                if lattice::sup_norm(&lattice::diff(k, l)) > 2 * w as u64 {
                    return C64::default();
                }
                let mut acc = C64::default();
                let mut j = vec![0i64; dim];
                for off in stencil.chunks(dim) {
                    for (c, (a, b)) in j.iter_mut().zip(k.iter().zip(off)) {
                        *c = a + b;
                    }
                    if lattice::sup_norm(&lattice::diff(&j, l)) <= w as u64 {
                        acc += inner(&j, k).conj() * inner(&j, l);
                    }
                }
                acc
            }),
            envelope: Envelope::new(count * c * c, WeightSpec::constant(dim)),
            hermitian: true,
            band_width: Some(2 * w),
            label: format!("({})* ({})", self.label, self.label),
        })
    }
}

fn weaker_weight(a: &WeightSpec, b: &WeightSpec) -> Option<WeightSpec> {
    if a == b {
        return Some(a.clone());
    }
    if a.is_constant() || b.is_constant() {
        return Some(WeightSpec::constant(a.dim));
    }
    if !(a.in_submultiplicative_range() && b.in_submultiplicative_range())
        || a.norm_kind != b.norm_kind
    {
        return None;
    }
    // a <= b pointwise when both exponential and polynomial parts are weaker
    let le =
        |x: &WeightSpec, y: &WeightSpec| x.s <= y.s && (x.a == 0.0 || (x.a <= y.a && x.b <= y.b));
    if le(a, b) {
        Some(a.clone())
    } else if le(b, a) {
        Some(b.clone())
    } else {
        None
    }
}

fn sum_envelope(x: &MatrixModel, y: &MatrixModel) -> Envelope {
    let c = x.envelope.constant + y.envelope.constant;
    // a diagonal summand does not constrain the off-diagonal decay
    if x.band_width == Some(0) && y.envelope.weight.in_submultiplicative_range() {
        return Envelope::new(c, y.envelope.weight.clone());
    }
    if y.band_width == Some(0) && x.envelope.weight.in_submultiplicative_range() {
        return Envelope::new(c, x.envelope.weight.clone());
    }
    match weaker_weight(&x.envelope.weight, &y.envelope.weight) {
        Some(w) if w.in_submultiplicative_range() || w == x.envelope.weight => Envelope::new(c, w),
        _ => Envelope::new(c, WeightSpec::constant(x.dim)),
    }
}

fn materialize(a: &MatrixModel, rows: &[i64], cols: &[i64]) -> DMatrix<C64> {
    let d = a.dim;
    let (nr, nc) = (rows.len() / d, cols.len() / d);
    let mut data = vec![C64::default(); nr * nc];
    // column-major: each chunk is one column, written by one task
    data.par_chunks_mut(nr.max(1))
        .enumerate()
        .for_each(|(j, col)| {
            let l = &cols[j * d..(j + 1) * d];
            for (i, slot) in col.iter_mut().enumerate() {
                *slot = a.entry(&rows[i * d..(i + 1) * d], l);
            }
        });
    DMatrix::from_vec(nr, nc, data)
}

/// `A_n = P_n A P_n` as a dense matrix.
pub fn finite_section(a: &MatrixModel, n: usize) -> FiniteSection {
    finite_section_at(a, n, &vec![0; a.dim])
}

/// Section over the translated cube `anchor + C_n`.
pub fn finite_section_at(a: &MatrixModel, n: usize, anchor: &[i64]) -> FiniteSection {
    let pts = lattice::cube_points(n, a.dim, anchor);
    let data = materialize(a, &pts, &pts);
    FiniteSection::from_matrix(n, a.dim, data)
        .expect("shape is consistent")
        .with_anchor(anchor)
}

/// `A_{r,n} = P_r A P_n`.
pub fn rect_section(a: &MatrixModel, r: usize, n: usize) -> RectSection {
    let origin = vec![0; a.dim];
    let rows = lattice::cube_points(r, a.dim, &origin);
    let cols = lattice::cube_points(n, a.dim, &origin);
    RectSection::from_matrix(r, n, a.dim, materialize(a, &rows, &cols))
        .expect("shape is consistent")
}

/// `Ax` restricted to `C_out` plus a bound on the discarded part.
#[derive(Clone, Debug)]
pub struct Applied {
    pub y: SparseVector,
    /// upper bound on `|(I - P_out) A x|_2`, exact for banded models
    pub truncation_bound: f64,
}

pub fn apply(a: &MatrixModel, x: &SparseVector, out_radius: usize) -> Applied {
    let d = a.dim;
    let pts = lattice::cube_points(out_radius, d, &vec![0; d]);
    let support: Vec<(Vec<i64>, C64)> = x.iter().map(|(k, v)| (k.to_vec(), v)).collect();
    let values: Vec<C64> = pts
        .par_chunks(d)
        .map(|k| support.iter().map(|(l, v)| a.entry(k, l) * v).sum())
        .collect();
    let y = SparseVector::from_dense(d, out_radius, &values);

    let truncation_bound = match a.band_width {
        // banded: the discarded part is finite, so measure it exactly
        Some(w) => {
            let mut dropped = SparseVector::zeros(d);
            let stencil = lattice::cube_points(w, d, &vec![0; d]);
            for (l, _) in &support {
                for off in stencil.chunks(d) {
                    let k: Vec<i64> = l.iter().zip(off).map(|(a, b)| a + b).collect();
                    if lattice::in_cube(&k, out_radius as i64) || dropped.get(&k) != C64::default()
                    {
                        continue;
                    }
                    let val: C64 = support.iter().map(|(l2, v)| a.entry(&k, l2) * v).sum();
                    dropped.insert(&k, val);
                }
            }
            dropped
                .iter()
                .map(|(_, v)| v.norm_sqr())
                .sum::<f64>()
                .sqrt()
        }
        None => {
            let env = &a.envelope;
            support
                .iter()
                .map(|(l, v)| {
                    let m = out_radius as i64 - lattice::sup_norm(l) as i64;
                    let tail =
                        inverse_power_tail(&env.weight, 2.0, m.max(-1)).unwrap_or(f64::INFINITY);
                    v.norm() * env.constant * tail.sqrt()
                })
                .sum()
        }
    };
    Applied {
        y,
        truncation_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn tridiag() -> MatrixModel {
        let coeffs: BTreeMap<i64, C64> = [(-1, re(1.0)), (0, re(2.0)), (1, re(1.0))].into();
        laurent_from_symbol(&coeffs)
    }

    #[test]
    fn identity_section() {
        let s = finite_section(&MatrixModel::identity(1), 1);
        assert_eq!(s.matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn tridiagonal_read_off() {
        let a = tridiag();
        assert!(a.is_hermitian());
        assert_eq!(a.band_width(), Some(1));
        let s = finite_section(&a, 1);
        let want = FiniteSection::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        assert_eq!(s, want);
    }

    #[test]
    fn identity_from_symbol() {
        let a = laurent_from_symbol(&[(0, re(1.0))].into());
        assert_eq!(finite_section(&a, 3), FiniteSection::identity(3, 1));
    }

    #[test]
    fn counterexample_sections_are_strictly_lower() {
        let a = laurent_geometric(0.5).unwrap();
        for n in [1, 2, 5] {
            let s = finite_section(&a, n);
            let m = s.matrix();
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    assert_eq!(m[(i, j)], C64::default());
                }
            }
            // first subdiagonal is h_1 = 1, then powers of c
            assert_eq!(m[(1, 0)], re(1.0));
            if n >= 1 {
                assert_eq!(m[(2, 0)], re(0.5));
            }
        }
        // the boxed (0, 0) entry is zero, (1, 0) is one
        assert_eq!(a.entry(&[0], &[0]), C64::default());
        assert_eq!(a.entry(&[1], &[0]), re(1.0));
    }

    #[test]
    fn rect_equals_square_when_r_is_n() {
        let a = jaffard_synthetic(2.5, 1.0, 9, 1, false).unwrap();
        assert_eq!(
            rect_section(&a, 4, 4).matrix(),
            finite_section(&a, 4).matrix()
        );
    }

    #[test]
    fn identity_rect_has_zero_rows() {
        let s = rect_section(&MatrixModel::identity(1), 3, 1);
        let m = s.matrix();
        assert_eq!((m.nrows(), m.ncols()), (7, 3));
        for i in 0..7 {
            for j in 0..3 {
                let want = if i == j + 2 { 1.0 } else { 0.0 };
                assert_eq!(m[(i, j)], re(want));
            }
        }
    }

    #[test]
    fn nesting_in_two_dimensions() {
        let a = jaffard_synthetic(3.0, 0.7, 4, 2, true).unwrap();
        let big = finite_section(&a, 3);
        assert_eq!(big.principal(2), finite_section(&a, 2));
    }

    #[test]
    fn apply_identity_restricts() {
        let x = SparseVector::from_entries(1, [(vec![0], re(1.0)), (vec![5], re(2.0))]);
        let out = apply(&MatrixModel::identity(1), &x, 3);
        assert_eq!(out.y, x.restrict(3));
        assert_eq!(out.truncation_bound, 2.0);
        assert_eq!(
            apply(&MatrixModel::identity(1), &x, 5).truncation_bound,
            0.0
        );
    }

    #[test]
    fn apply_bound_shrinks_for_jaffard() {
        let a = jaffard_synthetic(3.0, 1.0, 1, 1, false).unwrap();
        let x = SparseVector::unit(&[0]);
        let b20 = apply(&a, &x, 20).truncation_bound;
        let b40 = apply(&a, &x, 40).truncation_bound;
        assert!(b40 < b20 && b20 > 0.0);
        // the bound really bounds the dropped tail
        let dropped: f64 = (21..2000)
            .map(|k: i64| a.entry(&[k], &[0]).norm_sqr() + a.entry(&[-k], &[0]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(dropped <= b20);
    }

    #[test]
    fn sum_keeps_polynomial_envelope() {
        let j = jaffard_synthetic(3.0, 0.1, 2, 1, true).unwrap();
        let a = MatrixModel::identity(1).add(&j).unwrap();
        assert!(a.is_hermitian());
        assert_eq!(a.envelope().weight, WeightSpec::polynomial(3.0, 1));
        assert!((a.envelope().constant - 1.1).abs() < 1e-15);
    }

    #[test]
    fn gram_of_banded_matches_dense_product() {
        let a = laurent_geometric(0.0).unwrap().add(&tridiag()).unwrap();
        let g = a.gram_banded().unwrap();
        let n = 4;
        let wide = rect_section(&a, n + 2, n).into_matrix();
        let dense = wide.adjoint() * &wide;
        let sec = finite_section(&g, n);
        assert!((sec.matrix() - dense).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn csv_export_is_lexicographic() {
        let s = finite_section(&tridiag(), 1);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "row,col,re,im");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[2], "0,1,1,0");
    }
}
