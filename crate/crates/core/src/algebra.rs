//! Off-diagonal decay norms of finite sections and structural checks.
//!
//! All norms are evaluated over the stored entries of an [`Embedded`] matrix,
//! using the lattice labels of its rows and columns, so a re-anchored section
//! is treated as the corresponding element of the infinite algebra.

use crate::error::{FsmError, Result};
use crate::lattice;
use crate::models::{self, block_stack, Embedded, FiniteSection, MatrixModel};
use crate::weights::WeightSpec;
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

/// Relative slack used when comparing norms that should agree exactly.
pub const NORM_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraKind {
    /// `sup |a_kl| (1 + |k - l|)^s`
    Jaffard {
        #[serde(deserialize_with = "crate::serde_num::f64_lenient")]
        s: f64,
    },
    /// `sup |a_kl| v(k - l)`
    Av { v: WeightSpec },
    /// max of the weighted row and column sums
    Av1 { v: WeightSpec },
    /// `sum_l sup_k |a_{k,k-l}| v(l)`
    Cv { v: WeightSpec },
}

impl AlgebraKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgebraKind::Jaffard { .. } => "jaffard",
            AlgebraKind::Av { .. } => "av",
            AlgebraKind::Av1 { .. } => "av1",
            AlgebraKind::Cv { .. } => "cv",
        }
    }

    /// Whether `|B^block| = sup_m |B_m|` holds for this kind.
    pub fn has_block_equivalence(&self) -> bool {
        !matches!(self, AlgebraKind::Cv { .. })
    }
}

/// Where the defining supremum or the dominant summand was found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Achieved {
    Pair {
        row: Vec<i64>,
        col: Vec<i64>,
    },
    Row(Vec<i64>),
    Column(Vec<i64>),
    Diagonal(Vec<i64>),
    /// zero matrix
    Nowhere,
}

impl fmt::Display for Achieved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pt = |p: &[i64]| {
            p.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self {
            Achieved::Pair { row, col } => write!(f, "pair ({}) ({})", pt(row), pt(col)),
            Achieved::Row(k) => write!(f, "row ({})", pt(k)),
            Achieved::Column(l) => write!(f, "column ({})", pt(l)),
            Achieved::Diagonal(m) => write!(f, "diagonal ({})", pt(m)),
            Achieved::Nowhere => write!(f, "none"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub achieved_at: Achieved,
}

impl NormReport {
    fn zero() -> Self {
        NormReport {
            value: 0.0,
            achieved_at: Achieved::Nowhere,
        }
    }
}

struct Labels {
    dim: usize,
    rows: Vec<i64>,
    cols: Vec<i64>,
}

impl Labels {
    fn of<B: Embedded + ?Sized>(b: &B) -> Self {
        Labels {
            dim: b.dim(),
            rows: b.row_points(),
            cols: b.col_points(),
        }
    }
    fn row(&self, i: usize) -> &[i64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
    fn col(&self, j: usize) -> &[i64] {
        &self.cols[j * self.dim..(j + 1) * self.dim]
    }
    fn offset(&self, i: usize, j: usize) -> Vec<i64> {
        lattice::diff(self.row(i), self.col(j))
    }
}

pub fn norm_jaffard<B: Embedded + ?Sized>(b: &B, s: f64) -> NormReport {
    norm_av(b, &WeightSpec::polynomial(s, b.dim()))
}

pub fn norm_av<B: Embedded + ?Sized>(b: &B, v: &WeightSpec) -> NormReport {
    let lab = Labels::of(b);
    let m = b.matrix();
    let mut best = NormReport::zero();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let a = m[(i, j)].norm();
            if a == 0.0 {
                continue;
            }
            let val = a * v.eval(&lab.offset(i, j));
            if val > best.value {
                best = NormReport {
                    value: val,
                    achieved_at: Achieved::Pair {
                        row: lab.row(i).to_vec(),
                        col: lab.col(j).to_vec(),
                    },
                };
            }
        }
    }
    best
}

pub fn norm_av1<B: Embedded + ?Sized>(b: &B, v: &WeightSpec) -> NormReport {
    let lab = Labels::of(b);
    let m = b.matrix();
    let mut row_sums = vec![0.0; m.nrows()];
    let mut col_sums = vec![0.0; m.ncols()];
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let a = m[(i, j)].norm();
            if a == 0.0 {
                continue;
            }
            let w = a * v.eval(&lab.offset(i, j));
            row_sums[i] += w;
            col_sums[j] += w;
        }
    }
    let mut best = NormReport::zero();
    for (i, &r) in row_sums.iter().enumerate() {
        if r > best.value {
            best = NormReport {
                value: r,
                achieved_at: Achieved::Row(lab.row(i).to_vec()),
            };
        }
    }
    for (j, &c) in col_sums.iter().enumerate() {
        if c > best.value {
            best = NormReport {
                value: c,
                achieved_at: Achieved::Column(lab.col(j).to_vec()),
            };
        }
    }
    best
}

pub fn norm_cv<B: Embedded + ?Sized>(b: &B, v: &WeightSpec) -> NormReport {
    let lab = Labels::of(b);
    let m = b.matrix();
    let mut diag_sup: HashMap<Vec<i64>, f64> = HashMap::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let a = m[(i, j)].norm();
            if a == 0.0 {
                continue;
            }
            let e = diag_sup.entry(lab.offset(i, j)).or_insert(0.0);
            *e = e.max(a);
        }
    }
    let mut terms: Vec<(Vec<i64>, f64)> = diag_sup
        .into_iter()
        .map(|(off, sup)| {
            let t = sup * v.eval(&off);
            (off, t)
        })
        .collect();
    // fixed summation order keeps the result deterministic
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    let value = terms.iter().map(|(_, t)| t).sum();
    match terms
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
    {
        Some((off, _)) => NormReport {
            value,
            achieved_at: Achieved::Diagonal(off.clone()),
        },
        None => NormReport::zero(),
    }
}

pub fn norm<B: Embedded + ?Sized>(b: &B, kind: &AlgebraKind) -> NormReport {
    match kind {
        AlgebraKind::Jaffard { s } => norm_jaffard(b, *s),
        AlgebraKind::Av { v } => norm_av(b, v),
        AlgebraKind::Av1 { v } => norm_av1(b, v),
        AlgebraKind::Cv { v } => norm_cv(b, v),
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn operator_norm_l2<B: Embedded + ?Sized>(b: &B) -> f64 {
    spectral_norm(b.matrix())
}

/// Norm of an infinite model as the supremum of its section norms over
/// `n = 1, 2, 4, .., n_max`. Section norms increase with `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelNorm {
    pub value: f64,
    pub achieved_at: Achieved,
    pub sections: Vec<(usize, f64)>,
    /// the last two section norms agree to `NORM_RTOL`
    pub stabilized: bool,
}

pub fn model_norm(a: &MatrixModel, kind: &AlgebraKind, n_max: usize) -> ModelNorm {
    let mut ns = vec![];
    let mut n = 1;
    while n < n_max {
        ns.push(n);
        n *= 2;
    }
    ns.push(n_max.max(1));
    let mut sections = Vec::new();
    let mut last = NormReport::zero();
    for &n in &ns {
        last = norm(&models::finite_section(a, n), kind);
        sections.push((n, last.value));
    }
    let stabilized = match sections.as_slice() {
        [.., (_, p), (_, q)] => (q - p).abs() <= NORM_RTOL * q.abs(),
        _ => false,
    };
    ModelNorm {
        value: last.value,
        achieved_at: last.achieved_at,
        sections,
        stabilized,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationReport {
    pub base: f64,
    pub shifted: Vec<(Vec<i64>, f64)>,
    pub max_abs_diff: f64,
    pub invariant: bool,
}

/// Compares the norm of `P_n A P_n` with that of the same block placed on
/// `j + C_n` for every shift `j`.
pub fn check_translation_invariance(
    a: &MatrixModel,
    kind: &AlgebraKind,
    shifts: &[Vec<i64>],
    n: usize,
) -> Result<TranslationReport> {
    let section = models::finite_section(a, n);
    translation_of_section(&section, kind, shifts)
}

pub fn translation_of_section(
    section: &FiniteSection,
    kind: &AlgebraKind,
    shifts: &[Vec<i64>],
) -> Result<TranslationReport> {
    if let Some(j) = shifts.iter().find(|j| j.len() != section.dim()) {
        return Err(FsmError::DimensionMismatch {
            expected: section.dim(),
            got: j.len(),
        });
    }
    let base = norm(section, kind).value;
    let shifted: Vec<(Vec<i64>, f64)> = shifts
        .par_iter()
        .map(|j| (j.clone(), norm(&section.clone().with_anchor(j), kind).value))
        .collect();
    let max_abs_diff = shifted
        .iter()
        .map(|(_, v)| (v - base).abs())
        .fold(0.0, f64::max);
    Ok(TranslationReport {
        base,
        shifted,
        max_abs_diff,
        invariant: max_abs_diff <= NORM_RTOL * base.abs().max(f64::MIN_POSITIVE),
    })
}

/// Returns `norm(b) <= norm(dominating)` after checking `|b| <= |dominating|`
/// entrywise.
pub fn check_solidity<B: Embedded + ?Sized>(
    b: &B,
    dominating: &B,
    kind: &AlgebraKind,
) -> Result<bool> {
    let (x, y) = (b.matrix(), dominating.matrix());
    if x.shape() != y.shape() {
        return Err(FsmError::DimensionMismatch {
            expected: y.len(),
            got: x.len(),
        });
    }
    if b.row_points() != dominating.row_points() || b.col_points() != dominating.col_points() {
        return Err(FsmError::invalid(
            "solidity check needs identically labelled sections",
        ));
    }
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if x[(i, j)].norm() > y[(i, j)].norm() {
                return Err(FsmError::NotDominated { row: i, col: j });
            }
        }
    }
    Ok(norm(b, kind).value <= norm(dominating, kind).value)
}

/// Dense matrix of a model over an arbitrary finite set of lattice points.
#[derive(Clone, Debug)]
pub struct Window {
    dim: usize,
    points: Vec<i64>,
    data: DMatrix<C64>,
}

impl Window {
    pub fn new(a: &MatrixModel, points: Vec<i64>) -> Self {
        let d = a.dim();
        let size = points.len() / d;
        let data = DMatrix::from_fn(size, size, |i, j| {
            a.entry(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d])
        });
        Window {
            dim: d,
            points,
            data,
        }
    }
}

impl Embedded for Window {
    fn dim(&self) -> usize {
        self.dim
    }
    fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }
    fn row_points(&self) -> Vec<i64> {
        self.points.clone()
    }
    fn col_points(&self) -> Vec<i64> {
        self.points.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockEquivalenceReport {
    /// `sup_m |B_m|`
    pub sup_norm: f64,
    /// `|B^block|`
    pub block_norm: f64,
    /// `block_norm / sup_norm` (1 for the zero stack)
    pub ratio: f64,
    pub equal: bool,
}

/// Anchors placing the blocks one after another along the first axis,
/// separated by `gap` empty sites.
pub fn spaced_anchors(blocks: &[FiniteSection], gap: usize) -> Vec<Vec<i64>> {
    let mut anchors = Vec::with_capacity(blocks.len());
    let mut pos = 0i64;
    for (m, b) in blocks.iter().enumerate() {
        if m > 0 {
            pos += (blocks[m - 1].n() + b.n() + 1 + gap) as i64;
        }
        let mut a = vec![0; b.dim()];
        a[0] = pos;
        anchors.push(a);
    }
    anchors
}

pub fn check_block_equivalence(
    blocks: &[FiniteSection],
    kind: &AlgebraKind,
) -> Result<BlockEquivalenceReport> {
    check_block_equivalence_at(blocks, &spaced_anchors(blocks, 1), kind)
}

/// Builds the block diagonal stack and compares its norm with the largest
/// block norm. The stack vanishes off the union of the cubes, so its norm is
/// computed on that union.
pub fn check_block_equivalence_at(
    blocks: &[FiniteSection],
    anchors: &[Vec<i64>],
    kind: &AlgebraKind,
) -> Result<BlockEquivalenceReport> {
    let stack = block_stack(blocks, anchors)?;
    let sup_norm = blocks
        .par_iter()
        .map(|b| norm(b, kind).value)
        .reduce(|| 0.0, f64::max);
    let mut points = Vec::new();
    for (b, a) in blocks.iter().zip(anchors) {
        points.extend(lattice::cube_points(b.n(), b.dim(), a));
    }
    let block_norm = norm(&Window::new(&stack, points), kind).value;
    let ratio = if sup_norm > 0.0 {
        block_norm / sup_norm
    } else {
        1.0
    };
    Ok(BlockEquivalenceReport {
        sup_norm,
        block_norm,
        ratio,
        equal: (block_norm - sup_norm).abs() <= NORM_RTOL * sup_norm.max(f64::MIN_POSITIVE),
    })
}

/// `|BC| / (|B| |C|)` for two sections on the same cube; values above one
/// measure the constant needed for an equivalent submultiplicative norm.
pub fn product_ratio(b: &FiniteSection, c: &FiniteSection, kind: &AlgebraKind) -> Result<f64> {
    if b.n() != c.n() || b.anchor() != c.anchor() || b.dim() != c.dim() {
        return Err(FsmError::invalid("product needs sections on the same cube"));
    }
    let prod = FiniteSection::from_matrix(b.n(), b.dim(), b.matrix() * c.matrix())?
        .with_anchor(b.anchor());
    let denom = norm(b, kind).value * norm(c, kind).value;
    Ok(if denom == 0.0 {
        0.0
    } else {
        norm(&prod, kind).value / denom
    })
}

/// Writes `kind,n,value,achieved_at` rows.
pub fn write_norm_csv<W: Write>(
    rows: &[(String, usize, NormReport)],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "kind,n,value,achieved_at")?;
    for (kind, n, r) in rows {
        writeln!(out, "{kind},{n},{},{}", r.value, r.achieved_at)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{finite_section, laurent_from_symbol, laurent_geometric};

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn tridiag() -> MatrixModel {
        laurent_from_symbol(&[(-1, re(1.0)), (0, re(2.0)), (1, re(1.0))].into())
    }

    fn single(n: usize, i: usize, j: usize, v: f64) -> FiniteSection {
        let side = 2 * n + 1;
        let mut m = DMatrix::zeros(side, side);
        m[(i, j)] = re(v);
        FiniteSection::from_matrix(n, 1, m).unwrap()
    }

    #[test]
    fn identity_norms_are_one() {
        let id = FiniteSection::identity(3, 1);
        let v = WeightSpec::subexponential(0.5, 0.5, 1);
        assert_eq!(norm_jaffard(&id, 4.0).value, 1.0);
        assert_eq!(norm_av(&id, &v).value, 1.0);
        assert_eq!(norm_av1(&id, &v).value, 1.0);
        assert_eq!(norm_cv(&id, &v).value, 1.0);
        assert!((operator_norm_l2(&id) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_entry_jaffard() {
        // a_{0,1} = 2 sits at row index 1, column index 2 of C_1
        let b = single(1, 1, 2, 2.0);
        let r = norm_jaffard(&b, 1.0);
        assert_eq!(r.value, 4.0);
        assert_eq!(
            r.achieved_at,
            Achieved::Pair {
                row: vec![0],
                col: vec![1]
            }
        );
    }

    #[test]
    fn tridiagonal_values() {
        let s2 = finite_section(&tridiag(), 2);
        assert_eq!(norm_jaffard(&s2, 2.0).value, 4.0);
        let s5 = finite_section(&tridiag(), 5);
        let v = WeightSpec::polynomial(1.0, 1);
        assert_eq!(norm_av1(&s5, &v).value, 6.0);
        assert_eq!(norm_cv(&s5, &v).value, 6.0);
    }

    #[test]
    fn ones_and_single_offsets() {
        let ones = FiniteSection::from_matrix(1, 1, DMatrix::from_element(3, 3, re(1.0))).unwrap();
        assert_eq!(norm_av1(&ones, &WeightSpec::constant(1)).value, 3.0);
        let b = single(5, 0, 5, 1.0);
        assert_eq!(norm_cv(&b, &WeightSpec::constant(1)).value, 1.0);
        let z = FiniteSection::from_matrix(2, 1, DMatrix::zeros(5, 5)).unwrap();
        for kind in kinds(1) {
            assert_eq!(norm(&z, &kind), NormReport::zero());
        }
    }

    #[test]
    fn counterexample_av_matches_scan() {
        let a = laurent_geometric(0.5).unwrap();
        let v = WeightSpec::subexponential(1.0, 0.5, 1);
        let sec = finite_section(&a, 120);
        let r = norm_av(&sec, &v);
        // independent scan of c^(m-1) e^sqrt(m)
        let (m_best, best) = (1..=200)
            .map(|m: i32| (m, 0.5f64.powi(m - 1) * (m as f64).sqrt().exp()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((r.value - best).abs() < 1e-13 * best);
        match r.achieved_at {
            Achieved::Pair { row, col } => assert_eq!(row[0] - col[0], m_best as i64),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tridiagonal_operator_norm() {
        let n = 10;
        let got = operator_norm_l2(&finite_section(&tridiag(), n));
        let want = 2.0 + 2.0 * (std::f64::consts::PI / (2.0 * n as f64 + 2.0)).cos();
        assert!((got - want).abs() < 1e-10 * want);
        let d = FiniteSection::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ])
        .unwrap();
        assert!((operator_norm_l2(&d) - 3.0).abs() < 1e-13);
    }

    fn kinds(dim: usize) -> Vec<AlgebraKind> {
        let v = WeightSpec::polynomial(1.5, dim);
        vec![
            AlgebraKind::Jaffard { s: 2.0 },
            AlgebraKind::Av { v: v.clone() },
            AlgebraKind::Av1 { v: v.clone() },
            AlgebraKind::Cv { v },
        ]
    }

    #[test]
    fn tridiagonal_translation_invariance() {
        for kind in kinds(1) {
            let r =
                check_translation_invariance(&tridiag(), &kind, &[vec![0], vec![7]], 4).unwrap();
            assert!(r.invariant, "{kind:?}");
            assert_eq!(r.max_abs_diff, 0.0);
        }
    }

    #[test]
    fn solidity_cases() {
        let a = crate::models::jaffard_synthetic(2.0, 1.0, 3, 1, false).unwrap();
        let full = finite_section(&a, 4);
        let half = FiniteSection::from_matrix(4, 1, full.matrix() * re(0.5)).unwrap();
        let flipped = FiniteSection::from_matrix(4, 1, -full.matrix()).unwrap();
        for kind in kinds(1) {
            assert!(check_solidity(&half, &full, &kind).unwrap());
            assert_eq!(norm(&flipped, &kind).value, norm(&full, &kind).value);
        }
        let double = FiniteSection::from_matrix(4, 1, full.matrix() * re(2.0)).unwrap();
        assert!(matches!(
            check_solidity(&double, &full, &kinds(1)[0]),
            Err(FsmError::NotDominated { .. })
        ));
    }

    #[test]
    fn single_block_equivalence() {
        let b = finite_section(&tridiag(), 3);
        for kind in kinds(1) {
            let r = check_block_equivalence(std::slice::from_ref(&b), &kind).unwrap();
            assert!(r.equal, "{kind:?}");
        }
    }

    #[test]
    fn cv_blocks_add_up() {
        let blocks: Vec<FiniteSection> = (0..8).map(|m| single(4, m, 0, 1.0)).collect();
        let kind = AlgebraKind::Cv {
            v: WeightSpec::constant(1),
        };
        let r = check_block_equivalence(&blocks, &kind).unwrap();
        assert_eq!(r.sup_norm, 1.0);
        assert_eq!(r.block_norm, 8.0);
        assert!(!r.equal);
        let av1 = AlgebraKind::Av1 {
            v: WeightSpec::constant(1),
        };
        assert!(check_block_equivalence(&blocks, &av1).unwrap().equal);
    }

    #[test]
    fn norm_csv_rows() {
        let mut buf = Vec::new();
        let r = norm_jaffard(&single(1, 1, 2, 2.0), 1.0);
        write_norm_csv(&[("jaffard".into(), 1, r)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kind,n,value,achieved_at\njaffard,1,4,pair (0) (1)\n"
        );
    }
}
