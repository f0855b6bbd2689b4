use crate::error::{FsmError, Result};
use crate::lattice;
use crate::C64;
use nalgebra::DMatrix;
use std::io::{self, Write};

/// A finite matrix together with the lattice points labelling its rows and
/// columns, i.e. the data needed to embed it into `Z^d x Z^d`.
pub trait Embedded {
    fn dim(&self) -> usize;
    fn matrix(&self) -> &DMatrix<C64>;
    /// Row labels, flat (`dim` coordinates per row).
    fn row_points(&self) -> Vec<i64>;
    /// Column labels, flat.
    fn col_points(&self) -> Vec<i64>;
}

/// Dense `(2n+1)^d` square matrix identified with `P_n A P_n`, rows and
/// columns labelled by the lexicographic enumeration of `anchor + C_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSection {
    n: usize,
    dim: usize,
    anchor: Vec<i64>,
    data: DMatrix<C64>,
}

impl FiniteSection {
    pub fn from_matrix(n: usize, dim: usize, data: DMatrix<C64>) -> Result<Self> {
        let side = lattice::cube_len(n, dim);
        if data.nrows() != side || data.ncols() != side {
            return Err(FsmError::invalid(format!(
                "section of C_{n} in dimension {dim} must be {side}x{side}, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(FiniteSection {
            n,
            dim,
            anchor: vec![0; dim],
            data,
        })
    }

    /// Real matrix given row by row (`d = 1`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size.is_multiple_of(2) {
            return Err(FsmError::invalid(
                "a one-dimensional section has odd size 2n+1",
            ));
        }
        if rows.iter().any(|r| r.len() != size) {
            return Err(FsmError::invalid("rows of unequal length"));
        }
        let data = DMatrix::from_fn(size, size, |i, j| C64::new(rows[i][j], 0.0));
        Self::from_matrix(size / 2, 1, data)
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        let side = lattice::cube_len(n, dim);
        Self::from_matrix(n, dim, DMatrix::identity(side, side)).expect("shape is consistent")
    }

    /// Re-anchors the section at `anchor + C_n` (the `B^J` embedding).
    pub fn with_anchor(mut self, anchor: &[i64]) -> Self {
        assert_eq!(anchor.len(), self.dim, "anchor dimension mismatch");
        self.anchor = anchor.to_vec();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn anchor(&self) -> &[i64] {
        &self.anchor
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn points(&self) -> Vec<i64> {
        lattice::cube_points(self.n, self.dim, &self.anchor)
    }

    /// Entry at lattice points `(k, l)`, zero outside the cube.
    pub fn get(&self, k: &[i64], l: &[i64]) -> C64 {
        match (
            lattice::position(k, self.n, &self.anchor),
            lattice::position(l, self.n, &self.anchor),
        ) {
            (Some(i), Some(j)) => self.data[(i, j)],
            _ => C64::default(),
        }
    }

    pub fn adjoint(&self) -> Self {
        FiniteSection {
            data: self.data.adjoint(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (&self.data - self.data.adjoint())
            .iter()
            .all(|z| z.norm() <= tol * scale)
    }

    /// Restriction to the concentric cube `anchor + C_m`, `m <= n`.
    pub fn principal(&self, m: usize) -> Self {
        assert!(m <= self.n, "principal cube must be inside the section");
        let pts = lattice::cube_points(m, self.dim, &self.anchor);
        let idx: Vec<usize> = pts
            .chunks(self.dim)
            .map(|p| lattice::position(p, self.n, &self.anchor).expect("inner cube"))
            .collect();
        let data = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.data[(idx[i], idx[j])]);
        FiniteSection {
            n: m,
            dim: self.dim,
            anchor: self.anchor.clone(),
            data,
        }
    }

    /// Writes `row,col,re,im` records in lexicographic `C_n` order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_matrix_csv(&self.data, &mut out)
    }
}

pub(crate) fn write_matrix_csv<W: Write>(m: &DMatrix<C64>, out: &mut W) -> io::Result<()> {
    writeln!(out, "row,col,re,im")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            writeln!(out, "{i},{j},{},{}", z.re, z.im)?;
        }
    }
    Ok(())
}

impl Embedded for FiniteSection {
    fn dim(&self) -> usize {
        self.dim
    }
    fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }
    fn row_points(&self) -> Vec<i64> {
        self.points()
    }
    fn col_points(&self) -> Vec<i64> {
        self.points()
    }
}

/// Dense `(2r+1)^d x (2n+1)^d` matrix identified with `P_r A P_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RectSection {
    r: usize,
    n: usize,
    dim: usize,
    data: DMatrix<C64>,
}

impl RectSection {
    pub fn from_matrix(r: usize, n: usize, dim: usize, data: DMatrix<C64>) -> Result<Self> {
        let (rows, cols) = (lattice::cube_len(r, dim), lattice::cube_len(n, dim));
        if data.nrows() != rows || data.ncols() != cols {
            return Err(FsmError::invalid(format!(
                "rectangular section must be {rows}x{cols}, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(RectSection { r, n, dim, data })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_matrix_csv(&self.data, &mut out)
    }
}

impl Embedded for RectSection {
    fn dim(&self) -> usize {
        self.dim
    }
    fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }
    fn row_points(&self) -> Vec<i64> {
        lattice::cube_points(self.r, self.dim, &vec![0; self.dim])
    }
    fn col_points(&self) -> Vec<i64> {
        lattice::cube_points(self.n, self.dim, &vec![0; self.dim])
    }
}
