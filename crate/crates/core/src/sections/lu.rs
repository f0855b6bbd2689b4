//! Dense LU factorization with partial (row) pivoting.

use crate::error::{FsmError, Result};
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Pivots at or below `PIVOT_RTOL * max|entry|` declare the matrix singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Below this size the trailing update runs on one thread.
const PAR_MIN: usize = 96;

/// `P M = L U` with unit lower `L` stored below the diagonal of `lu`.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: DMatrix<C64>,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(m: &DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(FsmError::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let threshold = PIVOT_RTOL * scale;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, x| if x.1 > best.1 { x } else { best });
            if pivot <= threshold {
                return Err(FsmError::SingularSection {
                    size: n,
                    step: k,
                    pivot,
                    threshold,
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let inv = lu[(k, k)].inv();
            for i in k + 1..n {
                lu[(i, k)] *= inv;
            }
            // column-major storage: column j occupies data[j*n..(j+1)*n]
            let (left, right) = lu.as_mut_slice().split_at_mut((k + 1) * n);
            let lcol = &left[k * n..(k + 1) * n];
            let update = |col: &mut [C64]| {
                let ukj = col[k];
                if ukj != C64::default() {
                    for i in k + 1..n {
                        col[i] -= lcol[i] * ukj;
                    }
                }
            };
            if n - k > PAR_MIN {
                right.par_chunks_mut(n).for_each(update);
            } else {
                right.chunks_mut(n).for_each(update);
            }
        }
        Ok(LuFactor { lu, perm })
    }

    pub fn size(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let n = self.size();
        assert_eq!(rhs.len(), n, "right-hand side length mismatch");
        let mut x: Vec<C64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != C64::default() {
                for i in j + 1..n {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            if xj != C64::default() {
                for i in 0..j {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        x
    }

    /// Solves for every column of `rhs`, in parallel.
    pub fn solve_matrix(&self, rhs: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.size();
        let cols: Vec<Vec<C64>> = (0..rhs.ncols())
            .into_par_iter()
            .map(|j| self.solve(rhs.column(j).as_slice()))
            .collect();
        DMatrix::from_fn(n, rhs.ncols(), |i, j| cols[j][i])
    }

    pub fn inverse(&self) -> DMatrix<C64> {
        let n = self.size();
        self.solve_matrix(&DMatrix::identity(n, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[re(2.0), re(1.0), re(1.0), re(2.0)]);
        let x = LuFactor::new(&m).unwrap().solve(&[re(3.0), re(3.0)]);
        assert!((x[0] - re(1.0)).norm() < 1e-15 && (x[1] - re(1.0)).norm() < 1e-15);
    }

    #[test]
    fn needs_pivoting() {
        let m = DMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]);
        let x = LuFactor::new(&m).unwrap().solve(&[re(2.0), re(5.0)]);
        assert_eq!(x, vec![re(5.0), re(2.0)]);
    }

    #[test]
    fn singular_is_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[re(1.0), re(2.0), re(2.0), re(4.0)]);
        assert!(matches!(
            LuFactor::new(&m),
            Err(FsmError::SingularSection { step: 1, .. })
        ));
        assert!(matches!(
            LuFactor::new(&DMatrix::zeros(3, 3)),
            Err(FsmError::SingularSection { step: 0, .. })
        ));
    }

    #[test]
    fn random_complex_against_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 5, 40, 130] {
            let m = DMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let x: Vec<C64> = (0..n).map(|_| C64::new(rng.gen(), rng.gen())).collect();
            let b = &m * nalgebra::DVector::from_column_slice(&x);
            let got = LuFactor::new(&m).unwrap().solve(b.as_slice());
            let err = got
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "n = {n}: {err}");
        }
    }
}
