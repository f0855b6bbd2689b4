use crate::lattice;
use crate::C64;
use std::collections::BTreeMap;

/// Finitely supported sequence on `Z^d`.
///
/// Stored indices always lie in the cube `C_radius` reported by
/// [`SparseVector::bounding_radius`]; explicit zeros are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: BTreeMap<Vec<i64>, C64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Unit vector `e_k`.
    pub fn unit(k: &[i64]) -> Self {
        let mut v = Self::zeros(k.len());
        v.insert(k, C64::new(1.0, 0.0));
        v
    }

    pub fn from_entries<I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (Vec<i64>, C64)>,
    {
        let mut v = Self::zeros(dim);
        for (k, x) in entries {
            v.insert(&k, x);
        }
        v
    }

    /// Samples `f` on `C_n`.
    pub fn from_fn(dim: usize, n: usize, f: impl Fn(&[i64]) -> C64) -> Self {
        let origin = vec![0i64; dim];
        let pts = lattice::cube_points(n, dim, &origin);
        Self::from_entries(dim, pts.chunks(dim).map(|k| (k.to_vec(), f(k))))
    }

    /// Reads a dense vector enumerated lexicographically over `C_n`.
    pub fn from_dense(dim: usize, n: usize, data: &[C64]) -> Self {
        let origin = vec![0i64; dim];
        let pts = lattice::cube_points(n, dim, &origin);
        assert_eq!(pts.len() / dim, data.len(), "dense data does not match C_n");
        Self::from_entries(
            dim,
            pts.chunks(dim).zip(data).map(|(k, &x)| (k.to_vec(), x)),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sets `x_k`; storing zero removes the entry.
    pub fn insert(&mut self, k: &[i64], value: C64) {
        assert_eq!(k.len(), self.dim, "index dimension mismatch");
        if value == C64::default() {
            self.entries.remove(k);
        } else {
            self.entries.insert(k.to_vec(), value);
        }
    }

    pub fn get(&self, k: &[i64]) -> C64 {
        self.entries.get(k).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], C64)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|v| *v == C64::default())
    }

    /// Smallest `n` with the support inside `C_n` (`0` when empty).
    pub fn bounding_radius(&self) -> usize {
        self.entries
            .keys()
            .map(|k| lattice::sup_norm(k))
            .max()
            .unwrap_or(0) as usize
    }

    /// `P_n x`
    pub fn restrict(&self, n: usize) -> Self {
        SparseVector {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| lattice::sup_norm(k) <= n as u64)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// `(I - P_n) x`
    pub fn tail(&self, n: usize) -> Self {
        SparseVector {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| lattice::sup_norm(k) > n as u64)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Dense values over `C_n` in lexicographic order; entries outside are dropped.
    pub fn to_dense(&self, n: usize) -> Vec<C64> {
        let origin = vec![0i64; self.dim];
        lattice::cube_points(n, self.dim, &origin)
            .chunks(self.dim)
            .map(|k| self.get(k))
            .collect()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        SparseVector {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .filter(|(_, v)| *v != C64::default())
                .collect(),
        }
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: C64, other: &SparseVector) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut out = self.clone();
        for (k, v) in other.iter() {
            let sum = out.get(k) + factor * v;
            out.insert(k, sum);
        }
        out
    }

    pub fn sub(&self, other: &SparseVector) -> Self {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// Largest `|x_k - y_k|`.
    pub fn max_abs_diff(&self, other: &SparseVector) -> f64 {
        self.sub(other)
            .iter()
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }
}
