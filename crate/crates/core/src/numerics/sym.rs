use crate::scalar::Scalar;

use super::NumericsError;

/// Dense symmetric matrix stored as its packed upper triangle.
///
/// Symmetry holds by construction: `get(i, j)` and `get(j, i)` read the same
/// slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<S> {
    dim: usize,
    upper: Vec<S>,
}

impl<S: Scalar> SymMatrix<S> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![S::zero(); dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, S::one())
    }

    pub fn scaled_identity(dim: usize, k: S) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, k);
        }
        m
    }

    pub fn from_diag(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Takes the upper triangle of a row-major dense `dim x dim` array.
    pub fn from_dense_upper(dim: usize, dense: &[S]) -> Result<Self, NumericsError> {
        if dense.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                found: dense.len(),
            });
        }
        Ok(Self::from_fn(dim, |i, j| dense[i * dim + j]))
    }

    /// `g g^T`
    pub fn outer(g: &[S]) -> Self {
        Self::from_fn(g.len(), |i, j| g[i] * g[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        r * (2 * self.dim - r + 1) / 2 + (c - r)
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.upper[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        let k = self.index(i, j);
        self.upper[k] = v;
    }

    /// `self += k * g g^T`
    pub fn add_outer(&mut self, g: &[S], k: S) {
        debug_assert_eq!(g.len(), self.dim);
        let mut idx = 0;
        for i in 0..self.dim {
            let gi = k * g[i];
            for &gj in &g[i..self.dim] {
                self.upper[idx] += gi * gj;
                idx += 1;
            }
        }
    }

    pub fn scale_in_place(&mut self, k: S) {
        for v in &mut self.upper {
            *v *= k;
        }
    }

    pub fn plus_scaled_identity(&self, k: S) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            let v = m.get(i, i);
            m.set(i, i, v + k);
        }
        m
    }

    pub fn mat_vec(&self, x: &[S]) -> Vec<S> {
        (0..self.dim)
            .map(|i| (0..self.dim).fold(S::zero(), |acc, j| acc + self.get(i, j) * x[j]))
            .collect()
    }

    /// Quadratic form `x^T M x`.
    pub fn quad_form(&self, x: &[S]) -> S {
        super::dot(x, &self.mat_vec(x))
    }

    pub fn mul(&self, other: &Self) -> Vec<S> {
        let n = self.dim;
        let mut out = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] =
                    (0..n).fold(S::zero(), |acc, k| acc + self.get(i, k) * other.get(k, j));
            }
        }
        out
    }

    pub fn trace(&self) -> S {
        (0..self.dim).fold(S::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn diag(&self) -> Vec<S> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> S {
        let mut sum = S::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.get(i, j);
                sum += if i == j { v * v } else { S::lit(2.0) * v * v };
            }
        }
        sum.sqrt()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<S> {
        let n = self.dim;
        let mut out = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}
