//! Small dense square matrices for the s- and u-blocks.
//!
//! Blocks are tiny (a handful of rows), so everything here is the textbook
//! algorithm. Spectral quantities are only needed for diagnostics and are
//! delegated to nalgebra in `f64`.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, T::one())
    }

    /// `value * I`.
    pub fn scalar(dim: usize, value: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries; `None` if the length is not a
    /// perfect square.
    pub fn from_row_major(entries: Vec<T>) -> Option<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        (dim * dim == entries.len()).then_some(Self { dim, data: entries })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "block dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.dim, v.len(), "block dimension mismatch");
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&a| a * factor).collect(),
        }
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = T::one();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .abs()
                        .partial_cmp(&a[j * n + col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(col);
            if a[pivot * n + col] == T::zero() {
                return T::zero();
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det = det * p;
            for i in col + 1..n {
                let f = a[i * n + col] / p;
                for j in col..n {
                    a[i * n + j] = a[i * n + j] - f * a[col * n + j];
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse; `None` when a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[pivot * n + col] == T::zero() || !a[pivot * n + col].is_finite() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                    inv.swap(col * n + j, pivot * n + j);
                }
            }
            let p = a[col * n + col];
            for j in 0..n {
                a[col * n + j] = a[col * n + j] / p;
                inv[col * n + j] = inv[col * n + j] / p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[i * n + col];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[i * n + j] = a[i * n + j] - f * a[col * n + j];
                    inv[i * n + j] = inv[i * n + j] - f * inv[col * n + j];
                }
            }
        }
        Some(Self { dim: n, data: inv })
    }

    /// Induced sup-norm (max absolute row sum).
    pub fn inf_norm(&self) -> T {
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .fold(T::zero(), |acc, a| acc + a.abs())
            })
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.dim, self.dim, self.data.iter().map(|a| a.as_f64()))
    }

    /// Eigenvalue moduli in ascending order.
    pub fn eigen_moduli(&self) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        let mut m: Vec<f64> = self
            .to_nalgebra()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect();
        m.sort_by(f64::total_cmp);
        m
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigen_moduli().last().copied().unwrap_or(0.0)
    }

    /// Smallest eigenvalue modulus.
    pub fn spectral_floor(&self) -> f64 {
        self.eigen_moduli()
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    pub fn min_singular_value(&self) -> f64 {
        if self.dim == 0 {
            return f64::INFINITY;
        }
        self.to_nalgebra()
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Numerical rank of a set of column vectors in `f64`.
pub fn rank_of_columns(columns: &[Vec<f64>], dim: usize) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(dim, columns.len(), |i, j| columns[j][i]);
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    m.svd(false, false).rank(1e-10 * scale)
}

pub(crate) fn vec_sup<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, a| acc.max(a.abs()))
}

pub(crate) fn vec_sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub(crate) fn vec_add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![0.5, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ])
        .unwrap();
        let inv = m.inverse().unwrap();
        assert!(m.matmul(&inv).max_abs_diff(&Mat::identity(3)) < 1e-14);
    }

    #[test]
    fn determinant_with_pivoting() {
        let m = Mat::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(m.det(), -6.0);
        assert!(Mat::<f64>::zeros(2).inverse().is_none());
    }

    #[test]
    fn eigen_moduli_of_rotation_scaling() {
        // 0.5 * rotation: complex pair with modulus 0.5
        let m = Mat::from_rows(&[vec![0.0, -0.5], vec![0.5, 0.0]]).unwrap();
        let e = m.eigen_moduli();
        assert!((e[0] - 0.5).abs() < 1e-12 && (e[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_detects_dependence() {
        let cols = vec![
            vec![1.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        assert_eq!(rank_of_columns(&cols, 3), 2);
    }
}
