//! Small dense real matrices (2d x 2d at most a few dozen wide).

use std::ops::{Index, IndexMut, Mul};

use crate::real::{lit, Real};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Builds from row-major data; panics when the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let data = rows.iter().flat_map(|row| row.iter().map(|&v| lit(v))).collect();
        Self::from_row_major(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `v^T A w`.
    pub fn bilinear(&self, v: &[T], w: &[T]) -> T {
        v.iter().zip(self.matvec(w)).map(|(&a, b)| a * b).sum()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn sup_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Largest entry of `A + A^T`.
    pub fn antisymmetry_residual(&self) -> T {
        self.add(&self.transpose()).sup_norm()
    }

    /// Largest entry of `A^T A - I`.
    pub fn orthogonality_residual(&self) -> T {
        (&self.transpose() * self).sub(&Self::identity(self.cols)).sup_norm()
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product shapes");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Smallest absolute pivot of Gaussian elimination with partial pivoting on
/// the Gram matrix of the given vectors; zero iff they are dependent.
pub fn min_gram_pivot<T: Real>(vectors: &[Vec<T>]) -> T {
    let n = vectors.len();
    let mut g = Mat::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = vectors[i].iter().zip(&vectors[j]).map(|(&a, &b)| a * b).sum();
        }
    }
    let scale = (0..n).fold(T::zero(), |m, i| m.max(g[(i, i)]));
    if n == 0 || scale == T::zero() {
        return T::zero();
    }
    let mut min_pivot = T::infinity();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| g[(a, c)].abs().partial_cmp(&g[(b, c)].abs()).unwrap())
            .unwrap();
        if p != c {
            for j in 0..n {
                let tmp = g[(c, j)];
                g[(c, j)] = g[(p, j)];
                g[(p, j)] = tmp;
            }
        }
        let piv = g[(c, c)];
        min_pivot = min_pivot.min(piv.abs() / scale);
        if piv == T::zero() {
            return T::zero();
        }
        for r in c + 1..n {
            let f = g[(r, c)] / piv;
            for j in c..n {
                let v = g[(c, j)];
                g[(r, j)] -= f * v;
            }
        }
    }
    min_pivot
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
