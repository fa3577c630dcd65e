//! Bulk evaluation of the coefficient functions `M^lambda_ab(x)` (the
//! `z`-independent part of the matrix coefficients) for blocks of indices.

use num_complex::Complex;

use crate::real::{Cplx, Real};
use crate::special::{coefficient_table_1d, MultiIndex};

/// Block of coefficient functions indexed by `rows x cols`.
#[derive(Clone, Debug)]
pub struct CoefficientBlock {
    d: usize,
    rows: Vec<MultiIndex>,
    cols: Vec<MultiIndex>,
    row_max: usize,
    col_max: usize,
}

impl CoefficientBlock {
    pub fn new(rows: Vec<MultiIndex>, cols: Vec<MultiIndex>) -> Self {
        let d = rows.first().or(cols.first()).map_or(1, |a| a.dim());
        let row_max = rows.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0);
        let col_max = cols.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0);
        Self {
            d,
            rows,
            cols,
            row_max,
            col_max,
        }
    }

    /// Square block over all indices of order `<= n_max`.
    pub fn total_order(d: usize, n_max: usize) -> Self {
        let idx = MultiIndex::up_to(d, n_max);
        Self::new(idx.clone(), idx)
    }

    pub fn rows(&self) -> &[MultiIndex] {
        &self.rows
    }

    pub fn cols(&self) -> &[MultiIndex] {
        &self.cols
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn table_len(&self) -> usize {
        (self.row_max + 1) * (self.col_max + 1)
    }

    pub fn scratch<T: Real>(&self) -> Vec<Cplx<T>> {
        vec![Complex::new(T::zero(), T::zero()); self.d * self.table_len()]
    }

    /// Fills `out[r * cols + c] = M_{rows[r], cols[c]}(sqrt_rho * y)` where `y`
    /// is the point already rotated by `T_lambda^T`.
    pub fn eval<T: Real>(&self, sqrt_rho: T, y: &[T], scratch: &mut [Cplx<T>], out: &mut [Cplx<T>]) {
        let d = self.d;
        let tl = self.table_len();
        let (nr, nc) = (self.row_max + 1, self.col_max + 1);
        for j in 0..d {
            coefficient_table_1d(nr, nc, sqrt_rho * y[j], sqrt_rho * y[d + j], &mut scratch[j * tl..(j + 1) * tl]);
        }
        let ncols = self.cols.len();
        for (ri, a) in self.rows.iter().enumerate() {
            for (ci, b) in self.cols.iter().enumerate() {
                let mut v = scratch[a.0[0] * nc + b.0[0]];
                for j in 1..d {
                    v *= scratch[j * tl + a.0[j] * nc + b.0[j]];
                }
                out[ri * ncols + ci] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::coefficient_1d;

    #[test]
    fn block_matches_pointwise_products() {
        let blk = CoefficientBlock::total_order(2, 3);
        let mut scratch = blk.scratch::<f64>();
        let mut out = vec![Complex::new(0.0, 0.0); blk.len()];
        let y = [0.3, -0.7, 1.1, 0.4];
        blk.eval(1.5f64.sqrt(), &y, &mut scratch, &mut out);
        let s = 1.5f64.sqrt();
        for (ri, a) in blk.rows().iter().enumerate() {
            for (ci, b) in blk.cols().iter().enumerate() {
                let e = coefficient_1d(a.0[0], b.0[0], s * y[0], s * y[2]) * coefficient_1d(a.0[1], b.0[1], s * y[1], s * y[3]);
                assert!((out[ri * blk.cols().len() + ci] - e).norm() < 1e-14);
            }
        }
    }
}
