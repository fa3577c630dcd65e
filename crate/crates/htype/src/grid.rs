//! Cell-centred grids and the sampled fields living on them.
//!
//! Space fields are stored z-outer: sample `(z_idx, h_idx)` sits at
//! `z_idx * n_horizontal + h_idx`. Space-time fields add time as the
//! outermost axis.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{from_usize, lit, to_f64, Cplx, Real};

/// Symmetric cell-centred axis: `x_i = -L + (i + 1/2) h`, `h = 2L / n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Axis<T: Real> {
    pub n: usize,
    pub half_width: T,
}

impl<T: Real> Axis<T> {
    pub fn new(n: usize, half_width: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("axis needs at least one point".into()));
        }
        if !(half_width > T::zero()) {
            return Err(Error::NonPositive {
                what: "axis half width",
                value: to_f64(half_width),
            });
        }
        Ok(Self { n, half_width })
    }

    pub fn step(&self) -> T {
        lit::<T>(2.0) * self.half_width / from_usize(self.n)
    }

    pub fn point(&self, i: usize) -> T {
        -self.half_width + (from_usize::<T>(i) + lit(0.5)) * self.step()
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n: self.n,
            half_width: self.half_width * factor,
        }
    }

    /// Index of the origin when `n` is odd.
    pub fn center(&self) -> Option<usize> {
        (self.n % 2 == 1).then_some(self.n / 2)
    }
}

/// Tensor grid on the horizontal layer `R^{2d}` (same axis in every direction).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HorizontalGrid<T: Real> {
    pub d: usize,
    pub axis: Axis<T>,
}

impl<T: Real> HorizontalGrid<T> {
    pub fn new(d: usize, n: usize, half_width: T) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        Ok(Self {
            d,
            axis: Axis::new(n, half_width)?,
        })
    }

    pub fn dims(&self) -> usize {
        2 * self.d
    }

    pub fn len(&self) -> usize {
        self.axis.n.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.axis.step().powi(self.dims() as i32)
    }

    /// Per-axis indices of a flat index (first coordinate slowest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let n = self.axis.n;
        let mut out = vec![0; self.dims()];
        for slot in out.iter_mut().rev() {
            *slot = idx % n;
            idx /= n;
        }
        out
    }

    pub fn flat_index(&self, ix: &[usize]) -> usize {
        ix.iter().fold(0, |acc, &i| acc * self.axis.n + i)
    }

    pub fn point(&self, idx: usize) -> Vec<T> {
        self.multi_index(idx).into_iter().map(|i| self.axis.point(i)).collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Whether a flat index lies on the outer layer of cells.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let last = self.axis.n - 1;
        self.multi_index(idx).iter().any(|&i| i == 0 || i == last)
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            d: self.d,
            axis: self.axis.scaled(factor),
        }
    }
}

/// Tensor grid on the vertical layer `R^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct VerticalGrid<T: Real> {
    pub m: usize,
    pub axis: Axis<T>,
}

impl<T: Real> VerticalGrid<T> {
    pub fn new(m: usize, n: usize, half_width: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        Ok(Self {
            m,
            axis: Axis::new(n, half_width)?,
        })
    }

    pub fn len(&self) -> usize {
        self.axis.n.pow(self.m as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.axis.step().powi(self.m as i32)
    }

    pub fn point(&self, mut idx: usize) -> Vec<T> {
        let n = self.axis.n;
        let mut out = vec![T::zero(); self.m];
        for slot in out.iter_mut().rev() {
            *slot = self.axis.point(idx % n);
            idx /= n;
        }
        out
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            m: self.m,
            axis: self.axis.scaled(factor),
        }
    }
}

/// Grid on `G = R^{2d} x R^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SpaceGrid<T: Real> {
    pub horizontal: HorizontalGrid<T>,
    pub vertical: VerticalGrid<T>,
}

impl<T: Real> SpaceGrid<T> {
    pub fn new(d: usize, m: usize, n_x: usize, half_x: T, n_z: usize, half_z: T) -> Result<Self> {
        Ok(Self {
            horizontal: HorizontalGrid::new(d, n_x, half_x)?,
            vertical: VerticalGrid::new(m, n_z, half_z)?,
        })
    }

    pub fn len(&self) -> usize {
        self.horizontal.len() * self.vertical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.horizontal.cell_volume() * self.vertical.cell_volume()
    }

    /// Grid matched to the dilation `delta_scale`: horizontal box times
    /// `scale`, vertical box times `scale^2`.
    pub fn dilated(&self, scale: T) -> Self {
        Self {
            horizontal: self.horizontal.scaled(scale),
            vertical: self.vertical.scaled(scale * scale),
        }
    }
}

/// Time samples with integration weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TimeGrid<T: Real> {
    pub times: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    /// Cell-centred samples on `[t0, t1]`.
    pub fn midpoint(t0: T, t1: T, n: usize) -> Result<Self> {
        if n == 0 || !(t1 > t0) {
            return Err(Error::InvalidParameter("time grid needs n > 0 and t0 < t1".into()));
        }
        let h = (t1 - t0) / from_usize(n);
        Ok(Self {
            times: (0..n).map(|i| t0 + (from_usize::<T>(i) + lit(0.5)) * h).collect(),
            weights: vec![h; n],
        })
    }

    /// `n` equispaced samples including both ends, trapezoid weights.
    pub fn inclusive(t0: T, t1: T, n: usize) -> Result<Self> {
        if n < 2 || !(t1 > t0) {
            return Err(Error::InvalidParameter("inclusive time grid needs n >= 2 and t0 < t1".into()));
        }
        let h = (t1 - t0) / from_usize(n - 1);
        let mut weights = vec![h; n];
        weights[0] = h * lit(0.5);
        weights[n - 1] = h * lit(0.5);
        Ok(Self {
            times: (0..n).map(|i| t0 + from_usize::<T>(i) * h).collect(),
            weights,
        })
    }

    /// Arbitrary sample list with unit weights (no time integration implied).
    pub fn samples(times: Vec<T>) -> Self {
        let weights = vec![T::one(); times.len()];
        Self { times, weights }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            times: self.times.iter().map(|&t| t * factor).collect(),
            weights: self.weights.iter().map(|&w| w * factor).collect(),
        }
    }
}

/// Complex samples `f(x, z)` on a [`SpaceGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SpaceField<T: Real> {
    pub grid: SpaceGrid<T>,
    pub data: Vec<Cplx<T>>,
}

impl<T: Real> SpaceField<T> {
    pub fn zeros(grid: SpaceGrid<T>) -> Self {
        Self {
            data: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            grid,
        }
    }

    pub fn new(grid: SpaceGrid<T>, data: Vec<Cplx<T>>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "space field samples",
                expected: grid.len(),
                found: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    /// Samples `f(x, z)`.
    pub fn from_fn(grid: SpaceGrid<T>, f: impl Fn(&[T], &[T]) -> Cplx<T>) -> Self {
        let xs = grid.horizontal.points();
        let mut data = Vec::with_capacity(grid.len());
        for zi in 0..grid.vertical.len() {
            let z = grid.vertical.point(zi);
            data.extend(xs.iter().map(|x| f(x, &z)));
        }
        Self { grid, data }
    }

    pub fn n_horizontal(&self) -> usize {
        self.grid.horizontal.len()
    }

    /// Horizontal slice at vertical index `zi`.
    pub fn slice(&self, zi: usize) -> &[Cplx<T>] {
        let n = self.n_horizontal();
        &self.data[zi * n..(zi + 1) * n]
    }

    pub fn l2_norm(&self) -> T {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<T>() * self.grid.cell_volume()).sqrt()
    }

    pub fn inner(&self, other: &Self) -> Cplx<T> {
        let s: Cplx<T> = self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }

    /// Largest boundary magnitude relative to the overall maximum.
    pub fn boundary_ratio(&self) -> T {
        let nh = self.n_horizontal();
        let nz = self.grid.vertical.axis.n;
        let m = self.grid.vertical.m;
        let mut edge = T::zero();
        for (i, c) in self.data.iter().enumerate() {
            let (zi, hi) = (i / nh, i % nh);
            let mut z_edge = false;
            let mut rem = zi;
            for _ in 0..m {
                let k = rem % nz;
                rem /= nz;
                z_edge |= k == 0 || k == nz - 1;
            }
            if z_edge || self.grid.horizontal.on_boundary(hi) {
                edge = edge.max(c.norm());
            }
        }
        let top = self.sup_norm();
        if top == T::zero() {
            T::zero()
        } else {
            edge / top
        }
    }

    /// Errors when the boundary ratio exceeds `tol`.
    pub fn check_decay(&self, tol: T) -> Result<()> {
        let r = self.boundary_ratio();
        if r > tol {
            return Err(Error::GridMismatch(format!(
                "field does not decay at the box boundary (ratio {:.3e} > {:.1e})",
                to_f64(r),
                to_f64(tol)
            )));
        }
        Ok(())
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn axpy(&self, a: Cplx<T>, other: &Self) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&x, &y)| x + a * y).collect(),
        }
    }

    /// Relative L2 distance `|self - other| / |other|`.
    pub fn relative_l2(&self, other: &Self) -> T {
        let diff: T = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let base: T = other.data.iter().map(|b| b.norm_sqr()).sum();
        (diff / base).sqrt()
    }
}

/// Complex samples `u(t, x, z)`; time is the outermost axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SpaceTimeField<T: Real> {
    pub grid: SpaceGrid<T>,
    pub times: TimeGrid<T>,
    pub data: Vec<Cplx<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn zeros(grid: SpaceGrid<T>, times: TimeGrid<T>) -> Self {
        Self {
            data: vec![Complex::new(T::zero(), T::zero()); grid.len() * times.len()],
            grid,
            times,
        }
    }

    pub fn from_slices(grid: SpaceGrid<T>, times: TimeGrid<T>, slices: Vec<SpaceField<T>>) -> Result<Self> {
        if slices.len() != times.len() {
            return Err(Error::DimensionMismatch {
                what: "time slices",
                expected: times.len(),
                found: slices.len(),
            });
        }
        let mut data = Vec::with_capacity(grid.len() * times.len());
        for s in slices {
            if s.grid != grid {
                return Err(Error::GridMismatch("time slice on a different grid".into()));
            }
            data.extend(s.data);
        }
        Ok(Self { grid, times, data })
    }

    pub fn from_fn(grid: SpaceGrid<T>, times: TimeGrid<T>, f: impl Fn(T, &[T], &[T]) -> Cplx<T>) -> Self {
        let xs = grid.horizontal.points();
        let zs = grid.vertical.points();
        let mut data = Vec::with_capacity(grid.len() * times.len());
        for &t in &times.times {
            for z in &zs {
                data.extend(xs.iter().map(|x| f(t, x, z)));
            }
        }
        Self { grid, times, data }
    }

    pub fn slice_len(&self) -> usize {
        self.grid.len()
    }

    pub fn time_slice(&self, ti: usize) -> SpaceField<T> {
        let n = self.slice_len();
        SpaceField {
            grid: self.grid,
            data: self.data[ti * n..(ti + 1) * n].to_vec(),
        }
    }

    pub fn time_slice_data(&self, ti: usize) -> &[Cplx<T>] {
        let n = self.slice_len();
        &self.data[ti * n..(ti + 1) * n]
    }

    /// L2 norm over space and the time weights.
    pub fn l2_norm(&self) -> T {
        let n = self.slice_len();
        let cv = self.grid.cell_volume();
        self.times
            .weights
            .iter()
            .enumerate()
            .map(|(ti, &w)| w * cv * self.data[ti * n..(ti + 1) * n].iter().map(|c| c.norm_sqr()).sum::<T>())
            .sum::<T>()
            .sqrt()
    }

    pub fn inner(&self, other: &Self) -> Cplx<T> {
        let n = self.slice_len();
        let cv = self.grid.cell_volume();
        self.times
            .weights
            .iter()
            .enumerate()
            .map(|(ti, &w)| {
                let s: Cplx<T> = self.data[ti * n..(ti + 1) * n]
                    .iter()
                    .zip(&other.data[ti * n..(ti + 1) * n])
                    .map(|(a, b)| a * b.conj())
                    .sum();
                s * (w * cv)
            })
            .sum()
    }

    pub fn relative_l2(&self, other: &Self) -> T {
        let diff: T = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let base: T = other.data.iter().map(|b| b.norm_sqr()).sum();
        (diff / base).sqrt()
    }
}
