//! Twisted convolution, the twisted Laplacian and its eigenprojectors
//! `Lambda_k`, projector-norm estimates and the convergent projector series.
//!
//! A [`TwistedField`] at frequency `lambda` samples `g` on `R^{2d}`; it stands
//! for the group function `e^{i lambda . z} g(x)`, on which the sub-Laplacian
//! acts as `Delta^lambda = sum_j (d_j - (i/2)(L_lambda x)_j)^2` with
//! `L_lambda = sum_a lambda_a L^a`.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::CoefficientBlock;
use crate::error::{Error, Result};
use crate::grid::HorizontalGrid;
use crate::group::{DualFrequency, HTypeStructure};
use crate::linalg::Mat;
use crate::quadrature::{sphere_volume, QuadratureRule1D};
use crate::real::{binomial, cis, from_usize, lit, to_f64, Cplx, Real};
use crate::special::{laguerre_radial, MultiIndex};

/// Samples of a function on the horizontal layer attached to a frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistedField<T: Real> {
    pub grid: HorizontalGrid<T>,
    lambda: DualFrequency<T>,
    form: Mat<T>,
    rotation: Mat<T>,
    pub data: Vec<Cplx<T>>,
}

impl<T: Real> TwistedField<T> {
    pub fn new(
        grid: HorizontalGrid<T>,
        lambda: DualFrequency<T>,
        structure: &HTypeStructure<T>,
        data: Vec<Cplx<T>>,
    ) -> Result<Self> {
        if grid.d != structure.d() {
            return Err(Error::DimensionMismatch {
                what: "twisted grid dimension",
                expected: structure.d(),
                found: grid.d,
            });
        }
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "twisted field samples",
                expected: grid.len(),
                found: data.len(),
            });
        }
        let form = structure.bracket_form(lambda.components());
        let rotation = structure.diagonalize_j(&lambda)?;
        Ok(Self {
            grid,
            lambda,
            form,
            rotation,
            data,
        })
    }

    pub fn from_fn(
        grid: HorizontalGrid<T>,
        lambda: DualFrequency<T>,
        structure: &HTypeStructure<T>,
        f: impl Fn(&[T]) -> Cplx<T>,
    ) -> Result<Self> {
        let data = grid.points().iter().map(|x| f(x)).collect();
        Self::new(grid, lambda, structure, data)
    }

    /// Heisenberg field at scalar frequency `lam`.
    pub fn heisenberg(grid: HorizontalGrid<T>, lam: T, f: impl Fn(&[T]) -> Cplx<T>) -> Result<Self> {
        let s = HTypeStructure::heisenberg(grid.d)?;
        Self::from_fn(grid, DualFrequency::scalar(lam)?, &s, f)
    }

    pub fn lambda(&self) -> &DualFrequency<T> {
        &self.lambda
    }

    pub fn rho(&self) -> T {
        self.lambda.rho()
    }

    /// `L_lambda`.
    pub fn form(&self) -> &Mat<T> {
        &self.form
    }

    /// `T_lambda`.
    pub fn rotation(&self) -> &Mat<T> {
        &self.rotation
    }

    pub fn d(&self) -> usize {
        self.grid.d
    }

    /// Same frame, new samples.
    pub fn with_data(&self, data: Vec<Cplx<T>>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Self {
            grid: self.grid,
            lambda: self.lambda.clone(),
            form: self.form.clone(),
            rotation: self.rotation.clone(),
            data,
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.with_data(vec![Complex::new(T::zero(), T::zero()); self.data.len()])
    }

    fn same_frame(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.form != other.form {
            return Err(Error::GridMismatch("twisted fields on different grids or frequencies".into()));
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> T {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<T>() * self.grid.cell_volume()).sqrt()
    }

    /// Grid `L^p` norm; `p = inf` gives the sample maximum.
    pub fn lp_norm(&self, p: f64) -> T {
        lp_norm_samples(&self.data, self.grid.cell_volume(), p)
    }

    pub fn inner(&self, other: &Self) -> Cplx<T> {
        let s: Cplx<T> = self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell_volume()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.with_data(self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.with_data(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        self.with_data(self.data.iter().map(|&a| a * s).collect())
    }

    pub fn boundary_ratio(&self) -> T {
        let top = self.data.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        let edge = self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.on_boundary(*i))
            .fold(T::zero(), |m, (_, c)| m.max(c.norm()));
        if top == T::zero() {
            T::zero()
        } else {
            edge / top
        }
    }

    /// Rejects fields that have not decayed to `tol` of their maximum at the
    /// box boundary.
    pub fn check_decay(&self, tol: T) -> Result<()> {
        let r = self.boundary_ratio();
        if r > tol {
            return Err(Error::GridMismatch(format!(
                "twisted field boundary ratio {:.3e} exceeds {:.1e}",
                to_f64(r),
                to_f64(tol)
            )));
        }
        Ok(())
    }
}

pub(crate) fn lp_norm_samples<T: Real>(data: &[Cplx<T>], cell: T, p: f64) -> T {
    if p.is_infinite() {
        return data.iter().fold(T::zero(), |m, c| m.max(c.norm()));
    }
    let pt = lit::<T>(p);
    (data.iter().map(|c| c.norm().powf(pt)).sum::<T>() * cell).powf(T::one() / pt)
}

/// `out_f(x) = sum_w in_f(w) K(x - w) e^{sign (i/2) w^T L x}` on a cell-centred
/// grid; `kernel` is tabulated on the difference lattice `(2n - 1)^{2d}`.
fn lattice_convolve<T: Real>(
    grid: &HorizontalGrid<T>,
    form: &Mat<T>,
    sign: T,
    kernel: &[Cplx<T>],
    inputs: &[&[Cplx<T>]],
) -> Vec<Vec<Cplx<T>>> {
    let n = grid.axis.n;
    let dims = grid.dims();
    let m = 2 * n - 1;
    let npts = grid.len();
    let axis = grid.axis.points();
    let half = lit::<T>(0.5) * sign;
    let nf = inputs.len();
    let zero = Complex::new(T::zero(), T::zero());
    let outputs: Vec<Vec<Cplx<T>>> = (0..npts)
        .into_par_iter()
        .map(|xi| {
            let ax = grid.multi_index(xi);
            let x: Vec<T> = ax.iter().map(|&i| axis[i]).collect();
            let v = form.matvec(&x);
            let tabs: Vec<Vec<Cplx<T>>> = v.iter().map(|&vi| axis.iter().map(|&w| cis(half * w * vi)).collect()).collect();
            let mut acc = vec![zero; nf];
            let mut outer = vec![0usize; dims - 1];
            loop {
                let mut phase = Complex::new(T::one(), T::zero());
                let mut kbase = 0usize;
                let mut ibase = 0usize;
                for (i, &b) in outer.iter().enumerate() {
                    phase *= tabs[i][b];
                    kbase = kbase * m + (ax[i] + n - 1 - b);
                    ibase = ibase * n + b;
                }
                kbase *= m;
                ibase *= n;
                let last = dims - 1;
                let tl = &tabs[last];
                let a_last = ax[last] + n - 1;
                for b in 0..n {
                    let k = kernel[kbase + a_last - b];
                    if k.re == T::zero() && k.im == T::zero() {
                        continue;
                    }
                    let kp = k * phase * tl[b];
                    for (f, inp) in inputs.iter().enumerate() {
                        acc[f] += inp[ibase + b] * kp;
                    }
                }
                // Odometer over the leading coordinates.
                let mut c = outer.len();
                loop {
                    if c == 0 {
                        return acc;
                    }
                    c -= 1;
                    outer[c] += 1;
                    if outer[c] < n {
                        break;
                    }
                    outer[c] = 0;
                }
            }
        })
        .collect();
    // Transpose point-major results into one vector per input.
    (0..nf).map(|f| outputs.iter().map(|acc| acc[f]).collect()).collect()
}

/// Difference-lattice table of a radial kernel `k(|delta|^2)`.
fn radial_kernel_table<T: Real>(grid: &HorizontalGrid<T>, k: impl Fn(T) -> T + Sync) -> Vec<Cplx<T>> {
    let n = grid.axis.n as isize;
    let dims = grid.dims();
    let m = (2 * n - 1) as usize;
    let h = grid.axis.step();
    let total = m.pow(dims as u32);
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut r2 = T::zero();
            for _ in 0..dims {
                let di = (rem % m) as isize - (n - 1);
                rem /= m;
                let dx = from_usize::<T>(di.unsigned_abs()) * h;
                r2 += dx * dx;
            }
            Complex::new(k(r2), T::zero())
        })
        .collect()
}

/// Twisted convolution of two sampled fields,
/// `(g x h)(x) = int g(x - w) h(w) e^{(i/2) w^T L_lambda x} dw`.
///
/// Requires an odd point count so that the origin is a grid point.
pub fn twisted_convolve<T: Real>(g: &TwistedField<T>, h: &TwistedField<T>) -> Result<TwistedField<T>> {
    g.same_frame(h)?;
    let n = g.grid.axis.n;
    if n % 2 == 0 {
        return Err(Error::GridMismatch(
            "sampled twisted convolution needs an odd point count per axis".into(),
        ));
    }
    let dims = g.grid.dims();
    let m = 2 * n - 1;
    let c = (n - 1) / 2;
    let total = m.pow(dims as u32);
    let zero = Complex::new(T::zero(), T::zero());
    let kernel: Vec<Cplx<T>> = (0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut src = vec![0usize; dims];
            for slot in src.iter_mut().rev() {
                let di = (rem % m) as isize - (n as isize - 1);
                rem /= m;
                let j = di + c as isize;
                if j < 0 || j >= n as isize {
                    return None;
                }
                *slot = j as usize;
            }
            Some(g.data[g.grid.flat_index(&src)])
        })
        .map(|v| v.unwrap_or(zero))
        .collect();
    let cell = g.grid.cell_volume();
    let out = lattice_convolve(&g.grid, &g.form, T::one(), &kernel, &[&h.data]);
    Ok(g.with_data(out[0].iter().map(|&v| v * cell).collect()))
}

/// `g x phi_k` with the Laguerre function evaluated analytically on the
/// difference lattice (any point count).
pub fn convolve_laguerre<T: Real>(fields: &[&TwistedField<T>], k: usize) -> Result<Vec<TwistedField<T>>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    for f in fields {
        first.same_frame(f)?;
    }
    let rho = first.rho();
    let d = first.d();
    let kernel = radial_kernel_table(&first.grid, |r2| laguerre_radial(k, d, rho * r2));
    // (g x phi)(x) = sum_w g(w) phi(x - w) e^{-(i/2) w^T L x}.
    let inputs: Vec<&[Cplx<T>]> = fields.iter().map(|f| f.data.as_slice()).collect();
    let cell = first.grid.cell_volume();
    let outs = lattice_convolve(&first.grid, &first.form, -T::one(), &kernel, &inputs);
    Ok(outs
        .into_iter()
        .map(|o| first.with_data(o.into_iter().map(|v| v * cell).collect()))
        .collect())
}

/// `(2 pi)^{-d} |lambda|^d`, the normalization of `Lambda_k`.
pub fn projector_normalization<T: Real>(rho: T, d: usize) -> T {
    (rho / T::TAU()).powi(d as i32)
}

/// `Lambda_k g = (2 pi)^{-d} |lambda|^d g x phi_k`.
pub fn project_k<T: Real>(g: &TwistedField<T>, k: usize) -> Result<TwistedField<T>> {
    Ok(project_k_batch(&[g], k)?.pop().expect("one field"))
}

/// [`project_k`] on several fields sharing a frame.
pub fn project_k_batch<T: Real>(fields: &[&TwistedField<T>], k: usize) -> Result<Vec<TwistedField<T>>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let c = Complex::new(projector_normalization(first.rho(), first.d()), T::zero());
    Ok(convolve_laguerre(fields, k)?.into_iter().map(|f| f.scale(c)).collect())
}

/// Expansion of a twisted field in the basis `M^lambda_ab`, `|a|, |b| <= n_max`.
#[derive(Clone, Debug)]
pub struct Expansion<T: Real> {
    pub block: CoefficientBlock,
    /// `c_ab = <g, M_ab> / |M_ab|^2`, row-major over the block.
    pub coeffs: Vec<Cplx<T>>,
    /// Relative L2 mass not captured by the truncated basis.
    pub tail: T,
}

/// Grid-quadrature expansion of `g` in the eigenbasis of `Delta^lambda`.
pub fn expand<T: Real>(g: &TwistedField<T>, n_max: usize) -> Expansion<T> {
    let d = g.d();
    let block = CoefficientBlock::total_order(d, n_max);
    let rho = g.rho();
    let sr = rho.sqrt();
    let rt = g.rotation.transpose();
    let cell = g.grid.cell_volume();
    let nb = block.len();
    let zero = Complex::new(T::zero(), T::zero());
    let chunks: Vec<Vec<Cplx<T>>> = (0..g.grid.len())
        .collect::<Vec<_>>()
        .par_chunks(256)
        .map(|idx| {
            let mut acc = vec![zero; nb];
            let mut scratch = block.scratch::<T>();
            let mut vals = vec![zero; nb];
            for &i in idx {
                let gv = g.data[i];
                if gv.re == T::zero() && gv.im == T::zero() {
                    continue;
                }
                let y = rt.matvec(&g.grid.point(i));
                block.eval(sr, &y, &mut scratch, &mut vals);
                for (a, v) in acc.iter_mut().zip(&vals) {
                    *a += gv * v.conj();
                }
            }
            acc
        })
        .collect();
    let norm2 = (T::TAU() / rho).powi(d as i32);
    let mut coeffs = vec![zero; nb];
    for ch in &chunks {
        for (c, v) in coeffs.iter_mut().zip(ch) {
            *c += *v;
        }
    }
    coeffs.iter_mut().for_each(|c| *c *= cell / norm2);
    let captured: T = coeffs.iter().map(|c| c.norm_sqr()).sum::<T>() * norm2;
    let total = g.l2_norm().powi(2);
    let tail = if total > T::zero() {
        ((total - captured) / total).max(T::zero())
    } else {
        T::zero()
    };
    Expansion { block, coeffs, tail }
}

/// Resums an expansion after multiplying row `a` by `symbol(|a|)`.
pub fn synthesize<T: Real>(frame: &TwistedField<T>, e: &Expansion<T>, symbol: impl Fn(usize) -> T + Sync) -> TwistedField<T> {
    let sr = frame.rho().sqrt();
    let rt = frame.rotation.transpose();
    let ncols = e.block.cols().len();
    let zero = Complex::new(T::zero(), T::zero());
    let weighted: Vec<Cplx<T>> = e
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| c * symbol(e.block.rows()[i / ncols].order()))
        .collect();
    let data: Vec<Cplx<T>> = (0..frame.grid.len())
        .into_par_iter()
        .map_init(
            || (e.block.scratch::<T>(), vec![zero; e.block.len()]),
            |(scratch, vals), i| {
                let y = rt.matvec(&frame.grid.point(i));
                e.block.eval(sr, &y, scratch, vals);
                vals.iter().zip(&weighted).map(|(v, c)| v * c).sum()
            },
        )
        .collect();
    frame.with_data(data)
}

/// Result of a spectral operator application.
#[derive(Clone, Debug)]
pub struct SpectralApplication<T: Real> {
    pub field: TwistedField<T>,
    /// Relative mass outside the truncated basis; above `1e-6` the result
    /// should be treated as a truncation warning.
    pub tail: T,
}

/// Tail level above which spectral applications are flagged.
pub const TRUNCATION_WARNING: f64 = 1e-6;

/// `Delta^lambda g` by expansion in its eigenbasis.
pub fn twisted_laplacian_apply<T: Real>(g: &TwistedField<T>, n_max: usize) -> SpectralApplication<T> {
    let e = expand(g, n_max);
    let rho = g.rho();
    let d = g.d();
    let field = synthesize(g, &e, |k| -rho * from_usize::<T>(2 * k + d));
    SpectralApplication { field, tail: e.tail }
}

/// `Delta^lambda g = Delta g - i sum_j (L x)_j d_j g - |L x|^2 g / 4` with
/// fourth-order centred differences; the two outermost cell layers are zero.
pub fn twisted_laplacian_fd<T: Real>(g: &TwistedField<T>) -> TwistedField<T> {
    let n = g.grid.axis.n;
    let dims = g.grid.dims();
    let h = g.grid.axis.step();
    let zero = Complex::new(T::zero(), T::zero());
    let i_unit = Complex::new(T::zero(), T::one());
    let strides: Vec<usize> = (0..dims).map(|i| n.pow((dims - 1 - i) as u32)).collect();
    let c12 = lit::<T>(12.0);
    let data: Vec<Cplx<T>> = (0..g.grid.len())
        .into_par_iter()
        .map(|idx| {
            let ix = g.grid.multi_index(idx);
            if ix.iter().any(|&a| a < 2 || a + 2 >= n) {
                return zero;
            }
            let x = g.grid.point(idx);
            let lx = g.form.matvec(&x);
            let f0 = g.data[idx];
            let mut lap = zero;
            let mut drift = zero;
            for j in 0..dims {
                let s = strides[j];
                let (p1, p2, m1, m2) = (g.data[idx + s], g.data[idx + 2 * s], g.data[idx - s], g.data[idx - 2 * s]);
                lap += (-p2 + p1 * lit::<T>(16.0) - f0 * lit::<T>(30.0) + m1 * lit::<T>(16.0) - m2) / (c12 * h * h);
                let der = (-p2 + p1 * lit::<T>(8.0) - m1 * lit::<T>(8.0) + m2) / (c12 * h);
                drift += der * lx[j];
            }
            let pot: T = lx.iter().map(|&v| v * v).sum::<T>() * lit(0.25);
            lap - i_unit * drift - f0 * pot
        })
        .collect();
    g.with_data(data)
}

/// Projector growth exponent `rho(r)` for `2 <= r <= inf`.
pub fn rho_exponent(r: f64, d: usize) -> Result<f64> {
    if r.is_nan() || r < 2.0 {
        return Err(Error::InvalidParameter(format!("rho(r) needs r >= 2, got {r}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    let df = d as f64;
    let inv = if r.is_infinite() { 0.0 } else { 1.0 / r };
    let breakpoint = 2.0 * (2.0 * df + 1.0) / (2.0 * df - 1.0);
    Ok(if r <= breakpoint {
        inv - 0.5
    } else {
        2.0 * df * (0.5 - inv) - 1.0
    })
}

/// Conjugate exponent.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn inverse(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// Radial `L^p` norm of `phi_k^rho` on `R^{2d}` (composite Gauss-Legendre in `r`).
pub fn laguerre_lp_norm(k: usize, d: usize, rho: f64, p: f64) -> f64 {
    radial_lp_norm(|s| laguerre_radial(k, d, s), k, d, rho, p)
}

/// `L^p` norm of the radial function `x -> f(rho |x|^2)` on `R^{2d}`.
fn radial_lp_norm(f: impl Fn(f64) -> f64, k: usize, d: usize, rho: f64, p: f64) -> f64 {
    let s_max = 4.0 * (2 * k + d) as f64 + 160.0;
    let r_max = (s_max / rho).sqrt();
    if p.is_infinite() {
        let n = 4000 + 400 * k;
        return (0..=n)
            .map(|i| f(rho * (r_max * i as f64 / n as f64).powi(2)).abs())
            .fold(0.0, f64::max);
    }
    let panels = 8 * k + 40;
    let breaks: Vec<f64> = (0..=panels).map(|i| r_max * i as f64 / panels as f64).collect();
    let rule = QuadratureRule1D::<f64>::composite_legendre(&breaks, 16).expect("panels");
    let vol = sphere_volume(2 * d);
    let integral = rule.integrate(|r| f(rho * r * r).abs().powf(p) * r.powi(2 * d as i32 - 1));
    (vol * integral).powf(1.0 / p)
}

/// How a projector norm value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    /// Closed form of the kernel representation.
    Exact,
    /// Nonlinear power iteration over a truncated eigenspace basis.
    Maximized,
    /// Supremum over a named family of test functions.
    LowerBound,
}

/// Estimate of `|Lambda_k|_{p -> r}` with its certificate.
#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    pub k: usize,
    pub p: f64,
    pub r: f64,
    pub value: f64,
    pub method: NormMethod,
    pub witness: String,
    pub iterations: usize,
    pub converged: bool,
    /// Coefficients of the maximizer in the normalized basis (power iteration only).
    pub maximizer: Vec<(usize, f64, f64)>,
}

/// Options for [`projector_norm_estimate`].
#[derive(Clone, Debug)]
pub struct NormOptions {
    pub d: usize,
    pub lambda: f64,
    /// Half width of the column band `|b| in [k - w, k + w]` of the basis.
    pub band: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            d: 1,
            lambda: 1.0,
            band: 6,
            max_iter: 400,
            tol: 1e-11,
            seed: 7,
        }
    }
}

/// `|Lambda_k|_{2 -> inf} = (2 pi)^{-d} rho^d |phi_k|_2` (every kernel row
/// has the same L2 norm).
pub fn projector_norm_2_to_inf(k: usize, d: usize, rho: f64) -> f64 {
    projector_normalization(rho, d) * laguerre_lp_norm(k, d, rho, 2.0)
}

/// `|Lambda_k|_{1 -> inf} = (2 pi)^{-d} rho^d binom(k + d - 1, k)`, the
/// kernel supremum.
pub fn projector_norm_1_to_inf(k: usize, d: usize, rho: f64) -> f64 {
    projector_normalization(rho, d) * binomial(k + d - 1, k)
}

/// Norm of `Lambda_k : L^p -> L^r` on `R^{2d}` at `|lambda| = opts.lambda`.
///
/// `p = 2` gives exact values for `r in {2, inf}` and a power-iteration
/// maximum otherwise (`d = 1`); `p < 2` gives a lower bound over Gaussian
/// and Laguerre test functions.
pub fn projector_norm_estimate(k: usize, p: f64, r: f64, opts: &NormOptions) -> Result<NormEstimate> {
    if !(1.0..=2.0).contains(&p) || !(r >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "projector norms need 1 <= p <= 2 <= r, got p = {p}, r = {r}"
        )));
    }
    let d = opts.d;
    let rho = opts.lambda;
    let base = NormEstimate {
        k,
        p,
        r,
        value: 0.0,
        method: NormMethod::Exact,
        witness: String::new(),
        iterations: 0,
        converged: true,
        maximizer: Vec::new(),
    };
    if p == 2.0 && r == 2.0 {
        return Ok(NormEstimate {
            value: 1.0,
            witness: "orthogonal projection".into(),
            ..base
        });
    }
    if p == 2.0 && r.is_infinite() {
        return Ok(NormEstimate {
            value: projector_norm_2_to_inf(k, d, rho),
            witness: "kernel row L2 norm".into(),
            ..base
        });
    }
    if p == 1.0 && r.is_infinite() {
        return Ok(NormEstimate {
            value: projector_norm_1_to_inf(k, d, rho),
            witness: "kernel supremum at the origin".into(),
            ..base
        });
    }
    if p == 2.0 {
        if d != 1 {
            return Err(Error::Unsupported("power iteration is implemented for d = 1".into()));
        }
        return power_iteration(k, r, opts);
    }
    lower_bound(k, p, r, d, rho)
}

/// Lower bound from radial witnesses: `phi_k` itself and Gaussians
/// `e^{-a rho |x|^2 / 4}`, whose projection is a multiple of `phi_k`.
fn lower_bound(k: usize, p: f64, r: f64, d: usize, rho: f64) -> Result<NormEstimate> {
    let phi_r = laguerre_lp_norm(k, d, rho, r);
    let phi_2sq = laguerre_lp_norm(k, d, rho, 2.0).powi(2);
    let mut best = (laguerre_lp_norm(k, d, rho, r) / laguerre_lp_norm(k, d, rho, p), "laguerre phi_k".to_string());
    for a in [0.25, 0.5, 1.5, 2.0, 4.0] {
        let g = move |s: f64| (-a * s / 4.0).exp();
        // <g, phi_k> by radial quadrature.
        let s_max = 4.0 * (2 * k + d) as f64 + 160.0;
        let r_max = (s_max / rho).sqrt();
        let panels = 8 * k + 40;
        let breaks: Vec<f64> = (0..=panels).map(|i| r_max * i as f64 / panels as f64).collect();
        let rule = QuadratureRule1D::<f64>::composite_legendre(&breaks, 16)?;
        let ip = sphere_volume(2 * d)
            * rule.integrate(|x| g(rho * x * x) * laguerre_radial(k, d, rho * x * x) * x.powi(2 * d as i32 - 1));
        let coef = ip / phi_2sq;
        let gp = radial_lp_norm(g, k, d, rho, p);
        let ratio = coef.abs() * phi_r / gp;
        if ratio > best.0 {
            best = (ratio, format!("gaussian a={a}"));
        }
    }
    Ok(NormEstimate {
        k,
        p,
        r,
        value: best.0,
        method: NormMethod::LowerBound,
        witness: best.1,
        iterations: 0,
        converged: true,
        maximizer: Vec::new(),
    })
}

/// Maximizes `|u|_r` over unit `u` in the span of `M_{k b}`, `|b - k| <= band`.
fn power_iteration(k: usize, r: f64, opts: &NormOptions) -> Result<NormEstimate> {
    let rho = opts.lambda;
    let cols: Vec<usize> = (k.saturating_sub(opts.band)..=k + opts.band).collect();
    // Oscillatory region of M_ab ends at t = (X^2 + Y^2)/2 = 2(a + b + 1).
    let t_max = 2.0 * (2 * k + opts.band + 1) as f64;
    let t_cover = t_max + 4.0 * t_max.sqrt() + 10.0;
    let half = (2.0 * t_cover / rho).sqrt();
    let wavenumber = (2.0 * (2 * k + opts.band + 1) as f64 * rho).sqrt();
    // |u|^r oscillates about r/2 times faster than u.
    let h = PI / ((1.0 + 0.5 * r) * wavenumber);
    let n = ((2.0 * half / h).ceil() as usize).max(32);
    let grid = HorizontalGrid::<f64>::new(1, n, half)?;
    let block = CoefficientBlock::new(vec![MultiIndex(vec![k])], cols.iter().map(|&b| MultiIndex(vec![b])).collect());
    let nb = cols.len();
    let norm = (2.0 * PI / rho).sqrt();
    let sr = rho.sqrt();
    let cell = grid.cell_volume();
    let npts = grid.len();
    // Normalized basis values, point-major.
    let mut basis = vec![Complex::new(0.0, 0.0); npts * nb];
    basis.par_chunks_mut(nb).enumerate().for_each_init(
        || block.scratch::<f64>(),
        |scratch, (i, out)| {
            let y = grid.point(i);
            block.eval(sr, &y, scratch, out);
            out.iter_mut().for_each(|v| *v /= norm);
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut c: Vec<Cplx<f64>> = cols
        .iter()
        .map(|&b| {
            let base = if b == k { 1.0 } else { 0.0 };
            Complex::new(base + 0.2 * rng.gen_range(-1.0..1.0), 0.2 * rng.gen_range(-1.0..1.0))
        })
        .collect();
    let normalize = |c: &mut Vec<Cplx<f64>>| {
        let s = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= s);
    };
    normalize(&mut c);
    let mut value = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let u: Vec<Cplx<f64>> = basis.par_chunks(nb).map(|row| row.iter().zip(&c).map(|(b, ci)| b * ci).sum()).collect();
        let nr = lp_norm_samples(&u, cell, r);
        // Gradient of |u|_r^r projected back onto the span.
        let g: Vec<Cplx<f64>> = u.iter().map(|v| v * v.norm().powf(r - 2.0)).collect();
        let mut next = vec![Complex::new(0.0, 0.0); nb];
        for (row, gv) in basis.chunks(nb).zip(&g) {
            for (nx, b) in next.iter_mut().zip(row) {
                *nx += gv * b.conj();
            }
        }
        normalize(&mut next);
        let change = (nr - value).abs() / nr.max(1e-300);
        value = nr;
        c = next;
        if change < opts.tol && it > 2 {
            converged = true;
            break;
        }
    }
    Ok(NormEstimate {
        k,
        p: 2.0,
        r,
        value,
        method: NormMethod::Maximized,
        witness: format!("span of M_(k,b), |b-k|<={}, grid n={n}", opts.band),
        iterations,
        converged,
        maximizer: cols.iter().zip(&c).map(|(&b, v)| (b, v.re, v.im)).collect(),
    })
}

/// Where the numerators of the projector series come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSource {
    /// Exact kernel norms (`p = 1` and `p = 2`).
    Measured,
    /// The growth bound `(2k + d)^{rho(p')}`.
    Bound,
}

/// Partial sums of `sum_k |Lambda_k|_{p -> p'} / (2k + d)^{eta}`,
/// `eta = m (1/r - 1/r') + d (1/p - 1/p')`.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    pub eta: f64,
    /// Decay exponent of the summands after the numerator growth.
    pub net_decay: f64,
    pub partial_sums: Vec<f64>,
    /// Integral-comparison majorant of the tail after the last term.
    pub tail_bound: f64,
    pub monotone: bool,
}

impl SeriesReport {
    pub fn sum_at(&self, k: usize) -> f64 {
        self.partial_sums[k]
    }

    /// Majorant of `S_inf - S_k` with the same constant.
    pub fn tail_after(&self, k: usize, constant: f64, d: usize) -> f64 {
        constant * (2.0 * k as f64 + d as f64).powf(1.0 - self.net_decay) / (2.0 * (self.net_decay - 1.0))
    }
}

/// `m (1/r - 1/r')`, the vertical decay exponent.
pub fn vertical_exponent(r: f64, m: usize) -> f64 {
    m as f64 * (inverse(r) - inverse(dual_exponent(r)))
}

/// Checks the convergence hypotheses of the projector series.
pub fn check_series_parameters(p: f64, r: f64, m: usize) -> Result<()> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::Inadmissible(format!("series needs 1 <= p <= 2, got p = {p}")));
    }
    let r_max = 2.0 * (m as f64 + 1.0) / (m as f64 + 3.0);
    if !(r >= 1.0 && r <= r_max + 1e-15) {
        return Err(Error::Inadmissible(format!(
            "series needs 1 <= r <= 2(m+1)/(m+3) = {r_max}, got r = {r}"
        )));
    }
    if m == 1 && p == 2.0 {
        return Err(Error::Inadmissible(
            "(m, p) = (1, 2) is excluded: the summands (2k+d)^{-m(1/r-1/r')} are not summable for m = 1".into(),
        ));
    }
    Ok(())
}

/// Partial sums `S_0..S_K` and the tail majorant.
pub fn series_partial_sum(p: f64, r: f64, d: usize, m: usize, k_max: usize, source: NormSource) -> Result<SeriesReport> {
    check_series_parameters(p, r, m)?;
    let pd = dual_exponent(p);
    let eta = vertical_exponent(r, m) + d as f64 * (inverse(p) - inverse(pd));
    let growth = rho_exponent(pd, d)?;
    let net_decay = eta - growth;
    let (numerator, constant): (Box<dyn Fn(usize) -> f64>, f64) = match source {
        NormSource::Bound => (Box::new(move |k| (2.0 * k as f64 + d as f64).powf(growth)), 1.0),
        NormSource::Measured if p == 1.0 => {
            let fact: f64 = (1..d).map(|j| j as f64).product();
            let c = (2.0 * PI).powi(-(d as i32)) / (2f64.powi(d as i32 - 1) * fact);
            (Box::new(move |k| projector_norm_1_to_inf(k, d, 1.0)), c)
        }
        NormSource::Measured if p == 2.0 => (Box::new(|_| 1.0), 1.0),
        NormSource::Measured => {
            return Err(Error::Unsupported(format!("measured projector norms are available for p in {{1, 2}}, got {p}")))
        }
    };
    let mut partial_sums = Vec::with_capacity(k_max + 1);
    let mut s = 0.0;
    let mut monotone = true;
    for k in 0..=k_max {
        let term = numerator(k) / (2.0 * k as f64 + d as f64).powf(eta);
        monotone &= term >= 0.0;
        s += term;
        partial_sums.push(s);
    }
    let mut report = SeriesReport {
        eta,
        net_decay,
        partial_sums,
        tail_bound: f64::INFINITY,
        monotone,
    };
    if net_decay > 1.0 {
        report.tail_bound = report.tail_after(k_max, constant, d);
    }
    Ok(report)
}
