//! Hermite and Laguerre functions, special Hermite functions and the matrix
//! coefficients of the Schroedinger representations.
//!
//! One-dimensional coefficients `M_ab(X, Y) = <pi_1(X, Y, 0) h_a, h_b>` on the
//! Heisenberg group are available twice: by Gauss-Hermite quadrature (the
//! reference path, uniform in the indices) and by the closed Laguerre form
//! used for bulk tabulation on grids.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{DualFrequency, GroupPoint, HTypeStructure};
use crate::quadrature::QuadratureRule1D;
use crate::real::{binomial, cis, from_usize, lit, ln_factorial, to_f64, Cplx, Real};

/// Multi-index `alpha` in `N^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|alpha| = sum alpha_j`.
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    /// All indices of order exactly `k` in lexicographic order.
    pub fn of_order(d: usize, k: usize) -> Vec<Self> {
        fn rec(d: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if d == 1 {
                prefix.push(k);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for first in (0..=k).rev() {
                prefix.push(first);
                rec(d - 1, k - first, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if d > 0 {
            rec(d, k, &mut Vec::with_capacity(d), &mut out);
        }
        out
    }

    /// All indices with `|alpha| <= n_max`, sorted by order.
    pub fn up_to(d: usize, n_max: usize) -> Vec<Self> {
        (0..=n_max).flat_map(|k| Self::of_order(d, k)).collect()
    }
}

/// Number of multi-indices of order `k` in dimension `d`.
pub fn multiplicity(k: usize, d: usize) -> usize {
    binomial(k + d - 1, k).round() as usize
}

/// Normalized Hermite function `h_k(t)`.
pub fn hermite_fn<T: Real>(k: usize, t: T) -> T {
    hermite_fns(k, t)[k]
}

/// `h_0(t), ..., h_kmax(t)` by the recurrence on normalized functions.
pub fn hermite_fns<T: Real>(kmax: usize, t: T) -> Vec<T> {
    let g = (-t * t * lit(0.5)).exp();
    let mut h = hermite_polys(kmax, t);
    h.iter_mut().for_each(|v| *v *= g);
    h
}

/// Polynomial parts `h_k(t) e^{t^2/2}` of the normalized Hermite functions.
pub fn hermite_polys<T: Real>(kmax: usize, t: T) -> Vec<T> {
    let mut out = Vec::with_capacity(kmax + 1);
    let mut prev = T::zero();
    let mut cur = T::PI().powf(lit(-0.25));
    out.push(cur);
    for k in 0..kmax {
        let kf = from_usize::<T>(k);
        let next = t * (lit::<T>(2.0) / (kf + T::one())).sqrt() * cur - (kf / (kf + T::one())).sqrt() * prev;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

fn check_positive<T: Real>(what: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { what, value: to_f64(v) })
    }
}

/// `Phi_alpha^lambda(xi) = lambda^{d/4} prod_j h_{alpha_j}(lambda^{1/2} xi_j)`.
pub fn multi_hermite<T: Real>(alpha: &MultiIndex, lam_abs: T, xi: &[T]) -> Result<T> {
    check_positive("|lambda|", lam_abs)?;
    if xi.len() != alpha.dim() {
        return Err(Error::DimensionMismatch {
            what: "multi-Hermite argument",
            expected: alpha.dim(),
            found: xi.len(),
        });
    }
    let s = lam_abs.sqrt();
    let scale = lam_abs.powf(lit(0.25));
    Ok(alpha.0.iter().zip(xi).map(|(&a, &x)| scale * hermite_fn(a, s * x)).product())
}

/// Generalized Laguerre polynomial `L_k^{(a)}(t)`.
pub fn laguerre_poly<T: Real>(k: usize, a: T, t: T) -> T {
    let mut prev = T::zero();
    let mut cur = T::one();
    for j in 0..k {
        let jf = from_usize::<T>(j);
        let next = ((lit::<T>(2.0) * jf + T::one() + a - t) * cur - (jf + a) * prev) / (jf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Laguerre function `phi_k^lambda(x) = L_k^{d-1}(lambda |x|^2 / 2) e^{-lambda |x|^2 / 4}`
/// on `R^{2d}`.
pub fn laguerre_fn<T: Real>(k: usize, lam_abs: T, x: &[T]) -> Result<T> {
    check_positive("|lambda|", lam_abs)?;
    if x.is_empty() || x.len() % 2 != 0 {
        return Err(Error::InvalidParameter("Laguerre argument must have even length".into()));
    }
    let d = x.len() / 2;
    let r2: T = x.iter().map(|&v| v * v).sum();
    Ok(laguerre_radial(k, d, lam_abs * r2))
}

/// `phi_k` as a function of `s = lambda |x|^2`.
pub fn laguerre_radial<T: Real>(k: usize, d: usize, s: T) -> T {
    let half = s * lit(0.5);
    laguerre_poly(k, from_usize::<T>(d - 1), half) * (-half * lit(0.5)).exp()
}

/// All `phi_0..phi_kmax` at the same `s = lambda |x|^2`.
pub fn laguerre_radials<T: Real>(kmax: usize, d: usize, s: T) -> Vec<T> {
    let half = s * lit(0.5);
    let a = from_usize::<T>(d - 1);
    let g = (-half * lit(0.5)).exp();
    let mut out = Vec::with_capacity(kmax + 1);
    let mut prev = T::zero();
    let mut cur = T::one();
    out.push(cur * g);
    for j in 0..kmax {
        let jf = from_usize::<T>(j);
        let next = ((lit::<T>(2.0) * jf + T::one() + a - half) * cur - (jf + a) * prev) / (jf + T::one());
        prev = cur;
        cur = next;
        out.push(cur * g);
    }
    out
}

/// Closed-form table of one-dimensional coefficients `M_ab(X, Y)` for
/// `a < rows`, `b < cols`, row-major.
///
/// With `t = (X^2 + Y^2) / 2`, `theta = atan2(Y, X)` and the normalized
/// Laguerre functions `l_b^{(n)}(t) = sqrt(b!/(b+n)!) t^{n/2} L_b^{(n)}(t) e^{-t/2}`:
/// `M_ab = e^{i n theta} l_b^{(n)}` for `a = b + n`, and
/// `M_ab = (-1)^n e^{-i n theta} l_a^{(n)}` for `b = a + n`.
pub fn coefficient_table_1d<T: Real>(rows: usize, cols: usize, x: T, y: T, out: &mut [Cplx<T>]) {
    debug_assert!(out.len() >= rows * cols);
    let t = (x * x + y * y) * lit(0.5);
    let theta = y.atan2(x);
    let ln_t = t.ln();
    let nmax = rows.max(cols);
    let mut ell = vec![T::zero(); nmax + 1];
    for n in 0..nmax {
        let nf = from_usize::<T>(n);
        let start = if n == 0 {
            (-t * lit(0.5)).exp()
        } else if t > T::zero() {
            (nf * lit(0.5) * ln_t - t * lit(0.5) - lit::<T>(0.5 * ln_factorial(n))).exp()
        } else {
            T::zero()
        };
        // Diagonal a - b = n (below) and b - a = n (above) share l^{(n)}.
        let below = if n < rows { (rows - n).min(cols) } else { 0 };
        let above = if n > 0 && n < cols { (cols - n).min(rows) } else { 0 };
        let len = below.max(above);
        if len == 0 {
            continue;
        }
        ell[0] = start;
        for b in 0..len.saturating_sub(1) {
            let bf = from_usize::<T>(b);
            let prev = if b == 0 { T::zero() } else { ell[b - 1] };
            ell[b + 1] = ((lit::<T>(2.0) * bf + T::one() + nf - t) * ell[b]
                - (bf * (bf + nf)).sqrt() * prev)
                / ((bf + T::one()) * (bf + nf + T::one())).sqrt();
        }
        let ph = cis(nf * theta);
        for (b, &l) in ell.iter().enumerate().take(below) {
            out[(b + n) * cols + b] = ph * l;
        }
        if above > 0 {
            let ph_up = ph.conj() * if n % 2 == 0 { T::one() } else { -T::one() };
            for (a, &l) in ell.iter().enumerate().take(above) {
                out[a * cols + a + n] = ph_up * l;
            }
        }
    }
}

/// One closed-form coefficient `M_ab(X, Y)`.
pub fn coefficient_1d<T: Real>(a: usize, b: usize, x: T, y: T) -> Cplx<T> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); (a + 1) * (b + 1)];
    coefficient_table_1d(a + 1, b + 1, x, y, &mut buf);
    buf[a * (b + 1) + b]
}

/// Gauss-Hermite evaluation of `M_ab(X, Y) = int e^{i(sY + XY/2)} h_a(s + X) h_b(s) ds`.
///
/// After `s = u - X/2` the integrand is `e^{iYu} h_a(u + X/2) h_b(u - X/2)`,
/// whose Gaussian factor is exactly `e^{-u^2 - X^2/4}`.
pub fn coefficient_1d_quadrature<T: Real>(
    a: usize,
    b: usize,
    x: T,
    y: T,
    rule: &QuadratureRule1D<T>,
) -> Cplx<T> {
    let half_x = x * lit(0.5);
    let damp = (-x * x * lit(0.25)).exp();
    let mut acc = Complex::new(T::zero(), T::zero());
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let pa = hermite_polys(a, u + half_x)[a];
        let pb = hermite_polys(b, u - half_x)[b];
        acc += cis(y * u) * (w * pa * pb);
    }
    acc * damp
}

/// Special Hermite function
/// `Phi_ab^lambda(x) = (2 pi)^{-d/2} lambda^{d/2} <pi_lambda(x, 0) Phi_a, Phi_b>`
/// on `R^{2d}` with coordinates `(x_1..x_d, y_1..y_d)`.
pub fn special_hermite<T: Real>(
    alpha: &MultiIndex,
    beta: &MultiIndex,
    lam_abs: T,
    x: &[T],
) -> Result<Cplx<T>> {
    check_positive("|lambda|", lam_abs)?;
    let d = alpha.dim();
    if beta.dim() != d || x.len() != 2 * d {
        return Err(Error::DimensionMismatch {
            what: "special Hermite argument",
            expected: 2 * d,
            found: x.len(),
        });
    }
    let s = lam_abs.sqrt();
    let pref = (lam_abs / T::TAU()).powf(from_usize::<T>(d) * lit(0.5));
    let mut v = Complex::new(pref, T::zero());
    for j in 0..d {
        v *= coefficient_1d(alpha.0[j], beta.0[j], s * x[j], s * x[d + j]);
    }
    Ok(v)
}

/// Gauss-Hermite evaluator for matrix coefficients `E_ab^lambda` of an
/// arbitrary H-type group.
#[derive(Clone, Debug)]
pub struct CoefficientQuadrature<T: Real> {
    rule: QuadratureRule1D<T>,
}

/// Default node count: exact for the polynomial part up to index ~150 and
/// converged for the oscillatory factor up to `|Y| ~ 15`.
pub const DEFAULT_COEFFICIENT_NODES: usize = 160;

impl<T: Real> CoefficientQuadrature<T> {
    pub fn new(nodes: usize) -> Result<Self> {
        Ok(Self {
            rule: QuadratureRule1D::gauss_hermite_weighted(nodes)?,
        })
    }

    /// `E_ab^lambda(p) = <pi_lambda(p) Phi_a, Phi_b>`, evaluated on the
    /// Heisenberg image `alpha_lambda(p)`.
    pub fn matrix_coefficient(
        &self,
        alpha: &MultiIndex,
        beta: &MultiIndex,
        lam: &DualFrequency<T>,
        p: &GroupPoint<T>,
        s: &HTypeStructure<T>,
    ) -> Result<Cplx<T>> {
        check_indices(alpha, beta, s)?;
        let q = s.to_heisenberg(p, lam)?;
        let rho = lam.rho();
        let sr = rho.sqrt();
        let d = s.d();
        let mut v = cis(rho * q.z[0]);
        for j in 0..d {
            v *= coefficient_1d_quadrature(alpha.0[j], beta.0[j], sr * q.x[j], sr * q.x[d + j], &self.rule);
        }
        Ok(v)
    }
}

fn check_indices<T: Real>(alpha: &MultiIndex, beta: &MultiIndex, s: &HTypeStructure<T>) -> Result<()> {
    for idx in [alpha, beta] {
        if idx.dim() != s.d() {
            return Err(Error::DimensionMismatch {
                what: "multi-index length",
                expected: s.d(),
                found: idx.dim(),
            });
        }
    }
    Ok(())
}

/// Quadrature evaluation of `E_ab^lambda(p)` with the default rule.
pub fn matrix_coefficient<T: Real>(
    alpha: &MultiIndex,
    beta: &MultiIndex,
    lam: &DualFrequency<T>,
    p: &GroupPoint<T>,
    s: &HTypeStructure<T>,
) -> Result<Cplx<T>> {
    CoefficientQuadrature::new(DEFAULT_COEFFICIENT_NODES)?.matrix_coefficient(alpha, beta, lam, p, s)
}

/// Closed-form evaluation of `E_ab^lambda(p)`.
pub fn matrix_coefficient_closed<T: Real>(
    alpha: &MultiIndex,
    beta: &MultiIndex,
    lam: &DualFrequency<T>,
    p: &GroupPoint<T>,
    s: &HTypeStructure<T>,
) -> Result<Cplx<T>> {
    check_indices(alpha, beta, s)?;
    let q = s.to_heisenberg(p, lam)?;
    let rho = lam.rho();
    let sr = rho.sqrt();
    let d = s.d();
    let mut v = cis(rho * q.z[0]);
    for j in 0..d {
        v *= coefficient_1d(alpha.0[j], beta.0[j], sr * q.x[j], sr * q.x[d + j]);
    }
    Ok(v)
}

/// `e_k^lambda(p) = sum_{|alpha| = k} E_aa^lambda(p)`.
pub fn e_k_diag<T: Real>(
    k: usize,
    lam: &DualFrequency<T>,
    p: &GroupPoint<T>,
    s: &HTypeStructure<T>,
) -> Result<Cplx<T>> {
    let q = s.to_heisenberg(p, lam)?;
    let rho = lam.rho();
    let sr = rho.sqrt();
    let d = s.d();
    let tables: Vec<Vec<Cplx<T>>> = (0..d)
        .map(|j| {
            let mut t = vec![Complex::new(T::zero(), T::zero()); (k + 1) * (k + 1)];
            coefficient_table_1d(k + 1, k + 1, sr * q.x[j], sr * q.x[d + j], &mut t);
            t
        })
        .collect();
    let sum: Cplx<T> = MultiIndex::of_order(d, k)
        .iter()
        .map(|a| {
            a.0.iter()
                .enumerate()
                .fold(Complex::new(T::one(), T::zero()), |acc, (j, &aj)| acc * tables[j][aj * (k + 1) + aj])
        })
        .sum();
    Ok(sum * cis(rho * q.z[0]))
}

/// `e^{i lambda . z} phi_k^{|lambda|}(x)`, the radial form of [`e_k_diag`].
pub fn e_k_radial<T: Real>(k: usize, lam: &DualFrequency<T>, p: &GroupPoint<T>) -> Result<Cplx<T>> {
    let phi = laguerre_fn(k, lam.rho(), &p.x)?;
    Ok(cis(lam.dot(&p.z)) * phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hermite_values() {
        assert!((hermite_fn(0, 0.0f64) - PI.powf(-0.25)).abs() < 1e-15);
        assert!((hermite_fn(0, 0.0f64) - 0.75112554).abs() < 1e-8);
        assert_eq!(hermite_fn(1, 0.0f64), 0.0);
        let t = 0.7f64;
        let h2 = (4.0 * t * t - 2.0) / (8.0 * PI.sqrt()).sqrt() * (-t * t / 2.0).exp();
        assert!((hermite_fn(2, t) - h2).abs() < 1e-14);
    }

    #[test]
    fn hermite_25_normalized() {
        let rule = QuadratureRule1D::<f64>::gauss_hermite(200).unwrap();
        let n = rule.integrate(|t| hermite_fn(25, t).powi(2));
        assert!((n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(MultiIndex::of_order(2, 2).len(), 3);
        assert_eq!(multiplicity(2, 2), 3);
        assert_eq!(MultiIndex::up_to(1, 4).len(), 5);
        assert_eq!(MultiIndex::up_to(2, 3).len(), 10);
        assert!(MultiIndex::up_to(3, 4).windows(2).all(|w| w[0].order() <= w[1].order()));
    }

    #[test]
    fn multi_hermite_origin_and_domain() {
        let v = multi_hermite(&MultiIndex::zero(1), 1.0, &[0.0]).unwrap();
        assert!((v - PI.powf(-0.25)).abs() < 1e-15);
        assert!(multi_hermite(&MultiIndex::zero(1), 0.0, &[0.0]).is_err());
        assert!(multi_hermite(&MultiIndex::zero(2), 1.0, &[0.0]).is_err());
    }

    #[test]
    fn laguerre_values() {
        assert_eq!(laguerre_fn(0, 2.0, &[0.0, 0.0]).unwrap(), 1.0);
        for (k, d) in [(3, 1), (2, 2), (4, 3)] {
            let v = laguerre_fn(k, 1.5, &vec![0.0; 2 * d]).unwrap();
            assert!((v - binomial(k + d - 1, k)).abs() < 1e-12);
        }
        let v: f64 = laguerre_fn(1, 1.0, &[1.0, 1.0]).unwrap();
        assert!(v.abs() < 1e-15);
        let all = laguerre_radials(6, 2, 1.3f64);
        for (k, &v) in all.iter().enumerate() {
            assert!((v - laguerre_radial(k, 2, 1.3)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let rule = QuadratureRule1D::<f64>::gauss_hermite_weighted(DEFAULT_COEFFICIENT_NODES).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.3, -1.1), (2.5, 1.7), (-3.0, 4.0), (0.0, 6.0)] {
            for a in 0..9 {
                for b in 0..9 {
                    let c = coefficient_1d(a, b, x, y);
                    let q = coefficient_1d_quadrature(a, b, x, y, &rule);
                    assert!((c - q).norm() < 1e-12, "a={a} b={b} x={x} y={y}: {c} vs {q}");
                }
            }
        }
    }

    #[test]
    fn ground_state_coefficient_is_gaussian() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let lam = DualFrequency::scalar(1.0).unwrap();
        for &(x, y) in &[(0.5, 0.2), (-1.0, 2.0), (3.0, -0.5)] {
            let p = GroupPoint::new(vec![x, y], vec![0.0]).unwrap();
            let e = matrix_coefficient(&MultiIndex::zero(1), &MultiIndex::zero(1), &lam, &p, &h).unwrap();
            let exact = (-(x * x + y * y) / 4.0).exp();
            assert!((e.re - exact).abs() < 1e-10 && e.im.abs() < 1e-10);
        }
    }

    #[test]
    fn e_k_forms_agree() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let q = HTypeStructure::<f64>::quaternionic(2).unwrap();
        let lam1 = DualFrequency::scalar(-1.7).unwrap();
        let p1 = GroupPoint::new(vec![0.4, -0.9], vec![0.3]).unwrap();
        let lam3 = DualFrequency::new(vec![0.3, -0.8, 0.5]).unwrap();
        let p3 = GroupPoint::new(vec![0.4, -0.9, 0.7, -0.2], vec![0.3, 0.1, -0.6]).unwrap();
        for k in 0..6 {
            let a = e_k_diag(k, &lam1, &p1, &h).unwrap();
            let b = e_k_radial(k, &lam1, &p1).unwrap();
            assert!((a - b).norm() < 1e-12, "k={k}");
            let a = e_k_diag(k, &lam3, &p3, &q).unwrap();
            let b = e_k_radial(k, &lam3, &p3).unwrap();
            assert!((a - b).norm() < 1e-12, "k={k}");
        }
        let e = GroupPoint::identity(2, 3);
        let v = e_k_diag(2, &lam3, &e, &q).unwrap();
        assert!((v.re - 3.0).abs() < 1e-14);
    }
}
