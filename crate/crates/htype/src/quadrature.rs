//! One-dimensional quadrature rules and the sphere rules used for the polar
//! decomposition of the vertical dual.
//!
//! Nodes and weights are always computed in `f64` and then cast.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    GaussLegendre,
    /// Gauss-Hermite with the weight `e^{-t^2}` folded into the weights.
    GaussHermite,
    Midpoint,
    Composite,
}

/// Nodes and positive weights; `exact_degree` is the polynomial degree
/// integrated exactly against the rule's native weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct QuadratureRule1D<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub exact_degree: usize,
    pub kind: RuleKind,
}

impl<T: Real> QuadratureRule1D<T> {
    fn from_f64(nodes: Vec<f64>, weights: Vec<f64>, exact_degree: usize, kind: RuleKind) -> Self {
        Self {
            nodes: nodes.into_iter().map(lit).collect(),
            weights: weights.into_iter().map(lit).collect(),
            exact_degree,
            kind,
        }
    }

    /// Gauss-Legendre rule with `n` nodes on `[a, b]`.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("rule needs at least one node".into()));
        }
        if !(b > a) {
            return Err(Error::InvalidParameter(format!("empty interval [{a}, {b}]")));
        }
        let (x, w) = gauss_legendre_unit(n);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        Ok(Self::from_f64(
            x.iter().map(|&t| c + h * t).collect(),
            w.iter().map(|&v| h * v).collect(),
            2 * n - 1,
            RuleKind::GaussLegendre,
        ))
    }

    /// Gauss-Legendre on each panel between consecutive breakpoints.
    pub fn composite_legendre(breaks: &[f64], n_per_panel: usize) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in breaks.windows(2) {
            if pair[1] <= pair[0] {
                continue;
            }
            let r = Self::gauss_legendre(n_per_panel, pair[0], pair[1])?;
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("composite rule has no panels".into()));
        }
        Ok(Self {
            nodes,
            weights,
            exact_degree: 2 * n_per_panel - 1,
            kind: RuleKind::Composite,
        })
    }

    /// Gauss-Hermite rule for `int f(t) dt`: nodes of the `e^{-t^2}` rule
    /// with weights multiplied by `e^{t^2}`.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("rule needs at least one node".into()));
        }
        let (x, w) = gauss_hermite_raw(n);
        Ok(Self::from_f64(
            x.clone(),
            w.iter().zip(&x).map(|(&wi, &xi)| wi * (xi * xi).exp()).collect(),
            2 * n - 1,
            RuleKind::GaussHermite,
        ))
    }

    /// Gauss-Hermite rule for `int f(t) e^{-t^2} dt` (weight not folded in).
    pub fn gauss_hermite_weighted(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("rule needs at least one node".into()));
        }
        let (x, w) = gauss_hermite_raw(n);
        Ok(Self::from_f64(x, w, 2 * n - 1, RuleKind::GaussHermite))
    }

    /// Midpoint rule with `n` cells on `[a, b]`.
    pub fn midpoint(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(Error::InvalidParameter("midpoint rule needs n > 0 and a < b".into()));
        }
        let h = (b - a) / n as f64;
        Ok(Self::from_f64(
            (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
            vec![h; n],
            1,
            RuleKind::Midpoint,
        ))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// CSV dump `index,node,weight` for audit.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,node,weight\n");
        for (i, (x, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let _ = writeln!(s, "{i},{:.17e},{:.17e}", to_f64(*x), to_f64(*w));
        }
        s
    }
}

fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        if n == 1 {
            x[0] = 0.0;
            w[0] = 2.0;
            break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton on
/// normalized Hermite polynomials; weights from the derivative.
fn gauss_hermite_raw(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut diag = vec![0.0; n];
    let mut off: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { (k as f64 / 2.0).sqrt() }).collect();
    tridiagonal_eigenvalues(&mut diag, &mut off);
    diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut x = diag;
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = x[i];
        let mut pp = 1.0;
        for _ in 0..3 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            z -= p1 / pp;
        }
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let (a, b) = (x[n - 1 - i], -x[i]);
        let s = 0.5 * (a + b);
        x[i] = -s;
        x[n - 1 - i] = s;
        let ws = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = ws;
        w[n - 1 - i] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Implicit QL eigenvalues of a symmetric tridiagonal matrix; `off[k]`
/// couples entries `k - 1` and `k` (`off[0]` unused). Eigenvalues are left
/// in `diag`.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    if n < 2 {
        return;
    }
    let e = off;
    e.rotate_left(1);
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Quadrature on the unit sphere `S^{m-1}` of the vertical dual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SphereRule<T: Real> {
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> SphereRule<T> {
    /// `S^0 = {+1, -1}` with counting measure, a uniform rule on the circle,
    /// or a Gauss-Legendre (in `cos theta`) times uniform (in `phi`) product
    /// rule on `S^2` with `resolution` latitudes and `2 * resolution`
    /// longitudes.
    pub fn new(m: usize, resolution: usize) -> Result<Self> {
        let res = resolution.max(1);
        let (points, weights): (Vec<Vec<f64>>, Vec<f64>) = match m {
            1 => (vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0]),
            2 => {
                let n = 2 * res;
                (0..n)
                    .map(|i| {
                        let a = 2.0 * PI * i as f64 / n as f64;
                        (vec![a.cos(), a.sin()], 2.0 * PI / n as f64)
                    })
                    .unzip()
            }
            3 => {
                let (c, wc) = gauss_legendre_unit(res);
                let nphi = 2 * res;
                let mut pts = Vec::new();
                let mut ws = Vec::new();
                for (ci, wi) in c.iter().zip(&wc) {
                    let s = (1.0 - ci * ci).max(0.0).sqrt();
                    for k in 0..nphi {
                        let a = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                        pts.push(vec![s * a.cos(), s * a.sin(), *ci]);
                        ws.push(wi * 2.0 * PI / nphi as f64);
                    }
                }
                (pts, ws)
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "sphere rules are provided for m <= 3, got m = {m}"
                )))
            }
        };
        Ok(Self {
            points: points.into_iter().map(|p| p.into_iter().map(lit).collect()).collect(),
            weights: weights.into_iter().map(lit).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total measure (`2`, `2 pi`, `4 pi`).
    pub fn volume(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

/// Surface measure of `S^{m-1}`.
pub fn sphere_volume(m: usize) -> f64 {
    match m {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            let half = m as f64 / 2.0;
            2.0 * PI.powf(half) / gamma_half_integer(m)
        }
    }
}

/// `Gamma(m / 2)` for positive integer `m`.
fn gamma_half_integer(m: usize) -> f64 {
    if m % 2 == 0 {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a + 1e-9 < m as f64 / 2.0 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = QuadratureRule1D::<f64>::gauss_legendre(5, -1.0, 2.0).unwrap();
        let exact = (2.0f64.powi(10) - 1.0) / 10.0;
        assert!((r.integrate(|x| x.powi(9)) - exact).abs() < 1e-12);
        let one = QuadratureRule1D::<f64>::gauss_legendre(1, 0.0, 1.0).unwrap();
        assert!((one.nodes[0] - 0.5).abs() < 1e-15 && (one.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hermite_integrates_gaussian_moments() {
        for n in [10, 60, 200] {
            let r = QuadratureRule1D::<f64>::gauss_hermite(n).unwrap();
            let m0 = r.integrate(|t| (-t * t).exp());
            let m2 = r.integrate(|t| t * t * (-t * t).exp());
            assert!((m0 - PI.sqrt()).abs() < 1e-12, "n={n}");
            assert!((m2 - 0.5 * PI.sqrt()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn sphere_volumes() {
        assert_eq!(SphereRule::<f64>::new(1, 0).unwrap().volume(), 2.0);
        assert!((SphereRule::<f64>::new(2, 8).unwrap().volume() - 2.0 * PI).abs() < 1e-12);
        let s2 = SphereRule::<f64>::new(3, 6).unwrap();
        assert!((s2.volume() - 4.0 * PI).abs() < 1e-12);
        let z2: f64 = s2.points.iter().zip(&s2.weights).map(|(p, w)| w * p[2] * p[2]).sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((sphere_volume(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!(SphereRule::<f64>::new(4, 3).is_err());
    }

    #[test]
    fn csv_dump_has_header() {
        let r = QuadratureRule1D::<f64>::midpoint(3, 0.0, 1.0).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("index,node,weight\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
