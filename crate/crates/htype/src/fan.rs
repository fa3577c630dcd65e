//! The Heisenberg fan `mu = |lambda|(2k + d)`: fan measures, the slice
//! kernels `kappa_mu`, the fan kernel `kappa_Sigma_psi`, spectral slices
//! `P_mu`, restriction/extension and the `TT*` identity.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::CoefficientBlock;
use crate::error::{Error, Result};
use crate::gft::{SpectralCoeffs, SpectralNode};
use crate::grid::{SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};
use crate::group::{DualFrequency, HTypeStructure};
use crate::linalg::Mat;
use crate::quadrature::{sphere_volume, QuadratureRule1D, SphereRule};
use crate::real::{binomial, cis, from_usize, lit, to_f64, Cplx, Real};
use crate::special::{laguerre_radial, MultiIndex};
use crate::twisted::{convolve_laguerre, TwistedField};

/// Smooth bump `psi(mu) = exp(1 - 1/(1 - s^2))`, `s = (2 mu - a - b)/(b - a)`,
/// supported in `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub a: f64,
    pub b: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0 }
    }
}

impl CutoffSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let c = Self { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > self.a) {
            return Err(Error::InvalidParameter(format!(
                "cutoff support needs 0 < a < b, got ({}, {})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn eval(&self, mu: f64) -> f64 {
        let s = (2.0 * mu - self.a - self.b) / (self.b - self.a);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp().clamp(0.0, 1.0)
        }
    }

    /// Gauss-Legendre rule on the support.
    pub fn rule(&self, n: usize) -> Result<QuadratureRule1D<f64>> {
        QuadratureRule1D::gauss_legendre(n, self.a, self.b)
    }

    /// `int psi(mu) mu^power d mu` (adaptive enough for the bump: composite rule).
    pub fn weighted_l1(&self, power: f64) -> f64 {
        let breaks: Vec<f64> = (0..=64).map(|i| self.a + (self.b - self.a) * i as f64 / 64.0).collect();
        let rule = QuadratureRule1D::<f64>::composite_legendre(&breaks, 12).expect("valid panels");
        rule.integrate(|mu| self.eval(mu) * mu.powf(power))
    }
}

/// Discretization of the fan used by restriction, extension and the kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FanSpec {
    pub k_max: usize,
    /// Gauss-Legendre nodes in `mu` on the cutoff support.
    pub mu_nodes: usize,
    pub sphere_resolution: usize,
    /// Columns `|b| <= k + col_band` kept at level `k`.
    pub col_band: usize,
}

impl Default for FanSpec {
    fn default() -> Self {
        Self {
            k_max: 24,
            mu_nodes: 48,
            sphere_resolution: 4,
            col_band: 40,
        }
    }
}

/// One point of the discretized fan with its `d Sigma` weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct FanNode<T: Real> {
    pub k: usize,
    pub lambda: DualFrequency<T>,
    pub mu: T,
    pub weight: T,
}

/// Fan points over a given `lambda` quadrature: every node at every level,
/// weighted by `(2 pi)^{-d-m} |lambda|^d` times the node weight.
pub fn fan_nodes<T: Real>(lam_nodes: &[SpectralNode<T>], k_max: usize, d: usize) -> Vec<FanNode<T>> {
    lam_nodes
        .iter()
        .flat_map(|n| {
            (0..=k_max).map(move |k| FanNode {
                k,
                lambda: n.lambda.clone(),
                mu: n.lambda.rho() * from_usize::<T>(2 * k + d),
                weight: n.plancherel_weight(d),
            })
        })
        .collect()
}

/// Level-`k` fan points induced from a `mu` rule on the cutoff support:
/// `lambda = mu omega / (2k + d)` with weight
/// `(2 pi)^{-d-m} mu^{d+m-1} (2k+d)^{-d-m} w_mu w_omega`.
pub fn level_nodes<T: Real>(psi: &CutoffSpec, k: usize, d: usize, m: usize, spec: &FanSpec) -> Result<Vec<FanNode<T>>> {
    let rule = psi.rule(spec.mu_nodes)?;
    let sphere = SphereRule::<f64>::new(m, spec.sphere_resolution)?;
    let level = (2 * k + d) as f64;
    let norm = (2.0 * std::f64::consts::PI).powi(-((d + m) as i32)) * level.powi(-((d + m) as i32));
    let mut out = Vec::with_capacity(rule.len() * sphere.len());
    for (&mu, &wm) in rule.nodes.iter().zip(&rule.weights) {
        for (omega, &wo) in sphere.points.iter().zip(&sphere.weights) {
            let lam: Vec<T> = omega.iter().map(|&o| lit(mu * o / level)).collect();
            out.push(FanNode {
                k,
                lambda: DualFrequency::new(lam)?,
                mu: lit(mu),
                weight: lit(norm * mu.powi((d + m) as i32 - 1) * wm * wo),
            });
        }
    }
    Ok(out)
}

/// Blocks `Theta(lambda; a, b)` with `|a| = k` at the nodes of level `k`.
#[derive(Clone, Debug)]
pub struct FanLevel<T: Real> {
    pub k: usize,
    pub nodes: Vec<FanNode<T>>,
    pub block: CoefficientBlock,
    /// Node-major, each node a row-major `rows x cols` block.
    pub data: Vec<Cplx<T>>,
}

impl<T: Real> FanLevel<T> {
    pub fn block_len(&self) -> usize {
        self.block.len()
    }

    pub fn node_block(&self, i: usize) -> &[Cplx<T>] {
        let b = self.block_len();
        &self.data[i * b..(i + 1) * b]
    }
}

/// Spectral data restricted to the fan.
#[derive(Clone, Debug)]
pub struct FanData<T: Real> {
    pub d: usize,
    pub m: usize,
    pub levels: Vec<FanLevel<T>>,
}

impl<T: Real> FanData<T> {
    /// Zero data on the induced level grids.
    pub fn zeros(psi: &CutoffSpec, d: usize, m: usize, spec: &FanSpec) -> Result<Self> {
        let levels = (0..=spec.k_max)
            .map(|k| {
                let nodes = level_nodes(psi, k, d, m, spec)?;
                let block = CoefficientBlock::new(MultiIndex::of_order(d, k), MultiIndex::up_to(d, k + spec.col_band));
                let data = vec![Complex::new(T::zero(), T::zero()); nodes.len() * block.len()];
                Ok(FanLevel { k, nodes, block, data })
            })
            .collect::<Result<_>>()?;
        Ok(Self { d, m, levels })
    }

    /// Pullback `Theta = theta o pr` of Fourier data onto the fan over the
    /// same `lambda` nodes (all columns kept).
    pub fn pullback(theta: &SpectralCoeffs<T>) -> Self {
        let d = theta.d();
        let idx = theta.indices();
        let n = idx.len();
        let levels = (0..=theta.n_max())
            .map(|k| {
                let rows: Vec<usize> = (0..n).filter(|&r| idx[r].order() == k).collect();
                let block = CoefficientBlock::new(rows.iter().map(|&r| idx[r].clone()).collect(), idx.to_vec());
                let nodes: Vec<FanNode<T>> = fan_nodes(&theta.nodes, 0, d)
                    .into_iter()
                    .map(|mut f| {
                        f.k = k;
                        f.mu = f.lambda.rho() * from_usize::<T>(2 * k + d);
                        f
                    })
                    .collect();
                let mut data = Vec::with_capacity(nodes.len() * block.len());
                for i in 0..nodes.len() {
                    let b = theta.node_block(i);
                    for &r in &rows {
                        data.extend_from_slice(&b[r * n..(r + 1) * n]);
                    }
                }
                FanLevel { k, nodes, block, data }
            })
            .collect();
        Self { d, m: theta.m(), levels }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        let ok = self.levels.len() == other.levels.len()
            && self
                .levels
                .iter()
                .zip(&other.levels)
                .all(|(a, b)| a.nodes == b.nodes && a.data.len() == b.data.len());
        if ok {
            Ok(())
        } else {
            Err(Error::GridMismatch("fan data on different discretizations".into()))
        }
    }

    /// `<Theta, Xi>` in `L^2(d Sigma_psi)`; `psi = None` is the unweighted fan measure.
    pub fn inner(&self, other: &Self, psi: Option<&CutoffSpec>) -> Result<Cplx<T>> {
        self.same_shape(other)?;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (a, b) in self.levels.iter().zip(&other.levels) {
            for (i, node) in a.nodes.iter().enumerate() {
                let cut = psi.map_or(T::one(), |p| lit(p.eval(to_f64(node.mu))));
                let s: Cplx<T> = a.node_block(i).iter().zip(b.node_block(i)).map(|(x, y)| x * y.conj()).sum();
                acc += s * (node.weight * cut);
            }
        }
        Ok(acc)
    }

    pub fn norm(&self, psi: Option<&CutoffSpec>) -> T {
        self.inner(self, psi).map(|c| c.re.max(T::zero()).sqrt()).unwrap_or(T::zero())
    }
}

/// `<d Sigma_psi, Theta> = sum_levels sum_nodes w psi(mu) sum_a Theta(a, a)`.
pub fn integrate_fan<T: Real>(theta: &FanData<T>, psi: &CutoffSpec) -> Cplx<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for lvl in &theta.levels {
        let cols = lvl.block.cols();
        let diag: Vec<(usize, usize)> = lvl
            .block
            .rows()
            .iter()
            .enumerate()
            .filter_map(|(r, a)| cols.iter().position(|b| b == a).map(|c| (r, c)))
            .collect();
        let nc = cols.len();
        for (i, node) in lvl.nodes.iter().enumerate() {
            let blk = lvl.node_block(i);
            let tr: Cplx<T> = diag.iter().map(|&(r, c)| blk[r * nc + c]).sum();
            acc += tr * (node.weight * lit::<T>(psi.eval(to_f64(node.mu))));
        }
    }
    acc
}

/// `sum_s w_s e^{-i mu t_s} f(t_s)`.
pub fn time_transform<T: Real>(f: &SpaceTimeField<T>, mu: T) -> SpaceField<T> {
    let n = f.slice_len();
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    for (ti, (&t, &w)) in f.times.times.iter().zip(&f.times.weights).enumerate() {
        let ph = cis(-mu * t) * w;
        for (o, v) in out.iter_mut().zip(f.time_slice_data(ti)) {
            *o += v * ph;
        }
    }
    SpaceField { grid: f.grid, data: out }
}

/// `sum_z g(x, z) e^{i lam . z} h_z^m`.
fn vertical_sum<T: Real>(g: &SpaceField<T>, lam: &DualFrequency<T>) -> Vec<Cplx<T>> {
    let nx = g.n_horizontal();
    let hz = g.grid.vertical.cell_volume();
    let mut out = vec![Complex::new(T::zero(), T::zero()); nx];
    for zi in 0..g.grid.vertical.len() {
        let ph = cis(lam.dot(&g.grid.vertical.point(zi))) * hz;
        for (o, v) in out.iter_mut().zip(g.slice(zi)) {
            *o += v * ph;
        }
    }
    out
}

/// Basis values `M^lambda_ab(x)` of a level block at every grid point, point-major.
fn level_table<T: Real>(block: &CoefficientBlock, lam: &DualFrequency<T>, rotation_t: &Mat<T>, grid: &SpaceGrid<T>) -> Vec<Cplx<T>> {
    let bl = block.len();
    let sr = lam.rho().sqrt();
    let mut scratch = block.scratch::<T>();
    let mut out = vec![Complex::new(T::zero(), T::zero()); bl * grid.horizontal.len()];
    for (xi, chunk) in out.chunks_mut(bl).enumerate() {
        let y = rotation_t.matvec(&grid.horizontal.point(xi));
        block.eval(sr, &y, &mut scratch, chunk);
    }
    out
}

/// `R_Sigma f`: the space-time Fourier transform of `f` sampled on the fan.
pub fn restrict<T: Real>(
    f: &SpaceTimeField<T>,
    structure: &HTypeStructure<T>,
    psi: &CutoffSpec,
    spec: &FanSpec,
) -> Result<FanData<T>> {
    let (d, m) = (structure.d(), structure.m());
    check_grid(&f.grid, structure)?;
    let mut out = FanData::zeros(psi, d, m, spec)?;
    let rule = psi.rule(spec.mu_nodes)?;
    check_time_band(&f.times, psi)?;
    let transforms: Vec<SpaceField<T>> = rule.nodes.par_iter().map(|&mu| time_transform(f, lit(mu))).collect();
    let n_sphere = out.levels[0].nodes.len() / rule.len();
    let cell = f.grid.horizontal.cell_volume();
    for lvl in out.levels.iter_mut() {
        let bl = lvl.block.len();
        let blocks: Vec<Vec<Cplx<T>>> = lvl
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, node)| -> Result<Vec<Cplx<T>>> {
                let g = vertical_sum(&transforms[i / n_sphere], &node.lambda);
                let rt = structure.diagonalize_j(&node.lambda)?.transpose();
                let table = level_table(&lvl.block, &node.lambda, &rt, &f.grid);
                let mut acc = vec![Complex::new(T::zero(), T::zero()); bl];
                for (gv, row) in g.iter().zip(table.chunks(bl)) {
                    let gv = gv * cell;
                    for (a, mv) in acc.iter_mut().zip(row) {
                        *a += gv * mv;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        lvl.data = blocks.concat();
    }
    Ok(out)
}

fn check_grid<T: Real>(grid: &SpaceGrid<T>, structure: &HTypeStructure<T>) -> Result<()> {
    if grid.horizontal.d != structure.d() || grid.vertical.m != structure.m() {
        return Err(Error::GridMismatch("grid dimensions do not match the structure".into()));
    }
    Ok(())
}

/// The fan band must be resolvable by the time grid spacing.
fn check_time_band<T: Real>(times: &TimeGrid<T>, psi: &CutoffSpec) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let dt = (to_f64(times.times[times.len() - 1]) - to_f64(times.times[0])) / (times.len() - 1) as f64;
    let limit = std::f64::consts::PI / dt;
    if psi.b > limit {
        return Err(Error::OutOfBand {
            what: "fan frequency",
            value: psi.b,
            limit,
        });
    }
    Ok(())
}

/// `E_Sigma Theta(t, x, z) = sum w psi(mu) e^{i mu t} e^{-i lambda . z} sum_ab Theta conj(M_ab(x))`.
pub fn extend<T: Real>(
    theta: &FanData<T>,
    psi: &CutoffSpec,
    structure: &HTypeStructure<T>,
    grid: &SpaceGrid<T>,
    times: &TimeGrid<T>,
) -> Result<SpaceTimeField<T>> {
    check_grid(grid, structure)?;
    let nx = grid.horizontal.len();
    let nz = grid.vertical.len();
    let zero = Complex::new(T::zero(), T::zero());
    // Group nodes by mu so the time factor is applied once per distinct mu.
    let mut by_mu: Vec<(T, Vec<Cplx<T>>)> = Vec::new();
    for lvl in &theta.levels {
        let bl = lvl.block.len();
        let parts: Vec<(T, Vec<Cplx<T>>)> = lvl
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, node)| -> Result<(T, Vec<Cplx<T>>)> {
                let rt = structure.diagonalize_j(&node.lambda)?.transpose();
                let table = level_table(&lvl.block, &node.lambda, &rt, grid);
                let blk = lvl.node_block(i);
                let g: Vec<Cplx<T>> = table.chunks(bl).map(|row| row.iter().zip(blk).map(|(mv, th)| th * mv.conj()).sum()).collect();
                let w = node.weight * lit::<T>(psi.eval(to_f64(node.mu)));
                let mut field = vec![zero; nz * nx];
                for zi in 0..nz {
                    let ph = cis(-node.lambda.dot(&grid.vertical.point(zi))) * w;
                    for (o, gv) in field[zi * nx..(zi + 1) * nx].iter_mut().zip(&g) {
                        *o = gv * ph;
                    }
                }
                Ok((node.mu, field))
            })
            .collect::<Result<_>>()?;
        for (mu, field) in parts {
            match by_mu.iter_mut().find(|(m, _)| (*m - mu).abs() <= lit::<T>(1e-14) * mu) {
                Some((_, acc)) => acc.iter_mut().zip(&field).for_each(|(a, b)| *a += b),
                None => by_mu.push((mu, field)),
            }
        }
    }
    let slices: Vec<Vec<Cplx<T>>> = times
        .times
        .par_iter()
        .map(|&t| {
            let mut s = vec![zero; nz * nx];
            for (mu, field) in &by_mu {
                let ph = cis(*mu * t);
                s.iter_mut().zip(field).for_each(|(a, b)| *a += b * ph);
            }
            s
        })
        .collect();
    Ok(SpaceTimeField {
        grid: *grid,
        times: times.clone(),
        data: slices.concat(),
    })
}

/// Majorant of the truncated `k`-sum of `kappa_mu`:
/// `vol(S) mu^{d+m-1} (2 pi)^{-d-m} sum_{k > K} binom(k+d-1, k) (2k+d)^{-d-m}`,
/// bounded through `binom <= (2k+d)^{d-1} / (2^{d-1} (d-1)!)` by an integral.
pub fn kappa_tail_bound(mu: f64, d: usize, m: usize, k_max: usize) -> f64 {
    let fact: f64 = (1..d).map(|j| j as f64).product();
    let c = sphere_volume(m) * mu.powi((d + m) as i32 - 1) * (2.0 * std::f64::consts::PI).powi(-((d + m) as i32))
        / (2f64.powi(d as i32 - 1) * fact);
    c * (2.0 * k_max as f64 + d as f64).powi(-(m as i32)) / (2.0 * m as f64)
}

/// `sum_k binom(k+d-1, k) (2k+d)^{-d-m}`, summed until the terms are negligible.
pub fn multiplicity_series(d: usize, m: usize) -> f64 {
    // Partial sum plus the Euler-Maclaurin tail of the asymptotic power law.
    let k_cut = 200_000usize;
    let mut s = 0.0;
    for k in (0..=k_cut).rev() {
        s += binomial(k + d - 1, k) * (2.0 * k as f64 + d as f64).powi(-((d + m) as i32));
    }
    let fact: f64 = (1..d).map(|j| j as f64).product();
    let kc = 2.0 * k_cut as f64 + d as f64;
    s + kc.powi(-(m as i32)) / (2.0 * m as f64 * 2f64.powi(d as i32 - 1) * fact)
}

/// Explicit bound `vol(S) mu^{d+m-1} (2 pi)^{-d-m} ((d-1)!)^{-1} sum_k (k+d-1)!/(k! (2k+d)^{d+m})` on `|kappa_mu|`.
pub fn kappa_mu_bound(mu: f64, d: usize, m: usize) -> f64 {
    sphere_volume(m) * mu.powi((d + m) as i32 - 1) * (2.0 * std::f64::consts::PI).powi(-((d + m) as i32)) * multiplicity_series(d, m)
}

/// Explicit bound on `sup |kappa_Sigma_psi|` (the `mu^{d+m-1} psi` mass times the series).
pub fn kappa_sigma_bound(psi: &CutoffSpec, d: usize, m: usize) -> f64 {
    sphere_volume(m) * psi.weighted_l1((d + m) as f64 - 1.0) * (2.0 * std::f64::consts::PI).powi(-((d + m) as i32)) * multiplicity_series(d, m)
}

/// Kernel values together with the truncation report.
#[derive(Clone, Debug)]
pub struct KernelValues<T: Real> {
    pub values: Vec<Cplx<T>>,
    pub tail_bound: f64,
    /// `tail_bound > 1e-6 * max |value|`.
    pub truncation_warning: bool,
}

/// `sum_omega w_omega e^{i rho omega . theta}`.
fn sphere_phase<T: Real>(sphere: &SphereRule<T>, rho: T, theta: &[T]) -> Cplx<T> {
    if sphere.points.first().is_some_and(|p| p.len() == 1) && sphere.len() == 2 {
        return Complex::new(lit::<T>(2.0) * (rho * theta[0]).cos(), T::zero());
    }
    sphere
        .points
        .iter()
        .zip(&sphere.weights)
        .map(|(w, &wt)| {
            let dot: T = w.iter().zip(theta).map(|(a, b)| *a * *b).sum();
            cis(rho * dot) * wt
        })
        .sum()
}

/// `kappa_mu(x, z) = mu^{d+m-1} (2 pi)^{-d-m} sum_{k <= K} (2k+d)^{-d-m} int_S e_k^{mu omega/(2k+d)}(x, z) d omega`.
pub fn kappa_mu<T: Real>(mu: T, pts: &[(Vec<T>, Vec<T>)], d: usize, m: usize, k_max: usize, sphere_resolution: usize) -> Result<KernelValues<T>> {
    if mu <= T::zero() {
        return Err(Error::NonPositive {
            what: "mu",
            value: to_f64(mu),
        });
    }
    let sphere = SphereRule::<T>::new(m, sphere_resolution)?;
    let pref = mu.powi((d + m) as i32 - 1) / T::TAU().powi((d + m) as i32);
    let values: Vec<Cplx<T>> = pts
        .par_iter()
        .map(|(x, z)| {
            let r2: T = x.iter().map(|v| *v * *v).sum();
            (0..=k_max)
                .map(|k| {
                    let level = from_usize::<T>(2 * k + d);
                    let rho = mu / level;
                    sphere_phase(&sphere, rho, z) * (laguerre_radial(k, d, rho * r2) * level.powi(-((d + m) as i32)))
                })
                .sum::<Cplx<T>>()
                * pref
        })
        .collect();
    let tail_bound = kappa_tail_bound(to_f64(mu), d, m, k_max);
    let top = values.iter().fold(0.0f64, |a, v| a.max(to_f64(v.norm())));
    Ok(KernelValues {
        values,
        tail_bound,
        truncation_warning: tail_bound > 1e-6 * top,
    })
}

/// Samples of a kernel on a space-time grid.
#[derive(Clone, Debug)]
pub struct KernelField<T: Real> {
    pub field: SpaceTimeField<T>,
    pub tail_bound: f64,
    /// Largest disagreement between the two computation paths.
    pub path_discrepancy: f64,
}

impl<T: Real> KernelField<T> {
    pub fn sup_norm(&self) -> T {
        self.field.data.iter().fold(T::zero(), |a, v| a.max(v.norm()))
    }

    /// CSV with header `t,x,z,re,im`; `x` is `|x|` (the kernels are radial
    /// in `x`) and `z` is the first vertical coordinate.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,z,re,im\n");
        let xs = self.field.grid.horizontal.points();
        let zs = self.field.grid.vertical.points();
        let nx = xs.len();
        for (ti, &t) in self.field.times.times.iter().enumerate() {
            let slice = self.field.time_slice_data(ti);
            for (zi, z) in zs.iter().enumerate() {
                for (xi, x) in xs.iter().enumerate() {
                    let r = x.iter().map(|v| to_f64(*v).powi(2)).sum::<f64>().sqrt();
                    let v = slice[zi * nx + xi];
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        fmt_num(to_f64(t)),
                        fmt_num(r),
                        fmt_num(to_f64(z[0])),
                        fmt_num(to_f64(v.re)),
                        fmt_num(to_f64(v.im))
                    ));
                }
            }
        }
        s
    }
}

/// Decimal formatting with 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.11e}")
    }
}

/// Radial time-frequency weight of the fan kernel.
#[allow(clippy::too_many_arguments)]
fn fan_kernel_sum<T: Real>(
    psi: &CutoffSpec,
    t: T,
    r2: T,
    z: &[T],
    d: usize,
    m: usize,
    k_max: usize,
    mu_rule: &QuadratureRule1D<f64>,
    sphere: &SphereRule<T>,
    weight: impl Fn(f64) -> f64,
) -> Cplx<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (&mu, &wm) in mu_rule.nodes.iter().zip(&mu_rule.weights) {
        let p = psi.eval(mu);
        if p == 0.0 {
            continue;
        }
        let mut inner = Complex::new(T::zero(), T::zero());
        for k in 0..=k_max {
            let level = from_usize::<T>(2 * k + d);
            let rho = lit::<T>(mu) / level;
            inner += sphere_phase(sphere, rho, z) * (laguerre_radial(k, d, rho * r2) * level.powi(-((d + m) as i32)));
        }
        acc += inner * cis(lit::<T>(mu) * t) * lit::<T>(wm * p * weight(mu));
    }
    acc / T::TAU().powi((d + m) as i32)
}

/// Largest accepted relative disagreement between the two kernel paths.
pub const KERNEL_PATH_TOLERANCE: f64 = 1e-4;

/// `kappa_Sigma_psi(t, x, z) = int e^{i mu t} kappa_mu(x, z) psi(mu) d mu` on a grid.
///
/// The direct `k`-sum (integrated per level in the rescaled variable) is
/// checked against the `mu`-integral of `kappa_mu`; disagreement above
/// [`KERNEL_PATH_TOLERANCE`] relative is an error.
pub fn kappa_sigma<T: Real>(
    psi: &CutoffSpec,
    structure: &HTypeStructure<T>,
    grid: &SpaceGrid<T>,
    times: &TimeGrid<T>,
    spec: &FanSpec,
) -> Result<KernelField<T>> {
    let (d, m) = (structure.d(), structure.m());
    let sphere = SphereRule::<T>::new(m, spec.sphere_resolution)?;
    let direct_rule = psi.rule(spec.mu_nodes + 16)?;
    let slice_rule = psi.rule(spec.mu_nodes)?;
    let xs = grid.horizontal.points();
    let zs = grid.vertical.points();
    let (nxs, nzs) = (xs.len(), zs.len());
    let pts: Vec<(usize, usize, usize)> = (0..times.len())
        .flat_map(|ti| (0..nzs).flat_map(move |zi| (0..nxs).map(move |xi| (ti, zi, xi))))
        .collect();
    let power = (d + m) as i32 - 1;
    let values: Vec<(Cplx<T>, Cplx<T>)> = pts
        .par_iter()
        .map(|&(ti, zi, xi)| {
            let r2: T = xs[xi].iter().map(|v| *v * *v).sum();
            let t = times.times[ti];
            let direct = fan_kernel_sum(psi, t, r2, &zs[zi], d, m, spec.k_max, &direct_rule, &sphere, |mu| mu.powi(power));
            // Slice path: kappa_mu at each mu node, then the mu integral.
            let mut sliced = Complex::new(T::zero(), T::zero());
            for (&mu, &wm) in slice_rule.nodes.iter().zip(&slice_rule.weights) {
                let p = psi.eval(mu);
                if p == 0.0 {
                    continue;
                }
                let kv = kappa_mu_point(lit(mu), r2, &zs[zi], d, m, spec.k_max, &sphere);
                sliced += kv * cis(lit::<T>(mu) * t) * lit::<T>(wm * p);
            }
            (direct, sliced)
        })
        .collect();
    let top = values.iter().fold(0.0f64, |a, (v, _)| a.max(to_f64(v.norm())));
    let disc = values.iter().fold(0.0f64, |a, (v, w)| a.max(to_f64((v - w).norm()))) / top.max(f64::MIN_POSITIVE);
    if disc > KERNEL_PATH_TOLERANCE {
        return Err(Error::Inconsistent(format!("kappa_Sigma paths disagree by {disc:.3e}")));
    }
    let tail = kappa_tail_bound(1.0, d, m, spec.k_max) * psi.weighted_l1(power as f64);
    Ok(KernelField {
        field: SpaceTimeField {
            grid: *grid,
            times: times.clone(),
            data: values.into_iter().map(|(v, _)| v).collect(),
        },
        tail_bound: tail,
        path_discrepancy: disc,
    })
}

fn kappa_mu_point<T: Real>(mu: T, r2: T, z: &[T], d: usize, m: usize, k_max: usize, sphere: &SphereRule<T>) -> Cplx<T> {
    let pref = mu.powi((d + m) as i32 - 1) / T::TAU().powi((d + m) as i32);
    (0..=k_max)
        .map(|k| {
            let level = from_usize::<T>(2 * k + d);
            let rho = mu / level;
            sphere_phase(sphere, rho, z) * (laguerre_radial(k, d, rho * r2) * level.powi(-((d + m) as i32)))
        })
        .sum::<Cplx<T>>()
        * pref
}

/// `kappa_Sigma_psi(t, 0, 0) = (2 pi)^{-d-m} vol(S) sum_k mult(k) (2k+d)^{-d-m} int e^{i mu t} psi mu^{d+m-1} d mu`.
pub fn kappa_sigma_origin(psi: &CutoffSpec, t: f64, d: usize, m: usize, k_max: usize) -> Complex<f64> {
    let breaks: Vec<f64> = (0..=64).map(|i| psi.a + (psi.b - psi.a) * i as f64 / 64.0).collect();
    let rule = QuadratureRule1D::<f64>::composite_legendre(&breaks, 12).expect("valid panels");
    let series: f64 = (0..=k_max).map(|k| binomial(k + d - 1, k) * (2.0 * k as f64 + d as f64).powi(-((d + m) as i32))).sum();
    let integral: Complex<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&mu, &w)| cis(mu * t) * (w * psi.eval(mu) * mu.powi((d + m) as i32 - 1)))
        .sum();
    integral * (series * sphere_volume(m) * (2.0 * std::f64::consts::PI).powi(-((d + m) as i32)))
}

/// `P_mu f = sum_k sum_omega mu^{d+m-1} (2 pi)^{-d-m} (2k+d)^{-d-m} w_omega
/// e^{i lambda . z} (f^lambda x_lambda phi_k)(x)`, `lambda = mu omega/(2k+d)`.
pub fn spectral_slice<T: Real>(f: &SpaceField<T>, mu: T, structure: &HTypeStructure<T>, k_max: usize, sphere_resolution: usize) -> Result<(SpaceField<T>, f64)> {
    if mu <= T::zero() {
        return Err(Error::NonPositive {
            what: "mu",
            value: to_f64(mu),
        });
    }
    check_grid(&f.grid, structure)?;
    let (d, m) = (structure.d(), structure.m());
    let sphere = SphereRule::<T>::new(m, sphere_resolution)?;
    let pref = mu.powi((d + m) as i32 - 1) / T::TAU().powi((d + m) as i32);
    let nx = f.n_horizontal();
    let nz = f.grid.vertical.len();
    let hz = f.grid.vertical.cell_volume();
    let terms: Vec<(usize, usize)> = (0..=k_max).flat_map(|k| (0..sphere.len()).map(move |s| (k, s))).collect();
    let parts: Vec<Vec<Cplx<T>>> = terms
        .par_iter()
        .map(|&(k, s)| -> Result<Vec<Cplx<T>>> {
            let level = from_usize::<T>(2 * k + d);
            let lam = DualFrequency::new(sphere.points[s].iter().map(|&o| o * mu / level).collect())?;
            // f^lambda(x) = sum_z f(x, z) e^{-i lambda . z}.
            let mut g = vec![Complex::new(T::zero(), T::zero()); nx];
            for zi in 0..nz {
                let ph = cis(-lam.dot(&f.grid.vertical.point(zi))) * hz;
                for (o, v) in g.iter_mut().zip(f.slice(zi)) {
                    *o += v * ph;
                }
            }
            let tf = TwistedField::new(f.grid.horizontal, lam.clone(), structure, g)?;
            let conv = convolve_laguerre(&[&tf], k)?.pop().expect("one field");
            let c = pref * level.powi(-((d + m) as i32)) * sphere.weights[s];
            let mut out = vec![Complex::new(T::zero(), T::zero()); nz * nx];
            for zi in 0..nz {
                let ph = cis(lam.dot(&f.grid.vertical.point(zi))) * c;
                for (o, v) in out[zi * nx..(zi + 1) * nx].iter_mut().zip(&conv.data) {
                    *o = v * ph;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut data = vec![Complex::new(T::zero(), T::zero()); nz * nx];
    for p in &parts {
        data.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    Ok((SpaceField { grid: f.grid, data }, kappa_tail_bound(to_f64(mu), d, m, k_max)))
}

/// Brute-force right group convolution `f * kappa_mu` at selected grid
/// points (flat `(z, x)` indices), used as the independent form of `P_mu`.
pub fn slice_by_group_convolution<T: Real>(
    f: &SpaceField<T>,
    mu: T,
    structure: &HTypeStructure<T>,
    k_max: usize,
    sphere_resolution: usize,
    targets: &[usize],
) -> Result<Vec<Cplx<T>>> {
    let (d, m) = (structure.d(), structure.m());
    let sphere = SphereRule::<T>::new(m, sphere_resolution)?;
    let grid = f.grid;
    let nx = grid.horizontal.len();
    let xs = grid.horizontal.points();
    let zs = grid.vertical.points();
    let cell = grid.cell_volume();
    Ok(targets
        .par_iter()
        .map(|&idx| {
            let (zi, xi) = (idx / nx, idx % nx);
            let (x, z) = (&xs[xi], &zs[zi]);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (wi, w) in xs.iter().enumerate() {
                let diff: Vec<T> = x.iter().zip(w).map(|(a, b)| *a - *b).collect();
                let r2: T = diff.iter().map(|v| *v * *v).sum();
                let shift: Vec<T> = structure.brackets().iter().map(|l| lit::<T>(0.5) * l.bilinear(w, x)).collect();
                for (zj, zeta) in zs.iter().enumerate() {
                    let v = f.data[zj * nx + wi];
                    if v.re == T::zero() && v.im == T::zero() {
                        continue;
                    }
                    let theta: Vec<T> = z.iter().zip(zeta).zip(&shift).map(|((a, b), s)| *a - *b - *s).collect();
                    acc += v * kappa_mu_point(mu, r2, &theta, d, m, k_max, &sphere);
                }
            }
            acc * cell
        })
        .collect())
}

/// Report of the three-way `TT*` comparison.
#[derive(Clone, Debug, Serialize)]
pub struct TtStarReport {
    /// Relative L2 discrepancy of `E R f` against the `P_mu` integral.
    pub extension_vs_slices: f64,
    /// Relative L2 discrepancies at the brute-force sample points.
    pub extension_vs_convolution: f64,
    pub slices_vs_convolution: f64,
    pub sup_discrepancy: f64,
    /// `(t, flat (z, x))` index of the largest pointwise discrepancy.
    pub worst_point: (usize, usize),
    pub sample_points: usize,
}

impl TtStarReport {
    pub fn max_pairwise(&self) -> f64 {
        self.extension_vs_slices.max(self.extension_vs_convolution).max(self.slices_vs_convolution)
    }
}

/// `int e^{i mu t} P_mu(f^mu) psi(mu) d mu` on the grid of `f`.
pub fn slice_integral<T: Real>(f: &SpaceTimeField<T>, psi: &CutoffSpec, structure: &HTypeStructure<T>, spec: &FanSpec) -> Result<SpaceTimeField<T>> {
    let rule = psi.rule(spec.mu_nodes)?;
    let mut acc: Vec<(T, SpaceField<T>)> = Vec::with_capacity(rule.len());
    for (&mu, &w) in rule.nodes.iter().zip(&rule.weights) {
        let p = psi.eval(mu);
        let fm = time_transform(f, lit(mu));
        let (slice, _) = spectral_slice(&fm, lit(mu), structure, spec.k_max, spec.sphere_resolution)?;
        acc.push((lit(mu), slice.scale(Complex::new(lit(w * p), T::zero()))));
    }
    let n = f.slice_len();
    let mut data = Vec::with_capacity(n * f.times.len());
    for &t in &f.times.times {
        let mut s = vec![Complex::new(T::zero(), T::zero()); n];
        for (mu, field) in &acc {
            let ph = cis(*mu * t);
            s.iter_mut().zip(&field.data).for_each(|(a, b)| *a += b * ph);
        }
        data.extend(s);
    }
    Ok(SpaceTimeField {
        grid: f.grid,
        times: f.times.clone(),
        data,
    })
}

/// Brute-force `f *_G kappa_Sigma_psi` at flat `(z, x)` targets for every time.
pub fn convolve_fan_kernel<T: Real>(
    f: &SpaceTimeField<T>,
    psi: &CutoffSpec,
    structure: &HTypeStructure<T>,
    spec: &FanSpec,
    targets: &[usize],
) -> Result<Vec<Vec<Cplx<T>>>> {
    let rule = psi.rule(spec.mu_nodes)?;
    let (d, m) = (structure.d(), structure.m());
    let sphere = SphereRule::<T>::new(m, spec.sphere_resolution)?;
    let grid = f.grid;
    let n = grid.horizontal.axis.n;
    let dims = grid.horizontal.dims();
    let nx = grid.horizontal.len();
    let xs = grid.horizontal.points();
    let zs = grid.vertical.points();
    let cell = grid.cell_volume();
    let h = grid.horizontal.axis.step();
    let lattice = (2 * n - 1).pow(dims as u32);
    let transforms: Vec<SpaceField<T>> = rule.nodes.iter().map(|&mu| time_transform(f, lit(mu))).collect();
    // phi_k^{rho} on the difference lattice for every (mu, k).
    let diff_r2: Vec<T> = (0..lattice)
        .map(|mut idx| {
            let mut r2 = T::zero();
            for _ in 0..dims {
                let di = (idx % (2 * n - 1)) as isize - (n as isize - 1);
                idx /= 2 * n - 1;
                let v = from_usize::<T>(di.unsigned_abs()) * h;
                r2 += v * v;
            }
            r2
        })
        .collect();
    let lattice_index = |a: &[usize], b: &[usize]| -> usize {
        a.iter().zip(b).rev().fold((0usize, 1usize), |(acc, stride), (&ai, &bi)| (acc + (ai + n - 1 - bi) * stride, stride * (2 * n - 1))).0
    };
    let mult: Vec<Vec<usize>> = (0..nx).map(|i| grid.horizontal.multi_index(i)).collect();
    let nz = zs.len();
    let values: Vec<Vec<Cplx<T>>> = targets
        .par_iter()
        .map(|&idx| {
            let (zi, xi) = (idx / nx, idx % nx);
            let (x, z) = (&xs[xi], &zs[zi]);
            // theta(w, zeta) = z - zeta - (1/2) w^T L x, laid out [w][zeta][a].
            let mut theta = Vec::with_capacity(nx * nz * m);
            for w in &xs {
                let shift: Vec<T> = structure.brackets().iter().map(|l| lit::<T>(0.5) * l.bilinear(w, x)).collect();
                for zeta in &zs {
                    for a in 0..m {
                        theta.push(z[a] - zeta[a] - shift[a]);
                    }
                }
            }
            let r2: Vec<T> = (0..nx).map(|wi| diff_r2[lattice_index(&mult[xi], &mult[wi])]).collect();
            let mut per_mu = Vec::with_capacity(rule.len());
            for (j, &mu) in rule.nodes.iter().enumerate() {
                let p = psi.eval(mu);
                let mut acc = Complex::new(T::zero(), T::zero());
                if p != 0.0 {
                    let pref = lit::<T>(mu.powi((d + m) as i32 - 1) * rule.weights[j] * p) / T::TAU().powi((d + m) as i32);
                    let fm = &transforms[j].data;
                    for k in 0..=spec.k_max {
                        let level = from_usize::<T>(2 * k + d);
                        let rho = lit::<T>(mu) / level;
                        let c = level.powi(-((d + m) as i32));
                        for wi in 0..nx {
                            let phi = laguerre_radial(k, d, rho * r2[wi]);
                            if phi == T::zero() {
                                continue;
                            }
                            let th = &theta[wi * nz * m..(wi + 1) * nz * m];
                            let mut inner = Complex::new(T::zero(), T::zero());
                            for zj in 0..nz {
                                inner += fm[zj * nx + wi] * sphere_phase(&sphere, rho, &th[zj * m..(zj + 1) * m]);
                            }
                            acc += inner * (phi * c);
                        }
                    }
                    acc = acc * pref * cell;
                }
                per_mu.push(acc);
            }
            f.times
                .times
                .iter()
                .map(|&t| rule.nodes.iter().zip(&per_mu).map(|(&mu, v)| v * cis(lit::<T>(mu) * t)).sum())
                .collect()
        })
        .collect();
    Ok(values)
}

/// Computes `E_Sigma R_Sigma f`, the `P_mu` integral and the brute-force
/// convolution with `kappa_Sigma_psi` at `targets`, and compares them.
pub fn tt_star_check<T: Real>(
    f: &SpaceTimeField<T>,
    psi: &CutoffSpec,
    structure: &HTypeStructure<T>,
    spec: &FanSpec,
    targets: &[usize],
) -> Result<TtStarReport> {
    let theta = restrict(f, structure, psi, spec)?;
    let er = extend(&theta, psi, structure, &f.grid, &f.times)?;
    let sl = slice_integral(f, psi, structure, spec)?;
    let conv = convolve_fan_kernel(f, psi, structure, spec, targets)?;
    let n = f.slice_len();
    let rel = |a: &[Cplx<T>], b: &[Cplx<T>]| {
        let num: f64 = a.iter().zip(b).map(|(x, y)| to_f64((x - y).norm_sqr())).sum();
        let den: f64 = b.iter().map(|y| to_f64(y.norm_sqr())).sum();
        (num / den).sqrt()
    };
    let mut sup = 0.0;
    let mut worst = (0, 0);
    let top = sl.data.iter().fold(0.0f64, |a, v| a.max(to_f64(v.norm())));
    for (i, (a, b)) in er.data.iter().zip(&sl.data).enumerate() {
        let e = to_f64((a - b).norm());
        if e > sup {
            sup = e;
            worst = (i / n, i % n);
        }
    }
    let gather = |field: &SpaceTimeField<T>| -> Vec<Cplx<T>> {
        (0..f.times.len()).flat_map(|ti| targets.iter().map(move |&p| field.data[ti * n + p])).collect()
    };
    let conv_flat: Vec<Cplx<T>> = (0..f.times.len()).flat_map(|ti| conv.iter().map(move |c| c[ti])).collect();
    Ok(TtStarReport {
        extension_vs_slices: rel(&er.data, &sl.data),
        extension_vs_convolution: rel(&gather(&er), &conv_flat),
        slices_vs_convolution: rel(&gather(&sl), &conv_flat),
        sup_discrepancy: sup / top.max(f64::MIN_POSITIVE),
        worst_point: worst,
        sample_points: targets.len(),
    })
}

/// Which half of the wave fan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveSign {
    Plus,
    Minus,
}

/// Wave kernel with the cross-check of its compact form.
#[derive(Clone, Debug)]
pub struct WaveKernel<T: Real> {
    pub kernel: KernelField<T>,
    /// Relative sup discrepancy of `2 int e^{+-i mu t} kappa_{mu^2} psi mu^{d+m} d mu`
    /// (the compact form with its printed weight) against the `k`-sum.
    pub compact_weight_dm_discrepancy: f64,
    /// Same with weight `mu`, which the `k`-sum reduces to.
    pub compact_weight_one_discrepancy: f64,
}

/// `kappa_Sigma_+-(t, x, z) = (2 pi)^{-d-m} sum_k (2k+d)^{-d-m} 2 int e^{+-i mu t}
/// psi(mu) mu^{2d+2m-1} int_S e_k^{mu^2 omega/(2k+d)} d omega d mu`.
pub fn wave_kernel<T: Real>(
    psi: &CutoffSpec,
    sign: WaveSign,
    structure: &HTypeStructure<T>,
    grid: &SpaceGrid<T>,
    times: &TimeGrid<T>,
    spec: &FanSpec,
) -> Result<WaveKernel<T>> {
    let (d, m) = (structure.d(), structure.m());
    let sphere = SphereRule::<T>::new(m, spec.sphere_resolution)?;
    let rule = psi.rule(spec.mu_nodes)?;
    let s = match sign {
        WaveSign::Plus => 1.0,
        WaveSign::Minus => -1.0,
    };
    let xs = grid.horizontal.points();
    let zs = grid.vertical.points();
    let (nxs, nzs) = (xs.len(), zs.len());
    let pts: Vec<(usize, usize, usize)> = (0..times.len())
        .flat_map(|ti| (0..nzs).flat_map(move |zi| (0..nxs).map(move |xi| (ti, zi, xi))))
        .collect();
    let q = (d + m) as i32;
    let vals: Vec<[Cplx<T>; 3]> = pts
        .par_iter()
        .map(|&(ti, zi, xi)| {
            let r2: T = xs[xi].iter().map(|v| *v * *v).sum();
            let t = times.times[ti] * lit::<T>(s);
            let mut ksum = Complex::new(T::zero(), T::zero());
            let mut compact_dm = Complex::new(T::zero(), T::zero());
            let mut compact_one = Complex::new(T::zero(), T::zero());
            for (&mu, &wm) in rule.nodes.iter().zip(&rule.weights) {
                let p = psi.eval(mu);
                if p == 0.0 {
                    continue;
                }
                let mu2 = mu * mu;
                let ph = cis(lit::<T>(mu) * t);
                let mut levels = Complex::new(T::zero(), T::zero());
                for k in 0..=spec.k_max {
                    let level = from_usize::<T>(2 * k + d);
                    let rho = lit::<T>(mu2) / level;
                    levels += sphere_phase(&sphere, rho, &zs[zi]) * (laguerre_radial(k, d, rho * r2) * level.powi(-q));
                }
                let base = levels * ph * lit::<T>(2.0 * wm * p) / T::TAU().powi(q);
                ksum += base * lit::<T>(mu.powi(2 * q - 1));
                // kappa_{mu^2} carries (mu^2)^{d+m-1}.
                let kappa_part = base * lit::<T>(mu2.powi(q - 1));
                compact_dm += kappa_part * lit::<T>(mu.powi(q));
                compact_one += kappa_part * lit::<T>(mu);
            }
            [ksum, compact_dm, compact_one]
        })
        .collect();
    let top = vals.iter().fold(0.0f64, |a, v| a.max(to_f64(v[0].norm())));
    let disc = |i: usize| vals.iter().fold(0.0f64, |a, v| a.max(to_f64((v[i] - v[0]).norm()))) / top.max(f64::MIN_POSITIVE);
    let one = disc(2);
    if one > 1e-10 {
        return Err(Error::Inconsistent(format!("wave kernel k-sum and weight-mu compact form disagree by {one:.3e}")));
    }
    Ok(WaveKernel {
        compact_weight_dm_discrepancy: disc(1),
        compact_weight_one_discrepancy: one,
        kernel: KernelField {
            field: SpaceTimeField {
                grid: *grid,
                times: times.clone(),
                data: vals.into_iter().map(|v| v[0]).collect(),
            },
            tail_bound: 2.0 * kappa_tail_bound(psi.b * psi.b, d, m, spec.k_max) * psi.weighted_l1(1.0),
            path_discrepancy: one,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gft::{forward, SpectralSpec};
    use crate::twisted::twisted_laplacian_apply;

    #[test]
    fn cutoff_shape() {
        let p = CutoffSpec::default();
        assert_eq!(p.eval(1.0), 0.0);
        assert_eq!(p.eval(2.0), 0.0);
        assert_eq!(p.eval(0.5), 0.0);
        assert!((p.eval(1.5) - 1.0).abs() < 1e-15);
        assert!(CutoffSpec::new(2.0, 1.0).is_err());
    }

    #[test]
    fn fan_node_values() {
        let n1 = SpectralNode {
            lambda: DualFrequency::scalar(1.0).unwrap(),
            weight: 1.0,
        };
        let nodes = fan_nodes(&[n1], 3, 1);
        assert_eq!(nodes.len(), 4);
        assert_eq!(nodes[0].mu, 1.0);
        let n2 = SpectralNode {
            lambda: DualFrequency::scalar(0.5).unwrap(),
            weight: 1.0,
        };
        assert_eq!(fan_nodes(&[n2], 3, 2)[3].mu, 4.0);
    }

    #[test]
    fn identity_blocks_match_scalar_oracle() {
        let psi = CutoffSpec::default();
        let spec = FanSpec {
            k_max: 6,
            col_band: 0,
            ..FanSpec::default()
        };
        let mut theta = FanData::<f64>::zeros(&psi, 1, 1, &spec).unwrap();
        for lvl in theta.levels.iter_mut() {
            let nc = lvl.block.cols().len();
            let bl = lvl.block.len();
            let diag = lvl.block.cols().iter().position(|b| b.order() == lvl.k).unwrap();
            for i in 0..lvl.nodes.len() {
                lvl.data[i * bl + diag] = Complex::new(1.0, 0.0);
            }
            let _ = nc;
        }
        let got = integrate_fan(&theta, &psi);
        // In Cartesian lambda each level contributes (2 pi)^{-2} int psi(|lam|(2k+1)) |lam| d lam
        // = (2 pi)^{-2} (2k+1)^{-2} 2 int psi(mu) mu d mu.
        let mass = psi.weighted_l1(1.0);
        let oracle: f64 = (0..=6).map(|k| 2.0 * mass / ((2.0 * k as f64 + 1.0).powi(2) * (2.0 * std::f64::consts::PI).powi(2))).sum();
        assert!((got.re - oracle).abs() < 1e-5 * oracle, "{} vs {oracle}", got.re);
    }

    #[test]
    fn kernel_origin_and_bound() {
        let psi = CutoffSpec::default();
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = SpaceGrid::new(1, 1, 3, 0.5, 3, 0.5).unwrap();
        let times = TimeGrid::samples(vec![-1.0, 0.0, 0.7]);
        let spec = FanSpec {
            k_max: 10,
            ..FanSpec::default()
        };
        let kf = kappa_sigma(&psi, &s, &grid, &times, &spec).unwrap();
        let centre = grid.horizontal.len() / 2 + grid.horizontal.len();
        for (ti, &t) in times.times.iter().enumerate() {
            let v = kf.field.data[ti * grid.len() + centre];
            let o = kappa_sigma_origin(&psi, t, 1, 1, 10);
            assert!((v - o).norm() < 1e-8 * o.norm().max(1e-3), "t={t}: {v} vs {o}");
        }
        assert!(kf.sup_norm() < kappa_sigma_bound(&psi, 1, 1));
    }

    #[test]
    fn kappa_mu_respects_bound() {
        let pts = vec![(vec![0.0, 0.0], vec![0.0]), (vec![0.3, -0.2], vec![0.4])];
        let v = kappa_mu(1.5, &pts, 1, 1, 40, 1).unwrap();
        let b = kappa_mu_bound(1.5, 1, 1);
        assert!(v.values.iter().all(|x| x.norm() <= b));
        assert!(v.values[0].im.abs() < 1e-15);
    }

    #[test]
    fn wave_kernel_symmetry() {
        let psi = CutoffSpec::default();
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = SpaceGrid::new(1, 1, 2, 0.6, 2, 0.4).unwrap();
        let times = TimeGrid::samples(vec![-0.8, 0.8]);
        let spec = FanSpec {
            k_max: 8,
            ..FanSpec::default()
        };
        let p = wave_kernel(&psi, WaveSign::Plus, &s, &grid, &times, &spec).unwrap();
        let m = wave_kernel(&psi, WaveSign::Minus, &s, &grid, &times, &spec).unwrap();
        let n = grid.len();
        for i in 0..n {
            let (p0, p1) = (p.kernel.field.data[i], p.kernel.field.data[n + i]);
            let m1 = m.kernel.field.data[n + i];
            assert!((m1 - p1.conj()).norm() < 1e-13);
            assert!((m1 - p0).norm() < 1e-13);
        }
        assert!(p.compact_weight_dm_discrepancy > 1e-3);
    }

    #[test]
    fn restriction_extension_adjoint_and_pullback() {
        let psi = CutoffSpec::default();
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = SpaceGrid::new(1, 1, 10, 3.0, 8, 3.0).unwrap();
        let times = TimeGrid::midpoint(-2.0, 2.0, 12).unwrap();
        let spec = FanSpec {
            k_max: 3,
            mu_nodes: 6,
            sphere_resolution: 1,
            col_band: 4,
        };
        let f = SpaceTimeField::from_fn(grid, times.clone(), |t: f64, x: &[f64], z: &[f64]| {
            Complex::new((-(x[0] - 0.3).powi(2) - x[1] * x[1] - z[0] * z[0] - t * t).exp(), 0.2 * x[1] * (-t * t).exp())
        });
        let mut theta = FanData::<f64>::zeros(&psi, 1, 1, &spec).unwrap();
        for (li, lvl) in theta.levels.iter_mut().enumerate() {
            for (i, v) in lvl.data.iter_mut().enumerate() {
                *v = Complex::new(((i * 7 + li) % 5) as f64 - 2.0, ((i * 3 + li) % 4) as f64 - 1.5);
            }
        }
        let rf = restrict(&f, &s, &psi, &spec).unwrap();
        let ef = extend(&theta, &psi, &s, &grid, &times).unwrap();
        let lhs = ef.inner(&f);
        let rhs = theta.inner(&rf, Some(&psi)).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm(), "{lhs} vs {rhs}");
        assert!(extend(&FanData::zeros(&psi, 1, 1, &spec).unwrap(), &psi, &s, &grid, &times)
            .unwrap()
            .data
            .iter()
            .all(|v| v.norm() == 0.0));

        let g = SpaceField::from_fn(SpaceGrid::new(1, 1, 30, 5.0, 48, 8.0).unwrap(), |x: &[f64], z: &[f64]| {
            Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0 - z[0] * z[0] / 4.0).exp() * (3.0 * z[0]).cos(), 0.0)
        });
        let spec_g = SpectralSpec {
            n_max: 8,
            radial_nodes: 12,
            ..SpectralSpec::default()
        };
        let c = forward(&g, &s, &spec_g).unwrap();
        let pb = FanData::pullback(&c);
        let a = pb.norm(None);
        let b = crate::gft::plancherel_norm(&c);
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn slice_forms_agree_and_slice_is_eigenfunction() {
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = SpaceGrid::new(1, 1, 13, 4.0, 12, 6.0).unwrap();
        let f = SpaceField::from_fn(grid, |x: &[f64], z: &[f64]| {
            Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 1.5 - z[0] * z[0] / 3.0).exp(), 0.0)
        });
        let mu = 1.3;
        let (p, _) = spectral_slice(&f, mu, &s, 6, 1).unwrap();
        let targets = [grid.horizontal.len() * 6 + 84, grid.horizontal.len() * 3 + 20];
        let direct = slice_by_group_convolution(&f, mu, &s, 6, 1, &targets).unwrap();
        for (t, v) in targets.iter().zip(&direct) {
            assert!((p.data[*t] - v).norm() < 1e-10 * (1.0 + v.norm()), "{} vs {v}", p.data[*t]);
        }
        // Each (k, omega) term is an eigenfunction of the twisted Laplacian at
        // lambda = mu omega/(2k+1) with eigenvalue -mu.
        let lam = mu / 3.0;
        let g = TwistedField::heisenberg(HorizontalGridAlias::new(1, 61, 12.0).unwrap(), lam, |x| {
            Complex::new((-(x[0] - 0.4).powi(2) - x[1] * x[1]).exp(), 0.0)
        })
        .unwrap();
        let conv = convolve_laguerre(&[&g], 1).unwrap().pop().unwrap();
        let lap = twisted_laplacian_apply(&conv, 30);
        let res = lap.field.add(&conv.scale(Complex::new(mu, 0.0)));
        assert!(res.l2_norm() / conv.l2_norm() < 1e-4);
    }

    use crate::grid::HorizontalGrid as HorizontalGridAlias;
}
