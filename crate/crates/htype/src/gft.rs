//! Group Fourier transform on `G`: central (vertical) transform, scalar
//! coefficients `F(lambda, a, b) = int f E^lambda_ab`, inversion, Plancherel,
//! spectral multipliers and Sobolev norms.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::CoefficientBlock;
use crate::error::{Error, Result};
use crate::grid::{HorizontalGrid, SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};
use crate::group::{DualFrequency, HTypeStructure};
use crate::linalg::Mat;
use crate::quadrature::{QuadratureRule1D, SphereRule};
use crate::real::{cis, from_usize, lit, to_f64, Cplx, Real};
use crate::special::MultiIndex;
use crate::twisted::TwistedField;

/// Polar quadrature on the vertical dual: Gauss-Legendre in `|lambda|`
/// times a sphere rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSpec {
    pub n_max: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub radial_nodes: usize,
    pub sphere_resolution: usize,
}

impl Default for SpectralSpec {
    fn default() -> Self {
        Self {
            n_max: 20,
            lambda_min: 0.05,
            lambda_max: 8.0,
            radial_nodes: 48,
            sphere_resolution: 4,
        }
    }
}

impl SpectralSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_max > self.lambda_min) {
            return Err(Error::InvalidParameter(format!(
                "lambda band must satisfy 0 < lambda_min < lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.radial_nodes == 0 {
            return Err(Error::InvalidParameter("radial_nodes must be positive".into()));
        }
        Ok(())
    }

    /// Band matched to the dilation `delta_scale` (frequencies scale by `scale^{-2}`).
    pub fn dilated(&self, scale: f64) -> Self {
        Self {
            lambda_min: self.lambda_min / (scale * scale),
            lambda_max: self.lambda_max / (scale * scale),
            ..self.clone()
        }
    }

    /// Quadrature nodes `lambda = rho omega` with weights `w_rho rho^{m-1} w_omega`.
    pub fn nodes<T: Real>(&self, m: usize) -> Result<Vec<SpectralNode<T>>> {
        self.validate()?;
        let radial = QuadratureRule1D::<f64>::gauss_legendre(self.radial_nodes, self.lambda_min, self.lambda_max)?;
        let sphere = SphereRule::<f64>::new(m, self.sphere_resolution)?;
        let mut out = Vec::with_capacity(radial.len() * sphere.len());
        for (&rho, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for (omega, &wo) in sphere.points.iter().zip(&sphere.weights) {
                let lam: Vec<T> = omega.iter().map(|&o| lit(rho * o)).collect();
                out.push(SpectralNode {
                    lambda: DualFrequency::new(lam)?,
                    weight: lit(wr * rho.powi(m as i32 - 1) * wo),
                });
            }
        }
        Ok(out)
    }
}

/// One dual frequency with its `d lambda` quadrature weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SpectralNode<T: Real> {
    pub lambda: DualFrequency<T>,
    pub weight: T,
}

impl<T: Real> SpectralNode<T> {
    /// `(2 pi)^{-d-m} |lambda|^d` times the node weight.
    pub fn plancherel_weight(&self, d: usize) -> T {
        let m = self.lambda.components().len();
        self.weight * self.lambda.rho().powi(d as i32) / T::TAU().powi((d + m) as i32)
    }
}

/// Truncated scalar Fourier data `F(lambda_i; a, b)`, `|a|, |b| <= n_max`.
#[derive(Clone, Debug)]
pub struct SpectralCoeffs<T: Real> {
    d: usize,
    m: usize,
    n_max: usize,
    block: CoefficientBlock,
    orders: Vec<usize>,
    pub nodes: Vec<SpectralNode<T>>,
    /// Node-major, each node a row-major block.
    pub data: Vec<Cplx<T>>,
    /// Relative Plancherel mass missed by the index cutoff.
    pub tail: T,
}

impl<T: Real> SpectralCoeffs<T> {
    pub fn zeros(d: usize, m: usize, n_max: usize, nodes: Vec<SpectralNode<T>>) -> Self {
        let block = CoefficientBlock::total_order(d, n_max);
        let orders = block.rows().iter().map(MultiIndex::order).collect();
        let len = block.len() * nodes.len();
        Self {
            d,
            m,
            n_max,
            block,
            orders,
            nodes,
            data: vec![Complex::new(T::zero(), T::zero()); len],
            tail: T::zero(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn indices(&self) -> &[MultiIndex] {
        self.block.rows()
    }

    pub fn block(&self) -> &CoefficientBlock {
        &self.block
    }

    pub fn block_len(&self) -> usize {
        self.block.len()
    }

    pub fn node_block(&self, i: usize) -> &[Cplx<T>] {
        let b = self.block_len();
        &self.data[i * b..(i + 1) * b]
    }

    pub fn node_block_mut(&mut self, i: usize) -> &mut [Cplx<T>] {
        let b = self.block_len();
        &mut self.data[i * b..(i + 1) * b]
    }

    /// Flat offset of `(node, a, b)` with `a`, `b` positions in [`Self::indices`].
    pub fn offset(&self, node: usize, row: usize, col: usize) -> usize {
        let n = self.indices().len();
        node * self.block_len() + row * n + col
    }

    /// `|a|` for row position `row`.
    pub fn row_order(&self, row: usize) -> usize {
        self.orders[row]
    }

    /// Spectral value `|lambda|(2|a| + d)` at a node and row.
    pub fn eigenvalue(&self, node: usize, row: usize) -> T {
        self.nodes[node].lambda.rho() * from_usize::<T>(2 * self.orders[row] + self.d)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.m != other.m || self.n_max != other.n_max || self.nodes != other.nodes {
            return Err(Error::GridMismatch("spectral coefficients on different quadratures".into()));
        }
        Ok(())
    }

    /// Multiplies every entry by `symbol(node, |a|)`.
    pub fn map_rows(&self, symbol: impl Fn(usize, usize) -> Cplx<T>) -> Self {
        let n = self.indices().len();
        let b = self.block_len();
        let mut out = self.clone();
        for (idx, v) in out.data.iter_mut().enumerate() {
            let node = idx / b;
            let row = (idx % b) / n;
            *v *= symbol(node, self.orders[row]);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `sum_i (2 pi)^{-d-m} |lambda_i|^d W_i sum_ab F conj(G)`.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>> {
        self.same_shape(other)?;
        Ok((0..self.nodes.len())
            .map(|i| {
                let s: Cplx<T> = self.node_block(i).iter().zip(other.node_block(i)).map(|(a, b)| a * b.conj()).sum();
                s * self.nodes[i].plancherel_weight(self.d)
            })
            .sum())
    }

    /// Reality defect `max |F(-lambda) - conj F(lambda)| / max |F|` over node
    /// pairs present in the quadrature.
    pub fn reality_residual(&self) -> T {
        let top = self.data.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        if top == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for (i, a) in self.nodes.iter().enumerate() {
            let neg = a.lambda.neg();
            let Some(j) = self.nodes.iter().position(|b| {
                b.lambda
                    .components()
                    .iter()
                    .zip(neg.components())
                    .all(|(x, y)| (*x - *y).abs() <= lit::<T>(1e-12) * (T::one() + y.abs()))
            }) else {
                continue;
            };
            for (p, q) in self.node_block(i).iter().zip(self.node_block(j)) {
                worst = worst.max((p - q.conj()).norm());
            }
        }
        worst / top
    }
}

/// `f^lambda(x) = int f(x, z) e^{-i lambda . z} dz` on the sample grid.
pub fn central_ft<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>, lam: &DualFrequency<T>) -> Result<TwistedField<T>> {
    check_structure(&f.grid, structure)?;
    check_nyquist(&f.grid, lam)?;
    let data = central_slice(f, &lam.neg());
    TwistedField::new(f.grid.horizontal, lam.clone(), structure, data)
}

fn check_structure<T: Real>(grid: &SpaceGrid<T>, structure: &HTypeStructure<T>) -> Result<()> {
    if grid.horizontal.d != structure.d() || grid.vertical.m != structure.m() {
        return Err(Error::GridMismatch(format!(
            "grid is (d, m) = ({}, {}) but the structure is ({}, {})",
            grid.horizontal.d,
            grid.vertical.m,
            structure.d(),
            structure.m()
        )));
    }
    Ok(())
}

fn check_nyquist<T: Real>(grid: &SpaceGrid<T>, lam: &DualFrequency<T>) -> Result<()> {
    let limit = T::PI() / grid.vertical.axis.step();
    for &c in lam.components() {
        if c.abs() > limit {
            return Err(Error::OutOfBand {
                what: "vertical frequency",
                value: to_f64(c),
                limit: to_f64(limit),
            });
        }
    }
    Ok(())
}

/// `sum_z f(x, z) e^{i lam . z} h_z^m` (the transform at `-lam`).
fn central_slice<T: Real>(f: &SpaceField<T>, lam: &DualFrequency<T>) -> Vec<Cplx<T>> {
    let nz = f.grid.vertical.len();
    let nx = f.n_horizontal();
    let hz = f.grid.vertical.cell_volume();
    let mut out = vec![Complex::new(T::zero(), T::zero()); nx];
    for zi in 0..nz {
        let ph = cis(lam.dot(&f.grid.vertical.point(zi))) * hz;
        for (o, v) in out.iter_mut().zip(f.slice(zi)) {
            *o += v * ph;
        }
    }
    out
}

/// Precomputed frame data of one node.
struct NodeFrame<T: Real> {
    sqrt_rho: T,
    rotation_t: Mat<T>,
}

fn frames<T: Real>(structure: &HTypeStructure<T>, nodes: &[SpectralNode<T>]) -> Result<Vec<NodeFrame<T>>> {
    nodes
        .iter()
        .map(|n| {
            Ok(NodeFrame {
                sqrt_rho: n.lambda.rho().sqrt(),
                rotation_t: structure.diagonalize_j(&n.lambda)?.transpose(),
            })
        })
        .collect()
}

/// Coefficients of one field.
pub fn forward<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>, spec: &SpectralSpec) -> Result<SpectralCoeffs<T>> {
    Ok(forward_batch(&[f], structure, spec)?.pop().expect("one field"))
}

/// Coefficient blocks of every field at one node, with the captured mass of each.
type NodeBlocks<T> = (Vec<Vec<Cplx<T>>>, Vec<T>);

/// `F(lambda, a, b) = sum_x f^{-lambda}(x) M^lambda_ab(x) h^{2d}` for several
/// fields on a shared grid, sharing the basis evaluation.
pub fn forward_batch<T: Real>(
    fields: &[&SpaceField<T>],
    structure: &HTypeStructure<T>,
    spec: &SpectralSpec,
) -> Result<Vec<SpectralCoeffs<T>>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid;
    if fields.iter().any(|f| f.grid != grid) {
        return Err(Error::GridMismatch("batched fields must share a grid".into()));
    }
    check_structure(&grid, structure)?;
    let (d, m) = (structure.d(), structure.m());
    let nodes = spec.nodes::<T>(m)?;
    for n in &nodes {
        check_nyquist(&grid, &n.lambda)?;
    }
    let fr = frames(structure, &nodes)?;
    let block = CoefficientBlock::total_order(d, spec.n_max);
    let bl = block.len();
    let points = grid.horizontal.points();
    let cell = grid.horizontal.cell_volume();
    let zero = Complex::new(T::zero(), T::zero());
    // Per node: coefficient blocks of every field and the captured/total mass.
    let per_node: Vec<NodeBlocks<T>> = nodes
        .par_iter()
        .zip(&fr)
        .map(|(node, frame)| {
            let slices: Vec<Vec<Cplx<T>>> = fields.iter().map(|f| central_slice(f, &node.lambda)).collect();
            let mut acc = vec![vec![zero; bl]; fields.len()];
            let mut scratch = block.scratch::<T>();
            let mut vals = vec![zero; bl];
            for (xi, x) in points.iter().enumerate() {
                if slices.iter().all(|s| s[xi] == zero) {
                    continue;
                }
                let y = frame.rotation_t.matvec(x);
                block.eval(frame.sqrt_rho, &y, &mut scratch, &mut vals);
                for (a, s) in acc.iter_mut().zip(&slices) {
                    let fv = s[xi] * cell;
                    for (o, v) in a.iter_mut().zip(&vals) {
                        *o += fv * v;
                    }
                }
            }
            let totals = slices.iter().map(|s| s.iter().map(|v| v.norm_sqr()).sum::<T>() * cell).collect();
            (acc, totals)
        })
        .collect();
    let mut out: Vec<SpectralCoeffs<T>> = (0..fields.len()).map(|_| SpectralCoeffs::zeros(d, m, spec.n_max, nodes.clone())).collect();
    for (fi, coeffs) in out.iter_mut().enumerate() {
        let (mut captured, mut total) = (T::zero(), T::zero());
        for (i, (blocks, totals)) in per_node.iter().enumerate() {
            coeffs.node_block_mut(i).copy_from_slice(&blocks[fi]);
            let pw = nodes[i].plancherel_weight(d);
            captured += pw * blocks[fi].iter().map(|v| v.norm_sqr()).sum::<T>();
            // |f^{-lambda}|^2 integrates to the same Plancherel mass with weight (2 pi)^{-m}.
            total += nodes[i].weight * totals[fi] / T::TAU().powi(m as i32);
        }
        coeffs.tail = if total > T::zero() {
            ((total - captured) / total).max(T::zero())
        } else {
            T::zero()
        };
    }
    Ok(out)
}

/// One coefficient set and its symbol `(time index, node, |a|) -> multiplier`.
pub type SymbolFn<'a, T> = dyn Fn(usize, usize, usize) -> Cplx<T> + Sync + 'a;

/// `u_t(x, z) = sum_sets (2 pi)^{-d-m} sum_i |lambda_i|^d W_i e^{-i lambda_i . z}
/// sum_ab s(t, i, |a|) F(lambda_i, a, b) conj(M^lambda_i_ab(x))` for every time index.
///
/// The basis is evaluated once per point and reused for every time.
pub fn synthesize_times<T: Real>(
    sets: &[(&SpectralCoeffs<T>, &SymbolFn<'_, T>)],
    structure: &HTypeStructure<T>,
    grid: &SpaceGrid<T>,
    n_times: usize,
) -> Result<Vec<Vec<Cplx<T>>>> {
    let Some((first, _)) = sets.first() else {
        return Err(Error::InvalidParameter("no coefficient sets to synthesize".into()));
    };
    for (s, _) in sets {
        first.same_shape(s)?;
    }
    check_structure(grid, structure)?;
    let d = first.d;
    let nodes = &first.nodes;
    let fr = frames(structure, nodes)?;
    let block = &first.block;
    let n_idx = first.indices().len();
    let levels = first.n_max + 1;
    let zero = Complex::new(T::zero(), T::zero());
    let nz = grid.vertical.len();
    let nx = grid.horizontal.len();
    // e^{-i lambda_i . z} times the Plancherel weight.
    let z_phase: Vec<Vec<Cplx<T>>> = nodes
        .iter()
        .map(|n| {
            let w = n.plancherel_weight(d);
            (0..nz).map(|zi| cis(-n.lambda.dot(&grid.vertical.point(zi))) * w).collect()
        })
        .collect();
    // Symbols tabulated once: [set][t][node][level].
    let symbols: Vec<Vec<Cplx<T>>> = sets
        .iter()
        .map(|(_, s)| {
            let mut v = Vec::with_capacity(n_times * nodes.len() * levels);
            for t in 0..n_times {
                for i in 0..nodes.len() {
                    for k in 0..levels {
                        v.push(s(t, i, k));
                    }
                }
            }
            v
        })
        .collect();
    let columns: Vec<Vec<Cplx<T>>> = (0..nx)
        .into_par_iter()
        .map_init(
            || (block.scratch::<T>(), vec![zero; block.len()]),
            |(scratch, vals), xi| {
                let x = grid.horizontal.point(xi);
                let mut col = vec![zero; n_times * nz];
                let mut level = vec![zero; levels];
                let mut h = vec![zero; n_times];
                for (i, frame) in fr.iter().enumerate() {
                    let y = frame.rotation_t.matvec(&x);
                    block.eval(frame.sqrt_rho, &y, scratch, vals);
                    h.iter_mut().for_each(|v| *v = zero);
                    for (si, (coeffs, _)) in sets.iter().enumerate() {
                        level.iter_mut().for_each(|v| *v = zero);
                        let fb = coeffs.node_block(i);
                        for r in 0..n_idx {
                            let k = coeffs.orders[r];
                            let row = &fb[r * n_idx..(r + 1) * n_idx];
                            let mv = &vals[r * n_idx..(r + 1) * n_idx];
                            let s: Cplx<T> = row.iter().zip(mv).map(|(f, mm)| f * mm.conj()).sum();
                            level[k] += s;
                        }
                        let sym = &symbols[si];
                        for (t, ht) in h.iter_mut().enumerate() {
                            let base = (t * nodes.len() + i) * levels;
                            for k in 0..levels {
                                *ht += sym[base + k] * level[k];
                            }
                        }
                    }
                    for (t, ht) in h.iter().enumerate() {
                        if *ht == zero {
                            continue;
                        }
                        let c = &mut col[t * nz..(t + 1) * nz];
                        for (o, p) in c.iter_mut().zip(&z_phase[i]) {
                            *o += p * ht;
                        }
                    }
                }
                col
            },
        )
        .collect();
    let mut out = vec![vec![zero; nz * nx]; n_times];
    for (xi, col) in columns.iter().enumerate() {
        for (t, o) in out.iter_mut().enumerate() {
            for zi in 0..nz {
                o[zi * nx + xi] = col[t * nz + zi];
            }
        }
    }
    Ok(out)
}

/// Quadrature inversion onto `grid`.
pub fn inverse<T: Real>(coeffs: &SpectralCoeffs<T>, structure: &HTypeStructure<T>, grid: &SpaceGrid<T>) -> Result<SpaceField<T>> {
    let one = |_: usize, _: usize, _: usize| Complex::new(T::one(), T::zero());
    let data = synthesize_times(&[(coeffs, &one)], structure, grid, 1)?.pop().expect("one time");
    SpaceField::new(*grid, data)
}

/// Inversion of `symbol(t, mu) F` at every time of `times`, with
/// `mu = |lambda|(2|a| + d)`.
pub fn inverse_times<T: Real>(
    coeffs: &SpectralCoeffs<T>,
    structure: &HTypeStructure<T>,
    grid: &SpaceGrid<T>,
    times: &TimeGrid<T>,
    symbol: impl Fn(T, T) -> Cplx<T> + Sync,
) -> Result<SpaceTimeField<T>> {
    let d = coeffs.d;
    let f = |t: usize, i: usize, k: usize| {
        let mu = coeffs.nodes[i].lambda.rho() * from_usize::<T>(2 * k + d);
        symbol(times.times[t], mu)
    };
    let slices = synthesize_times(&[(coeffs, &f)], structure, grid, times.len())?;
    Ok(SpaceTimeField {
        grid: *grid,
        times: times.clone(),
        data: slices.concat(),
    })
}

/// `(sum_ab int |F|^2 d sigma)^{1/2}`.
pub fn plancherel_norm<T: Real>(coeffs: &SpectralCoeffs<T>) -> T {
    (0..coeffs.nodes.len())
        .map(|i| coeffs.nodes[i].plancherel_weight(coeffs.d) * coeffs.node_block(i).iter().map(|v| v.norm_sqr()).sum::<T>())
        .sum::<T>()
        .sqrt()
}

/// `F(lambda, a, b) -> phi(|lambda|(2|a| + d)) F(lambda, a, b)`.
pub fn apply_multiplier<T: Real>(coeffs: &SpectralCoeffs<T>, phi: impl Fn(T) -> Cplx<T>) -> SpectralCoeffs<T> {
    let d = coeffs.d;
    coeffs.map_rows(|i, k| phi(coeffs.nodes[i].lambda.rho() * from_usize::<T>(2 * k + d)))
}

/// Homogeneous Sobolev norm, the Plancherel norm of `mu^{sigma/2} F`.
pub fn sobolev_norm<T: Real>(coeffs: &SpectralCoeffs<T>, sigma: T) -> Result<T> {
    if sigma < T::zero() && coeffs.nodes.iter().any(|n| n.lambda.rho() <= T::zero()) {
        return Err(Error::InvalidParameter("negative Sobolev order needs a spectrum bounded away from 0".into()));
    }
    let half = sigma * lit(0.5);
    Ok(plancherel_norm(&apply_multiplier(coeffs, |mu| Complex::new(mu.powf(half), T::zero()))))
}

/// Sidecar metadata written next to the binary coefficient file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffsSidecar {
    pub format: String,
    pub d: usize,
    pub m: usize,
    pub n_max: usize,
    pub node_count: usize,
    pub block_len: usize,
    pub index_order: String,
    pub tail: f64,
    pub grid: Option<serde_json::Value>,
}

const MAGIC: &[u8; 8] = b"HTYPEFC1";

impl<T: Real> SpectralCoeffs<T> {
    /// Layout: magic `HTYPEFC1`, then `d, m, n_max, node_count` as
    /// little-endian `u64`, then per node `m` frequency components and the
    /// weight, then the coefficients as `(re, im)` pairs; all floats
    /// little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 16 * self.data.len());
        out.extend_from_slice(MAGIC);
        for v in [self.d, self.m, self.n_max, self.nodes.len()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for n in &self.nodes {
            for &c in n.lambda.components() {
                out.extend_from_slice(&to_f64(c).to_le_bytes());
            }
            out.extend_from_slice(&to_f64(n.weight).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&to_f64(v.re).to_le_bytes());
            out.extend_from_slice(&to_f64(v.im).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = || -> Result<u64> {
            let mut b = [0u8; 8];
            cur.read_exact(&mut b).map_err(|_| Error::Format("truncated file".into()))?;
            Ok(u64::from_le_bytes(b))
        };
        let d = word()? as usize;
        let m = word()? as usize;
        let n_max = word()? as usize;
        let count = word()? as usize;
        if d == 0 || m == 0 {
            return Err(Error::Format("zero dimension in header".into()));
        }
        let float = |w: u64| lit::<T>(f64::from_bits(w));
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let lam: Vec<T> = (0..m).map(|_| word().map(float)).collect::<Result<_>>()?;
            let weight = float(word()?);
            nodes.push(SpectralNode {
                lambda: DualFrequency::new(lam)?,
                weight,
            });
        }
        let mut out = Self::zeros(d, m, n_max, nodes);
        for v in out.data.iter_mut() {
            let re = float(word()?);
            let im = float(word()?);
            *v = Complex::new(re, im);
        }
        if !cur.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", cur.len())));
        }
        Ok(out)
    }

    pub fn sidecar(&self, grid: Option<&SpaceGrid<T>>) -> Result<CoeffsSidecar> {
        Ok(CoeffsSidecar {
            format: "HTYPEFC1".into(),
            d: self.d,
            m: self.m,
            n_max: self.n_max,
            node_count: self.nodes.len(),
            block_len: self.block_len(),
            index_order: "rows and columns over all multi-indices of order <= n_max, by order then lexicographically descending".into(),
            tail: to_f64(self.tail),
            grid: grid.map(serde_json::to_value).transpose()?,
        })
    }

    /// Writes `path` and `path.json`.
    pub fn write(&self, path: &Path, grid: Option<&SpaceGrid<T>>) -> Result<()> {
        fs::File::create(path)?.write_all(&self.to_bytes())?;
        let side = path.with_extension(match path.extension() {
            Some(e) => format!("{}.json", e.to_string_lossy()),
            None => "json".into(),
        });
        fs::write(side, serde_json::to_string_pretty(&self.sidecar(grid)?)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Horizontal frame helper for tests and oracles: `M^lambda_ab` sampled on a grid.
pub fn sample_coefficient<T: Real>(
    structure: &HTypeStructure<T>,
    lam: &DualFrequency<T>,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    grid: &HorizontalGrid<T>,
) -> Result<Vec<Cplx<T>>> {
    let rt = structure.diagonalize_j(lam)?.transpose();
    let block = CoefficientBlock::new(vec![alpha.clone()], vec![beta.clone()]);
    let mut scratch = block.scratch::<T>();
    let mut out = [Complex::new(T::zero(), T::zero())];
    let sr = lam.rho().sqrt();
    Ok(grid
        .points()
        .iter()
        .map(|x| {
            block.eval(sr, &rt.matvec(x), &mut scratch, &mut out);
            out[0]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SpectralSpec {
        SpectralSpec {
            n_max: 20,
            lambda_min: 0.05,
            lambda_max: 8.0,
            radial_nodes: 48,
            sphere_resolution: 1,
        }
    }

    fn profile(z: f64) -> f64 {
        (-z * z / (2.0 * 2.25)).exp() * (4.0 * z).cos()
    }

    fn test_grid() -> SpaceGrid<f64> {
        SpaceGrid::new(1, 1, 44, 6.0, 80, 10.0).unwrap()
    }

    #[test]
    fn central_ft_of_gaussian() {
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = SpaceGrid::new(1, 1, 6, 3.0, 120, 12.0).unwrap();
        let f = SpaceField::from_fn(grid, |x: &[f64], z: &[f64]| Complex::new((-x[0] * x[0] - z[0] * z[0] / 2.0).exp(), 0.0));
        for lam in [0.5f64, 2.0] {
            let fl = central_ft(&f, &s, &DualFrequency::scalar(lam).unwrap()).unwrap();
            let x = grid.horizontal.point(0);
            let exact = (-x[0] * x[0]).exp() * (2.0 * std::f64::consts::PI).sqrt() * (-lam * lam / 2.0).exp();
            assert!((fl.data[0] - Complex::new(exact, 0.0)).norm() < 1e-9);
        }
        assert!(central_ft(&f, &s, &DualFrequency::scalar(100.0).unwrap()).is_err());
    }

    #[test]
    fn zero_field_has_zero_coefficients() {
        let s = HTypeStructure::heisenberg(1).unwrap();
        let f = SpaceField::zeros(test_grid());
        let c = forward(&f, &s, &small_spec()).unwrap();
        assert!(c.data.iter().all(|v| v.norm() == 0.0));
        assert_eq!(plancherel_norm(&c), 0.0);
    }

    #[test]
    fn plancherel_round_trip_and_intertwining() {
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = test_grid();
        let sz2 = 2.25;
        let f = SpaceField::from_fn(grid, |x, z| {
            Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() * profile(z[0]), 0.0)
        });
        // Closed form of the sub-Laplacian on a radial-in-x product.
        let lap = SpaceField::from_fn(grid, |x, z| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let g = (-r2 / 2.0).exp();
            let z = z[0];
            let h = profile(z);
            let env = (-z * z / (2.0 * sz2)).exp();
            let hzz = env * ((z * z / (sz2 * sz2) - 1.0 / sz2 - 16.0) * (4.0 * z).cos() + 8.0 * z / sz2 * (4.0 * z).sin());
            Complex::new((r2 - 2.0) * g * h + r2 / 4.0 * g * hzz, 0.0)
        });
        let spec = small_spec();
        let cs = forward_batch(&[&f, &lap], &s, &spec).unwrap();
        let (cf, cl) = (&cs[0], &cs[1]);
        let pn = plancherel_norm(cf);
        assert!((pn - f.l2_norm()).abs() / f.l2_norm() < 1e-5, "{pn} vs {}", f.l2_norm());
        assert!(to_f64(cf.tail) < 1e-8);
        assert!(cf.reality_residual() < 1e-10);
        let back = inverse(cf, &s, &grid).unwrap();
        assert!(back.relative_l2(&f) < 1e-5, "round trip {}", back.relative_l2(&f));
        assert!(back.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max) < 1e-8);
        let predicted = apply_multiplier(cf, |mu| Complex::new(-mu, 0.0));
        let diff = predicted.add(&cl.scale(Complex::new(-1.0, 0.0))).unwrap();
        assert!(plancherel_norm(&diff) / plancherel_norm(cl) < 1e-4);
    }

    #[test]
    fn unit_response_is_conjugate_matrix_coefficient() {
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = SpaceGrid::new(1, 1, 12, 4.0, 9, 3.0).unwrap();
        let nodes = small_spec().nodes::<f64>(1).unwrap();
        let mut c = SpectralCoeffs::zeros(1, 1, 4, nodes);
        let (node, row, col) = (7, 2, 3);
        let off = c.offset(node, row, col);
        c.data[off] = Complex::new(1.0, 0.0);
        let f = inverse(&c, &s, &grid).unwrap();
        let lam = c.nodes[node].lambda.clone();
        let a = c.indices()[row].clone();
        let b = c.indices()[col].clone();
        let mvals = sample_coefficient(&s, &lam, &a, &b, &grid.horizontal).unwrap();
        let w = c.nodes[node].plancherel_weight(1);
        for zi in 0..grid.vertical.len() {
            let z = grid.vertical.point(zi);
            for (xi, mv) in mvals.iter().enumerate() {
                let expect = cis(-lam.dot(&z)) * mv.conj() * w;
                assert!((f.slice(zi)[xi] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn multiplier_calculus() {
        let s = HTypeStructure::heisenberg(1).unwrap();
        let grid = test_grid();
        let f = SpaceField::from_fn(grid, |x, z| {
            Complex::new((-(x[0] - 0.5).powi(2) - x[1] * x[1]).exp() * profile(z[0]), 0.2 * x[0])
        });
        let c = forward(&f, &s, &small_spec()).unwrap();
        let once = apply_multiplier(&c, |mu| Complex::new(mu * mu, 0.0));
        let twice = apply_multiplier(&apply_multiplier(&c, |mu| Complex::new(mu, 0.0)), |mu| Complex::new(mu, 0.0));
        let diff = once.add(&twice.scale(Complex::new(-1.0, 0.0))).unwrap();
        assert!(plancherel_norm(&diff) <= 1e-12 * plancherel_norm(&once));
        let u = apply_multiplier(&c, |mu| cis(1.7 * mu));
        assert!((plancherel_norm(&u) - plancherel_norm(&c)).abs() < 1e-12 * plancherel_norm(&c));
        assert_eq!(sobolev_norm(&c, 0.0).unwrap(), plancherel_norm(&c));
    }

    #[test]
    fn binary_round_trip() {
        let nodes = small_spec().nodes::<f64>(1).unwrap();
        let mut c = SpectralCoeffs::zeros(1, 1, 3, nodes);
        for (i, v) in c.data.iter_mut().enumerate() {
            *v = Complex::new(i as f64 * 0.25, -(i as f64));
        }
        let back = SpectralCoeffs::<f64>::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.data, c.data);
        assert_eq!(back.nodes, c.nodes);
        assert!(SpectralCoeffs::<f64>::from_bytes(&c.to_bytes()[..50]).is_err());
    }
}
