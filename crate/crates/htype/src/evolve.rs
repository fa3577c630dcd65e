//! Schrödinger and wave propagators as spectral multipliers, the Duhamel
//! term, frequency localization and Bernstein-type ratios.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::CoefficientBlock;
use crate::error::{Error, Result};
use crate::gft::{apply_multiplier, forward, forward_batch, inverse, plancherel_norm, synthesize_times, SpectralCoeffs, SpectralSpec, SymbolFn};
use crate::grid::{SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};
use crate::group::{DualFrequency, HTypeStructure};
use crate::quadrature::QuadratureRule1D;
use crate::real::{cis, from_usize, lit, to_f64, Cplx, Real};
use crate::special::MultiIndex;
use crate::twisted::lp_norm_samples;

/// Which dispersive equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Schrodinger,
    Wave,
}

impl std::str::FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schrodinger" => Ok(Self::Schrodinger),
            "wave" => Ok(Self::Wave),
            other => Err(Error::InvalidParameter(format!("unknown equation {other:?}"))),
        }
    }
}

/// Initial position and velocity of a wave.
#[derive(Clone, Debug)]
pub struct WaveData<T: Real> {
    pub u0: SpaceField<T>,
    pub v0: SpaceField<T>,
}

impl<T: Real> WaveData<T> {
    pub fn new(u0: SpaceField<T>, v0: SpaceField<T>) -> Result<Self> {
        if u0.grid != v0.grid {
            return Err(Error::GridMismatch("wave data on different grids".into()));
        }
        Ok(Self { u0, v0 })
    }

    pub fn at_rest(u0: SpaceField<T>) -> Self {
        let v0 = SpaceField::zeros(u0.grid);
        Self { u0, v0 }
    }
}

/// `e^{i t mu} F(u0)`: `i du/dt = Delta_H u`.
pub fn schrodinger_coeffs<T: Real>(c0: &SpectralCoeffs<T>, t: T) -> SpectralCoeffs<T> {
    apply_multiplier(c0, |mu| cis(t * mu))
}

/// Solution of the Schrödinger equation sampled at `times`.
pub fn schrodinger_propagate<T: Real>(u0: &SpaceField<T>, structure: &HTypeStructure<T>, spec: &SpectralSpec, times: &TimeGrid<T>) -> Result<SpaceTimeField<T>> {
    let c0 = forward(u0, structure, spec)?;
    schrodinger_from_coeffs(&c0, structure, &u0.grid, times)
}

pub fn schrodinger_from_coeffs<T: Real>(c0: &SpectralCoeffs<T>, structure: &HTypeStructure<T>, grid: &SpaceGrid<T>, times: &TimeGrid<T>) -> Result<SpaceTimeField<T>> {
    crate::gft::inverse_times(c0, structure, grid, times, |t, mu| cis(t * mu))
}

/// Relative drift of the Plancherel norm of the propagated data, and of the
/// grid L2 norm of the synthesized field.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct UnitarityReport {
    pub spectral_drift: f64,
    pub grid_drift: f64,
}

pub fn unitarity_drift<T: Real>(c0: &SpectralCoeffs<T>, u: &SpaceTimeField<T>) -> UnitarityReport {
    let n0 = to_f64(plancherel_norm(c0));
    let spectral = u
        .times
        .times
        .iter()
        .map(|&t| (to_f64(plancherel_norm(&schrodinger_coeffs(c0, t))) - n0).abs() / n0)
        .fold(0.0, f64::max);
    let norms: Vec<f64> = (0..u.times.len()).map(|i| to_f64(u.time_slice(i).l2_norm())).collect();
    let g0 = norms.first().copied().unwrap_or(0.0);
    let grid = norms.iter().map(|n| (n - g0).abs() / g0.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    UnitarityReport {
        spectral_drift: spectral,
        grid_drift: grid,
    }
}

/// Half-wave amplitudes `Gamma_+- = (F(u0) +- (i sqrt(mu))^{-1} F(v0)) / 2`.
#[derive(Clone, Debug)]
pub struct WaveAmplitudes<T: Real> {
    pub plus: SpectralCoeffs<T>,
    pub minus: SpectralCoeffs<T>,
}

impl<T: Real> WaveAmplitudes<T> {
    pub fn new(cu: &SpectralCoeffs<T>, cv: &SpectralCoeffs<T>) -> Result<Self> {
        let half = Complex::new(lit::<T>(0.5), T::zero());
        let lifted = apply_multiplier(cv, |mu| Complex::new(T::zero(), -T::one() / mu.sqrt()));
        Ok(Self {
            plus: cu.add(&lifted)?.scale(half),
            minus: cu.add(&lifted.scale(Complex::new(-T::one(), T::zero())))?.scale(half),
        })
    }

    /// `F(u(t))` and `F(du/dt (t))`.
    pub fn at(&self, t: T) -> Result<(SpectralCoeffs<T>, SpectralCoeffs<T>)> {
        let p = apply_multiplier(&self.plus, |mu| cis(t * mu.sqrt()));
        let m = apply_multiplier(&self.minus, |mu| cis(-t * mu.sqrt()));
        let u = p.add(&m)?;
        let ip = apply_multiplier(&p, |mu| Complex::new(T::zero(), mu.sqrt()));
        let im = apply_multiplier(&m, |mu| Complex::new(T::zero(), -mu.sqrt()));
        Ok((u, ip.add(&im)?))
    }

    /// `sum 2 mu (|Gamma_+|^2 + |Gamma_-|^2)`.
    pub fn conserved_energy(&self) -> T {
        let two_mu = |mu: T| Complex::new((lit::<T>(2.0) * mu).sqrt(), T::zero());
        let a = plancherel_norm(&apply_multiplier(&self.plus, two_mu));
        let b = plancherel_norm(&apply_multiplier(&self.minus, two_mu));
        a * a + b * b
    }
}

/// `||du/dt||^2 + ||nabla_H u||^2` from coefficient data at time `t`.
pub fn wave_energy<T: Real>(amp: &WaveAmplitudes<T>, t: T) -> Result<T> {
    let (u, ut) = amp.at(t)?;
    let grad = plancherel_norm(&apply_multiplier(&u, |mu| Complex::new(mu.sqrt(), T::zero())));
    let vel = plancherel_norm(&ut);
    Ok(grad * grad + vel * vel)
}

/// A wave solution with its energy history.
#[derive(Clone, Debug)]
pub struct WaveSolution<T: Real> {
    pub field: SpaceTimeField<T>,
    pub energy: Vec<T>,
    pub amplitudes: WaveAmplitudes<T>,
}

impl<T: Real> WaveSolution<T> {
    pub fn energy_drift(&self) -> f64 {
        let e0 = to_f64(self.amplitudes.conserved_energy());
        self.energy.iter().map(|e| (to_f64(*e) - e0).abs() / e0.max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }
}

/// `u(t) = sum_+- inverse(e^{+- i t sqrt(mu)} Gamma_+-)`.
pub fn wave_propagate<T: Real>(data: &WaveData<T>, structure: &HTypeStructure<T>, spec: &SpectralSpec, times: &TimeGrid<T>) -> Result<WaveSolution<T>> {
    let mut cs = forward_batch(&[&data.u0, &data.v0], structure, spec)?;
    let cv = cs.pop().expect("two fields");
    let cu = cs.pop().expect("two fields");
    let v_norm = data.v0.l2_norm();
    if v_norm > T::zero() && cv.tail > lit(1e-3) {
        return Err(Error::OutOfBand {
            what: "unresolved velocity spectrum",
            value: to_f64(cv.tail),
            limit: 1e-3,
        });
    }
    let amplitudes = WaveAmplitudes::new(&cu, &cv)?;
    let d = structure.d();
    let mu_of = |c: &SpectralCoeffs<T>, i: usize, k: usize| c.nodes[i].lambda.rho() * from_usize::<T>(2 * k + d);
    let plus = |t: usize, i: usize, k: usize| cis(times.times[t] * mu_of(&amplitudes.plus, i, k).sqrt());
    let minus = |t: usize, i: usize, k: usize| cis(-times.times[t] * mu_of(&amplitudes.minus, i, k).sqrt());
    let sets: [(&SpectralCoeffs<T>, &SymbolFn<'_, T>); 2] = [(&amplitudes.plus, &plus), (&amplitudes.minus, &minus)];
    let slices = synthesize_times(&sets, structure, &data.u0.grid, times.len())?;
    let energy = times.times.iter().map(|&t| wave_energy(&amplitudes, t)).collect::<Result<_>>()?;
    Ok(WaveSolution {
        field: SpaceTimeField {
            grid: data.u0.grid,
            times: times.clone(),
            data: slices.concat(),
        },
        energy,
        amplitudes,
    })
}

/// Options for the Duhamel quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuhamelOptions {
    /// Gauss-Legendre nodes per panel; panels end at every output time.
    pub order: usize,
    /// Maximum panel length.
    pub max_panel: f64,
    /// Step of the centred difference used for the residual.
    pub fd_step: f64,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self {
            order: 16,
            max_panel: 0.25,
            fd_step: 1e-3,
        }
    }
}

/// Coefficients of the inhomogeneous solution with the PDE residual.
#[derive(Clone, Debug)]
pub struct DuhamelCoeffs<T: Real> {
    pub times: Vec<T>,
    pub coeffs: Vec<SpectralCoeffs<T>>,
    /// Max over interior times of `||i du/dt + mu u - f|| / ||f||` in
    /// coefficient space (centred difference in `t`).
    pub residual: f64,
}

fn duhamel_at<T: Real>(
    t: T,
    forcing: &(dyn Fn(T) -> Result<SpectralCoeffs<T>> + Sync),
    opts: &DuhamelOptions,
) -> Result<Option<SpectralCoeffs<T>>> {
    let tf = to_f64(t);
    if tf == 0.0 {
        return Ok(None);
    }
    let panels = ((tf.abs() / opts.max_panel).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=panels).map(|i| tf * i as f64 / panels as f64).collect();
    let (lo, hi) = if tf > 0.0 { (0.0, tf) } else { (tf, 0.0) };
    let sorted: Vec<f64> = if tf > 0.0 { breaks } else { breaks.into_iter().rev().collect() };
    let rule = QuadratureRule1D::<f64>::composite_legendre(&sorted, opts.order)?;
    debug_assert!(rule.nodes.iter().all(|&s| s >= lo && s <= hi));
    // Orientation: int_0^t = sign(t) int_lo^hi.
    let orient = if tf > 0.0 { 1.0 } else { -1.0 };
    let terms: Vec<SpectralCoeffs<T>> = rule
        .nodes
        .par_iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| {
            let f = forcing(lit(s))?;
            let dt = t - lit::<T>(s);
            Ok(apply_multiplier(&f, |mu| cis(dt * mu) * Complex::new(T::zero(), lit::<T>(-orient * w))))
        })
        .collect::<Result<_>>()?;
    let mut acc = terms[0].clone();
    for c in &terms[1..] {
        acc = acc.add(c)?;
    }
    Ok(Some(acc))
}

/// `u(t) = -i int_0^t e^{i (t - s) mu} F(f(s)) ds` in coefficient space.
pub fn duhamel_coeffs<T: Real>(
    forcing: &(dyn Fn(T) -> Result<SpectralCoeffs<T>> + Sync),
    times: &[T],
    opts: &DuhamelOptions,
) -> Result<DuhamelCoeffs<T>> {
    if opts.order == 0 || !(opts.max_panel > 0.0) || !(opts.fd_step > 0.0) {
        return Err(Error::InvalidParameter("Duhamel quadrature needs positive order, panel and step".into()));
    }
    let zero_like = || forcing(T::zero()).map(|f| f.scale(Complex::new(T::zero(), T::zero())));
    let mut coeffs = Vec::with_capacity(times.len());
    let mut residual = 0.0f64;
    let h = lit::<T>(opts.fd_step);
    for &t in times {
        let u = duhamel_at(t, forcing, opts)?.map_or_else(zero_like, Ok)?;
        if to_f64(t).abs() > 2.0 * opts.fd_step {
            let up = duhamel_at(t + h, forcing, opts)?.map_or_else(zero_like, Ok)?;
            let um = duhamel_at(t - h, forcing, opts)?.map_or_else(zero_like, Ok)?;
            let f = forcing(t)?;
            let fnorm = to_f64(plancherel_norm(&f));
            if fnorm > 0.0 {
                // i du/dt + mu u = i e^{i t mu} dw/dt with w = e^{-i t mu} u smooth in t:
                // i (e^{-i h mu} u(t+h) - e^{i h mu} u(t-h)) / 2h - f.
                let wp = apply_multiplier(&up, |mu| cis(-h * mu));
                let wm = apply_multiplier(&um, |mu| cis(h * mu));
                let dt = wp.add(&wm.scale(Complex::new(-T::one(), T::zero())))?.scale(Complex::new(T::zero(), T::one() / (lit::<T>(2.0) * h)));
                let r = dt.add(&f.scale(Complex::new(-T::one(), T::zero())))?;
                residual = residual.max(to_f64(plancherel_norm(&r)) / fnorm);
            }
        }
        coeffs.push(u);
    }
    Ok(DuhamelCoeffs {
        times: times.to_vec(),
        coeffs,
        residual,
    })
}

/// Space-time solution of `i du/dt - Delta_H u = f`, `u(0) = 0`.
pub fn duhamel<T: Real>(
    forcing: &(dyn Fn(T) -> SpaceField<T> + Sync),
    structure: &HTypeStructure<T>,
    spec: &SpectralSpec,
    grid: &SpaceGrid<T>,
    times: &TimeGrid<T>,
    opts: &DuhamelOptions,
) -> Result<(SpaceTimeField<T>, f64)> {
    let fwd = |s: T| forward(&forcing(s), structure, spec);
    let dc = duhamel_coeffs(&fwd, &times.times, opts)?;
    let slices = dc.coeffs.iter().map(|c| inverse(c, structure, grid)).collect::<Result<Vec<_>>>()?;
    Ok((SpaceTimeField::from_slices(*grid, times.clone(), slices)?, dc.residual))
}

/// Ball or annulus localization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalizationKind {
    Ball,
    Annulus,
}

/// Multiplier `phi(Lambda^{-2} mu)`. The ball profile is 1 on `[0, inner]`
/// and 0 beyond `outer`; the annulus profile is the ball profile minus its
/// copy compressed by 4, so it vanishes on `[0, inner/4]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSpec {
    pub kind: LocalizationKind,
    pub scale: f64,
    pub inner: f64,
    pub outer: f64,
}

/// Smooth step from 1 (`s <= a`) to 0 (`s >= b`).
fn smooth_step(s: f64, a: f64, b: f64) -> f64 {
    let g = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    if s <= a {
        1.0
    } else if s >= b {
        0.0
    } else {
        let u = (s - a) / (b - a);
        g(1.0 - u) / (g(1.0 - u) + g(u))
    }
}

impl LocalizationSpec {
    pub fn ball(scale: f64) -> Self {
        Self {
            kind: LocalizationKind::Ball,
            scale,
            inner: 1.0,
            outer: 2.0,
        }
    }

    pub fn annulus(scale: f64) -> Self {
        Self {
            kind: LocalizationKind::Annulus,
            ..Self::ball(scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.inner > 0.0 && self.outer > self.inner) {
            return Err(Error::InvalidParameter("localization needs scale > 0 and 0 < inner < outer".into()));
        }
        Ok(())
    }

    pub fn profile(&self, mu: f64) -> f64 {
        let s = mu / (self.scale * self.scale);
        let ball = smooth_step(s, self.inner, self.outer);
        match self.kind {
            LocalizationKind::Ball => ball,
            LocalizationKind::Annulus => ball - smooth_step(4.0 * s, self.inner, self.outer),
        }
    }

    /// Closed support of the profile in `mu`.
    pub fn support(&self) -> (f64, f64) {
        let l2 = self.scale * self.scale;
        match self.kind {
            LocalizationKind::Ball => (0.0, self.outer * l2),
            LocalizationKind::Annulus => (self.inner * l2 / 4.0, self.outer * l2),
        }
    }
}

pub fn localize_coeffs<T: Real>(c: &SpectralCoeffs<T>, spec: &LocalizationSpec) -> SpectralCoeffs<T> {
    apply_multiplier(c, |mu| Complex::new(lit(spec.profile(to_f64(mu))), T::zero()))
}

pub fn frequency_localize<T: Real>(u0: &SpaceField<T>, structure: &HTypeStructure<T>, spectral: &SpectralSpec, loc: &LocalizationSpec) -> Result<SpaceField<T>> {
    loc.validate()?;
    let c = forward(u0, structure, spectral)?;
    inverse(&localize_coeffs(&c, loc), structure, &u0.grid)
}

/// Fourth-order centred difference along axis `axis` of a tensor layout
/// (`stride` between neighbours, `n` samples); zero outside the box.
fn fd_axis<T: Real>(data: &[Cplx<T>], out: &mut [Cplx<T>], coef: T, idx_of: impl Fn(usize) -> (usize, usize), stride: usize, n: usize, h: T) {
    let c1 = lit::<T>(8.0) / (lit::<T>(12.0) * h);
    let c2 = -T::one() / (lit::<T>(12.0) * h);
    let zero = Complex::new(T::zero(), T::zero());
    for (flat, o) in out.iter_mut().enumerate() {
        let (i, _) = idx_of(flat);
        let at = |off: isize| -> Cplx<T> {
            let j = i as isize + off;
            if j < 0 || j >= n as isize {
                zero
            } else {
                data[(flat as isize + off * stride as isize) as usize]
            }
        };
        *o += ((at(1) - at(-1)) * c1 + (at(2) - at(-2)) * c2) * coef;
    }
}

/// `X_i f` with `X_i = d/dx_i + sum_a c_a(x) d/dz_a`, by fourth-order
/// centred differences.
#[allow(clippy::needless_range_loop)]
pub fn horizontal_derivative<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>, i: usize) -> Result<SpaceField<T>> {
    let grid = f.grid;
    let d2 = grid.horizontal.dims();
    if i >= d2 {
        return Err(Error::DimensionMismatch {
            what: "horizontal direction",
            expected: d2,
            found: i,
        });
    }
    let nx = grid.horizontal.len();
    let n = grid.horizontal.axis.n;
    let hx = grid.horizontal.axis.step();
    let mut out = vec![Complex::new(T::zero(), T::zero()); f.data.len()];
    // d/dx_i: first coordinate slowest, so axis i has stride n^(2d-1-i).
    let stride_x = n.pow((d2 - 1 - i) as u32);
    fd_axis(&f.data, &mut out, T::one(), |flat| (((flat % nx) / stride_x) % n, 0), stride_x, n, hx);
    // Vertical part, pointwise coefficient.
    let nzv = grid.vertical.axis.n;
    let m = grid.vertical.m;
    let hz = grid.vertical.axis.step();
    let coeffs: Vec<Vec<T>> = (0..nx).map(|xi| structure.vertical_coefficients(i, &grid.horizontal.point(xi))).collect();
    for a in 0..m {
        let stride_z = nx * nzv.pow((m - 1 - a) as u32);
        let mut part = vec![Complex::new(T::zero(), T::zero()); f.data.len()];
        fd_axis(&f.data, &mut part, T::one(), |flat| (((flat / nx) / (stride_z / nx)) % nzv, 0), stride_z, nzv, hz);
        for (flat, (o, p)) in out.iter_mut().zip(&part).enumerate() {
            *o += p * coeffs[flat % nx][a];
        }
    }
    SpaceField::new(grid, out)
}

/// `X^beta f = X_{beta_1} ... X_{beta_n} f` for a word of directions.
pub fn horizontal_word<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>, word: &[usize]) -> Result<SpaceField<T>> {
    word.iter().rev().try_fold(f.clone(), |g, &i| horizontal_derivative(&g, structure, i))
}

/// `sum_i X_i^2 f` by finite differences.
pub fn sub_laplacian_fd<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>) -> Result<SpaceField<T>> {
    let mut acc = SpaceField::zeros(f.grid);
    for i in 0..f.grid.horizontal.dims() {
        let g = horizontal_word(f, structure, &[i, i])?;
        acc = acc.axpy(Complex::new(T::one(), T::zero()), &g);
    }
    Ok(acc)
}

pub fn lp_norm<T: Real>(f: &SpaceField<T>, p: f64) -> T {
    lp_norm_samples(&f.data, f.grid.cell_volume(), p)
}

/// `||X^beta f||_q / (Lambda^{|beta| + Q (1/p - 1/q)} ||f||_p)`.
pub fn bernstein_ratio<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>, word: &[usize], p: f64, q: f64, scale: f64) -> Result<f64> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::InvalidParameter(format!("Bernstein ratio needs 1 <= p <= q, got p={p}, q={q}")));
    }
    let xb = horizontal_word(f, structure, word)?;
    let q_dim = structure.homogeneous_dim() as f64;
    let exp = word.len() as f64 + q_dim * (1.0 / p - 1.0 / q);
    let den = to_f64(lp_norm(f, p));
    if den == 0.0 {
        return Err(Error::InvalidParameter("Bernstein ratio of the zero field".into()));
    }
    Ok(to_f64(lp_norm(&xb, q)) / (scale.powf(exp) * den))
}

/// `||(-Delta_H)^{s/2} f||_p / (Lambda^s ||f||_p)`.
pub fn sobolev_lp_ratio<T: Real>(f: &SpaceField<T>, structure: &HTypeStructure<T>, spectral: &SpectralSpec, s: f64, p: f64, scale: f64) -> Result<f64> {
    let c = forward(f, structure, spectral)?;
    let g = inverse(&apply_multiplier(&c, |mu| Complex::new(mu.powf(lit(s / 2.0)), T::zero())), structure, &f.grid)?;
    Ok(to_f64(lp_norm(&g, p)) / (scale.powf(s) * to_f64(lp_norm(f, p))))
}

/// Initial-data families selectable from configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum DataFamily {
    /// `exp(-|x|^2/2 - |z|^2/2)`.
    Gaussian,
    /// Gaussian centred at `x0 e_1` with horizontal phase `xi0 x_1`.
    Coherent { x0: f64, xi0: f64 },
    /// `M^lambda_{aa}(x) e^{i lambda z} exp(-|z|^2/8)` with `a = (order, 0, ...)`.
    HermiteMode { lambda: f64, order: usize },
    /// `int chi(lambda) e^{i lambda z} exp(-lambda |x|^2/4) lambda^d d lambda`
    /// with `chi` a bump on `[1, 2]`: ground-level data that the Schrödinger
    /// flow transports along `z`. Heisenberg only.
    BgxTransport,
}

impl std::str::FromStr for DataFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let args = |name: &str| -> Option<Vec<f64>> {
            let body = s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
            body.split(',').map(|v| v.trim().parse().ok()).collect()
        };
        match s {
            "gaussian" => return Ok(Self::Gaussian),
            "bgx-transport" => return Ok(Self::BgxTransport),
            _ => {}
        }
        if let Some(a) = args("coherent") {
            if let [x0, xi0] = a[..] {
                return Ok(Self::Coherent { x0, xi0 });
            }
        }
        if let Some(a) = args("hermite_mode") {
            if let [lambda, order] = a[..] {
                if lambda != 0.0 && order >= 0.0 && order.fract() == 0.0 {
                    return Ok(Self::HermiteMode { lambda, order: order as usize });
                }
            }
        }
        Err(Error::InvalidParameter(format!(
            "unknown data family {s:?} (expected gaussian, coherent(x0,xi0), hermite_mode(lambda,order) or bgx-transport)"
        )))
    }
}

impl DataFamily {
    pub fn sample<T: Real>(&self, structure: &HTypeStructure<T>, grid: &SpaceGrid<T>) -> Result<SpaceField<T>> {
        let half = lit::<T>(0.5);
        let z2 = |z: &[T]| z.iter().map(|v| *v * *v).sum::<T>();
        let x2 = |x: &[T]| x.iter().map(|v| *v * *v).sum::<T>();
        match *self {
            Self::Gaussian => Ok(SpaceField::from_fn(*grid, |x, z| Complex::new((-(x2(x) + z2(z)) * half).exp(), T::zero()))),
            Self::Coherent { x0, xi0 } => {
                let (x0, xi0) = (lit::<T>(x0), lit::<T>(xi0));
                Ok(SpaceField::from_fn(*grid, |x, z| {
                    let r2 = x2(x) - x[0] * x[0] + (x[0] - x0) * (x[0] - x0);
                    cis(xi0 * x[0]) * (-(r2 + z2(z)) * half).exp()
                }))
            }
            Self::HermiteMode { lambda, order } => {
                let mut lam = vec![T::zero(); structure.m()];
                lam[0] = lit(lambda);
                let lam = DualFrequency::new(lam)?;
                let mut a = vec![0; structure.d()];
                a[0] = order;
                let idx = MultiIndex(a);
                let block = CoefficientBlock::new(vec![idx.clone()], vec![idx]);
                let rt = structure.diagonalize_j(&lam)?.transpose();
                let sr = lam.rho().sqrt();
                let mut scratch = block.scratch::<T>();
                let mut out = [Complex::new(T::zero(), T::zero())];
                let modes: Vec<Cplx<T>> = grid
                    .horizontal
                    .points()
                    .iter()
                    .map(|x| {
                        block.eval(sr, &rt.matvec(x), &mut scratch, &mut out);
                        out[0]
                    })
                    .collect();
                let env = lit::<T>(0.125);
                let mut data = Vec::with_capacity(grid.len());
                for z in grid.vertical.points() {
                    let ph = cis(lam.dot(&z)) * (-z2(&z) * env).exp();
                    data.extend(modes.iter().map(|m| m * ph));
                }
                SpaceField::new(*grid, data)
            }
            Self::BgxTransport => {
                if !structure.is_heisenberg() {
                    return Err(Error::Unsupported("bgx-transport data is defined on Heisenberg groups".into()));
                }
                let d = structure.d();
                let rule = QuadratureRule1D::<f64>::gauss_legendre(32, 1.0, 2.0)?;
                let bump = crate::fan::CutoffSpec::default();
                Ok(SpaceField::from_fn(*grid, |x, z| {
                    let r2 = to_f64(x2(x));
                    let zf = to_f64(z[0]);
                    let v: Complex<f64> = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&l, &w)| cis(l * zf) * (w * bump.eval(l) * (-l * r2 / 4.0).exp() * l.powi(d as i32)))
                        .sum();
                    Complex::new(lit(v.re), lit(v.im))
                }))
            }
        }
    }
}
