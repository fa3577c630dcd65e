//! Mixed Lebesgue norms `L^r_v L^q_t L^p_h`, admissible exponents,
//! Strichartz ratios, dilation scans and the mixed Hausdorff-Young check.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{schrodinger_from_coeffs, wave_propagate, Equation, WaveData};
use crate::gft::{forward, plancherel_norm, sobolev_norm, SpectralSpec};
use crate::grid::{SpaceField, SpaceTimeField, TimeGrid};
use crate::group::HTypeStructure;
use crate::real::{cis, lit, to_f64, Real};

/// Exponents of `L^r_v L^q_t L^p_h`, applied outer to inner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedNormSpec {
    pub r: f64,
    pub q: f64,
    pub p: f64,
}

impl MixedNormSpec {
    pub fn new(r: f64, q: f64, p: f64) -> Result<Self> {
        let s = Self { r, q, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("q", self.q), ("p", self.p)] {
            if !(v >= 1.0) {
                return Err(Error::InvalidParameter(format!("exponent {name} = {v} outside [1, inf]")));
            }
        }
        Ok(())
    }
}

/// `(sum_i w_i |a_i|^p)^{1/p}`, or the maximum for `p = inf`.
fn weighted_lp<T: Real>(vals: impl Iterator<Item = (T, T)>, p: f64) -> T {
    if p.is_infinite() {
        return vals.fold(T::zero(), |m, (v, _)| m.max(v));
    }
    let pt = lit::<T>(p);
    vals.map(|(v, w)| v.powf(pt) * w).sum::<T>().powf(T::one() / pt)
}

/// `||u||_{L^r_v L^q_t L^p_h}` with the time weights of `u` and grid cell
/// volumes; infinite orders are grid maxima.
pub fn mixed_norm<T: Real>(u: &SpaceTimeField<T>, spec: &MixedNormSpec) -> T {
    let grid = u.grid;
    let nx = grid.horizontal.len();
    let nz = grid.vertical.len();
    let hx = grid.horizontal.cell_volume();
    let hz = grid.vertical.cell_volume();
    let n = u.slice_len();
    let per_z: Vec<T> = (0..nz)
        .into_par_iter()
        .map(|zi| {
            let inner = u.times.weights.iter().enumerate().map(|(ti, &w)| {
                let row = &u.data[ti * n + zi * nx..ti * n + (zi + 1) * nx];
                (weighted_lp(row.iter().map(|c| (c.norm(), hx)), spec.p), w)
            });
            weighted_lp(inner, spec.q)
        })
        .collect();
    weighted_lp(per_z.into_iter().map(|v| (v, hz)), spec.r)
}

/// `||u||_{L^r_v L^p_h L^q_t}`: time innermost.
pub fn mixed_norm_time_inner<T: Real>(u: &SpaceTimeField<T>, spec: &MixedNormSpec) -> T {
    let grid = u.grid;
    let nx = grid.horizontal.len();
    let nz = grid.vertical.len();
    let hx = grid.horizontal.cell_volume();
    let hz = grid.vertical.cell_volume();
    let n = u.slice_len();
    let per_z: Vec<T> = (0..nz)
        .into_par_iter()
        .map(|zi| {
            let inner = (0..nx).map(|xi| {
                let col = u.times.weights.iter().enumerate().map(|(ti, &w)| (u.data[ti * n + zi * nx + xi].norm(), w));
                (weighted_lp(col, spec.q), hx)
            });
            weighted_lp(inner, spec.p)
        })
        .collect();
    weighted_lp(per_z.into_iter().map(|v| (v, hz)), spec.r)
}

/// Outcome of the admissibility test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// Regularity index; meaningful whenever the scaling condition holds.
    pub sigma: f64,
    pub diagnostics: Vec<String>,
}

/// Dimensional budget of the scaling condition: `Q/2` for Schrödinger,
/// `(Q-2)/2` for the wave equation.
fn budget(d: usize, m: usize, eq: Equation) -> f64 {
    let q = (2 * d + 2 * m) as f64;
    match eq {
        Equation::Schrodinger => q / 2.0,
        Equation::Wave => (q - 2.0) / 2.0,
    }
}

fn inv(v: f64) -> f64 {
    if v.is_infinite() {
        0.0
    } else {
        1.0 / v
    }
}

/// Critical regularity `budget - t/q - 2d/p - 2m/r` with `t = 2` for
/// Schrödinger and `t = 1` for the wave equation.
pub fn critical_sigma(p: f64, q: f64, r: f64, d: usize, m: usize, eq: Equation) -> f64 {
    let time = match eq {
        Equation::Schrodinger => 2.0,
        Equation::Wave => 1.0,
    };
    budget(d, m, eq) - time * inv(q) - 2.0 * d as f64 * inv(p) - 2.0 * m as f64 * inv(r)
}

/// Checks `(r, p, q)` against the admissible set of the Strichartz estimates.
pub fn admissible_check(p: f64, q: f64, r: f64, d: usize, m: usize, eq: Equation) -> Admissibility {
    let mut diag = Vec::new();
    for (name, v) in [("p", p), ("q", q), ("r", r)] {
        if !(v >= 2.0) {
            diag.push(format!("{name} = {v} outside [2, inf]"));
        }
    }
    if p > q {
        diag.push(format!("p <= q violated ({p} > {q})"));
    }
    if p > r {
        diag.push(format!("p <= r violated ({p} > {r})"));
    }
    if m == 1 {
        if r.is_finite() {
            diag.push("r >= 2 + 4/(m-1) unsatisfiable for m=1 unless r=inf".to_string());
        }
        if p == 2.0 {
            diag.push("(m, p) = (1, 2) is excluded".to_string());
        }
    } else {
        let rmin = 2.0 + 4.0 / (m as f64 - 1.0);
        if r < rmin {
            diag.push(format!("r >= 2 + 4/(m-1) = {rmin} violated (r = {r})"));
        }
    }
    let sigma = critical_sigma(p, q, r, d, m, eq);
    if sigma < -1e-12 {
        diag.push(format!("scaling condition violated: sigma = {sigma} < 0"));
    }
    Admissibility {
        admissible: diag.is_empty(),
        sigma,
        diagnostics: diag,
    }
}

/// `||u||_{mixed on the window} / ||data||_{H^sigma}`; for the wave equation
/// the data norm is `||nabla_H u0||_{H^sigma} + ||v0||_{H^sigma}`.
#[derive(Clone, Debug, Serialize)]
pub struct StrichartzRatio {
    pub mixed: f64,
    pub data_norm: f64,
    pub l2: f64,
    pub ratio: f64,
}

/// Strichartz ratio for data at rest. `sigma` below the critical value of
/// `spec` is rejected, as is inadmissible `spec` unless `explore` is set.
#[allow(clippy::too_many_arguments)]
pub fn strichartz_ratio<T: Real>(
    u0: &SpaceField<T>,
    structure: &HTypeStructure<T>,
    spectral: &SpectralSpec,
    times: &TimeGrid<T>,
    spec: &MixedNormSpec,
    eq: Equation,
    sigma: f64,
    explore: bool,
) -> Result<StrichartzRatio> {
    spec.validate()?;
    let (d, m) = (structure.d(), structure.m());
    let adm = admissible_check(spec.p, spec.q, spec.r, d, m, eq);
    if !adm.admissible && !explore {
        return Err(Error::Inadmissible(adm.diagnostics.join("; ")));
    }
    if sigma < adm.sigma - 1e-12 {
        return Err(Error::Inadmissible(format!("sigma = {sigma} below the critical value {}", adm.sigma)));
    }
    let c0 = forward(u0, structure, spectral)?;
    let l2 = to_f64(plancherel_norm(&c0));
    if l2 == 0.0 {
        return Err(Error::InvalidParameter("Strichartz ratio of zero data is undefined".into()));
    }
    let (u, data_norm) = match eq {
        Equation::Schrodinger => (schrodinger_from_coeffs(&c0, structure, &u0.grid, times)?, to_f64(sobolev_norm(&c0, lit(sigma))?)),
        Equation::Wave => {
            let sol = wave_propagate(&WaveData::at_rest(u0.clone()), structure, spectral, times)?;
            (sol.field, to_f64(sobolev_norm(&c0, lit(sigma + 1.0))?))
        }
    };
    let mixed = to_f64(mixed_norm(&u, spec));
    Ok(StrichartzRatio {
        mixed,
        data_norm,
        l2,
        ratio: mixed / data_norm,
    })
}

/// One row of a dilation scan.
#[derive(Clone, Debug, Serialize)]
pub struct DilationRow {
    pub scale: f64,
    pub mixed: f64,
    pub l2: f64,
    pub h_sigma: f64,
    pub ratio: f64,
}

/// Dilation scan with fitted and predicted exponents.
#[derive(Clone, Debug, Serialize)]
pub struct DilationScan {
    pub rows: Vec<DilationRow>,
    pub mixed_exponent: f64,
    pub expected_mixed_exponent: f64,
    pub l2_exponent: f64,
    pub expected_l2_exponent: f64,
    /// Max relative deviation of the ratio from its mean.
    pub ratio_spread: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Exponent `e` with `||u_Lambda||_mixed = Lambda^e ||u||_mixed` for the
/// dilation `u_Lambda(t, x, z) = u(Lambda^{-s} t, Lambda^{-1} x, Lambda^{-2} z)`,
/// `s = 2` (Schrödinger) or `1` (wave).
pub fn mixed_dilation_exponent(spec: &MixedNormSpec, d: usize, m: usize, eq: Equation) -> f64 {
    let time = match eq {
        Equation::Schrodinger => 2.0,
        Equation::Wave => 1.0,
    };
    2.0 * m as f64 * inv(spec.r) + time * inv(spec.q) + 2.0 * d as f64 * inv(spec.p)
}

/// Runs the pipeline on `u0(x/Lambda, z/Lambda^2)` for each scale with the
/// grid, frequency band and time window rescaled to match. The dilated data
/// sampled on `grid.dilated(Lambda)` has exactly the samples of `u0`.
#[allow(clippy::too_many_arguments)]
pub fn dilation_scan<T: Real>(
    u0: &SpaceField<T>,
    structure: &HTypeStructure<T>,
    spectral: &SpectralSpec,
    times: &TimeGrid<T>,
    spec: &MixedNormSpec,
    eq: Equation,
    sigma: f64,
    scales: &[f64],
) -> Result<DilationScan> {
    if scales.len() < 2 || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("dilation scan needs at least two positive scales".into()));
    }
    let (d, m) = (structure.d(), structure.m());
    let time_power = match eq {
        Equation::Schrodinger => 2,
        Equation::Wave => 1,
    };
    let mut rows = Vec::with_capacity(scales.len());
    for &s in scales {
        let st = lit::<T>(s);
        let u0 = SpaceField::new(u0.grid.dilated(st), u0.data.clone())?;
        let ts = times.scaled(st.powi(time_power));
        let r = strichartz_ratio(&u0, structure, &spectral.dilated(s), &ts, spec, eq, sigma, true)?;
        rows.push(DilationRow {
            scale: s,
            mixed: r.mixed,
            l2: r.l2,
            h_sigma: r.data_norm,
            ratio: r.ratio,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.scale).collect();
    let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64;
    Ok(DilationScan {
        mixed_exponent: loglog_slope(&xs, &rows.iter().map(|r| r.mixed).collect::<Vec<_>>()),
        expected_mixed_exponent: mixed_dilation_exponent(spec, d, m, eq),
        l2_exponent: loglog_slope(&xs, &rows.iter().map(|r| r.l2).collect::<Vec<_>>()),
        expected_l2_exponent: (d + m) as f64,
        ratio_spread: rows.iter().map(|r| (r.ratio - mean).abs() / mean).fold(0.0, f64::max),
        rows,
    })
}

/// Both sides of `||F_z f||_{L^{b'} L^{a'}} <= ||f||_{L^b L^{a'}}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HausdorffYoungReport {
    pub fourier_side: f64,
    pub space_side: f64,
    pub ratio: f64,
}

/// Conjugate exponent.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Mixed Hausdorff-Young check with `X` the horizontal layer and `Z` the
/// vertical one. The vertical transform is sampled on the reciprocal lattice
/// of the grid with measure `d lambda / (2 pi)^m`, so `a = b = 2` is an
/// identity.
pub fn hausdorff_young_check<T: Real>(f: &SpaceField<T>, a: f64, b: f64) -> Result<HausdorffYoungReport> {
    if !(a >= 1.0 && b >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponents must lie in [1, inf], got a={a}, b={b}")));
    }
    let ap = conjugate(a);
    if b > a.min(ap) {
        return Err(Error::Inadmissible(format!(
            "b = {b} > min(a, a') = {}: the Minkowski ordering step needs b <= a' and a' <= b'",
            a.min(ap)
        )));
    }
    let bp = conjugate(b);
    let grid = f.grid;
    let nx = grid.horizontal.len();
    let hx = grid.horizontal.cell_volume();
    let vz = grid.vertical;
    let nz = vz.len();
    let hz = vz.cell_volume();
    let m = vz.m;
    let n = vz.axis.n;
    let h = to_f64(vz.axis.step());
    // Reciprocal lattice: lambda_j = 2 pi (j - n/2) / (n h), per axis.
    let dual: Vec<f64> = (0..n).map(|j| 2.0 * std::f64::consts::PI * (j as f64 - (n / 2) as f64) / (n as f64 * h)).collect();
    let dual_cell = (2.0 * std::f64::consts::PI / (n as f64 * h)).powi(m as i32) / (2.0 * std::f64::consts::PI).powi(m as i32);
    let zs = vz.points();
    let space_side = {
        let per_z = (0..nz).map(|zi| (weighted_lp(f.slice(zi).iter().map(|c| (c.norm(), hx)), ap), hz));
        to_f64(weighted_lp(per_z, b))
    };
    let fourier: Vec<T> = (0..n.pow(m as u32))
        .into_par_iter()
        .map(|li| {
            let mut idx = li;
            let lam: Vec<T> = (0..m)
                .map(|_| {
                    let v = dual[idx % n];
                    idx /= n;
                    lit(v)
                })
                .collect();
            let mut acc = vec![Complex::new(T::zero(), T::zero()); nx];
            for (zi, z) in zs.iter().enumerate() {
                let dot: T = lam.iter().zip(z).map(|(a, b)| *a * *b).sum();
                let ph = cis(-dot) * hz;
                acc.iter_mut().zip(f.slice(zi)).for_each(|(o, v)| *o += v * ph);
            }
            weighted_lp(acc.iter().map(|c| (c.norm(), hx)), ap)
        })
        .collect();
    let fourier_side = to_f64(weighted_lp(fourier.into_iter().map(|v| (v, lit::<T>(dual_cell))), bp));
    Ok(HausdorffYoungReport {
        fourier_side,
        space_side,
        ratio: fourier_side / space_side,
    })
}
