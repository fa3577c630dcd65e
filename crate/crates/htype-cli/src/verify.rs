//! The `verify` suite: every module invariant at desk scale, one residual each.

use std::f64::consts::PI;

use htype::evolve::{
    bernstein_ratio, duhamel_coeffs, schrodinger_coeffs, schrodinger_from_coeffs, unitarity_drift, wave_propagate, DuhamelOptions,
    Equation, WaveData,
};
use htype::fan::{extend, kappa_sigma, kappa_sigma_bound, restrict, wave_kernel, CutoffSpec, FanData, FanSpec, WaveSign};
use htype::gft::{forward, inverse, plancherel_norm, SpectralSpec};
use htype::grid::{HorizontalGrid, SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};
use htype::norms::{admissible_check, dilation_scan, hausdorff_young_check, loglog_slope, MixedNormSpec};
use htype::quadrature::QuadratureRule1D;
use htype::special::{hermite_fn, laguerre_radial, special_hermite, MultiIndex};
use htype::twisted::{
    check_series_parameters, project_k, series_partial_sum, twisted_convolve, twisted_laplacian_apply, NormSource, TwistedField,
};
use htype::Structure;
use num_complex::Complex;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

type C = Complex<f64>;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub module: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &'static str, module: &'static str, residual: f64, tolerance: f64) -> Check {
    Check {
        name,
        module,
        residual,
        tolerance,
        passed: residual < tolerance,
    }
}

fn heisenberg() -> Structure {
    Structure::heisenberg(1).expect("d = 1")
}

fn hermite_gram() -> f64 {
    let rule = QuadratureRule1D::<f64>::gauss_hermite(48).expect("48 nodes");
    let vals: Vec<Vec<f64>> = (0..=32).map(|k| rule.nodes.iter().map(|&t| hermite_fn(k, t)).collect()).collect();
    let mut worst = 0.0f64;
    for (i, a) in vals.iter().enumerate() {
        for (j, b) in vals.iter().enumerate().skip(i) {
            let g: f64 = a.iter().zip(b).zip(&rule.weights).map(|((x, y), w)| x * y * w).sum();
            worst = worst.max((g - f64::from(u8::from(i == j))).abs());
        }
    }
    worst
}

fn special_hermite_gram() -> f64 {
    let lam = 1.3f64;
    let sc = (2.0 / lam).sqrt();
    let g = QuadratureRule1D::<f64>::gauss_hermite(24).expect("24 nodes");
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for (&a, &wa) in g.nodes.iter().zip(&g.weights) {
        for (&b, &wb) in g.nodes.iter().zip(&g.weights) {
            pts.push([a * sc, b * sc]);
            w.push(wa * wb * sc * sc);
        }
    }
    let idx = MultiIndex::up_to(1, 3);
    let vals: Vec<Vec<C>> = idx
        .iter()
        .flat_map(|a| idx.iter().map(move |b| (a.clone(), b.clone())))
        .map(|(a, b)| pts.iter().map(|p| special_hermite(&a, &b, lam, p).expect("d = 1")).collect())
        .collect();
    let mut worst = 0.0f64;
    for (i, a) in vals.iter().enumerate() {
        for (j, b) in vals.iter().enumerate().skip(i) {
            let g: C = a.iter().zip(b).zip(&w).map(|((x, y), w)| x * y.conj() * *w).sum();
            worst = worst.max((g - f64::from(u8::from(i == j))).norm());
        }
    }
    worst
}

fn laguerre_identity() -> Result<f64, CliError> {
    let lam = 1.0;
    let grid = HorizontalGrid::new(1, 71, 9.5)?;
    let phis: Vec<TwistedField<f64>> = (0..=2)
        .map(|k| TwistedField::heisenberg(grid, lam, |x| C::new(laguerre_radial(k, 1, lam * (x[0] * x[0] + x[1] * x[1])), 0.0)))
        .collect::<htype::Result<_>>()?;
    let c = 2.0 * PI / lam;
    let mut worst = 0.0f64;
    for (j, pj) in phis.iter().enumerate() {
        for (k, pk) in phis.iter().enumerate() {
            let out = twisted_convolve(pj, pk)?;
            let expect = if j == k { pj.scale(C::new(c, 0.0)) } else { pj.zeros_like() };
            worst = worst.max(out.sub(&expect).l2_norm() / (c * pj.l2_norm()));
        }
    }
    Ok(worst)
}

fn projector_checks() -> Result<(f64, f64), CliError> {
    let grid = HorizontalGrid::new(1, 61, 8.0)?;
    let g = TwistedField::heisenberg(grid, 1.0, |x| {
        let r2 = (x[0] - 0.5f64).powi(2) + (x[1] + 0.2f64).powi(2);
        C::new((-r2 / 2.0).exp(), 0.0)
    })?;
    let (mut idem, mut eigen) = (0.0f64, 0.0f64);
    for k in 0..=2 {
        let p = project_k(&g, k)?;
        let pp = project_k(&p, k)?;
        idem = idem.max(pp.sub(&p).l2_norm() / g.l2_norm());
        let lap = twisted_laplacian_apply(&p, 24);
        eigen = eigen.max(lap.field.add(&p.scale(C::new((2 * k + 1) as f64, 0.0))).l2_norm() / ((2 * k + 1) as f64 * g.l2_norm()));
    }
    Ok((idem, eigen))
}

/// Gaussian in `x`, oscillating Gaussian in the first central coordinate.
fn profile(x: &[f64], z: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let z2: f64 = z.iter().map(|v| v * v).sum();
    (-r2 / 2.0 - z2 / 4.5).exp() * (4.0 * z[0]).cos()
}

fn test_field(grid: SpaceGrid<f64>) -> SpaceField<f64> {
    SpaceField::from_fn(grid, |x: &[f64], z: &[f64]| C::new(profile(x, z), 0.0))
}

fn small_spectral() -> (SpaceGrid<f64>, SpectralSpec) {
    let grid = SpaceGrid::new(1, 1, 36, 6.0, 64, 10.0).expect("positive sizes");
    let spec = SpectralSpec {
        n_max: 16,
        radial_nodes: 32,
        lambda_max: 6.0,
        ..SpectralSpec::default()
    };
    (grid, spec)
}

/// Runs the suite; `cfg` supplies the structure and the round-trip grid.
pub fn run(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let s = &cfg.structure;
    let h = heisenberg();

    let v = s.validate(htype::group::DEFAULT_VALIDATION_SAMPLES, 0);
    out.push(check("H-type identity J_mu^2 = -|mu|^2 I", "group_core", v.max_residual.max(v.max_antisymmetry), 1e-12));
    let a = htype::group::GroupPoint::new(vec![0.3; 2 * s.d()], vec![-0.7; s.m()])?;
    let b = htype::group::GroupPoint::new(vec![-1.1; 2 * s.d()], vec![0.2; s.m()])?;
    let lhs = s.multiply(&s.multiply(&a, &b)?, &a.inverse())?;
    let rhs = s.multiply(&a, &s.multiply(&b, &a.inverse())?)?;
    out.push(check("group law associativity", "group_core", lhs.distance_sup(&rhs), 1e-13));

    out.push(check("Hermite functions orthonormal (k <= 32)", "special_fn", hermite_gram(), 1e-8));
    out.push(check("special Hermite functions orthonormal (orders <= 3)", "special_fn", special_hermite_gram(), 1e-8));

    out.push(check("Laguerre twisted convolution identity (j, k <= 2)", "twisted", laguerre_identity()?, 1e-6));
    let (idem, eigen) = projector_checks()?;
    out.push(check("projector idempotence (k <= 2)", "twisted", idem, 1e-5));
    out.push(check("projector eigenrelation (k <= 2)", "twisted", eigen, 1e-5));
    let rep = series_partial_sum(1.0, 1.0, 1, 1, 10_000, NormSource::Measured)?;
    out.push(check(
        "projector series S_1e3 vs S_1e4",
        "twisted",
        (rep.sum_at(10_000) - rep.sum_at(1000)).abs() / rep.sum_at(10_000),
        1e-3,
    ));
    out.push(check(
        "excluded (m, p) = (1, 2) rejected",
        "twisted",
        f64::from(u8::from(check_series_parameters(2.0, 1.0, 1).is_ok())),
        0.5,
    ));

    let grid = cfg.grid.space(s)?;
    let spectral = cfg.spectral.spectral();
    let f = test_field(grid);
    let c = forward(&f, s, &spectral)?;
    let n = f.l2_norm();
    out.push(check("Plancherel identity (config grid)", "gft", (plancherel_norm(&c) - n).abs() / n, 1e-4));
    // Truncation-limited at config resolution; the fine-grid bound lives in the acceptance suite.
    out.push(check("inversion round trip (config grid)", "gft", inverse(&c, s, &grid)?.relative_l2(&f), 2e-2));

    let (grid1, spec1) = small_spectral();
    let f1 = test_field(grid1);
    let c1 = forward(&f1, &h, &spec1)?;
    let u = schrodinger_from_coeffs(&c1, &h, &grid1, &TimeGrid::inclusive(0.0, 4.0, 9)?)?;
    out.push(check("Schrodinger unitarity drift on [0, 4]", "evolve", unitarity_drift(&c1, &u).spectral_drift, 1e-10));
    let ga = schrodinger_coeffs(&schrodinger_coeffs(&c1, 0.7), 1.1);
    let gb = schrodinger_coeffs(&c1, 1.8);
    out.push(check(
        "Schrodinger group law",
        "evolve",
        plancherel_norm(&ga.add(&gb.scale(C::new(-1.0, 0.0)))?) / plancherel_norm(&c1),
        1e-12,
    ));
    let v0 = SpaceField::from_fn(grid1, |x: &[f64], z: &[f64]| C::new(0.0, x[0] * profile(x, z)));
    let sol = wave_propagate(&WaveData::new(f1.clone(), v0)?, &h, &spec1, &TimeGrid::inclusive(0.0, 4.0, 5)?)?;
    out.push(check("wave energy drift", "evolve", sol.energy_drift(), 1e-8));
    let forcing = |t: f64| Ok(c1.scale(C::new((-t).exp() * (2.0 * t).cos(), 0.0)));
    let duh = duhamel_coeffs(&forcing, &[0.0, 0.5, 2.0], &DuhamelOptions::default())?;
    out.push(check("Duhamel residual", "evolve", duh.residual, 1e-3));
    let word = [0usize, 1];
    let scales = [1.0, 2.0, 4.0];
    let ratios: Vec<f64> = scales
        .iter()
        .map(|&l| bernstein_ratio(&SpaceField::new(grid1.dilated(1.0 / l), f1.data.clone())?, &h, &word, 2.0, 4.0, 1.0))
        .collect::<htype::Result<_>>()?;
    out.push(check("Bernstein exponent |beta| + Q(1/p - 1/q)", "evolve", (loglog_slope(&scales, &ratios) - 3.0).abs(), 0.1));

    let psi = CutoffSpec::default();
    let tg = SpaceGrid::new(1, 1, 10, 3.0, 8, 3.0)?;
    let times = TimeGrid::midpoint(-2.0, 2.0, 12)?;
    let fs = FanSpec {
        k_max: 3,
        mu_nodes: 6,
        sphere_resolution: 1,
        col_band: 4,
    };
    let ft = SpaceTimeField::from_fn(tg, times.clone(), |t: f64, x: &[f64], z: &[f64]| {
        C::new((-(x[0] - 0.3).powi(2) - x[1] * x[1] - z[0] * z[0] - t * t).exp(), 0.2 * x[1] * (-t * t).exp())
    });
    let mut theta = FanData::<f64>::zeros(&psi, 1, 1, &fs)?;
    for (li, lvl) in theta.levels.iter_mut().enumerate() {
        for (i, v) in lvl.data.iter_mut().enumerate() {
            *v = C::new(((i * 7 + li) % 5) as f64 - 2.0, ((i * 3 + li) % 4) as f64 - 1.5);
        }
    }
    let lhs = extend(&theta, &psi, &h, &tg, &times)?.inner(&ft);
    let rhs = theta.inner(&restrict(&ft, &h, &psi, &fs)?, Some(&psi))?;
    out.push(check("restriction/extension adjointness", "fan", (lhs - rhs).norm() / lhs.norm(), 1e-10));
    let kg = SpaceGrid::new(1, 1, 5, 1.0, 5, 1.0)?;
    let kt = TimeGrid::inclusive(-2.0, 2.0, 5)?;
    let kspec = FanSpec {
        k_max: 16,
        ..FanSpec::default()
    };
    let kf = kappa_sigma(&psi, &h, &kg, &kt, &kspec)?;
    out.push(check("sup |kappa_Sigma| / explicit bound", "fan", kf.sup_norm() / kappa_sigma_bound(&psi, 1, 1), 1.0));
    let wp = wave_kernel(&psi, WaveSign::Plus, &h, &kg, &kt, &kspec)?;
    let wm = wave_kernel(&psi, WaveSign::Minus, &h, &kg, &kt, &kspec)?;
    let nk = kg.len();
    let nt = kt.len();
    let sym = (0..nt)
        .flat_map(|ti| (0..nk).map(move |i| (ti, i)))
        .map(|(ti, i)| (wm.kernel.field.data[ti * nk + i] - wp.kernel.field.data[ti * nk + i].conj()).norm())
        .fold(0.0, f64::max);
    out.push(check("wave kernel symmetry kappa_- = conj kappa_+", "fan", sym, 1e-12));

    let adm = admissible_check(4.0, 4.0, f64::INFINITY, 1, 1, Equation::Schrodinger);
    out.push(check("(4, 4, inf) admissible with sigma = 1", "norms", if adm.admissible { (adm.sigma - 1.0).abs() } else { 1.0 }, 1e-12));
    let hy = hausdorff_young_check(&f1, 2.0, 2.0)?;
    out.push(check("Hausdorff-Young at a = b = 2 is an identity", "norms", (hy.ratio - 1.0).abs(), 1e-10));
    let hy = hausdorff_young_check(&f1, 4.0, 4.0 / 3.0)?;
    out.push(check("Hausdorff-Young ratio <= 1 at (4, 4/3)", "norms", hy.ratio, 1.0 + 1e-12));
    let spec = MixedNormSpec::new(f64::INFINITY, 4.0, 4.0)?;
    let scan = dilation_scan(&f1, &h, &spec1, &TimeGrid::midpoint(0.0, 1.0, 8)?, &spec, Equation::Schrodinger, 1.0, &[1.0, 2.0, 4.0])?;
    out.push(check(
        "mixed-norm dilation exponent",
        "norms",
        (scan.mixed_exponent - scan.expected_mixed_exponent).abs(),
        1e-6,
    ));
    out.push(check("L2 dilation exponent d + m", "norms", (scan.l2_exponent - scan.expected_l2_exponent).abs(), 1e-6));
    out.push(check("Strichartz ratio spread at critical sigma", "norms", scan.ratio_spread, 0.02));
    Ok(out)
}

