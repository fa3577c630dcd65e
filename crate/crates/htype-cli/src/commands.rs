//! The batch commands other than `verify`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use htype::evolve::{
    schrodinger_coeffs, schrodinger_from_coeffs, unitarity_drift, wave_propagate, DataFamily, Equation, WaveData,
};
use htype::fan::{fmt_num, kappa_sigma, kappa_sigma_bound, wave_kernel, WaveSign, KERNEL_PATH_TOLERANCE};
use htype::gft::{forward, plancherel_norm};
use htype::grid::{SpaceField, SpaceGrid, TimeGrid};
use htype::norms::{admissible_check, dilation_scan, loglog_slope, MixedNormSpec};
use htype::twisted::{dual_exponent, projector_norm_estimate, rho_exponent, NormOptions};
use serde_json::json;

use crate::config::{KernelKind, RunConfig};
use crate::error::CliError;

/// Result of a command: pass/fail, gating tolerances and written files.
#[derive(Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl Outcome {
    fn passing() -> Self {
        Self {
            passed: true,
            ..Self::default()
        }
    }

    pub fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
        self.write(dir, name, &text)
    }
}

fn csv_row(out: &mut String, vals: &[f64]) {
    let cells: Vec<String> = vals.iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(out, "{}", cells.join(","));
}

fn family(s: &str) -> Result<DataFamily, CliError> {
    Ok(s.parse()?)
}

pub fn evolve(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = &cfg.structure;
    let grid = cfg.grid.space(s)?;
    let spec = cfg.spectral.spectral();
    let times = cfg.grid.forward_times()?;
    let e = &cfg.evolve;
    let u0 = family(&e.data)?.sample(s, &grid)?;
    let mut o = Outcome::passing();
    let mut csv = String::from("t,l2,sup,invariant\n");
    let report = match e.equation {
        Equation::Schrodinger => {
            let c0 = forward(&u0, s, &spec)?;
            c0.write(&out.join("coeffs.bin"), Some(&grid))?;
            o.outputs.extend(["coeffs.bin".to_string(), "coeffs.bin.json".to_string()]);
            let u = schrodinger_from_coeffs(&c0, s, &grid, &times)?;
            for (i, &t) in times.times.iter().enumerate() {
                let slice = u.time_slice(i);
                csv_row(&mut csv, &[t, slice.l2_norm(), slice.sup_norm(), plancherel_norm(&schrodinger_coeffs(&c0, t))]);
            }
            let rep = unitarity_drift(&c0, &u);
            o.passed = rep.spectral_drift <= e.unitarity_tol;
            o.tolerances.insert("evolve.unitarity_drift".into(), e.unitarity_tol);
            json!({
                "equation": "schrodinger",
                "data": e.data,
                "spectral_tail": c0.tail,
                "unitarity_drift": rep.spectral_drift,
                "grid_l2_drift": rep.grid_drift,
                "invariant": "Plancherel norm of the propagated coefficients",
            })
        }
        Equation::Wave => {
            let v0 = match &e.velocity {
                Some(v) => family(v)?.sample(s, &grid)?,
                None => SpaceField::zeros(grid),
            };
            let sol = wave_propagate(&WaveData::new(u0, v0)?, s, &spec, &times)?;
            sol.amplitudes.plus.write(&out.join("coeffs_plus.bin"), Some(&grid))?;
            sol.amplitudes.minus.write(&out.join("coeffs_minus.bin"), Some(&grid))?;
            o.outputs.extend(["coeffs_plus.bin", "coeffs_plus.bin.json", "coeffs_minus.bin", "coeffs_minus.bin.json"].map(String::from));
            for (i, &t) in times.times.iter().enumerate() {
                let slice = sol.field.time_slice(i);
                csv_row(&mut csv, &[t, slice.l2_norm(), slice.sup_norm(), sol.energy[i]]);
            }
            let drift = sol.energy_drift();
            o.passed = drift <= e.energy_tol;
            o.tolerances.insert("evolve.energy_drift".into(), e.energy_tol);
            json!({
                "equation": "wave",
                "data": e.data,
                "velocity": e.velocity,
                "energy": sol.amplitudes.conserved_energy(),
                "energy_drift": drift,
                "invariant": "energy ||u_t||^2 + ||grad_H u||^2",
            })
        }
    };
    o.write(out, "evolve.csv", &csv)?;
    o.write_json(out, "evolve.json", &report)?;
    Ok(o)
}

pub fn kernel(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = &cfg.structure;
    let k = &cfg.kernel;
    let grid = SpaceGrid::new(s.d(), s.m(), k.n_x, k.half_x, k.n_z, k.half_z)?;
    let times = TimeGrid::inclusive(-k.horizon, k.horizon, k.n_t)?;
    let fan = cfg.spectral.fan();
    let psi = &cfg.psi;
    let mut o = Outcome::passing();
    let report = match k.kind {
        KernelKind::Schrodinger => {
            let kf = kappa_sigma(psi, s, &grid, &times, &fan)?;
            let sup = kf.sup_norm();
            let bound = kappa_sigma_bound(psi, s.d(), s.m());
            o.passed = sup < bound;
            o.tolerances.insert("kernel.path_discrepancy".into(), KERNEL_PATH_TOLERANCE);
            o.tolerances.insert("kernel.sup_over_bound".into(), 1.0);
            o.write(out, "kernel.csv", &kf.to_csv())?;
            json!({
                "kind": "schrodinger",
                "sup": sup,
                "bound": bound,
                "margin": 1.0 - sup / bound,
                "truncation_tail_bound": kf.tail_bound,
                "path_discrepancy": kf.path_discrepancy,
            })
        }
        KernelKind::WavePlus | KernelKind::WaveMinus => {
            let sign = if k.kind == KernelKind::WavePlus { WaveSign::Plus } else { WaveSign::Minus };
            let wk = wave_kernel(psi, sign, s, &grid, &times, &fan)?;
            o.write(out, "kernel.csv", &wk.kernel.to_csv())?;
            json!({
                "kind": k.kind,
                "sup": wk.kernel.sup_norm(),
                "truncation_tail_bound": wk.kernel.tail_bound,
                "compact_form_discrepancy_weight_mu_dm": wk.compact_weight_dm_discrepancy,
                "compact_form_discrepancy_weight_mu": wk.compact_weight_one_discrepancy,
            })
        }
    };
    o.write_json(out, "kernel.json", &report)?;
    Ok(o)
}

pub fn projector_norms(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let pn = &cfg.projector_norms;
    let d = cfg.structure.d();
    let opts = NormOptions {
        d,
        lambda: pn.lambda,
        ..NormOptions::default()
    };
    let (p, r) = (pn.p.0, pn.r.0);
    // Growth through L^p -> L^2 -> L^r.
    let exponent = (rho_exponent(dual_exponent(p), d)? + rho_exponent(r, d)?) / 2.0;
    let mut csv = String::from("k,norm,bound,ratio\n");
    let mut o = Outcome::passing();
    let mut levels = Vec::new();
    let mut methods = Vec::new();
    for k in pn.k_min..=pn.k_max {
        let est = projector_norm_estimate(k, p, r, &opts)?;
        let level = (2 * k + d) as f64;
        let bound = level.powf(exponent);
        csv_row(&mut csv, &[k as f64, est.value, bound, est.value / bound]);
        o.passed &= est.converged;
        levels.push((level, est.value));
        methods.push(json!({"k": k, "method": est.method, "witness": est.witness, "iterations": est.iterations, "converged": est.converged}));
    }
    o.tolerances.insert("projector_norms.power_iteration".into(), opts.tol);
    let slope = (levels.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = levels.iter().copied().unzip();
        loglog_slope(&xs, &ys)
    });
    o.write(out, "projector_norms.csv", &csv)?;
    o.write_json(
        out,
        "projector_norms.json",
        &json!({
            "p": pn.p.to_string(),
            "r": pn.r.to_string(),
            "lambda": pn.lambda,
            "bound_exponent": exponent,
            "fitted_slope": slope,
            "levels": methods,
        }),
    )?;
    Ok(o)
}

pub fn strichartz_scan(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = &cfg.structure;
    let sc = &cfg.strichartz_scan;
    let grid = cfg.grid.space(s)?;
    let times = TimeGrid::midpoint(0.0, cfg.grid.horizon, cfg.grid.n_t)?;
    let spec = MixedNormSpec::new(sc.r.0, sc.q.0, sc.p.0)?;
    let adm = admissible_check(sc.p.0, sc.q.0, sc.r.0, s.d(), s.m(), sc.equation);
    if !adm.admissible && !sc.explore {
        return Err(CliError::Usage(format!(
            "(p, q, r) = ({}, {}, {}) is not admissible: {}; pass --explore to scan anyway",
            sc.p,
            sc.q,
            sc.r,
            adm.diagnostics.join("; ")
        )));
    }
    let sigma = sc.sigma.unwrap_or(adm.sigma);
    let u0 = family(&sc.data)?.sample(s, &grid)?;
    let scan = dilation_scan(&u0, s, &cfg.spectral.spectral(), &times, &spec, sc.equation, sigma, &sc.dilations)?;
    let mut csv = String::from("scale,mixed,l2,h_sigma,ratio\n");
    for r in &scan.rows {
        csv_row(&mut csv, &[r.scale, r.mixed, r.l2, r.h_sigma, r.ratio]);
    }
    let mut o = Outcome::passing();
    o.write(out, "strichartz_scan.csv", &csv)?;
    o.write_json(
        out,
        "strichartz_scan.json",
        &json!({
            "p": sc.p.to_string(),
            "q": sc.q.to_string(),
            "r": sc.r.to_string(),
            "equation": sc.equation,
            "data": sc.data,
            "sigma": sigma,
            "critical_sigma": adm.sigma,
            "admissible": adm.admissible,
            "exploratory": !adm.admissible,
            "diagnostics": adm.diagnostics,
            "mixed_exponent": scan.mixed_exponent,
            "expected_mixed_exponent": scan.expected_mixed_exponent,
            "l2_exponent": scan.l2_exponent,
            "expected_l2_exponent": scan.expected_l2_exponent,
            "ratio_spread": scan.ratio_spread,
        }),
    )?;
    Ok(o)
}
