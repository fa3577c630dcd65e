#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod manifest;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htype::evolve::Equation;
use serde_json::json;

use crate::commands::Outcome;
use crate::config::{Exponent, RunConfig};
use crate::error::CliError;
use crate::manifest::Manifest;

#[derive(Parser)]
#[command(name = "htype", version, about = "Spectral analysis and dispersive evolution on H-type groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check every invariant and write report.json.
    Verify(Common),
    /// Propagate initial data and record the conserved quantity.
    Evolve(Common),
    /// Sample a fan kernel on its own grid.
    Kernel(Common),
    /// Estimate spectral projector norms across levels.
    ProjectorNorms(Common),
    /// Scan a mixed-norm Strichartz ratio over dilations.
    StrichartzScan(ScanArgs),
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p: Option<Exponent>,
    #[arg(long)]
    q: Option<Exponent>,
    /// Time exponent; `inf` is accepted.
    #[arg(long)]
    r: Option<Exponent>,
    #[arg(long)]
    equation: Option<Equation>,
    #[arg(long)]
    data: Option<String>,
    /// Comma-separated dilation factors.
    #[arg(long, value_delimiter = ',')]
    dilations: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Scan exponents outside the admissible set.
    #[arg(long)]
    explore: bool,
}

impl ScanArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let sc = &mut cfg.strichartz_scan;
        if let Some(v) = self.p {
            sc.p = v;
        }
        if let Some(v) = self.q {
            sc.q = v;
        }
        if let Some(v) = self.r {
            sc.r = v;
        }
        if let Some(v) = self.equation {
            sc.equation = v;
        }
        if let Some(v) = &self.data {
            sc.data = v.clone();
        }
        if let Some(v) = &self.dilations {
            sc.dilations = v.clone();
        }
        if self.sigma.is_some() {
            sc.sigma = self.sigma;
        }
        sc.explore |= self.explore;
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HTYPE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HTYPE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

fn run_verify(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let checks = verify::run(cfg)?;
    let mut o = Outcome {
        passed: checks.iter().all(|c| c.passed),
        ..Outcome::default()
    };
    for c in &checks {
        o.tolerances.insert(format!("{}.{}", c.module, c.name), c.tolerance);
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} [{}] {}: {:.3e} (tol {:.1e})", c.module, c.name, c.residual, c.tolerance);
    }
    o.write_json(out, "report.json", &json!({ "passed": o.passed, "invariants": checks }))?;
    Ok(o)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let (name, common) = match &cli.command {
        Command::Verify(c) => ("verify", c),
        Command::Evolve(c) => ("evolve", c),
        Command::Kernel(c) => ("kernel", c),
        Command::ProjectorNorms(c) => ("projector-norms", c),
        Command::StrichartzScan(a) => ("strichartz-scan", &a.common),
    };
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Command::StrichartzScan(a) = &cli.command {
        a.apply(&mut cfg);
    }
    cfg.validate()?;
    let out = common.out.as_path();
    std::fs::create_dir_all(out)?;
    let o = match cli.command {
        Command::Verify(_) => run_verify(&cfg, out)?,
        Command::Evolve(_) => commands::evolve(&cfg, out)?,
        Command::Kernel(_) => commands::kernel(&cfg, out)?,
        Command::ProjectorNorms(_) => commands::projector_norms(&cfg, out)?,
        Command::StrichartzScan(_) => commands::strichartz_scan(&cfg, out)?,
    };
    Manifest::new(name, &cfg, o.passed, o.tolerances, o.outputs).write(out)?;
    Ok(o.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
