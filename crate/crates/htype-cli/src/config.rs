//! Run configuration: JSON in, validated blocks out.

use std::path::Path;

use htype::evolve::{DataFamily, Equation};
use htype::fan::{CutoffSpec, FanSpec};
use htype::gft::SpectralSpec;
use htype::grid::{SpaceGrid, TimeGrid};
use htype::Structure;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// Lebesgue exponent in `[1, inf]`; JSON spells infinity as `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Exponent {
    pub const INF: Self = Self(f64::INFINITY);
}

impl std::str::FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Ok(Self::INF),
            v => v.parse::<f64>().map(Self).map_err(|_| format!("expected a number or \"inf\", got {v:?}")),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub n_x: usize,
    #[serde(rename = "L_x")]
    pub half_x: f64,
    pub n_z: usize,
    #[serde(rename = "L_z")]
    pub half_z: f64,
    pub n_t: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            n_x: 32,
            half_x: 6.0,
            n_z: 64,
            half_z: 10.0,
            n_t: 64,
            horizon: 4.0,
        }
    }
}

impl GridBlock {
    pub fn space(&self, s: &Structure) -> htype::Result<SpaceGrid<f64>> {
        SpaceGrid::new(s.d(), s.m(), self.n_x, self.half_x, self.n_z, self.half_z)
    }

    /// `n_t` samples on `[0, T]` including both ends.
    pub fn forward_times(&self) -> htype::Result<TimeGrid<f64>> {
        TimeGrid::inclusive(0.0, self.horizon, self.n_t)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralBlock {
    #[serde(rename = "N_max")]
    pub n_max: usize,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub radial_nodes: usize,
    pub sphere_resolution: usize,
    /// Quadrature nodes in `mu` per fan level.
    pub mu_nodes: usize,
}

impl Default for SpectralBlock {
    fn default() -> Self {
        let g = SpectralSpec::default();
        let f = FanSpec::default();
        Self {
            n_max: g.n_max,
            k_max: f.k_max,
            lambda_min: g.lambda_min,
            lambda_max: g.lambda_max,
            radial_nodes: g.radial_nodes,
            sphere_resolution: g.sphere_resolution,
            mu_nodes: f.mu_nodes,
        }
    }
}

impl SpectralBlock {
    pub fn spectral(&self) -> SpectralSpec {
        SpectralSpec {
            n_max: self.n_max,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            radial_nodes: self.radial_nodes,
            sphere_resolution: self.sphere_resolution,
        }
    }

    pub fn fan(&self) -> FanSpec {
        FanSpec {
            k_max: self.k_max,
            mu_nodes: self.mu_nodes,
            sphere_resolution: self.sphere_resolution,
            ..FanSpec::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveBlock {
    pub equation: Equation,
    pub data: String,
    /// Initial velocity family for the wave equation; `null` means at rest.
    pub velocity: Option<String>,
    pub unitarity_tol: f64,
    pub energy_tol: f64,
}

impl Default for EvolveBlock {
    fn default() -> Self {
        Self {
            equation: Equation::Schrodinger,
            data: "gaussian".into(),
            velocity: None,
            unitarity_tol: 1e-10,
            energy_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Schrodinger,
    WavePlus,
    WaveMinus,
}

/// Kernel evaluation grid, independent of the field grid: `t` runs over
/// `n_t` samples of `[-T, T]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelBlock {
    pub kind: KernelKind,
    pub n_x: usize,
    #[serde(rename = "L_x")]
    pub half_x: f64,
    pub n_z: usize,
    #[serde(rename = "L_z")]
    pub half_z: f64,
    pub n_t: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for KernelBlock {
    fn default() -> Self {
        Self {
            kind: KernelKind::Schrodinger,
            n_x: 9,
            half_x: 2.0,
            n_z: 9,
            half_z: 2.0,
            n_t: 64,
            horizon: 4.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectorNormsBlock {
    pub p: Exponent,
    pub r: Exponent,
    pub k_min: usize,
    pub k_max: usize,
    pub lambda: f64,
}

impl Default for ProjectorNormsBlock {
    fn default() -> Self {
        Self {
            p: Exponent(2.0),
            r: Exponent(6.0),
            k_min: 0,
            k_max: 40,
            lambda: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanBlock {
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
    pub equation: Equation,
    pub data: String,
    pub dilations: Vec<f64>,
    /// Sobolev order; `null` uses the critical value.
    pub sigma: Option<f64>,
    /// Allow exponents outside the admissible set (flagged in the output).
    pub explore: bool,
}

impl Default for ScanBlock {
    fn default() -> Self {
        Self {
            p: Exponent(4.0),
            q: Exponent(4.0),
            r: Exponent::INF,
            equation: Equation::Schrodinger,
            data: "gaussian".into(),
            dilations: vec![1.0, 2.0, 4.0, 8.0],
            sigma: None,
            explore: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub structure: Structure,
    pub grid: GridBlock,
    pub spectral: SpectralBlock,
    pub psi: CutoffSpec,
    pub evolve: EvolveBlock,
    pub kernel: KernelBlock,
    pub projector_norms: ProjectorNormsBlock,
    pub strichartz_scan: ScanBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            structure: Structure::heisenberg(1).expect("d = 1"),
            grid: GridBlock::default(),
            spectral: SpectralBlock::default(),
            psi: CutoffSpec::default(),
            evolve: EvolveBlock::default(),
            kernel: KernelBlock::default(),
            projector_norms: ProjectorNormsBlock::default(),
            strichartz_scan: ScanBlock::default(),
        }
    }
}

fn bad(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn positive_count(pointer: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(bad(pointer, "must be a positive count"));
    }
    Ok(())
}

fn positive(pointer: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(bad(pointer, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn exponent(pointer: &str, e: Exponent) -> Result<(), CliError> {
    if !(e.0 >= 1.0) {
        return Err(bad(pointer, format!("Lebesgue exponent must lie in [1, inf], got {e}")));
    }
    Ok(())
}

fn family(pointer: &str, s: &str) -> Result<DataFamily, CliError> {
    s.parse().map_err(|e: htype::Error| bad(pointer, e.to_string()))
}

impl RunConfig {
    /// Parses JSON; errors carry the JSON pointer of the offending value.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = json_pointer(&e.path().to_string());
            bad(&pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => {
                let cfg = Self::default();
                cfg.validate()?;
                Ok(cfg)
            }
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
                Self::from_json(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.structure
            .validate(64, 0)
            .into_result()
            .map_err(|e| bad("/structure", e.to_string()))?;
        let g = &self.grid;
        positive_count("/grid/n_x", g.n_x)?;
        positive_count("/grid/n_z", g.n_z)?;
        positive_count("/grid/n_t", g.n_t)?;
        positive("/grid/L_x", g.half_x)?;
        positive("/grid/L_z", g.half_z)?;
        positive("/grid/T", g.horizon)?;
        let s = &self.spectral;
        positive_count("/spectral/radial_nodes", s.radial_nodes)?;
        positive_count("/spectral/mu_nodes", s.mu_nodes)?;
        positive_count("/spectral/sphere_resolution", s.sphere_resolution)?;
        positive("/spectral/lambda_min", s.lambda_min)?;
        if !(s.lambda_max > s.lambda_min) {
            return Err(bad("/spectral/lambda_max", format!("must exceed lambda_min = {}", s.lambda_min)));
        }
        // Central frequencies above the z-grid Nyquist limit alias.
        let nyquist = std::f64::consts::PI * g.n_z as f64 / (2.0 * g.half_z);
        if s.lambda_max > nyquist {
            return Err(bad("/spectral/lambda_max", format!("exceeds the z-grid band limit {nyquist:.6}")));
        }
        positive("/psi/a", self.psi.a)?;
        if !(self.psi.b > self.psi.a) {
            return Err(bad("/psi/b", format!("must exceed a = {}", self.psi.a)));
        }
        let e = &self.evolve;
        family("/evolve/data", &e.data)?;
        if let Some(v) = &e.velocity {
            family("/evolve/velocity", v)?;
        }
        positive("/evolve/unitarity_tol", e.unitarity_tol)?;
        positive("/evolve/energy_tol", e.energy_tol)?;
        let k = &self.kernel;
        positive_count("/kernel/n_x", k.n_x)?;
        positive_count("/kernel/n_z", k.n_z)?;
        positive_count("/kernel/n_t", k.n_t)?;
        positive("/kernel/L_x", k.half_x)?;
        positive("/kernel/L_z", k.half_z)?;
        positive("/kernel/T", k.horizon)?;
        let pn = &self.projector_norms;
        if !(1.0..=2.0).contains(&pn.p.0) {
            return Err(bad("/projector_norms/p", format!("must lie in [1, 2], got {}", pn.p)));
        }
        if !(pn.r.0 >= 2.0) {
            return Err(bad("/projector_norms/r", format!("must be at least 2, got {}", pn.r)));
        }
        if pn.k_max < pn.k_min {
            return Err(bad("/projector_norms/k_max", "must be at least k_min"));
        }
        positive("/projector_norms/lambda", pn.lambda)?;
        let sc = &self.strichartz_scan;
        exponent("/strichartz_scan/p", sc.p)?;
        exponent("/strichartz_scan/q", sc.q)?;
        exponent("/strichartz_scan/r", sc.r)?;
        family("/strichartz_scan/data", &sc.data)?;
        if sc.dilations.len() < 2 {
            return Err(bad("/strichartz_scan/dilations", "needs at least two scales"));
        }
        for (i, v) in sc.dilations.iter().enumerate() {
            positive(&format!("/strichartz_scan/dilations/{i}"), *v)?;
        }
        Ok(())
    }

    /// Canonical serialization, the input of the manifest hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// `grid.n_x` / `dilations[2]` to `/grid/n_x` / `/dilations/2`.
fn json_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        let mut rest = seg;
        while let Some(open) = rest.find('[') {
            push_segment(&mut out, &rest[..open]);
            let close = rest[open..].find(']').map_or(rest.len(), |c| open + c);
            push_segment(&mut out, &rest[open + 1..close]);
            rest = rest.get(close + 1..).unwrap_or("");
        }
        push_segment(&mut out, rest);
    }
    out
}

fn push_segment(out: &mut String, seg: &str) {
    if seg.is_empty() || seg == "?" {
        return;
    }
    out.push('/');
    out.push_str(&seg.replace('~', "~0").replace('/', "~1"));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointers() {
        assert_eq!(json_pointer("grid.n_x"), "/grid/n_x");
        assert_eq!(json_pointer("strichartz_scan.dilations[2]"), "/strichartz_scan/dilations/2");
        assert_eq!(json_pointer("."), "");
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_json(&cfg.canonical_json()).unwrap();
        assert_eq!(back.canonical_json(), cfg.canonical_json());
    }

    #[test]
    fn errors_point_at_the_value() {
        let e = RunConfig::from_json(r#"{"grid": {"n_x": "many"}}"#).unwrap_err();
        assert!(matches!(e, CliError::Config { ref pointer, .. } if pointer == "/grid/n_x"), "{e}");
        let e = RunConfig::from_json(r#"{"psi": {"a": 2, "b": 1}}"#).unwrap_err();
        assert!(matches!(e, CliError::Config { ref pointer, .. } if pointer == "/psi/b"), "{e}");
        let e = RunConfig::from_json(r#"{"spectral": {"lambda_min": 0}}"#).unwrap_err();
        assert!(matches!(e, CliError::Config { ref pointer, .. } if pointer == "/spectral/lambda_min"), "{e}");
        let e = RunConfig::from_json(r#"{"evolve": {"data": "lorentzian"}}"#).unwrap_err();
        assert!(matches!(e, CliError::Config { ref pointer, .. } if pointer == "/evolve/data"), "{e}");
    }

    #[test]
    fn exponents_accept_inf() {
        let cfg = RunConfig::from_json(r#"{"strichartz_scan": {"r": "inf", "q": 6}}"#).unwrap();
        assert!(cfg.strichartz_scan.r.0.is_infinite());
        assert!(cfg.canonical_json().contains("\"r\":\"inf\""));
    }
}
