//! Run configuration: TOML (or JSON) with documented defaults, validated
//! before any computation.

use crate::error::CliError;
use concentra_core::BuiltinGeometry;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dims: Dims,
    pub geometry: GeometryConfig,
    pub solver: SolverConfig,
    pub expansion: ExpansionConfig,
    pub spectrum: SpectrumConfig,
    pub output: OutputConfig,
    /// Seed of every randomized ensemble.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dims: Dims::default(),
            geometry: GeometryConfig::default(),
            solver: SolverConfig::default(),
            expansion: ExpansionConfig::default(),
            spectrum: SpectrumConfig::default(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dims {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { n: 7, k: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    RoundSphere,
    PerturbedSphere,
    SpheroidEquator,
    Flat,
}

impl GeometryKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "round_sphere" => Some(Self::RoundSphere),
            "perturbed_sphere" => Some(Self::PerturbedSphere),
            "spheroid_equator" => Some(Self::SpheroidEquator),
            "flat" => Some(Self::Flat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Curvature perturbation of `perturbed_sphere`.
    pub amplitude: f64,
    /// Axis ratio of `spheroid_equator`.
    pub aspect: f64,
    /// Samples along the curve.
    pub grid: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { kind: GeometryKind::PerturbedSphere, amplitude: 0.1, aspect: 1.0, grid: 128 }
    }
}

impl GeometryConfig {
    pub fn builtin(&self) -> BuiltinGeometry {
        match self.kind {
            GeometryKind::RoundSphere => BuiltinGeometry::RoundSphere,
            GeometryKind::PerturbedSphere => BuiltinGeometry::PerturbedSphere { amplitude: self.amplitude },
            GeometryKind::SpheroidEquator => BuiltinGeometry::SpheroidEquator { aspect: self.aspect },
            GeometryKind::Flat => BuiltinGeometry::Flat,
        }
    }

    /// `name` or `name:parameter`, e.g. `perturbed_sphere:0.2`.
    pub fn apply_flag(&mut self, s: &str) -> Result<(), CliError> {
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        self.kind = GeometryKind::parse(name).ok_or_else(|| {
            CliError::Validation(format!("unknown geometry `{name}` (round_sphere, perturbed_sphere, spheroid_equator, flat)"))
        })?;
        if let Some(p) = param {
            let v: f64 = p.parse().map_err(|_| CliError::Validation(format!("geometry parameter `{p}` is not a number")))?;
            match self.kind {
                GeometryKind::PerturbedSphere => self.amplitude = v,
                GeometryKind::SpheroidEquator => self.aspect = v,
                _ => return Err(CliError::Validation(format!("geometry `{name}` takes no parameter"))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rate: f64,
    pub delta: f64,
    pub orth_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rate: 4.0, delta: 1.0, orth_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    pub order: usize,
    pub eps_list: Vec<f64>,
    pub gamma: f64,
    /// Samples along the curve used by the layer solves.
    pub samples: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self { order: 1, eps_list: vec![3.90625e-4, 1.953125e-4, 9.765625e-5, 4.8828125e-5], gamma: 0.75, samples: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Inclusive range of dyadic levels.
    pub levels: Levels,
    pub c_target: f64,
    /// Number of reduced eigenvalues tracked.
    #[serde(rename = "J")]
    pub j: usize,
    /// Samples along the curve for the reduced forms.
    pub grid: usize,
    /// Points per level in the emitted eigenvalue curves.
    pub samples_per_level: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { levels: Levels { lo: 6, hi: 12 }, c_target: 0.1, j: 600, grid: 1024, samples_per_level: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LevelsInput", into = "String")]
pub struct Levels {
    pub lo: u32,
    pub hi: u32,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LevelsInput {
    Range(String),
    List([u32; 2]),
}

impl TryFrom<LevelsInput> for Levels {
    type Error = String;
    fn try_from(v: LevelsInput) -> Result<Self, String> {
        match v {
            LevelsInput::Range(s) => Levels::parse(&s),
            LevelsInput::List([lo, hi]) => Ok(Levels { lo, hi }),
        }
    }
}

impl From<Levels> for String {
    fn from(l: Levels) -> String {
        format!("{}..{}", l.lo, l.hi)
    }
}

impl Levels {
    /// `lo..hi`, both inclusive.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("levels `{s}` must look like 6..12"))?;
        let lo = a.trim().parse().map_err(|_| format!("bad level `{a}`"))?;
        let hi = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad level `{b}`"))?;
        Ok(Levels { lo, hi })
    }

    pub fn all(&self) -> Vec<u32> {
        (self.lo..=self.hi).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("concentra-out"), formats: vec![Format::Json, Format::Csv] }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.dims.n < 7 {
            return bad(format!("N ≥ 7 required (got N = {})", self.dims.n));
        }
        if self.dims.k != 1 {
            return bad(format!("only curves are supported: k = 1 required (got k = {})", self.dims.k));
        }
        if self.geometry.grid < 8 || self.geometry.grid % 2 == 1 {
            return bad(format!("geometry.grid must be even and at least 8 (got {})", self.geometry.grid));
        }
        if !(self.geometry.amplitude.abs() < 1.0) {
            return bad(format!("geometry.amplitude must lie in (-1, 1) (got {})", self.geometry.amplitude));
        }
        if !(self.geometry.aspect > 0.0) {
            return bad(format!("geometry.aspect must be positive (got {})", self.geometry.aspect));
        }
        let g = self.expansion.gamma;
        if !(g > 0.5 && g < 1.0) {
            return bad(format!("gamma must lie in (1/2, 1) (got {g})"));
        }
        let e = &self.expansion.eps_list;
        if e.is_empty() || e.iter().any(|v| !(*v > 0.0 && v.is_finite())) || e.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("eps_list must be strictly decreasing and positive (got {e:?})"));
        }
        if self.expansion.order > 3 {
            return bad(format!("expansion order is capped at 3 (got {})", self.expansion.order));
        }
        if self.expansion.samples < 4 || self.expansion.samples % 2 == 1 {
            return bad(format!("expansion.samples must be even and at least 4 (got {})", self.expansion.samples));
        }
        if !(self.solver.rate > 2.0) || !(self.solver.delta > 0.0) || !(self.solver.orth_tol > 0.0) {
            return bad("solver needs rate > 2, delta > 0 and orth_tol > 0".into());
        }
        let s = &self.spectrum;
        if s.levels.lo == 0 || s.levels.lo > s.levels.hi || s.levels.hi > 40 {
            return bad(format!("spectrum.levels must satisfy 1 <= lo <= hi <= 40 (got {}..{})", s.levels.lo, s.levels.hi));
        }
        if !(s.c_target > 0.0) {
            return bad(format!("spectrum.c_target must be positive (got {})", s.c_target));
        }
        if s.grid < 8 || s.grid % 2 == 1 || s.j == 0 || s.j > s.grid {
            return bad(format!("spectrum needs an even grid >= 8 and 1 <= J <= grid (got J = {}, grid = {})", s.j, s.grid));
        }
        if s.samples_per_level == 0 {
            return bad("spectrum.samples_per_level must be positive".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must name json and/or csv".into());
        }
        Ok(())
    }
}

/// Parses TOML, or JSON when the file ends in `.json` or starts with `{`.
pub fn parse_config(text: &str, json: bool) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = if json {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?
    } else {
        toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    format!("line {}: ", before.matches('\n').count() + 1)
                })
                .unwrap_or_default();
            CliError::Parse(format!("{at}{}", e.message()))
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|x| x == "json") || text.trim_start().starts_with('{');
    parse_config(&text, json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("[dims]\nN = 7\n[geometry]\nkind = \"round_sphere\"\n", false).unwrap();
        assert_eq!(c.expansion.order, 1);
        assert_eq!(c.expansion.gamma, 0.75);
        assert_eq!(c.geometry.grid, 128);
        assert_eq!(c.geometry.kind, GeometryKind::RoundSphere);
    }

    #[test]
    fn rejects_low_dimension() {
        let e = parse_config("[dims]\nN = 5\n", false).unwrap_err();
        assert!(e.to_string().contains("N ≥ 7 required"), "{e}");
    }

    #[test]
    fn rejects_gamma_outside_range() {
        assert!(matches!(parse_config("[expansion]\ngamma = 0.4\n", false), Err(CliError::Validation(_))));
    }

    #[test]
    fn rejects_increasing_eps() {
        assert!(parse_config("[expansion]\neps_list = [0.01, 0.02]\n", false).is_err());
    }

    #[test]
    fn parse_error_has_line() {
        let e = parse_config("[dims]\nN = 7\nseed = \"x\"\n", false).unwrap_err();
        assert!(matches!(e, CliError::Parse(ref m) if m.contains("line 3")), "{e}");
    }

    #[test]
    fn json_input() {
        let c = parse_config(r#"{"dims": {"N": 8}, "spectrum": {"levels": "6..8"}}"#, true).unwrap();
        assert_eq!(c.dims.n, 8);
        assert_eq!(c.spectrum.levels.all(), vec![6, 7, 8]);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_config(&text, false).unwrap(), c);
    }

    #[test]
    fn geometry_flag() {
        let mut g = GeometryConfig::default();
        g.apply_flag("spheroid_equator:1.5").unwrap();
        assert_eq!(g.builtin(), BuiltinGeometry::SpheroidEquator { aspect: 1.5 });
        assert!(g.apply_flag("torus").is_err());
        assert!(g.apply_flag("flat:2").is_err());
    }
}
