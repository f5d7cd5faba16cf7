//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment = "simulate"
//! output_dir = "out"
//!
//! [domain]
//! kind = "rectangle"
//! width = 1.0
//! height = 1.0
//!
//! [damping]
//! amplitude = 1.0
//! shape = { kind = "boundary_collar", width = 0.1 }
//!
//! [numerics]
//! nx = 64
//! modes = 100
//! t_end = 20.0
//! dt = 0.005
//! ```
//!
//! Unknown keys are rejected; every other field has a default.

use std::fmt;
use std::path::{Path, PathBuf};

use hypstokes::geometry::{make_domain, DampingProfile, DomainSpec};
use hypstokes::raytracer::Sampler;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Trace,
    Gcc,
    Simulate,
    Spectrum,
    Resolvent,
    Observability,
    Lame,
    Diagnostics,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Trace,
        ExperimentKind::Gcc,
        ExperimentKind::Simulate,
        ExperimentKind::Spectrum,
        ExperimentKind::Resolvent,
        ExperimentKind::Observability,
        ExperimentKind::Lame,
        ExperimentKind::Diagnostics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Trace => "trace",
            ExperimentKind::Gcc => "gcc",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Resolvent => "resolvent",
            ExperimentKind::Observability => "observability",
            ExperimentKind::Lame => "lame",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }

    /// Whether the experiment needs Stokes eigenpairs.
    pub fn needs_modes(self) -> bool {
        !matches!(self, ExperimentKind::Trace | ExperimentKind::Gcc)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seed for every random choice (eigensolver start, random states).
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    #[serde(default = "DampingProfile::zero")]
    pub damping: DampingProfile,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub ray: RayConfig,
    #[serde(default)]
    pub gcc: GccConfig,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub observability: ObservabilityConfig,
    #[serde(default)]
    pub lame: LameConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    0x5eed
}

fn default_domain() -> DomainSpec {
    DomainSpec::Rectangle {
        width: 1.0,
        height: 1.0,
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Cells across the domain width.
    pub nx: usize,
    /// Number of Stokes eigenpairs.
    pub modes: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Window of the exponential fit; the whole run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            nx: 32,
            modes: 20,
            t_end: 10.0,
            dt: 5e-3,
            fit_window: None,
        }
    }
}

/// Modal initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Displacement `amplitude·φ_index`, zero velocity.
    Mode {
        index: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Uniform random coefficients scaled by `λ_k^{−decay/2}`.
    Random {
        #[serde(default = "one")]
        decay: f64,
    },
    Coefficients { u: Vec<f64>, w: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Mode {
            index: 0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RayConfig {
    pub position: [f64; 2],
    /// Direction angle in radians.
    pub angle: f64,
    pub horizon: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        RayConfig {
            position: [0.3, 0.4],
            angle: 0.7,
            horizon: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GccConfig {
    pub horizon: f64,
    pub sampler: Sampler,
}

impl Default for GccConfig {
    fn default() -> Self {
        GccConfig {
            horizon: 2.0,
            sampler: Sampler::Grid { nx: 32, ndir: 64 },
        }
    }
}

/// Frequencies of the imaginary-axis sweep: either an explicit list or
/// `points` equally spaced values in `[from, to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig {
            sigmas: None,
            from: 0.0,
            to: 40.0,
            points: 201,
        }
    }
}

impl ResolventConfig {
    pub fn grid(&self) -> Vec<f64> {
        match &self.sigmas {
            Some(s) => s.clone(),
            None if self.points == 1 => vec![self.from],
            None => (0..self.points)
                .map(|k| self.from + (self.to - self.from) * k as f64 / (self.points - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservabilityConfig {
    /// Random states for the quadrature cross-check.
    pub check_states: usize,
}

impl Default for ObservabilityConfig {
    fn default() -> Self {
        ObservabilityConfig { check_states: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LameConfig {
    /// Penalization parameters, strictly descending.
    pub eps: Vec<f64>,
}

impl Default for LameConfig {
    fn default() -> Self {
        LameConfig {
            eps: vec![1e-1, 1e-2, 1e-3],
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate; errors carry the line of the offending key.
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(src, s.start));
            LabError::Config {
                key: String::new(),
                line,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate().map_err(|e| match e {
            LabError::Config { key, message, .. } => LabError::Config {
                line: key_line(src, &key),
                key,
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| {
            LabError::config("", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml(&src)
    }

    /// The resolved configuration as TOML, used for output headers.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LabError::config(key, format!("must be positive, got {v}")))
            }
        };

        make_domain(self.domain).map_err(|e| LabError::config("domain", strip(e)))?;
        self.damping
            .validate()
            .map_err(|e| LabError::config("damping", strip(e)))?;

        let n = &self.numerics;
        if n.nx < 4 {
            return Err(LabError::config("numerics.nx", format!("must be at least 4, got {}", n.nx)));
        }
        if n.modes == 0 {
            return Err(LabError::config("numerics.modes", "must be at least 1"));
        }
        positive("numerics.t_end", n.t_end)?;
        positive("numerics.dt", n.dt)?;
        if n.dt > n.t_end {
            return Err(LabError::config(
                "numerics.dt",
                format!("exceeds t_end ({} > {})", n.dt, n.t_end),
            ));
        }
        if let Some([a, b]) = n.fit_window {
            if !(a >= 0.0 && a < b && b <= n.t_end) {
                return Err(LabError::config(
                    "numerics.fit_window",
                    format!("needs 0 <= start < end <= t_end, got [{a}, {b}]"),
                ));
            }
        }

        match &self.initial {
            InitialState::Mode { index, amplitude } => {
                if *index >= n.modes {
                    return Err(LabError::config(
                        "initial.index",
                        format!("mode {index} out of range for {} modes", n.modes),
                    ));
                }
                if !amplitude.is_finite() {
                    return Err(LabError::config("initial.amplitude", "must be finite"));
                }
            }
            InitialState::Random { decay } => {
                if !(decay.is_finite() && *decay >= 0.0) {
                    return Err(LabError::config("initial.decay", format!("must be >= 0, got {decay}")));
                }
            }
            InitialState::Coefficients { u, w } => {
                if u.len() != n.modes || w.len() != n.modes {
                    return Err(LabError::config(
                        "initial.u",
                        format!("u and w need {} entries, got {} and {}", n.modes, u.len(), w.len()),
                    ));
                }
                if u.iter().chain(w).any(|x| !x.is_finite()) {
                    return Err(LabError::config("initial.u", "non-finite coefficient"));
                }
            }
        }

        let r = &self.ray;
        if !(r.position[0].is_finite() && r.position[1].is_finite()) {
            return Err(LabError::config("ray.position", "must be finite"));
        }
        if !r.angle.is_finite() {
            return Err(LabError::config("ray.angle", "must be finite"));
        }
        positive("ray.horizon", r.horizon)?;
        positive("gcc.horizon", self.gcc.horizon)?;
        match self.gcc.sampler {
            Sampler::Grid { nx, ndir } if nx == 0 || ndir == 0 => {
                return Err(LabError::config("gcc.sampler", "grid sampler needs nx, ndir >= 1"));
            }
            Sampler::SeededRandom { n: 0, .. } => {
                return Err(LabError::config("gcc.sampler", "random sampler needs n >= 1"));
            }
            _ => {}
        }

        let s = &self.resolvent;
        match &s.sigmas {
            Some(list) if list.is_empty() => {
                return Err(LabError::config("resolvent.sigmas", "empty frequency list"));
            }
            Some(list) if list.iter().any(|x| !x.is_finite()) => {
                return Err(LabError::config("resolvent.sigmas", "non-finite frequency"));
            }
            Some(_) => {}
            None => {
                if s.points == 0 {
                    return Err(LabError::config("resolvent.points", "must be at least 1"));
                }
                if !(s.from.is_finite() && s.to.is_finite() && s.from <= s.to) {
                    return Err(LabError::config(
                        "resolvent.to",
                        format!("needs finite from <= to, got [{}, {}]", s.from, s.to),
                    ));
                }
            }
        }

        if self.lame.eps.is_empty() {
            return Err(LabError::config("lame.eps", "empty list"));
        }
        for &e in &self.lame.eps {
            positive("lame.eps", e)?;
        }
        if self.lame.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(LabError::config("lame.eps", "must be strictly descending"));
        }

        if self.experiment.is_some_and(|k| k.needs_modes())
            && matches!(self.domain, DomainSpec::Disk { .. })
        {
            return Err(LabError::config(
                "domain.kind",
                "Stokes experiments need a rectangular domain",
            ));
        }
        Ok(())
    }
}

fn strip(e: hypstokes::Error) -> String {
    match e {
        hypstokes::Error::Config(m)
        | hypstokes::Error::Domain(m)
        | hypstokes::Error::Classification(m)
        | hypstokes::Error::Precondition(m)
        | hypstokes::Error::Numerical(m) => m,
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line (1-based) defining the dotted key `path`, found by tracking table
/// headers. Falls back to the line of the deepest enclosing table.
pub fn key_line(src: &str, path: &str) -> Option<usize> {
    let parts: Vec<&str> = path.split('.').filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return None;
    }
    let mut table: Vec<String> = Vec::new();
    let mut best: Option<(usize, usize)> = None;
    for (k, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            table = name.split('.').map(|s| s.trim().to_string()).collect();
            let depth = prefix_len(&table, &parts);
            if depth == table.len() && depth > 0 && best.is_none_or(|(d, _)| depth > d) {
                best = Some((depth, k + 1));
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let mut full = table.clone();
        full.extend(lhs.trim().split('.').map(|s| s.trim().trim_matches('"').to_string()));
        let depth = prefix_len(&full, &parts);
        if depth == full.len() && depth > 0 && best.is_none_or(|(d, _)| depth > d) {
            best = Some((depth, k + 1));
        }
    }
    best.map(|(_, l)| l)
}

fn prefix_len(a: &[String], b: &[&str]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x.as_str() == **y).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn nested_damping_parses() {
        let src = r#"
experiment = "gcc"
[damping]
amplitude = 2.0
shape = { kind = "side_strip", side = "left", depth = 0.36 }
[gcc]
sampler = { kind = "grid", nx = 8, ndir = 16 }
"#;
        let c = ExperimentConfig::from_toml(src).unwrap();
        assert_eq!(c.experiment, Some(ExperimentKind::Gcc));
        assert_eq!(c.damping.amplitude, 2.0);
        assert_eq!(c.gcc.sampler, Sampler::Grid { nx: 8, ndir: 16 });
    }

    #[test]
    fn negative_dt_names_key_and_line() {
        let src = "experiment = \"simulate\"\n\n[numerics]\nnx = 16\ndt = -0.01\n";
        let e = ExperimentConfig::from_toml(src).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("line 5") && msg.contains("numerics.dt"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let src = "[numerics]\nnx = 16\nbogus = 1\n";
        let msg = ExperimentConfig::from_toml(src).unwrap_err().to_string();
        assert!(msg.contains("line 3") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn key_line_lookup() {
        let src = "a = 1\n[numerics]\n# dt = 3\ndt = 2\n[lame]\neps = [1.0]\n";
        assert_eq!(key_line(src, "numerics.dt"), Some(4));
        assert_eq!(key_line(src, "lame.eps"), Some(6));
        assert_eq!(key_line(src, "numerics.nx"), Some(2));
        assert_eq!(key_line(src, "a"), Some(1));
        assert_eq!(key_line(src, "missing"), None);
    }

    #[test]
    fn semantic_checks() {
        let bad = [
            "[lame]\neps = [0.01, 0.1]\n",
            "[resolvent]\nsigmas = []\n",
            "[initial]\nkind = \"mode\"\nindex = 50\n",
            "[domain]\nkind = \"disk\"\nradius = -1.0\n",
            "experiment = \"spectrum\"\n[domain]\nkind = \"disk\"\nradius = 1.0\n",
            "[numerics]\nfit_window = [3.0, 1.0]\n",
        ];
        for src in bad {
            assert!(ExperimentConfig::from_toml(src).is_err(), "{src}");
        }
        let r = ResolventConfig {
            sigmas: None,
            from: 0.0,
            to: 1.0,
            points: 5,
        };
        assert_eq!(r.grid(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
