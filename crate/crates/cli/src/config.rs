//! Run configuration: parsing, defaults, validation and canonical hashing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tnk_core::index::Scalar;
use tnk_core::instanton::{InstantonBundle, LineBundle};
use tnk_core::GhSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geometry,
    Instanton,
    Holonomy,
    Chern2,
    Pontryagin,
    Index,
    All,
}

impl Suite {
    pub const CONCRETE: [Suite; 6] = [
        Suite::Geometry,
        Suite::Instanton,
        Suite::Holonomy,
        Suite::Chern2,
        Suite::Pontryagin,
        Suite::Index,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Instanton => "instanton",
            Suite::Holonomy => "holonomy",
            Suite::Chern2 => "chern2",
            Suite::Pontryagin => "pontryagin",
            Suite::Index => "index",
            Suite::All => "all",
        }
    }

    /// Stream id for per-suite random sampling.
    pub fn stream(self) -> u64 {
        Suite::CONCRETE.iter().position(|s| *s == self).unwrap_or(99) as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| anyhow!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    /// Reduced workloads and tolerances relaxed tenfold; for smoke runs.
    Fast,
    /// Full workloads at the acceptance thresholds.
    #[default]
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub l: f64,
    pub centers: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub lambda: f64,
    pub v: Vec<i64>,
}

/// Numeric knobs; every field has a default and a documented range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Random sample points per space, `1..=10000`.
    pub sample_points: usize,
    /// Radial sampling range `[r0, r1]` for pointwise checks.
    pub sample_radii: [f64; 2],
    /// Riemann finite-difference step as a fraction of `r`, `(0, 1)`.
    pub riemann_step: f64,
    /// Connection finite-difference step as a fraction of `r`, `(0, 0.1]`.
    pub connection_step: f64,
    /// Radii of the decay fits.
    pub decay_radii: [f64; 2],
    pub decay_samples: usize,
    /// Inner sphere radius around each center for the Pontryagin fluxes.
    pub pontryagin_sphere: f64,
    pub pontryagin_outer: f64,
    pub ch2_epsilon: f64,
    pub ch2_r_max: f64,
    pub ch2_radial_nodes: usize,
    pub ch2_theta_nodes: usize,
    pub ch2_phi_nodes: usize,
    pub flux_radius: f64,
    /// Range of the `μ ≈ c₀ + c₁/r` fit.
    pub holonomy_fit_radii: [f64; 2],
    pub holonomy_fit_samples: usize,
    /// Range over which `r²|dμ|` must stay bounded.
    pub holonomy_bounded_radii: [f64; 2],
    pub fuzz_cases: usize,
    pub bernoulli_windows: Vec<usize>,
    /// Largest accepted distance of the assembled index to an integer.
    pub assembly_gap: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            sample_points: 100,
            sample_radii: [2.0, 50.0],
            riemann_step: 0.02,
            connection_step: 1e-3,
            decay_radii: [1e2, 1e4],
            decay_samples: 12,
            pontryagin_sphere: 1e-3,
            pontryagin_outer: 100.0,
            ch2_epsilon: 1e-3,
            ch2_r_max: 1e4,
            ch2_radial_nodes: 8,
            ch2_theta_nodes: 16,
            ch2_phi_nodes: 32,
            flux_radius: 1e3,
            holonomy_fit_radii: [1e5, 1e7],
            holonomy_fit_samples: 16,
            holonomy_bounded_radii: [10.0, 1e4],
            fuzz_cases: 100_000,
            bernoulli_windows: vec![100, 200, 400, 800, 1600],
            assembly_gap: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub bundles: Vec<BundleConfig>,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub profile: ToleranceProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_suites() -> Vec<Suite> {
    vec![Suite::All]
}

impl RunConfig {
    /// The basic instanton on `TN_1`: `l = 1`, `λ = 2.5`, `v = (0)`.
    pub fn basic() -> Self {
        Self {
            space: SpaceConfig {
                l: 1.0,
                centers: vec![[0.0, 0.0, 0.0]],
            },
            bundles: vec![BundleConfig {
                lambda: 2.5,
                v: vec![0],
            }],
            suites: default_suites(),
            numerics: Numerics::default(),
            seed: 0,
            profile: ToleranceProfile::Strict,
            out: None,
        }
    }

    pub fn from_str_validated(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            anyhow!(
                "config parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn space(&self) -> Result<GhSpace> {
        GhSpace::new(self.space.l, &self.space.centers).map_err(|e| anyhow!("invalid space: {e}"))
    }

    pub fn bundles(&self) -> Result<InstantonBundle> {
        let s = self
            .bundles
            .iter()
            .map(|b| LineBundle::new(b.lambda, b.v.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| anyhow!("invalid bundle: {e}"))?;
        Ok(InstantonBundle::new(s))
    }

    /// Suites to run, with `all` expanded, in canonical order.
    pub fn expanded_suites(&self) -> Vec<Suite> {
        if self.suites.contains(&Suite::All) {
            return Suite::CONCRETE.to_vec();
        }
        let mut v = self.suites.clone();
        v.sort();
        v.dedup();
        v
    }

    /// `a_j = λ_j / l` as exact rationals of the decimal literals.
    pub fn exact_a(&self) -> Result<Vec<Scalar>> {
        let l = Scalar::parse(&format!("{}", self.space.l))?;
        let l = l.as_exact().cloned().ok_or_else(|| anyhow!("l is not a finite decimal"))?;
        self.bundles
            .iter()
            .map(|b| {
                let lam = Scalar::parse(&format!("{}", b.lambda))?;
                let lam = lam.as_exact().cloned().ok_or_else(|| anyhow!("λ is not a finite decimal"))?;
                Ok(Scalar::Exact(lam / l.clone()))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.space()?;
        if self.bundles.is_empty() {
            bail!("at least one bundle summand is required");
        }
        for (j, b) in self.bundles.iter().enumerate() {
            if b.v.len() != space.k() {
                bail!("bundle {j}: {} center charges for {} centers", b.v.len(), space.k());
            }
            if !b.lambda.is_finite() {
                bail!("bundle {j}: λ must be finite");
            }
        }
        if self.suites.is_empty() {
            bail!("no suites requested");
        }
        let n = &self.numerics;
        let in_range = |name: &str, v: f64, lo: f64, hi: f64| -> Result<()> {
            if !(v > lo && v <= hi) {
                bail!("numerics.{name} = {v} outside ({lo}, {hi}]");
            }
            Ok(())
        };
        if !(1..=10_000).contains(&n.sample_points) {
            bail!("numerics.sample_points must lie in 1..=10000");
        }
        if !(n.sample_radii[0] > 0.0 && n.sample_radii[1] > n.sample_radii[0]) {
            bail!("numerics.sample_radii must satisfy 0 < r0 < r1");
        }
        in_range("riemann_step", n.riemann_step, 0.0, 1.0)?;
        in_range("connection_step", n.connection_step, 0.0, 0.1)?;
        if !(n.decay_radii[0] > 0.0 && n.decay_radii[1] > n.decay_radii[0]) || n.decay_samples < 3 {
            bail!("numerics.decay_radii/decay_samples invalid");
        }
        in_range("pontryagin_sphere", n.pontryagin_sphere, 0.0, 1.0)?;
        in_range("ch2_epsilon", n.ch2_epsilon, 0.0, 1.0)?;
        in_range("ch2_r_max", n.ch2_r_max, 1.0, 1e8)?;
        in_range("flux_radius", n.flux_radius, 1.0, 1e8)?;
        in_range("pontryagin_outer", n.pontryagin_outer, 1.0, 1e8)?;
        in_range("assembly_gap", n.assembly_gap, 0.0, 0.5)?;
        if n.ch2_radial_nodes < 2 || n.ch2_theta_nodes < 4 || n.ch2_phi_nodes < 4 {
            bail!("numerics.ch2 node counts below minima (radial 2, angular 4)");
        }
        if !(n.holonomy_fit_radii[0] > 0.0 && n.holonomy_fit_radii[1] > n.holonomy_fit_radii[0]) || n.holonomy_fit_samples < 3 {
            bail!("numerics.holonomy_fit_radii/holonomy_fit_samples invalid");
        }
        if !(n.holonomy_bounded_radii[0] > 0.0 && n.holonomy_bounded_radii[1] > n.holonomy_bounded_radii[0]) {
            bail!("numerics.holonomy_bounded_radii invalid");
        }
        if n.fuzz_cases > 10_000_000 {
            bail!("numerics.fuzz_cases must be at most 1e7");
        }
        if n.bernoulli_windows.len() < 2 || n.bernoulli_windows.contains(&0) {
            bail!("numerics.bernoulli_windows needs at least two positive entries");
        }
        let suites = self.expanded_suites();
        if suites.contains(&Suite::Index) || suites.contains(&Suite::Holonomy) {
            for (j, b) in self.bundles.iter().enumerate() {
                let a = b.lambda / self.space.l;
                if (a - a.round()).abs() < tnk_core::instanton::INTEGER_TOLERANCE {
                    bail!(
                        "bundle {j}: λ/l = {a} is an integer; the index requires exp(2πiλ_j/l) ≠ 1 for all j"
                    );
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, numbers normalized to their shortest `f64` form.
    /// The output directory is left out; it does not affect results.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("out");
        }
        let mut out = String::new();
        write_canonical(&canonicalize(v), &mut out);
        out
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.canonical_json().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        Value::Number(n) => {
            let f = n.as_f64().unwrap_or(f64::NAN);
            out.push_str(&format!("{f:?}"));
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    RunConfig::from_str_validated(&text).with_context(|| format!("in config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"space": {"l": 1, "centers": [[0, 0, 0]]}, "bundles": [{"lambda": 2.5, "v": [0]}]}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_str_validated(MINIMAL).unwrap();
        assert_eq!(c.suites, vec![Suite::All]);
        assert_eq!(c.numerics, Numerics::default());
        assert_eq!(c.hash(), RunConfig::basic().hash());
    }

    #[test]
    fn hash_ignores_key_order_and_numeral_form() {
        let a = RunConfig::from_str_validated(MINIMAL).unwrap();
        let b = RunConfig::from_str_validated(
            r#"{"bundles": [{"v": [0], "lambda": 2.50}], "space": {"centers": [[0.0, 0, 0e0]], "l": 1.0}}"#,
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.out = Some("elsewhere".into());
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn duplicate_centers_rejected() {
        let e = RunConfig::from_str_validated(
            r#"{"space": {"l": 1, "centers": [[0,0,0],[0,0,0]]}, "bundles": [{"lambda": 0.5, "v": [0, 0]}]}"#,
        )
        .unwrap_err();
        assert!(format!("{e:#}").contains("centers pairwise distinct"), "{e:#}");
    }

    #[test]
    fn integer_holonomy_rejected_for_index() {
        let e = RunConfig::from_str_validated(
            r#"{"space": {"l": 1, "centers": [[0,0,0]]}, "bundles": [{"lambda": 2.0, "v": [0]}], "suites": ["index"]}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("exp(2πiλ_j/l) ≠ 1"), "{e}");
        assert!(RunConfig::from_str_validated(
            r#"{"space": {"l": 1, "centers": [[0,0,0]]}, "bundles": [{"lambda": 2.0, "v": [0]}], "suites": ["geometry"]}"#,
        )
        .is_ok());
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = RunConfig::from_str_validated("{\n  \"space\": {\"l\": 1,}\n}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = RunConfig::from_str_validated(r#"{"space": {"l": 1, "centers": []}, "bundles": [], "suites": ["bogus"]}"#)
            .unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn exact_a_uses_decimal_literals() {
        let c = RunConfig::from_str_validated(
            r#"{"space": {"l": 1, "centers": [[0,0,0],[1,0,0]]}, "bundles": [{"lambda": 0.4, "v": [1, 2]}]}"#,
        )
        .unwrap();
        assert_eq!(c.exact_a().unwrap()[0], Scalar::ratio(2, 5));
    }
}
