//! Experiment configuration: JSON schema, validation and hashing.

use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use temperley_core::{DomainSpec, Point};
use temperley_verify::Gates;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), message: message.into() }
}

fn default_h() -> f64 {
    1.0 / 128.0
}

fn default_imag_tolerance() -> f64 {
    1e-2
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderOptions {
    /// Draw the height function as coloured dots on the lattice vertices.
    #[serde(default = "default_true")]
    pub height_overlay: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { height_overlay: true }
    }
}

/// One experiment. Continuum quantities (domain, queries, `h`) are in domain
/// units; `eps` is the lattice spacing in the same units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    /// Lattice spacings, one run per entry.
    pub eps: Vec<f64>,
    /// Sample count N per lattice spacing.
    #[serde(alias = "N")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Points at which the corrected height field is recorded.
    #[serde(default)]
    pub queries: Vec<Point>,
    /// Mesh size of the continuum solver.
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_imag_tolerance")]
    pub imag_tolerance: f64,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub render: RenderOptions,
    /// Output directory; every artifact path is relative to it.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples < 1 {
            return Err(field("samples", "N must be ≥ 1"));
        }
        if self.eps.is_empty() {
            return Err(field("eps", "at least one lattice spacing is required"));
        }
        self.domain.validate().map_err(|e| field("domain", e.to_string()))?;
        let (lo, hi) = self.domain.bbox();
        let size = (hi[0] - lo[0]).min(hi[1] - lo[1]);
        for (k, &e) in self.eps.iter().enumerate() {
            if !(e.is_finite() && e > 0.0 && e < size / 4.0) {
                return Err(field(&format!("eps[{k}]"), format!("{e} must lie in (0, {})", size / 4.0)));
            }
        }
        if !(self.h.is_finite() && self.h > 0.0 && self.h < size / 8.0) {
            return Err(field("h", format!("{} must lie in (0, {})", self.h, size / 8.0)));
        }
        if !(self.imag_tolerance > 0.0) {
            return Err(field("imag_tolerance", "must be positive"));
        }
        for (k, &q) in self.queries.iter().enumerate() {
            let on_boundary = self.domain.components().any(|(_, s)| s.boundary_distance(q) < 1e-9);
            if !(self.domain.contains(q) || on_boundary) {
                return Err(field(&format!("queries[{k}]"), format!("{q:?} lies outside the domain")));
            }
        }
        let g = &self.gates;
        if g.jackknife_groups < 2 {
            return Err(field("gates.jackknife_groups", "must be at least 2"));
        }
        if !(g.z_max > 0.0 && g.tv_max > 0.0 && g.p_min > 0.0 && g.p_min < 1.0) {
            return Err(field("gates", "z_max and tv_max must be positive and p_min in (0, 1)"));
        }
        let out = &self.output_dir;
        if out.as_os_str().is_empty() || out.components().any(|c| matches!(c, Component::ParentDir)) {
            return Err(field("output_dir", "must be non-empty and must not contain `..`"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, with the output directory blanked so
    /// that the same experiment written to two places hashes identically.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"outer": {"rect": {"min": [0, 0], "max": [1, 1]}}, "marked_points": [[0.5, 0]]},
        "eps": [0.1],
        "samples": 10
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.h, 1.0 / 128.0);
        assert_eq!(c.gates, Gates::default());
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn zero_samples_rejected() {
        let e = ExperimentConfig::from_json(&MINIMAL.replace("\"samples\": 10", "\"N\": 0")).unwrap_err();
        assert!(e.to_string().contains("N must be ≥ 1"), "{e}");
    }

    #[test]
    fn unknown_field_reports_position() {
        let e = ExperimentConfig::from_json(&MINIMAL.replace("\"eps\"", "\"epz\"")).unwrap_err();
        match e {
            ConfigError::Parse { line, .. } => assert!(line >= 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn partial_gate_override() {
        let c = ExperimentConfig::from_json(&MINIMAL.replace("\"samples\": 10", "\"samples\": 10, \"gates\": {\"tv_max\": 0.15}")).unwrap();
        assert_eq!(c.gates.tv_max, 0.15);
        assert_eq!(c.gates.z_max, 4.0);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
