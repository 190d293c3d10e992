//! Experiment configuration: JSON-serialized, schema-validated, hashed for
//! reproducibility.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filtration::FiltrationKind;
use crate::pointcloud::DensitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    SpacingsD1,
    Tail,
    StabilityAudit,
    RateFit,
    Figure2,
    BettiConvergence,
    MarginalHistograms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiltrationChoice {
    Rips,
    Cech,
}

impl From<FiltrationChoice> for FiltrationKind {
    fn from(c: FiltrationChoice) -> Self {
        match c {
            FiltrationChoice::Rips => FiltrationKind::Rips,
            FiltrationChoice::Cech => FiltrationKind::Cech,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Binomial,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityPreset {
    Uniform,
    /// `kappa(x) = 0.5 + x_1`.
    LinearX1,
}

impl DensityPreset {
    pub fn build(&self, dim: usize) -> DensitySpec {
        match self {
            DensityPreset::Uniform => DensitySpec::uniform(dim),
            DensityPreset::LinearX1 => DensitySpec::linear_x1(dim),
        }
    }
}

/// Truncation-radius policy, stated in the rescaled (unit intensity) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RMaxPolicy {
    /// `coefficient * n^(-1/d) (log n)^(1/d)` in cloud units, i.e.
    /// `coefficient * (log n)^(1/d)` after rescaling by `n^(1/d)`; halved
    /// for the Cech filtration whose values are radii rather than diameters.
    Auto { coefficient: f64 },
    /// Radius in the cloud's own (unrescaled) units.
    Fixed { value: f64 },
    /// Radius in rescaled units.
    FixedRescaled { value: f64 },
}

impl Default for RMaxPolicy {
    fn default() -> Self {
        RMaxPolicy::Auto { coefficient: 4.0 }
    }
}

impl RMaxPolicy {
    pub fn rescaled(&self, n: f64, d: usize, kind: FiltrationKind) -> f64 {
        match *self {
            RMaxPolicy::Auto { coefficient } => {
                let base = coefficient * n.max(2.0).ln().powf(1.0 / d as f64);
                match kind {
                    FiltrationKind::Rips => base,
                    FiltrationKind::Cech => base / 2.0,
                }
            }
            RMaxPolicy::Fixed { value } => value * n.powf(1.0 / d as f64),
            RMaxPolicy::FixedRescaled { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusParams {
    pub r_major: f64,
    pub r_minor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageParams {
    pub resolution: usize,
    /// Per-diagram default (half the median persistence) when absent.
    pub bandwidth: Option<f64>,
}

impl Default for ImageParams {
    fn default() -> Self {
        Self { resolution: 40, bandwidth: None }
    }
}

fn default_stability_tolerance() -> f64 {
    0.10
}

/// One experiment run, fully determined by this value plus the code version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub filtration: FiltrationChoice,
    #[serde(default = "default_process")]
    pub process: ProcessKind,
    pub degrees: Vec<usize>,
    pub dim: usize,
    pub sample_sizes: Vec<usize>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub m_grid: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub r_max_policy: RMaxPolicy,
    #[serde(default = "default_density")]
    pub density: DensityPreset,
    #[serde(default)]
    pub torus: Option<TorusParams>,
    /// Rescaled radius for the Betti convergence experiment.
    #[serde(default)]
    pub fixed_r: Option<f64>,
    /// Perturbation magnitude for the stability audit and bound on the
    /// supremum distance between the perturbed distance functions.
    #[serde(default)]
    pub perturbation: Option<f64>,
    #[serde(default)]
    pub image: Option<ImageParams>,
    #[serde(default)]
    pub simplex_budget: Option<usize>,
    /// Relative change between the last two sample sizes below which the
    /// scaled statistic counts as stabilized.
    #[serde(default = "default_stability_tolerance")]
    pub stability_tolerance: f64,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_process() -> ProcessKind {
    ProcessKind::Binomial
}

fn default_density() -> DensityPreset {
    DensityPreset::Uniform
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dim == 0 {
            return fail("dim must be positive".into());
        }
        if self.replicates == 0 {
            return fail("replicates must be positive".into());
        }
        if self.degrees.is_empty() {
            return fail("degrees must be non-empty".into());
        }
        if self.sample_sizes.is_empty() {
            return fail("sample_sizes must be non-empty".into());
        }
        match self.kind {
            ExperimentKind::Convergence => {
                if self.alphas.is_empty() {
                    return fail("convergence needs a non-empty alpha list".into());
                }
            }
            ExperimentKind::SpacingsD1 => {
                if self.dim != 1 || self.degrees != [0] {
                    return fail("spacings experiment requires d = 1 and degrees = [0]".into());
                }
            }
            ExperimentKind::Tail => {
                if self.m_grid.is_empty() {
                    return fail("tail experiment needs a non-empty M grid".into());
                }
            }
            ExperimentKind::StabilityAudit => {
                if self.perturbation.is_none() {
                    return fail("stability audit needs a perturbation magnitude".into());
                }
            }
            ExperimentKind::RateFit => {
                if self.torus.is_none() {
                    return fail("rate fit targets the torus; torus params required".into());
                }
                if self.alphas.is_empty() {
                    return fail("rate fit needs a non-empty alpha list".into());
                }
                if self.sample_sizes.len() < 3 {
                    return fail("rate fit needs at least three sample sizes".into());
                }
            }
            ExperimentKind::Figure2 => {
                if self.torus.is_none() {
                    return fail("figure2 needs torus params".into());
                }
                if self.degrees != [1] {
                    return fail("figure2 is a degree-1 experiment".into());
                }
                if self.alphas.is_empty() {
                    return fail("figure2 needs a non-empty alpha list".into());
                }
            }
            ExperimentKind::BettiConvergence => {
                if self.fixed_r.is_none() {
                    return fail("betti convergence needs fixed_r".into());
                }
            }
            ExperimentKind::MarginalHistograms => {}
        }
        if let Some(t) = self.torus {
            if !(t.r_minor > 0.0) || !(t.r_major > t.r_minor) {
                return fail("torus params must satisfy 0 < r_minor < R_major".into());
            }
        }
        Ok(())
    }
}

/// JSON schema for experiment configs, shipped with the CLI.
pub const CONFIG_SCHEMA: &str = r#"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "ExperimentConfig",
  "type": "object",
  "required": ["kind", "filtration", "degrees", "dim", "sample_sizes", "replicates", "base_seed"],
  "additionalProperties": false,
  "properties": {
    "kind": {"enum": ["convergence", "spacings_d1", "tail", "stability_audit", "rate_fit", "figure2", "betti_convergence", "marginal_histograms"]},
    "filtration": {"enum": ["rips", "cech"]},
    "process": {"enum": ["binomial", "poisson"]},
    "degrees": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    "dim": {"type": "integer", "minimum": 1},
    "sample_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    "alphas": {"type": "array", "items": {"type": "number", "minimum": 0}},
    "m_grid": {"type": "array", "items": {"type": "number", "minimum": 0}},
    "replicates": {"type": "integer", "minimum": 1},
    "base_seed": {"type": "integer", "minimum": 0},
    "r_max_policy": {
      "type": "object",
      "oneOf": [
        {"properties": {"kind": {"const": "auto"}, "coefficient": {"type": "number", "exclusiveMinimum": 0}}, "required": ["kind", "coefficient"], "additionalProperties": false},
        {"properties": {"kind": {"const": "fixed"}, "value": {"type": "number", "exclusiveMinimum": 0}}, "required": ["kind", "value"], "additionalProperties": false},
        {"properties": {"kind": {"const": "fixed_rescaled"}, "value": {"type": "number", "exclusiveMinimum": 0}}, "required": ["kind", "value"], "additionalProperties": false}
      ]
    },
    "density": {"enum": ["uniform", "linear_x1"]},
    "torus": {"type": ["object", "null"], "properties": {"r_major": {"type": "number"}, "r_minor": {"type": "number"}}, "required": ["r_major", "r_minor"], "additionalProperties": false},
    "fixed_r": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "perturbation": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "image": {"type": ["object", "null"], "properties": {"resolution": {"type": "integer", "minimum": 2}, "bandwidth": {"type": ["number", "null"]}}, "required": ["resolution"], "additionalProperties": false},
    "simplex_budget": {"type": ["integer", "null"], "minimum": 1},
    "stability_tolerance": {"type": "number", "exclusiveMinimum": 0},
    "out_dir": {"type": ["string", "null"]}
  }
}"#;

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Convergence,
            filtration: FiltrationChoice::Rips,
            process: ProcessKind::Binomial,
            degrees: vec![1],
            dim: 2,
            sample_sizes: vec![100, 200],
            alphas: vec![2.0],
            m_grid: vec![],
            replicates: 3,
            base_seed: 7,
            r_max_policy: RMaxPolicy::default(),
            density: DensityPreset::Uniform,
            torus: None,
            fixed_r: None,
            perturbation: None,
            image: None,
            simplex_budget: None,
            stability_tolerance: 0.10,
            out_dir: None,
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = base();
        let mut b = base();
        assert_eq!(a.hash(), a.hash());
        b.base_seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let a = base();
        let json = serde_json::to_string(&a).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(a, back);
        let bad = r#"{"kind":"convergence","filtration":"rips","degrees":[],"dim":2,
                      "sample_sizes":[10],"alphas":[1.0],"replicates":1,"base_seed":0}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let unknown = json.replace("\"kind\"", "\"kindx\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn rmax_policy_frames() {
        let auto = RMaxPolicy::Auto { coefficient: 4.0 };
        let n = 1000.0f64;
        let rescaled = auto.rescaled(n, 2, FiltrationKind::Rips);
        assert!((rescaled - 4.0 * n.ln().sqrt()).abs() < 1e-12);
        let cech = auto.rescaled(n, 2, FiltrationKind::Cech);
        assert!((cech - rescaled / 2.0).abs() < 1e-12);
        let fixed = RMaxPolicy::Fixed { value: 0.25 };
        assert!((fixed.rescaled(16.0, 2, FiltrationKind::Rips) - 1.0).abs() < 1e-12);
        let fr = RMaxPolicy::FixedRescaled { value: 3.0 };
        assert_eq!(fr.rescaled(999.0, 3, FiltrationKind::Cech), 3.0);
    }
}
