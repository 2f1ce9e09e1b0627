//! Experiment configuration: one TOML document per run.
//!
//! Unknown keys are rejected everywhere. Numeric fields are range-checked
//! per experiment kind before anything executes, and the effective
//! configuration (after command-line overrides) is hashed into every output
//! file name and report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    StationaryDiscrete,
    StationaryDiffusive,
    StationaryThreshold,
    RateCertificate,
    CouplingHarness,
    TvDecay,
    MgfLemma,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Kind::StationaryDiscrete => "stationary-discrete",
            Kind::StationaryDiffusive => "stationary-diffusive",
            Kind::StationaryThreshold => "stationary-threshold",
            Kind::RateCertificate => "rate-certificate",
            Kind::CouplingHarness => "coupling-harness",
            Kind::TvDecay => "tv-decay",
            Kind::MgfLemma => "mgf-lemma",
        };
        f.write_str(s)
    }
}

/// Which builtin environment the experiment uses and its parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    /// Builtin name; see `envqueue list-builtins`.
    #[serde(default)]
    pub builtin: Option<String>,
    /// Finite-set size for the cyclic/uniform walks.
    #[serde(default)]
    pub m: Option<usize>,
    /// Window half-width for the shift chain.
    #[serde(default)]
    pub window: Option<usize>,
    /// Drift strength for the theta-drift environment.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Threshold restriction endpoint.
    #[serde(default)]
    pub alpha_star: Option<f64>,
    /// Queue level at which the threshold engages.
    #[serde(default)]
    pub n0: Option<u32>,
    /// Per-level speed sequence: "unit" or "tamed" (geometric, ratio =
    /// smallest traffic intensity).
    #[serde(default)]
    pub beta: Option<String>,
    /// Laziness of the uniformized coupling kernels.
    #[serde(default)]
    pub lazy_factor: Option<f64>,
}

/// Run-control parameters (not all kinds use all fields).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Queue truncation (discrete) or occupation cap (diffusive).
    #[serde(default)]
    pub n_max: Option<u32>,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Assertion tolerance for distribution comparisons.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Monte Carlo sample count.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Time grid for decay checks.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    /// Initial queue lengths for decay checks.
    #[serde(default)]
    pub n0_list: Option<Vec<u32>>,
    /// Certificate inputs.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub lambda_bar: Option<f64>,
    #[serde(default)]
    pub mu_bar: Option<f64>,
    /// Moment-check exponent.
    #[serde(default)]
    pub exponent: Option<f64>,
    /// Coupling-harness starts `(n1, n2)`.
    #[serde(default)]
    pub start_levels: Option<[u32; 2]>,
    /// Record the queue-transition event log (first replica) as CSV.
    #[serde(default)]
    pub record_events: Option<bool>,
}

fn default_seed() -> u64 {
    42
}
fn default_replicas() -> u32 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub spec: SpecSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Field-level validation error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}
impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks; every failure names the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        let check_pos = |name: &str, v: Option<f64>| -> Result<(), ConfigError> {
            match v {
                Some(x) if !(x > 0.0) => Err(ConfigError(format!("run.{name} must be > 0"))),
                _ => Ok(()),
            }
        };
        check_pos("horizon", r.horizon)?;
        check_pos("dt", r.dt)?;
        check_pos("tolerance", r.tolerance)?;
        check_pos("alpha", r.alpha)?;
        check_pos("gamma", r.gamma)?;
        check_pos("lambda_bar", r.lambda_bar)?;
        check_pos("mu_bar", r.mu_bar)?;
        if let Some(b) = r.burn_in {
            if !(0.0..0.9).contains(&b) {
                return Err(ConfigError("run.burn_in must lie in [0, 0.9)".into()));
            }
        }
        if let Some(a) = r.alpha {
            if a <= 1.0 {
                return Err(ConfigError("run.alpha must exceed 1".into()));
            }
        }
        if let Some(e) = r.exponent {
            if e < 0.0 {
                return Err(ConfigError("run.exponent must be >= 0".into()));
            }
        }
        if r.replicas == 0 {
            return Err(ConfigError("run.replicas must be >= 1".into()));
        }
        if let Some(t) = &r.t_grid {
            if t.is_empty() || t.iter().any(|x| !(*x >= 0.0)) {
                return Err(ConfigError(
                    "run.t_grid must be non-empty and non-negative".into(),
                ));
            }
        }
        if let Some(th) = self.spec.theta {
            if !(th > 0.0) {
                return Err(ConfigError("spec.theta must be > 0".into()));
            }
        }
        if let Some(a) = self.spec.alpha_star {
            if !(a > 0.0 && a < 1.0) {
                return Err(ConfigError("spec.alpha_star must lie in (0, 1)".into()));
            }
        }
        if let Some(l) = self.spec.lazy_factor {
            if !(l >= 1.0) {
                return Err(ConfigError("spec.lazy_factor must be >= 1".into()));
            }
        }
        if let Some(b) = &self.spec.beta {
            if b != "unit" && b != "tamed" {
                return Err(ConfigError(format!(
                    "spec.beta must be \"unit\" or \"tamed\", got {b:?}"
                )));
            }
        }
        if let Some(m) = self.spec.m {
            if !(2..=64).contains(&m) {
                return Err(ConfigError("spec.m must lie in 2..=64".into()));
            }
        }
        Ok(())
    }

    /// Hash of the effective configuration (after overrides); names output
    /// files and is embedded in every report.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
