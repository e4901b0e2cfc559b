//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NdbalError, Result};
use crate::learner::{Algorithm, NdbalConfig};
use crate::samplers::SamplerSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationDistance {
    /// Identification distance with point atoms on the augmented family.
    IntervalI,
    /// Pair-clustering distance with pair atoms on the exact family.
    Cluster,
}

/// Instance families. Each trial draws its own target (and items, for
/// choice) from the trial's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceFamily {
    /// Homogeneous linear classifiers, logistic noise, `N(0, sigma^2 I)` prior.
    LinearClassifier { dim: usize, sigma: f64 },
    /// Pairwise choices among `n_items` unit-sphere items, logit noise.
    LogitChoice { n_items: usize, dim: usize, sigma: f64 },
    /// Random finite response tables under a Massart oracle of margin `lambda`.
    FiniteMassart {
        n_structures: usize,
        n_atoms: usize,
        #[serde(default = "two")]
        n_responses: usize,
        lambda: f64,
    },
    /// Interval clusterings from the star-shaped family, noiseless answers.
    Separation {
        k: usize,
        alpha: f64,
        eps: f64,
        #[serde(default)]
        extra: usize,
        distance: SeparationDistance,
    },
}

fn two() -> usize {
    2
}

impl InstanceFamily {
    fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(NdbalError::config(format!("instance.{f}"), m));
        match *self {
            InstanceFamily::LinearClassifier { dim, sigma } => {
                if dim == 0 {
                    return bad("dim", "must be >= 1");
                }
                if !(sigma > 0.0) {
                    return bad("sigma", "must be > 0");
                }
            }
            InstanceFamily::LogitChoice { n_items, dim, sigma } => {
                if n_items < 2 {
                    return bad("n_items", "must be >= 2");
                }
                if dim == 0 {
                    return bad("dim", "must be >= 1");
                }
                if !(sigma > 0.0) {
                    return bad("sigma", "must be > 0");
                }
            }
            InstanceFamily::FiniteMassart {
                n_structures,
                n_atoms,
                n_responses,
                lambda,
            } => {
                if n_structures == 0 || n_atoms == 0 {
                    return bad("n_structures", "structures and atoms must be >= 1");
                }
                if n_responses < 2 {
                    return bad("n_responses", "must be >= 2");
                }
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return bad("lambda", "must lie in (0, 1]");
                }
            }
            InstanceFamily::Separation { k, alpha, eps, .. } => {
                if k == 0 {
                    return bad("k", "must be >= 1");
                }
                if !(alpha > 0.0 && alpha <= 0.5) {
                    return bad("alpha", "must lie in (0, 1/2]");
                }
                if !(eps > 0.0 && eps < 1.0) {
                    return bad("eps", "must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub instance: InstanceFamily,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub ndbal: NdbalConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

fn default_resamples() -> usize {
    1000
}

fn default_level() -> f64 {
    0.68
}

impl ExperimentConfig {
    /// Parses JSON; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            NdbalError::config(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NdbalError::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() || self.experiment.contains([',', '\n', '"']) {
            return Err(NdbalError::config(
                "experiment",
                "must be non-empty without commas, quotes or newlines",
            ));
        }
        if self.trials == 0 {
            return Err(NdbalError::config("trials", "must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(NdbalError::config("algorithms", "must list at least one"));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(NdbalError::config("algorithms", "duplicate entry"));
        }
        if self.bootstrap_resamples == 0 {
            return Err(NdbalError::config("bootstrap_resamples", "must be >= 1"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(NdbalError::config("ci_level", "must lie in (0, 1)"));
        }
        if self.sampler.thinning == 0 || self.sampler.window == 0 {
            return Err(NdbalError::config("sampler", "thinning and window must be >= 1"));
        }
        self.instance.validate()?;
        let margin = match self.instance {
            InstanceFamily::FiniteMassart { lambda, .. } => Some(lambda),
            _ => None,
        };
        self.ndbal
            .validate(margin)
            .map_err(|e| match e {
                NdbalError::Config { field, message } => {
                    NdbalError::config(format!("ndbal.{field}"), message)
                }
                other => other,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "experiment": "tiny",
        "instance": {"family": "linear_classifier", "dim": 3, "sigma": 1.0},
        "algorithms": ["ndbal", "random"],
        "trials": 2,
        "seed": 7
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(TINY).unwrap();
        assert_eq!(cfg.bootstrap_resamples, 1000);
        assert_eq!(cfg.ci_level, 0.68);
        assert_eq!(cfg.ndbal, NdbalConfig::default());
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_json(&TINY.replace("\"trials\": 2", "\"trials\": 0")).unwrap_err();
        assert!(matches!(e, NdbalError::Config { ref field, .. } if field == "trials"));
        let e = ExperimentConfig::from_json(&TINY.replace("\"sigma\": 1.0", "\"sigma\": -1.0")).unwrap_err();
        assert!(matches!(e, NdbalError::Config { ref field, .. } if field == "instance.sigma"));
        let e = ExperimentConfig::from_json(&TINY.replace("\"seed\": 7", "\"seed\": 7, \"ndbal\": {\"alpha\": 2}"))
            .unwrap_err();
        assert!(matches!(e, NdbalError::Config { ref field, .. } if field == "ndbal.alpha"));
        let e = ExperimentConfig::from_json("{\n  \"experiment\": 3\n}").unwrap_err();
        assert!(matches!(e, NdbalError::Config { ref field, .. } if field.starts_with("line 2")));
        let e = ExperimentConfig::from_json(&TINY.replace("\"seed\"", "\"sede\"")).unwrap_err();
        assert!(matches!(e, NdbalError::Config { .. }));
    }

    #[test]
    fn rejects_large_theory_beta_under_massart() {
        let text = r#"{
            "experiment": "m",
            "instance": {"family": "finite_massart", "n_structures": 8, "n_atoms": 6, "lambda": 0.5},
            "algorithms": ["ndbal"],
            "ndbal": {"mode": "theory", "update_rule": "soft01", "loss": "zero_one", "beta": 0.2},
            "trials": 1
        }"#;
        let e = ExperimentConfig::from_json(text).unwrap_err();
        assert!(matches!(e, NdbalError::Config { ref field, .. } if field == "ndbal.beta"));
    }
}
