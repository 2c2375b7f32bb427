//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment = "regret"        # regret | bai | coverage | complexity
//! seed = 0                     # default 0
//! replications = 100           # default 100
//! horizon = 10000              # regret only
//! deltas = [0.1, 0.01]         # bai only
//! out_dir = "results"          # optional
//!
//! [instance]
//! family = "bernoulli"         # bernoulli | gaussian | poisson | exponential
//! means = [0.6, 0.5]
//! sigma2 = 1.0                 # gaussian only
//!
//! [policy]                     # regret only
//! kind = "klucb"               # ucb1 | klucb | klucb+ | thompson | bayesucb | oracle
//! sigma2 = 0.25                # ucb1 only
//!
//! [stopping]                   # bai, optional
//! threshold = "bernoulli_exact"  # or "general"
//! alpha = 1.2                  # general only
//! c = 2.0                      # general only, default 2 (K - 1)
//! max_steps = 10000000
//! recompute_every = 1
//! solver_tol = 1e-10
//!
//! [coverage]                   # coverage only
//! t = 1000
//! gammas = [4.0, 6.0, 8.0]
//! sigma2 = 0.25                # sub-Gaussian proxy; defaults to 1/4 or the gaussian variance
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complexity::DEFAULT_SOLVER_TOL;
use crate::engine::{BanditInstance, OraclePolicy, Policy};
use crate::exp_family::ArmFamily;
use crate::policies::{IndexPolicy, PolicyConfig, PolicyKind};
use crate::track_and_stop::{StoppingConfig, ThresholdRule, DEFAULT_ALPHA, DEFAULT_MAX_STEPS};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Regret,
    Bai,
    Complexity,
    Coverage,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Regret => "regret",
            ExperimentKind::Bai => "bai",
            ExperimentKind::Complexity => "complexity",
            ExperimentKind::Coverage => "coverage",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub family: String,
    pub means: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoppingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recompute_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSpec {
    pub t: u64,
    pub gammas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub instance: InstanceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping: Option<StoppingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSpec>,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

const TOP_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "replications",
    "horizon",
    "deltas",
    "out_dir",
    "instance",
    "policy",
    "stopping",
    "coverage",
];
const INSTANCE_KEYS: &[&str] = &["family", "means", "sigma2"];
const POLICY_KEYS: &[&str] = &["kind", "sigma2"];
const STOPPING_KEYS: &[&str] = &[
    "threshold",
    "alpha",
    "c",
    "max_steps",
    "recompute_every",
    "solver_tol",
];
const COVERAGE_KEYS: &[&str] = &["t", "gammas", "sigma2"];

fn unknown_keys(doc: &toml::Table) -> Vec<String> {
    let mut unknown = Vec::new();
    for (key, value) in doc {
        if !TOP_KEYS.contains(&key.as_str()) {
            unknown.push(key.clone());
            continue;
        }
        let allowed = match key.as_str() {
            "instance" => INSTANCE_KEYS,
            "policy" => POLICY_KEYS,
            "stopping" => STOPPING_KEYS,
            "coverage" => COVERAGE_KEYS,
            _ => continue,
        };
        if let Some(table) = value.as_table() {
            unknown.extend(
                table
                    .keys()
                    .filter(|k| !allowed.contains(&k.as_str()))
                    .map(|k| format!("{key}.{k}")),
            );
        }
    }
    unknown
}

/// Parses and validates a TOML experiment description, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let unknown = unknown_keys(&doc);
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "unknown keys: {}",
            unknown.join(", ")
        )));
    }
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Domain { .. } | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn family(&self) -> Result<ArmFamily> {
        ArmFamily::from_name(&self.instance.family, self.instance.sigma2).map_err(config_err)
    }

    /// Checks every mean against the family domain; errors name the 1-based arm.
    pub fn checked_means(&self) -> Result<Vec<f64>> {
        let family = self.family()?;
        if self.instance.means.is_empty() {
            return Err(Error::Config("instance.means is empty".into()));
        }
        for (i, &mu) in self.instance.means.iter().enumerate() {
            if !family.contains(mu) {
                return Err(Error::Domain {
                    arm: i + 1,
                    value: mu,
                    family: family.name(),
                    domain: family.domain_str(),
                });
            }
        }
        Ok(self.instance.means.clone())
    }

    pub fn bandit_instance(&self) -> Result<BanditInstance> {
        let means = self.checked_means()?;
        BanditInstance::new(self.family()?, means).map_err(config_err)
    }

    pub fn horizon(&self) -> Result<u64> {
        self.horizon
            .ok_or_else(|| Error::Config("regret experiments need `horizon`".into()))
    }

    pub fn deltas(&self) -> Result<&[f64]> {
        self.deltas
            .as_deref()
            .ok_or_else(|| Error::Config("bai experiments need `deltas`".into()))
    }

    /// Builds a fresh policy for one replication.
    pub fn build_policy(&self, instance: &BanditInstance) -> Result<Box<dyn Policy + Send>> {
        let spec = self
            .policy
            .as_ref()
            .ok_or_else(|| Error::Config("regret experiments need a [policy] table".into()))?;
        if spec.kind == "oracle" {
            if spec.sigma2.is_some() {
                return Err(Error::Config(
                    "sigma2 does not apply to the oracle policy".into(),
                ));
            }
            return Ok(Box::new(OraclePolicy::new(instance)));
        }
        let kind: PolicyKind = spec.kind.parse().map_err(config_err)?;
        let config = PolicyConfig::new(kind, spec.sigma2).map_err(config_err)?;
        Ok(Box::new(
            IndexPolicy::new(config, instance.family()).map_err(config_err)?,
        ))
    }

    pub fn stopping_config(&self, delta: f64) -> Result<StoppingConfig> {
        let family = self.family()?;
        let spec = self.stopping.clone().unwrap_or_default();
        let rule = match spec.threshold.as_deref() {
            None if family == ArmFamily::Bernoulli && spec.alpha.is_none() && spec.c.is_none() => {
                ThresholdRule::BernoulliExact
            }
            None | Some("general") => ThresholdRule::General {
                alpha: spec.alpha.unwrap_or(DEFAULT_ALPHA),
                c: spec.c,
            },
            Some("bernoulli_exact") => {
                if spec.alpha.is_some() || spec.c.is_some() {
                    return Err(Error::Config(
                        "alpha and c only apply to the general threshold".into(),
                    ));
                }
                ThresholdRule::BernoulliExact
            }
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown threshold `{other}` (expected bernoulli_exact or general)"
                )))
            }
        };
        let config = StoppingConfig {
            delta,
            threshold: rule,
            max_steps: spec.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
            recompute_every: spec.recompute_every.unwrap_or(1),
            solver_tol: spec.solver_tol.unwrap_or(DEFAULT_SOLVER_TOL),
        };
        config.validate(family).map_err(config_err)?;
        Ok(config)
    }

    pub fn coverage_spec(&self) -> Result<&CoverageSpec> {
        self.coverage
            .as_ref()
            .ok_or_else(|| Error::Config("coverage experiments need a [coverage] table".into()))
    }

    /// Sub-Gaussian variance proxy used by the Hoeffding bound.
    pub fn coverage_sigma2(&self) -> Result<f64> {
        let spec = self.coverage_spec()?;
        match (spec.sigma2, self.family()?) {
            (Some(s), _) if s > 0.0 && s.is_finite() => Ok(s),
            (Some(s), _) => Err(Error::Config(format!(
                "coverage.sigma2 must be positive, got {s}"
            ))),
            (None, ArmFamily::Bernoulli) => Ok(0.25),
            (None, ArmFamily::Gaussian { variance }) => Ok(variance),
            (None, f) => Err(Error::Config(format!(
                "coverage.sigma2 is required for the {} family",
                f.name()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        self.checked_means()?;
        let has = |present: bool, name: &str| {
            if present {
                Err(Error::Config(format!(
                    "`{name}` does not apply to {} experiments",
                    self.experiment
                )))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            ExperimentKind::Regret => {
                let instance = self.bandit_instance()?;
                let horizon = self.horizon()?;
                if horizon < instance.num_arms() as u64 {
                    return Err(Error::Config(format!(
                        "horizon {horizon} is shorter than the number of arms"
                    )));
                }
                self.build_policy(&instance)?;
                has(self.deltas.is_some(), "deltas")?;
                has(self.stopping.is_some(), "stopping")?;
                has(self.coverage.is_some(), "coverage")?;
            }
            ExperimentKind::Bai => {
                let instance = self.bandit_instance()?;
                if !instance.has_unique_best() {
                    return Err(Error::Config(
                        "best arm identification needs a unique best arm".into(),
                    ));
                }
                let deltas = self.deltas()?;
                if deltas.is_empty() {
                    return Err(Error::Config("`deltas` is empty".into()));
                }
                for &delta in deltas {
                    self.stopping_config(delta)?;
                }
                has(self.horizon.is_some(), "horizon")?;
                has(self.policy.is_some(), "policy")?;
                has(self.coverage.is_some(), "coverage")?;
            }
            ExperimentKind::Complexity => {
                self.bandit_instance()?;
                has(self.policy.is_some(), "policy")?;
                has(self.coverage.is_some(), "coverage")?;
            }
            ExperimentKind::Coverage => {
                let spec = self.coverage_spec()?;
                if spec.t == 0 {
                    return Err(Error::Config("coverage.t must be at least 1".into()));
                }
                if spec.gammas.is_empty()
                    || spec.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite()))
                {
                    return Err(Error::Config(
                        "coverage.gammas must be a nonempty list of finite nonnegative levels"
                            .into(),
                    ));
                }
                self.coverage_sigma2()?;
                has(self.policy.is_some(), "policy")?;
                has(self.deltas.is_some(), "deltas")?;
            }
        }
        Ok(())
    }
}
