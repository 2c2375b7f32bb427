//! Regret-minimization sampling rules.
//!
//! Index policies compute a per-arm score from that arm's own statistics and
//! play the argmax (lowest index on ties):
//!
//! - UCB1: `mu_hat + sqrt(2 sigma2 f(t) / N_a)` with `f(t) = log t`;
//! - kl-UCB: the largest `q` with `N_a d(mu_hat, q) <= f(t)`, where
//!   `f(t) = log t + 3 log log t`;
//! - kl-UCB+: same, with `f = log(t / N_a)`;
//! - Bayes-UCB: the `1 - 1/t` quantile of the posterior on the mean.
//!
//! Thompson Sampling plays the argmax of one posterior draw per arm.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::engine::{argmax, History, Policy};
use crate::exp_family::{
    dual_upper, posterior_quantile, posterior_sample, ArmFamily, PosteriorState,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "ucb1")]
    Ucb1,
    #[serde(rename = "klucb")]
    KlUcb,
    #[serde(rename = "klucb+")]
    KlUcbPlus,
    #[serde(rename = "thompson")]
    Thompson,
    #[serde(rename = "bayesucb")]
    BayesUcb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Ucb1,
        PolicyKind::KlUcb,
        PolicyKind::KlUcbPlus,
        PolicyKind::Thompson,
        PolicyKind::BayesUcb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::KlUcb => "klucb",
            PolicyKind::KlUcbPlus => "klucb+",
            PolicyKind::Thompson => "thompson",
            PolicyKind::BayesUcb => "bayesucb",
        }
    }

    pub fn is_bayesian(&self) -> bool {
        matches!(self, PolicyKind::Thompson | PolicyKind::BayesUcb)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown policy `{s}` (expected ucb1, klucb, klucb+, thompson or bayesucb)"
                ))
            })
    }
}

/// Which exploration function kl-UCB uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlUcbVariant {
    /// `f(t) = log t + 3 log log t`
    Plain,
    /// `f(t) = log(t / N_a(t))`
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    kind: PolicyKind,
    sigma2: Option<f64>,
}

impl PolicyConfig {
    /// `sigma2` is the sub-Gaussian variance proxy and must be given for
    /// UCB1 only.
    pub fn new(kind: PolicyKind, sigma2: Option<f64>) -> Result<Self> {
        match (kind, sigma2) {
            (PolicyKind::Ucb1, Some(s)) if s > 0.0 && s.is_finite() => {}
            (PolicyKind::Ucb1, Some(s)) => {
                return Err(Error::InvalidArgument(format!(
                    "ucb1 sigma2 must be positive, got {s}"
                )))
            }
            (PolicyKind::Ucb1, None) => {
                return Err(Error::InvalidArgument("ucb1 requires sigma2".into()))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "sigma2 does not apply to {kind}"
                )))
            }
            (_, None) => {}
        }
        Ok(Self { kind, sigma2 })
    }

    pub fn ucb1(sigma2: f64) -> Result<Self> {
        Self::new(PolicyKind::Ucb1, Some(sigma2))
    }

    pub fn of_kind(kind: PolicyKind) -> Result<Self> {
        Self::new(kind, None)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    /// Rejects Bayesian policies for families without a conjugate posterior.
    pub fn check_family(&self, family: ArmFamily) -> Result<()> {
        if self.kind.is_bayesian()
            && !matches!(family, ArmFamily::Bernoulli | ArmFamily::Gaussian { .. })
        {
            return Err(Error::Unsupported(format!(
                "{} needs a conjugate posterior, unavailable for the {} family",
                self.kind,
                family.name()
            )));
        }
        Ok(())
    }
}

/// `log t` clamped at zero.
pub fn ucb1_exploration(t: u64) -> f64 {
    (t as f64).ln().max(0.0)
}

/// `log t + 3 log(max(log t, 1))`, clamped at zero.
pub fn klucb_exploration(t: u64) -> f64 {
    let log_t = (t as f64).ln();
    (log_t + 3.0 * log_t.max(1.0).ln()).max(0.0)
}

pub fn ucb1_index(history: &History, arm: usize, t: u64, sigma2: f64) -> Result<f64> {
    let mu_hat = history.require_pulled(arm)?;
    check_round(t)?;
    let n = history.count(arm) as f64;
    Ok(mu_hat + (2.0 * sigma2 * ucb1_exploration(t) / n).sqrt())
}

pub fn klucb_index(
    history: &History,
    arm: usize,
    t: u64,
    family: ArmFamily,
    variant: KlUcbVariant,
) -> Result<f64> {
    let mu_hat = history.require_pulled(arm)?;
    check_round(t)?;
    let n = history.count(arm);
    let level = match variant {
        KlUcbVariant::Plain => klucb_exploration(t),
        KlUcbVariant::Plus => (t as f64 / n as f64).ln().max(0.0),
    };
    dual_upper(family, mu_hat, n, level)
}

fn check_round(t: u64) -> Result<()> {
    if t == 0 {
        Err(Error::Precondition("round t must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn posterior_state(history: &History, arm: usize, family: ArmFamily) -> Result<PosteriorState> {
    history.require_pulled(arm)?;
    PosteriorState::new(family, history.count(arm), history.sum(arm))
}

/// Chooses `A_{t+1}` for the given policy. Ties go to the lowest index.
pub fn select<R: Rng + ?Sized>(
    policy: &PolicyConfig,
    history: &History,
    t: u64,
    family: ArmFamily,
    rng: &mut R,
) -> Result<usize> {
    policy.check_family(family)?;
    let k = history.num_arms();
    let scores = match policy.kind {
        PolicyKind::Ucb1 => {
            let sigma2 = policy.sigma2.expect("validated ucb1 config");
            (0..k)
                .map(|a| ucb1_index(history, a, t, sigma2))
                .collect::<Result<Vec<_>>>()?
        }
        PolicyKind::KlUcb | PolicyKind::KlUcbPlus => {
            let variant = if policy.kind == PolicyKind::KlUcb {
                KlUcbVariant::Plain
            } else {
                KlUcbVariant::Plus
            };
            (0..k)
                .map(|a| klucb_index(history, a, t, family, variant))
                .collect::<Result<Vec<_>>>()?
        }
        PolicyKind::BayesUcb => {
            if t < 2 {
                return Err(Error::Precondition(
                    "bayes-ucb quantile order 1 - 1/t needs t >= 2".into(),
                ));
            }
            let p = 1.0 - 1.0 / t as f64;
            (0..k)
                .map(|a| posterior_quantile(&posterior_state(history, a, family)?, p))
                .collect::<Result<Vec<_>>>()?
        }
        PolicyKind::Thompson => (0..k)
            .map(|a| posterior_sample(&posterior_state(history, a, family)?, rng))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(argmax(&scores))
}

/// A [`PolicyConfig`] bound to a family, usable by [`crate::engine::run_policy`].
#[derive(Debug, Clone)]
pub struct IndexPolicy {
    config: PolicyConfig,
    family: ArmFamily,
}

impl IndexPolicy {
    pub fn new(config: PolicyConfig, family: ArmFamily) -> Result<Self> {
        config.check_family(family)?;
        Ok(Self { config, family })
    }
}

impl Policy for IndexPolicy {
    fn select(&mut self, history: &History, rng: &mut dyn RngCore) -> Result<usize> {
        select(&self.config, history, history.t(), self.family, rng)
    }
}
