//! One-parameter exponential families parameterized by their mean.
//!
//! Each [`ArmFamily`] provides the Kullback-Leibler divergence `d(mu, lambda)`
//! between its members, a sampler, and (for Bernoulli and Gaussian arms) a
//! conjugate posterior. [`dual_upper`] inverts the divergence and is the
//! building block of every KL-based confidence bound in the crate.
//!
//! Divergences are defined on the *closure* of the mean domain by their
//! continuous limits, because empirical means routinely sit on the boundary
//! (a Bernoulli arm that has only returned zeros has `mu_hat = 0`). An
//! infinite divergence is represented by `f64::INFINITY`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};
use statrs::function::beta::beta_reg;

use crate::roots::bisect;
use crate::{Error, Result};

/// Absolute tolerance on every bisection result.
pub const BISECTION_TOL: f64 = 1e-12;

/// Tolerance on posterior quantiles.
pub const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ArmFamily {
    /// Bernoulli rewards, mean domain `(0, 1)`.
    Bernoulli,
    /// Gaussian rewards with known variance, mean domain `(-inf, inf)`.
    Gaussian {
        #[serde(rename = "sigma2")]
        variance: f64,
    },
    /// Poisson rewards, mean domain `(0, inf)`.
    Poisson,
    /// Exponential rewards, mean domain `(0, inf)`.
    Exponential,
}

impl ArmFamily {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gaussian variance must be positive and finite, got {variance}"
            )));
        }
        Ok(ArmFamily::Gaussian { variance })
    }

    /// Builds a family from its CLI/config name. `sigma2` is required for
    /// `gaussian` and rejected for the others.
    pub fn from_name(name: &str, sigma2: Option<f64>) -> Result<Self> {
        let family = match name.to_ascii_lowercase().as_str() {
            "bernoulli" => ArmFamily::Bernoulli,
            "gaussian" => {
                let variance = sigma2.ok_or_else(|| {
                    Error::InvalidArgument("gaussian family requires sigma2".into())
                })?;
                return ArmFamily::gaussian(variance);
            }
            "poisson" => ArmFamily::Poisson,
            "exponential" => ArmFamily::Exponential,
            other => return Err(Error::InvalidArgument(format!(
                "unknown family `{other}` (expected bernoulli, gaussian, poisson or exponential)"
            ))),
        };
        if sigma2.is_some() {
            return Err(Error::InvalidArgument(format!(
                "sigma2 only applies to the gaussian family, not {}",
                family.name()
            )));
        }
        Ok(family)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ArmFamily::Bernoulli => "bernoulli",
            ArmFamily::Gaussian { .. } => "gaussian",
            ArmFamily::Poisson => "poisson",
            ArmFamily::Exponential => "exponential",
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            ArmFamily::Gaussian { variance } => Some(*variance),
            _ => None,
        }
    }

    /// Human-readable mean domain, for error messages.
    pub fn domain_str(&self) -> &'static str {
        match self {
            ArmFamily::Bernoulli => "(0, 1)",
            ArmFamily::Gaussian { .. } => "(-inf, inf)",
            ArmFamily::Poisson | ArmFamily::Exponential => "(0, inf)",
        }
    }

    /// Infimum and supremum of the mean domain.
    pub fn domain_bounds(&self) -> (f64, f64) {
        match self {
            ArmFamily::Bernoulli => (0.0, 1.0),
            ArmFamily::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ArmFamily::Poisson | ArmFamily::Exponential => (0.0, f64::INFINITY),
        }
    }

    /// Whether `mu` lies in the (open) mean domain.
    pub fn contains(&self, mu: f64) -> bool {
        let (lo, hi) = self.domain_bounds();
        mu.is_finite() && mu > lo && mu < hi
    }

    /// Whether `mu` lies in the closure of the mean domain (finite values only).
    pub fn in_closure(&self, mu: f64) -> bool {
        let (lo, hi) = self.domain_bounds();
        mu.is_finite() && mu >= lo && mu <= hi
    }

    fn check_closure(&self, what: &str, value: f64) -> Result<()> {
        if self.in_closure(value) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} = {value} is outside the closure of the {} mean domain {}",
                self.name(),
                self.domain_str()
            )))
        }
    }

    fn check_open(&self, what: &str, value: f64) -> Result<()> {
        if self.contains(value) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} = {value} is outside the {} mean domain {}",
                self.name(),
                self.domain_str()
            )))
        }
    }

    /// `d(mu, lambda)` with domain checks.
    pub fn divergence(&self, mu: f64, lambda: f64) -> Result<f64> {
        self.check_closure("mu", mu)?;
        self.check_closure("lambda", lambda)?;
        Ok(self.kl(mu, lambda))
    }

    /// `d(mu, lambda)` without domain checks. Callers guarantee both
    /// arguments lie in the closure of the mean domain.
    pub(crate) fn kl(&self, mu: f64, lambda: f64) -> f64 {
        match *self {
            ArmFamily::Bernoulli => bernoulli_kl(mu, lambda),
            ArmFamily::Gaussian { variance } => {
                let diff = mu - lambda;
                diff * diff / (2.0 * variance)
            }
            ArmFamily::Poisson => {
                if mu == 0.0 {
                    lambda
                } else if lambda == 0.0 {
                    f64::INFINITY
                } else {
                    (lambda - mu + mu * (mu / lambda).ln()).max(0.0)
                }
            }
            ArmFamily::Exponential => {
                if mu == lambda {
                    0.0
                } else if mu == 0.0 || lambda == 0.0 {
                    f64::INFINITY
                } else {
                    let u = mu / lambda;
                    ((u - 1.0) - (u - 1.0).ln_1p()).max(0.0)
                }
            }
        }
    }

    /// One draw from the member of the family with mean `mu`.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> Result<f64> {
        self.check_open("mu", mu)?;
        Ok(self.sample_unchecked(mu, rng))
    }

    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        match *self {
            ArmFamily::Bernoulli => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            ArmFamily::Gaussian { variance } => Normal::new(mu, variance.sqrt())
                .expect("validated gaussian parameters")
                .sample(rng),
            ArmFamily::Poisson => Poisson::new(mu)
                .expect("validated poisson mean")
                .sample(rng),
            ArmFamily::Exponential => Exp::new(1.0 / mu)
                .expect("validated exponential mean")
                .sample(rng),
        }
    }
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    // x ln(x / y) with the conventions 0 ln 0 = 0 and x ln(x / 0) = inf.
    fn term(x: f64, y: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x * (x / y).ln()
        }
    }
    (term(p, q) + term(1.0 - p, 1.0 - q)).max(0.0)
}

/// Binary relative entropy `kl(p, q)` on `[0, 1]^2`.
pub fn bernoulli_divergence(p: f64, q: f64) -> Result<f64> {
    ArmFamily::Bernoulli.divergence(p, q)
}

/// Largest `q >= mu_hat` with `n * d(mu_hat, q) <= level`.
///
/// Closed form for Gaussian arms; bisection for the other families, on a
/// bracket that is grown geometrically when the domain is unbounded.
pub fn dual_upper(family: ArmFamily, mu_hat: f64, n: u64, level: f64) -> Result<f64> {
    family.check_closure("mu_hat", mu_hat)?;
    if n == 0 {
        return Err(Error::InvalidArgument("dual_upper needs n >= 1".into()));
    }
    if level.is_nan() || level < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "exploration level must be nonnegative, got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(mu_hat);
    }
    let (_, sup) = family.domain_bounds();
    if level.is_infinite() {
        return if sup.is_finite() {
            Ok(sup)
        } else {
            Err(Error::OutOfRange(format!(
                "infinite level with unbounded {} domain",
                family.name()
            )))
        };
    }
    let n = n as f64;
    if let ArmFamily::Gaussian { variance } = family {
        return Ok(mu_hat + (2.0 * variance * level / n).sqrt());
    }

    let target = level / n;
    let hi = if sup.is_finite() {
        if family.kl(mu_hat, sup) <= target {
            return Ok(sup);
        }
        sup
    } else {
        let mut hi = mu_hat.max(1.0) * 2.0;
        let mut grown = 0;
        while family.kl(mu_hat, hi) <= target {
            hi *= 2.0;
            grown += 1;
            if grown > 2000 || !hi.is_finite() {
                return Err(Error::OutOfRange(format!(
                    "no finite upper bracket for level {level}"
                )));
            }
        }
        hi
    };

    let (lo, _) = bisect(
        mu_hat,
        hi,
        |q| family.kl(mu_hat, q) > target,
        |lo, hi| hi - lo <= BISECTION_TOL && (n * family.kl(mu_hat, lo) - level).abs() <= 1e-10,
    );
    Ok(lo)
}

/// Sufficient statistics of one arm, read as a conjugate posterior.
///
/// Bernoulli arms use a Beta prior, uniform `Beta(1, 1)` unless overridden.
/// Gaussian arms use the improper flat prior, whose posterior after `n >= 1`
/// observations is `Normal(mu_hat, sigma2 / n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorState {
    family: ArmFamily,
    count: u64,
    sum: f64,
    beta_prior: (f64, f64),
}

/// A conjugate posterior distribution on the mean of an arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Posterior {
    Beta { alpha: f64, beta: f64 },
    Normal { mean: f64, std_dev: f64 },
}

impl PosteriorState {
    pub fn new(family: ArmFamily, count: u64, sum: f64) -> Result<Self> {
        Self::with_beta_prior(family, count, sum, 1.0, 1.0)
    }

    pub fn with_beta_prior(
        family: ArmFamily,
        count: u64,
        sum: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !sum.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite reward sum {sum}"
            )));
        }
        if family == ArmFamily::Bernoulli && !(0.0..=count as f64).contains(&sum) {
            return Err(Error::InvalidArgument(format!(
                "bernoulli sum {sum} must lie in [0, count = {count}]"
            )));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta prior parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self {
            family,
            count,
            sum,
            beta_prior: (alpha, beta),
        })
    }

    pub fn family(&self) -> ArmFamily {
        self.family
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn posterior(&self) -> Result<Posterior> {
        match self.family {
            ArmFamily::Bernoulli => {
                let (a, b) = self.beta_prior;
                Ok(Posterior::Beta {
                    alpha: a + self.sum,
                    beta: b + self.count as f64 - self.sum,
                })
            }
            ArmFamily::Gaussian { variance } => {
                if self.count == 0 {
                    return Err(Error::Unsupported(
                        "flat-prior gaussian posterior needs at least one observation".into(),
                    ));
                }
                let n = self.count as f64;
                Ok(Posterior::Normal {
                    mean: self.sum / n,
                    std_dev: (variance / n).sqrt(),
                })
            }
            other => Err(Error::Unsupported(format!(
                "no conjugate posterior implemented for the {} family",
                other.name()
            ))),
        }
    }
}

impl Posterior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Posterior::Beta { alpha, beta } => Beta::new(alpha, beta)
                .expect("positive beta parameters")
                .sample(rng),
            Posterior::Normal { mean, std_dev } => Normal::new(mean, std_dev)
                .expect("positive posterior std dev")
                .sample(rng),
        }
    }

    /// The `p`-quantile, by bisection on the regularized incomplete beta
    /// function for Beta posteriors and in closed form for Normal ones.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile order must lie in (0, 1), got {p}"
            )));
        }
        match *self {
            Posterior::Beta { alpha, beta } => {
                let (lo, hi) = bisect(
                    0.0,
                    1.0,
                    |x| beta_reg(alpha, beta, x) >= p,
                    |lo, hi| hi - lo <= QUANTILE_TOL * 1e-2,
                );
                Ok(0.5 * (lo + hi))
            }
            Posterior::Normal { mean, std_dev } => {
                let normal = StatNormal::new(mean, std_dev)
                    .map_err(|e| Error::Internal(format!("normal posterior: {e}")))?;
                Ok(normal.inverse_cdf(p))
            }
        }
    }
}

/// One draw from the posterior described by `state`.
pub fn posterior_sample<R: Rng + ?Sized>(state: &PosteriorState, rng: &mut R) -> Result<f64> {
    Ok(state.posterior()?.sample(rng))
}

/// The `p`-quantile of the posterior described by `state`.
pub fn posterior_quantile(state: &PosteriorState, p: f64) -> Result<f64> {
    state.posterior()?.quantile(p)
}
