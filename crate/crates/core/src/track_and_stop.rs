//! Fixed-confidence best arm identification with Track-and-Stop.
//!
//! The sampling rule tracks the plug-in optimal proportions
//! `w*(mu_hat(t))`, with forced exploration of any arm whose count falls
//! below `sqrt(t) - K/2`. The stopping rule is the Chernoff GLRT rule: stop
//! at the first `t` where
//!
//! ```text
//! Z(t) = min_{b != a_hat(t)} Z_{a_hat(t), b}(t) > beta(t, delta)
//! ```
//!
//! and recommend the empirical best arm.

use serde::{Deserialize, Serialize};

use crate::complexity::{optimal_weights_from_means, DEFAULT_SOLVER_TOL};
use crate::engine::{argmax, BanditInstance, History, RunRecord};
use crate::exp_family::ArmFamily;
use crate::{Error, Result, Stream};

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Exponent of `t` in the general threshold.
pub const DEFAULT_ALPHA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `log(2 (K - 1) t / delta)`, delta-PAC for Bernoulli arms.
    BernoulliExact,
    /// `log(C t^alpha / delta)`; `c = None` means `C = 2 (K - 1)`.
    General { alpha: f64, c: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub delta: f64,
    pub threshold: ThresholdRule,
    /// Hard cap on the number of rounds.
    pub max_steps: u64,
    /// Recompute the plug-in weights every this many rounds.
    pub recompute_every: u64,
    /// Tolerance handed to the `w*` solver.
    pub solver_tol: f64,
}

impl StoppingConfig {
    pub fn new(delta: f64, threshold: ThresholdRule) -> Result<Self> {
        let config = Self {
            delta,
            threshold,
            max_steps: DEFAULT_MAX_STEPS,
            recompute_every: 1,
            solver_tol: DEFAULT_SOLVER_TOL,
        };
        config.check()?;
        Ok(config)
    }

    /// The exact Bernoulli threshold for Bernoulli arms, the general one
    /// with `alpha = 1.2` and `C = 2 (K - 1)` otherwise.
    pub fn default_for(family: ArmFamily, delta: f64) -> Result<Self> {
        let rule = match family {
            ArmFamily::Bernoulli => ThresholdRule::BernoulliExact,
            _ => ThresholdRule::General {
                alpha: DEFAULT_ALPHA,
                c: None,
            },
        };
        Self::new(delta, rule)
    }

    fn check(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if let ThresholdRule::General { alpha, c } = self.threshold {
            if !(alpha > 1.0 && alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "alpha must exceed 1, got {alpha}"
                )));
            }
            if let Some(c) = c {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "C must be positive, got {c}"
                    )));
                }
            }
        }
        if self.max_steps == 0 || self.recompute_every == 0 {
            return Err(Error::InvalidArgument(
                "max_steps and recompute_every must be positive".into(),
            ));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::InvalidArgument("solver_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn validate(&self, family: ArmFamily) -> Result<()> {
        self.check()?;
        if self.threshold == ThresholdRule::BernoulliExact && family != ArmFamily::Bernoulli {
            return Err(Error::InvalidArgument(format!(
                "the bernoulli_exact threshold does not apply to the {} family",
                family.name()
            )));
        }
        Ok(())
    }
}

/// `beta(t, delta)` for a `K`-armed problem.
pub fn threshold(t: u64, config: &StoppingConfig, num_arms: usize) -> f64 {
    let t = t as f64;
    let pairs = 2.0 * (num_arms as f64 - 1.0);
    match config.threshold {
        ThresholdRule::BernoulliExact => (pairs * t / config.delta).ln(),
        ThresholdRule::General { alpha, c } => {
            (c.unwrap_or(pairs) * t.powf(alpha) / config.delta).ln()
        }
    }
}

/// Log generalized likelihood ratio of `mu_a >= mu_b` against `mu_a <= mu_b`.
///
/// When `mu_hat_a >= mu_hat_b` this is
/// `N_a d(mu_hat_a, m) + N_b d(mu_hat_b, m)`, `m` the pooled mean; otherwise
/// it is `-Z_{b,a}`.
pub fn pairwise_glrt(history: &History, family: ArmFamily, a: usize, b: usize) -> Result<f64> {
    if a == b {
        return Err(Error::InvalidArgument(format!(
            "pairwise GLRT of arm {} with itself",
            a + 1
        )));
    }
    let mean_a = history.require_pulled(a)?;
    let mean_b = history.require_pulled(b)?;
    let (na, nb) = (history.count(a) as f64, history.count(b) as f64);
    Ok(glrt_value(family, na, mean_a, nb, mean_b))
}

fn glrt_value(family: ArmFamily, na: f64, mean_a: f64, nb: f64, mean_b: f64) -> f64 {
    if mean_a < mean_b {
        return -glrt_value(family, nb, mean_b, na, mean_a);
    }
    let m = (na * mean_a + nb * mean_b) / (na + nb);
    na * family.kl(mean_a, m) + nb * family.kl(mean_b, m)
}

/// `(Z(t), a_hat(t))`: the smallest GLRT of the empirical best arm against a
/// challenger, and the empirical best arm (lowest index on ties).
pub fn chernoff_statistic(history: &History, family: ArmFamily) -> Result<(f64, usize)> {
    let k = history.num_arms();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 arms".into()));
    }
    let means = (0..k)
        .map(|a| history.require_pulled(a))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&means);
    let nb = history.count(best) as f64;
    let z = (0..k)
        .filter(|&b| b != best)
        .map(|b| glrt_value(family, nb, means[best], history.count(b) as f64, means[b]))
        .fold(f64::INFINITY, f64::min);
    Ok((z, best))
}

/// The Tracking rule: forced exploration of
/// `F_t = {a : N_a(t) < sqrt(t) - K/2}` (least-drawn first), otherwise the
/// arm with the largest deficit `w_a - N_a(t)/t`. Ties go to the lowest index.
pub fn tracking_select(history: &History, w_target: &[f64]) -> usize {
    let k = history.num_arms();
    let t = history.t() as f64;
    let floor = t.sqrt() - k as f64 / 2.0;
    let counts = history.counts();
    let forced = (0..k)
        .filter(|&a| (counts[a] as f64) < floor)
        .min_by_key(|&a| counts[a]);
    if let Some(a) = forced {
        return a;
    }
    let deficits: Vec<f64> = (0..k)
        .map(|a| {
            let share = if t > 0.0 { counts[a] as f64 / t } else { 0.0 };
            w_target[a] - share
        })
        .collect();
    argmax(&deficits)
}

/// Where the tracking rule gets its target proportions.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    /// `w*(mu_hat(t))`, uniform whenever the plug-in problem is degenerate.
    PlugIn,
    /// A fixed target, e.g. `w*(mu)` computed from the true means.
    Fixed(Vec<f64>),
}

struct Tracker {
    family: ArmFamily,
    source: WeightSource,
    recompute_every: u64,
    solver_tol: f64,
    target: Vec<f64>,
    rounds: u64,
    fallbacks: u64,
}

impl Tracker {
    fn new(
        family: ArmFamily,
        num_arms: usize,
        source: WeightSource,
        recompute_every: u64,
        solver_tol: f64,
    ) -> Result<Self> {
        let target = match &source {
            WeightSource::Fixed(w) => {
                if w.len() != num_arms {
                    return Err(Error::InvalidArgument(format!(
                        "{} target weights for {num_arms} arms",
                        w.len()
                    )));
                }
                let total: f64 = w.iter().sum();
                if w.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "target weights must be a probability vector, got {w:?}"
                    )));
                }
                w.clone()
            }
            WeightSource::PlugIn => vec![1.0 / num_arms as f64; num_arms],
        };
        Ok(Self {
            family,
            source,
            recompute_every,
            solver_tol,
            target,
            rounds: 0,
            fallbacks: 0,
        })
    }

    fn next_arm(&mut self, history: &History) -> usize {
        if self.source == WeightSource::PlugIn && self.rounds.is_multiple_of(self.recompute_every) {
            let k = history.num_arms();
            let fresh = history.means().and_then(|means| {
                optimal_weights_from_means(self.family, &means, self.solver_tol).ok()
            });
            match fresh {
                Some(ct) => self.target = ct.w_star,
                None => {
                    self.fallbacks += 1;
                    self.target = vec![1.0 / k as f64; k];
                }
            }
        }
        self.rounds += 1;
        tracking_select(history, &self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaiResult {
    /// Stopping time, or the round count at which the run was cut off.
    pub tau: u64,
    /// Empirical best arm at `tau` (0-based).
    pub recommendation: usize,
    /// False when `max_steps` was reached before the stopping rule fired.
    pub terminated: bool,
    pub trace: RunRecord,
    /// `Z(t)` for `t = K, K + 1, ..., tau`.
    pub z_sequence: Vec<f64>,
    /// Rounds in which the plug-in weights were degenerate and uniform
    /// weights were tracked instead.
    pub fallback_rounds: u64,
}

impl BaiResult {
    /// `Z(t)`, if it was computed at round `t`.
    pub fn z_at(&self, t: u64) -> Option<f64> {
        let k = self.trace.final_history.num_arms() as u64;
        t.checked_sub(k)
            .and_then(|i| self.z_sequence.get(i as usize).copied())
    }
}

/// Runs Track-and-Stop until the Chernoff rule fires or `max_steps` rounds.
///
/// Each arm is pulled once first. After every pull from round `K` on, `Z(t)`
/// is compared with `beta(t, delta)` before the next arm is chosen.
pub fn run_track_and_stop(
    instance: &BanditInstance,
    config: &StoppingConfig,
    stream: &mut Stream,
) -> Result<BaiResult> {
    let family = instance.family();
    config.validate(family)?;
    if !instance.has_unique_best() {
        return Err(Error::DegenerateInstance(
            "best arm identification needs a unique best arm".into(),
        ));
    }
    let k = instance.num_arms();
    let mut tracker = Tracker::new(
        family,
        k,
        WeightSource::PlugIn,
        config.recompute_every,
        config.solver_tol,
    )?;
    let mut record = RunRecord::empty(k, stream.seed());
    for arm in 0..k {
        record.pull(instance, arm, stream)?;
    }
    let mut z_sequence = Vec::new();
    loop {
        let t = record.final_history.t();
        let (z, best) = chernoff_statistic(&record.final_history, family)?;
        z_sequence.push(z);
        let stopped = z > threshold(t, config, k);
        if stopped || t >= config.max_steps {
            record.stopping_time = Some(t);
            record.recommendation = Some(best);
            return Ok(BaiResult {
                tau: t,
                recommendation: best,
                terminated: stopped,
                trace: record,
                z_sequence,
                fallback_rounds: tracker.fallbacks,
            });
        }
        let arm = tracker.next_arm(&record.final_history);
        record.pull(instance, arm, stream)?;
    }
}

/// The Tracking sampling rule alone, for `steps` rounds in total (the first
/// `K` are initialization pulls).
pub fn run_tracking(
    instance: &BanditInstance,
    source: WeightSource,
    steps: u64,
    stream: &mut Stream,
) -> Result<RunRecord> {
    let k = instance.num_arms();
    let mut tracker = Tracker::new(instance.family(), k, source, 1, DEFAULT_SOLVER_TOL)?;
    let mut record = RunRecord::empty(k, stream.seed());
    for arm in 0..k.min(steps as usize) {
        record.pull(instance, arm, stream)?;
    }
    while record.final_history.t() < steps {
        let arm = tracker.next_arm(&record.final_history);
        record.pull(instance, arm, stream)?;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const GAUSS1: ArmFamily = ArmFamily::Gaussian { variance: 1.0 };

    fn hist(counts: &[u64], sums: &[f64]) -> History {
        History::from_parts(counts.to_vec(), sums.to_vec()).unwrap()
    }

    #[test]
    fn glrt_examples() {
        let h = hist(&[4, 4], &[4.0, 0.0]);
        assert_abs_diff_eq!(
            pairwise_glrt(&h, GAUSS1, 0, 1).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            pairwise_glrt(&h, GAUSS1, 1, 0).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        let eq = hist(&[3, 5], &[1.5, 2.5]);
        assert_eq!(pairwise_glrt(&eq, ArmFamily::Bernoulli, 0, 1).unwrap(), 0.0);
        assert!(matches!(
            pairwise_glrt(&hist(&[0, 2], &[0.0, 1.0]), GAUSS1, 0, 1),
            Err(Error::Precondition(_))
        ));
        assert!(pairwise_glrt(&h, GAUSS1, 1, 1).is_err());
    }

    #[test]
    fn chernoff_examples() {
        let h = hist(&[4, 4], &[4.0, 0.0]);
        let (z, best) = chernoff_statistic(&h, GAUSS1).unwrap();
        assert_eq!(best, 0);
        assert_eq!(z, pairwise_glrt(&h, GAUSS1, 0, 1).unwrap());
        let flat = hist(&[2, 4, 6], &[1.0, 2.0, 3.0]);
        assert_eq!(
            chernoff_statistic(&flat, ArmFamily::Bernoulli).unwrap(),
            (0.0, 0)
        );
        assert!(chernoff_statistic(&hist(&[2, 0], &[1.0, 0.0]), GAUSS1).is_err());
    }

    #[test]
    fn threshold_examples() {
        let exact = StoppingConfig::new(0.1, ThresholdRule::BernoulliExact).unwrap();
        assert_abs_diff_eq!(threshold(100, &exact, 2), 2000f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(threshold(100, &exact, 2), 7.600902, epsilon = 1e-6);
        let general = StoppingConfig::new(
            0.1,
            ThresholdRule::General {
                alpha: 1.0 + 1e-12,
                c: Some(6.0),
            },
        );
        assert!(general.is_ok());
        // alpha = 1 itself is outside the general rule's range; compare the formula directly
        let g = StoppingConfig {
            threshold: ThresholdRule::General {
                alpha: 1.0,
                c: None,
            },
            ..exact.clone()
        };
        for t in [1, 10, 12345] {
            assert_abs_diff_eq!(
                threshold(t, &g, 4),
                threshold(t, &exact, 4),
                epsilon = 1e-12
            );
        }
        let near_one = StoppingConfig::new(1.0 - 1e-12, ThresholdRule::BernoulliExact).unwrap();
        assert_abs_diff_eq!(
            threshold(50, &near_one, 3),
            (4.0f64 * 50.0).ln(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn config_validation() {
        assert!(StoppingConfig::new(0.0, ThresholdRule::BernoulliExact).is_err());
        assert!(StoppingConfig::new(1.0, ThresholdRule::BernoulliExact).is_err());
        assert!(StoppingConfig::new(
            0.1,
            ThresholdRule::General {
                alpha: 1.0,
                c: None
            }
        )
        .is_err());
        let exact = StoppingConfig::new(0.1, ThresholdRule::BernoulliExact).unwrap();
        assert!(exact.validate(GAUSS1).is_err());
        let d = StoppingConfig::default_for(ArmFamily::Poisson, 0.05).unwrap();
        assert_eq!(
            d.threshold,
            ThresholdRule::General {
                alpha: 1.2,
                c: None
            }
        );
        assert_eq!(d.max_steps, 10_000_000);
    }

    #[test]
    fn tracking_examples() {
        // sqrt(16) - 1 = 3 and N_1 = 1 < 3
        assert_eq!(
            tracking_select(&hist(&[1, 15], &[0.0, 0.0]), &[0.1, 0.9]),
            0
        );
        let h = hist(&[80, 20], &[0.0, 0.0]);
        assert_eq!(tracking_select(&h, &[0.9, 0.1]), 0);
        let both = hist(&[2, 2, 96], &[0.0, 0.0, 0.0]);
        assert_eq!(tracking_select(&both, &[0.0, 0.0, 1.0]), 0);
        assert_eq!(tracking_select(&hist(&[5, 5], &[0.0, 0.0]), &[0.5, 0.5]), 0);
    }

    #[test]
    fn run_is_deterministic_and_stops_correctly() {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, vec![0.9, 0.1]).unwrap();
        let config = StoppingConfig::new(0.1, ThresholdRule::BernoulliExact).unwrap();
        let a = run_track_and_stop(&inst, &config, &mut Stream::new(8)).unwrap();
        let b = run_track_and_stop(&inst, &config, &mut Stream::new(8)).unwrap();
        assert_eq!(a, b);
        assert!(a.terminated);
        assert_eq!(a.trace.arm_sequence.len() as u64, a.tau);
        assert!(a.z_at(a.tau).unwrap() > threshold(a.tau, &config, 2));
        if a.tau > 2 {
            assert!(a.z_at(a.tau - 1).unwrap() <= threshold(a.tau - 1, &config, 2));
        }
        assert_eq!(a.trace.stopping_time, Some(a.tau));
        assert_eq!(a.trace.recommendation, Some(a.recommendation));
    }

    #[test]
    fn truncated_runs_are_flagged() {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, vec![0.51, 0.5]).unwrap();
        let mut config = StoppingConfig::new(1e-6, ThresholdRule::BernoulliExact).unwrap();
        config.max_steps = 50;
        let r = run_track_and_stop(&inst, &config, &mut Stream::new(0)).unwrap();
        assert!(!r.terminated);
        assert_eq!(r.tau, 50);
    }

    #[test]
    fn rejects_tied_instances() {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, vec![0.5, 0.5]).unwrap();
        let config = StoppingConfig::new(0.1, ThresholdRule::BernoulliExact).unwrap();
        assert!(matches!(
            run_track_and_stop(&inst, &config, &mut Stream::new(0)),
            Err(Error::DegenerateInstance(_))
        ));
    }

    #[test]
    fn gaussian_general_threshold_run() {
        let inst = BanditInstance::new(GAUSS1, vec![1.0, 0.0, -0.5]).unwrap();
        let config = StoppingConfig::default_for(GAUSS1, 0.05).unwrap();
        let r = run_track_and_stop(&inst, &config, &mut Stream::new(2)).unwrap();
        assert!(r.terminated);
        assert_eq!(r.recommendation, 0);
    }

    #[test]
    fn fixed_weights_are_validated() {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, vec![0.6, 0.4]).unwrap();
        assert!(run_tracking(
            &inst,
            WeightSource::Fixed(vec![0.5]),
            10,
            &mut Stream::new(0)
        )
        .is_err());
        assert!(run_tracking(
            &inst,
            WeightSource::Fixed(vec![0.7, 0.7]),
            10,
            &mut Stream::new(0)
        )
        .is_err());
        let r = run_tracking(
            &inst,
            WeightSource::Fixed(vec![0.5, 0.5]),
            100,
            &mut Stream::new(0),
        )
        .unwrap();
        assert_eq!(r.final_history.counts(), &[50, 50]);
    }
}
