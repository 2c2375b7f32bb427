//! Bandit environments, histories and the regret-minimization run loop.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::exp_family::ArmFamily;
use crate::{Error, Result, Stream};

/// A family together with the vector of arm means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    #[serde(flatten)]
    family: ArmFamily,
    means: Vec<f64>,
}

impl BanditInstance {
    /// Requires at least two arms, every mean in the family's open domain.
    pub fn new(family: ArmFamily, means: Vec<f64>) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a bandit instance needs at least 2 arms, got {}",
                means.len()
            )));
        }
        for (i, &mu) in means.iter().enumerate() {
            if !family.contains(mu) {
                return Err(Error::Domain {
                    arm: i + 1,
                    value: mu,
                    family: family.name(),
                    domain: family.domain_str(),
                });
            }
        }
        Ok(Self { family, means })
    }

    pub fn family(&self) -> ArmFamily {
        self.family
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn best_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index attaining the largest mean.
    pub fn best_arm(&self) -> usize {
        argmax(&self.means)
    }

    pub fn has_unique_best(&self) -> bool {
        let best = self.best_mean();
        self.means.iter().filter(|&&m| m == best).count() == 1
    }

    /// `mu* - mu_a` for every arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_mean();
        self.means.iter().map(|m| best - m).collect()
    }
}

/// Lowest index of the maximum; NaN entries are never selected.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Per-arm pull counts and reward sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    counts: Vec<u64>,
    sums: Vec<f64>,
    t: u64,
}

impl History {
    pub fn new(num_arms: usize) -> Self {
        Self {
            counts: vec![0; num_arms],
            sums: vec![0.0; num_arms],
            t: 0,
        }
    }

    /// Builds a history from explicit statistics; `t` is the total count.
    pub fn from_parts(counts: Vec<u64>, sums: Vec<f64>) -> Result<Self> {
        if counts.len() != sums.len() {
            return Err(Error::InvalidArgument(format!(
                "{} counts but {} sums",
                counts.len(),
                sums.len()
            )));
        }
        if let Some(i) = counts
            .iter()
            .zip(&sums)
            .position(|(&n, &s)| n == 0 && s != 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "arm {} has a nonzero sum but no pulls",
                i + 1
            )));
        }
        let t = counts.iter().sum();
        Ok(Self { counts, sums, t })
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    pub fn sum(&self, arm: usize) -> f64 {
        self.sums[arm]
    }

    /// Empirical mean of `arm`, `None` before its first pull.
    pub fn mean(&self, arm: usize) -> Option<f64> {
        match self.counts.get(arm) {
            Some(&n) if n > 0 => Some(self.sums[arm] / n as f64),
            _ => None,
        }
    }

    /// All empirical means, or `None` if some arm was never pulled.
    pub fn means(&self) -> Option<Vec<f64>> {
        (0..self.num_arms()).map(|a| self.mean(a)).collect()
    }

    /// Appends one observation of `arm`.
    pub fn record(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.num_arms() {
            return Err(arm_out_of_range(arm, self.num_arms()));
        }
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.t += 1;
        Ok(())
    }

    pub(crate) fn require_pulled(&self, arm: usize) -> Result<f64> {
        if arm >= self.num_arms() {
            return Err(arm_out_of_range(arm, self.num_arms()));
        }
        self.mean(arm)
            .ok_or_else(|| Error::Precondition(format!("arm {} has not been pulled", arm + 1)))
    }
}

fn arm_out_of_range(arm: usize, k: usize) -> Error {
    Error::InvalidArgument(format!("arm {} out of range 1..={k}", arm + 1))
}

/// Draws a reward from `arm` and records it in `history`.
pub fn pull<R: Rng + ?Sized>(
    instance: &BanditInstance,
    history: &mut History,
    arm: usize,
    rng: &mut R,
) -> Result<f64> {
    if history.num_arms() != instance.num_arms() {
        return Err(Error::InvalidArgument(format!(
            "history has {} arms, instance has {}",
            history.num_arms(),
            instance.num_arms()
        )));
    }
    if arm >= instance.num_arms() {
        return Err(arm_out_of_range(arm, instance.num_arms()));
    }
    let reward = instance.family.sample_unchecked(instance.means[arm], rng);
    history.record(arm, reward)?;
    Ok(reward)
}

/// A regret-minimization sampling rule.
pub trait Policy {
    /// Chooses the next arm given everything observed so far.
    fn select(&mut self, history: &History, rng: &mut dyn RngCore) -> Result<usize>;
}

/// Always plays a fixed arm, typically the best one. Used as a reference.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    arm: usize,
}

impl OraclePolicy {
    pub fn new(instance: &BanditInstance) -> Self {
        Self {
            arm: instance.best_arm(),
        }
    }

    pub fn fixed(arm: usize) -> Self {
        Self { arm }
    }
}

impl Policy for OraclePolicy {
    fn select(&mut self, _history: &History, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.arm)
    }
}

/// Full trace of one simulated run. Arm indices serialize 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(with = "one_based_vec")]
    pub arm_sequence: Vec<usize>,
    pub reward_sequence: Vec<f64>,
    pub final_history: History,
    pub stopping_time: Option<u64>,
    #[serde(with = "one_based_opt")]
    pub recommendation: Option<usize>,
    pub seed: u64,
}

impl RunRecord {
    pub(crate) fn empty(num_arms: usize, seed: u64) -> Self {
        Self {
            arm_sequence: Vec::new(),
            reward_sequence: Vec::new(),
            final_history: History::new(num_arms),
            stopping_time: None,
            recommendation: None,
            seed,
        }
    }

    pub(crate) fn pull<R: Rng + ?Sized>(
        &mut self,
        instance: &BanditInstance,
        arm: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let reward = pull(instance, &mut self.final_history, arm, rng)?;
        self.arm_sequence.push(arm);
        self.reward_sequence.push(reward);
        Ok(reward)
    }

    /// Counts after the first `t` rounds.
    pub fn counts_at(&self, t: usize) -> Vec<u64> {
        let mut counts = vec![0; self.final_history.num_arms()];
        for &a in &self.arm_sequence[..t] {
            counts[a] += 1;
        }
        counts
    }
}

mod one_based_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(arms: &[usize], s: S) -> Result<S::Ok, S::Error> {
        arms.iter().map(|a| a + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let arms = Vec::<usize>::deserialize(d)?;
        arms.into_iter()
            .map(|a| {
                a.checked_sub(1)
                    .ok_or_else(|| serde::de::Error::custom("arm numbers start at 1"))
            })
            .collect()
    }
}

mod one_based_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(arm: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        arm.map(|a| a + 1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Option::<usize>::deserialize(d)? {
            None => Ok(None),
            Some(a) => a
                .checked_sub(1)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom("arm numbers start at 1")),
        }
    }
}

/// Runs `policy` for `horizon` rounds.
///
/// The first `K` rounds pull every arm once in index order; the policy picks
/// every later arm.
pub fn run_policy(
    instance: &BanditInstance,
    policy: &mut dyn Policy,
    horizon: u64,
    stream: &mut Stream,
) -> Result<RunRecord> {
    let k = instance.num_arms();
    if horizon < k as u64 {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is shorter than the {k} initialization rounds"
        )));
    }
    let mut record = RunRecord::empty(k, stream.seed());
    record.arm_sequence.reserve(horizon as usize);
    record.reward_sequence.reserve(horizon as usize);
    for arm in 0..k {
        record.pull(instance, arm, stream)?;
    }
    while record.final_history.t() < horizon {
        let arm = policy.select(&record.final_history, stream)?;
        if arm >= k {
            return Err(Error::Internal(format!(
                "policy selected arm {} of a {k}-armed instance",
                arm + 1
            )));
        }
        record.pull(instance, arm, stream)?;
    }
    Ok(record)
}

/// `sum_a (mu* - mu_a) N_a(t)`.
pub fn pseudo_regret(instance: &BanditInstance, history: &History) -> f64 {
    instance
        .gaps()
        .iter()
        .zip(history.counts())
        .map(|(gap, &n)| gap * n as f64)
        .sum()
}

/// Pseudo-regret after every round of an arm sequence.
pub fn regret_curve(instance: &BanditInstance, arm_sequence: &[usize]) -> Vec<f64> {
    let gaps = instance.gaps();
    arm_sequence
        .iter()
        .scan(0.0, |acc, &a| {
            *acc += gaps[a];
            Some(*acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(means: &[f64]) -> BanditInstance {
        BanditInstance::new(ArmFamily::Bernoulli, means.to_vec()).unwrap()
    }

    #[test]
    fn instance_validation() {
        assert!(matches!(
            BanditInstance::new(ArmFamily::Bernoulli, vec![0.5, 1.5]),
            Err(Error::Domain { arm: 2, .. })
        ));
        assert!(BanditInstance::new(ArmFamily::Bernoulli, vec![0.5]).is_err());
        assert!(BanditInstance::new(ArmFamily::Poisson, vec![0.0, 1.0]).is_err());
        let inst = bern(&[0.3, 0.7, 0.7]);
        assert_eq!(inst.best_arm(), 1);
        assert!(!inst.has_unique_best());
        assert!(bern(&[0.3, 0.7]).has_unique_best());
    }

    #[test]
    fn pull_updates_counters() {
        let inst = bern(&[0.3, 0.6, 0.5]);
        let mut h = History::new(3);
        let mut s = Stream::new(0);
        let r = pull(&inst, &mut h, 1, &mut s).unwrap();
        assert_eq!(h.counts(), &[0, 1, 0]);
        assert_eq!(h.t(), 1);
        assert!(r == 0.0 || r == 1.0);
        assert_eq!(h.sum(1), r);
        assert!(matches!(
            pull(&inst, &mut h, 3, &mut s),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pulls_are_reproducible() {
        let inst =
            BanditInstance::new(ArmFamily::Gaussian { variance: 1.0 }, vec![0.0, 1.0]).unwrap();
        let rewards = |seed| {
            let mut h = History::new(2);
            let mut s = Stream::new(seed);
            (0..50)
                .map(|i| pull(&inst, &mut h, i % 2, &mut s).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(rewards(5), rewards(5));
        assert_ne!(rewards(5), rewards(6));
    }

    #[test]
    fn horizon_k_is_initialization_only() {
        let inst = bern(&[0.2, 0.4, 0.6, 0.8]);
        let mut policy = OraclePolicy::new(&inst);
        let rec = run_policy(&inst, &mut policy, 4, &mut Stream::new(1)).unwrap();
        assert_eq!(rec.arm_sequence, vec![0, 1, 2, 3]);
        assert_eq!(rec.stopping_time, None);
        assert!(run_policy(&inst, &mut policy, 3, &mut Stream::new(1)).is_err());
    }

    #[test]
    fn oracle_trace() {
        let inst = bern(&[0.9, 0.1]);
        let mut policy = OraclePolicy::new(&inst);
        let rec = run_policy(&inst, &mut policy, 10_000, &mut Stream::new(3)).unwrap();
        assert_eq!(rec.final_history.counts(), &[9_999, 1]);
        assert_eq!(rec.reward_sequence.len(), 10_000);
    }

    #[test]
    fn bad_policy_is_an_internal_error() {
        let inst = bern(&[0.9, 0.1]);
        let mut policy = OraclePolicy::fixed(5);
        assert!(matches!(
            run_policy(&inst, &mut policy, 10, &mut Stream::new(0)),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn pseudo_regret_examples() {
        let inst = bern(&[0.6, 0.5]);
        let h = History::from_parts(vec![90, 10], vec![50.0, 5.0]).unwrap();
        assert!((pseudo_regret(&inst, &h) - 1.0).abs() < 1e-12);
        let all_best = History::from_parts(vec![100, 0], vec![60.0, 0.0]).unwrap();
        assert_eq!(pseudo_regret(&inst, &all_best), 0.0);
        let flat = bern(&[0.4, 0.4, 0.4]);
        let h = History::from_parts(vec![3, 9, 1], vec![1.0, 4.0, 0.0]).unwrap();
        assert_eq!(pseudo_regret(&flat, &h), 0.0);
    }

    #[test]
    fn regret_curve_matches_pseudo_regret() {
        let inst = bern(&[0.6, 0.5, 0.2]);
        let mut policy = OraclePolicy::fixed(2);
        let rec = run_policy(&inst, &mut policy, 50, &mut Stream::new(4)).unwrap();
        let curve = regret_curve(&inst, &rec.arm_sequence);
        assert!((curve[49] - pseudo_regret(&inst, &rec.final_history)).abs() < 1e-12);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn run_record_serializes_one_based() {
        let inst = bern(&[0.9, 0.1]);
        let mut policy = OraclePolicy::new(&inst);
        let rec = run_policy(&inst, &mut policy, 3, &mut Stream::new(3)).unwrap();
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["arm_sequence"], serde_json::json!([1, 2, 1]));
        let back: RunRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, rec);
    }
}
