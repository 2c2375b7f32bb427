use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::complexity::{
    gaussian_t_star_bounds, lai_robbins_constant, optimal_weights, DEFAULT_SOLVER_TOL,
};
use crate::engine::{regret_curve, run_policy, BanditInstance};
use crate::exp_family::{dual_upper, ArmFamily};
use crate::track_and_stop::run_track_and_stop;
use crate::{Error, Result, Stream, VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceEcho {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    pub means: Vec<f64>,
}

impl InstanceEcho {
    fn new(family: ArmFamily, means: &[f64]) -> Self {
        Self {
            family: family.name().to_string(),
            sigma2: family.variance(),
            means: means.to_vec(),
        }
    }
}

/// Complexity constants of an instance. `T*` and `w*` are absent when the
/// best arm is not unique.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    #[serde(rename = "C")]
    pub lai_robbins: f64,
    #[serde(rename = "T_star")]
    pub t_star: Option<f64>,
    pub w_star: Option<Vec<f64>>,
    pub y_star: Option<f64>,
}

impl Constants {
    fn of(instance: &BanditInstance) -> Self {
        let ct = optimal_weights(instance, DEFAULT_SOLVER_TOL).ok();
        Self {
            lai_robbins: lai_robbins_constant(instance),
            t_star: ct.as_ref().map(|c| c.t_star),
            w_star: ct.as_ref().map(|c| c.w_star.clone()),
            y_star: ct.as_ref().map(|c| c.y_star),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub instance: InstanceEcho,
    pub constants: Constants,
    /// `(lower, upper)` bounds on `T*`, Gaussian arms only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_t_star_bounds: Option<(f64, f64)>,
}

pub fn complexity_report(instance: &BanditInstance) -> ComplexityReport {
    ComplexityReport {
        instance: InstanceEcho::new(instance.family(), instance.means()),
        constants: Constants::of(instance),
        gaussian_t_star_bounds: gaussian_t_star_bounds(instance).ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub t: u64,
    pub mean_regret: f64,
    pub std_regret: f64,
    /// `C(mu) log t`, the asymptotic lower-bound reference.
    pub lai_robbins_reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretAggregates {
    pub policy: String,
    pub horizon: u64,
    pub checkpoints: Vec<CheckpointStat>,
    /// Mean `N_a(T)` per arm.
    pub mean_final_counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaiDeltaSummary {
    pub delta: f64,
    pub taus: Vec<u64>,
    /// Terminated runs whose recommendation is not the best arm.
    pub errors: usize,
    pub error_rate: f64,
    pub non_terminated: usize,
    pub mean_tau: f64,
    pub std_tau: f64,
    pub mean_tau_over_log_inv_delta: f64,
    /// `T*(mu) log(1/delta)`, absent if `T*` could not be computed.
    pub t_star_log_inv_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub arm: usize,
    pub mean: f64,
    pub t: u64,
    pub gamma: f64,
    pub replications: usize,
    pub violations_kl: usize,
    pub violations_hoeffding: usize,
    pub freq_kl: f64,
    pub freq_hoeffding: f64,
    /// `e ceil(gamma log t) exp(-gamma)`
    pub bound_kl: f64,
    /// `t exp(-gamma)`
    pub bound_hoeffding: f64,
    pub mean_index_kl: f64,
    pub mean_index_hoeffding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Aggregates {
    Regret(RegretAggregates),
    Bai { per_delta: Vec<BaiDeltaSummary> },
    Coverage { rows: Vec<CoverageRow> },
    Complexity(ComplexityReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub instance: InstanceEcho,
    /// Absent for coverage experiments, which have no bandit instance.
    pub constants: Option<Constants>,
    pub replications: usize,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: SummaryRecord,
    pub csv: String,
}

impl ExperimentOutput {
    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary)
            .map_err(|e| Error::Internal(format!("summary serialization: {e}")))
    }

    /// Writes `<experiment>.csv` and `<experiment>_summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let name = self.summary.experiment.as_str();
        let csv_path = dir.join(format!("{name}.csv"));
        let json_path = dir.join(format!("{name}_summary.json"));
        fs::write(&csv_path, &self.csv)?;
        fs::write(&json_path, self.summary_json()? + "\n")?;
        Ok((csv_path, json_path))
    }
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Internal(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(format!("csv: {e}")))
}

fn mean_std(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// `ceil(10^(k/8))` for `k = 0, 1, ...` up to `horizon`, deduplicated, with
/// `horizon` appended when it is not already a checkpoint.
pub fn regret_checkpoints(horizon: u64) -> Vec<u64> {
    let mut points: Vec<u64> = Vec::new();
    for k in 0.. {
        let t = 10f64.powf(k as f64 / 8.0).ceil() as u64;
        if t > horizon {
            break;
        }
        if points.last() != Some(&t) {
            points.push(t);
        }
    }
    if points.last() != Some(&horizon) {
        points.push(horizon);
    }
    points
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.experiment != kind {
        return Err(Error::Config(format!(
            "expected a {kind} experiment, got {}",
            config.experiment
        )));
    }
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    match config.experiment {
        ExperimentKind::Regret => run_regret_experiment(config),
        ExperimentKind::Bai => run_bai_experiment(config),
        ExperimentKind::Coverage => run_coverage_experiment(config),
        ExperimentKind::Complexity => run_complexity_experiment(config),
    }
}

#[derive(Serialize)]
struct RegretRow {
    replication: usize,
    t: u64,
    pseudo_regret: f64,
}

pub fn run_regret_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Regret)?;
    config.validate()?;
    let instance = config.bandit_instance()?;
    let horizon = config.horizon()?;
    let checkpoints = regret_checkpoints(horizon);
    let k = instance.num_arms();

    let runs: Vec<(Vec<f64>, Vec<u64>)> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut stream = Stream::for_replication(config.seed, r as u64);
            let mut policy = config.build_policy(&instance)?;
            let record = run_policy(&instance, policy.as_mut(), horizon, &mut stream)?;
            let curve = regret_curve(&instance, &record.arm_sequence);
            let at = checkpoints.iter().map(|&t| curve[t as usize - 1]).collect();
            Ok((at, record.final_history.counts().to_vec()))
        })
        .collect::<Result<_>>()?;

    let csv = to_csv(runs.iter().enumerate().flat_map(|(r, (at, _))| {
        checkpoints
            .iter()
            .zip(at)
            .map(move |(&t, &regret)| RegretRow {
                replication: r,
                t,
                pseudo_regret: regret,
            })
    }))?;

    let constants = Constants::of(&instance);
    let stats = checkpoints
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (mean, std) = mean_std(runs.iter().map(|(at, _)| at[i]));
            CheckpointStat {
                t,
                mean_regret: mean,
                std_regret: std,
                lai_robbins_reference: constants.lai_robbins * (t as f64).ln(),
            }
        })
        .collect();
    let mean_final_counts = (0..k)
        .map(|a| runs.iter().map(|(_, c)| c[a] as f64).sum::<f64>() / runs.len() as f64)
        .collect();

    Ok(ExperimentOutput {
        summary: SummaryRecord {
            version: VERSION.to_string(),
            experiment: ExperimentKind::Regret,
            config: config.clone(),
            instance: InstanceEcho::new(instance.family(), instance.means()),
            constants: Some(constants),
            replications: config.replications,
            aggregates: Aggregates::Regret(RegretAggregates {
                policy: config
                    .policy
                    .as_ref()
                    .map(|p| p.kind.clone())
                    .unwrap_or_default(),
                horizon,
                checkpoints: stats,
                mean_final_counts,
            }),
        },
        csv,
    })
}

#[derive(Serialize)]
struct BaiRow {
    replication: usize,
    delta: f64,
    tau: u64,
    correct: u8,
    terminated: u8,
}

pub fn run_bai_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Bai)?;
    config.validate()?;
    let instance = config.bandit_instance()?;
    let best = instance.best_arm();
    let constants = Constants::of(&instance);

    let mut rows = Vec::new();
    let mut per_delta = Vec::new();
    for &delta in config.deltas()? {
        let stopping = config.stopping_config(delta)?;
        let runs: Vec<(u64, bool, bool)> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let mut stream = Stream::for_replication(config.seed, r as u64);
                let result = run_track_and_stop(&instance, &stopping, &mut stream)?;
                Ok((result.tau, result.recommendation == best, result.terminated))
            })
            .collect::<Result<_>>()?;

        let taus: Vec<u64> = runs.iter().map(|r| r.0).collect();
        let errors = runs.iter().filter(|r| r.2 && !r.1).count();
        let non_terminated = runs.iter().filter(|r| !r.2).count();
        let (mean_tau, std_tau) = mean_std(taus.iter().map(|&t| t as f64));
        let log_inv_delta = (1.0 / delta).ln();
        per_delta.push(BaiDeltaSummary {
            delta,
            errors,
            error_rate: errors as f64 / runs.len() as f64,
            non_terminated,
            mean_tau,
            std_tau,
            mean_tau_over_log_inv_delta: mean_tau / log_inv_delta,
            t_star_log_inv_delta: constants.t_star.map(|t| t * log_inv_delta),
            taus,
        });
        rows.extend(
            runs.into_iter()
                .enumerate()
                .map(|(r, (tau, correct, terminated))| BaiRow {
                    replication: r,
                    delta,
                    tau,
                    correct: correct as u8,
                    terminated: terminated as u8,
                }),
        );
    }

    Ok(ExperimentOutput {
        summary: SummaryRecord {
            version: VERSION.to_string(),
            experiment: ExperimentKind::Bai,
            config: config.clone(),
            instance: InstanceEcho::new(instance.family(), instance.means()),
            constants: Some(constants),
            replications: config.replications,
            aggregates: Aggregates::Bai { per_delta },
        },
        csv: to_csv(rows)?,
    })
}

/// Violation indicators and index values of one replication, laid out
/// `[arm][gamma]`.
struct CoverageDraw {
    kl: Vec<Vec<(bool, f64)>>,
    hoeffding: Vec<Vec<(bool, f64)>>,
}

pub fn run_coverage_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Coverage)?;
    config.validate()?;
    let family = config.family()?;
    let means = config.checked_means()?;
    let spec = config.coverage_spec()?;
    let sigma2 = config.coverage_sigma2()?;
    let t = spec.t;

    let draws: Vec<CoverageDraw> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut stream = Stream::for_replication(config.seed, r as u64);
            let mut kl = Vec::with_capacity(means.len());
            let mut hoeffding = Vec::with_capacity(means.len());
            for &mu in &means {
                let total: f64 = (0..t)
                    .map(|_| family.sample_unchecked(mu, &mut stream))
                    .sum();
                let mu_hat = total / t as f64;
                let mut kl_row = Vec::with_capacity(spec.gammas.len());
                let mut h_row = Vec::with_capacity(spec.gammas.len());
                for &gamma in &spec.gammas {
                    let upper = dual_upper(family, mu_hat, t, gamma)?;
                    kl_row.push((upper < mu, upper));
                    let upper = mu_hat + (2.0 * sigma2 * gamma / t as f64).sqrt();
                    h_row.push((upper < mu, upper));
                }
                kl.push(kl_row);
                hoeffding.push(h_row);
            }
            Ok(CoverageDraw { kl, hoeffding })
        })
        .collect::<Result<_>>()?;

    let n = draws.len();
    let log_t = (t as f64).ln();
    let mut rows = Vec::new();
    for (a, &mu) in means.iter().enumerate() {
        for (g, &gamma) in spec.gammas.iter().enumerate() {
            let violations_kl = draws.iter().filter(|d| d.kl[a][g].0).count();
            let violations_hoeffding = draws.iter().filter(|d| d.hoeffding[a][g].0).count();
            rows.push(CoverageRow {
                arm: a + 1,
                mean: mu,
                t,
                gamma,
                replications: n,
                violations_kl,
                violations_hoeffding,
                freq_kl: violations_kl as f64 / n as f64,
                freq_hoeffding: violations_hoeffding as f64 / n as f64,
                bound_kl: std::f64::consts::E * (gamma * log_t).ceil() * (-gamma).exp(),
                bound_hoeffding: t as f64 * (-gamma).exp(),
                mean_index_kl: draws.iter().map(|d| d.kl[a][g].1).sum::<f64>() / n as f64,
                mean_index_hoeffding: draws.iter().map(|d| d.hoeffding[a][g].1).sum::<f64>()
                    / n as f64,
            });
        }
    }

    Ok(ExperimentOutput {
        summary: SummaryRecord {
            version: VERSION.to_string(),
            experiment: ExperimentKind::Coverage,
            config: config.clone(),
            instance: InstanceEcho::new(family, &means),
            constants: None,
            replications: config.replications,
            aggregates: Aggregates::Coverage { rows: rows.clone() },
        },
        csv: to_csv(rows)?,
    })
}

#[derive(Serialize)]
struct ComplexityRow {
    arm: usize,
    mean: f64,
    w_star: Option<f64>,
}

pub fn run_complexity_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Complexity)?;
    config.validate()?;
    let instance = config.bandit_instance()?;
    let report = complexity_report(&instance);
    let csv = to_csv(
        instance
            .means()
            .iter()
            .enumerate()
            .map(|(a, &mean)| ComplexityRow {
                arm: a + 1,
                mean,
                w_star: report.constants.w_star.as_ref().map(|w| w[a]),
            }),
    )?;
    Ok(ExperimentOutput {
        summary: SummaryRecord {
            version: VERSION.to_string(),
            experiment: ExperimentKind::Complexity,
            config: config.clone(),
            instance: report.instance.clone(),
            constants: Some(report.constants.clone()),
            replications: config.replications,
            aggregates: Aggregates::Complexity(report),
        },
        csv,
    })
}
