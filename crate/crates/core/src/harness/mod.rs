//! Experiment configuration, Monte Carlo runners and result files.
//!
//! Every runner is a pure function of its [`ExperimentConfig`]: replication
//! `r` draws from [`Stream::for_replication`]`(seed, r)`, replications run in
//! parallel, and results are aggregated in replication order.
//!
//! Each experiment produces one CSV file and one JSON summary:
//!
//! | experiment   | CSV columns |
//! |--------------|-------------|
//! | `regret`     | `replication, t, pseudo_regret` |
//! | `bai`        | `replication, delta, tau, correct, terminated` |
//! | `coverage`   | `arm, mean, t, gamma, replications, violations_kl, violations_hoeffding, freq_kl, freq_hoeffding, bound_kl, bound_hoeffding, mean_index_kl, mean_index_hoeffding` |
//! | `complexity` | `arm, mean, w_star` |
//!
//! [`Stream::for_replication`]: crate::Stream::for_replication

mod config;
mod runners;

pub use config::{
    parse_config, CoverageSpec, ExperimentConfig, ExperimentKind, InstanceSpec, PolicySpec,
    StoppingSpec, DEFAULT_REPLICATIONS, DEFAULT_SEED,
};
pub use runners::{
    complexity_report, regret_checkpoints, run_bai_experiment, run_complexity_experiment,
    run_coverage_experiment, run_experiment, run_regret_experiment, Aggregates, BaiDeltaSummary,
    CheckpointStat, ComplexityReport, Constants, CoverageRow, ExperimentOutput, InstanceEcho,
    RegretAggregates, SummaryRecord,
};
