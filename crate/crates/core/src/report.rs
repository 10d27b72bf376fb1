//! The four-task protocol and its reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::feedback::FeedbackMode;
use crate::gvf::{GvfLearner, WeightSnapshot};
use crate::harness::{run_with_learner, LearnerSource, TrialConfig};
use crate::log::TrialLog;
use crate::metrics::TrialMetrics;
use crate::seed::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: FeedbackMode,
    pub seed: u64,
    pub metrics: TrialMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reactive_over_no_feedback: Option<f64>,
    pub predictive_over_no_feedback: Option<f64>,
    pub predictive_over_reactive: Option<f64>,
    pub no_feedback_gt_reactive: bool,
    pub reactive_gt_predictive: bool,
    pub ordering_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub seed: u64,
    pub tasks: Vec<TaskReport>,
    pub comparison: Comparison,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub report: ProtocolReport,
    /// One log per task, in protocol order.
    pub logs: Vec<TrialLog>,
    pub snapshot: WeightSnapshot,
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b != 0).then(|| a as f64 / b as f64)
}

impl Comparison {
    pub fn from_totals(no_feedback: u64, reactive: u64, predictive: u64) -> Self {
        let nf_r = no_feedback > reactive;
        let r_p = reactive > predictive;
        Comparison {
            reactive_over_no_feedback: ratio(reactive, no_feedback),
            predictive_over_no_feedback: ratio(predictive, no_feedback),
            predictive_over_reactive: ratio(predictive, reactive),
            no_feedback_gt_reactive: nf_r,
            reactive_gt_predictive: r_p,
            ordering_holds: nf_r && r_p,
        }
    }
}

impl ProtocolReport {
    pub fn task(&self, mode: FeedbackMode) -> Option<&TaskReport> {
        self.tasks.iter().find(|t| t.task == mode)
    }

    pub fn metrics(&self, mode: FeedbackMode) -> Option<&TrialMetrics> {
        self.task(mode).map(|t| &t.metrics)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Seed of the trial for `task` inside the protocol run for `seed`.
pub fn task_seed(seed: u64, task: FeedbackMode) -> u64 {
    let idx = FeedbackMode::ALL.iter().position(|&m| m == task).unwrap() as u64;
    derive_seed(seed, 100 + idx)
}

/// Training, then the three blindfolded test tasks with the frozen snapshot.
pub fn run_protocol(config: &ExperimentConfig, seed: u64) -> Result<ProtocolOutcome> {
    config.validate()?;
    let training_cfg = TrialConfig::from_experiment(
        config,
        FeedbackMode::Training,
        LearnerSource::FreshLearning,
        task_seed(seed, FeedbackMode::Training),
    );
    let fresh = GvfLearner::new(
        config.codec.feature_length(),
        config.learner.alpha,
        config.learner.gamma,
    )?;
    let training = run_with_learner(&training_cfg, Some(fresh))?;
    let snapshot = training
        .snapshot
        .clone()
        .expect("training always returns a snapshot");

    let mut tasks = vec![TaskReport {
        task: FeedbackMode::Training,
        seed: training_cfg.seed,
        metrics: training.metrics,
    }];
    let mut logs = vec![training.log];

    for task in [
        FeedbackMode::NoFeedback,
        FeedbackMode::Reactive,
        FeedbackMode::Predictive,
    ] {
        let (source, learner) = if task == FeedbackMode::NoFeedback {
            (LearnerSource::None, None)
        } else {
            (
                LearnerSource::FromSnapshot("snapshot.json".into()),
                Some(GvfLearner::restore(&snapshot)?),
            )
        };
        let cfg = TrialConfig::from_experiment(config, task, source, task_seed(seed, task));
        let out = run_with_learner(&cfg, learner)?;
        tasks.push(TaskReport {
            task,
            seed: cfg.seed,
            metrics: out.metrics,
        });
        logs.push(out.log);
    }

    let total = |m: FeedbackMode| {
        tasks
            .iter()
            .find(|t| t.task == m)
            .map(|t| t.metrics.total_summed_load)
            .unwrap_or(0)
    };
    let comparison = Comparison::from_totals(
        total(FeedbackMode::NoFeedback),
        total(FeedbackMode::Reactive),
        total(FeedbackMode::Predictive),
    );
    Ok(ProtocolOutcome {
        report: ProtocolReport {
            seed,
            tasks,
            comparison,
        },
        logs,
        snapshot,
    })
}

pub const BINS_CSV_HEADER: &str = "seed,task,bin,visits,visit_fraction,summed_load";

/// Per-bin table for one or more protocol reports.
pub fn bins_csv<'a>(reports: impl IntoIterator<Item = &'a ProtocolReport>) -> String {
    let mut out = String::from(BINS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        for t in &r.tasks {
            let m = &t.metrics;
            for bin in 0..m.per_bin_visits.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.seed,
                    t.task,
                    bin,
                    m.per_bin_visits[bin],
                    m.per_bin_visit_fraction[bin],
                    m.per_bin_summed_load[bin]
                );
            }
        }
    }
    out
}

pub const COMPARISON_CSV_HEADER: &str = "seed,training_total,no_feedback_total,reactive_total,predictive_total,reactive_over_no_feedback,predictive_over_no_feedback,predictive_over_reactive,no_feedback_contacts,reactive_contacts,predictive_contacts,reactive_median_lead_ms,predictive_median_lead_ms,ordering_holds";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per seed with task totals and the cross-task comparison.
pub fn comparison_csv<'a>(reports: impl IntoIterator<Item = &'a ProtocolReport>) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let m = |mode| r.metrics(mode);
        let total = |mode| m(mode).map(|x| x.total_summed_load).unwrap_or(0);
        let contacts = |mode| m(mode).map(|x| x.wall_contact_count).unwrap_or(0);
        let lead = |mode| m(mode).and_then(|x| x.median_feedback_lead_ms);
        let c = &r.comparison;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            total(FeedbackMode::Training),
            total(FeedbackMode::NoFeedback),
            total(FeedbackMode::Reactive),
            total(FeedbackMode::Predictive),
            opt(c.reactive_over_no_feedback),
            opt(c.predictive_over_no_feedback),
            opt(c.predictive_over_reactive),
            contacts(FeedbackMode::NoFeedback),
            contacts(FeedbackMode::Reactive),
            contacts(FeedbackMode::Predictive),
            opt(lead(FeedbackMode::Reactive)),
            opt(lead(FeedbackMode::Predictive)),
            c.ordering_holds
        );
    }
    out
}

/// Cross-seed summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub seeds: Vec<u64>,
    pub mean_total_load: Vec<(FeedbackMode, f64)>,
    pub ordering_holds_count: usize,
    pub mean_per_bin_visit_fraction: Vec<(FeedbackMode, Vec<f64>)>,
}

pub fn aggregate(reports: &[ProtocolReport]) -> AggregateReport {
    let n = reports.len().max(1) as f64;
    let mut mean_total_load = Vec::new();
    let mut mean_fraction = Vec::new();
    for mode in FeedbackMode::ALL {
        let sum: f64 = reports
            .iter()
            .filter_map(|r| r.metrics(mode))
            .map(|m| m.total_summed_load as f64)
            .sum();
        mean_total_load.push((mode, sum / n));

        let bins = reports
            .iter()
            .filter_map(|r| r.metrics(mode))
            .map(|m| m.per_bin_visit_fraction.len())
            .max()
            .unwrap_or(0);
        let mut acc = vec![0.0; bins];
        for m in reports.iter().filter_map(|r| r.metrics(mode)) {
            for (a, f) in acc.iter_mut().zip(&m.per_bin_visit_fraction) {
                *a += f / n;
            }
        }
        mean_fraction.push((mode, acc));
    }
    AggregateReport {
        seeds: reports.iter().map(|r| r.seed).collect(),
        mean_total_load,
        ordering_holds_count: reports
            .iter()
            .filter(|r| r.comparison.ordering_holds)
            .count(),
        mean_per_bin_visit_fraction: mean_fraction,
    }
}
