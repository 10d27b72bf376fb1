use foresight_core::harness::run_with_learner;
use foresight_core::*;

fn trial(task: FeedbackMode, source: LearnerSource, seed: u64) -> TrialConfig {
    TrialConfig::from_experiment(&ExperimentConfig::default(), task, source, seed)
}

fn trained(seed: u64) -> WeightSnapshot {
    run_trial(&trial(FeedbackMode::Training, LearnerSource::FreshLearning, seed))
        .unwrap()
        .snapshot
        .unwrap()
}

fn without_prediction(log: &TrialLog) -> Vec<TrialStepRecord> {
    log.records
        .iter()
        .cloned()
        .map(|mut r| {
            r.prediction = 0.0;
            r
        })
        .collect()
}

#[test]
fn snapshot_cannot_steer_non_predictive_tasks() {
    let a = GvfLearner::restore(&trained(1)).unwrap();
    let mut junk = trained(2);
    for (i, w) in junk.weights.iter_mut().enumerate() {
        *w = (i as f64 * 37.0) % 2000.0;
    }
    let b = GvfLearner::restore(&junk).unwrap();
    for task in [FeedbackMode::NoFeedback, FeedbackMode::Reactive] {
        let cfg = trial(task, LearnerSource::None, 11);
        let la = run_with_learner(&cfg, Some(a.clone())).unwrap();
        let lb = run_with_learner(&cfg, Some(b.clone())).unwrap();
        assert_ne!(la.log.records, lb.log.records);
        assert_eq!(without_prediction(&la.log), without_prediction(&lb.log));
        assert_eq!(la.metrics, lb.metrics);
    }
}

#[test]
fn predictive_reads_snapshot_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.json");
    let snap = trained(7);
    snap.save(&path).unwrap();
    let out = run_trial(&trial(
        FeedbackMode::Predictive,
        LearnerSource::FromSnapshot(path),
        7,
    ))
    .unwrap();
    assert_eq!(out.log.len(), 6000);
    assert!(out.snapshot.is_none());
    assert!(out.log.records.iter().any(|r| r.fired_rule == FiredRule::Predictive));
}

#[test]
fn corrupt_snapshot_is_a_startup_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.json");
    std::fs::write(&path, "{\"format_version\":1,\"alpha\":0.1").unwrap();
    let err = run_trial(&trial(
        FeedbackMode::Reactive,
        LearnerSource::FromSnapshot(path),
        7,
    ))
    .unwrap_err();
    assert_eq!(err.code(), "parse");
}

#[test]
fn persisted_log_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_protocol(&ExperimentConfig::default(), 4).unwrap();
    for (log, task) in out.logs.iter().zip(&out.report.tasks) {
        let path = dir.path().join(format!("{}.log", task.task));
        log.save(&path).unwrap();
        let back = TrialLog::load(&path).unwrap();
        assert_eq!(&back, log);
        assert_eq!(compute_metrics(&back, &CodecConfig::default()).unwrap(), task.metrics);
    }
}

#[test]
fn metrics_conserve_load_and_visits() {
    let out = run_protocol(&ExperimentConfig::default(), 9).unwrap();
    for t in &out.report.tasks {
        let m = &t.metrics;
        assert_eq!(m.per_bin_visits.iter().sum::<u64>(), 6000);
        assert_eq!(m.per_bin_summed_load.iter().sum::<u64>(), m.total_summed_load);
        assert!((m.per_bin_visit_fraction.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn training_presses_past_threshold_at_alternating_walls() {
    let out = run_trial(&trial(FeedbackMode::Training, LearnerSource::FreshLearning, 3)).unwrap();
    let (left, right) = SimConfig::default().wall_angles();
    let center = SimConfig::default().center_deg;
    // group contacts into wall visits and record the side and peak load
    let mut visits: Vec<(bool, u16)> = Vec::new();
    let mut prev = false;
    for r in &out.log.records {
        if r.in_contact {
            let right_side = r.angle_deg > center;
            if !prev {
                visits.push((right_side, r.load));
            } else if let Some(v) = visits.last_mut() {
                v.1 = v.1.max(r.load);
            }
        }
        prev = r.in_contact;
    }
    assert!(visits.len() > 20, "only {} wall visits", visits.len());
    for w in visits.windows(2) {
        assert_ne!(w[0].0, w[1].0, "consecutive visits to the same wall");
    }
    assert!(visits.iter().all(|&(_, peak)| peak > 650));
    assert!(out.log.records.iter().all(|r| r.angle_deg > left - 30.0 && r.angle_deg < right + 30.0));
}

#[test]
fn blind_drift_favours_one_wall() {
    let mut cfg = trial(FeedbackMode::NoFeedback, LearnerSource::None, 21);
    cfg.user.drift_bias = Some(0.02);
    let out = run_trial(&cfg).unwrap();
    let center = cfg.sim.center_deg;
    let mut sides = [0u32; 2];
    let mut prev = false;
    for r in &out.log.records {
        if r.in_contact && !prev {
            sides[(r.angle_deg > center) as usize] += 1;
        }
        prev = r.in_contact;
    }
    assert!(sides[0] + sides[1] >= 1);
    assert_ne!(sides[0], sides[1], "contacts split evenly: {sides:?}");
}
