//! Aggregates computed from a trial log.

use serde::{Deserialize, Serialize};

use crate::arm::LOAD_MAX;
use crate::features::CodecConfig;
use crate::log::TrialLog;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub total_summed_load: u64,
    pub per_bin_visits: Vec<u64>,
    pub per_bin_visit_fraction: Vec<f64>,
    pub per_bin_summed_load: Vec<u64>,
    pub wall_contact_count: u64,
    /// Median of `(contact tick - buzz onset tick) * dt` over contacts that
    /// had a buzz in the same approach. Negative when the buzz came late.
    pub median_feedback_lead_ms: Option<f64>,
}

impl TrialMetrics {
    pub fn empty(num_bins: usize) -> Self {
        TrialMetrics {
            total_summed_load: 0,
            per_bin_visits: vec![0; num_bins],
            per_bin_visit_fraction: vec![0.0; num_bins],
            per_bin_summed_load: vec![0; num_bins],
            wall_contact_count: 0,
            median_feedback_lead_ms: None,
        }
    }

    /// Fraction of ticks spent in `bins`.
    pub fn visit_fraction_in(&self, bins: impl IntoIterator<Item = usize>) -> f64 {
        bins.into_iter()
            .filter_map(|b| self.per_bin_visit_fraction.get(b))
            .sum()
    }

    pub fn summed_load_in(&self, bins: impl IntoIterator<Item = usize>) -> u64 {
        bins.into_iter()
            .filter_map(|b| self.per_bin_summed_load.get(b))
            .sum()
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Approach index for every tick: a new approach starts whenever the joystick
/// points the other way from the last non-zero command.
fn approach_ids(log: &TrialLog) -> Vec<usize> {
    let mut ids = Vec::with_capacity(log.records.len());
    let mut id = 0;
    let mut last_sign = 0.0;
    for r in &log.records {
        let sign = if r.joystick_axis > 0.0 {
            1.0
        } else if r.joystick_axis < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            if last_sign != 0.0 && sign != last_sign {
                id += 1;
            }
            last_sign = sign;
        }
        ids.push(id);
    }
    ids
}

fn feedback_leads(log: &TrialLog) -> Vec<f64> {
    let recs = &log.records;
    let ids = approach_ids(log);
    let onsets: Vec<usize> = (0..recs.len())
        .filter(|&i| recs[i].tactor_on && (i == 0 || !recs[i - 1].tactor_on))
        .collect();

    let mut leads = Vec::new();
    for c in 0..recs.len() {
        let rising = recs[c].in_contact && (c == 0 || !recs[c - 1].in_contact);
        if !rising {
            continue;
        }
        // the command that carried the arm into the wall was issued on c - 1
        let approach = ids[c.saturating_sub(1)];
        let start = ids.partition_point(|&id| id < approach);
        let end = ids.partition_point(|&id| id <= approach);

        let before = onsets
            .iter()
            .rev()
            .find(|&&o| o <= c && o >= start)
            .copied();
        let paired = before.or_else(|| onsets.iter().find(|&&o| o > c && o < end).copied());
        if let Some(o) = paired {
            leads.push((c as f64 - o as f64) * log.header.dt_ms);
        }
    }
    leads
}

pub fn compute_metrics(log: &TrialLog, codec: &CodecConfig) -> Result<TrialMetrics> {
    let n_bins = codec.num_bins;
    let mut m = TrialMetrics::empty(n_bins);
    for (i, r) in log.records.iter().enumerate() {
        let line = i + 2;
        if r.t != i as u64 {
            return Err(Error::Parse {
                line,
                message: format!("expected t={i}, found t={}", r.t),
            });
        }
        if r.bin >= n_bins {
            return Err(Error::Parse {
                line,
                message: format!("bin {} out of range", r.bin),
            });
        }
        if r.load > LOAD_MAX {
            return Err(Error::Parse {
                line,
                message: format!("load {} above {LOAD_MAX}", r.load),
            });
        }
        m.total_summed_load += r.load as u64;
        m.per_bin_visits[r.bin] += 1;
        m.per_bin_summed_load[r.bin] += r.load as u64;
        if r.in_contact && (i == 0 || !log.records[i - 1].in_contact) {
            m.wall_contact_count += 1;
        }
    }
    let n = log.records.len();
    if n > 0 {
        for (f, &v) in m.per_bin_visit_fraction.iter_mut().zip(&m.per_bin_visits) {
            *f = v as f64 / n as f64;
        }
    }
    m.median_feedback_lead_ms = median(&mut feedback_leads(log));
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{FeedbackMode, FiredRule};
    use crate::log::{LogHeader, TrialStepRecord};

    fn log_of(records: Vec<TrialStepRecord>) -> TrialLog {
        TrialLog {
            header: LogHeader {
                schema_version: 1,
                task: FeedbackMode::Reactive,
                seed: 0,
                dt_ms: 50.0,
                num_bins: 32,
                range_deg: 300.0,
            },
            records,
        }
    }

    fn rec(t: u64, bin: usize, load: u16) -> TrialStepRecord {
        TrialStepRecord {
            t,
            angle_deg: bin as f64 * 9.375 + 1.0,
            velocity_deg_s: 0.0,
            bin,
            load,
            prediction: 0.0,
            tactor_on: false,
            fired_rule: FiredRule::None,
            joystick_axis: 1.0,
            in_contact: false,
        }
    }

    #[test]
    fn single_bin_aggregation() {
        let log = log_of((0..10).map(|t| rec(t, 5, 7)).collect());
        let m = compute_metrics(&log, &CodecConfig::default()).unwrap();
        assert_eq!(m.per_bin_visits[5], 10);
        assert_eq!(m.per_bin_visit_fraction[5], 1.0);
        assert_eq!(m.total_summed_load, 70);
        assert_eq!(m.per_bin_summed_load[5], 70);
        assert_eq!(m.wall_contact_count, 0);
        assert_eq!(m.median_feedback_lead_ms, None);
    }

    #[test]
    fn empty_log_gives_zero_metrics() {
        let m = compute_metrics(&log_of(vec![]), &CodecConfig::default()).unwrap();
        assert_eq!(m, TrialMetrics::empty(32));
    }

    #[test]
    fn lead_is_contact_minus_onset() {
        let mut recs: Vec<_> = (0..120).map(|t| rec(t, 17, 30)).collect();
        for r in &mut recs[90..95] {
            r.tactor_on = true;
            r.fired_rule = FiredRule::Predictive;
        }
        for r in &mut recs[100..104] {
            r.in_contact = true;
        }
        for r in &mut recs[104..] {
            r.joystick_axis = -1.0;
        }
        let m = compute_metrics(&log_of(recs), &CodecConfig::default()).unwrap();
        assert_eq!(m.wall_contact_count, 1);
        assert_eq!(m.median_feedback_lead_ms, Some(500.0));
    }

    #[test]
    fn late_feedback_gives_negative_lead() {
        let mut recs: Vec<_> = (0..40).map(|t| rec(t, 19, 30)).collect();
        for r in &mut recs[10..20] {
            r.in_contact = true;
        }
        for r in &mut recs[12..15] {
            r.tactor_on = true;
        }
        let m = compute_metrics(&log_of(recs), &CodecConfig::default()).unwrap();
        assert_eq!(m.median_feedback_lead_ms, Some(-100.0));
    }

    #[test]
    fn buzz_from_previous_approach_is_not_credited() {
        let mut recs: Vec<_> = (0..60).map(|t| rec(t, 15, 30)).collect();
        recs[5].tactor_on = true;
        for r in &mut recs[20..] {
            r.joystick_axis = -1.0;
        }
        for r in &mut recs[40..45] {
            r.in_contact = true;
        }
        let m = compute_metrics(&log_of(recs), &CodecConfig::default()).unwrap();
        assert_eq!(m.wall_contact_count, 1);
        assert_eq!(m.median_feedback_lead_ms, None);
    }

    #[test]
    fn malformed_records_report_line() {
        let mut recs: Vec<_> = (0..5).map(|t| rec(t, 3, 30)).collect();
        recs[3].t = 9;
        match compute_metrics(&log_of(recs), &CodecConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let mut recs: Vec<_> = (0..5).map(|t| rec(t, 3, 30)).collect();
        recs[1].bin = 40;
        assert!(matches!(
            compute_metrics(&log_of(recs), &CodecConfig::default()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
