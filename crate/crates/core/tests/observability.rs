use std::collections::BTreeMap;

use bigbird_core::observability::alerts::{AlertRule, Comparator};
use bigbird_core::observability::audit::AuditLog;
use bigbird_core::observability::metrics::{Dims, MetricName};
use bigbird_core::platform::{ControlPlane, PlatformConfig};
use bigbird_core::slots::{JobKind, JobResult, SlotRequest};
use bigbird_core::{Duration, Timestamp};
use proptest::prelude::*;

const PROJECTS: [&str; 5] = ["p0", "p1", "p2", "p3", "p4"];
const END: u64 = 8 * 3600;

#[derive(Debug, Clone)]
struct Job {
    submit: u64,
    project: usize,
    slots: u64,
    duration: u64,
    failed: bool,
}

fn trace() -> impl Strategy<Value = Vec<Job>> {
    proptest::collection::vec(
        (0u64..6 * 3600, 0usize..5, 1u64..150, 1u64..1800, proptest::bool::weighted(0.2)).prop_map(
            |(submit, project, slots, duration, failed)| Job { submit, project, slots, duration, failed },
        ),
        500,
    )
    .prop_map(|mut v| {
        v.sort_by_key(|j| j.submit);
        v
    })
}

fn rules() -> Vec<AlertRule> {
    vec![
        AlertRule {
            name: "busy".into(),
            metric: MetricName::SlotsUsed,
            dimensions: Dims::new(),
            comparator: Comparator::Gt,
            threshold: 4_000.0,
            notify: "pager:slots".into(),
        },
        AlertRule {
            name: "failing".into(),
            metric: MetricName::FailedJobsPerProject,
            dimensions: Dims::new(),
            comparator: Comparator::Ge,
            threshold: 10.0,
            notify: "mail:owners".into(),
        },
    ]
}

fn run(jobs: &[Job]) -> ControlPlane {
    let config = PlatformConfig { alert_rules: rules(), ..PlatformConfig::default() };
    let mut cp = ControlPlane::new(config, Box::new(AuditLog::new())).unwrap();
    for p in PROJECTS {
        cp.create_project("admin", p).unwrap();
    }
    for (i, j) in jobs.iter().enumerate() {
        cp.advance_to(Timestamp(j.submit)).unwrap();
        let result = if j.failed { JobResult::Failed } else { JobResult::Succeeded };
        let req = SlotRequest::new(format!("job-{i:03}"), PROJECTS[j.project], j.slots, JobKind::Query)
            .lasting(Duration(j.duration))
            .ending(result);
        cp.schedule("analyst", req).unwrap();
    }
    cp.advance_to(Timestamp(END)).unwrap();
    cp
}

/// Metric values at poll time `t`, computed straight from the trace. A job
/// submitted at `t` arrives after that instant's poll.
fn expected(jobs: &[Job], t: u64) -> BTreeMap<(MetricName, Dims), u64> {
    let dim = |k: &str, v: &str| Dims::from([(k.to_string(), v.to_string())]);
    let mut out = BTreeMap::new();
    let seen: Vec<&Job> = jobs.iter().filter(|j| j.submit < t).collect();
    let running: Vec<&&Job> = seen.iter().filter(|j| t < j.submit + j.duration).collect();
    out.insert((MetricName::CurrentTotalJobs, Dims::new()), running.len() as u64);
    for (p, name) in PROJECTS.iter().enumerate() {
        let mine: Vec<&&Job> = seen.iter().filter(|j| j.project == p).collect();
        if mine.is_empty() {
            continue;
        }
        let done = mine.iter().filter(|j| j.submit + j.duration <= t);
        let (exec, failed) = done.fold((0, 0), |(e, f), j| (e + j.duration, f + u64::from(j.failed)));
        out.insert((MetricName::ExecutionTimePerJobPerProject, dim("project", name)), exec);
        out.insert((MetricName::FailedJobsPerProject, dim("project", name)), failed);
    }
    let default = dim("reservation", "default");
    out.insert((MetricName::SlotsAllocated, default.clone()), 100_000);
    out.insert((MetricName::SlotsUsed, default.clone()), running.iter().map(|j| j.slots).sum());
    out.insert((MetricName::JobsWaitingForSlots, default), 0);
    out.insert((MetricName::DegradationWarnings, Dims::new()), 0);
    out
}

/// Replays the alert rules over the expected series.
fn expected_firings(jobs: &[Job]) -> Vec<(String, Dims, u64, u64)> {
    let mut last: BTreeMap<(String, Dims), u64> = BTreeMap::new();
    let mut out = Vec::new();
    for t in (60..=END).step_by(60) {
        let values = expected(jobs, t);
        for rule in rules() {
            for ((metric, dims), v) in &values {
                if *metric != rule.metric || !rule.comparator.holds(*v as f64, rule.threshold) {
                    continue;
                }
                let key = (rule.name.clone(), dims.clone());
                if last.get(&key).is_some_and(|l| t - l < 300) {
                    continue;
                }
                last.insert(key, t);
                out.push((rule.name.clone(), dims.clone(), *v, t));
            }
        }
    }
    out
}

fn check(jobs: &[Job]) -> Result<(), TestCaseError> {
    let cp = run(jobs);
    let mut got: BTreeMap<(MetricName, Dims), Vec<(u64, u64)>> = BTreeMap::new();
    for s in cp.metrics().series() {
        got.insert((s.metric, s.dimensions), s.points.iter().map(|p| (p.at.0, p.value)).collect());
    }
    let mut want: BTreeMap<(MetricName, Dims), Vec<(u64, u64)>> = BTreeMap::new();
    for t in (60..=END).step_by(60) {
        for (k, v) in expected(jobs, t) {
            want.entry(k).or_default().push((t, v));
        }
    }
    prop_assert_eq!(got.len(), want.len());
    for (k, w) in &want {
        prop_assert_eq!(got.get(k), Some(w), "{:?}", k);
    }

    let fired: Vec<_> = cp
        .alerting()
        .firings()
        .iter()
        .map(|f| (f.rule.clone(), f.dimensions.clone(), f.value, f.at.0))
        .collect();
    prop_assert_eq!(fired, expected_firings(jobs));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn collector_matches_brute_force(jobs in trace()) {
        check(&jobs)?;
    }
}

#[test]
fn alerts_fire_again_only_after_cooldown() {
    // One long job holding 5000 slots from t=30 keeps `busy` true for
    // hours, so it fires every 300s starting at the first poll.
    let jobs = [Job { submit: 30, project: 0, slots: 5_000, duration: 3600, failed: false }];
    let fired = expected_firings(&jobs);
    let times: Vec<u64> = fired.iter().map(|f| f.3).collect();
    assert_eq!(times, (60..3630).step_by(300).collect::<Vec<_>>());
    check(&jobs).unwrap();
}
