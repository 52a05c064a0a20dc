//! Polled metric series aggregated from the job view and slot status.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::info_schema::JobStatsRow;
use crate::slots::{JobState, PoolStatus};
use crate::time::Timestamp;

pub type Dims = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    CurrentTotalJobs,
    ExecutionTimePerJobPerProject,
    FailedJobsPerProject,
    SlotsAllocated,
    SlotsUsed,
    JobsWaitingForSlots,
    DegradationWarnings,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::CurrentTotalJobs,
        MetricName::ExecutionTimePerJobPerProject,
        MetricName::FailedJobsPerProject,
        MetricName::SlotsAllocated,
        MetricName::SlotsUsed,
        MetricName::JobsWaitingForSlots,
        MetricName::DegradationWarnings,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            MetricName::CurrentTotalJobs => "current_total_jobs",
            MetricName::ExecutionTimePerJobPerProject => "execution_time_per_job_per_project",
            MetricName::FailedJobsPerProject => "failed_jobs_per_project",
            MetricName::SlotsAllocated => "slots_allocated",
            MetricName::SlotsUsed => "slots_used",
            MetricName::JobsWaitingForSlots => "jobs_waiting_for_slots",
            MetricName::DegradationWarnings => "degradation_warnings",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub at: Timestamp,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub metric: MetricName,
    pub dimensions: Dims,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: MetricName,
    pub dimensions: Dims,
    pub points: Vec<Point>,
}

fn dims(key: &str, value: &str) -> Dims {
    BTreeMap::from([(key.to_string(), value.to_string())])
}

/// Compute one sample per metric and dimension combination.
///
/// Per-project metrics cover every project with at least one job; per
/// reservation metrics cover every reservation in the pool plus any that
/// only appear on job rows.
pub fn aggregate(rows: &[JobStatsRow], pool: &PoolStatus, warnings: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    let active = rows
        .iter()
        .filter(|r| matches!(r.state, JobState::Queued | JobState::Running))
        .count();
    out.push(Sample {
        metric: MetricName::CurrentTotalJobs,
        dimensions: Dims::new(),
        value: active as u64,
    });

    let mut per_project: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in rows {
        let e = per_project.entry(&r.project).or_default();
        if r.state.is_finished() {
            e.0 += r.execution_time.map_or(0, |d| d.0);
        }
        if r.state == JobState::Failed {
            e.1 += 1;
        }
    }
    for (project, (exec, failed)) in &per_project {
        out.push(Sample {
            metric: MetricName::ExecutionTimePerJobPerProject,
            dimensions: dims("project", project),
            value: *exec,
        });
        out.push(Sample {
            metric: MetricName::FailedJobsPerProject,
            dimensions: dims("project", project),
            value: *failed,
        });
    }

    let mut waiting: BTreeMap<&str, u64> = pool
        .reservations
        .iter()
        .map(|r| (r.name.as_str(), 0))
        .collect();
    for r in rows.iter().filter(|r| r.state == JobState::Queued) {
        *waiting.entry(&r.reservation_name).or_default() += 1;
    }
    for r in &pool.reservations {
        out.push(Sample {
            metric: MetricName::SlotsAllocated,
            dimensions: dims("reservation", &r.name),
            value: r.capacity,
        });
        out.push(Sample {
            metric: MetricName::SlotsUsed,
            dimensions: dims("reservation", &r.name),
            value: r.allocated,
        });
    }
    for (reservation, n) in waiting {
        out.push(Sample {
            metric: MetricName::JobsWaitingForSlots,
            dimensions: dims("reservation", reservation),
            value: n,
        });
    }
    out.push(Sample {
        metric: MetricName::DegradationWarnings,
        dimensions: Dims::new(),
        value: warnings as u64,
    });
    out
}

/// Stored metric series. Each poll appends at most one point per series.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(with = "crate::serde_util::entries")]
    series: BTreeMap<(MetricName, Dims), Vec<Point>>,
    last_poll: Option<Timestamp>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_poll(&self) -> Option<Timestamp> {
        self.last_poll
    }

    /// Append `samples` at `now`. Returns the number of points appended; a
    /// repeated or out-of-order poll appends nothing.
    pub fn record(&mut self, now: Timestamp, samples: Vec<Sample>) -> usize {
        if self.last_poll.is_some_and(|t| now <= t) {
            return 0;
        }
        self.last_poll = Some(now);
        let n = samples.len();
        for s in samples {
            self.series
                .entry((s.metric, s.dimensions))
                .or_default()
                .push(Point { at: now, value: s.value });
        }
        n
    }

    pub fn series(&self) -> impl Iterator<Item = MetricSeries> + '_ {
        self.series.iter().map(|((metric, dimensions), points)| MetricSeries {
            metric: *metric,
            dimensions: dimensions.clone(),
            points: points.clone(),
        })
    }

    pub fn points(&self, metric: MetricName, dimensions: &Dims) -> &[Point] {
        self.series
            .get(&(metric, dimensions.clone()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Latest point of every series of `metric` whose dimensions include
    /// all of `filter`.
    pub fn latest<'a>(
        &'a self,
        metric: MetricName,
        filter: &'a Dims,
    ) -> impl Iterator<Item = (&'a Dims, Point)> + 'a {
        self.series
            .iter()
            .filter(move |((m, d), _)| {
                *m == metric && filter.iter().all(|(k, v)| d.get(k) == Some(v))
            })
            .filter_map(|((_, d), pts)| pts.last().map(|p| (d, *p)))
    }
}
