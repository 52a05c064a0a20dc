//! Organization-wide job view derived from the slot and load-job ledgers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudSim, ResourceId, ResourceKind};
use crate::ingestion::Ingestion;
use crate::slots::{JobKind, JobState, SlotPool};
use crate::time::{Duration, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobStatsRow {
    pub project: String,
    pub job_id: String,
    pub job_type: JobKind,
    pub state: JobState,
    pub submitted_at: Timestamp,
    pub started_at: Option<Timestamp>,
    pub finished_at: Option<Timestamp>,
    pub reservation_name: String,
    pub slots_consumed: u64,
    pub execution_time: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scope", content = "name")]
pub enum Scope {
    Organization,
    Project(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFilter {
    pub project: Option<String>,
    pub job_type: Option<JobKind>,
    pub state: Option<JobState>,
    /// Inclusive bounds on `submitted_at`.
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
}

impl JobFilter {
    pub fn matches(&self, r: &JobStatsRow) -> bool {
        self.project.as_deref().is_none_or(|p| r.project == p)
            && self.job_type.is_none_or(|t| r.job_type == t)
            && self.state.is_none_or(|s| r.state == s)
            && self.from.is_none_or(|t| r.submitted_at >= t)
            && self.to.is_none_or(|t| r.submitted_at <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scope {0}")]
pub struct UnknownScope(pub String);

fn exec_time(started: Option<Timestamp>, finished: Option<Timestamp>) -> Option<Duration> {
    Some(finished?.since(started?))
}

/// Every job known to the control plane, as rows sorted by job id.
pub fn job_rows(slots: &SlotPool, ingestion: &Ingestion) -> Vec<JobStatsRow> {
    let load_project = &ingestion.config().load_project;
    let mut rows: Vec<JobStatsRow> = slots
        .jobs()
        .map(|j| JobStatsRow {
            project: j.project.clone(),
            job_id: j.job_id.clone(),
            job_type: j.kind,
            state: j.state,
            submitted_at: j.submitted_at,
            started_at: j.started_at,
            finished_at: j.finished_at,
            reservation_name: j.reservation.clone(),
            slots_consumed: if j.started_at.is_some() { j.slots_needed } else { 0 },
            execution_time: exec_time(j.started_at, j.finished_at),
        })
        .chain(ingestion.jobs().map(|j| JobStatsRow {
            project: load_project.clone(),
            job_id: j.job_id.clone(),
            job_type: JobKind::Load,
            state: j.state,
            submitted_at: j.submitted_at,
            started_at: j.started_at,
            finished_at: j.finished_at,
            reservation_name: j.reservation.clone(),
            slots_consumed: j.slots_used,
            execution_time: exec_time(j.started_at, j.finished_at),
        }))
        .collect();
    rows.sort_by(|a, b| a.job_id.cmp(&b.job_id));
    rows
}

pub fn info_schema_query(
    cloud: &CloudSim,
    slots: &SlotPool,
    ingestion: &Ingestion,
    scope: &Scope,
    filter: &JobFilter,
) -> Result<Vec<JobStatsRow>, UnknownScope> {
    let project = match scope {
        Scope::Organization => None,
        Scope::Project(p) => {
            let id = ResourceId::project(p);
            if cloud.get(&id).map(|n| n.kind) != Some(ResourceKind::Project) {
                return Err(UnknownScope(id.to_string()));
            }
            Some(p.as_str())
        }
    };
    Ok(job_rows(slots, ingestion)
        .into_iter()
        .filter(|r| project.is_none_or(|p| r.project == p) && filter.matches(r))
        .collect())
}
