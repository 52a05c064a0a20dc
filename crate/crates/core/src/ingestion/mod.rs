//! GCS to warehouse load jobs and the pipeline watchdog.
//!
//! All transfers run from the dedicated load project. Each submission counts
//! against that project's daily load-job budget; running jobs are capped by
//! the load project's reservation size and the rest wait in FIFO order.

pub mod capability;
pub mod watchdog;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{
    AccessAction, CloudError, CloudSim, GroupDirectory, QuotaExceeded, QuotaName, ResourceId,
    ResourceKind,
};
use crate::observability::audit::{detail, AuditAction, AuditError, Ctx};
use crate::path::PhysicalBucketPath;
use crate::slots::{JobResult, JobState, Transition};
use crate::time::{Duration, Timestamp};

pub use capability::{DataFormat, Tool, ToolCapability};
pub use watchdog::{watchdog_scan, DatasetStatus, Finding, Stage, StatusError, Thresholds};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Destination {
    pub project: String,
    pub dataset: String,
    pub table: String,
}

impl Destination {
    pub fn dataset_id(&self) -> ResourceId {
        ResourceId::dataset(&self.project, &self.dataset)
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.project, self.dataset, self.table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("destination must be `project.dataset.table`, got `{0}`")]
pub struct BadDestination(pub String);

impl FromStr for Destination {
    type Err = BadDestination;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        match parts.as_slice() {
            [p, d, t] if !p.is_empty() && !d.is_empty() && !t.is_empty() => Ok(Destination {
                project: (*p).to_string(),
                dataset: (*d).to_string(),
                table: (*t).to_string(),
            }),
            _ => Err(BadDestination(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRequest {
    pub tool: Tool,
    pub source: PhysicalBucketPath,
    pub destination: Destination,
    pub format: DataFormat,
    pub partitioned_dest: bool,
    /// Historical range to reload, inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backfill: Option<(Timestamp, Timestamp)>,
    /// Simulated run time; the configured default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Duration>,
    #[serde(default = "succeeded")]
    pub result: JobResult,
}

fn succeeded() -> JobResult {
    JobResult::Succeeded
}

impl TransferRequest {
    pub fn new(tool: Tool, source: PhysicalBucketPath, destination: Destination, format: DataFormat) -> Self {
        TransferRequest {
            tool,
            source,
            destination,
            format,
            partitioned_dest: false,
            backfill: None,
            duration: None,
            result: JobResult::Succeeded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferJob {
    pub job_id: String,
    pub tool: Tool,
    pub source: PhysicalBucketPath,
    pub destination: Destination,
    pub format: DataFormat,
    pub partitioned_dest: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backfill: Option<(Timestamp, Timestamp)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedupe_key: Option<String>,
    pub submitter: String,
    pub state: JobState,
    pub submitted_at: Timestamp,
    pub started_at: Option<Timestamp>,
    pub finished_at: Option<Timestamp>,
    pub slots_used: u64,
    pub reservation: String,
    pub duration: Duration,
    pub result: JobResult,
    /// Logical path of the source, when it lies in a managed bucket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logical_source: Option<String>,
}

impl TransferJob {
    pub fn due_at(&self) -> Option<Timestamp> {
        match (self.state, self.started_at) {
            (JobState::Running, Some(s)) => Some(s + self.duration),
            _ => None,
        }
    }
}

pub fn dedupe_key(tool: Tool, source: &PhysicalBucketPath, dest: &Destination) -> String {
    format!("{tool}|{source}|{dest}")
}

/// Slot capacity backing the load project, as seen by the ingestion queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadCapacity {
    pub reservation: String,
    pub reserved_slots: u64,
    /// Maximum concurrently running load jobs.
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionConfig {
    pub load_project: String,
    pub domain_suffix: String,
    pub default_duration: Duration,
}

impl Default for IngestionConfig {
    fn default() -> Self {
        IngestionConfig {
            load_project: "twitter-gcs-to-bq-project".into(),
            domain_suffix: crate::path::DEFAULT_DOMAIN_SUFFIX.into(),
            default_duration: Duration::minutes(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestionError {
    #[error("{tool} does not support {format}")]
    UnsupportedFormat { tool: Tool, format: DataFormat },
    #[error("{0} cannot load into partitioned tables")]
    PartitionedUnsupported(Tool),
    #[error("backfill range ends before it starts")]
    InvalidBackfill,
    #[error("unknown destination dataset {0}")]
    UnknownDataset(ResourceId),
    #[error("load project {0} does not exist")]
    MissingLoadProject(String),
    #[error("{principal} may not write to {resource}")]
    AccessDenied { principal: String, resource: ResourceId },
    #[error(transparent)]
    QuotaExceeded(#[from] QuotaExceeded),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submitted {
    pub job: TransferJob,
    /// An equivalent in-flight or finished job was returned instead.
    pub deduplicated: bool,
}

/// Persisted form; the lookup indexes are rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Stored {
    config: IngestionConfig,
    jobs: BTreeMap<String, TransferJob>,
    next_id: u64,
    statuses: BTreeMap<String, DatasetStatus>,
}

/// Lookups derived from the job table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Index {
    /// Dedupe key to the ids of jobs that have not failed.
    live: BTreeMap<String, BTreeSet<String>>,
    queued: BTreeSet<(Timestamp, String)>,
    /// Running jobs by due time.
    running: BTreeSet<(Timestamp, String)>,
}

impl Index {
    fn build(jobs: &BTreeMap<String, TransferJob>) -> Self {
        let mut index = Index::default();
        for job in jobs.values() {
            index.add(job);
        }
        index
    }

    fn add(&mut self, job: &TransferJob) {
        if let Some(key) = &job.dedupe_key {
            if job.state != JobState::Failed {
                self.live.entry(key.clone()).or_default().insert(job.job_id.clone());
            }
        }
        match (job.state, job.due_at()) {
            (JobState::Queued, _) => {
                self.queued.insert((job.submitted_at, job.job_id.clone()));
            }
            (JobState::Running, Some(due)) => {
                self.running.insert((due, job.job_id.clone()));
            }
            _ => {}
        }
    }

    fn remove(&mut self, job: &TransferJob) {
        if let Some(ids) = job.dedupe_key.as_ref().and_then(|k| self.live.get_mut(k)) {
            ids.remove(&job.job_id);
            if ids.is_empty() {
                self.live.remove(job.dedupe_key.as_deref().unwrap_or_default());
            }
        }
        self.queued.remove(&(job.submitted_at, job.job_id.clone()));
        if let Some(due) = job.due_at() {
            self.running.remove(&(due, job.job_id.clone()));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Stored", into = "Stored")]
pub struct Ingestion {
    config: IngestionConfig,
    jobs: BTreeMap<String, TransferJob>,
    next_id: u64,
    statuses: BTreeMap<String, DatasetStatus>,
    index: Index,
}

impl From<Stored> for Ingestion {
    fn from(s: Stored) -> Self {
        Ingestion {
            index: Index::build(&s.jobs),
            config: s.config,
            jobs: s.jobs,
            next_id: s.next_id,
            statuses: s.statuses,
        }
    }
}

impl From<Ingestion> for Stored {
    fn from(i: Ingestion) -> Self {
        Stored {
            config: i.config,
            jobs: i.jobs,
            next_id: i.next_id,
            statuses: i.statuses,
        }
    }
}

impl Ingestion {
    pub fn new(config: IngestionConfig) -> Self {
        Ingestion {
            config,
            jobs: BTreeMap::new(),
            next_id: 1,
            statuses: BTreeMap::new(),
            index: Index::default(),
        }
    }

    /// Change a job's state, keeping the indexes in step.
    fn update(&mut self, job_id: &str, f: impl FnOnce(&mut TransferJob)) -> &TransferJob {
        let job = self.jobs.get_mut(job_id).expect("present");
        self.index.remove(job);
        f(job);
        self.index.add(job);
        job
    }

    pub fn config(&self) -> &IngestionConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: IngestionConfig) {
        self.config = config;
    }

    pub fn jobs(&self) -> impl Iterator<Item = &TransferJob> {
        self.jobs.values()
    }

    pub fn job(&self, job_id: &str) -> Option<&TransferJob> {
        self.jobs.get(job_id)
    }

    pub fn running(&self) -> usize {
        self.index.running.len()
    }

    /// Queued jobs in FIFO order.
    pub fn queue(&self) -> Vec<&TransferJob> {
        self.index.queued.iter().map(|(_, id)| &self.jobs[id]).collect()
    }

    pub fn statuses(&self) -> impl Iterator<Item = &DatasetStatus> {
        self.statuses.values()
    }

    /// Record externally observed stage state for a dataset.
    pub fn upsert_status(&mut self, status: DatasetStatus) -> Result<(), StatusError> {
        status.validate()?;
        self.statuses.insert(status.logical_path.clone(), status);
        Ok(())
    }

    fn find_duplicate(&self, key: &str) -> Option<&TransferJob> {
        let id = self.index.live.get(key)?.first()?;
        self.jobs.get(id)
    }

    /// Validate and enqueue a transfer on behalf of `cx.actor`, who needs
    /// write access to the destination dataset.
    pub fn submit_transfer(
        &mut self,
        cx: &mut Ctx<'_>,
        cloud: &mut CloudSim,
        groups: &dyn GroupDirectory,
        capacity: &LoadCapacity,
        req: TransferRequest,
    ) -> Result<Submitted, IngestionError> {
        let cap = ToolCapability::of(req.tool);
        if !cap.formats.contains(&req.format) {
            return Err(IngestionError::UnsupportedFormat {
                tool: req.tool,
                format: req.format,
            });
        }
        if req.partitioned_dest && !cap.partitioned {
            return Err(IngestionError::PartitionedUnsupported(req.tool));
        }
        if req.backfill.is_some_and(|(from, to)| to < from) {
            return Err(IngestionError::InvalidBackfill);
        }
        let dataset = req.destination.dataset_id();
        if cloud.get(&dataset).map(|n| n.kind) != Some(ResourceKind::Dataset) {
            return Err(IngestionError::UnknownDataset(dataset));
        }
        let load_project = ResourceId::project(&self.config.load_project);
        if !cloud.exists(&load_project) {
            return Err(IngestionError::MissingLoadProject(self.config.load_project.clone()));
        }
        if !cloud
            .evaluate_access(cx.actor, &dataset, AccessAction::Write, groups)?
            .is_allow()
        {
            return Err(IngestionError::AccessDenied {
                principal: cx.actor.to_string(),
                resource: dataset,
            });
        }
        let key = cap
            .idempotent
            .then(|| dedupe_key(req.tool, &req.source, &req.destination));
        if let Some(existing) = key.as_deref().and_then(|k| self.find_duplicate(k)) {
            return Ok(Submitted {
                job: existing.clone(),
                deduplicated: true,
            });
        }
        let (quotas, ledger) = cloud.quota_parts();
        let rule = quotas.rule(QuotaName::LoadJobsPerDay);
        ledger.check(rule, load_project.as_str(), cx.now)?;

        let job_id = format!("load-{:06}", self.next_id);
        cx.success(
            AuditAction::JobTransition,
            &job_id,
            detail([
                ("to", JobState::Queued.to_string()),
                ("tool", req.tool.to_string()),
                ("source", req.source.to_string()),
                ("destination", req.destination.to_string()),
            ]),
        )?;
        ledger.consume(rule, load_project.as_str(), cx.now);
        let logical_source = req
            .source
            .from_physical(&self.config.domain_suffix)
            .ok()
            .map(|l| l.to_string());
        let job = TransferJob {
            job_id: job_id.clone(),
            tool: req.tool,
            source: req.source,
            destination: req.destination,
            format: req.format,
            partitioned_dest: req.partitioned_dest,
            backfill: req.backfill,
            dedupe_key: key,
            submitter: cx.actor.to_string(),
            state: JobState::Queued,
            submitted_at: cx.now,
            started_at: None,
            finished_at: None,
            slots_used: 0,
            reservation: capacity.reservation.clone(),
            duration: req.duration.unwrap_or(self.config.default_duration),
            result: req.result,
            logical_source,
        };
        self.next_id += 1;
        self.index.add(&job);
        self.jobs.insert(job_id, job.clone());
        Ok(Submitted {
            job,
            deduplicated: false,
        })
    }

    /// Earliest completion among running jobs.
    pub fn next_due(&self) -> Option<Timestamp> {
        self.index.running.first().map(|(due, _)| *due)
    }

    /// Whether a tick at the current instant would start something.
    pub fn can_start(&self, capacity: &LoadCapacity) -> bool {
        (self.running() as u64) < capacity.cap && !self.index.queued.is_empty()
    }

    /// Complete running jobs whose duration has elapsed, then start queued
    /// jobs in FIFO order up to the concurrency cap.
    pub fn tick(
        &mut self,
        cx: &mut Ctx<'_>,
        capacity: &LoadCapacity,
    ) -> Result<Vec<Transition>, IngestionError> {
        let mut out = Vec::new();
        let due: Vec<(Timestamp, String)> = self
            .index
            .running
            .iter()
            .take_while(|(t, _)| *t <= cx.now)
            .cloned()
            .collect();
        for (_, id) in due {
            let to = self.jobs[&id].result.state();
            cx.success(
                AuditAction::JobTransition,
                &id,
                detail([("from", "running".to_string()), ("to", to.to_string())]),
            )?;
            let now = cx.now;
            let job = self.update(&id, |job| {
                job.state = to;
                job.finished_at = Some(now);
            });
            if to == JobState::Succeeded {
                if let Some(path) = job.logical_source.clone() {
                    self.mark_loaded(&path, now);
                }
            }
            out.push(Transition {
                job_id: id,
                from: Some(JobState::Running),
                to,
                at: cx.now,
            });
        }
        let per_job = capacity.reserved_slots.checked_div(capacity.cap).unwrap_or(0);
        let free = capacity.cap.saturating_sub(self.running() as u64) as usize;
        let starting: Vec<String> = self
            .index
            .queued
            .iter()
            .take(free)
            .map(|(_, id)| id.clone())
            .collect();
        for id in starting {
            cx.success(
                AuditAction::JobTransition,
                &id,
                detail([("from", "queued".to_string()), ("to", "running".to_string())]),
            )?;
            let now = cx.now;
            self.update(&id, |job| {
                job.state = JobState::Running;
                job.started_at = Some(now);
                job.slots_used = per_job;
                job.reservation = capacity.reservation.clone();
            });
            out.push(Transition {
                job_id: id,
                from: Some(JobState::Queued),
                to: JobState::Running,
                at: cx.now,
            });
        }
        Ok(out)
    }

    /// A successful load refreshes the warehouse stage of every tracked
    /// dataset containing the source.
    fn mark_loaded(&mut self, logical_source: &str, now: Timestamp) {
        for (path, status) in self.statuses.iter_mut() {
            let covers = logical_source == path
                || logical_source
                    .strip_prefix(path.as_str())
                    .is_some_and(|rest| rest.starts_with('/'));
            if covers {
                status.exists_bq = true;
                status.last_changed_bq = Some(now);
            }
        }
    }
}
