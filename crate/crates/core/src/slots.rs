//! Slot reservations and per-reservation FIFO scheduling.
//!
//! Purchased capacity is split between the shared `default` reservation and
//! named dedicated reservations. A project draws only from the reservation it
//! is assigned to (default when unassigned), so a saturated default
//! reservation cannot starve a dedicated one.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observability::audit::{detail, AuditAction, AuditError, Ctx};
use crate::time::{Duration, Timestamp};

pub const DEFAULT_RESERVATION: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Query,
    Analytics,
    Load,
}

impl JobKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            JobKind::Query => "query",
            JobKind::Analytics => "analytics",
            JobKind::Load => "load",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "query" => Some(JobKind::Query),
            "analytics" => Some(JobKind::Analytics),
            "load" => Some(JobKind::Load),
            _ => None,
        }
    }
}

impl fmt::Display for JobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub const fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Succeeded => "succeeded",
            JobState::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "queued" => Some(JobState::Queued),
            "running" => Some(JobState::Running),
            "succeeded" => Some(JobState::Succeeded),
            "failed" => Some(JobState::Failed),
            _ => None,
        }
    }

    pub fn is_finished(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Terminal state a job reaches when it completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobResult {
    Succeeded,
    Failed,
}

impl JobResult {
    pub fn state(self) -> JobState {
        match self {
            JobResult::Succeeded => JobState::Succeeded,
            JobResult::Failed => JobState::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRequest {
    pub job_id: String,
    pub project: String,
    pub slots_needed: u64,
    pub kind: JobKind,
    /// Run time once started; without it the job runs until completed
    /// explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Duration>,
    #[serde(default = "succeeded")]
    pub result: JobResult,
}

fn succeeded() -> JobResult {
    JobResult::Succeeded
}

impl SlotRequest {
    pub fn new(job_id: impl Into<String>, project: impl Into<String>, slots_needed: u64, kind: JobKind) -> Self {
        SlotRequest {
            job_id: job_id.into(),
            project: project.into(),
            slots_needed,
            kind,
            duration: None,
            result: JobResult::Succeeded,
        }
    }

    pub fn lasting(mut self, duration: Duration) -> Self {
        self.duration = Some(duration);
        self
    }

    pub fn ending(mut self, result: JobResult) -> Self {
        self.result = result;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotJob {
    pub job_id: String,
    pub project: String,
    pub kind: JobKind,
    pub slots_needed: u64,
    pub reservation: String,
    pub state: JobState,
    pub submitted_at: Timestamp,
    pub started_at: Option<Timestamp>,
    pub finished_at: Option<Timestamp>,
    pub duration: Option<Duration>,
    pub result: JobResult,
}

impl SlotJob {
    pub fn due_at(&self) -> Option<Timestamp> {
        match (self.state, self.started_at, self.duration) {
            (JobState::Running, Some(s), Some(d)) => Some(s + d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedicatedReservation {
    pub capacity: u64,
    pub assigned_projects: BTreeSet<String>,
}

/// Outcome of [`SlotPool::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Allocated,
    Queued,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationStatus {
    pub name: String,
    pub capacity: u64,
    pub allocated: u64,
    pub free: u64,
    pub running: usize,
    pub queued: usize,
    pub projects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStatus {
    pub total_purchased: u64,
    pub default_capacity: u64,
    pub reservations: Vec<ReservationStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SlotError {
    #[error("unknown reservation `{0}`")]
    UnknownReservation(String),
    #[error("reservation `{0}` already exists")]
    DuplicateReservation(String),
    #[error("invalid reservation name `{0}`")]
    InvalidReservationName(String),
    #[error("default reservation has {available} free slots, {requested} requested")]
    InsufficientDefaultCapacity { requested: u64, available: u64 },
    #[error("reservation `{0}` has running or queued jobs")]
    ReservationBusy(String),
    #[error("project `{project}` is already assigned to `{reservation}`")]
    ProjectAlreadyAssigned { project: String, reservation: String },
    #[error("job needs {needed} slots but reservation `{reservation}` has {capacity}")]
    RequestExceedsReservation {
        reservation: String,
        needed: u64,
        capacity: u64,
    },
    #[error("a job must request at least one slot")]
    EmptyRequest,
    #[error("job `{0}` already exists")]
    DuplicateJob(String),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("job `{0}` is not running")]
    NotRunning(String),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

/// A job state change, as reported by scheduling operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub job_id: String,
    pub from: Option<JobState>,
    pub to: JobState,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPool {
    total_purchased: u64,
    default_capacity: u64,
    dedicated: BTreeMap<String, DedicatedReservation>,
    assignment: BTreeMap<String, String>,
    jobs: BTreeMap<String, SlotJob>,
}

impl Default for SlotPool {
    fn default() -> Self {
        SlotPool::new(0)
    }
}

impl SlotPool {
    pub fn new(total: u64) -> Self {
        SlotPool {
            total_purchased: total,
            default_capacity: total,
            dedicated: BTreeMap::new(),
            assignment: BTreeMap::new(),
            jobs: BTreeMap::new(),
        }
    }

    pub fn total_purchased(&self) -> u64 {
        self.total_purchased
    }

    pub fn default_capacity(&self) -> u64 {
        self.default_capacity
    }

    pub fn dedicated(&self) -> &BTreeMap<String, DedicatedReservation> {
        &self.dedicated
    }

    pub fn jobs(&self) -> impl Iterator<Item = &SlotJob> {
        self.jobs.values()
    }

    pub fn job(&self, job_id: &str) -> Option<&SlotJob> {
        self.jobs.get(job_id)
    }

    /// Reservation serving `project`.
    pub fn reservation_of(&self, project: &str) -> &str {
        self.assignment
            .get(project)
            .map(String::as_str)
            .unwrap_or(DEFAULT_RESERVATION)
    }

    pub fn capacity(&self, reservation: &str) -> Option<u64> {
        if reservation == DEFAULT_RESERVATION {
            Some(self.default_capacity)
        } else {
            self.dedicated.get(reservation).map(|r| r.capacity)
        }
    }

    pub fn allocated(&self, reservation: &str) -> u64 {
        self.jobs
            .values()
            .filter(|j| j.state == JobState::Running && j.reservation == reservation)
            .map(|j| j.slots_needed)
            .sum()
    }

    pub fn free(&self, reservation: &str) -> u64 {
        self.capacity(reservation)
            .unwrap_or(0)
            .saturating_sub(self.allocated(reservation))
    }

    fn has_pending(&self, reservation: &str) -> bool {
        self.jobs.values().any(|j| {
            j.reservation == reservation && matches!(j.state, JobState::Queued | JobState::Running)
        })
    }

    /// Queued jobs of a reservation in FIFO order.
    pub fn queue(&self, reservation: &str) -> Vec<&SlotJob> {
        let mut q: Vec<&SlotJob> = self
            .jobs
            .values()
            .filter(|j| j.state == JobState::Queued && j.reservation == reservation)
            .collect();
        q.sort_by(|a, b| (a.submitted_at, &a.job_id).cmp(&(b.submitted_at, &b.job_id)));
        q
    }

    fn reservation_names(&self) -> impl Iterator<Item = &str> {
        core::iter::once(DEFAULT_RESERVATION).chain(self.dedicated.keys().map(String::as_str))
    }

    pub fn status(&self) -> PoolStatus {
        let reservations = self
            .reservation_names()
            .map(|name| {
                let capacity = self.capacity(name).unwrap_or(0);
                let allocated = self.allocated(name);
                let projects = match self.dedicated.get(name) {
                    Some(r) => r.assigned_projects.iter().cloned().collect(),
                    None => Vec::new(),
                };
                ReservationStatus {
                    name: name.to_string(),
                    capacity,
                    allocated,
                    free: capacity.saturating_sub(allocated),
                    running: self
                        .jobs
                        .values()
                        .filter(|j| j.state == JobState::Running && j.reservation == name)
                        .count(),
                    queued: self.queue(name).len(),
                    projects,
                }
            })
            .collect();
        PoolStatus {
            total_purchased: self.total_purchased,
            default_capacity: self.default_capacity,
            reservations,
        }
    }

    /// Conservation and no-overcommit. Returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let dedicated: u64 = self.dedicated.values().map(|r| r.capacity).sum();
        if self.default_capacity + dedicated != self.total_purchased {
            return Err(format!(
                "conservation: {} + {} != {}",
                self.default_capacity, dedicated, self.total_purchased
            ));
        }
        for name in self.reservation_names() {
            let cap = self.capacity(name).unwrap_or(0);
            let alloc = self.allocated(name);
            if alloc > cap {
                return Err(format!("overcommit in {name}: {alloc} > {cap}"));
            }
        }
        for (project, res) in &self.assignment {
            match self.dedicated.get(res) {
                Some(r) if r.assigned_projects.contains(project) => {}
                _ => return Err(format!("dangling assignment {project} -> {res}")),
            }
        }
        for j in self.jobs.values() {
            if j.reservation != DEFAULT_RESERVATION
                && !self.dedicated.contains_key(&j.reservation)
                && !j.state.is_finished()
            {
                return Err(format!("job {} in missing reservation", j.job_id));
            }
        }
        Ok(())
    }

    /// Reset to a fresh pool of `total` slots. Refused while any job is
    /// queued or running.
    pub fn init(&mut self, cx: &mut Ctx<'_>, total: u64) -> Result<(), SlotError> {
        if let Some(j) = self.jobs.values().find(|j| !j.state.is_finished()) {
            return Err(SlotError::ReservationBusy(j.reservation.clone()));
        }
        cx.success(
            AuditAction::ReservationChange,
            DEFAULT_RESERVATION,
            detail([("op", "init".to_string()), ("total", total.to_string())]),
        )?;
        let jobs = core::mem::take(&mut self.jobs);
        *self = SlotPool::new(total);
        self.jobs = jobs;
        Ok(())
    }

    /// Carve a dedicated reservation out of free default capacity and assign
    /// `project` to it.
    pub fn carve_dedicated(
        &mut self,
        cx: &mut Ctx<'_>,
        name: &str,
        slots: u64,
        project: &str,
    ) -> Result<Vec<Transition>, SlotError> {
        if name == DEFAULT_RESERVATION || !crate::path::is_identifier(&name.replace('_', "-")) {
            return Err(SlotError::InvalidReservationName(name.to_string()));
        }
        if self.dedicated.contains_key(name) {
            return Err(SlotError::DuplicateReservation(name.to_string()));
        }
        if let Some(res) = self.assignment.get(project) {
            return Err(SlotError::ProjectAlreadyAssigned {
                project: project.to_string(),
                reservation: res.clone(),
            });
        }
        let available = self.free(DEFAULT_RESERVATION);
        let remaining = self.default_capacity.saturating_sub(slots);
        let stranded = self
            .queue(DEFAULT_RESERVATION)
            .iter()
            .any(|j| j.slots_needed > remaining);
        if slots > available || stranded {
            return Err(SlotError::InsufficientDefaultCapacity {
                requested: slots,
                available,
            });
        }
        cx.success(
            AuditAction::ReservationChange,
            name,
            detail([
                ("op", "carve".to_string()),
                ("slots", slots.to_string()),
                ("project", project.to_string()),
            ]),
        )?;
        self.default_capacity -= slots;
        self.dedicated.insert(
            name.to_string(),
            DedicatedReservation {
                capacity: slots,
                assigned_projects: BTreeSet::from([project.to_string()]),
            },
        );
        self.assignment.insert(project.to_string(), name.to_string());
        Ok(Vec::new())
    }

    /// Return a dedicated reservation's capacity to default. Queued default
    /// jobs that now fit are started.
    pub fn release_dedicated(&mut self, cx: &mut Ctx<'_>, name: &str) -> Result<Vec<Transition>, SlotError> {
        if !self.dedicated.contains_key(name) {
            return Err(SlotError::UnknownReservation(name.to_string()));
        }
        if self.has_pending(name) {
            return Err(SlotError::ReservationBusy(name.to_string()));
        }
        cx.success(
            AuditAction::ReservationChange,
            name,
            detail([("op", "release".to_string())]),
        )?;
        let r = self.dedicated.remove(name).expect("checked above");
        self.default_capacity += r.capacity;
        for p in &r.assigned_projects {
            self.assignment.remove(p);
        }
        self.drain(cx, DEFAULT_RESERVATION)
    }

    pub fn purchase_slots(&mut self, cx: &mut Ctx<'_>, extra: u64) -> Result<Vec<Transition>, SlotError> {
        cx.success(
            AuditAction::ReservationChange,
            DEFAULT_RESERVATION,
            detail([("op", "purchase".to_string()), ("slots", extra.to_string())]),
        )?;
        self.total_purchased += extra;
        self.default_capacity += extra;
        self.drain(cx, DEFAULT_RESERVATION)
    }

    /// Admit a job. It runs immediately when its reservation has no queue
    /// and enough free slots; otherwise it waits in FIFO order.
    pub fn schedule(&mut self, cx: &mut Ctx<'_>, req: SlotRequest) -> Result<Placement, SlotError> {
        if req.slots_needed == 0 {
            return Err(SlotError::EmptyRequest);
        }
        if self.jobs.contains_key(&req.job_id) {
            return Err(SlotError::DuplicateJob(req.job_id));
        }
        let reservation = self.reservation_of(&req.project).to_string();
        let capacity = self.capacity(&reservation).unwrap_or(0);
        if req.slots_needed > capacity {
            return Err(SlotError::RequestExceedsReservation {
                reservation,
                needed: req.slots_needed,
                capacity,
            });
        }
        let runs = self.queue(&reservation).is_empty() && self.free(&reservation) >= req.slots_needed;
        let state = if runs { JobState::Running } else { JobState::Queued };
        cx.success(
            AuditAction::JobTransition,
            &req.job_id,
            detail([
                ("to", state.to_string()),
                ("project", req.project.clone()),
                ("reservation", reservation.clone()),
                ("slots", req.slots_needed.to_string()),
            ]),
        )?;
        self.jobs.insert(
            req.job_id.clone(),
            SlotJob {
                job_id: req.job_id,
                project: req.project,
                kind: req.kind,
                slots_needed: req.slots_needed,
                reservation,
                state,
                submitted_at: cx.now,
                started_at: runs.then_some(cx.now),
                finished_at: None,
                duration: req.duration,
                result: req.result,
            },
        );
        Ok(if runs { Placement::Allocated } else { Placement::Queued })
    }

    /// Finish a running job, return its slots and start whatever queued jobs
    /// now fit. The completion comes first in the returned transitions.
    pub fn complete(
        &mut self,
        cx: &mut Ctx<'_>,
        job_id: &str,
        result: JobResult,
    ) -> Result<Vec<Transition>, SlotError> {
        let job = self
            .jobs
            .get(job_id)
            .ok_or_else(|| SlotError::UnknownJob(job_id.to_string()))?;
        if job.state != JobState::Running {
            return Err(SlotError::NotRunning(job_id.to_string()));
        }
        let to = result.state();
        cx.success(
            AuditAction::JobTransition,
            job_id,
            detail([("from", "running".to_string()), ("to", to.to_string())]),
        )?;
        let job = self.jobs.get_mut(job_id).expect("checked above");
        job.state = to;
        job.finished_at = Some(cx.now);
        let reservation = job.reservation.clone();
        let mut out = alloc::vec![Transition {
            job_id: job_id.to_string(),
            from: Some(JobState::Running),
            to,
            at: cx.now,
        }];
        out.extend(self.drain(cx, &reservation)?);
        Ok(out)
    }

    /// Start queued jobs from the head of the reservation's queue while
    /// they fit.
    fn drain(&mut self, cx: &mut Ctx<'_>, reservation: &str) -> Result<Vec<Transition>, SlotError> {
        let mut out = Vec::new();
        while let Some(head) = self.queue(reservation).first().map(|j| (j.job_id.clone(), j.slots_needed)) {
            if head.1 > self.free(reservation) {
                break;
            }
            cx.success(
                AuditAction::JobTransition,
                &head.0,
                detail([("from", "queued".to_string()), ("to", "running".to_string())]),
            )?;
            let job = self.jobs.get_mut(&head.0).expect("queued job present");
            job.state = JobState::Running;
            job.started_at = Some(cx.now);
            out.push(Transition {
                job_id: head.0,
                from: Some(JobState::Queued),
                to: JobState::Running,
                at: cx.now,
            });
        }
        Ok(out)
    }

    /// Earliest completion time of a running job with a known duration.
    pub fn next_due(&self) -> Option<Timestamp> {
        self.jobs.values().filter_map(SlotJob::due_at).min()
    }

    /// Complete every job due at or before `cx.now`, in due-time order.
    pub fn run_due(&mut self, cx: &mut Ctx<'_>) -> Result<Vec<Transition>, SlotError> {
        let mut out = Vec::new();
        loop {
            let next = self
                .jobs
                .values()
                .filter_map(|j| j.due_at().map(|t| (t, j.job_id.clone(), j.result)))
                .filter(|(t, _, _)| *t <= cx.now)
                .min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
            let Some((due, id, result)) = next else { break };
            let mut at_due = cx.reborrow();
            at_due.now = due;
            out.extend(self.complete(&mut at_due, &id, result)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observability::audit::{AuditLog, AuditSink};

    fn cx(log: &mut AuditLog, t: u64) -> Ctx<'_> {
        Ctx::new(log, "admin", Timestamp(t))
    }

    #[test]
    fn tweet_analyzer_example() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(0);
        pool.init(&mut cx(&mut log, 0), 100_000).unwrap();
        assert_eq!(pool.default_capacity(), 100_000);
        pool.carve_dedicated(&mut cx(&mut log, 0), "tweet_analyzer", 30_000, "analytics-proj")
            .unwrap();
        assert_eq!(pool.default_capacity(), 70_000);
        assert_eq!(pool.capacity("tweet_analyzer"), Some(30_000));
        assert_eq!(pool.reservation_of("analytics-proj"), "tweet_analyzer");
        pool.check_invariants().unwrap();
        pool.release_dedicated(&mut cx(&mut log, 1), "tweet_analyzer").unwrap();
        assert_eq!(pool.default_capacity(), 100_000);
        assert_eq!(pool.reservation_of("analytics-proj"), DEFAULT_RESERVATION);
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn carve_errors() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(1000);
        assert_eq!(
            pool.carve_dedicated(&mut cx(&mut log, 0), "big", 1001, "p"),
            Err(SlotError::InsufficientDefaultCapacity { requested: 1001, available: 1000 })
        );
        pool.carve_dedicated(&mut cx(&mut log, 0), "zero", 0, "p").unwrap();
        assert_eq!(pool.default_capacity(), 1000);
        assert!(matches!(
            pool.carve_dedicated(&mut cx(&mut log, 0), "zero", 0, "q"),
            Err(SlotError::DuplicateReservation(_))
        ));
        assert!(matches!(
            pool.carve_dedicated(&mut cx(&mut log, 0), "other", 0, "p"),
            Err(SlotError::ProjectAlreadyAssigned { .. })
        ));
        assert!(matches!(
            pool.release_dedicated(&mut cx(&mut log, 0), "nope"),
            Err(SlotError::UnknownReservation(_))
        ));
    }

    #[test]
    fn purchase_adds_to_default() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(100_000);
        pool.purchase_slots(&mut cx(&mut log, 0), 5000).unwrap();
        assert_eq!(pool.total_purchased(), 105_000);
        assert_eq!(pool.default_capacity(), 105_000);
        let before = pool.clone();
        pool.purchase_slots(&mut cx(&mut log, 0), 0).unwrap();
        assert_eq!(pool, before);
    }

    #[test]
    fn fifo_queue_and_completion() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(100);
        let s = |id: &str, n| SlotRequest::new(id, "p", n, JobKind::Query);
        assert_eq!(pool.schedule(&mut cx(&mut log, 0), s("a", 60)).unwrap(), Placement::Allocated);
        assert_eq!(pool.schedule(&mut cx(&mut log, 1), s("b", 50)).unwrap(), Placement::Queued);
        // Strict FIFO: c would fit but waits behind b.
        assert_eq!(pool.schedule(&mut cx(&mut log, 2), s("c", 10)).unwrap(), Placement::Queued);
        assert_eq!(pool.free(DEFAULT_RESERVATION), 40);
        let t = pool.complete(&mut cx(&mut log, 5), "a", JobResult::Succeeded).unwrap();
        let started: Vec<_> = t.iter().skip(1).map(|t| t.job_id.as_str()).collect();
        assert_eq!(started, ["b", "c"]);
        assert_eq!(pool.allocated(DEFAULT_RESERVATION), 60);
        assert!(matches!(
            pool.schedule(&mut cx(&mut log, 6), s("d", 101)),
            Err(SlotError::RequestExceedsReservation { .. })
        ));
        assert_eq!(pool.schedule(&mut cx(&mut log, 6), s("d", 0)), Err(SlotError::EmptyRequest));
        pool.check_invariants().unwrap();
    }

    #[test]
    fn dedicated_is_isolated_from_saturated_default() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(100_000);
        pool.carve_dedicated(&mut cx(&mut log, 0), "tweet_analyzer", 30_000, "ta").unwrap();
        pool.schedule(&mut cx(&mut log, 0), SlotRequest::new("hog", "other", 70_000, JobKind::Analytics))
            .unwrap();
        assert_eq!(pool.free(DEFAULT_RESERVATION), 0);
        assert_eq!(
            pool.schedule(&mut cx(&mut log, 1), SlotRequest::new("t", "ta", 30_000, JobKind::Analytics))
                .unwrap(),
            Placement::Allocated
        );
        assert_eq!(
            pool.release_dedicated(&mut cx(&mut log, 2), "tweet_analyzer"),
            Err(SlotError::ReservationBusy("tweet_analyzer".into()))
        );
    }

    #[test]
    fn timed_jobs_complete_in_due_order() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(10);
        let r = |id: &str, d| SlotRequest::new(id, "p", 10, JobKind::Query).lasting(Duration(d));
        pool.schedule(&mut cx(&mut log, 0), r("a", 5)).unwrap();
        pool.schedule(&mut cx(&mut log, 0), r("b", 5).ending(JobResult::Failed)).unwrap();
        assert_eq!(pool.next_due(), Some(Timestamp(5)));
        let t = pool.run_due(&mut cx(&mut log, 100)).unwrap();
        assert_eq!(t.len(), 3);
        let b = pool.job("b").unwrap();
        assert_eq!(b.state, JobState::Failed);
        assert_eq!(b.started_at, Some(Timestamp(5)));
        assert_eq!(b.finished_at, Some(Timestamp(10)));
        assert_eq!(pool.next_due(), None);
    }

    #[test]
    fn sink_failure_leaves_pool_untouched() {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(10);
        log.set_available(false);
        let before = pool.clone();
        assert!(pool.purchase_slots(&mut cx(&mut log, 0), 5).is_err());
        assert!(pool
            .schedule(&mut cx(&mut log, 0), SlotRequest::new("a", "p", 1, JobKind::Query))
            .is_err());
        assert_eq!(pool, before);
        assert!(log.events().is_empty());
    }
}
