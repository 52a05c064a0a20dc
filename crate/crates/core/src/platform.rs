//! The control plane: every module's state behind one virtual clock and one
//! audit sink.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cloud::{
    AccessAction, ApiCallKind, CloudSim, Created, Decision, OpOutcome, QuotaName, QuotaTable,
    ResourceId, Role, TableOpKind,
};
use crate::identity::{
    IdentityConfig, IdentityStore, KeyVault, MemoryVault, PrincipalIdentity, PrincipalKind,
    ReaderGroup, ShadowKey,
};
use crate::ingestion::{
    watchdog_scan, DatasetStatus, Finding, Ingestion, IngestionConfig, LoadCapacity, Submitted,
    Thresholds, TransferRequest,
};
use crate::observability::alerts::{AlertRule, Alerting, Firing};
use crate::observability::audit::{AuditEvent, AuditFilter, AuditSink, Ctx, DiscardSink};
use crate::observability::info_schema::{self, JobFilter, JobStatsRow, Scope};
use crate::observability::metrics::{aggregate, Metrics};
use crate::provision::{NamingPolicy, Provisioner, ReconcileReport, TenantSpec};
use crate::slots::{JobResult, Placement, PoolStatus, SlotPool, SlotRequest, Transition};
use crate::time::{Duration, Timestamp};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub naming: NamingPolicy,
    pub domain_suffix: String,
    pub identity: IdentityConfig,
    pub quotas: QuotaTable,
    /// Slots in the pool of a fresh system.
    pub slot_total: u64,
    pub poll_interval: Duration,
    pub alert_cooldown: Duration,
    pub alert_rules: Vec<AlertRule>,
    pub watchdog: Thresholds,
    pub load_job_duration: Duration,
    /// Record denied access checks as well as granted ones.
    pub audit_denied: bool,
    /// Principal recorded for provisioning and administrative operations.
    pub automation_principal: String,
    /// Principal recorded for clock-driven operations.
    pub system_principal: String,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig {
            naming: NamingPolicy::default(),
            domain_suffix: crate::path::DEFAULT_DOMAIN_SUFFIX.into(),
            identity: IdentityConfig::default(),
            quotas: QuotaTable::default(),
            slot_total: 100_000,
            poll_interval: Duration(60),
            alert_cooldown: Duration(300),
            alert_rules: Vec::new(),
            watchdog: Thresholds::default(),
            load_job_duration: Duration::minutes(5),
            audit_denied: true,
            automation_principal: "bigbird-automation".into(),
            system_principal: "bigbird-system".into(),
        }
    }
}

impl PlatformConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.naming.validate()?;
        crate::path::bucket_name(crate::path::NamespaceKind::User, "a", &self.domain_suffix)?;
        let positive = [
            ("rotation_interval", self.identity.rotation_interval),
            ("grace_period", self.identity.grace_period),
            ("poll_interval", self.poll_interval),
            ("load_job_duration", self.load_job_duration),
        ];
        for (field, d) in positive {
            if d.0 == 0 {
                return Err(Error::Config(alloc::format!("{field} must be positive")));
            }
        }
        self.watchdog.validate()?;
        for r in &self.alert_rules {
            r.validate()?;
        }
        Ok(())
    }

    fn ingestion(&self) -> IngestionConfig {
        IngestionConfig {
            load_project: self.naming.load_project.clone(),
            domain_suffix: self.domain_suffix.clone(),
            default_duration: self.load_job_duration,
        }
    }
}

/// Everything that persists between runs except the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub clock: Timestamp,
    pub cloud: CloudSim,
    pub identity: IdentityStore,
    pub slots: SlotPool,
    pub ingestion: Ingestion,
    pub metrics: Metrics,
    pub alerting: Alerting,
}

impl State {
    pub fn new(config: &PlatformConfig) -> Self {
        State {
            clock: Timestamp::EPOCH,
            cloud: CloudSim::new(config.quotas.clone(), Timestamp::EPOCH),
            identity: IdentityStore::new(config.identity.clone()),
            slots: SlotPool::new(config.slot_total),
            ingestion: Ingestion::new(config.ingestion()),
            metrics: Metrics::new(),
            alerting: Alerting::new(),
        }
    }
}

/// What one `advance_clock` call did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvanceReport {
    pub now: Timestamp,
    pub rotations: usize,
    pub transitions: usize,
    pub polls: usize,
    pub firings: Vec<Firing>,
}

pub struct ControlPlane {
    config: PlatformConfig,
    state: State,
    audit: Box<dyn AuditSink>,
    vault: Box<dyn KeyVault>,
}

impl ControlPlane {
    pub fn new(config: PlatformConfig, audit: Box<dyn AuditSink>) -> Result<Self, Error> {
        config.validate()?;
        let state = State::new(&config);
        Ok(ControlPlane {
            config,
            state,
            audit,
            vault: Box::new(MemoryVault::new()),
        })
    }

    /// Resume from persisted state. Configuration-derived settings in the
    /// state are replaced by `config`.
    pub fn from_state(config: PlatformConfig, mut state: State, audit: Box<dyn AuditSink>) -> Result<Self, Error> {
        config.validate()?;
        state.cloud.set_quotas(config.quotas.clone());
        state.identity.set_config(config.identity.clone());
        state.ingestion.set_config(config.ingestion());
        Ok(ControlPlane {
            config,
            state,
            audit,
            vault: Box::new(MemoryVault::new()),
        })
    }

    pub fn with_vault(mut self, vault: Box<dyn KeyVault>) -> Self {
        self.vault = vault;
        self
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn into_parts(self) -> (State, Box<dyn AuditSink>) {
        (self.state, self.audit)
    }

    pub fn audit(&self) -> &dyn AuditSink {
        &*self.audit
    }

    pub fn audit_mut(&mut self) -> &mut dyn AuditSink {
        &mut *self.audit
    }

    pub fn now(&self) -> Timestamp {
        self.state.clock
    }

    pub fn cloud(&self) -> &CloudSim {
        &self.state.cloud
    }

    pub fn identity(&self) -> &IdentityStore {
        &self.state.identity
    }

    pub fn slots(&self) -> &SlotPool {
        &self.state.slots
    }

    pub fn ingestion(&self) -> &Ingestion {
        &self.state.ingestion
    }

    pub fn metrics(&self) -> &Metrics {
        &self.state.metrics
    }

    pub fn alerting(&self) -> &Alerting {
        &self.state.alerting
    }

    fn require_project(&self, project: &str) -> Result<(), Error> {
        if self.state.cloud.exists(&ResourceId::project(project)) {
            Ok(())
        } else {
            Err(Error::UnknownProject(project.to_string()))
        }
    }

    // Resource administration.

    pub fn create_project(&mut self, actor: &str, project: &str) -> Result<Created, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self
            .state
            .cloud
            .create_project(&mut cx, project, Default::default())?)
    }

    pub fn create_dataset(&mut self, actor: &str, project: &str, dataset: &str) -> Result<Created, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.cloud.create_dataset(&mut cx, project, dataset)?)
    }

    pub fn create_table(
        &mut self,
        actor: &str,
        project: &str,
        dataset: &str,
        table: &str,
        columns: u64,
    ) -> Result<Created, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self
            .state
            .cloud
            .create_table(&mut cx, project, dataset, table, columns, false)?)
    }

    pub fn create_view(
        &mut self,
        actor: &str,
        project: &str,
        dataset: &str,
        view: &str,
        backing: &ResourceId,
    ) -> Result<Created, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self
            .state
            .cloud
            .create_view(&mut cx, project, dataset, view, backing, true)?)
    }

    pub fn delete_dataset(&mut self, actor: &str, dataset: &ResourceId) -> Result<(), Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.cloud.delete_dataset(&mut cx, dataset)?)
    }

    pub fn grant(&mut self, actor: &str, resource: &ResourceId, principal: &str, role: Role) -> Result<bool, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.cloud.grant(&mut cx, resource, principal, role)?)
    }

    pub fn revoke(&mut self, actor: &str, resource: &ResourceId, principal: &str, role: Role) -> Result<bool, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.cloud.revoke(&mut cx, resource, principal, role)?)
    }

    pub fn table_operation(
        &mut self,
        actor: &str,
        table: &ResourceId,
        kind: TableOpKind,
        outcome: OpOutcome,
    ) -> Result<(), Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.cloud.table_operation(&mut cx, table, kind, outcome)?)
    }

    pub fn api_call(&mut self, user: &str, project: &str, kind: ApiCallKind) -> Result<(), Error> {
        let mut cx = Ctx::new(&mut *self.audit, user, self.state.clock);
        Ok(self.state.cloud.record_api_call(&mut cx, user, project, kind)?)
    }

    /// Audited access check; group membership comes from the identity store.
    pub fn check_access(
        &mut self,
        principal: &str,
        resource: &ResourceId,
        action: AccessAction,
    ) -> Result<Decision, Error> {
        let mut cx = Ctx::new(&mut *self.audit, principal, self.state.clock);
        cx.audit_denied = self.config.audit_denied;
        Ok(self
            .state
            .cloud
            .check_access(&mut cx, principal, resource, action, &self.state.identity)?)
    }

    // Identities and groups.

    pub fn ensure_identity(&mut self, unix_name: &str, kind: PrincipalKind) -> Result<(PrincipalIdentity, bool), Error> {
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        Ok(self
            .state
            .identity
            .ensure_shadow_account(&mut cx, &mut *self.vault, unix_name, kind)?)
    }

    pub fn rotate_key(&mut self, shadow_email: &str) -> Result<ShadowKey, Error> {
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        Ok(self
            .state
            .identity
            .rotate_key(&mut cx, &mut *self.vault, shadow_email)?)
    }

    pub fn ensure_reader_group(&mut self, subject: &ResourceId) -> Result<(ReaderGroup, bool), Error> {
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        Ok(self
            .state
            .identity
            .ensure_reader_group(&mut cx, &mut self.state.cloud, subject)?)
    }

    pub fn add_group_member(&mut self, actor: &str, group: &str, principal: &str) -> Result<bool, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.identity.add_member(&mut cx, group, principal)?)
    }

    pub fn remove_group_member(&mut self, actor: &str, group: &str, principal: &str) -> Result<bool, Error> {
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.identity.remove_member(&mut cx, group, principal)?)
    }

    // Provisioning.

    fn provisioner_run<R>(
        state: &mut State,
        config: &PlatformConfig,
        audit: &mut dyn AuditSink,
        vault: &mut dyn KeyVault,
        f: impl FnOnce(&mut Provisioner<'_>, &mut Ctx<'_>) -> R,
    ) -> R {
        let mut cx = Ctx::new(audit, &config.automation_principal, state.clock);
        let mut p = Provisioner {
            cloud: &mut state.cloud,
            identity: &mut state.identity,
            vault,
            policy: &config.naming,
            domain_suffix: &config.domain_suffix,
        };
        f(&mut p, &mut cx)
    }

    pub fn precondition(&mut self, tenant: &TenantSpec) -> bool {
        Self::provisioner_run(
            &mut self.state,
            &self.config,
            &mut *self.audit,
            &mut *self.vault,
            |p, cx| {
                p.ensure_system(cx).is_ok() && p.precondition(cx, tenant)
            },
        )
    }

    pub fn reconcile(&mut self, specs: &[TenantSpec]) -> Result<ReconcileReport, Error> {
        Ok(Self::provisioner_run(
            &mut self.state,
            &self.config,
            &mut *self.audit,
            &mut *self.vault,
            |p, cx| p.reconcile(cx, specs),
        )?)
    }

    /// What `reconcile` would do, computed on a copy of the state.
    pub fn reconcile_dry_run(&self, specs: &[TenantSpec]) -> Result<ReconcileReport, Error> {
        let mut state = self.state.clone();
        let mut sink = DiscardSink::default();
        let mut vault = MemoryVault::new();
        Ok(Self::provisioner_run(
            &mut state,
            &self.config,
            &mut sink,
            &mut vault,
            |p, cx| p.reconcile(cx, specs),
        )?)
    }

    // Ingestion.

    /// Capacity available to load jobs: the reservation serving the load
    /// project.
    pub fn load_capacity(&self) -> LoadCapacity {
        let reservation = self
            .state
            .slots
            .reservation_of(&self.config.naming.load_project)
            .to_string();
        let reserved_slots = self.state.slots.capacity(&reservation).unwrap_or(0);
        let cap = self
            .state
            .cloud
            .quotas()
            .rule(QuotaName::ConcurrentLoadJobs)
            .concurrency_cap(reserved_slots);
        LoadCapacity {
            reservation,
            reserved_slots,
            cap,
        }
    }

    /// Submit a load job and start it right away if the cap allows.
    pub fn submit_transfer(&mut self, actor: &str, req: TransferRequest) -> Result<Submitted, Error> {
        let capacity = self.load_capacity();
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        let mut submitted = self.state.ingestion.submit_transfer(
            &mut cx,
            &mut self.state.cloud,
            &self.state.identity,
            &capacity,
            req,
        )?;
        if !submitted.deduplicated {
            self.kick_ingestion()?;
            if let Some(job) = self.state.ingestion.job(&submitted.job.job_id) {
                submitted.job = job.clone();
            }
        }
        Ok(submitted)
    }

    /// Run an ingestion tick at the current instant.
    pub fn ingestion_tick(&mut self) -> Result<Vec<Transition>, Error> {
        let capacity = self.load_capacity();
        let actor = self.config.system_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        Ok(self.state.ingestion.tick(&mut cx, &capacity)?)
    }

    fn kick_ingestion(&mut self) -> Result<(), Error> {
        if self.state.ingestion.can_start(&self.load_capacity()) {
            self.ingestion_tick()?;
        }
        Ok(())
    }

    pub fn upsert_status(&mut self, status: DatasetStatus) -> Result<(), Error> {
        Ok(self.state.ingestion.upsert_status(status)?)
    }

    /// Scan the given statuses, or the tracked ones when `statuses` is
    /// `None`.
    pub fn watchdog_scan(
        &self,
        statuses: Option<&[DatasetStatus]>,
        thresholds: Option<&Thresholds>,
    ) -> Result<Vec<Finding>, Error> {
        let thresholds = thresholds.unwrap_or(&self.config.watchdog);
        let tracked: Vec<DatasetStatus>;
        let statuses = match statuses {
            Some(s) => s,
            None => {
                tracked = self.state.ingestion.statuses().cloned().collect();
                &tracked
            }
        };
        Ok(watchdog_scan(statuses, self.state.clock, thresholds)?)
    }

    // Slots.

    pub fn slots_init(&mut self, total: u64) -> Result<(), Error> {
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        self.state.slots.init(&mut cx, total)?;
        self.kick_ingestion()
    }

    pub fn carve_dedicated(&mut self, name: &str, slots: u64, project: &str) -> Result<(), Error> {
        self.require_project(project)?;
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        self.state.slots.carve_dedicated(&mut cx, name, slots, project)?;
        self.state.cloud.create_reservation_node(name, self.state.clock);
        self.kick_ingestion()
    }

    pub fn release_dedicated(&mut self, name: &str) -> Result<Vec<Transition>, Error> {
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        let t = self.state.slots.release_dedicated(&mut cx, name)?;
        self.state.cloud.remove_reservation_node(name);
        self.kick_ingestion()?;
        Ok(t)
    }

    pub fn purchase_slots(&mut self, extra: u64) -> Result<Vec<Transition>, Error> {
        let actor = self.config.automation_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        let t = self.state.slots.purchase_slots(&mut cx, extra)?;
        self.kick_ingestion()?;
        Ok(t)
    }

    pub fn schedule(&mut self, actor: &str, req: SlotRequest) -> Result<Placement, Error> {
        self.require_project(&req.project)?;
        let mut cx = Ctx::new(&mut *self.audit, actor, self.state.clock);
        Ok(self.state.slots.schedule(&mut cx, req)?)
    }

    pub fn complete_job(&mut self, job_id: &str, result: JobResult) -> Result<Vec<Transition>, Error> {
        let actor = self.config.system_principal.clone();
        let mut cx = Ctx::new(&mut *self.audit, &actor, self.state.clock);
        Ok(self.state.slots.complete(&mut cx, job_id, result)?)
    }

    pub fn slot_status(&self) -> PoolStatus {
        self.state.slots.status()
    }

    // Observability.

    pub fn info_schema_query(&self, scope: &Scope, filter: &JobFilter) -> Result<Vec<JobStatsRow>, Error> {
        Ok(info_schema::info_schema_query(
            &self.state.cloud,
            &self.state.slots,
            &self.state.ingestion,
            scope,
            filter,
        )?)
    }

    /// Append one point per series at the current instant. Returns the
    /// number of points appended (zero if already polled at this instant).
    pub fn collector_poll(&mut self) -> usize {
        let rows = info_schema::job_rows(&self.state.slots, &self.state.ingestion);
        let samples = aggregate(&rows, &self.state.slots.status(), self.state.cloud.warnings().len());
        self.state.metrics.record(self.state.clock, samples)
    }

    pub fn evaluate_alerts(&mut self) -> Vec<Firing> {
        self.state.alerting.evaluate(
            &self.config.alert_rules,
            &self.state.metrics,
            self.state.clock,
            self.config.alert_cooldown,
        )
    }

    pub fn audit_query(&self, filter: &AuditFilter) -> Vec<AuditEvent> {
        self.audit.query(filter)
    }

    // Virtual clock.

    fn next_poll(&self, after: Timestamp) -> Timestamp {
        let p = self.config.poll_interval.0;
        Timestamp((after.0 / p + 1) * p)
    }

    /// Move the clock forward by `delta`, stopping at every instant where
    /// something falls due. At each instant: quota windows roll over, keys
    /// rotate, jobs complete and start, and on poll boundaries the
    /// collector and alerts run.
    pub fn advance_clock(&mut self, delta: Duration) -> Result<AdvanceReport, Error> {
        let target = self.state.clock + delta;
        let mut report = AdvanceReport {
            now: self.state.clock,
            ..Default::default()
        };
        while self.state.clock < target {
            let now = self.state.clock;
            let next = [
                self.state.identity.next_due(now),
                self.state.slots.next_due(),
                self.state.ingestion.next_due(),
                Some(self.next_poll(now)),
            ]
            .into_iter()
            .flatten()
            .filter(|t| *t > now)
            .min()
            .unwrap_or(target)
            .min(target);
            self.run_instant(next, &mut report)?;
        }
        report.now = self.state.clock;
        Ok(report)
    }

    pub fn advance_to(&mut self, t: Timestamp) -> Result<AdvanceReport, Error> {
        self.advance_clock(t.since(self.state.clock))
    }

    fn run_instant(&mut self, t: Timestamp, report: &mut AdvanceReport) -> Result<(), Error> {
        self.state.clock = t;
        self.state.cloud.roll_over(t);
        let actor = self.config.system_principal.clone();
        {
            let mut cx = Ctx::new(&mut *self.audit, &actor, t);
            report.rotations += self.state.identity.run_due(&mut cx, &mut *self.vault)?;
            report.transitions += self.state.slots.run_due(&mut cx)?.len();
        }
        report.transitions += self.ingestion_tick()?.len();
        if t.0.is_multiple_of(self.config.poll_interval.0) {
            if self.collector_poll() > 0 {
                report.polls += 1;
            }
            report.firings.extend(self.evaluate_alerts());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observability::audit::AuditLog;
    use crate::observability::metrics::{Dims, MetricName};
    use crate::slots::JobKind;

    fn plane() -> ControlPlane {
        ControlPlane::new(PlatformConfig::default(), Box::new(AuditLog::new())).unwrap()
    }

    #[test]
    fn zero_advance_has_no_effect() {
        let mut cp = plane();
        cp.reconcile(&[TenantSpec::user("helen")]).unwrap();
        let before = cp.state().clone();
        let events = cp.audit().events().len();
        cp.advance_clock(Duration(0)).unwrap();
        assert_eq!(cp.state(), &before);
        assert_eq!(cp.audit().events().len(), events);
    }

    #[test]
    fn one_poll_interval_one_poll() {
        let mut cp = plane();
        let r = cp.advance_clock(Duration(60)).unwrap();
        assert_eq!(r.polls, 1);
        let pts = cp.metrics().points(MetricName::CurrentTotalJobs, &Dims::new());
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].value, 0);
        assert_eq!(cp.now(), Timestamp(60));
    }

    #[test]
    fn thirty_days_four_rotations() {
        let mut cp = plane();
        cp.reconcile(&[TenantSpec::user("helen")]).unwrap();
        let r = cp.advance_clock(Duration::days(30)).unwrap();
        assert_eq!(r.rotations, 4);
        assert_eq!(cp.identity().keys("helen@gserviceaccount.com").len(), 5);
    }

    #[test]
    fn split_advance_matches_single_advance() {
        let setup = || {
            let mut cp = plane();
            cp.reconcile(&[TenantSpec::user("helen")]).unwrap();
            cp.schedule(
                "helen@gserviceaccount.com",
                SlotRequest::new("q1", "twitter-helen-bq-project", 500, JobKind::Query).lasting(Duration(1234)),
            )
            .unwrap();
            cp
        };
        let mut a = setup();
        a.advance_clock(Duration::days(9)).unwrap();
        let mut b = setup();
        for step in [1, 59, 3600, 7 * 86_400, 86_400 * 2 - 3660] {
            b.advance_clock(Duration(step)).unwrap();
        }
        assert_eq!(a.now(), b.now());
        assert_eq!(a.state(), b.state());
        assert_eq!(a.audit().events(), b.audit().events());
    }

    #[test]
    fn dry_run_does_not_mutate() {
        let cp = plane();
        let r = cp.reconcile_dry_run(&[TenantSpec::user("helen")]).unwrap();
        assert_eq!(r.created.len(), 1);
        assert!(cp.audit().events().is_empty());
        assert!(!cp.cloud().exists(&ResourceId::project("twitter-helen-bq-project")));
    }

    #[test]
    fn schedule_requires_known_project() {
        let mut cp = plane();
        assert_eq!(
            cp.schedule("x", SlotRequest::new("j", "nope", 1, JobKind::Query)),
            Err(Error::UnknownProject("nope".into()))
        );
    }
}
