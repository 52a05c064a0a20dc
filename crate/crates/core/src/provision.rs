//! Declarative tenant provisioning.
//!
//! Every step is an `ensure`: it creates what is missing and leaves what
//! exists alone, so a reconcile run can be repeated or resumed after a
//! partial failure.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{is_project_id, AclBinding, CloudError, CloudSim, ResourceId, Role};
use crate::identity::{IdentityError, IdentityStore, KeyVault, PrincipalKind};
use crate::observability::audit::Ctx;
use crate::path::{bucket_name, is_identifier, NamespaceKind, PathError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TenantKind {
    ServiceAccountUser,
    LogCategory,
}

impl TenantKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            TenantKind::ServiceAccountUser => "service_account_user",
            TenantKind::LogCategory => "log_category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "user" | "service_account_user" => Some(TenantKind::ServiceAccountUser),
            "log" | "log_category" => Some(TenantKind::LogCategory),
            _ => None,
        }
    }

    fn namespace(self) -> NamespaceKind {
        match self {
            TenantKind::ServiceAccountUser => NamespaceKind::User,
            TenantKind::LogCategory => NamespaceKind::Log,
        }
    }
}

impl fmt::Display for TenantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TenantSpec {
    pub kind: TenantKind,
    pub name: String,
}

impl TenantSpec {
    pub fn user(name: impl Into<String>) -> Self {
        TenantSpec {
            kind: TenantKind::ServiceAccountUser,
            name: name.into(),
        }
    }

    pub fn log(name: impl Into<String>) -> Self {
        TenantSpec {
            kind: TenantKind::LogCategory,
            name: name.into(),
        }
    }
}

impl fmt::Display for TenantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TenantParseError {
    pub line: usize,
    pub message: String,
}

/// Parse a tenant list: one `kind name` pair per line, `#` starts a comment.
pub fn parse_tenants(text: &str) -> Result<Vec<TenantSpec>, TenantParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| TenantParseError {
            line: i + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(kind), Some(name), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `kind name`, got `{line}`")));
        };
        let kind = TenantKind::parse(kind).ok_or_else(|| err(format!("unknown tenant kind `{kind}`")))?;
        if !is_identifier(name) {
            return Err(err(format!("invalid tenant name `{name}`")));
        }
        out.push(TenantSpec {
            kind,
            name: name.to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamingPolicy {
    pub user_project_template: String,
    pub log_project_template: String,
    pub central_logs_project: String,
    pub gcs_project: String,
    pub load_project: String,
    pub storage_label: (String, String),
    /// Shadow account that owns all log-category data.
    pub replication_account: String,
}

impl Default for NamingPolicy {
    fn default() -> Self {
        NamingPolicy {
            user_project_template: "twitter-{name}-bq-project".into(),
            log_project_template: "twitter-{name}-bql-project".into(),
            central_logs_project: "twitter-logs-bq-project".into(),
            gcs_project: "twitter-gcs-project".into(),
            load_project: "twitter-gcs-to-bq-project".into(),
            storage_label: ("bigbird-storage".into(), "true".into()),
            replication_account: "data-replicator".into(),
        }
    }
}

pub const USER_DATASET: &str = "user";
pub const LOGS_DATASET: &str = "logs";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("{field}: template must contain `{{name}}` exactly once")]
    Placeholder { field: &'static str },
    #[error("{field}: `{value}` does not render to a valid project id")]
    InvalidProject { field: &'static str, value: String },
    #[error("user and log project templates must differ")]
    TemplatesCollide,
    #[error("storage label `{0}` is not a valid label")]
    InvalidLabel(String),
    #[error("replication account `{0}` is not a valid name")]
    InvalidAccount(String),
}

fn is_label_part(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 63
        && s.bytes()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == b'-' || c == b'_')
}

impl NamingPolicy {
    pub fn render(template: &str, name: &str) -> String {
        template.replace("{name}", name)
    }

    pub fn user_project(&self, name: &str) -> String {
        Self::render(&self.user_project_template, name)
    }

    pub fn log_project(&self, name: &str) -> String {
        Self::render(&self.log_project_template, name)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        for (field, t) in [
            ("user_project_template", &self.user_project_template),
            ("log_project_template", &self.log_project_template),
        ] {
            if t.matches("{name}").count() != 1 {
                return Err(PolicyError::Placeholder { field });
            }
            let sample = Self::render(t, "a");
            if !is_project_id(&sample) {
                return Err(PolicyError::InvalidProject {
                    field,
                    value: t.clone(),
                });
            }
        }
        if self.user_project_template == self.log_project_template {
            return Err(PolicyError::TemplatesCollide);
        }
        for (field, p) in [
            ("central_logs_project", &self.central_logs_project),
            ("gcs_project", &self.gcs_project),
            ("load_project", &self.load_project),
        ] {
            if !is_project_id(p) {
                return Err(PolicyError::InvalidProject {
                    field,
                    value: p.clone(),
                });
            }
        }
        let (k, v) = &self.storage_label;
        if !is_label_part(k) || !(v.is_empty() || is_label_part(v)) {
            return Err(PolicyError::InvalidLabel(format!("{k}={v}")));
        }
        if !is_identifier(&self.replication_account) {
            return Err(PolicyError::InvalidAccount(self.replication_account.clone()));
        }
        Ok(())
    }

    fn label_map(&self) -> BTreeMap<String, String> {
        BTreeMap::from([self.storage_label.clone()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvisionError {
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("project name {project} for {tenant} collides with another tenant")]
    NameCollision { tenant: String, project: String },
    #[error("duplicate tenant {0}")]
    Duplicate(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl ProvisionError {
    pub fn is_audit_failure(&self) -> bool {
        matches!(
            self,
            ProvisionError::Cloud(CloudError::Audit(_))
                | ProvisionError::Identity(IdentityError::Audit(_))
                | ProvisionError::Identity(IdentityError::Cloud(CloudError::Audit(_)))
        )
    }
}

/// Items touched by one tenant or the system setup.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Items {
    pub created: Vec<String>,
    pub unchanged: Vec<String>,
}

impl Items {
    fn note(&mut self, created: bool, item: String) {
        if created {
            self.created.push(item);
        } else {
            self.unchanged.push(item);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantEntry {
    pub tenant: TenantSpec,
    pub items: Items,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedEntry {
    pub tenant: TenantSpec,
    pub error: String,
    /// Progress made before the failure.
    pub items: Items,
}

/// Tenants partitioned by outcome. A tenant is `created` when the run
/// created at least one of its items.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconcileReport {
    pub created: Vec<TenantEntry>,
    pub unchanged: Vec<TenantEntry>,
    pub failed: Vec<FailedEntry>,
    /// Shared projects and datasets.
    pub system: Items,
}

impl ReconcileReport {
    /// `CREATED|UNCHANGED|FAILED <item>` lines, system items first.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |items: &Items| {
            out.extend(items.created.iter().map(|i| format!("CREATED {i}")));
            out.extend(items.unchanged.iter().map(|i| format!("UNCHANGED {i}")));
        };
        push(&self.system);
        for e in self.created.iter().chain(&self.unchanged) {
            push(&e.items);
        }
        for f in &self.failed {
            out.extend(f.items.created.iter().map(|i| format!("CREATED {i}")));
            out.push(format!("FAILED {} {}", f.tenant, f.error));
        }
        out
    }

    pub fn tenant_count(&self) -> usize {
        self.created.len() + self.unchanged.len() + self.failed.len()
    }
}

fn acl_item(resource: &ResourceId, role: Role, principal: &str) -> String {
    format!("acl:{resource}:{role}:{principal}")
}

/// Mutable view of the state the provisioner works on.
pub struct Provisioner<'a> {
    pub cloud: &'a mut CloudSim,
    pub identity: &'a mut IdentityStore,
    pub vault: &'a mut dyn KeyVault,
    pub policy: &'a NamingPolicy,
    pub domain_suffix: &'a str,
}

impl Provisioner<'_> {
    fn ensure_project(
        &mut self,
        cx: &mut Ctx<'_>,
        items: &mut Items,
        project: &str,
        labeled: bool,
    ) -> Result<ResourceId, ProvisionError> {
        let id = ResourceId::project(project);
        let labels = if labeled {
            self.policy.label_map()
        } else {
            BTreeMap::new()
        };
        if self.cloud.exists(&id) {
            items.note(false, id.to_string());
            if labeled {
                let changed = self.cloud.apply_labels(cx, &id, &labels)?;
                items.note(changed, format!("label:{id}"));
            }
        } else {
            self.cloud.create_project(cx, project, labels)?;
            items.note(true, id.to_string());
            if labeled {
                items.note(true, format!("label:{id}"));
            }
        }
        Ok(id)
    }

    fn ensure_dataset(
        &mut self,
        cx: &mut Ctx<'_>,
        items: &mut Items,
        project: &str,
        dataset: &str,
    ) -> Result<ResourceId, ProvisionError> {
        let id = ResourceId::dataset(project, dataset);
        let created = !self.cloud.exists(&id);
        if created {
            self.cloud.create_dataset(cx, project, dataset)?;
        }
        items.note(created, id.to_string());
        Ok(id)
    }

    fn ensure_grant(
        &mut self,
        cx: &mut Ctx<'_>,
        items: &mut Items,
        resource: &ResourceId,
        principal: &str,
        role: Role,
    ) -> Result<(), ProvisionError> {
        let created = self.cloud.grant(cx, resource, principal, role)?;
        items.note(created, acl_item(resource, role, principal));
        Ok(())
    }

    fn ensure_group(
        &mut self,
        cx: &mut Ctx<'_>,
        items: &mut Items,
        subject: &ResourceId,
    ) -> Result<(), ProvisionError> {
        let (group, created) = self.identity.ensure_reader_group(cx, self.cloud, subject)?;
        items.note(created, format!("group:{}", group.group_email));
        items.note(created, acl_item(subject, Role::Reader, &group.group_email));
        Ok(())
    }

    /// Shared projects every tenant depends on.
    pub fn ensure_system(&mut self, cx: &mut Ctx<'_>) -> Result<Items, ProvisionError> {
        let mut items = Items::default();
        let p = self.policy;
        self.ensure_project(cx, &mut items, &p.gcs_project, true)?;
        self.ensure_project(cx, &mut items, &p.load_project, false)?;
        self.ensure_project(cx, &mut items, &p.central_logs_project, true)?;
        self.ensure_dataset(cx, &mut items, &p.central_logs_project, LOGS_DATASET)?;
        Ok(items)
    }

    /// Shadow account of the data owner for `tenant`.
    pub fn owner_account(&self, tenant: &TenantSpec) -> String {
        let name = match tenant.kind {
            TenantKind::ServiceAccountUser => &tenant.name,
            TenantKind::LogCategory => &self.policy.replication_account,
        };
        self.identity.config().shadow_email(name)
    }

    pub fn bucket_for(&self, tenant: &TenantSpec) -> Result<String, PathError> {
        bucket_name(tenant.kind.namespace(), &tenant.name, self.domain_suffix)
    }

    /// Identity, bucket, bucket owner and bucket reader group. Progress made
    /// before an error is kept and reported alongside it.
    pub fn precondition_items(
        &mut self,
        cx: &mut Ctx<'_>,
        tenant: &TenantSpec,
    ) -> Result<Items, (Items, ProvisionError)> {
        let mut items = Items::default();
        match self.precondition_inner(cx, tenant, &mut items) {
            Ok(()) => Ok(items),
            Err(e) => Err((items, e)),
        }
    }

    fn precondition_inner(
        &mut self,
        cx: &mut Ctx<'_>,
        tenant: &TenantSpec,
        items: &mut Items,
    ) -> Result<(), ProvisionError> {
        let (account, kind) = match tenant.kind {
            TenantKind::ServiceAccountUser => (tenant.name.clone(), PrincipalKind::ServiceAccountUser),
            TenantKind::LogCategory => (
                self.policy.replication_account.clone(),
                PrincipalKind::ReplicationService,
            ),
        };
        let (ident, created) = self
            .identity
            .ensure_shadow_account(cx, &mut *self.vault, &account, kind)?;
        items.note(created, format!("identity:{}", ident.shadow_email));

        let bucket = self.bucket_for(tenant)?;
        let bucket_id = ResourceId::bucket(&bucket);
        let created = !self.cloud.exists(&bucket_id);
        if created {
            self.cloud.create_bucket(cx, &bucket, &self.policy.gcs_project)?;
        }
        items.note(created, bucket_id.to_string());
        self.ensure_grant(cx, items, &bucket_id, &ident.shadow_email, Role::Owner)?;
        self.ensure_group(cx, items, &bucket_id)?;
        Ok(())
    }

    /// Run the precondition, reporting only success.
    pub fn precondition(&mut self, cx: &mut Ctx<'_>, tenant: &TenantSpec) -> bool {
        self.precondition_items(cx, tenant).is_ok()
    }

    /// Storage project, `user` dataset, owner binding and reader group.
    pub fn provision_user(&mut self, cx: &mut Ctx<'_>, tenant: &TenantSpec, items: &mut Items) -> Result<(), ProvisionError> {
        let project = self.policy.user_project(&tenant.name);
        self.ensure_project(cx, items, &project, true)?;
        let ds = self.ensure_dataset(cx, items, &project, USER_DATASET)?;
        let owner = self.owner_account(tenant);
        self.ensure_grant(cx, items, &ds, &owner, Role::Owner)?;
        self.ensure_group(cx, items, &ds)?;
        Ok(())
    }

    /// bql project and category dataset owned by the replication account,
    /// plus the central view over it. Dataset comes before view so the view
    /// always has a live backing dataset.
    pub fn provision_log_category(
        &mut self,
        cx: &mut Ctx<'_>,
        tenant: &TenantSpec,
        items: &mut Items,
    ) -> Result<(), ProvisionError> {
        let project = self.policy.log_project(&tenant.name);
        self.ensure_project(cx, items, &project, true)?;
        let ds = self.ensure_dataset(cx, items, &project, &tenant.name)?;
        let owner = self.owner_account(tenant);
        self.ensure_grant(cx, items, &ds, &owner, Role::Owner)?;
        self.ensure_group(cx, items, &ds)?;

        let central = self.policy.central_logs_project.clone();
        let view = ResourceId::view(&central, LOGS_DATASET, &tenant.name);
        let created = !self.cloud.exists(&view);
        if created {
            self.cloud
                .create_view(cx, &central, LOGS_DATASET, &tenant.name, &ds, true)?;
        }
        items.note(created, view.to_string());
        self.ensure_group(cx, items, &view)?;
        Ok(())
    }

    fn provision_tenant(
        &mut self,
        cx: &mut Ctx<'_>,
        tenant: &TenantSpec,
    ) -> Result<Items, (Items, ProvisionError)> {
        let mut items = match self.precondition_items(cx, tenant) {
            Ok(items) => items,
            Err((items, e)) if e.is_audit_failure() => return Err((items, e)),
            Err((items, e)) => return Err((items, ProvisionError::Precondition(e.to_string()))),
        };
        let result = match tenant.kind {
            TenantKind::ServiceAccountUser => self.provision_user(cx, tenant, &mut items),
            TenantKind::LogCategory => self.provision_log_category(cx, tenant, &mut items),
        };
        match result {
            Ok(()) => Ok(items),
            Err(e) => Err((items, e)),
        }
    }

    /// Provision every tenant, continuing past individual failures. An audit
    /// sink failure aborts the run.
    pub fn reconcile(&mut self, cx: &mut Ctx<'_>, specs: &[TenantSpec]) -> Result<ReconcileReport, ProvisionError> {
        let mut report = ReconcileReport::default();
        if specs.is_empty() {
            return Ok(report);
        }
        report.system = self.ensure_system(cx)?;
        let mut seen = BTreeSet::new();
        let mut projects: BTreeMap<String, &TenantSpec> = BTreeMap::new();
        for t in specs {
            let fail = |error: String| FailedEntry {
                tenant: t.clone(),
                error,
                items: Items::default(),
            };
            if !seen.insert(t) {
                report.failed.push(fail(ProvisionError::Duplicate(t.to_string()).to_string()));
                continue;
            }
            let project = match t.kind {
                TenantKind::ServiceAccountUser => self.policy.user_project(&t.name),
                TenantKind::LogCategory => self.policy.log_project(&t.name),
            };
            let system = [
                &self.policy.gcs_project,
                &self.policy.load_project,
                &self.policy.central_logs_project,
            ];
            if projects.contains_key(&project) || system.contains(&&project) {
                let e = ProvisionError::NameCollision {
                    tenant: t.to_string(),
                    project,
                };
                report.failed.push(fail(e.to_string()));
                continue;
            }
            projects.insert(project, t);
            match self.provision_tenant(cx, t) {
                Ok(items) if items.created.is_empty() => report.unchanged.push(TenantEntry {
                    tenant: t.clone(),
                    items,
                }),
                Ok(items) => report.created.push(TenantEntry {
                    tenant: t.clone(),
                    items,
                }),
                Err((_, e)) if e.is_audit_failure() => return Err(e),
                Err((items, e)) => report.failed.push(FailedEntry {
                    tenant: t.clone(),
                    error: e.to_string(),
                    items,
                }),
            }
        }
        Ok(report)
    }
}

/// The bindings a successful reconcile of `specs` installs, and nothing
/// else.
pub fn expected_bindings(
    specs: &[TenantSpec],
    policy: &NamingPolicy,
    identity: &crate::identity::IdentityConfig,
    domain_suffix: &str,
) -> Result<BTreeSet<AclBinding>, PathError> {
    let mut out = BTreeSet::new();
    let mut add = |resource: ResourceId, principal: String, role: Role| {
        out.insert(AclBinding {
            resource,
            principal,
            role,
        });
    };
    for t in specs {
        let owner_name = match t.kind {
            TenantKind::ServiceAccountUser => &t.name,
            TenantKind::LogCategory => &policy.replication_account,
        };
        let owner = identity.shadow_email(owner_name);
        let bucket = ResourceId::bucket(&bucket_name(t.kind.namespace(), &t.name, domain_suffix)?);
        add(bucket.clone(), owner.clone(), Role::Owner);
        add(bucket.clone(), identity.group_email(&bucket), Role::Reader);
        let ds = match t.kind {
            TenantKind::ServiceAccountUser => ResourceId::dataset(&policy.user_project(&t.name), USER_DATASET),
            TenantKind::LogCategory => ResourceId::dataset(&policy.log_project(&t.name), &t.name),
        };
        add(ds.clone(), owner, Role::Owner);
        add(ds.clone(), identity.group_email(&ds), Role::Reader);
        if t.kind == TenantKind::LogCategory {
            let view = ResourceId::view(&policy.central_logs_project, LOGS_DATASET, &t.name);
            add(view.clone(), identity.group_email(&view), Role::Reader);
        }
    }
    Ok(out)
}
