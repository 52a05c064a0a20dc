//! In-process simulated cloud provider.
//!
//! One organization roots a tree of folders and projects; projects hold
//! buckets and datasets, datasets hold tables and views. Identifiers are
//! hierarchical strings (`projects/p/datasets/d/tables/t`), so a subtree is a
//! key prefix. Bindings attach `(principal, role)` pairs to nodes and are
//! inherited downward.

pub mod access;
pub mod quota;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observability::audit::{detail, AuditAction, AuditError, AuditOutcome, Ctx};
use crate::time::Timestamp;

pub use access::{AccessAction, AclBinding, Decision, GroupDirectory, NoGroups, Role};
pub use quota::{
    DegradationWarning, QuotaBehavior, QuotaExceeded, QuotaLedger, QuotaName, QuotaRule,
    QuotaScopeKind, QuotaTable, QuotaWindow,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(String);

impl ResourceId {
    pub const ORGANIZATION: &'static str = "organization";

    pub fn organization() -> Self {
        ResourceId(Self::ORGANIZATION.into())
    }

    pub fn folder(name: &str) -> Self {
        ResourceId(format!("folders/{name}"))
    }

    pub fn project(project: &str) -> Self {
        ResourceId(format!("projects/{project}"))
    }

    pub fn bucket(name: &str) -> Self {
        ResourceId(format!("buckets/{name}"))
    }

    pub fn dataset(project: &str, dataset: &str) -> Self {
        ResourceId(format!("projects/{project}/datasets/{dataset}"))
    }

    pub fn table(project: &str, dataset: &str, table: &str) -> Self {
        ResourceId(format!("projects/{project}/datasets/{dataset}/tables/{table}"))
    }

    pub fn view(project: &str, dataset: &str, view: &str) -> Self {
        ResourceId(format!("projects/{project}/datasets/{dataset}/views/{view}"))
    }

    pub fn reservation(name: &str) -> Self {
        ResourceId(format!("reservations/{name}"))
    }

    /// Wrap an already-formatted identifier.
    pub fn from_raw(id: impl Into<String>) -> Self {
        ResourceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Last path segment, i.e. the node's own name.
    pub fn name(&self) -> &str {
        self.0.rsplit('/').next().unwrap_or(&self.0)
    }

    /// Project component for ids under `projects/`.
    pub fn project_name(&self) -> Option<&str> {
        self.0.strip_prefix("projects/")?.split('/').next()
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Organization,
    Folder,
    Project,
    Bucket,
    Dataset,
    Table,
    View,
    Reservation,
}

impl ResourceKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Organization => "organization",
            ResourceKind::Folder => "folder",
            ResourceKind::Project => "project",
            ResourceKind::Bucket => "bucket",
            ResourceKind::Dataset => "dataset",
            ResourceKind::Table => "table",
            ResourceKind::View => "view",
            ResourceKind::Reservation => "reservation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub column_count: u64,
    pub partitioned: bool,
    pub row_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewMeta {
    pub backing_dataset: ResourceId,
    pub authorized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum NodeMeta {
    None,
    Table(TableMeta),
    View(ViewMeta),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceNode {
    pub id: ResourceId,
    pub kind: ResourceKind,
    pub parent: Option<ResourceId>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    pub created_at: Timestamp,
    pub meta: NodeMeta,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildCounts {
    pub datasets: u64,
    pub tables: u64,
    pub views: u64,
    pub authorized_views: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableOpKind {
    DataWrite,
    Metadata,
}

/// How the operation fared downstream. Quota usage is charged either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpOutcome {
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiCallKind {
    ReadRows,
    OtherStorageApi,
    StreamingInsert,
}

impl ApiCallKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "read_rows" | "read-rows" => Some(ApiCallKind::ReadRows),
            "other_storage_api" | "storage-api" => Some(ApiCallKind::OtherStorageApi),
            "streaming_insert" | "streaming" => Some(ApiCallKind::StreamingInsert),
            _ => None,
        }
    }
}

/// Operations that can be made to fail once, for fault-injection tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FaultOp {
    CreateProject,
    CreateBucket,
    CreateDataset,
    CreateView,
    Grant,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CloudError {
    #[error("{0} already exists")]
    AlreadyExists(ResourceId),
    #[error("parent {0} does not exist")]
    UnknownParent(ResourceId),
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error("{id} is not a {expected}")]
    WrongKind {
        id: ResourceId,
        expected: &'static str,
    },
    #[error("invalid {kind} name `{name}`")]
    InvalidName { kind: &'static str, name: String },
    #[error("{0} is referenced by a view")]
    InUse(ResourceId),
    #[error(transparent)]
    QuotaExceeded(#[from] QuotaExceeded),
    #[error("injected fault on {0}")]
    Injected(String),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

/// Result of a create operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Created {
    pub id: ResourceId,
    pub warning: Option<DegradationWarning>,
}

/// Lowercase letters, digits and hyphens, starting with a letter.
pub fn is_project_id(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty()
        && b.len() <= 100
        && b[0].is_ascii_lowercase()
        && b[b.len() - 1] != b'-'
        && b
            .iter()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'-')
}

fn is_bucket_name(s: &str) -> bool {
    (3..=222).contains(&s.len())
        && s.split('.').all(|c| !c.is_empty() && c.len() <= 63)
        && s.bytes().all(|c| {
            c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, b'-' | b'.' | b'_')
        })
}

fn is_object_name(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 1024
        && s
            .bytes()
            .all(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-')
}

fn check_name(kind: &'static str, name: &str, ok: bool) -> Result<(), CloudError> {
    if ok {
        Ok(())
    } else {
        Err(CloudError::InvalidName {
            kind,
            name: name.to_string(),
        })
    }
}

/// The simulated provider's full state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudSim {
    nodes: BTreeMap<ResourceId, ResourceNode>,
    bindings: BTreeMap<ResourceId, BTreeSet<(String, Role)>>,
    child_counts: BTreeMap<ResourceId, ChildCounts>,
    quotas: QuotaTable,
    ledger: QuotaLedger,
    warnings: Vec<DegradationWarning>,
    #[serde(skip)]
    faults: BTreeSet<(FaultOp, String)>,
}

impl CloudSim {
    pub fn new(quotas: QuotaTable, now: Timestamp) -> Self {
        let org = ResourceId::organization();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            org.clone(),
            ResourceNode {
                id: org,
                kind: ResourceKind::Organization,
                parent: None,
                labels: BTreeMap::new(),
                created_at: now,
                meta: NodeMeta::None,
            },
        );
        CloudSim {
            nodes,
            bindings: BTreeMap::new(),
            child_counts: BTreeMap::new(),
            quotas,
            ledger: QuotaLedger::new(),
            warnings: Vec::new(),
            faults: BTreeSet::new(),
        }
    }

    pub fn quotas(&self) -> &QuotaTable {
        &self.quotas
    }

    pub fn set_quotas(&mut self, quotas: QuotaTable) {
        self.quotas = quotas;
    }

    pub fn ledger(&self) -> &QuotaLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut QuotaLedger {
        &mut self.ledger
    }

    /// Quota table and ledger together, for callers charging windowed quotas.
    pub fn quota_parts(&mut self) -> (&QuotaTable, &mut QuotaLedger) {
        (&self.quotas, &mut self.ledger)
    }

    pub fn warnings(&self) -> &[DegradationWarning] {
        &self.warnings
    }

    pub fn roll_over(&mut self, now: Timestamp) {
        self.ledger.roll_over(&self.quotas, now);
    }

    pub fn get(&self, id: &ResourceId) -> Option<&ResourceNode> {
        self.nodes.get(id)
    }

    pub fn exists(&self, id: &ResourceId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ResourceNode> {
        self.nodes.values()
    }

    pub fn nodes_of_kind(&self, kind: ResourceKind) -> impl Iterator<Item = &ResourceNode> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }

    pub fn child_counts(&self, id: &ResourceId) -> ChildCounts {
        self.child_counts.get(id).copied().unwrap_or_default()
    }

    /// Make the next matching operation on `target` fail with `Injected`.
    pub fn inject_fault(&mut self, op: FaultOp, target: impl Into<String>) {
        self.faults.insert((op, target.into()));
    }

    fn take_fault(&mut self, op: FaultOp, target: &str) -> Result<(), CloudError> {
        if self.faults.remove(&(op, target.to_string())) {
            Err(CloudError::Injected(format!("{op:?} {target}")))
        } else {
            Ok(())
        }
    }

    fn require(&self, id: &ResourceId, kind: ResourceKind) -> Result<&ResourceNode, CloudError> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| CloudError::UnknownResource(id.clone()))?;
        if node.kind != kind {
            return Err(CloudError::WrongKind {
                id: id.clone(),
                expected: kind.as_str(),
            });
        }
        Ok(node)
    }

    fn require_parent(&self, id: &ResourceId, kind: ResourceKind) -> Result<(), CloudError> {
        match self.nodes.get(id) {
            Some(n) if n.kind == kind => Ok(()),
            Some(_) => Err(CloudError::WrongKind {
                id: id.clone(),
                expected: kind.as_str(),
            }),
            None => Err(CloudError::UnknownParent(id.clone())),
        }
    }

    fn require_absent(&self, id: &ResourceId) -> Result<(), CloudError> {
        if self.nodes.contains_key(id) {
            Err(CloudError::AlreadyExists(id.clone()))
        } else {
            Ok(())
        }
    }

    fn insert(
        &mut self,
        id: ResourceId,
        kind: ResourceKind,
        parent: ResourceId,
        labels: BTreeMap<String, String>,
        now: Timestamp,
        meta: NodeMeta,
    ) {
        self.nodes.insert(
            id.clone(),
            ResourceNode {
                id,
                kind,
                parent: Some(parent),
                labels,
                created_at: now,
                meta,
            },
        );
    }

    pub fn create_folder(
        &mut self,
        cx: &mut Ctx<'_>,
        name: &str,
        parent: Option<&ResourceId>,
    ) -> Result<Created, CloudError> {
        check_name("folder", name, crate::path::is_identifier(name))?;
        let parent = parent.cloned().unwrap_or_else(ResourceId::organization);
        match self.nodes.get(&parent).map(|n| n.kind) {
            Some(ResourceKind::Organization | ResourceKind::Folder) => {}
            Some(_) => {
                return Err(CloudError::WrongKind {
                    id: parent,
                    expected: "folder",
                })
            }
            None => return Err(CloudError::UnknownParent(parent)),
        }
        let id = ResourceId::folder(name);
        self.require_absent(&id)?;
        cx.success(AuditAction::FolderCreate, id.as_str(), BTreeMap::new())?;
        self.insert(id.clone(), ResourceKind::Folder, parent, BTreeMap::new(), cx.now, NodeMeta::None);
        Ok(Created { id, warning: None })
    }

    pub fn create_project(
        &mut self,
        cx: &mut Ctx<'_>,
        project: &str,
        labels: BTreeMap<String, String>,
    ) -> Result<Created, CloudError> {
        self.create_project_in(cx, None, project, labels)
    }

    pub fn create_project_in(
        &mut self,
        cx: &mut Ctx<'_>,
        folder: Option<&ResourceId>,
        project: &str,
        labels: BTreeMap<String, String>,
    ) -> Result<Created, CloudError> {
        check_name("project", project, is_project_id(project))?;
        let parent = match folder {
            Some(f) => {
                self.require_parent(f, ResourceKind::Folder)?;
                f.clone()
            }
            None => ResourceId::organization(),
        };
        let id = ResourceId::project(project);
        self.require_absent(&id)?;
        self.take_fault(FaultOp::CreateProject, project)?;
        cx.success(AuditAction::ProjectCreate, id.as_str(), labels_detail(&labels))?;
        self.insert(id.clone(), ResourceKind::Project, parent, labels, cx.now, NodeMeta::None);
        Ok(Created { id, warning: None })
    }

    /// Merge labels into a node. Returns whether anything changed.
    pub fn apply_labels(
        &mut self,
        cx: &mut Ctx<'_>,
        id: &ResourceId,
        labels: &BTreeMap<String, String>,
    ) -> Result<bool, CloudError> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| CloudError::UnknownResource(id.clone()))?;
        if labels.iter().all(|(k, v)| node.labels.get(k) == Some(v)) {
            return Ok(false);
        }
        cx.success(AuditAction::MetadataUpdate, id.as_str(), labels_detail(labels))?;
        let node = self.nodes.get_mut(id).expect("checked above");
        node.labels
            .extend(labels.iter().map(|(k, v)| (k.clone(), v.clone())));
        Ok(true)
    }

    pub fn create_bucket(
        &mut self,
        cx: &mut Ctx<'_>,
        name: &str,
        project: &str,
    ) -> Result<Created, CloudError> {
        check_name("bucket", name, is_bucket_name(name))?;
        let parent = ResourceId::project(project);
        self.require_parent(&parent, ResourceKind::Project)?;
        let id = ResourceId::bucket(name);
        self.require_absent(&id)?;
        self.take_fault(FaultOp::CreateBucket, name)?;
        cx.success(AuditAction::BucketCreate, id.as_str(), detail([("project", project.to_string())]))?;
        self.insert(id.clone(), ResourceKind::Bucket, parent, BTreeMap::new(), cx.now, NodeMeta::None);
        Ok(Created { id, warning: None })
    }

    /// Crossing the per-project dataset count only warns.
    pub fn create_dataset(
        &mut self,
        cx: &mut Ctx<'_>,
        project: &str,
        name: &str,
    ) -> Result<Created, CloudError> {
        check_name("dataset", name, is_object_name(name))?;
        let parent = ResourceId::project(project);
        self.require_parent(&parent, ResourceKind::Project)?;
        let id = ResourceId::dataset(project, name);
        self.require_absent(&id)?;
        self.take_fault(FaultOp::CreateDataset, id.as_str())?;
        let count = self.child_counts(&parent).datasets + 1;
        let warning = self.quotas.check_level(
            QuotaName::DatasetsPerProject,
            parent.as_str(),
            count,
            cx.now,
        )?;
        cx.success(AuditAction::DatasetCreate, id.as_str(), BTreeMap::new())?;
        self.insert(id.clone(), ResourceKind::Dataset, parent.clone(), BTreeMap::new(), cx.now, NodeMeta::None);
        self.child_counts.entry(parent).or_default().datasets += 1;
        self.record_warning(&warning);
        Ok(Created { id, warning })
    }

    pub fn create_table(
        &mut self,
        cx: &mut Ctx<'_>,
        project: &str,
        dataset: &str,
        name: &str,
        column_count: u64,
        partitioned: bool,
    ) -> Result<Created, CloudError> {
        check_name("table", name, is_object_name(name))?;
        let parent = ResourceId::dataset(project, dataset);
        self.require_parent(&parent, ResourceKind::Dataset)?;
        let id = ResourceId::table(project, dataset, name);
        self.require_absent(&id)?;
        self.require_absent(&ResourceId::view(project, dataset, name))?;
        self.quotas
            .check_level(QuotaName::ColumnsPerTable, id.as_str(), column_count, cx.now)?;
        let count = self.child_counts(&parent).tables + 1;
        let warning =
            self.quotas
                .check_level(QuotaName::TablesPerDataset, parent.as_str(), count, cx.now)?;
        cx.success(
            AuditAction::TableCreate,
            id.as_str(),
            detail([
                ("columns", column_count.to_string()),
                ("partitioned", partitioned.to_string()),
            ]),
        )?;
        let meta = NodeMeta::Table(TableMeta {
            column_count,
            partitioned,
            row_count: 0,
        });
        self.insert(id.clone(), ResourceKind::Table, parent.clone(), BTreeMap::new(), cx.now, meta);
        self.child_counts.entry(parent).or_default().tables += 1;
        self.record_warning(&warning);
        Ok(Created { id, warning })
    }

    /// Change a table's schema width. Counts as a metadata operation.
    pub fn alter_table(
        &mut self,
        cx: &mut Ctx<'_>,
        table: &ResourceId,
        column_count: u64,
    ) -> Result<(), CloudError> {
        self.require(table, ResourceKind::Table)?;
        self.quotas
            .check_level(QuotaName::ColumnsPerTable, table.as_str(), column_count, cx.now)?;
        self.charge_table_op(table, TableOpKind::Metadata, cx.now)?;
        cx.success(
            AuditAction::MetadataUpdate,
            table.as_str(),
            detail([("columns", column_count.to_string())]),
        )?;
        self.commit_table_op(table, TableOpKind::Metadata, cx.now);
        if let Some(ResourceNode {
            meta: NodeMeta::Table(meta),
            ..
        }) = self.nodes.get_mut(table)
        {
            meta.column_count = column_count;
        }
        Ok(())
    }

    pub fn create_view(
        &mut self,
        cx: &mut Ctx<'_>,
        project: &str,
        dataset: &str,
        name: &str,
        backing: &ResourceId,
        authorized: bool,
    ) -> Result<Created, CloudError> {
        check_name("view", name, is_object_name(name))?;
        let parent = ResourceId::dataset(project, dataset);
        self.require_parent(&parent, ResourceKind::Dataset)?;
        self.require(backing, ResourceKind::Dataset)?;
        let id = ResourceId::view(project, dataset, name);
        self.require_absent(&id)?;
        self.require_absent(&ResourceId::table(project, dataset, name))?;
        self.take_fault(FaultOp::CreateView, id.as_str())?;
        if authorized {
            let count = self.child_counts(&parent).authorized_views + 1;
            self.quotas.check_level(
                QuotaName::AuthorizedViewsPerDataset,
                parent.as_str(),
                count,
                cx.now,
            )?;
        }
        cx.success(
            AuditAction::ViewCreate,
            id.as_str(),
            detail([
                ("backing", backing.to_string()),
                ("authorized", authorized.to_string()),
            ]),
        )?;
        let meta = NodeMeta::View(ViewMeta {
            backing_dataset: backing.clone(),
            authorized,
        });
        self.insert(id.clone(), ResourceKind::View, parent.clone(), BTreeMap::new(), cx.now, meta);
        let counts = self.child_counts.entry(parent).or_default();
        counts.views += 1;
        if authorized {
            counts.authorized_views += 1;
        }
        Ok(Created { id, warning: None })
    }

    /// Remove a dataset with its tables, views and all their bindings.
    pub fn delete_dataset(&mut self, cx: &mut Ctx<'_>, id: &ResourceId) -> Result<(), CloudError> {
        let parent = self
            .require(id, ResourceKind::Dataset)?
            .parent
            .clone()
            .expect("datasets have a parent");
        let prefix = format!("{id}/");
        let in_use = self.nodes.values().any(|n| {
            matches!(&n.meta, NodeMeta::View(v) if &v.backing_dataset == id)
                && !n.id.as_str().starts_with(&prefix)
        });
        if in_use {
            return Err(CloudError::InUse(id.clone()));
        }
        cx.success(AuditAction::DatasetDelete, id.as_str(), BTreeMap::new())?;
        let doomed: Vec<ResourceId> = core::iter::once(id.clone())
            .chain(
                self.nodes
                    .range(ResourceId(prefix.clone())..)
                    .map(|(k, _)| k)
                    .take_while(|k| k.as_str().starts_with(&prefix))
                    .cloned(),
            )
            .collect();
        for d in &doomed {
            self.nodes.remove(d);
            self.bindings.remove(d);
            self.child_counts.remove(d);
        }
        if let Some(c) = self.child_counts.get_mut(&parent) {
            c.datasets -= 1;
        }
        Ok(())
    }

    fn record_warning(&mut self, warning: &Option<DegradationWarning>) {
        if let Some(w) = warning {
            self.warnings.push(w.clone());
        }
    }

    fn charge_table_op(
        &self,
        table: &ResourceId,
        kind: TableOpKind,
        now: Timestamp,
    ) -> Result<(), CloudError> {
        self.ledger
            .check(self.quotas.rule(QuotaName::TableOpsPerDay), table.as_str(), now)?;
        if kind == TableOpKind::Metadata {
            self.ledger.check(
                self.quotas.rule(QuotaName::TableMetadataOpsPer10s),
                table.as_str(),
                now,
            )?;
        }
        Ok(())
    }

    fn commit_table_op(&mut self, table: &ResourceId, kind: TableOpKind, now: Timestamp) {
        self.ledger
            .consume(self.quotas.rule(QuotaName::TableOpsPerDay), table.as_str(), now);
        if kind == TableOpKind::Metadata {
            self.ledger.consume(
                self.quotas.rule(QuotaName::TableMetadataOpsPer10s),
                table.as_str(),
                now,
            );
        }
    }

    /// Charge one operation against a table's daily budget (and the metadata
    /// rate for metadata ops). A downstream failure still consumes quota.
    pub fn table_operation(
        &mut self,
        cx: &mut Ctx<'_>,
        table: &ResourceId,
        kind: TableOpKind,
        outcome: OpOutcome,
    ) -> Result<(), CloudError> {
        self.require(table, ResourceKind::Table)?;
        self.charge_table_op(table, kind, cx.now)?;
        let action = match kind {
            TableOpKind::DataWrite => AuditAction::DataWrite,
            TableOpKind::Metadata => AuditAction::MetadataUpdate,
        };
        let result = match outcome {
            OpOutcome::Succeeded => AuditOutcome::Success,
            OpOutcome::Failed => AuditOutcome::Failed,
        };
        let actor = cx.actor;
        cx.emit_as(actor, action, table.as_str(), result, BTreeMap::new())?;
        self.commit_table_op(table, kind, cx.now);
        Ok(())
    }

    /// Charge a storage/streaming API call made by `user` in `project`.
    pub fn record_api_call(
        &mut self,
        cx: &mut Ctx<'_>,
        user: &str,
        project: &str,
        kind: ApiCallKind,
    ) -> Result<(), CloudError> {
        let pid = ResourceId::project(project);
        self.require(&pid, ResourceKind::Project)?;
        let (quota, scope, action) = match kind {
            ApiCallKind::ReadRows => (
                QuotaName::ReadRowsPerMinute,
                format!("{user}|{pid}"),
                AuditAction::DataRead,
            ),
            ApiCallKind::OtherStorageApi => (
                QuotaName::StorageApiCallsPerMinute,
                format!("{user}|{pid}"),
                AuditAction::ApiCall,
            ),
            ApiCallKind::StreamingInsert => (
                QuotaName::StreamingRequestsPerSecond,
                pid.to_string(),
                AuditAction::DataWrite,
            ),
        };
        let rule = self.quotas.rule(quota);
        self.ledger.check(rule, &scope, cx.now)?;
        cx.emit_as(user, action, pid.as_str(), AuditOutcome::Success, BTreeMap::new())?;
        let rule = self.quotas.rule(quota);
        self.ledger.consume(rule, &scope, cx.now);
        Ok(())
    }

    /// Register a reservation node under the organization.
    pub fn create_reservation_node(&mut self, name: &str, now: Timestamp) -> ResourceId {
        let id = ResourceId::reservation(name);
        self.nodes.entry(id.clone()).or_insert_with(|| ResourceNode {
            id: id.clone(),
            kind: ResourceKind::Reservation,
            parent: Some(ResourceId::organization()),
            labels: BTreeMap::new(),
            created_at: now,
            meta: NodeMeta::None,
        });
        id
    }

    pub fn remove_reservation_node(&mut self, name: &str) {
        let id = ResourceId::reservation(name);
        self.nodes.remove(&id);
        self.bindings.remove(&id);
    }

    /// Install a binding. Duplicates coalesce; returns whether it was new.
    pub fn grant(
        &mut self,
        cx: &mut Ctx<'_>,
        resource: &ResourceId,
        principal: &str,
        role: Role,
    ) -> Result<bool, CloudError> {
        if !self.exists(resource) {
            return Err(CloudError::UnknownResource(resource.clone()));
        }
        let entry = (principal.to_string(), role);
        if self.bindings.get(resource).is_some_and(|b| b.contains(&entry)) {
            return Ok(false);
        }
        self.take_fault(FaultOp::Grant, &format!("{resource} {principal}"))?;
        cx.success(
            AuditAction::AclChange,
            resource.as_str(),
            detail([
                ("op", "grant".to_string()),
                ("principal", principal.to_string()),
                ("role", role.to_string()),
            ]),
        )?;
        self.bindings.entry(resource.clone()).or_default().insert(entry);
        Ok(true)
    }

    /// Install a binding whose audit event the caller has already emitted as
    /// part of a larger operation.
    pub(crate) fn bind_unaudited(&mut self, resource: &ResourceId, principal: &str, role: Role) {
        self.bindings
            .entry(resource.clone())
            .or_default()
            .insert((principal.to_string(), role));
    }

    pub fn revoke(
        &mut self,
        cx: &mut Ctx<'_>,
        resource: &ResourceId,
        principal: &str,
        role: Role,
    ) -> Result<bool, CloudError> {
        let entry = (principal.to_string(), role);
        if !self.bindings.get(resource).is_some_and(|b| b.contains(&entry)) {
            return Ok(false);
        }
        cx.success(
            AuditAction::AclChange,
            resource.as_str(),
            detail([
                ("op", "revoke".to_string()),
                ("principal", principal.to_string()),
                ("role", role.to_string()),
            ]),
        )?;
        let set = self.bindings.get_mut(resource).expect("checked above");
        set.remove(&entry);
        if set.is_empty() {
            self.bindings.remove(resource);
        }
        Ok(true)
    }

    pub fn bindings(&self) -> impl Iterator<Item = AclBinding> + '_ {
        self.bindings.iter().flat_map(|(r, set)| {
            set.iter().map(move |(p, role)| AclBinding {
                resource: r.clone(),
                principal: p.clone(),
                role: *role,
            })
        })
    }

    pub fn bindings_on(&self, resource: &ResourceId) -> impl Iterator<Item = (&str, Role)> {
        self.bindings
            .get(resource)
            .into_iter()
            .flat_map(|s| s.iter().map(|(p, r)| (p.as_str(), *r)))
    }

    /// The node itself followed by each ancestor up to the organization.
    pub fn ancestors<'a>(&'a self, id: &ResourceId) -> impl Iterator<Item = &'a ResourceId> + 'a {
        let start = self.nodes.get(id).map(|n| &n.id);
        core::iter::successors(start, move |cur| {
            self.nodes.get(*cur).and_then(|n| n.parent.as_ref())
        })
    }

    /// Pure evaluation: allow iff some binding on the resource or an
    /// ancestor names the principal (directly or through a group) with a
    /// role covering the action.
    pub fn evaluate_access(
        &self,
        principal: &str,
        resource: &ResourceId,
        action: AccessAction,
        groups: &dyn GroupDirectory,
    ) -> Result<Decision, CloudError> {
        if !self.exists(resource) {
            return Err(CloudError::UnknownResource(resource.clone()));
        }
        let allowed = self.ancestors(resource).any(|node| {
            self.bindings_on(node).any(|(who, role)| {
                role.covers(action) && (who == principal || groups.is_member(who, principal))
            })
        });
        Ok(if allowed { Decision::Allow } else { Decision::Deny })
    }

    /// Evaluate and audit an access check.
    pub fn check_access(
        &self,
        cx: &mut Ctx<'_>,
        principal: &str,
        resource: &ResourceId,
        action: AccessAction,
        groups: &dyn GroupDirectory,
    ) -> Result<Decision, CloudError> {
        let decision = self.evaluate_access(principal, resource, action, groups)?;
        let audit_action = match action {
            AccessAction::Read => AuditAction::DataRead,
            AccessAction::Write => AuditAction::DataWrite,
            AccessAction::Administer => AuditAction::AdminCheck,
        };
        match decision {
            Decision::Allow => {
                cx.emit_as(principal, audit_action, resource.as_str(), AuditOutcome::Success, BTreeMap::new())?;
            }
            Decision::Deny if cx.audit_denied => {
                cx.emit_as(principal, audit_action, resource.as_str(), AuditOutcome::Denied, BTreeMap::new())?;
            }
            Decision::Deny => {}
        }
        Ok(decision)
    }
}

fn labels_detail(labels: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    labels
        .iter()
        .map(|(k, v)| (format!("label.{k}"), v.clone()))
        .collect()
}
