//! Organization-wide append-only audit log.
//!
//! Every mutating control-plane operation validates first, then appends its
//! event, then applies the mutation. An operation whose append fails reports
//! the failure and leaves state untouched, so the log never misses an
//! acknowledged mutation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    DatasetCreate,
    DatasetDelete,
    TableCreate,
    DataRead,
    DataWrite,
    AclChange,
    KeyRotate,
    KeyRevoke,
    ProjectCreate,
    FolderCreate,
    BucketCreate,
    ViewCreate,
    IdentityCreate,
    GroupCreate,
    MetadataUpdate,
    ApiCall,
    AdminCheck,
    JobTransition,
    ReservationChange,
}

impl AuditAction {
    pub const ALL: [AuditAction; 19] = [
        AuditAction::DatasetCreate,
        AuditAction::DatasetDelete,
        AuditAction::TableCreate,
        AuditAction::DataRead,
        AuditAction::DataWrite,
        AuditAction::AclChange,
        AuditAction::KeyRotate,
        AuditAction::KeyRevoke,
        AuditAction::ProjectCreate,
        AuditAction::FolderCreate,
        AuditAction::BucketCreate,
        AuditAction::ViewCreate,
        AuditAction::IdentityCreate,
        AuditAction::GroupCreate,
        AuditAction::MetadataUpdate,
        AuditAction::ApiCall,
        AuditAction::AdminCheck,
        AuditAction::JobTransition,
        AuditAction::ReservationChange,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            AuditAction::DatasetCreate => "dataset_create",
            AuditAction::DatasetDelete => "dataset_delete",
            AuditAction::TableCreate => "table_create",
            AuditAction::DataRead => "data_read",
            AuditAction::DataWrite => "data_write",
            AuditAction::AclChange => "acl_change",
            AuditAction::KeyRotate => "key_rotate",
            AuditAction::KeyRevoke => "key_revoke",
            AuditAction::ProjectCreate => "project_create",
            AuditAction::FolderCreate => "folder_create",
            AuditAction::BucketCreate => "bucket_create",
            AuditAction::ViewCreate => "view_create",
            AuditAction::IdentityCreate => "identity_create",
            AuditAction::GroupCreate => "group_create",
            AuditAction::MetadataUpdate => "metadata_update",
            AuditAction::ApiCall => "api_call",
            AuditAction::AdminCheck => "admin_check",
            AuditAction::JobTransition => "job_transition",
            AuditAction::ReservationChange => "reservation_change",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for AuditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Success,
    Denied,
    Failed,
}

/// An event before the sink has assigned it a sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub timestamp: Timestamp,
    pub principal: String,
    pub action: AuditAction,
    pub resource: String,
    pub outcome: AuditOutcome,
    pub detail: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub sequence_number: u64,
    pub timestamp: Timestamp,
    pub principal: String,
    pub action: AuditAction,
    pub resource: String,
    pub outcome: AuditOutcome,
    #[serde(default)]
    pub detail: BTreeMap<String, String>,
}

impl AuditRecord {
    pub fn into_event(self, sequence_number: u64) -> AuditEvent {
        AuditEvent {
            sequence_number,
            timestamp: self.timestamp,
            principal: self.principal,
            action: self.action,
            resource: self.resource,
            outcome: self.outcome,
            detail: self.detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("audit sink unavailable: {0}")]
    SinkUnavailable(String),
}

/// Destination for audit events. Implementations assign dense sequence
/// numbers starting at 1 and must have durably stored the event before
/// `append` returns `Ok`.
pub trait AuditSink {
    fn append(&mut self, record: AuditRecord) -> Result<AuditEvent, AuditError>;

    /// All events appended so far, in sequence order.
    fn events(&self) -> &[AuditEvent];

    fn query(&self, filter: &AuditFilter) -> Vec<AuditEvent> {
        audit_query(self.events(), filter)
    }
}

/// In-memory sink. Can be switched unavailable to exercise failure paths.
#[derive(Debug, Default, Clone)]
pub struct AuditLog {
    events: Vec<AuditEvent>,
    unavailable: bool,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resume from previously persisted events. Sequence numbers must be
    /// dense from 1.
    pub fn from_events(events: Vec<AuditEvent>) -> Result<Self, AuditError> {
        check_dense(&events)?;
        Ok(AuditLog {
            events,
            unavailable: false,
        })
    }

    pub fn set_available(&mut self, available: bool) {
        self.unavailable = !available;
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Verify sequence numbers are exactly `1..=n`.
pub fn check_dense(events: &[AuditEvent]) -> Result<(), AuditError> {
    for (i, e) in events.iter().enumerate() {
        if e.sequence_number != i as u64 + 1 {
            return Err(AuditError::SinkUnavailable(alloc::format!(
                "sequence gap: expected {}, found {}",
                i + 1,
                e.sequence_number
            )));
        }
    }
    Ok(())
}

impl AuditSink for AuditLog {
    fn append(&mut self, record: AuditRecord) -> Result<AuditEvent, AuditError> {
        if self.unavailable {
            return Err(AuditError::SinkUnavailable("sink disabled".to_string()));
        }
        let event = record.into_event(self.events.len() as u64 + 1);
        self.events.push(event.clone());
        Ok(event)
    }

    fn events(&self) -> &[AuditEvent] {
        &self.events
    }
}

/// Accepts and drops everything; used for dry runs.
#[derive(Debug, Default)]
pub struct DiscardSink {
    next: u64,
}

impl AuditSink for DiscardSink {
    fn append(&mut self, record: AuditRecord) -> Result<AuditEvent, AuditError> {
        self.next += 1;
        Ok(record.into_event(self.next))
    }

    fn events(&self) -> &[AuditEvent] {
        &[]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    pub principal: Option<String>,
    pub action: Option<AuditAction>,
    /// Matches the resource itself and everything beneath it.
    pub resource_prefix: Option<String>,
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
}

impl AuditFilter {
    pub fn matches(&self, e: &AuditEvent) -> bool {
        self.principal.as_deref().is_none_or(|p| e.principal == p)
            && self.action.is_none_or(|a| e.action == a)
            && self
                .resource_prefix
                .as_deref()
                .is_none_or(|r| e.resource.starts_with(r))
            && self.from.is_none_or(|t| e.timestamp >= t)
            && self.to.is_none_or(|t| e.timestamp <= t)
    }
}

pub fn audit_query(events: &[AuditEvent], filter: &AuditFilter) -> Vec<AuditEvent> {
    events.iter().filter(|e| filter.matches(e)).cloned().collect()
}

/// Per-operation audit context: the sink, acting principal and current time.
pub struct Ctx<'a> {
    pub audit: &'a mut dyn AuditSink,
    pub actor: &'a str,
    pub now: Timestamp,
    /// Record denied access checks, not just successful ones.
    pub audit_denied: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(audit: &'a mut dyn AuditSink, actor: &'a str, now: Timestamp) -> Self {
        Ctx {
            audit,
            actor,
            now,
            audit_denied: true,
        }
    }

    pub fn emit_as(
        &mut self,
        principal: &str,
        action: AuditAction,
        resource: &str,
        outcome: AuditOutcome,
        detail: BTreeMap<String, String>,
    ) -> Result<AuditEvent, AuditError> {
        self.audit.append(AuditRecord {
            timestamp: self.now,
            principal: principal.to_string(),
            action,
            resource: resource.to_string(),
            outcome,
            detail,
        })
    }

    pub fn success(
        &mut self,
        action: AuditAction,
        resource: &str,
        detail: BTreeMap<String, String>,
    ) -> Result<AuditEvent, AuditError> {
        let actor = self.actor;
        self.emit_as(actor, action, resource, AuditOutcome::Success, detail)
    }

    /// Re-borrow with a different acting principal.
    pub fn acting_as<'b>(&'b mut self, actor: &'b str) -> Ctx<'b> {
        Ctx {
            audit: &mut *self.audit,
            actor,
            now: self.now,
            audit_denied: self.audit_denied,
        }
    }

    pub fn reborrow(&mut self) -> Ctx<'_> {
        Ctx {
            audit: &mut *self.audit,
            actor: self.actor,
            now: self.now,
            audit_denied: self.audit_denied,
        }
    }
}

/// Build an event detail map.
pub fn detail<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}
