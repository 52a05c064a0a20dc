use alloc::string::String;

use thiserror::Error;

use crate::cloud::CloudError;
use crate::identity::IdentityError;
use crate::ingestion::{IngestionError, StatusError};
use crate::observability::alerts::NonFiniteThreshold;
use crate::observability::audit::AuditError;
use crate::observability::info_schema::UnknownScope;
use crate::path::PathError;
use crate::provision::{PolicyError, ProvisionError};
use crate::slots::SlotError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Provision(#[from] ProvisionError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Ingestion(#[from] IngestionError),
    #[error(transparent)]
    Status(#[from] StatusError),
    #[error(transparent)]
    Slot(#[from] SlotError),
    #[error(transparent)]
    Scope(#[from] UnknownScope),
    #[error(transparent)]
    Alert(#[from] NonFiniteThreshold),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Whether the audit sink refused the operation, directly or nested.
    pub fn is_audit_failure(&self) -> bool {
        if let Error::Provision(e) = self {
            return e.is_audit_failure();
        }
        matches!(
            self,
            Error::Audit(_)
                | Error::Cloud(CloudError::Audit(_))
                | Error::Identity(IdentityError::Audit(_))
                | Error::Identity(IdentityError::Cloud(CloudError::Audit(_)))
                | Error::Ingestion(IngestionError::Audit(_))
                | Error::Slot(SlotError::Audit(_))
        )
    }
}
