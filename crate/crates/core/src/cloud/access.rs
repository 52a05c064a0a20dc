//! Role bindings and least-privilege access evaluation.

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::ResourceId;

/// Roles ordered by privilege: `Owner ⊇ Writer ⊇ Reader`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Reader,
    Writer,
    Owner,
}

impl Role {
    pub const fn as_str(self) -> &'static str {
        match self {
            Role::Reader => "reader",
            Role::Writer => "writer",
            Role::Owner => "owner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reader" => Some(Role::Reader),
            "writer" => Some(Role::Writer),
            "owner" => Some(Role::Owner),
            _ => None,
        }
    }

    pub fn covers(self, action: AccessAction) -> bool {
        self >= action.required_role()
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessAction {
    Read,
    Write,
    Administer,
}

impl AccessAction {
    pub const fn required_role(self) -> Role {
        match self {
            AccessAction::Read => Role::Reader,
            AccessAction::Write => Role::Writer,
            AccessAction::Administer => Role::Owner,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "read" => Some(AccessAction::Read),
            "write" => Some(AccessAction::Write),
            "administer" => Some(AccessAction::Administer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allow,
    Deny,
}

impl Decision {
    pub fn is_allow(self) -> bool {
        self == Decision::Allow
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AclBinding {
    pub resource: ResourceId,
    pub principal: String,
    pub role: Role,
}

impl fmt::Display for AclBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.resource, self.role, self.principal)
    }
}

/// Resolves group membership for access checks. Groups are flat: a group
/// contains principals, never other groups.
pub trait GroupDirectory {
    fn is_member(&self, group_email: &str, principal: &str) -> bool;
}

/// A directory with no groups.
pub struct NoGroups;

impl GroupDirectory for NoGroups {
    fn is_member(&self, _group: &str, _principal: &str) -> bool {
        false
    }
}
