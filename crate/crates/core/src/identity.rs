//! Shadow identities, key rotation and reader groups.
//!
//! Each on-prem UNIX name maps to an interactive identity
//! (`<name>@<gsuite_domain>`) and a shadow service account
//! (`<name>@<service_account_domain>`) used for programmatic access. Shadow
//! keys move `active -> grace -> revoked`; only fingerprints are kept here,
//! the secret material goes to a [`KeyVault`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cloud::{CloudError, CloudSim, GroupDirectory, ResourceId, Role};
use crate::observability::audit::{detail, AuditAction, AuditError, Ctx};
use crate::path::is_identifier;
use crate::time::{Duration, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityConfig {
    pub gsuite_domain: String,
    pub service_account_domain: String,
    pub rotation_interval: Duration,
    pub grace_period: Duration,
    /// Seed for deterministic key material.
    pub key_seed: String,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            gsuite_domain: "gsuite.domain".into(),
            service_account_domain: "gserviceaccount.com".into(),
            rotation_interval: Duration::days(7),
            grace_period: Duration::days(7),
            key_seed: "bigbird".into(),
        }
    }
}

impl IdentityConfig {
    pub fn interactive_email(&self, unix_name: &str) -> String {
        format!("{unix_name}@{}", self.gsuite_domain)
    }

    pub fn shadow_email(&self, unix_name: &str) -> String {
        format!("{unix_name}@{}", self.service_account_domain)
    }

    /// Group address for the reader group of `subject`.
    pub fn group_email(&self, subject: &ResourceId) -> String {
        format!("readers.{}@{}", subject.as_str().replace('/', "."), self.gsuite_domain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipalKind {
    HumanUser,
    ServiceAccountUser,
    ReplicationService,
    LogCategory,
}

impl PrincipalKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            PrincipalKind::HumanUser => "human_user",
            PrincipalKind::ServiceAccountUser => "service_account_user",
            PrincipalKind::ReplicationService => "replication_service",
            PrincipalKind::LogCategory => "log_category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "human_user" => Some(PrincipalKind::HumanUser),
            "service_account_user" => Some(PrincipalKind::ServiceAccountUser),
            "replication_service" => Some(PrincipalKind::ReplicationService),
            "log_category" => Some(PrincipalKind::LogCategory),
            _ => None,
        }
    }
}

impl fmt::Display for PrincipalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrincipalIdentity {
    pub unix_name: String,
    pub interactive_email: String,
    pub shadow_email: String,
    pub kind: PrincipalKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyState {
    Active,
    Grace,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowKey {
    pub key_id: String,
    pub shadow_email: String,
    pub created_at: Timestamp,
    pub state: KeyState,
    pub secret_fingerprint: String,
    /// When the key left `active`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retired_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderGroup {
    pub group_email: String,
    pub subject: ResourceId,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("vault error: {0}")]
pub struct VaultError(pub String);

/// Secret storage for shadow keys.
pub trait KeyVault {
    fn store(&mut self, key_id: &str, secret: &[u8]) -> Result<(), VaultError>;
    fn destroy(&mut self, key_id: &str);
}

#[derive(Debug, Default, Clone)]
pub struct MemoryVault {
    secrets: BTreeMap<String, Vec<u8>>,
}

impl MemoryVault {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, key_id: &str) -> bool {
        self.secrets.contains_key(key_id)
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }
}

impl KeyVault for MemoryVault {
    fn store(&mut self, key_id: &str, secret: &[u8]) -> Result<(), VaultError> {
        self.secrets.insert(key_id.to_string(), secret.to_vec());
        Ok(())
    }

    fn destroy(&mut self, key_id: &str) {
        self.secrets.remove(key_id);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("invalid unix name `{0}`")]
    InvalidName(String),
    #[error("unknown account {0}")]
    UnknownAccount(String),
    #[error("account {0} has no active key")]
    NoActiveKey(String),
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

fn hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityStore {
    config: IdentityConfig,
    identities: BTreeMap<String, PrincipalIdentity>,
    keys: BTreeMap<String, Vec<ShadowKey>>,
    groups: BTreeMap<String, ReaderGroup>,
    group_by_subject: BTreeMap<ResourceId, String>,
    key_counter: u64,
}

impl IdentityStore {
    pub fn new(config: IdentityConfig) -> Self {
        IdentityStore {
            config,
            identities: BTreeMap::new(),
            keys: BTreeMap::new(),
            groups: BTreeMap::new(),
            group_by_subject: BTreeMap::new(),
            key_counter: 0,
        }
    }

    pub fn config(&self) -> &IdentityConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: IdentityConfig) {
        self.config = config;
    }

    pub fn identities(&self) -> impl Iterator<Item = &PrincipalIdentity> {
        self.identities.values()
    }

    pub fn identity(&self, unix_name: &str) -> Option<&PrincipalIdentity> {
        self.identities.get(unix_name)
    }

    pub fn by_shadow_email(&self, shadow_email: &str) -> Option<&PrincipalIdentity> {
        let name = shadow_email
            .strip_suffix(&self.config.service_account_domain)?
            .strip_suffix('@')?;
        self.identities
            .get(name)
            .filter(|i| i.shadow_email == shadow_email)
    }

    pub fn keys(&self, shadow_email: &str) -> &[ShadowKey] {
        self.keys.get(shadow_email).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_keys(&self) -> impl Iterator<Item = &ShadowKey> {
        self.keys.values().flatten()
    }

    pub fn groups(&self) -> impl Iterator<Item = &ReaderGroup> {
        self.groups.values()
    }

    pub fn group(&self, group_email: &str) -> Option<&ReaderGroup> {
        self.groups.get(group_email)
    }

    pub fn group_for(&self, subject: &ResourceId) -> Option<&ReaderGroup> {
        self.group_by_subject
            .get(subject)
            .and_then(|g| self.groups.get(g))
    }

    /// Derive and store the next key. The counter only advances once the
    /// caller has logged the key.
    fn mint_key(
        &mut self,
        vault: &mut dyn KeyVault,
        shadow_email: &str,
        now: Timestamp,
    ) -> Result<ShadowKey, IdentityError> {
        let seq = self.key_counter + 1;
        let key_id = format!("key-{seq:08}");
        let mut h = Sha256::new();
        h.update(self.config.key_seed.as_bytes());
        h.update([0]);
        h.update(shadow_email.as_bytes());
        h.update(seq.to_be_bytes());
        let secret = h.finalize();
        vault.store(&key_id, &secret)?;
        let fingerprint = hex(&Sha256::digest(secret)[..16]);
        Ok(ShadowKey {
            key_id,
            shadow_email: shadow_email.to_string(),
            created_at: now,
            state: KeyState::Active,
            secret_fingerprint: fingerprint,
            retired_at: None,
        })
    }

    /// Create the identity and its first key, or return the existing one
    /// untouched. The flag reports whether anything was created.
    pub fn ensure_shadow_account(
        &mut self,
        cx: &mut Ctx<'_>,
        vault: &mut dyn KeyVault,
        unix_name: &str,
        kind: PrincipalKind,
    ) -> Result<(PrincipalIdentity, bool), IdentityError> {
        if !is_identifier(unix_name) {
            return Err(IdentityError::InvalidName(unix_name.to_string()));
        }
        if let Some(existing) = self.identities.get(unix_name) {
            return Ok((existing.clone(), false));
        }
        let identity = PrincipalIdentity {
            unix_name: unix_name.to_string(),
            interactive_email: self.config.interactive_email(unix_name),
            shadow_email: self.config.shadow_email(unix_name),
            kind,
        };
        let key = self.mint_key(vault, &identity.shadow_email, cx.now)?;
        let d = detail([("kind", kind.to_string()), ("key_id", key.key_id.clone())]);
        if let Err(e) = cx.success(AuditAction::IdentityCreate, &identity.shadow_email, d) {
            vault.destroy(&key.key_id);
            return Err(e.into());
        }
        self.key_counter += 1;
        self.keys
            .insert(identity.shadow_email.clone(), alloc::vec![key]);
        self.identities
            .insert(unix_name.to_string(), identity.clone());
        Ok((identity, true))
    }

    /// Retire the active key to grace, revoke any prior grace key, and mint
    /// a new active key created at `cx.now`.
    pub fn rotate_key(
        &mut self,
        cx: &mut Ctx<'_>,
        vault: &mut dyn KeyVault,
        shadow_email: &str,
    ) -> Result<ShadowKey, IdentityError> {
        if self.by_shadow_email(shadow_email).is_none() {
            return Err(IdentityError::UnknownAccount(shadow_email.to_string()));
        }
        let keys = self.keys.get(shadow_email).map(Vec::as_slice).unwrap_or(&[]);
        let Some(active) = keys.iter().find(|k| k.state == KeyState::Active) else {
            return Err(IdentityError::NoActiveKey(shadow_email.to_string()));
        };
        let old_id = active.key_id.clone();
        let revoked: Vec<&str> = keys
            .iter()
            .filter(|k| k.state == KeyState::Grace)
            .map(|k| k.key_id.as_str())
            .collect();
        let revoked = revoked.join(",");
        let new_key = self.mint_key(vault, shadow_email, cx.now)?;
        let mut d = detail([("retired", old_id), ("key_id", new_key.key_id.clone())]);
        if !revoked.is_empty() {
            d.insert("revoked".into(), revoked);
        }
        if let Err(e) = cx.success(AuditAction::KeyRotate, shadow_email, d) {
            vault.destroy(&new_key.key_id);
            return Err(e.into());
        }
        self.key_counter += 1;
        let keys = self.keys.get_mut(shadow_email).expect("checked above");
        for k in keys.iter_mut() {
            match k.state {
                KeyState::Grace => {
                    k.state = KeyState::Revoked;
                    vault.destroy(&k.key_id);
                }
                KeyState::Active => {
                    k.state = KeyState::Grace;
                    k.retired_at = Some(cx.now);
                }
                KeyState::Revoked => {}
            }
        }
        keys.push(new_key.clone());
        Ok(new_key)
    }

    fn active_key(&self, shadow_email: &str) -> Option<&ShadowKey> {
        self.keys(shadow_email)
            .iter()
            .find(|k| k.state == KeyState::Active)
    }

    /// Accounts whose active key is due for rotation at `now`.
    pub fn due_rotations(&self, now: Timestamp) -> Vec<String> {
        self.keys
            .iter()
            .filter(|(email, _)| {
                self.active_key(email)
                    .is_some_and(|k| k.created_at + self.config.rotation_interval <= now)
            })
            .map(|(email, _)| email.clone())
            .collect()
    }

    /// Earliest instant strictly after `after` at which a rotation or grace
    /// expiry falls due.
    pub fn next_due(&self, after: Timestamp) -> Option<Timestamp> {
        let interval = self.config.rotation_interval;
        let grace = self.config.grace_period;
        self.all_keys()
            .filter_map(|k| match k.state {
                KeyState::Active if interval.0 > 0 => Some(k.created_at + interval),
                KeyState::Grace => k.retired_at.map(|t| t + grace),
                _ => None,
            })
            .map(|t| if t <= after { after } else { t })
            .min()
    }

    /// Perform every rotation due at `cx.now`, then revoke grace keys whose
    /// grace period has elapsed. Returns the number of rotations.
    pub fn run_due(
        &mut self,
        cx: &mut Ctx<'_>,
        vault: &mut dyn KeyVault,
    ) -> Result<usize, IdentityError> {
        let due = self.due_rotations(cx.now);
        for email in &due {
            self.rotate_key(cx, vault, email)?;
        }
        let grace = self.config.grace_period;
        let now = cx.now;
        let expired: Vec<(String, usize)> = self
            .keys
            .iter()
            .flat_map(|(email, keys)| {
                keys.iter()
                    .enumerate()
                    .filter(move |(_, k)| {
                        k.state == KeyState::Grace && k.retired_at.is_some_and(|t| t + grace <= now)
                    })
                    .map(move |(i, _)| (email.clone(), i))
            })
            .collect();
        for (email, i) in expired {
            let key_id = self.keys[&email][i].key_id.clone();
            cx.success(AuditAction::KeyRevoke, &email, detail([("key_id", key_id.clone())]))?;
            self.keys.get_mut(&email).expect("present")[i].state = KeyState::Revoked;
            vault.destroy(&key_id);
        }
        Ok(due.len())
    }

    /// Create the reader group for `subject` with its read-only binding, or
    /// return the existing group. The single `group_create` event records the
    /// binding it installs.
    pub fn ensure_reader_group(
        &mut self,
        cx: &mut Ctx<'_>,
        cloud: &mut CloudSim,
        subject: &ResourceId,
    ) -> Result<(ReaderGroup, bool), IdentityError> {
        if !cloud.exists(subject) {
            return Err(IdentityError::UnknownResource(subject.clone()));
        }
        if let Some(existing) = self.group_for(subject).cloned() {
            // Re-install the binding if someone removed it.
            cloud.grant(cx, subject, &existing.group_email, Role::Reader)?;
            return Ok((existing, false));
        }
        let group_email = self.config.group_email(subject);
        cx.success(
            AuditAction::GroupCreate,
            subject.as_str(),
            detail([
                ("group", group_email.clone()),
                ("role", Role::Reader.to_string()),
            ]),
        )?;
        cloud.bind_unaudited(subject, &group_email, Role::Reader);
        let group = ReaderGroup {
            group_email: group_email.clone(),
            subject: subject.clone(),
            members: BTreeSet::new(),
        };
        self.groups.insert(group_email.clone(), group.clone());
        self.group_by_subject.insert(subject.clone(), group_email);
        Ok((group, true))
    }

    pub fn add_member(
        &mut self,
        cx: &mut Ctx<'_>,
        group_email: &str,
        principal: &str,
    ) -> Result<bool, IdentityError> {
        self.change_membership(cx, group_email, principal, true)
    }

    pub fn remove_member(
        &mut self,
        cx: &mut Ctx<'_>,
        group_email: &str,
        principal: &str,
    ) -> Result<bool, IdentityError> {
        self.change_membership(cx, group_email, principal, false)
    }

    fn change_membership(
        &mut self,
        cx: &mut Ctx<'_>,
        group_email: &str,
        principal: &str,
        add: bool,
    ) -> Result<bool, IdentityError> {
        let group = self
            .groups
            .get(group_email)
            .ok_or_else(|| IdentityError::UnknownGroup(group_email.to_string()))?;
        if group.members.contains(principal) == add {
            return Ok(false);
        }
        let op = if add { "add_member" } else { "remove_member" };
        cx.success(
            AuditAction::AclChange,
            group_email,
            detail([("op", op.to_string()), ("principal", principal.to_string())]),
        )?;
        let members = &mut self.groups.get_mut(group_email).expect("checked").members;
        if add {
            members.insert(principal.to_string());
        } else {
            members.remove(principal);
        }
        Ok(true)
    }
}

impl GroupDirectory for IdentityStore {
    fn is_member(&self, group_email: &str, principal: &str) -> bool {
        self.groups
            .get(group_email)
            .is_some_and(|g| g.members.contains(principal))
    }
}
