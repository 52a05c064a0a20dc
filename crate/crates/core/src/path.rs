//! Two-stage address translation between on-prem HDFS paths and object
//! storage.
//!
//! ```text
//! /dc1/cluster1/user/helen/some/path/part-001.lzo      on-prem (mount-table view)
//!   -> gcs/user/helen/some/path/part-001.lzo            logical, cluster independent
//!   -> gs://user.helen.dp.twitter.domain/some/path/part-001.lzo   physical bucket
//! ```
//!
//! Owner names are restricted to `[a-z0-9-]`, so a bucket name of the shape
//! `<kind>.<owner>.dp.<suffix>` can be split unambiguously once the suffix is
//! stripped from the right.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default verified domain that every bucket name ends with.
pub const DEFAULT_DOMAIN_SUFFIX: &str = "twitter.domain";

const LOGICAL_PREFIX: &str = "gcs";
const BUCKET_SCHEME: &str = "gs://";
const BUCKET_MARKER: &str = "dp";
/// Longest allowed dot-separated bucket-name component.
const MAX_COMPONENT_LEN: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("malformed path `{path}`: {reason}")]
    MalformedPath { path: String, reason: &'static str },
    #[error("owner `{0}` cannot be mapped to a bucket name")]
    OwnerNameUnmappable(String),
    #[error("bucket `{0}` is not a managed bucket")]
    ForeignBucket(String),
    #[error("invalid domain suffix `{0}`")]
    InvalidSuffix(String),
}

fn malformed(path: &str, reason: &'static str) -> PathError {
    PathError::MalformedPath {
        path: path.to_owned(),
        reason,
    }
}

/// The two namespaces mounted under every cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamespaceKind {
    User,
    Log,
}

impl NamespaceKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            NamespaceKind::User => "user",
            NamespaceKind::Log => "log",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "user" => Some(NamespaceKind::User),
            "log" => Some(NamespaceKind::Log),
            _ => None,
        }
    }
}

impl fmt::Display for NamespaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True for a non-empty name of at most 63 characters from `[a-z0-9-]`.
///
/// This is the character set for datacenters, clusters, owners and UNIX
/// names throughout the control plane.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= MAX_COMPONENT_LEN
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

fn is_segment(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.chars().any(|c| c == '/' || c.is_control())
}

fn check_segments<'a>(
    full: &str,
    segments: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<String>, PathError> {
    segments
        .into_iter()
        .map(|s| {
            if is_segment(s) {
                Ok(s.to_owned())
            } else {
                Err(malformed(full, "empty or illegal path segment"))
            }
        })
        .collect()
}

/// A path as seen through the cluster mount table:
/// `/<datacenter>/<cluster>/<kind>/<owner>/<relative...>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OnPremPath {
    pub datacenter: String,
    pub cluster: String,
    pub kind: NamespaceKind,
    pub owner: String,
    pub relative: Vec<String>,
}

/// Cluster-independent address: `gcs/<kind>/<owner>/<relative...>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogicalPath {
    pub kind: NamespaceKind,
    pub owner: String,
    pub relative: Vec<String>,
}

/// A concrete object location: `gs://<bucket_name>/<object_key>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhysicalBucketPath {
    pub bucket_name: String,
    pub object_key: String,
}

/// Parse an on-prem path such as `/dc1/cluster1/user/helen/a/b`.
pub fn parse_onprem(text: &str) -> Result<OnPremPath, PathError> {
    let rest = text
        .strip_prefix('/')
        .ok_or_else(|| malformed(text, "must start with `/`"))?;
    let mut parts = rest.split('/');
    let mut head = [""; 4];
    for slot in head.iter_mut() {
        *slot = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed(text, "expected /<datacenter>/<cluster>/<kind>/<owner>"))?;
    }
    let [datacenter, cluster, kind, owner] = head;
    if !is_identifier(datacenter) || !is_identifier(cluster) {
        return Err(malformed(text, "datacenter and cluster must match [a-z0-9-]"));
    }
    let kind = NamespaceKind::parse(kind)
        .ok_or_else(|| malformed(text, "namespace kind must be `user` or `log`"))?;
    if !is_identifier(owner) {
        return Err(malformed(text, "owner must match [a-z0-9-]"));
    }
    let relative = check_segments(text, parts)?;
    Ok(OnPremPath {
        datacenter: datacenter.to_owned(),
        cluster: cluster.to_owned(),
        kind,
        owner: owner.to_owned(),
        relative,
    })
}

impl FromStr for OnPremPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_onprem(s)
    }
}

impl fmt::Display for OnPremPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "/{}/{}/{}/{}",
            self.datacenter, self.cluster, self.kind, self.owner
        )?;
        for seg in &self.relative {
            write!(f, "/{seg}")?;
        }
        Ok(())
    }
}

/// Strip datacenter and cluster.
pub fn to_logical(p: &OnPremPath) -> LogicalPath {
    LogicalPath {
        kind: p.kind,
        owner: p.owner.clone(),
        relative: p.relative.clone(),
    }
}

impl OnPremPath {
    pub fn to_logical(&self) -> LogicalPath {
        to_logical(self)
    }
}

impl LogicalPath {
    pub fn new(kind: NamespaceKind, owner: impl Into<String>, relative: Vec<String>) -> Self {
        LogicalPath {
            kind,
            owner: owner.into(),
            relative,
        }
    }

    /// Object key: the relative segments joined with `/`.
    pub fn object_key(&self) -> String {
        self.relative.join("/")
    }

    pub fn to_physical(&self, domain_suffix: &str) -> Result<PhysicalBucketPath, PathError> {
        to_physical(self, domain_suffix)
    }
}

impl fmt::Display for LogicalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{LOGICAL_PREFIX}/{}/{}", self.kind, self.owner)?;
        for seg in &self.relative {
            write!(f, "/{seg}")?;
        }
        Ok(())
    }
}

impl FromStr for LogicalPath {
    type Err = PathError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut parts = text.split('/');
        if parts.next() != Some(LOGICAL_PREFIX) {
            return Err(malformed(text, "logical paths start with `gcs/`"));
        }
        let kind = parts
            .next()
            .and_then(NamespaceKind::parse)
            .ok_or_else(|| malformed(text, "namespace kind must be `user` or `log`"))?;
        let owner = parts
            .next()
            .filter(|o| is_identifier(o))
            .ok_or_else(|| malformed(text, "owner must match [a-z0-9-]"))?;
        let relative = check_segments(text, parts)?;
        Ok(LogicalPath {
            kind,
            owner: owner.to_owned(),
            relative,
        })
    }
}

fn validate_suffix(suffix: &str) -> Result<(), PathError> {
    let ok = !suffix.is_empty()
        && suffix.split('.').all(|c| {
            !c.is_empty()
                && c.len() <= MAX_COMPONENT_LEN
                && c
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        });
    if ok {
        Ok(())
    } else {
        Err(PathError::InvalidSuffix(suffix.to_owned()))
    }
}

/// Bucket name for an owner: `<kind>.<owner>.dp.<suffix>`.
pub fn bucket_name(
    kind: NamespaceKind,
    owner: &str,
    domain_suffix: &str,
) -> Result<String, PathError> {
    validate_suffix(domain_suffix)?;
    if !is_identifier(owner) {
        return Err(PathError::OwnerNameUnmappable(owner.to_owned()));
    }
    Ok(alloc::format!(
        "{kind}.{owner}.{BUCKET_MARKER}.{domain_suffix}"
    ))
}

pub fn to_physical(l: &LogicalPath, domain_suffix: &str) -> Result<PhysicalBucketPath, PathError> {
    Ok(PhysicalBucketPath {
        bucket_name: bucket_name(l.kind, &l.owner, domain_suffix)?,
        object_key: l.object_key(),
    })
}

/// Split a managed bucket name back into `(kind, owner)`.
pub fn parse_bucket_name(
    bucket: &str,
    domain_suffix: &str,
) -> Result<(NamespaceKind, String), PathError> {
    let foreign = || PathError::ForeignBucket(bucket.to_owned());
    let head = bucket
        .strip_suffix(domain_suffix)
        .and_then(|h| h.strip_suffix('.'))
        .and_then(|h| h.strip_suffix(BUCKET_MARKER))
        .and_then(|h| h.strip_suffix('.'))
        .ok_or_else(foreign)?;
    let (kind, owner) = head.split_once('.').ok_or_else(foreign)?;
    let kind = NamespaceKind::parse(kind).ok_or_else(foreign)?;
    if !is_identifier(owner) {
        return Err(foreign());
    }
    Ok((kind, owner.to_owned()))
}

pub fn from_physical(p: &PhysicalBucketPath, domain_suffix: &str) -> Result<LogicalPath, PathError> {
    let (kind, owner) = parse_bucket_name(&p.bucket_name, domain_suffix)?;
    let relative = if p.object_key.is_empty() {
        Vec::new()
    } else {
        check_segments(&p.to_string(), p.object_key.split('/'))?
    };
    Ok(LogicalPath {
        kind,
        owner,
        relative,
    })
}

impl PhysicalBucketPath {
    pub fn uri(&self) -> String {
        self.to_string()
    }

    pub fn from_physical(&self, domain_suffix: &str) -> Result<LogicalPath, PathError> {
        from_physical(self, domain_suffix)
    }
}

impl fmt::Display for PhysicalBucketPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{BUCKET_SCHEME}{}/{}", self.bucket_name, self.object_key)
    }
}

impl FromStr for PhysicalBucketPath {
    type Err = PathError;

    /// Parses `gs://bucket/key`; a missing `/key` means an empty key.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let rest = text
            .strip_prefix(BUCKET_SCHEME)
            .ok_or_else(|| malformed(text, "bucket URIs start with `gs://`"))?;
        let (bucket, key) = rest.split_once('/').unwrap_or((rest, ""));
        if bucket.is_empty() {
            return Err(malformed(text, "empty bucket name"));
        }
        Ok(PhysicalBucketPath {
            bucket_name: bucket.to_owned(),
            object_key: key.to_owned(),
        })
    }
}
