//! Stage-latency scanner for the HDFS -> GCS -> warehouse pipeline.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, Timestamp};

/// Per-stage presence of one dataset and when its files last changed there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStatus {
    pub logical_path: String,
    pub exists_hdfs: bool,
    pub exists_gcs: bool,
    pub exists_bq: bool,
    #[serde(default)]
    pub last_changed_hdfs: Option<Timestamp>,
    #[serde(default)]
    pub last_changed_gcs: Option<Timestamp>,
    #[serde(default)]
    pub last_changed_bq: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatusError {
    #[error("{path}: {stage} last_changed must be present iff the dataset exists there")]
    Inconsistent { path: String, stage: &'static str },
    #[error("watchdog thresholds must be positive")]
    NonPositiveThreshold,
}

impl DatasetStatus {
    pub fn new(logical_path: impl Into<String>) -> Self {
        DatasetStatus {
            logical_path: logical_path.into(),
            exists_hdfs: false,
            exists_gcs: false,
            exists_bq: false,
            last_changed_hdfs: None,
            last_changed_gcs: None,
            last_changed_bq: None,
        }
    }

    pub fn validate(&self) -> Result<(), StatusError> {
        let stages = [
            ("hdfs", self.exists_hdfs, self.last_changed_hdfs),
            ("gcs", self.exists_gcs, self.last_changed_gcs),
            ("bq", self.exists_bq, self.last_changed_bq),
        ];
        for (stage, exists, changed) in stages {
            if exists != changed.is_some() {
                return Err(StatusError::Inconsistent {
                    path: self.logical_path.clone(),
                    stage,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    HdfsToGcs,
    GcsToBq,
}

impl Stage {
    pub const fn as_str(self) -> &'static str {
        match self {
            Stage::HdfsToGcs => "hdfs->gcs",
            Stage::GcsToBq => "gcs->bq",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub hdfs_to_gcs: Duration,
    pub gcs_to_bq: Duration,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            hdfs_to_gcs: Duration::hours(6),
            gcs_to_bq: Duration::hours(6),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), StatusError> {
        if self.hdfs_to_gcs.0 == 0 || self.gcs_to_bq.0 == 0 {
            Err(StatusError::NonPositiveThreshold)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub logical_path: String,
    pub stage: Stage,
    /// Time since the upstream stage last changed.
    pub age: Duration,
}

/// Report datasets whose data has sat in one stage longer than that stage's
/// threshold without reaching the next.
pub fn watchdog_scan(
    statuses: &[DatasetStatus],
    now: Timestamp,
    thresholds: &Thresholds,
) -> Result<Vec<Finding>, StatusError> {
    thresholds.validate()?;
    let mut out = Vec::new();
    for s in statuses {
        let stuck = if s.exists_hdfs && !s.exists_gcs {
            s.last_changed_hdfs
                .map(|t| (Stage::HdfsToGcs, now.since(t), thresholds.hdfs_to_gcs))
        } else if s.exists_gcs && !s.exists_bq {
            s.last_changed_gcs
                .map(|t| (Stage::GcsToBq, now.since(t), thresholds.gcs_to_bq))
        } else {
            None
        };
        if let Some((stage, age, limit)) = stuck {
            if age > limit {
                out.push(Finding {
                    logical_path: s.logical_path.clone(),
                    stage,
                    age,
                });
            }
        }
    }
    Ok(out)
}
