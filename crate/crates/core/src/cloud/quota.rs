//! Warehouse quota table and the fixed-window counter ledger.
//!
//! Windows are tumbling and aligned to multiples of their length since the
//! epoch: a per-minute counter for `t = 119` lives in the window `[60, 120)`
//! and is fresh again at `t = 120`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::serde_util::entries;
use crate::time::{Duration, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuotaName {
    DatasetsPerProject,
    TablesPerDataset,
    AuthorizedViewsPerDataset,
    ColumnsPerTable,
    TableOpsPerDay,
    TableMetadataOpsPer10s,
    ReadRowsPerMinute,
    StorageApiCallsPerMinute,
    StreamingRequestsPerSecond,
    LoadJobsPerDay,
    ConcurrentLoadJobs,
}

impl QuotaName {
    pub const ALL: [QuotaName; 11] = [
        QuotaName::DatasetsPerProject,
        QuotaName::TablesPerDataset,
        QuotaName::AuthorizedViewsPerDataset,
        QuotaName::ColumnsPerTable,
        QuotaName::TableOpsPerDay,
        QuotaName::TableMetadataOpsPer10s,
        QuotaName::ReadRowsPerMinute,
        QuotaName::StorageApiCallsPerMinute,
        QuotaName::StreamingRequestsPerSecond,
        QuotaName::LoadJobsPerDay,
        QuotaName::ConcurrentLoadJobs,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            QuotaName::DatasetsPerProject => "datasets-per-project",
            QuotaName::TablesPerDataset => "tables-per-dataset",
            QuotaName::AuthorizedViewsPerDataset => "authorized-views-per-dataset",
            QuotaName::ColumnsPerTable => "columns-per-table",
            QuotaName::TableOpsPerDay => "table-ops-per-day",
            QuotaName::TableMetadataOpsPer10s => "table-metadata-ops-per-10s",
            QuotaName::ReadRowsPerMinute => "read-rows-per-minute",
            QuotaName::StorageApiCallsPerMinute => "storage-api-calls-per-minute",
            QuotaName::StreamingRequestsPerSecond => "streaming-requests-per-second",
            QuotaName::LoadJobsPerDay => "load-jobs-per-day",
            QuotaName::ConcurrentLoadJobs => "concurrent-load-jobs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.as_str() == s)
    }
}

impl fmt::Display for QuotaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuotaScopeKind {
    Project,
    Dataset,
    Table,
    UserProject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuotaWindow {
    /// A level check against the current object count.
    Instantaneous,
    /// A cap on simultaneously running work.
    Concurrent,
    PerSecond,
    Per10Seconds,
    PerMinute,
    PerDay,
}

impl QuotaWindow {
    pub fn length(self) -> Option<Duration> {
        match self {
            QuotaWindow::Instantaneous | QuotaWindow::Concurrent => None,
            QuotaWindow::PerSecond => Some(Duration::seconds(1)),
            QuotaWindow::Per10Seconds => Some(Duration::seconds(10)),
            QuotaWindow::PerMinute => Some(Duration::minutes(1)),
            QuotaWindow::PerDay => Some(Duration::days(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuotaBehavior {
    Reject,
    Queue,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaRule {
    pub name: QuotaName,
    pub scope: QuotaScopeKind,
    pub window: QuotaWindow,
    pub limit: u64,
    /// For capacity-proportional caps: `limit` units per this many slots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_slots: Option<u64>,
    pub behavior: QuotaBehavior,
}

impl QuotaRule {
    /// Effective concurrency cap for a reservation of `reserved_slots`.
    pub fn concurrency_cap(&self, reserved_slots: u64) -> u64 {
        match self.per_slots {
            Some(unit) if unit > 0 => self.limit * (reserved_slots / unit),
            _ => self.limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("quota {quota} exceeded for {scope} (limit {limit})")]
pub struct QuotaExceeded {
    pub quota: QuotaName,
    pub scope: String,
    pub limit: u64,
}

/// A soft limit was crossed; the operation went through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradationWarning {
    pub quota: QuotaName,
    pub scope: String,
    pub count: u64,
    pub limit: u64,
    pub at: Timestamp,
}

/// The rule table. `Default` is the published warehouse limits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaTable {
    rules: Vec<QuotaRule>,
}

impl Default for QuotaTable {
    fn default() -> Self {
        use QuotaBehavior::*;
        use QuotaScopeKind::*;
        use QuotaWindow::*;
        let rule = |name, scope, window, limit, behavior| QuotaRule {
            name,
            scope,
            window,
            limit,
            per_slots: None,
            behavior,
        };
        QuotaTable {
            rules: alloc::vec![
                rule(QuotaName::DatasetsPerProject, Project, Instantaneous, 1_000, Warn),
                rule(QuotaName::TablesPerDataset, Dataset, Instantaneous, 50_000, Warn),
                rule(QuotaName::AuthorizedViewsPerDataset, Dataset, Instantaneous, 2_500, Reject),
                rule(QuotaName::ColumnsPerTable, Table, Instantaneous, 10_000, Reject),
                rule(QuotaName::TableOpsPerDay, Table, PerDay, 1_000, Reject),
                rule(QuotaName::TableMetadataOpsPer10s, Table, Per10Seconds, 5, Reject),
                rule(QuotaName::ReadRowsPerMinute, UserProject, PerMinute, 5_000, Reject),
                rule(QuotaName::StorageApiCallsPerMinute, UserProject, PerMinute, 1_000, Reject),
                rule(QuotaName::StreamingRequestsPerSecond, Project, PerSecond, 10_000_000, Reject),
                rule(QuotaName::LoadJobsPerDay, Project, PerDay, 100_000, Reject),
                QuotaRule {
                    per_slots: Some(2_000),
                    ..rule(QuotaName::ConcurrentLoadJobs, Project, Concurrent, 50, Queue)
                },
            ],
        }
    }
}

impl QuotaTable {
    pub fn rules(&self) -> &[QuotaRule] {
        &self.rules
    }

    pub fn rule(&self, name: QuotaName) -> &QuotaRule {
        self.rules
            .iter()
            .find(|r| r.name == name)
            .expect("quota table always holds every rule")
    }

    pub fn limit(&self, name: QuotaName) -> u64 {
        self.rule(name).limit
    }

    /// Override a limit, e.g. to scale a rate down for tests.
    pub fn set_limit(&mut self, name: QuotaName, limit: u64) {
        if let Some(r) = self.rules.iter_mut().find(|r| r.name == name) {
            r.limit = limit;
        }
    }

    pub fn with_limit(mut self, name: QuotaName, limit: u64) -> Self {
        self.set_limit(name, limit);
        self
    }

    /// Level check for count-style rules: `count` is the value the
    /// operation would produce.
    pub fn check_level(
        &self,
        name: QuotaName,
        scope: &str,
        count: u64,
        now: Timestamp,
    ) -> Result<Option<DegradationWarning>, QuotaExceeded> {
        let rule = self.rule(name);
        if count <= rule.limit {
            return Ok(None);
        }
        match rule.behavior {
            QuotaBehavior::Warn => Ok(Some(DegradationWarning {
                quota: name,
                scope: scope.to_string(),
                count,
                limit: rule.limit,
                at: now,
            })),
            QuotaBehavior::Reject | QuotaBehavior::Queue => Err(QuotaExceeded {
                quota: name,
                scope: scope.to_string(),
                limit: rule.limit,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CounterKey {
    pub quota: QuotaName,
    pub scope: String,
    pub window_start: Timestamp,
}

/// Windowed usage counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaLedger {
    #[serde(with = "entries")]
    counters: BTreeMap<CounterKey, u64>,
}

impl QuotaLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(rule: &QuotaRule, scope: &str, now: Timestamp) -> CounterKey {
        let len = rule
            .window
            .length()
            .expect("windowed quota required for counters");
        CounterKey {
            quota: rule.name,
            scope: scope.to_string(),
            window_start: now.window_start(len),
        }
    }

    /// Usage in the window containing `now`.
    pub fn count(&self, rule: &QuotaRule, scope: &str, now: Timestamp) -> u64 {
        self.counters
            .get(&Self::key(rule, scope, now))
            .copied()
            .unwrap_or(0)
    }

    pub fn check(&self, rule: &QuotaRule, scope: &str, now: Timestamp) -> Result<(), QuotaExceeded> {
        if self.count(rule, scope, now) < rule.limit {
            Ok(())
        } else {
            Err(QuotaExceeded {
                quota: rule.name,
                scope: scope.to_string(),
                limit: rule.limit,
            })
        }
    }

    pub fn consume(&mut self, rule: &QuotaRule, scope: &str, now: Timestamp) {
        *self
            .counters
            .entry(Self::key(rule, scope, now))
            .or_insert(0) += 1;
    }

    /// Check and, if admitted, count one unit.
    pub fn try_consume(
        &mut self,
        rule: &QuotaRule,
        scope: &str,
        now: Timestamp,
    ) -> Result<(), QuotaExceeded> {
        self.check(rule, scope, now)?;
        self.consume(rule, scope, now);
        Ok(())
    }

    /// Drop counters whose window has closed by `now`.
    pub fn roll_over(&mut self, table: &QuotaTable, now: Timestamp) {
        self.counters.retain(|k, _| {
            let len = table.rule(k.quota).window.length().unwrap_or(Duration::ZERO);
            k.window_start + len > now
        });
    }

    /// Live counters whose scope starts with `scope_prefix`.
    pub fn status(&self, scope_prefix: &str) -> Vec<(CounterKey, u64)> {
        self.counters
            .iter()
            .filter(|(k, _)| k.scope.starts_with(scope_prefix))
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_holds_published_values() {
        let t = QuotaTable::default();
        let expect = [
            (QuotaName::DatasetsPerProject, 1_000, QuotaBehavior::Warn),
            (QuotaName::TablesPerDataset, 50_000, QuotaBehavior::Warn),
            (QuotaName::AuthorizedViewsPerDataset, 2_500, QuotaBehavior::Reject),
            (QuotaName::ColumnsPerTable, 10_000, QuotaBehavior::Reject),
            (QuotaName::TableOpsPerDay, 1_000, QuotaBehavior::Reject),
            (QuotaName::TableMetadataOpsPer10s, 5, QuotaBehavior::Reject),
            (QuotaName::ReadRowsPerMinute, 5_000, QuotaBehavior::Reject),
            (QuotaName::StorageApiCallsPerMinute, 1_000, QuotaBehavior::Reject),
            (QuotaName::StreamingRequestsPerSecond, 10_000_000, QuotaBehavior::Reject),
            (QuotaName::LoadJobsPerDay, 100_000, QuotaBehavior::Reject),
            (QuotaName::ConcurrentLoadJobs, 50, QuotaBehavior::Queue),
        ];
        assert_eq!(t.rules().len(), expect.len());
        for (name, limit, behavior) in expect {
            let r = t.rule(name);
            assert_eq!((r.limit, r.behavior), (limit, behavior), "{name}");
        }
        assert_eq!(t.rule(QuotaName::ConcurrentLoadJobs).per_slots, Some(2_000));
    }

    #[test]
    fn concurrency_cap_scales_by_floor() {
        let t = QuotaTable::default();
        let r = t.rule(QuotaName::ConcurrentLoadJobs);
        assert_eq!(r.concurrency_cap(0), 0);
        assert_eq!(r.concurrency_cap(1_999), 0);
        assert_eq!(r.concurrency_cap(2_000), 50);
        assert_eq!(r.concurrency_cap(5_999), 100);
        assert_eq!(r.concurrency_cap(100_000), 2_500);
    }

    #[test]
    fn window_resets_at_boundary() {
        let t = QuotaTable::default();
        let rule = t.rule(QuotaName::TableMetadataOpsPer10s);
        let mut l = QuotaLedger::new();
        for _ in 0..5 {
            l.try_consume(rule, "tbl", Timestamp(0)).unwrap();
        }
        assert!(l.try_consume(rule, "tbl", Timestamp(9)).is_err());
        l.try_consume(rule, "tbl", Timestamp(10)).unwrap();
        l.roll_over(&t, Timestamp(10));
        assert_eq!(l.len(), 1);
        assert_eq!(l.count(rule, "tbl", Timestamp(10)), 1);
    }

    #[test]
    fn level_checks() {
        let t = QuotaTable::default();
        assert_eq!(
            t.check_level(QuotaName::DatasetsPerProject, "p", 1_000, Timestamp(0)),
            Ok(None)
        );
        assert!(t
            .check_level(QuotaName::DatasetsPerProject, "p", 1_001, Timestamp(0))
            .unwrap()
            .is_some());
        assert!(t
            .check_level(QuotaName::ColumnsPerTable, "t", 10_001, Timestamp(0))
            .is_err());
    }

    #[test]
    fn names_roundtrip() {
        for q in QuotaName::ALL {
            assert_eq!(QuotaName::parse(q.as_str()), Some(q));
        }
    }
}
