//! Job views, metric collection, alerting and the audit log.

pub mod alerts;
pub mod audit;
pub mod info_schema;
pub mod metrics;

pub use alerts::{AlertRule, Alerting, Comparator, Firing};
pub use audit::{
    AuditAction, AuditError, AuditEvent, AuditFilter, AuditLog, AuditOutcome, AuditRecord,
    AuditSink, Ctx, DiscardSink,
};
pub use info_schema::{info_schema_query, job_rows, JobFilter, JobStatsRow, Scope, UnknownScope};
pub use metrics::{aggregate, Dims, MetricName, MetricSeries, Metrics, Point, Sample};
