//! Control-plane state machines for a multi-tenant big-data platform running
//! against a simulated cloud provider.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. Every operation
//! takes an explicit virtual timestamp; persistence, configuration files, the
//! CLI and the admin API live in the `bigbird` companion crate.
//!
//! Module map:
//!
//! - [`path`]: on-prem HDFS path ⇄ logical path ⇄ physical bucket path.
//! - [`identity`]: shadow service accounts, key rotation, reader groups.
//! - [`cloud`]: resource tree, ACL evaluation and the quota ledger.
//! - [`provision`]: idempotent precondition/provision reconciliation.
//! - [`ingestion`]: transfer tools, load-job queueing and the data watchdog.
//! - [`slots`]: slot pool, reservations and FIFO slot scheduling.
//! - [`observability`]: job views, metric collection, alerting, audit log.
//! - [`platform`]: the facade tying the modules together behind one clock.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod cloud;
pub mod error;
pub mod identity;
pub mod ingestion;
pub mod observability;
pub mod path;
pub mod platform;
pub mod provision;
pub mod slots;
pub mod time;

mod serde_util;

pub use error::Error;
pub use time::{Duration, Timestamp};
