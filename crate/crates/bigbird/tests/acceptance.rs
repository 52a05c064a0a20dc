//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use bigbird::audit_file::FileAuditSink;
use bigbird::snapshot;
use bigbird_core::cloud::{
    AccessAction, ApiCallKind, CloudError, OpOutcome, QuotaName, QuotaTable, ResourceId, Role, TableOpKind,
};
use bigbird_core::identity::IdentityConfig;
use bigbird_core::ingestion::{
    DataFormat, DatasetStatus, Destination, IngestionError, Stage, Tool, ToolCapability, TransferRequest,
};
use bigbird_core::observability::audit::{check_dense, AuditAction, AuditLog, Ctx};
use bigbird_core::observability::{AlertRule, Comparator, Dims, MetricName};
use bigbird_core::path::{parse_onprem, LogicalPath, PhysicalBucketPath};
use bigbird_core::platform::{ControlPlane, PlatformConfig};
use bigbird_core::provision::{expected_bindings, NamingPolicy, TenantSpec};
use bigbird_core::slots::{JobKind, JobResult, JobState, SlotPool, SlotRequest};
use bigbird_core::{Duration, Error, Timestamp};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Outcome = Result<(), String>;
type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn plane(config: PlatformConfig) -> ControlPlane {
    ControlPlane::new(config, Box::new(AuditLog::new())).expect("valid config")
}

fn quota_of(e: &Error) -> Option<QuotaName> {
    match e {
        Error::Cloud(CloudError::QuotaExceeded(q)) | Error::Ingestion(IngestionError::QuotaExceeded(q)) => {
            Some(q.quota)
        }
        _ => None,
    }
}

fn path_mapping() -> Outcome {
    let start = Instant::now();
    let map = |onprem: &str| -> Result<String, String> {
        let logical = parse_onprem(onprem).map_err(|e| e.to_string())?.to_logical();
        Ok(logical.to_physical("twitter.domain").map_err(|e| e.to_string())?.uri())
    };
    let user = map("/dc1/cluster1/user/helen/some/path/part-001.lzo")?;
    ensure!(user == "gs://user.helen.dp.twitter.domain/some/path/part-001.lzo", "user example gave {user}");
    let log = map("/dc1/cluster1/log/activity-logs/2020/01/01/part-0.lzo")?;
    ensure!(log == "gs://log.activity-logs.dp.twitter.domain/2020/01/01/part-0.lzo", "log example gave {log}");

    let mut runner = TestRunner::deterministic();
    let ident = "[a-z0-9][a-z0-9-]{0,15}";
    let strategy = (
        ident,
        ident,
        proptest::bool::ANY,
        ident,
        proptest::collection::vec("[A-Za-z0-9_=-]{1,10}", 0..5),
    );
    let mut failures = 0;
    for _ in 0..10_000 {
        let (dc, cluster, is_log, owner, rel) = sample(&mut runner, &strategy);
        let kind = if is_log { "log" } else { "user" };
        let onprem = format!("/{dc}/{cluster}/{kind}/{owner}{}", rel.iter().map(|s| format!("/{s}")).collect::<String>());
        let logical = parse_onprem(&onprem).map_err(|e| e.to_string())?.to_logical();
        let physical = logical.to_physical("twitter.domain").map_err(|e| e.to_string())?;
        let expected = format!("gs://{kind}.{owner}.dp.twitter.domain/{}", rel.join("/"));
        let reparsed: PhysicalBucketPath = physical.uri().parse().map_err(|e: bigbird_core::path::PathError| e.to_string())?;
        let back = reparsed.from_physical("twitter.domain").ok();
        let text: Option<LogicalPath> = logical.to_string().parse().ok();
        if physical.uri() != expected || back.as_ref() != Some(&logical) || text.as_ref() != Some(&logical) {
            failures += 1;
        }
    }
    ensure!(failures == 0, "{failures} of 10000 random paths failed to round-trip");
    let elapsed = start.elapsed();
    ensure!(elapsed.as_millis() < 1_000, "took {elapsed:?}");
    Ok(())
}

fn provisioning() -> Outcome {
    let mut specs: Vec<_> = (0..500).map(|i| TenantSpec::user(format!("user{i:03}"))).collect();
    specs.extend((0..100).map(|i| TenantSpec::log(format!("category-{i:03}"))));
    let start = Instant::now();
    let mut cp = plane(PlatformConfig::default());
    let first = cp.reconcile(&specs).map_err(|e| e.to_string())?;
    ensure!(first.failed.is_empty() && first.created.len() == 600, "first run: {} created, {} failed", first.created.len(), first.failed.len());
    let cloud_before = serde_json::to_vec(cp.cloud()).expect("serializes");
    let second = cp.reconcile(&specs).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(second.created.is_empty() && second.failed.is_empty(), "second run: {} created, {} failed", second.created.len(), second.failed.len());
    ensure!(serde_json::to_vec(cp.cloud()).expect("serializes") == cloud_before, "cloud state changed on rerun");
    let expected = expected_bindings(&specs, &NamingPolicy::default(), &IdentityConfig::default(), "twitter.domain")
        .map_err(|e| e.to_string())?;
    let got: BTreeSet<_> = cp.cloud().bindings().collect();
    ensure!(got == expected, "{} bindings, {} expected", got.len(), expected.len());
    ensure!(elapsed.as_secs() < 60, "took {elapsed:?}");
    Ok(())
}

/// Fill a limit with `ok`, then expect the next call to be `over`.
fn at_limit<T>(
    n: u64,
    mut call: impl FnMut(u64) -> Result<T, Error>,
    over: impl FnOnce(Result<T, Error>) -> bool,
    what: &str,
) -> Outcome {
    for i in 0..n {
        if let Err(e) = call(i) {
            return Err(format!("{what}: call {} of {n} failed: {e}", i + 1));
        }
    }
    ensure!(over(call(n)), "{what}: call {} not handled as expected", n + 1);
    Ok(())
}

fn rejected_by(q: QuotaName) -> impl Fn(Result<(), Error>) -> bool {
    move |r| r.as_ref().err().and_then(quota_of) == Some(q)
}

fn quota_suite() -> Outcome {
    let start = Instant::now();
    let mut passed = 0;
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Outcome| match r {
        Ok(()) => passed += 1,
        Err(e) => failures.push(format!("{name}: {e}")),
    };

    let mut cp = plane(PlatformConfig::default());
    cp.create_project("admin", "p").unwrap();
    record(
        "datasets",
        at_limit(
            1_000,
            |i| {
                let c = cp.create_dataset("admin", "p", &format!("d{i}"))?;
                if c.warning.is_some() && i < 1_000 {
                    return Err(Error::Config("warned early".into()));
                }
                Ok(c)
            },
            |r| r.is_ok_and(|c| c.warning.is_some_and(|w| w.quota == QuotaName::DatasetsPerProject)),
            "1001st dataset warns",
        ),
    );

    let backing = ResourceId::dataset("p", "d0");
    record(
        "views",
        at_limit(
            2_500,
            |i| cp.create_view("admin", "p", "d1", &format!("v{i}"), &backing).map(|_| ()),
            rejected_by(QuotaName::AuthorizedViewsPerDataset),
            "2501st authorized view rejects",
        ),
    );

    record("columns", (|| {
        cp.create_table("admin", "p", "d2", "wide", 10_000).map_err(|e| e.to_string())?;
        let r = cp.create_table("admin", "p", "d2", "wider", 10_001).map(|_| ());
        ensure!(rejected_by(QuotaName::ColumnsPerTable)(r), "10001 columns accepted");
        Ok(())
    })());

    let table = ResourceId::table("p", "d2", "wide");
    record("table ops", (|| {
        // Spread the writes over the day to stay clear of the metadata rate.
        let mut t = 0;
        at_limit(
            1_000,
            |_| {
                t += 60;
                cp.advance_to(Timestamp(t))?;
                cp.table_operation("ann", &table, TableOpKind::DataWrite, OpOutcome::Succeeded)
            },
            rejected_by(QuotaName::TableOpsPerDay),
            "1001st table op in a day rejects",
        )?;
        cp.advance_to(Timestamp(86_400)).map_err(|e| e.to_string())?;
        cp.table_operation("ann", &table, TableOpKind::DataWrite, OpOutcome::Succeeded)
            .map_err(|e| format!("next day: {e}"))
    })());

    cp.create_table("admin", "p", "d2", "meta", 3).unwrap();
    let meta = ResourceId::table("p", "d2", "meta");
    record("metadata ops", (|| {
        let base = cp.now().0.div_ceil(10) * 10 + 10;
        cp.advance_to(Timestamp(base)).map_err(|e| e.to_string())?;
        let op = |cp: &mut ControlPlane| cp.table_operation("ann", &meta, TableOpKind::Metadata, OpOutcome::Succeeded);
        for _ in 0..5 {
            op(&mut cp).map_err(|e| e.to_string())?;
        }
        cp.advance_to(Timestamp(base + 9)).map_err(|e| e.to_string())?;
        ensure!(rejected_by(QuotaName::TableMetadataOpsPer10s)(op(&mut cp)), "6th metadata op in 10s accepted");
        cp.advance_to(Timestamp(base + 10)).map_err(|e| e.to_string())?;
        op(&mut cp).map_err(|e| format!("at the window boundary: {e}"))
    })());

    for (kind, n, q, what) in [
        (ApiCallKind::ReadRows, 5_000, QuotaName::ReadRowsPerMinute, "5001st ReadRows in a minute rejects"),
        (ApiCallKind::OtherStorageApi, 1_000, QuotaName::StorageApiCallsPerMinute, "1001st storage call in a minute rejects"),
    ] {
        let minute = cp.now().0.div_ceil(60) * 60 + 60;
        cp.advance_to(Timestamp(minute)).unwrap();
        let r = at_limit(n, |_| cp.api_call("ann", "p", kind), rejected_by(q), what).and_then(|()| {
            cp.advance_to(Timestamp(minute + 60)).map_err(|e| e.to_string())?;
            cp.api_call("ann", "p", kind).map_err(|e| format!("next minute: {e}"))
        });
        record(what, r);
    }

    let quotas = QuotaTable::default().with_limit(QuotaName::StreamingRequestsPerSecond, 200);
    let mut small = plane(PlatformConfig { quotas, ..PlatformConfig::default() });
    small.create_project("admin", "p").unwrap();
    record("streaming", at_limit(
        200,
        |_| small.api_call("ann", "p", ApiCallKind::StreamingInsert),
        rejected_by(QuotaName::StreamingRequestsPerSecond),
        "scaled streaming rate rejects",
    ).and_then(|()| {
        small.advance_clock(Duration(1)).map_err(|e| e.to_string())?;
        small.api_call("ann", "p", ApiCallKind::StreamingInsert).map_err(|e| format!("next second: {e}"))
    }));

    let (mut loader, dest) = load_plane();
    record("load jobs", at_limit(
        100_000,
        |_| loader.submit_transfer(REPLICATOR, transfer(Tool::Dataflow, DataFormat::Lzo, "x", &dest)).map(|_| ()),
        rejected_by(QuotaName::LoadJobsPerDay),
        "100001st load job in a day rejects",
    ));

    let (mut loader, dest) = load_plane();
    record("concurrent loads", (|| {
        loader.slots_init(2_000).map_err(|e| e.to_string())?;
        ensure!(loader.load_capacity().cap == 50, "cap {}", loader.load_capacity().cap);
        for i in 0..50 {
            let s = loader.submit_transfer(REPLICATOR, transfer(Tool::Bid, DataFormat::Parquet, &i.to_string(), &dest)).map_err(|e| e.to_string())?;
            ensure!(s.job.state == JobState::Running, "job {} is {:?}", i + 1, s.job.state);
        }
        let s = loader.submit_transfer(REPLICATOR, transfer(Tool::Bid, DataFormat::Parquet, "50", &dest)).map_err(|e| e.to_string())?;
        ensure!(s.job.state == JobState::Queued, "51st job is {:?}", s.job.state);
        Ok(())
    })());

    let elapsed = start.elapsed();
    ensure!(failures.is_empty(), "{passed}/10 passed; {}", failures.join("; "));
    ensure!(elapsed.as_secs() < 10, "10/10 passed but took {elapsed:?}");
    Ok(())
}

const REPLICATOR: &str = "data-replicator@gserviceaccount.com";

/// A plane with one provisioned log category to load into.
fn load_plane() -> (ControlPlane, Destination) {
    let mut cp = plane(PlatformConfig::default());
    cp.reconcile(&[TenantSpec::log("activity-logs")]).unwrap();
    let dest = "twitter-activity-logs-bql-project.activity-logs.events".parse().unwrap();
    (cp, dest)
}

fn transfer(tool: Tool, format: DataFormat, file: &str, dest: &Destination) -> TransferRequest {
    let src = format!("gs://log.activity-logs.dp.twitter.domain/{file}").parse().unwrap();
    TransferRequest::new(tool, src, dest.clone(), format)
}

fn cx(log: &mut AuditLog, t: u64) -> Ctx<'_> {
    Ctx::new(log, "admin", Timestamp(t))
}

fn slot_arithmetic() -> Outcome {
    let mut cp = plane(PlatformConfig::default());
    cp.create_project("admin", "tweet-analyzer").unwrap();
    cp.slots_init(100_000).map_err(|e| e.to_string())?;
    cp.carve_dedicated("tweet_analyzer", 30_000, "tweet-analyzer").map_err(|e| e.to_string())?;
    let status = cp.slot_status();
    let caps: BTreeMap<_, _> = status.reservations.iter().map(|r| (r.name.clone(), r.capacity)).collect();
    ensure!(status.default_capacity == 70_000, "default {}", status.default_capacity);
    ensure!(caps.get("tweet_analyzer") == Some(&30_000), "{caps:?}");

    let mut runner = TestRunner::deterministic();
    let mut pool = SlotPool::new(100_000);
    let mut log = AuditLog::new();
    let mut total = 100_000u64;
    let mut violations = Vec::new();
    let mut now = 0;
    let names = ["tweet_analyzer", "ads", "search"];
    for step in 0..1_000usize {
        let (op, a, b, c): (u8, usize, u64, u64) = sample(&mut runner, (0u8..6, 0usize..5, 1u64..40_000, 0u64..600));
        let mut cx = Ctx::new(&mut log, "admin", Timestamp(now));
        match op {
            0 => drop(pool.carve_dedicated(&mut cx, names[a % 3], b, &format!("p{a}"))),
            1 => drop(pool.release_dedicated(&mut cx, names[a % 3])),
            2 => {
                pool.purchase_slots(&mut cx, b / 4).map_err(|e| e.to_string())?;
                total += b / 4;
            }
            3 => {
                let req = SlotRequest::new(format!("j{step}"), format!("p{a}"), b, JobKind::Query).lasting(Duration(c + 1));
                drop(pool.schedule(&mut cx, req));
            }
            4 => drop(pool.complete(&mut cx, &format!("j{}", step.saturating_sub(c as usize % 20)), JobResult::Succeeded)),
            _ => {
                now += c;
                let mut cx = Ctx::new(&mut log, "admin", Timestamp(now));
                pool.run_due(&mut cx).map_err(|e| e.to_string())?;
            }
        }
        let s = pool.status();
        let capacity: u64 = s.reservations.iter().map(|r| r.capacity).sum();
        if s.total_purchased != total || capacity != total {
            violations.push(format!("step {step}: total {} capacity {capacity} expected {total}", s.total_purchased));
        }
        for r in &s.reservations {
            let running: u64 = pool
                .jobs()
                .filter(|j| j.reservation == r.name && j.state == JobState::Running)
                .map(|j| j.slots_needed)
                .sum();
            if running != r.allocated || running > r.capacity {
                violations.push(format!("step {step}: {} allocates {running} of {}", r.name, r.capacity));
            }
        }
    }
    ensure!(violations.is_empty(), "{} violations, first {}", violations.len(), violations[0]);

    let wait = |carve: bool| -> u64 {
        let mut log = AuditLog::new();
        let mut pool = SlotPool::new(100_000);
        if carve {
            pool.carve_dedicated(&mut cx(&mut log, 0), "tweet_analyzer", 30_000, "ta").unwrap();
        }
        let hog = pool.default_capacity();
        pool.schedule(&mut cx(&mut log, 0), SlotRequest::new("hog", "adversary", hog, JobKind::Analytics).lasting(Duration::hours(4)))
            .unwrap();
        for i in 0..30 {
            pool.run_due(&mut cx(&mut log, i * 60)).unwrap();
            let req = SlotRequest::new(format!("small{i}"), "ta", 1_000, JobKind::Query).lasting(Duration(300));
            pool.schedule(&mut cx(&mut log, i * 60), req).unwrap();
        }
        while let Some(t) = pool.next_due() {
            pool.run_due(&mut cx(&mut log, t.0)).unwrap();
        }
        pool.jobs()
            .filter(|j| j.project == "ta")
            .map(|j| j.started_at.expect("started").since(j.submitted_at).0)
            .sum()
    };
    let (shared, dedicated) = (wait(false), wait(true));
    ensure!(dedicated < shared, "total wait {dedicated}s with a reservation, {shared}s without");
    ensure!(dedicated == 0, "dedicated jobs waited {dedicated}s");
    Ok(())
}

fn capability_matrix() -> Outcome {
    use DataFormat::*;
    let expected = [
        (Tool::Blaster, vec![Parquet, Lzo], true, true, true, true),
        (Tool::Bid, vec![Parquet, Csv, Tsv], true, true, true, true),
        (Tool::Dataflow, vec![Lzo], false, true, true, false),
    ];
    let mut cells = 0;
    for (row, (tool, formats, idempotent, slots, backfill, partitioned)) in ToolCapability::table().iter().zip(expected) {
        let got_formats: BTreeSet<_> = row.formats.iter().copied().collect();
        let want_formats: BTreeSet<_> = formats.into_iter().collect();
        for (name, ok) in [
            ("formats", got_formats == want_formats),
            ("idempotent", row.idempotent == idempotent),
            ("slots", row.requires_slots == slots),
            ("backfill", row.backfill == backfill),
            ("partitioned", row.partitioned == partitioned),
        ] {
            ensure!(row.tool == tool && ok, "{tool} {name} differs");
            cells += 1;
        }
    }
    ensure!(cells == 15, "{cells} cells checked");

    let (mut cp, dest) = load_plane();
    let r = cp.submit_transfer(REPLICATOR, transfer(Tool::Dataflow, Parquet, "a", &dest));
    ensure!(matches!(r, Err(Error::Ingestion(IngestionError::UnsupportedFormat { .. }))), "dataflow+parquet: {r:?}");
    let mut partitioned = transfer(Tool::Dataflow, Lzo, "a", &dest);
    partitioned.partitioned_dest = true;
    let r = cp.submit_transfer(REPLICATOR, partitioned);
    ensure!(matches!(r, Err(Error::Ingestion(IngestionError::PartitionedUnsupported(_)))), "partitioned dataflow: {r:?}");
    let a = cp.submit_transfer(REPLICATOR, transfer(Tool::Bid, Parquet, "a", &dest)).map_err(|e| e.to_string())?;
    let b = cp.submit_transfer(REPLICATOR, transfer(Tool::Bid, Parquet, "a", &dest)).map_err(|e| e.to_string())?;
    ensure!(b.deduplicated && a.job.job_id == b.job.job_id, "bid duplicate was not deduplicated");
    let c = cp.submit_transfer(REPLICATOR, transfer(Tool::Dataflow, Lzo, "a", &dest)).map_err(|e| e.to_string())?;
    let d = cp.submit_transfer(REPLICATOR, transfer(Tool::Dataflow, Lzo, "a", &dest)).map_err(|e| e.to_string())?;
    ensure!(!d.deduplicated && c.job.job_id != d.job.job_id, "dataflow duplicate was deduplicated");
    Ok(())
}

/// One scripted operation; returns the number of events it must log.
fn scripted_op(cp: &mut ControlPlane, step: usize, pick: (u8, usize, u64)) -> Result<usize, String> {
    let (op, a, b) = pick;
    let projects = ["alpha", "beta", "gamma"];
    let p = projects[a % 3];
    let people = ["ann", "bob", "cat"];
    let who = people[a % 3];
    let one = |ok: bool| usize::from(ok);
    Ok(match op {
        0 => one(cp.create_dataset("admin", p, &format!("d{}", b % 40)).is_ok()),
        1 => one(cp.create_table("admin", p, "d", &format!("t{}", b % 40), b % 12_000 + 1).is_ok()),
        2 => one(cp.grant("admin", &ResourceId::dataset(p, "d"), who, Role::Reader).map_err(|e| e.to_string())?),
        3 => one(cp.revoke("admin", &ResourceId::dataset(p, "d"), who, Role::Reader).map_err(|e| e.to_string())?),
        4 => one(cp.table_operation(who, &ResourceId::table(p, "d", "t"), TableOpKind::DataWrite, OpOutcome::Succeeded).is_ok()),
        5 => {
            cp.check_access(who, &ResourceId::table(p, "d", "t"), AccessAction::Read).map_err(|e| e.to_string())?;
            1
        }
        6 => {
            let req = SlotRequest::new(format!("job{step}"), p, b % 50_000 + 1, JobKind::Query).lasting(Duration(b % 600 + 1));
            one(cp.schedule(who, req).is_ok())
        }
        7 => cp.complete_job(&format!("job{}", step.saturating_sub(a)), JobResult::Failed).map_or(0, |t| t.len()),
        8 => one(cp.api_call(who, p, ApiCallKind::ReadRows).is_ok()),
        9 => cp.ensure_identity(&format!("svc{}", b % 30), bigbird_core::identity::PrincipalKind::ServiceAccountUser)
            .map(|(_, created)| one(created))
            .map_err(|e| e.to_string())?,
        _ => {
            let r = cp.advance_clock(Duration(b % 7_200)).map_err(|e| e.to_string())?;
            r.transitions + r.rotations
        }
    })
}

fn audit_completeness(dir: &Path) -> Outcome {
    let log_path = dir.join("audit.jsonl");
    let state_path = dir.join("state.json");
    let sink = FileAuditSink::open(&log_path).map_err(|e| e.to_string())?;
    let mut cp = ControlPlane::new(PlatformConfig::default(), Box::new(sink)).map_err(|e| e.to_string())?;
    for p in ["alpha", "beta", "gamma"] {
        cp.create_project("admin", p).map_err(|e| e.to_string())?;
        cp.create_dataset("admin", p, "d").map_err(|e| e.to_string())?;
        cp.create_table("admin", p, "d", "t", 5).map_err(|e| e.to_string())?;
    }
    let mut runner = TestRunner::deterministic();
    let strategy = (0u8..11, 0usize..8, 0u64..1_000_000);
    let mut mismatches = Vec::new();
    for step in 0..1_000 {
        let pick = sample(&mut runner, &strategy);
        let before = cp.audit().events().len();
        let expected = scripted_op(&mut cp, step, pick)?;
        let got = cp.audit().events().len() - before;
        if got != expected {
            mismatches.push(format!("step {step} {pick:?}: {got} events, {expected} expected"));
        }
    }
    ensure!(mismatches.is_empty(), "{} mismatches, first {}", mismatches.len(), mismatches[0]);
    let events = cp.audit().events().to_vec();
    check_dense(&events).map_err(|e| e.to_string())?;
    let reread = FileAuditSink::read(&log_path).map_err(|e| e.to_string())?;
    ensure!(reread == events, "re-read log differs");

    snapshot::save(&state_path, cp.state()).map_err(|e| e.to_string())?;
    let state = snapshot::load(&state_path).map_err(|e| e.to_string())?;
    ensure!(&state == cp.state(), "restored state differs");

    // Continue the original and a restored copy with the same tail.
    let config = cp.config().clone();
    let copy_log = dir.join("copy.jsonl");
    std::fs::copy(&log_path, &copy_log).map_err(|e| e.to_string())?;
    let sink = FileAuditSink::open(&copy_log).map_err(|e| e.to_string())?;
    let mut copy = ControlPlane::from_state(config, state, Box::new(sink)).map_err(|e| e.to_string())?;
    for step in 1_000..1_050 {
        let pick = sample(&mut runner, &strategy);
        scripted_op(&mut cp, step, pick)?;
        scripted_op(&mut copy, step, pick)?;
    }
    ensure!(cp.audit().events() == copy.audit().events(), "restored plane logged different events");
    ensure!(cp.state() == copy.state(), "restored plane diverged");
    let a = FileAuditSink::read(&log_path).map_err(|e| e.to_string())?;
    let b = FileAuditSink::read(&copy_log).map_err(|e| e.to_string())?;
    ensure!(a == b && a.as_slice() == cp.audit().events(), "log files differ");
    Ok(())
}

#[derive(Debug, Clone)]
struct TraceJob {
    submit: u64,
    project: usize,
    slots: u64,
    duration: u64,
    failed: bool,
}

const TRACE_END: u64 = 8 * 3_600;
const TRACE_PROJECTS: [&str; 4] = ["p0", "p1", "p2", "p3"];

fn trace_rules() -> Vec<AlertRule> {
    vec![
        AlertRule {
            name: "busy".into(),
            metric: MetricName::SlotsUsed,
            dimensions: Dims::new(),
            comparator: Comparator::Gt,
            threshold: 5_000.0,
            notify: "pager:slots".into(),
        },
        AlertRule {
            name: "failing".into(),
            metric: MetricName::FailedJobsPerProject,
            dimensions: Dims::new(),
            comparator: Comparator::Ge,
            threshold: 12.0,
            notify: "mail:owners".into(),
        },
    ]
}

/// Metric values at poll time `t`, straight from the trace.
fn brute_force(jobs: &[TraceJob], t: u64) -> BTreeMap<(MetricName, Dims), u64> {
    let dim = |k: &str, v: &str| Dims::from([(k.to_string(), v.to_string())]);
    let seen: Vec<&TraceJob> = jobs.iter().filter(|j| j.submit < t).collect();
    let running: Vec<&&TraceJob> = seen.iter().filter(|j| t < j.submit + j.duration).collect();
    let mut out = BTreeMap::new();
    out.insert((MetricName::CurrentTotalJobs, Dims::new()), running.len() as u64);
    for (p, name) in TRACE_PROJECTS.iter().enumerate() {
        let mine: Vec<&&TraceJob> = seen.iter().filter(|j| j.project == p).collect();
        if mine.is_empty() {
            continue;
        }
        let done: Vec<_> = mine.iter().filter(|j| j.submit + j.duration <= t).collect();
        out.insert((MetricName::ExecutionTimePerJobPerProject, dim("project", name)), done.iter().map(|j| j.duration).sum());
        out.insert((MetricName::FailedJobsPerProject, dim("project", name)), done.iter().filter(|j| j.failed).count() as u64);
    }
    let default = dim("reservation", "default");
    out.insert((MetricName::SlotsAllocated, default.clone()), 100_000);
    out.insert((MetricName::SlotsUsed, default.clone()), running.iter().map(|j| j.slots).sum());
    out.insert((MetricName::JobsWaitingForSlots, default), 0);
    out.insert((MetricName::DegradationWarnings, Dims::new()), 0);
    out
}

fn observability() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let strategy = (0u64..6 * 3_600, 0usize..4, 1u64..150, 1u64..1_800, proptest::bool::weighted(0.2));
    let mut jobs: Vec<TraceJob> = (0..500)
        .map(|_| {
            let (submit, project, slots, duration, failed) = sample(&mut runner, &strategy);
            TraceJob { submit, project, slots, duration, failed }
        })
        .collect();
    jobs.sort_by_key(|j| j.submit);

    let config = PlatformConfig { alert_rules: trace_rules(), ..PlatformConfig::default() };
    let mut cp = plane(config);
    for p in TRACE_PROJECTS {
        cp.create_project("admin", p).map_err(|e| e.to_string())?;
    }
    for (i, j) in jobs.iter().enumerate() {
        cp.advance_to(Timestamp(j.submit)).map_err(|e| e.to_string())?;
        let result = if j.failed { JobResult::Failed } else { JobResult::Succeeded };
        let req = SlotRequest::new(format!("job{i:03}"), TRACE_PROJECTS[j.project], j.slots, JobKind::Query)
            .lasting(Duration(j.duration))
            .ending(result);
        cp.schedule("analyst", req).map_err(|e| e.to_string())?;
    }
    cp.advance_to(Timestamp(TRACE_END)).map_err(|e| e.to_string())?;

    let mut want: BTreeMap<(MetricName, Dims), Vec<(u64, u64)>> = BTreeMap::new();
    let mut last: BTreeMap<(String, Dims), u64> = BTreeMap::new();
    let mut want_firings = Vec::new();
    for t in (60..=TRACE_END).step_by(60) {
        let values = brute_force(&jobs, t);
        for rule in trace_rules() {
            for ((metric, dims), v) in &values {
                if *metric != rule.metric || !rule.comparator.holds(*v as f64, rule.threshold) {
                    continue;
                }
                let key = (rule.name.clone(), dims.clone());
                if last.get(&key).is_some_and(|l| t - l < 300) {
                    continue;
                }
                last.insert(key, t);
                want_firings.push((rule.name.clone(), dims.clone(), *v, t));
            }
        }
        for (k, v) in values {
            want.entry(k).or_default().push((t, v));
        }
    }
    let got: BTreeMap<_, _> = cp
        .metrics()
        .series()
        .map(|s| ((s.metric, s.dimensions), s.points.iter().map(|p| (p.at.0, p.value)).collect::<Vec<_>>()))
        .collect();
    let points: usize = want.values().map(Vec::len).sum();
    ensure!(got == want, "collector series differ from brute force ({points} points expected)");
    let fired: Vec<_> = cp
        .alerting()
        .firings()
        .iter()
        .map(|f| (f.rule.clone(), f.dimensions.clone(), f.value, f.at.0))
        .collect();
    ensure!(!want_firings.is_empty(), "trace never crosses a threshold");
    ensure!(fired == want_firings, "{} firings, {} in the replay", fired.len(), want_firings.len());
    Ok(())
}

fn watchdog() -> Outcome {
    const HOUR: u64 = 3_600;
    let now = 48 * HOUR;
    let mut cp = plane(PlatformConfig::default());
    let mut stuck = BTreeSet::new();
    for i in 0..100u64 {
        let path = format!("gcs/log/category-{i:03}/2020/01/01");
        let mut s = DatasetStatus::new(path.clone());
        let (hdfs, gcs, bq) = match i {
            5 | 23 | 61 | 90 => (Some(now - 7 * HOUR), None, None),
            12 | 47 | 77 => (Some(now - 30 * HOUR), Some(now - 8 * HOUR), None),
            i if i % 3 == 0 => (Some(now - 2 * HOUR), None, None),
            i if i % 3 == 1 => (Some(now - 9 * HOUR), Some(now - 5 * HOUR), None),
            _ => (Some(now - 40 * HOUR), Some(now - 39 * HOUR), Some(now - 38 * HOUR)),
        };
        match i {
            5 | 23 | 61 | 90 => stuck.insert((path.clone(), Stage::HdfsToGcs)),
            12 | 47 | 77 => stuck.insert((path.clone(), Stage::GcsToBq)),
            _ => false,
        };
        (s.exists_hdfs, s.last_changed_hdfs) = (hdfs.is_some(), hdfs.map(Timestamp));
        (s.exists_gcs, s.last_changed_gcs) = (gcs.is_some(), gcs.map(Timestamp));
        (s.exists_bq, s.last_changed_bq) = (bq.is_some(), bq.map(Timestamp));
        cp.upsert_status(s).map_err(|e| e.to_string())?;
    }
    cp.advance_to(Timestamp(now)).map_err(|e| e.to_string())?;
    let findings = cp.watchdog_scan(None, None).map_err(|e| e.to_string())?;
    let got: BTreeSet<_> = findings.into_iter().map(|f| (f.logical_path, f.stage)).collect();
    ensure!(got.len() == 7 && got == stuck, "found {got:?}");
    Ok(())
}

/// Provision, ingest, schedule and run for 30 days; returns the snapshot
/// bytes and per-account rotation counts.
fn scenario(dir: &Path) -> Result<(Vec<u8>, BTreeMap<String, usize>), String> {
    let sink = FileAuditSink::open(&dir.join("audit.jsonl")).map_err(|e| e.to_string())?;
    let mut cp = ControlPlane::new(PlatformConfig::default(), Box::new(sink)).map_err(|e| e.to_string())?;
    let mut specs: Vec<_> = (0..20).map(|i| TenantSpec::user(format!("user{i:02}"))).collect();
    specs.extend((0..5).map(|i| TenantSpec::log(format!("logs-{i}"))));
    cp.reconcile(&specs).map_err(|e| e.to_string())?;
    for i in 0..5 {
        let dest: Destination = format!("twitter-logs-{i}-bql-project.logs-{i}.events").parse().unwrap();
        for day in 1..=4 {
            let src = format!("gs://log.logs-{i}.dp.twitter.domain/2020/01/0{day}").parse().unwrap();
            let mut req = TransferRequest::new(Tool::Blaster, src, dest.clone(), DataFormat::Lzo);
            req.duration = Some(Duration(600 * day));
            cp.submit_transfer(REPLICATOR, req).map_err(|e| e.to_string())?;
        }
    }
    cp.carve_dedicated("analysts", 20_000, "twitter-user00-bq-project").map_err(|e| e.to_string())?;
    for i in 0..40u64 {
        let project = format!("twitter-user{:02}-bq-project", i % 20);
        let req = SlotRequest::new(format!("q{i:02}"), project, 5_000 + 250 * i, JobKind::Query)
            .lasting(Duration(900 + 113 * i));
        cp.schedule("user00@gsuite.domain", req).map_err(|e| e.to_string())?;
    }
    cp.advance_clock(Duration::days(30)).map_err(|e| e.to_string())?;
    let path = dir.join("state.json");
    snapshot::save(&path, cp.state()).map_err(|e| e.to_string())?;
    let mut rotations = BTreeMap::new();
    for e in cp.audit().events().iter().filter(|e| e.action == AuditAction::KeyRotate) {
        *rotations.entry(e.resource.clone()).or_default() += 1;
    }
    for ident in cp.identity().identities() {
        rotations.entry(ident.shadow_email.clone()).or_insert(0);
    }
    Ok((std::fs::read(&path).map_err(|e| e.to_string())?, rotations))
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let (first, rotations) = scenario(a)?;
    let (second, _) = scenario(b)?;
    ensure!(first == second, "snapshots differ");
    let log_a = std::fs::read(a.join("audit.jsonl")).map_err(|e| e.to_string())?;
    let log_b = std::fs::read(b.join("audit.jsonl")).map_err(|e| e.to_string())?;
    ensure!(log_a == log_b, "audit logs differ");
    ensure!(rotations.len() == 21, "{} accounts", rotations.len());
    let wrong: Vec<_> = rotations.iter().filter(|(_, n)| **n != 4).collect();
    ensure!(wrong.is_empty(), "rotation counts {wrong:?}");
    Ok(())
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let sub = |name: &str| {
        let p = dir.path().join(name);
        std::fs::create_dir_all(&p).expect("create dir");
        p
    };
    let (audit_dir, run_a, run_b) = (sub("audit"), sub("run-a"), sub("run-b"));
    let criteria: Vec<Criterion> = vec![
        ("path mapping", Box::new(path_mapping)),
        ("provisioning at scale", Box::new(provisioning)),
        ("quota thresholds", Box::new(quota_suite)),
        ("slot arithmetic", Box::new(slot_arithmetic)),
        ("ingestion tool capabilities", Box::new(capability_matrix)),
        ("audit completeness", Box::new(move || audit_completeness(&audit_dir))),
        ("observability", Box::new(observability)),
        ("watchdog", Box::new(watchdog)),
        ("determinism", Box::new(move || determinism(&run_a, &run_b))),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match result {
            Ok(()) => println!("PASS {} {name} ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name} ({ms} ms): {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
