//! The `bigbird <noun> <verb>` command tree.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bigbird_core::identity::PrincipalKind;
use bigbird_core::ingestion::{DataFormat, DatasetStatus, Destination, Thresholds, Tool, TransferRequest};
use bigbird_core::observability::audit::{AuditAction, AuditFilter};
use bigbird_core::observability::info_schema::{JobFilter, Scope};
use bigbird_core::observability::MetricName;
use bigbird_core::path::{OnPremPath, PhysicalBucketPath};
use bigbird_core::platform::ControlPlane;
use bigbird_core::provision::{parse_tenants, TenantKind, TenantSpec};
use bigbird_core::slots::{JobKind, JobResult, JobState, Placement, SlotRequest};
use bigbird_core::{Duration, Timestamp};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::api::{self, ApiState};
use crate::audit_file::{AuditFileError, FileAuditSink};
use crate::config::{self, Config, ConfigError};
use crate::snapshot::{self, SnapshotError};

#[derive(Debug, Parser)]
#[command(name = "bigbird", version, about = "Hybrid-cloud big data control plane")]
pub struct Cli {
    /// Configuration file; overrides BIGBIRD_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format; goes before the command.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Principal recorded for the operation.
    #[arg(long = "as", global = true, value_name = "PRINCIPAL")]
    pub actor: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate between on-premise, logical and bucket paths.
    #[command(subcommand)]
    Path(PathCmd),
    /// Shadow accounts and keys.
    #[command(subcommand)]
    Identity(IdentityCmd),
    /// Reader group membership.
    #[command(subcommand)]
    Group(GroupCmd),
    /// Inspect the simulated cloud.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Reconcile tenants from a file.
    Provision {
        #[arg(long)]
        tenants: PathBuf,
        #[arg(long)]
        dry_run: bool,
    },
    /// Ensure identity, bucket and base ACLs for one tenant.
    Precondition { kind: String, name: String },
    /// Load jobs.
    #[command(subcommand)]
    Load(LoadCmd),
    /// Pipeline stage latency.
    #[command(subcommand)]
    Watchdog(WatchdogCmd),
    /// Slot reservations and scheduling.
    #[command(subcommand)]
    Slots(SlotsCmd),
    /// Query job statistics.
    #[command(subcommand)]
    Jobs(JobsCmd),
    #[command(subcommand)]
    Metrics(MetricsCmd),
    #[command(subcommand)]
    Alerts(AlertsCmd),
    #[command(subcommand)]
    Audit(AuditCmd),
    /// The virtual clock.
    #[command(subcommand)]
    Clock(ClockCmd),
    /// Serve the read-only admin API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum PathCmd {
    Map {
        path: String,
        #[arg(long)]
        suffix: Option<String>,
    },
    Unmap {
        uri: String,
        #[arg(long)]
        suffix: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum IdentityCmd {
    Ensure {
        name: String,
        #[arg(long, default_value = "service_account_user")]
        kind: String,
    },
    Rotate { shadow_email: String },
    /// List keys of one account.
    Keys { shadow_email: String },
}

#[derive(Debug, Subcommand)]
pub enum GroupCmd {
    Add { group: String, principal: String },
    Remove { group: String, principal: String },
}

#[derive(Debug, Subcommand)]
pub enum SimCmd {
    Dump,
    QuotaStatus { scope: String },
}

#[derive(Debug, Subcommand)]
pub enum LoadCmd {
    Submit(SubmitArgs),
    /// Tick at the current time, or advance the clock to `--until`.
    Tick {
        #[arg(long)]
        until: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[arg(long)]
    tool: String,
    #[arg(long)]
    src: String,
    #[arg(long)]
    dest: String,
    #[arg(long)]
    format: String,
    #[arg(long)]
    partitioned: bool,
    /// Inclusive range `<from>..<to>` in virtual seconds.
    #[arg(long)]
    backfill: Option<String>,
    #[arg(long)]
    duration: Option<String>,
    /// Simulate a failing job.
    #[arg(long)]
    fail: bool,
}

#[derive(Debug, Subcommand)]
pub enum WatchdogCmd {
    /// Track dataset statuses from a JSON-lines file.
    Import { file: PathBuf },
    Scan {
        /// Scan this JSON-lines file instead of the tracked statuses.
        #[arg(long)]
        statuses: Option<PathBuf>,
        /// `<hdfs->gcs>,<gcs->bq>` durations.
        #[arg(long)]
        thresholds: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SlotsCmd {
    Init { total: u64 },
    Carve {
        name: String,
        slots: u64,
        #[arg(long)]
        project: String,
    },
    Release { name: String },
    Purchase { slots: u64 },
    Status,
    Schedule {
        job_id: String,
        #[arg(long)]
        project: String,
        #[arg(long)]
        slots: u64,
        #[arg(long, default_value = "query")]
        kind: String,
        #[arg(long)]
        duration: Option<String>,
        #[arg(long)]
        fail: bool,
    },
    Complete {
        job_id: String,
        #[arg(long)]
        failed: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum JobsCmd {
    List {
        #[arg(long)]
        project: Option<String>,
        #[arg(long = "type")]
        job_type: Option<String>,
        #[arg(long)]
        state: Option<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    Dump {
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        project: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AlertsCmd {
    Eval,
}

#[derive(Debug, Subcommand)]
pub enum AuditCmd {
    Query {
        #[arg(long)]
        principal: Option<String>,
        #[arg(long)]
        action: Option<String>,
        #[arg(long)]
        resource: Option<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ClockCmd {
    Show,
    Advance { delta: String },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Operation(String),
    #[error("{0}")]
    Corrupt(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Operation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Corrupt(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SnapshotError> for CliError {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::Io { .. } => CliError::Operation(e.to_string()),
            _ => CliError::Corrupt(e.to_string()),
        }
    }
}

impl From<AuditFileError> for CliError {
    fn from(e: AuditFileError) -> Self {
        match e {
            AuditFileError::Io { .. } => CliError::Operation(e.to_string()),
            AuditFileError::Corrupt { .. } => CliError::Corrupt(e.to_string()),
        }
    }
}

impl From<bigbird_core::Error> for CliError {
    fn from(e: bigbird_core::Error) -> Self {
        CliError::Operation(e.to_string())
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Command output: text lines plus the equivalent structured value.
struct Output {
    lines: Vec<String>,
    json: Value,
    /// Exit with status 1 after printing.
    failed: bool,
}

impl Output {
    fn new(lines: Vec<String>, json: impl Serialize) -> Self {
        Output {
            lines,
            json: serde_json::to_value(json).expect("output serializes"),
            failed: false,
        }
    }

    fn failing(mut self, failed: bool) -> Self {
        self.failed = failed;
        self
    }
}

/// Parse `90`, `90s`, `15m`, `6h` or `30d`.
pub fn parse_duration(text: &str) -> Result<Duration, CliError> {
    let (digits, unit) = match text.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => (&text[..i], c),
        _ => (text, 's'),
    };
    let n: u64 = digits.parse().map_err(|_| usage(format!("bad duration `{text}`")))?;
    let unit = match unit {
        's' => 1,
        'm' => 60,
        'h' => 3600,
        'd' => 86_400,
        _ => return Err(usage(format!("bad duration unit in `{text}`"))),
    };
    n.checked_mul(unit)
        .map(Duration)
        .ok_or_else(|| usage(format!("duration `{text}` is too large")))
}

fn parse_thresholds(text: &str) -> Result<Thresholds, CliError> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| usage("thresholds are `<hdfs->gcs>,<gcs->bq>`"))?;
    Ok(Thresholds {
        hdfs_to_gcs: parse_duration(a.trim())?,
        gcs_to_bq: parse_duration(b.trim())?,
    })
}

fn read_statuses(path: &Path) -> Result<Vec<DatasetStatus>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn dims_text(d: &bigbird_core::observability::Dims) -> String {
    if d.is_empty() {
        return "-".into();
    }
    d.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Run one command line, writing results to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let format = cli.format;
    match execute(cli) {
        Ok(output) => {
            let _ = match format {
                Format::Text => output.lines.iter().try_for_each(|l| writeln!(out, "{l}")),
                Format::Json => writeln!(out, "{}", output.json),
            };
            u8::from(output.failed)
        }
        Err(e) => {
            let _ = match format {
                Format::Text => writeln!(err, "error: {e}"),
                Format::Json => writeln!(err, "{}", json!({ "error": e.to_string(), "exit_code": e.exit_code() })),
            };
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<Output, CliError> {
    let config = config::resolve(cli.config.as_deref())?;
    let platform = config.platform()?;
    match cli.command {
        Command::Path(cmd) => return path_cmd(cmd, &platform.domain_suffix),
        Command::Serve { listen } => return serve(&config, &platform, &listen),
        _ => {}
    }
    let state = snapshot::load_or_new(&config.state_path, &platform)?;
    let sink = FileAuditSink::open(&config.audit_log_path)?;
    let mut cp = ControlPlane::from_state(platform, state, Box::new(sink))?;
    let actor = cli
        .actor
        .unwrap_or_else(|| cp.config().automation_principal.clone());
    let before = snapshot::to_bytes(cp.state());
    let result = dispatch(&mut cp, &actor, cli.command);
    // Persist whatever was applied, even when the command failed part-way.
    let after = snapshot::to_bytes(cp.state());
    if after != before {
        snapshot::save(&config.state_path, cp.state())?;
    }
    result
}

fn path_cmd(cmd: PathCmd, default_suffix: &str) -> Result<Output, CliError> {
    match cmd {
        PathCmd::Map { path, suffix } => {
            let suffix = suffix.as_deref().unwrap_or(default_suffix);
            let onprem: OnPremPath = path.parse().map_err(|e: bigbird_core::path::PathError| usage(e.to_string()))?;
            let logical = onprem.to_logical();
            let physical = logical.to_physical(suffix).map_err(|e| usage(e.to_string()))?;
            Ok(Output::new(
                vec![logical.to_string(), physical.uri()],
                json!({ "logical": logical.to_string(), "physical": physical.uri() }),
            ))
        }
        PathCmd::Unmap { uri, suffix } => {
            let suffix = suffix.as_deref().unwrap_or(default_suffix);
            let physical: PhysicalBucketPath =
                uri.parse().map_err(|e: bigbird_core::path::PathError| usage(e.to_string()))?;
            let logical = physical.from_physical(suffix).map_err(|e| usage(e.to_string()))?;
            Ok(Output::new(vec![logical.to_string()], json!({ "logical": logical.to_string() })))
        }
    }
}

fn serve(config: &Config, platform: &bigbird_core::platform::PlatformConfig, listen: &str) -> Result<Output, CliError> {
    let state = snapshot::load_or_new(&config.state_path, platform)?;
    let audit = FileAuditSink::read(&config.audit_log_path)?;
    let api = Arc::new(ApiState { state, audit });
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Operation(e.to_string()))?;
    runtime
        .block_on(api::serve(listen, api))
        .map_err(|e| CliError::Operation(format!("serve {listen}: {e}")))?;
    Ok(Output::new(Vec::new(), Value::Null))
}

fn dispatch(cp: &mut ControlPlane, actor: &str, command: Command) -> Result<Output, CliError> {
    match command {
        Command::Path(_) | Command::Serve { .. } => unreachable!("handled before state is loaded"),
        Command::Identity(cmd) => identity_cmd(cp, cmd),
        Command::Group(GroupCmd::Add { group, principal }) => {
            let changed = cp.add_group_member(actor, &group, &principal)?;
            let word = if changed { "added" } else { "unchanged" };
            Ok(Output::new(vec![format!("{word} {principal} {group}")], json!({ "changed": changed })))
        }
        Command::Group(GroupCmd::Remove { group, principal }) => {
            let changed = cp.remove_group_member(actor, &group, &principal)?;
            let word = if changed { "removed" } else { "unchanged" };
            Ok(Output::new(vec![format!("{word} {principal} {group}")], json!({ "changed": changed })))
        }
        Command::Sim(SimCmd::Dump) => {
            let lines = cp
                .cloud()
                .nodes()
                .map(|n| {
                    let labels: Vec<_> = n.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    let mut line = format!("{} {}", n.kind.as_str(), n.id);
                    if !labels.is_empty() {
                        line.push(' ');
                        line.push_str(&labels.join(","));
                    }
                    line
                })
                .collect();
            Ok(Output::new(lines, cp.cloud()))
        }
        Command::Sim(SimCmd::QuotaStatus { scope }) => {
            let quotas = cp.cloud().quotas();
            let rows: Vec<_> = cp
                .cloud()
                .ledger()
                .status(&scope)
                .into_iter()
                .map(|(key, count)| {
                    json!({
                        "quota": key.quota,
                        "scope": key.scope,
                        "window_start": key.window_start,
                        "count": count,
                        "limit": quotas.limit(key.quota),
                    })
                })
                .collect();
            let lines = rows
                .iter()
                .map(|r| {
                    format!(
                        "{} {} {} {}/{}",
                        r["quota"].as_str().unwrap_or_default(),
                        r["scope"].as_str().unwrap_or_default(),
                        r["window_start"],
                        r["count"],
                        r["limit"]
                    )
                })
                .collect();
            Ok(Output::new(lines, rows))
        }
        Command::Provision { tenants, dry_run } => {
            let text = std::fs::read_to_string(&tenants)
                .map_err(|e| usage(format!("cannot read {}: {e}", tenants.display())))?;
            let specs = parse_tenants(&text).map_err(|e| usage(format!("{}: {e}", tenants.display())))?;
            let report = if dry_run {
                cp.reconcile_dry_run(&specs)?
            } else {
                cp.reconcile(&specs)?
            };
            let failed = !report.failed.is_empty();
            Ok(Output::new(report.lines(), &report).failing(failed))
        }
        Command::Precondition { kind, name } => {
            let kind = TenantKind::parse(&kind).ok_or_else(|| usage(format!("unknown tenant kind `{kind}`")))?;
            let ok = cp.precondition(&TenantSpec { kind, name });
            Ok(Output::new(vec![ok.to_string()], json!({ "ready": ok })).failing(!ok))
        }
        Command::Load(LoadCmd::Submit(args)) => submit(cp, actor, args),
        Command::Load(LoadCmd::Tick { until }) => {
            let lines: Vec<String>;
            let value;
            match until {
                Some(t) => {
                    if Timestamp(t) < cp.now() {
                        return Err(usage(format!("--until {t} is before the current time {}", cp.now().0)));
                    }
                    let report = cp.advance_to(Timestamp(t))?;
                    lines = vec![format!("now {} transitions {}", report.now.0, report.transitions)];
                    value = serde_json::to_value(&report).expect("serializes");
                }
                None => {
                    let transitions = cp.ingestion_tick()?;
                    lines = transitions
                        .iter()
                        .map(|t| {
                            let from = t.from.map_or("-", JobState::as_str);
                            format!("{} {}->{} {}", t.job_id, from, t.to.as_str(), t.at.0)
                        })
                        .collect();
                    value = serde_json::to_value(&transitions).expect("serializes");
                }
            }
            Ok(Output::new(lines, value))
        }
        Command::Watchdog(WatchdogCmd::Import { file }) => {
            let statuses = read_statuses(&file)?;
            let n = statuses.len();
            for s in statuses {
                cp.upsert_status(s)?;
            }
            Ok(Output::new(vec![format!("imported {n}")], json!({ "imported": n })))
        }
        Command::Watchdog(WatchdogCmd::Scan { statuses, thresholds }) => {
            let thresholds = thresholds.as_deref().map(parse_thresholds).transpose()?;
            let statuses = statuses.as_deref().map(read_statuses).transpose()?;
            let findings = cp
                .watchdog_scan(statuses.as_deref(), thresholds.as_ref())
                .map_err(|e| usage(e.to_string()))?;
            let lines = findings
                .iter()
                .map(|f| format!("STUCK {} {} {}", f.logical_path, f.stage.as_str(), f.age.0))
                .collect();
            Ok(Output::new(lines, &findings))
        }
        Command::Slots(cmd) => slots_cmd(cp, actor, cmd),
        Command::Jobs(JobsCmd::List {
            project,
            job_type,
            state,
            from,
            to,
        }) => {
            let filter = JobFilter {
                project: None,
                job_type: job_type
                    .map(|t| JobKind::parse(&t).ok_or_else(|| usage(format!("unknown job type `{t}`"))))
                    .transpose()?,
                state: state
                    .map(|s| JobState::parse(&s).ok_or_else(|| usage(format!("unknown job state `{s}`"))))
                    .transpose()?,
                from: from.map(Timestamp),
                to: to.map(Timestamp),
            };
            let scope = project.map_or(Scope::Organization, Scope::Project);
            let rows = cp.info_schema_query(&scope, &filter)?;
            let lines = rows
                .iter()
                .map(|r| {
                    format!(
                        "{} {} {} {} {} {} {}",
                        r.job_id,
                        r.project,
                        r.job_type.as_str(),
                        r.state.as_str(),
                        r.reservation_name,
                        r.slots_consumed,
                        r.execution_time.map_or("-".to_string(), |d| d.0.to_string())
                    )
                })
                .collect();
            Ok(Output::new(lines, &rows))
        }
        Command::Metrics(MetricsCmd::Dump { metric, project }) => {
            let metric = metric
                .map(|m| MetricName::parse(&m).ok_or_else(|| usage(format!("unknown metric `{m}`"))))
                .transpose()?;
            let series = api::filter_series(cp.state(), metric, project.as_deref());
            let lines = series
                .iter()
                .flat_map(|s| {
                    s.points
                        .iter()
                        .map(move |p| format!("{} {} {} {}", s.metric, dims_text(&s.dimensions), p.at.0, p.value))
                })
                .collect();
            Ok(Output::new(lines, &series))
        }
        Command::Alerts(AlertsCmd::Eval) => {
            let firings = cp.evaluate_alerts();
            let lines = firings
                .iter()
                .map(|f| {
                    format!(
                        "FIRING {} {} {} {} {} {}",
                        f.rule,
                        f.metric,
                        dims_text(&f.dimensions),
                        f.value,
                        f.point_at.0,
                        f.notify
                    )
                })
                .collect();
            Ok(Output::new(lines, &firings))
        }
        Command::Audit(AuditCmd::Query {
            principal,
            action,
            resource,
            from,
            to,
        }) => {
            let action = action
                .map(|a| AuditAction::parse(&a).ok_or_else(|| usage(format!("unknown audit action `{a}`"))))
                .transpose()?;
            let events = cp.audit_query(&AuditFilter {
                principal,
                action,
                resource_prefix: resource,
                from: from.map(Timestamp),
                to: to.map(Timestamp),
            });
            let lines = events
                .iter()
                .map(|e| {
                    let outcome = serde_json::to_value(e.outcome).expect("serializes");
                    format!(
                        "{} {} {} {} {} {}",
                        e.sequence_number,
                        e.timestamp.0,
                        e.principal,
                        e.action,
                        e.resource,
                        outcome.as_str().unwrap_or_default()
                    )
                })
                .collect();
            Ok(Output::new(lines, &events))
        }
        Command::Clock(ClockCmd::Show) => {
            let now = cp.now();
            Ok(Output::new(vec![now.0.to_string()], json!({ "now": now })))
        }
        Command::Clock(ClockCmd::Advance { delta }) => {
            let report = cp.advance_clock(parse_duration(&delta)?)?;
            let lines = vec![format!(
                "now {} rotations {} transitions {} polls {} firings {}",
                report.now.0,
                report.rotations,
                report.transitions,
                report.polls,
                report.firings.len()
            )];
            Ok(Output::new(lines, &report))
        }
    }
}

fn identity_cmd(cp: &mut ControlPlane, cmd: IdentityCmd) -> Result<Output, CliError> {
    match cmd {
        IdentityCmd::Ensure { name, kind } => {
            let kind = PrincipalKind::parse(&kind).ok_or_else(|| usage(format!("unknown principal kind `{kind}`")))?;
            let (identity, created) = cp.ensure_identity(&name, kind)?;
            let word = if created { "CREATED" } else { "UNCHANGED" };
            Ok(Output::new(
                vec![format!("{word} {} {}", identity.shadow_email, identity.interactive_email)],
                json!({ "created": created, "identity": identity }),
            ))
        }
        IdentityCmd::Rotate { shadow_email } => {
            let key = cp.rotate_key(&shadow_email)?;
            Ok(Output::new(vec![format!("{} {}", key.key_id, key.secret_fingerprint)], &key))
        }
        IdentityCmd::Keys { shadow_email } => {
            let keys = cp.identity().keys(&shadow_email);
            let lines = keys
                .iter()
                .map(|k| {
                    let state = serde_json::to_value(k.state).expect("serializes");
                    format!("{} {} {} {}", k.key_id, state.as_str().unwrap_or_default(), k.created_at.0, k.secret_fingerprint)
                })
                .collect();
            Ok(Output::new(lines, keys))
        }
    }
}

fn submit(cp: &mut ControlPlane, actor: &str, args: SubmitArgs) -> Result<Output, CliError> {
    let tool = Tool::parse(&args.tool).ok_or_else(|| usage(format!("unknown tool `{}`", args.tool)))?;
    let format = DataFormat::parse(&args.format).ok_or_else(|| usage(format!("unknown format `{}`", args.format)))?;
    let source: PhysicalBucketPath = args
        .src
        .parse()
        .map_err(|e: bigbird_core::path::PathError| usage(e.to_string()))?;
    let destination: Destination = args.dest.parse().map_err(|e: bigbird_core::ingestion::BadDestination| usage(e.to_string()))?;
    let mut req = TransferRequest::new(tool, source, destination, format);
    req.partitioned_dest = args.partitioned;
    if let Some(range) = &args.backfill {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| usage("backfill is `<from>..<to>`"))?;
        let parse = |s: &str| s.parse::<u64>().map(Timestamp).map_err(|_| usage(format!("bad backfill bound `{s}`")));
        req.backfill = Some((parse(a)?, parse(b)?));
    }
    req.duration = args.duration.as_deref().map(parse_duration).transpose()?;
    if args.fail {
        req.result = JobResult::Failed;
    }
    let submitted = cp.submit_transfer(actor, req)?;
    let mut line = format!("{} {}", submitted.job.job_id, submitted.job.state.as_str());
    if submitted.deduplicated {
        line.push_str(" deduplicated");
    }
    Ok(Output::new(vec![line], &submitted))
}

fn slots_cmd(cp: &mut ControlPlane, actor: &str, cmd: SlotsCmd) -> Result<Output, CliError> {
    let ok = |what: String| Ok(Output::new(vec![what.clone()], json!({ "ok": what })));
    match cmd {
        SlotsCmd::Init { total } => {
            cp.slots_init(total)?;
            ok(format!("total {total}"))
        }
        SlotsCmd::Carve { name, slots, project } => {
            cp.carve_dedicated(&name, slots, &project)?;
            ok(format!("carved {name} {slots} {project}"))
        }
        SlotsCmd::Release { name } => {
            cp.release_dedicated(&name)?;
            ok(format!("released {name}"))
        }
        SlotsCmd::Purchase { slots } => {
            cp.purchase_slots(slots)?;
            ok(format!("purchased {slots}"))
        }
        SlotsCmd::Status => {
            let status = cp.slot_status();
            let mut lines = vec![format!("total {}", status.total_purchased)];
            lines.extend(status.reservations.iter().map(|r| {
                format!(
                    "reservation {} capacity {} allocated {} free {} running {} queued {}",
                    r.name, r.capacity, r.allocated, r.free, r.running, r.queued
                )
            }));
            Ok(Output::new(lines, &status))
        }
        SlotsCmd::Schedule {
            job_id,
            project,
            slots,
            kind,
            duration,
            fail,
        } => {
            let kind = JobKind::parse(&kind).ok_or_else(|| usage(format!("unknown job kind `{kind}`")))?;
            let mut req = SlotRequest::new(job_id.clone(), project, slots, kind);
            if let Some(d) = duration {
                req = req.lasting(parse_duration(&d)?);
            }
            if fail {
                req = req.ending(JobResult::Failed);
            }
            let placement = cp.schedule(actor, req)?;
            let word = match placement {
                Placement::Allocated => "running",
                Placement::Queued => "queued",
            };
            ok(format!("{job_id} {word}"))
        }
        SlotsCmd::Complete { job_id, failed } => {
            let result = if failed { JobResult::Failed } else { JobResult::Succeeded };
            let transitions = cp.complete_job(&job_id, result)?;
            let lines = transitions
                .iter()
                .map(|t| {
                    let from = t.from.map_or("-", JobState::as_str);
                    format!("{} {}->{} {}", t.job_id, from, t.to.as_str(), t.at.0)
                })
                .collect();
            Ok(Output::new(lines, &transitions))
        }
    }
}
