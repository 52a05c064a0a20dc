//! The TOML configuration file.
//!
//! Every key is optional; absent keys take their defaults, so an empty file
//! is a complete configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use bigbird_core::cloud::{QuotaName, QuotaTable};
use bigbird_core::identity::IdentityConfig;
use bigbird_core::ingestion::Thresholds;
use bigbird_core::observability::AlertRule;
use bigbird_core::platform::PlatformConfig;
use bigbird_core::provision::NamingPolicy;
use bigbird_core::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CONFIG_PATH: &str = "bigbird.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub state_path: PathBuf,
    pub audit_log_path: PathBuf,
    pub domain_suffix: String,
    pub slot_total: u64,
    pub poll_interval_secs: i64,
    pub alert_cooldown_secs: i64,
    pub load_job_duration_secs: i64,
    pub audit_denied: bool,
    pub automation_principal: String,
    pub system_principal: String,
    pub identity: IdentitySection,
    pub naming: NamingSection,
    pub watchdog: WatchdogSection,
    /// Overrides of the default quota limits, keyed by rule name.
    pub quotas: BTreeMap<String, u64>,
    pub alerts: Vec<AlertRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    pub gsuite_domain: String,
    pub service_account_domain: String,
    pub rotation_interval_days: i64,
    pub grace_period_days: i64,
    pub key_seed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NamingSection {
    pub user_project_template: String,
    pub log_project_template: String,
    pub central_logs_project: String,
    pub gcs_project: String,
    pub load_project: String,
    pub storage_label_key: String,
    pub storage_label_value: String,
    pub replication_account: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WatchdogSection {
    pub hdfs_to_gcs_secs: i64,
    pub gcs_to_bq_secs: i64,
}

impl Default for Config {
    fn default() -> Self {
        let p = PlatformConfig::default();
        Config {
            state_path: "bigbird-state.json".into(),
            audit_log_path: "bigbird-audit.jsonl".into(),
            domain_suffix: p.domain_suffix,
            slot_total: p.slot_total,
            poll_interval_secs: p.poll_interval.0 as i64,
            alert_cooldown_secs: p.alert_cooldown.0 as i64,
            load_job_duration_secs: p.load_job_duration.0 as i64,
            audit_denied: p.audit_denied,
            automation_principal: p.automation_principal,
            system_principal: p.system_principal,
            identity: IdentitySection::default(),
            naming: NamingSection::default(),
            watchdog: WatchdogSection::default(),
            quotas: BTreeMap::new(),
            alerts: Vec::new(),
        }
    }
}

impl Default for IdentitySection {
    fn default() -> Self {
        let c = IdentityConfig::default();
        IdentitySection {
            gsuite_domain: c.gsuite_domain,
            service_account_domain: c.service_account_domain,
            rotation_interval_days: (c.rotation_interval.0 / 86_400) as i64,
            grace_period_days: (c.grace_period.0 / 86_400) as i64,
            key_seed: c.key_seed,
        }
    }
}

impl Default for NamingSection {
    fn default() -> Self {
        let n = NamingPolicy::default();
        NamingSection {
            user_project_template: n.user_project_template,
            log_project_template: n.log_project_template,
            central_logs_project: n.central_logs_project,
            gcs_project: n.gcs_project,
            load_project: n.load_project,
            storage_label_key: n.storage_label.0,
            storage_label_value: n.storage_label.1,
            replication_account: n.replication_account,
        }
    }
}

impl Default for WatchdogSection {
    fn default() -> Self {
        let t = Thresholds::default();
        WatchdogSection {
            hdfs_to_gcs_secs: t.hdfs_to_gcs.0 as i64,
            gcs_to_bq_secs: t.gcs_to_bq.0 as i64,
        }
    }
}

/// One rejected key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {}", join(.0))]
    Invalid(Vec<FieldError>),
}

fn join(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn positive(errors: &mut Vec<FieldError>, field: &str, value: i64, unit: u64) -> Duration {
    if value <= 0 {
        errors.push(FieldError {
            field: field.into(),
            message: format!("must be positive, got {value}"),
        });
        return Duration(0);
    }
    Duration(value as u64 * unit)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        config.platform()?;
        Ok(config)
    }

    /// Load from a file. Relative state and audit paths are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            config.state_path = dir.join(&config.state_path);
            config.audit_log_path = dir.join(&config.audit_log_path);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The validated platform configuration.
    pub fn platform(&self) -> Result<PlatformConfig, ConfigError> {
        let mut errors = Vec::new();
        let id = &self.identity;
        let rotation_interval = positive(&mut errors, "identity.rotation_interval_days", id.rotation_interval_days, 86_400);
        let grace_period = positive(&mut errors, "identity.grace_period_days", id.grace_period_days, 86_400);
        let poll_interval = positive(&mut errors, "poll_interval_secs", self.poll_interval_secs, 1);
        let load_job_duration = positive(&mut errors, "load_job_duration_secs", self.load_job_duration_secs, 1);
        let hdfs_to_gcs = positive(&mut errors, "watchdog.hdfs_to_gcs_secs", self.watchdog.hdfs_to_gcs_secs, 1);
        let gcs_to_bq = positive(&mut errors, "watchdog.gcs_to_bq_secs", self.watchdog.gcs_to_bq_secs, 1);
        if self.alert_cooldown_secs < 0 {
            errors.push(FieldError {
                field: "alert_cooldown_secs".into(),
                message: format!("must not be negative, got {}", self.alert_cooldown_secs),
            });
        }

        let mut quotas = QuotaTable::default();
        for (name, limit) in &self.quotas {
            match QuotaName::parse(name) {
                Some(q) => quotas.set_limit(q, *limit),
                None => errors.push(FieldError {
                    field: format!("quotas.{name}"),
                    message: "unknown quota rule".into(),
                }),
            }
        }

        let n = &self.naming;
        let naming = NamingPolicy {
            user_project_template: n.user_project_template.clone(),
            log_project_template: n.log_project_template.clone(),
            central_logs_project: n.central_logs_project.clone(),
            gcs_project: n.gcs_project.clone(),
            load_project: n.load_project.clone(),
            storage_label: (n.storage_label_key.clone(), n.storage_label_value.clone()),
            replication_account: n.replication_account.clone(),
        };
        if let Err(e) = naming.validate() {
            errors.push(FieldError {
                field: "naming".into(),
                message: e.to_string(),
            });
        }
        if bigbird_core::path::bucket_name(bigbird_core::path::NamespaceKind::User, "a", &self.domain_suffix).is_err() {
            errors.push(FieldError {
                field: "domain_suffix".into(),
                message: format!("`{}` cannot end a bucket name", self.domain_suffix),
            });
        }
        for (i, rule) in self.alerts.iter().enumerate() {
            if let Err(e) = rule.validate() {
                errors.push(FieldError {
                    field: format!("alerts[{i}].threshold"),
                    message: e.to_string(),
                });
            }
        }
        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors));
        }

        let config = PlatformConfig {
            naming,
            domain_suffix: self.domain_suffix.clone(),
            identity: IdentityConfig {
                gsuite_domain: id.gsuite_domain.clone(),
                service_account_domain: id.service_account_domain.clone(),
                rotation_interval,
                grace_period,
                key_seed: id.key_seed.clone(),
            },
            quotas,
            slot_total: self.slot_total,
            poll_interval,
            alert_cooldown: Duration(self.alert_cooldown_secs as u64),
            alert_rules: self.alerts.clone(),
            watchdog: Thresholds {
                hdfs_to_gcs,
                gcs_to_bq,
            },
            load_job_duration,
            audit_denied: self.audit_denied,
            automation_principal: self.automation_principal.clone(),
            system_principal: self.system_principal.clone(),
        };
        config
            .validate()
            .map_err(|e| ConfigError::Invalid(vec![FieldError { field: "config".into(), message: e.to_string() }]))?;
        Ok(config)
    }
}

/// Resolve the configuration path: an explicit path wins, then
/// `BIGBIRD_CONFIG`, then `bigbird.toml` in the working directory. Only the
/// default path may be missing, in which case defaults apply.
pub fn resolve(explicit: Option<&Path>) -> Result<Config, ConfigError> {
    let from_env = std::env::var_os("BIGBIRD_CONFIG").map(PathBuf::from);
    match explicit.map(Path::to_path_buf).or(from_env) {
        Some(path) => Config::load(&path),
        None => {
            let path = Path::new(DEFAULT_CONFIG_PATH);
            if path.exists() {
                Config::load(path)
            } else {
                Ok(Config::default())
            }
        }
    }
}
