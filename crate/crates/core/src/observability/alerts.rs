//! Threshold alerting over the latest metric points, with cooldown.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{Dims, MetricName, Metrics};
use crate::time::{Duration, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Ge => value >= threshold,
            Comparator::Lt => value < threshold,
            Comparator::Le => value <= threshold,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            ">" => Some(Comparator::Gt),
            ">=" | "≥" => Some(Comparator::Ge),
            "<" => Some(Comparator::Lt),
            "<=" | "≤" => Some(Comparator::Le),
            _ => None,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRule {
    pub name: String,
    pub metric: MetricName,
    /// Series must carry all of these dimension values.
    #[serde(default)]
    pub dimensions: Dims,
    pub comparator: Comparator,
    pub threshold: f64,
    pub notify: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("alert rule `{0}` has a non-finite threshold")]
pub struct NonFiniteThreshold(pub String);

impl AlertRule {
    pub fn validate(&self) -> Result<(), NonFiniteThreshold> {
        if self.threshold.is_finite() {
            Ok(())
        } else {
            Err(NonFiniteThreshold(self.name.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Firing {
    pub rule: String,
    pub notify: String,
    pub metric: MetricName,
    pub dimensions: Dims,
    pub value: u64,
    /// Timestamp of the point that crossed the threshold.
    pub point_at: Timestamp,
    pub at: Timestamp,
}

/// Firing history. A rule re-fires for the same series only once the
/// cooldown since its last firing has fully elapsed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alerting {
    #[serde(with = "crate::serde_util::entries")]
    last_fired: BTreeMap<(String, Dims), Timestamp>,
    firings: Vec<Firing>,
}

impl Alerting {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn firings(&self) -> &[Firing] {
        &self.firings
    }

    pub fn evaluate(
        &mut self,
        rules: &[AlertRule],
        metrics: &Metrics,
        now: Timestamp,
        cooldown: Duration,
    ) -> Vec<Firing> {
        let mut out = Vec::new();
        for rule in rules {
            for (dims, point) in metrics.latest(rule.metric, &rule.dimensions) {
                if !rule.comparator.holds(point.value as f64, rule.threshold) {
                    continue;
                }
                let key = (rule.name.clone(), dims.clone());
                if self
                    .last_fired
                    .get(&key)
                    .is_some_and(|t| now.since(*t) < cooldown)
                {
                    continue;
                }
                self.last_fired.insert(key, now);
                out.push(Firing {
                    rule: rule.name.clone(),
                    notify: rule.notify.clone(),
                    metric: rule.metric,
                    dimensions: dims.clone(),
                    value: point.value,
                    point_at: point.at,
                    at: now,
                });
            }
        }
        self.firings.extend(out.iter().cloned());
        out
    }
}
