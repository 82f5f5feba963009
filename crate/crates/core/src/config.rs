//! Run configuration, feasibility checking, and verification certificates.
//!
//! Invariants:
//! * a config is validated before any suite runs: the tower depth must fit
//!   the fiber cap (n_max ≤ N + 1) and the base window must support it
//!   (B ≥ n_max); rejections carry the maximal feasible parameters;
//! * certificates are plain data, deterministic for a fixed (config, seed),
//!   and are emitted sorted by (suite, identity);
//! * thread counts are a cap on parallelism, never a semantic input: any
//!   thread count produces byte-identical certificate streams.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Suites and metrics
// ---------------------------------------------------------------------------

/// The verification suites, in canonical execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    /// Shuffle/symmetrization calculus on tensor words.
    Algebra,
    /// Jet groups of the formal disc: composition, inversion, semidirect
    /// structure, action laws.
    Jets,
    /// Flat torsion-free connection jets and their exponential maps.
    Connections,
    /// Curvature tower and the curvature-twisted differential: tower
    /// symmetry, D² = 0, the expansion commutator, flat degeneration.
    Twisted,
    /// Families, sections, recovered connection forms, Maurer–Cartan.
    Section,
    /// Holomorphic-connection expansions commuting with ∂̄.
    Atiyah,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 6] = [
        SuiteKind::Algebra,
        SuiteKind::Jets,
        SuiteKind::Connections,
        SuiteKind::Twisted,
        SuiteKind::Section,
        SuiteKind::Atiyah,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Algebra => "algebra",
            SuiteKind::Jets => "jets",
            SuiteKind::Connections => "connections",
            SuiteKind::Twisted => "twisted",
            SuiteKind::Section => "section",
            SuiteKind::Atiyah => "atiyah",
        }
    }
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebra" => Ok(SuiteKind::Algebra),
            "jets" => Ok(SuiteKind::Jets),
            "connections" => Ok(SuiteKind::Connections),
            "twisted" => Ok(SuiteKind::Twisted),
            "section" => Ok(SuiteKind::Section),
            "atiyah" => Ok(SuiteKind::Atiyah),
            other => Err(Error::Config(format!(
                "unknown suite '{}' (expected one of algebra, jets, connections, twisted, section, atiyah)",
                other
            ))),
        }
    }
}

/// Which base metric the geometric suites run against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Identity metric: zero connection, zero curvature.
    Flat,
    /// Constant-holomorphic-sectional-curvature reference metric.
    FubiniStudy,
    /// Metric entries loaded from a user-supplied series file.
    User,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Flat => "flat",
            MetricKind::FubiniStudy => "fubini_study",
            MetricKind::User => "user",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(MetricKind::Flat),
            "fubini_study" | "fubini-study" => Ok(MetricKind::FubiniStudy),
            "user" => Ok(MetricKind::User),
            other => Err(Error::Config(format!(
                "unknown metric '{}' (expected flat, fubini_study, or user)",
                other
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

fn default_dim() -> usize {
    1
}
fn default_base_order() -> i64 {
    4
}
fn default_fiber_cap() -> i64 {
    4
}
fn default_metric() -> MetricKind {
    MetricKind::FubiniStudy
}

/// Parameters of one verification or export run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    /// Path to the metric series file; required iff `metric` is `user`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_file: Option<String>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Base truncation window B for unbarred/barred chart variables.
    #[serde(default = "default_base_order")]
    pub base_order: i64,
    /// Fiber-degree cap N of the truncated complex.
    #[serde(default = "default_fiber_cap")]
    pub fiber_cap: i64,
    /// Deepest tower level exported / used; defaults to min(N, B).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tower_max: Option<i64>,
    #[serde(default)]
    pub seed: u64,
    /// Suites to run; empty means all, order is ignored (canonical order
    /// is always used).
    #[serde(default)]
    pub suites: Vec<SuiteKind>,
    /// Upper bound on worker threads; 0 means single-threaded. The
    /// controlling environment variable caps this further.
    #[serde(default)]
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: default_metric(),
            metric_file: None,
            dim: default_dim(),
            base_order: default_base_order(),
            fiber_cap: default_fiber_cap(),
            tower_max: None,
            seed: 0,
            suites: Vec::new(),
            threads: 0,
        }
    }
}

/// Name of the environment variable capping worker threads.
pub const THREADS_ENV: &str = "DIAGJET_THREADS";

impl RunConfig {
    /// Effective tower depth: explicit value, or min(fiber cap, base order)
    /// but never below 2 (the first curvature level).
    pub fn tower_depth(&self) -> i64 {
        self.tower_max
            .unwrap_or_else(|| self.fiber_cap.min(self.base_order))
            .max(2)
    }

    /// Validate ranges and the feasibility invariants; error messages name
    /// the maximal feasible parameters.
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.dim > 4 {
            return Err(Error::Config(format!(
                "dim = {} out of range (supported: 1..=4; exact arithmetic cost grows steeply)",
                self.dim
            )));
        }
        if self.base_order < 1 || self.base_order > 16 {
            return Err(Error::Config(format!(
                "base_order = {} out of range (supported: 1..=16)",
                self.base_order
            )));
        }
        if self.fiber_cap < 1 || self.fiber_cap > 16 {
            return Err(Error::Config(format!(
                "fiber_cap = {} out of range (supported: 1..=16)",
                self.fiber_cap
            )));
        }
        let n_max = self.tower_depth();
        if n_max > self.fiber_cap + 1 {
            return Err(Error::Config(format!(
                "tower_max = {} exceeds fiber_cap + 1; with fiber_cap = {} the maximum feasible tower_max is {}",
                n_max,
                self.fiber_cap,
                self.fiber_cap + 1
            )));
        }
        if self.base_order < n_max {
            return Err(Error::Config(format!(
                "base_order = {} cannot support tower_max = {}; either raise base_order to ≥ {} or lower tower_max to {}",
                self.base_order, n_max, n_max, self.base_order
            )));
        }
        if self.metric == MetricKind::User && self.metric_file.is_none() {
            return Err(Error::Config(
                "metric = user requires metric_file".into(),
            ));
        }
        if self.metric != MetricKind::User && self.metric_file.is_some() {
            return Err(Error::Config(
                "metric_file is only meaningful with metric = user".into(),
            ));
        }
        Ok(())
    }

    /// The suites this run executes, in canonical order, deduplicated.
    pub fn selected_suites(&self) -> Vec<SuiteKind> {
        if self.suites.is_empty() {
            return SuiteKind::ALL.to_vec();
        }
        SuiteKind::ALL
            .iter()
            .copied()
            .filter(|s| self.suites.contains(s))
            .collect()
    }

    /// Worker-thread count after applying the environment cap; at least 1.
    pub fn effective_threads(&self) -> usize {
        let configured = self.threads.max(1);
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(cap) if cap >= 1 => configured.min(cap),
                _ => configured,
            },
            Err(_) => configured,
        }
    }
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Outcome of one checked identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Pass,
    Fail,
}

/// What went wrong, for failing identities: the pipeline stage and the
/// offending term (monomial and coefficient are embedded in the detail).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureDetail {
    pub stage: String,
    pub detail: String,
}

/// One verified identity: which suite, which identity, at which caps, how
/// many elementary assertions were folded in, and the reliability evidence
/// the zero was certified on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub suite: SuiteKind,
    pub identity: String,
    pub status: CertStatus,
    pub dim: usize,
    pub base_order: i64,
    pub fiber_cap: i64,
    pub checks: u64,
    /// Base-window floor the zero assertions were certified on, when the
    /// identity tracks one (unbarred, then barred group).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureDetail>,
}

impl Certificate {
    pub fn pass(
        suite: SuiteKind,
        identity: &str,
        cfg: &RunConfig,
        checks: u64,
        window: Option<[i64; 2]>,
    ) -> Self {
        Self {
            suite,
            identity: identity.to_string(),
            status: CertStatus::Pass,
            dim: cfg.dim,
            base_order: cfg.base_order,
            fiber_cap: cfg.fiber_cap,
            checks,
            window,
            failure: None,
        }
    }

    pub fn fail(suite: SuiteKind, identity: &str, cfg: &RunConfig, stage: &str, detail: String) -> Self {
        Self {
            suite,
            identity: identity.to_string(),
            status: CertStatus::Fail,
            dim: cfg.dim,
            base_order: cfg.base_order,
            fiber_cap: cfg.fiber_cap,
            checks: 0,
            window: None,
            failure: Some(FailureDetail {
                stage: stage.to_string(),
                detail,
            }),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CertStatus::Pass
    }

    /// Stable sort key for deterministic emission.
    pub fn sort_key(&self) -> (SuiteKind, String) {
        (self.suite, self.identity.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.tower_depth(), 4);
        assert_eq!(cfg.selected_suites(), SuiteKind::ALL.to_vec());
    }

    #[test]
    fn infeasible_tower_reports_maximum() {
        let cfg = RunConfig {
            base_order: 2,
            tower_max: Some(4),
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("base_order = 2"), "message: {}", msg);
        assert!(msg.contains("lower tower_max to 2"), "message: {}", msg);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in SuiteKind::ALL {
            assert_eq!(s.name().parse::<SuiteKind>().unwrap(), s);
        }
        assert!("kapranov".parse::<SuiteKind>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig {
            metric: MetricKind::Flat,
            dim: 2,
            base_order: 3,
            fiber_cap: 4,
            seed: 11,
            suites: vec![SuiteKind::Twisted, SuiteKind::Algebra],
            ..RunConfig::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        // Canonical order regardless of listed order.
        assert_eq!(
            back.selected_suites(),
            vec![SuiteKind::Algebra, SuiteKind::Twisted]
        );
    }
}
