//! Experiment configuration: TOML loading, validation with field paths,
//! and named presets for the standard regimes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model;

/// Detectors the ROC driver can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    /// `T0` true support indices drawn uniformly from the support.
    KnownSupport,
    Somp,
    Dist1,
    Dist2,
    /// Total measurement energy (projection onto the full column span).
    MlIgnoreSparsity,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::KnownSupport => "known_support",
            AlgorithmKind::Somp => "somp",
            AlgorithmKind::Dist1 => "dist1",
            AlgorithmKind::Dist2 => "dist2",
            AlgorithmKind::MlIgnoreSparsity => "ml_ignore_sparsity",
        }
    }

    /// Scalars each node transmits per decision; the two non-OMP detectors
    /// ship their raw measurements.
    pub fn messages_per_node(self, m: usize, t0: usize) -> usize {
        match self {
            AlgorithmKind::Somp => crate::omp::Algorithm::Somp.messages_per_node(m, t0),
            AlgorithmKind::Dist1 => crate::omp::Algorithm::Dist1.messages_per_node(m, t0),
            AlgorithmKind::Dist2 => crate::omp::Algorithm::Dist2.messages_per_node(m, t0),
            AlgorithmKind::KnownSupport | AlgorithmKind::MlIgnoreSparsity => m,
        }
    }
}

/// How decision thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Sweep quantiles of the null statistics (ROC curves).
    Sweep,
    /// Single chi-squared threshold with false-alarm rate `alpha`.
    ExactAlpha,
    /// Single cube-root normal threshold at `alpha`.
    SankaranAlpha,
}

/// Flat experiment description shared by every subcommand. Unset optional
/// fields fall back to the defaults below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    /// Measurements per node; derived from `c_r` when absent.
    pub m: Option<usize>,
    /// Compression ratio `M/N`.
    pub c_r: Option<f64>,
    pub t0: usize,
    /// Noise variance; derived from `snr_db` when absent.
    pub sigma2: Option<f64>,
    /// Average per-sample SNR in dB.
    pub snr_db: Option<f64>,
    pub coeff_a: f64,
    pub coeff_b: f64,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmKind>,
    pub threshold_policy: ThresholdPolicy,
    pub alpha: f64,
    pub redraw_support: bool,
    pub redraw_coefficients: bool,
    pub redraw_sensing: bool,
    /// Bootstrap replicates for AUC standard errors.
    pub bootstrap: usize,
    /// Outer repetitions with a fixed known-index pattern each.
    pub repetitions: usize,
    /// Compression ratios for the sweeping subcommands.
    pub c_r_grid: Vec<f64>,
    pub tau_d_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Run the known-support detector at the planned support size.
    pub empirical_pd: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 256,
            k: 5,
            l: 5,
            m: None,
            c_r: Some(0.1),
            t0: 1,
            sigma2: None,
            snr_db: Some(-6.0),
            coeff_a: 3.0,
            coeff_b: 4.0,
            trials: 2000,
            seed: 1,
            algorithms: vec![AlgorithmKind::Somp, AlgorithmKind::Dist1, AlgorithmKind::Dist2],
            threshold_policy: ThresholdPolicy::Sweep,
            alpha: 0.1,
            redraw_support: true,
            redraw_coefficients: true,
            redraw_sensing: true,
            bootstrap: 200,
            repetitions: 20,
            c_r_grid: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
            tau_d_grid: (1..=19).map(|i| i as f64 * 0.05).collect(),
            alpha_grid: vec![0.01, 0.05, 0.1, 0.2, 0.3],
            empirical_pd: false,
        }
    }
}

/// Which subcommand a configuration is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Roc,
    MinFraction,
    P1P2,
    KnownVsSomp,
    Validate,
}

fn cfg_err(path: &str, msg: impl Into<String>) -> Error {
    Error::config(path, msg)
}

impl ExperimentConfig {
    /// Parse TOML text; syntax and type errors carry the offending key.
    ///
    /// `sigma2`/`snr_db` and `m`/`c_r` are alternatives: giving one member
    /// of a pair in the file clears the default of the other.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            // The key of the line holding the error, whether the span covers
            // the key or the value.
            let path = e
                .span()
                .and_then(|s| {
                    let start = text[..s.start].rfind('\n').map_or(0, |i| i + 1);
                    let line = text[start..].lines().next()?;
                    line.split_once('=').map(|(key, _)| key.trim().to_string())
                })
                .filter(|s| !s.is_empty() && !s.starts_with('['))
                .unwrap_or_else(|| "<document>".to_string());
            cfg_err(&path, e.message().to_string())
        })?;
        let keys: toml::Table = toml::from_str(text).map_err(|e| cfg_err("<document>", e.message().to_string()))?;
        let has = |k: &str| keys.contains_key(k);
        if has("sigma2") && !has("snr_db") {
            cfg.snr_db = None;
        }
        if has("snr_db") && !has("sigma2") {
            cfg.sigma2 = None;
        }
        if has("m") && !has("c_r") {
            cfg.c_r = None;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(&path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Measurements per node for compression ratio `c_r`: `floor(c_r N)`.
    pub fn m_for(&self, c_r: f64) -> usize {
        (c_r * self.n as f64 + 1e-9).floor() as usize
    }

    /// Effective `M`: explicit `m`, else `floor(c_r N)`.
    pub fn measurements(&self) -> usize {
        match (self.m, self.c_r) {
            (Some(m), _) => m,
            (None, Some(c)) => self.m_for(c),
            (None, None) => 0,
        }
    }

    pub fn compression_ratio(&self) -> f64 {
        self.measurements() as f64 / self.n as f64
    }

    /// Effective noise variance: explicit `sigma2`, else from `snr_db`.
    pub fn noise_variance(&self) -> f64 {
        match (self.sigma2, self.snr_db) {
            (Some(s), _) => s,
            (None, Some(db)) => model::noise_variance_for_snr_db(db, self.n, self.k, self.coeff_a, self.coeff_b),
            (None, None) => f64::NAN,
        }
    }

    /// Copy with the compression ratio replaced.
    pub fn with_c_r(&self, c_r: f64) -> Self {
        ExperimentConfig {
            m: None,
            c_r: Some(c_r),
            ..self.clone()
        }
    }

    /// Check every invariant needed by `purpose`, reporting the first
    /// violation with its field path.
    pub fn validate(&self, purpose: Purpose) -> Result<()> {
        if self.n < 2 {
            return Err(cfg_err("n", "need N >= 2"));
        }
        if self.k < 1 || self.k >= self.n {
            return Err(cfg_err("k", format!("need 1 <= k < N = {}", self.n)));
        }
        if self.l < 1 {
            return Err(cfg_err("l", "need at least one node"));
        }
        if self.trials < 1 {
            return Err(cfg_err("trials", "need trials >= 1"));
        }
        if !(self.coeff_a > 0.0 && self.coeff_b >= self.coeff_a && self.coeff_b.is_finite()) {
            return Err(cfg_err("coeff_a", "need 0 < coeff_a <= coeff_b"));
        }
        match (self.sigma2, self.snr_db) {
            (Some(_), Some(_)) => return Err(cfg_err("sigma2", "give sigma2 or snr_db, not both")),
            (None, None) => return Err(cfg_err("sigma2", "one of sigma2 or snr_db is required")),
            (Some(s), None) if !(s > 0.0 && s.is_finite()) => return Err(cfg_err("sigma2", "must be > 0")),
            (None, Some(db)) if !db.is_finite() => return Err(cfg_err("snr_db", "must be finite")),
            _ => {}
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(cfg_err("alpha", "must lie in (0, 1)"));
        }
        let sweeps_c_r = matches!(purpose, Purpose::MinFraction | Purpose::P1P2);
        if sweeps_c_r {
            if self.c_r_grid.is_empty() {
                return Err(cfg_err("c_r_grid", "must be nonempty"));
            }
            for (i, &c) in self.c_r_grid.iter().enumerate() {
                self.check_m(self.m_for(c), &format!("c_r_grid[{i}]"), c)?;
            }
        } else {
            if self.m.is_some() && self.c_r.is_some() {
                return Err(cfg_err("m", "give m or c_r, not both"));
            }
            if let Some(c) = self.c_r {
                if !(c > 0.0 && c < 1.0) {
                    return Err(cfg_err("c_r", "must lie in (0, 1)"));
                }
                self.check_m(self.measurements(), "c_r", c)?;
            } else if let Some(m) = self.m {
                self.check_m(m, "m", m as f64 / self.n as f64)?;
            } else {
                return Err(cfg_err("c_r", "one of m or c_r is required"));
            }
        }
        if matches!(purpose, Purpose::Roc | Purpose::KnownVsSomp | Purpose::Validate) {
            if self.t0 < 1 || self.t0 > self.k {
                return Err(cfg_err("t0", format!("need 1 <= T0 <= k = {}", self.k)));
            }
            if self.t0 > self.measurements() {
                return Err(cfg_err("t0", "T0 exceeds M"));
            }
        }
        if purpose == Purpose::Roc {
            if self.algorithms.is_empty() {
                return Err(cfg_err("algorithms", "select at least one detector"));
            }
            let mut seen = self.algorithms.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.algorithms.len() {
                return Err(cfg_err("algorithms", "duplicate detector"));
            }
            if self.threshold_policy == ThresholdPolicy::Sweep && self.trials < 2 {
                return Err(cfg_err("trials", "a threshold sweep needs at least two trials"));
            }
        }
        if purpose == Purpose::KnownVsSomp {
            if self.repetitions < 1 {
                return Err(cfg_err("repetitions", "need at least one repetition"));
            }
            if self.trials < 2 * self.repetitions {
                return Err(cfg_err("trials", "need at least two trials per repetition"));
            }
        }
        if purpose == Purpose::MinFraction {
            if self.k < 2 {
                return Err(cfg_err("k", "the planner needs k > 1"));
            }
            for (name, grid) in [("tau_d_grid", &self.tau_d_grid), ("alpha_grid", &self.alpha_grid)] {
                if grid.is_empty() {
                    return Err(cfg_err(name, "must be nonempty"));
                }
                if let Some(i) = grid.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
                    return Err(cfg_err(&format!("{name}[{i}]"), "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    fn check_m(&self, m: usize, path: &str, c: f64) -> Result<()> {
        if !(c > 0.0 && c < 1.0) {
            return Err(cfg_err(path, "compression ratio must lie in (0, 1)"));
        }
        if m < 1 || m >= self.n {
            return Err(cfg_err(path, format!("gives M = {m}; need 1 <= M < N")));
        }
        Ok(())
    }
}

/// Named configurations for the standard regimes.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig::default();
    let all = vec![
        AlgorithmKind::KnownSupport,
        AlgorithmKind::Somp,
        AlgorithmKind::Dist1,
        AlgorithmKind::Dist2,
        AlgorithmKind::MlIgnoreSparsity,
    ];
    let cfg = match name {
        // Equal-support curves of f'(t) and Pd(t).
        "ftrace-k10" => ExperimentConfig {
            k: 10,
            l: 10,
            c_r: Some(0.1),
            c_r_grid: vec![0.1],
            snr_db: None,
            sigma2: Some(1.0),
            ..base
        },
        "ftrace-k20" => ExperimentConfig {
            k: 20,
            l: 10,
            c_r: Some(0.1),
            c_r_grid: vec![0.1],
            snr_db: None,
            sigma2: Some(1.0),
            ..base
        },
        "p1p2" => ExperimentConfig {
            k: 5,
            l: 5,
            snr_db: Some(-3.0),
            trials: 5000,
            ..base
        },
        "minfrac" => ExperimentConfig {
            k: 5,
            l: 5,
            snr_db: None,
            sigma2: Some(1.0),
            c_r_grid: vec![0.1, 0.2],
            ..base
        },
        "minfrac-low-noise" => ExperimentConfig {
            k: 5,
            l: 5,
            snr_db: None,
            sigma2: Some(0.5),
            c_r_grid: vec![0.1],
            ..base
        },
        "minfrac-large-n" => ExperimentConfig {
            n: 1000,
            k: 20,
            l: 5,
            snr_db: None,
            sigma2: Some(1.0),
            c_r_grid: vec![0.1],
            alpha_grid: vec![0.1],
            empirical_pd: true,
            trials: 2000,
            ..base
        },
        "roc-low-cr" => ExperimentConfig {
            c_r: Some(0.1),
            t0: 1,
            algorithms: all,
            trials: 10_000,
            ..base
        },
        "roc-high-cr" => ExperimentConfig {
            c_r: Some(0.5),
            t0: 1,
            algorithms: all,
            trials: 10_000,
            ..base
        },
        "roc-t0-2" => ExperimentConfig {
            c_r: Some(0.2),
            t0: 2,
            trials: 10_000,
            ..base
        },
        "known-vs-somp" => ExperimentConfig {
            c_r: Some(0.2),
            t0: 2,
            trials: 10_000,
            ..base
        },
        _ => return None,
    };
    Some(cfg)
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "ftrace-k10",
    "ftrace-k20",
    "p1p2",
    "minfrac",
    "minfrac-low-noise",
    "minfrac-large-n",
    "roc-low-cr",
    "roc-high-cr",
    "roc-t0-2",
    "known-vs-somp",
];
