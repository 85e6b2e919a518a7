//! Experiment drivers behind the CLI subcommands.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmKind, ExperimentConfig, Purpose, ThresholdPolicy};
use super::roc::{self, RocPoint, GRID_POINTS};
use super::trial::{self, AlgoStats, FixedDraws};
use crate::detector::{self, TheoryInputs};
use crate::error::{Error, Result};
use crate::omp::{self, P1P2Config, P1P2Estimate};
use crate::planner::{self, PlannerResult};
use crate::rng::{domain, substream};

/// Curve and summary numbers for one detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoCurve {
    pub algo: AlgorithmKind,
    pub points: Vec<RocPoint>,
    /// Present for threshold sweeps only.
    pub auc: Option<f64>,
    pub auc_se: Option<f64>,
    pub messages_per_node: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub curves: Vec<AlgoCurve>,
    pub stats: Vec<AlgoStats>,
    /// Bootstrap AUC replicates aligned with `curves`.
    pub replicates: Vec<Vec<f64>>,
    pub protocol: String,
    pub trials: usize,
}

impl RocReport {
    pub fn curve(&self, algo: AlgorithmKind) -> Option<&AlgoCurve> {
        self.curves.iter().find(|c| c.algo == algo)
    }

    pub fn auc(&self, algo: AlgorithmKind) -> Option<f64> {
        self.curve(algo).and_then(|c| c.auc)
    }

    /// Paired bootstrap standard error of `AUC_a − AUC_b`.
    pub fn auc_difference_se(&self, a: AlgorithmKind, b: AlgorithmKind) -> Option<f64> {
        let ia = self.curves.iter().position(|c| c.algo == a)?;
        let ib = self.curves.iter().position(|c| c.algo == b)?;
        if self.replicates.is_empty() {
            return None;
        }
        Some(roc::paired_difference_se(&self.replicates[ia], &self.replicates[ib]))
    }
}

pub const SWEEP_PROTOCOL: &str = "threshold_protocol = per-detector nearest-rank quantiles of the null statistics \
at 129 evenly spaced levels (duplicates removed); decide H1 when statistic >= threshold; \
AUC by trapezoid with (0,0) and (1,1) anchors; auc_se from paired bootstrap over trials";

/// Single threshold for `algo` under a fixed-α policy. The OMP detectors
/// use `T0·L` degrees of freedom, the energy detector `M·L`.
pub fn policy_threshold(cfg: &ExperimentConfig, algo: AlgorithmKind) -> Result<f64> {
    let t = match algo {
        AlgorithmKind::MlIgnoreSparsity => cfg.measurements(),
        _ => cfg.t0,
    };
    let s2 = cfg.noise_variance();
    match cfg.threshold_policy {
        ThresholdPolicy::ExactAlpha => detector::threshold_exact(cfg.alpha, t, cfg.l, s2),
        ThresholdPolicy::SankaranAlpha => detector::threshold_sankaran(cfg.alpha, t, cfg.l, s2),
        ThresholdPolicy::Sweep => Err(Error::arg("sweep policy has no single threshold")),
    }
}

fn report_from_stats(cfg: &ExperimentConfig, stats: Vec<AlgoStats>) -> Result<RocReport> {
    let m = cfg.measurements();
    let trials = stats.first().map(|s| s.null.len()).unwrap_or(0);
    let sweep = cfg.threshold_policy == ThresholdPolicy::Sweep;
    let replicates = if sweep && cfg.bootstrap > 1 {
        roc::bootstrap_auc(&stats, cfg.bootstrap, cfg.seed)?
    } else {
        Vec::new()
    };
    let curves = stats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (points, auc) = if sweep {
                let pts = roc::roc_curve(&s.null, &s.alt, &roc::threshold_grid(&s.null, GRID_POINTS)?)?;
                let a = roc::auc(&pts);
                (pts, Some(a))
            } else {
                (vec![roc::operating_point(&s.null, &s.alt, policy_threshold(cfg, s.algo)?)?], None)
            };
            Ok(AlgoCurve {
                algo: s.algo,
                points,
                auc,
                auc_se: replicates.get(i).map(|r| roc::std_dev(r)),
                messages_per_node: s.algo.messages_per_node(m, cfg.t0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let protocol = match cfg.threshold_policy {
        ThresholdPolicy::Sweep => SWEEP_PROTOCOL.to_string(),
        ThresholdPolicy::ExactAlpha => format!("threshold_protocol = exact chi-squared threshold at alpha = {}", cfg.alpha),
        ThresholdPolicy::SankaranAlpha => {
            format!("threshold_protocol = cube-root normal threshold at alpha = {}", cfg.alpha)
        }
    };
    Ok(RocReport {
        curves,
        stats,
        replicates,
        protocol,
        trials,
    })
}

/// ROC curves of every configured detector on shared trials.
pub fn run_roc(cfg: &ExperimentConfig) -> Result<RocReport> {
    cfg.validate(Purpose::Roc)?;
    let stats = trial::simulate(cfg, &cfg.algorithms, 0, cfg.trials, None)?;
    report_from_stats(cfg, stats)
}

/// ROC of the energy detector that ignores sparsity.
pub fn run_ml_baseline(cfg: &ExperimentConfig) -> Result<RocReport> {
    run_roc(&ExperimentConfig {
        algorithms: vec![AlgorithmKind::MlIgnoreSparsity],
        ..cfg.clone()
    })
}

/// Known partial support against simultaneous OMP. The trial budget is split
/// over `repetitions` outer rounds; each round reveals a fixed set of `T0`
/// support positions, and the pooled statistics average the rounds at
/// matched thresholds.
pub fn run_known_support_comparison(cfg: &ExperimentConfig) -> Result<RocReport> {
    cfg.validate(Purpose::KnownVsSomp)?;
    let reps = cfg.repetitions;
    let algos = [AlgorithmKind::KnownSupport, AlgorithmKind::Somp];
    let mut pooled: Vec<AlgoStats> = algos
        .iter()
        .map(|&algo| AlgoStats {
            algo,
            null: Vec::new(),
            alt: Vec::new(),
        })
        .collect();
    let (base, extra) = (cfg.trials / reps, cfg.trials % reps);
    let mut offset = 0u64;
    for r in 0..reps {
        let count = base + usize::from(r < extra);
        let mut rng = substream(cfg.seed, domain::REPETITION, r as u64);
        let positions = trial::random_positions(cfg.k, cfg.t0, &mut rng)?;
        let part = trial::simulate(cfg, &algos, offset, count, Some(&positions))?;
        for (acc, s) in pooled.iter_mut().zip(part) {
            acc.null.extend(s.null);
            acc.alt.extend(s.alt);
        }
        offset += count as u64;
    }
    report_from_stats(cfg, pooled)
}

/// One minimum-fraction grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinFracRow {
    pub tau_d: f64,
    pub alpha: f64,
    pub c_r: f64,
    pub k: usize,
    pub l: usize,
    pub result: PlannerResult,
    pub pd_empirical: Option<f64>,
}

/// `f(t)`, `f′(t)` and `Q(f(t))` along `[1, k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FTraceRow {
    pub c_r: f64,
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub t: f64,
    pub f: f64,
    pub f_prime: f64,
    pub pd_approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinFracReport {
    pub rows: Vec<MinFracRow>,
    pub trace: Vec<FTraceRow>,
}

/// Theory inputs for compression ratio `c_r`, with every node at the
/// expected signal energy.
pub fn theory_inputs(cfg: &ExperimentConfig, c_r: f64, alpha: f64, tau_d: f64) -> TheoryInputs {
    TheoryInputs::from_coefficient_range(
        cfg.k,
        cfg.l,
        cfg.m_for(c_r),
        cfg.n,
        cfg.noise_variance(),
        cfg.coeff_a,
        cfg.coeff_b,
        alpha,
        tau_d,
    )
}

/// Empirical detection rate of the known-support detector with `t0`
/// uniformly drawn true indices at the exact threshold for each `alpha`.
pub fn empirical_pd_at(cfg: &ExperimentConfig, c_r: f64, t0: usize, alphas: &[f64]) -> Result<Vec<f64>> {
    let sub = ExperimentConfig {
        t0,
        algorithms: vec![AlgorithmKind::KnownSupport],
        ..cfg.with_c_r(c_r)
    };
    let stats = trial::simulate(&sub, &sub.algorithms, 0, sub.trials, None)?;
    let alt = &stats[0].alt;
    alphas
        .iter()
        .map(|&a| {
            let tau = detector::threshold_exact(a, t0, cfg.l, cfg.noise_variance())?;
            Ok(alt.iter().filter(|&&x| x >= tau).count() as f64 / alt.len() as f64)
        })
        .collect()
}

/// Planner output over the `(c_r, tau_d, alpha)` grid, optionally with
/// simulated detection rates, plus `f` traces per `(c_r, alpha)`.
pub fn run_min_fraction_experiments(cfg: &ExperimentConfig) -> Result<MinFracReport> {
    cfg.validate(Purpose::MinFraction)?;
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    let points = 8 * (cfg.k - 1) + 1;
    for &c_r in &cfg.c_r_grid {
        let base = theory_inputs(cfg, c_r, cfg.alpha_grid[0], cfg.tau_d_grid[0]);
        let map = planner::min_fraction_map(&cfg.tau_d_grid, &cfg.alpha_grid, &base)?;
        // Simulate once per distinct planned support size.
        let mut empirical: Vec<(usize, Vec<f64>)> = Vec::new();
        if cfg.empirical_pd {
            let mut sizes: Vec<usize> = map.iter().flatten().filter_map(|r| r.t_hat).collect();
            sizes.sort_unstable();
            sizes.dedup();
            for t in sizes {
                empirical.push((t, empirical_pd_at(cfg, c_r, t, &cfg.alpha_grid)?));
            }
        }
        for (i, &tau_d) in cfg.tau_d_grid.iter().enumerate() {
            for (j, &alpha) in cfg.alpha_grid.iter().enumerate() {
                let result = map[i][j].clone();
                let pd_empirical = result
                    .t_hat
                    .and_then(|t| empirical.iter().find(|e| e.0 == t).map(|e| e.1[j]));
                rows.push(MinFracRow {
                    tau_d,
                    alpha,
                    c_r,
                    k: cfg.k,
                    l: cfg.l,
                    result,
                    pd_empirical,
                });
            }
        }
        for &alpha in &cfg.alpha_grid {
            let inputs = TheoryInputs { alpha, ..base.clone() };
            for (t, f, fp, q) in planner::f_trace(&inputs, points)? {
                trace.push(FTraceRow {
                    c_r,
                    k: cfg.k,
                    l: cfg.l,
                    alpha,
                    t,
                    f,
                    f_prime: fp,
                    pd_approx: q,
                });
            }
        }
    }
    Ok(MinFracReport { rows, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1P2Row {
    pub c_r: f64,
    pub estimate: P1P2Estimate,
}

/// First-iteration success rates over the compression-ratio sweep at a
/// fixed noise level.
pub fn run_p1_p2(cfg: &ExperimentConfig) -> Result<Vec<P1P2Row>> {
    cfg.validate(Purpose::P1P2)?;
    cfg.c_r_grid
        .iter()
        .map(|&c_r| {
            let pc = P1P2Config {
                n: cfg.n,
                k: cfg.k,
                l: cfg.l,
                m: cfg.m_for(c_r),
                noise_variance: cfg.noise_variance(),
                coeff_a: cfg.coeff_a,
                coeff_b: cfg.coeff_b,
            };
            Ok(P1P2Row {
                c_r,
                estimate: omp::estimate_p1_p2(&pc, cfg.trials, cfg.seed)?,
            })
        })
        .collect()
}

/// Known-support detector at the exact threshold: empirical rates against
/// the mean per-trial theoretical detection probability (exact λ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub threshold: f64,
    pub pf_empirical: f64,
    pub pd_empirical: f64,
    pub pd_theory: f64,
    pub trials: usize,
}

pub fn run_calibration(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    cfg.validate(Purpose::Validate)?;
    let m = cfg.measurements();
    let s2 = cfg.noise_variance();
    let tau = detector::threshold_exact(cfg.alpha, cfg.t0, cfg.l, s2)?;
    let fixed = FixedDraws::new(cfg, m)?;
    let per: Vec<(bool, bool, f64)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let inst = trial::draw_trial(cfg, m, &fixed, t, None)?;
            let s0 = detector::known_support_statistic(&inst.null, &inst.sensing, &inst.known)?;
            let s1 = detector::known_support_statistic(&inst.alt, &inst.sensing, &inst.known)?;
            let lam = detector::noncentrality_exact(&inst.signals, &inst.sensing, &inst.known, s2)?;
            let pd = detector::pd_theoretical(tau, lam, cfg.t0, cfg.l, s2)?.value();
            Ok((s0 >= tau, s1 >= tau, pd))
        })
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    Ok(CalibrationReport {
        threshold: tau,
        pf_empirical: per.iter().filter(|p| p.0).count() as f64 / n,
        pd_empirical: per.iter().filter(|p| p.1).count() as f64 / n,
        pd_theory: per.iter().map(|p| p.2).sum::<f64>() / n,
        trials: per.len(),
    })
}
