//! One Monte Carlo trial: draw an instance under the redraw policy, observe
//! it under both hypotheses, and evaluate the selected statistics.

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{AlgorithmKind, ExperimentConfig};
use crate::detector;
use crate::error::{Error, Result};
use crate::model::{self, Hypothesis, ObservationSet, SensingEnsemble, SignalEnsemble, SupportSet};
use crate::omp;
use crate::rng::{domain, substream, SimRng};

/// Components held fixed across trials when the matching redraw flag is off.
#[derive(Debug, Clone)]
pub struct FixedDraws {
    pub support: SupportSet,
    pub signals: SignalEnsemble,
    pub sensing: SensingEnsemble,
}

impl FixedDraws {
    pub fn new(cfg: &ExperimentConfig, m: usize) -> Result<Self> {
        let mut rng = substream(cfg.seed, domain::FIXED, 0);
        let support = model::draw_support(cfg.n, cfg.k, &mut rng)?;
        let signals = model::draw_signals(&support, cfg.l, cfg.coeff_a, cfg.coeff_b, &mut rng)?;
        let sensing = model::draw_sensing(m, cfg.n, cfg.l, &mut rng)?;
        Ok(FixedDraws {
            support,
            signals,
            sensing,
        })
    }
}

/// A drawn instance with its observations under H0 and H1.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub support: SupportSet,
    pub signals: SignalEnsemble,
    pub sensing: SensingEnsemble,
    /// True indices handed to the known-support detector.
    pub known: SupportSet,
    pub null: ObservationSet,
    pub alt: ObservationSet,
}

/// Move the fixed coefficient pattern onto a new support, position by
/// position in sorted order.
fn remap(fixed: &SignalEnsemble, support: &SupportSet) -> SignalEnsemble {
    let from = fixed.true_support.indices();
    let n = support.ambient_dim();
    let coefficients = fixed
        .coefficients
        .iter()
        .map(|s| {
            let mut out = DVector::zeros(n);
            for (&src, &dst) in from.iter().zip(support.indices()) {
                out[dst] = s[src];
            }
            out
        })
        .collect();
    SignalEnsemble {
        coefficients,
        true_support: support.clone(),
        coeff_range: fixed.coeff_range,
    }
}

/// Draw trial `index`. `known_positions` pins which positions of the sorted
/// support are revealed; otherwise `t0` of them are drawn uniformly.
pub fn draw_trial(
    cfg: &ExperimentConfig,
    m: usize,
    fixed: &FixedDraws,
    index: u64,
    known_positions: Option<&[usize]>,
) -> Result<TrialInstance> {
    let mut rng = substream(cfg.seed, domain::TRIAL, index);
    let support = if cfg.redraw_support {
        model::draw_support(cfg.n, cfg.k, &mut rng)?
    } else {
        fixed.support.clone()
    };
    let signals = if cfg.redraw_coefficients {
        model::draw_signals(&support, cfg.l, cfg.coeff_a, cfg.coeff_b, &mut rng)?
    } else {
        remap(&fixed.signals, &support)
    };
    let sensing = if cfg.redraw_sensing {
        model::draw_sensing(m, cfg.n, cfg.l, &mut rng)?
    } else {
        fixed.sensing.clone()
    };
    let known = match known_positions {
        Some(pos) => SupportSet::new(pos.iter().map(|&p| support.indices()[p]).collect(), cfg.n)?,
        None => support.random_subset(cfg.t0.min(cfg.k), &mut rng)?,
    };
    let sigma2 = cfg.noise_variance();
    let null = model::observe(&signals, &sensing, Hypothesis::H0, sigma2, &mut rng)?;
    let alt = model::observe(&signals, &sensing, Hypothesis::H1, sigma2, &mut rng)?;
    Ok(TrialInstance {
        support,
        signals,
        sensing,
        known,
        null,
        alt,
    })
}

/// Statistic of `algo` on one observation set.
pub fn statistic(
    algo: AlgorithmKind,
    cfg: &ExperimentConfig,
    inst: &TrialInstance,
    obs: &ObservationSet,
) -> Result<f64> {
    let t0 = cfg.t0;
    Ok(match algo {
        AlgorithmKind::KnownSupport => detector::known_support_statistic(obs, &inst.sensing, &inst.known)?,
        AlgorithmKind::Somp => omp::somp_detect(obs, &inst.sensing, t0, 0.0)?.statistic,
        AlgorithmKind::Dist1 => omp::dist1_detect(obs, &inst.sensing, t0, 0.0)?.statistic,
        AlgorithmKind::Dist2 => omp::dist2_detect(obs, &inst.sensing, t0, cfg.k, 0.0)?.statistic,
        AlgorithmKind::MlIgnoreSparsity => detector::ml_statistic(obs, &inst.sensing)?,
    })
}

/// Null and alternative statistics of one detector, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoStats {
    pub algo: AlgorithmKind,
    pub null: Vec<f64>,
    pub alt: Vec<f64>,
}

/// Run `trials` trials starting at trial index `offset`, evaluating every
/// detector in `algos` on the same instances.
pub fn simulate(
    cfg: &ExperimentConfig,
    algos: &[AlgorithmKind],
    offset: u64,
    trials: usize,
    known_positions: Option<&[usize]>,
) -> Result<Vec<AlgoStats>> {
    let m = cfg.measurements();
    let fixed = FixedDraws::new(cfg, m)?;
    let per_trial: Vec<Vec<(f64, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let inst = draw_trial(cfg, m, &fixed, offset + t, known_positions)?;
            algos
                .iter()
                .map(|&a| Ok((statistic(a, cfg, &inst, &inst.null)?, statistic(a, cfg, &inst, &inst.alt)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(algos
        .iter()
        .enumerate()
        .map(|(i, &algo)| AlgoStats {
            algo,
            null: per_trial.iter().map(|r| r[i].0).collect(),
            alt: per_trial.iter().map(|r| r[i].1).collect(),
        })
        .collect())
}

/// `count` distinct positions out of `0..k`, sorted, from `rng`.
pub fn random_positions(k: usize, count: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
    if count > k {
        return Err(Error::arg(format!("cannot choose {count} of {k} positions")));
    }
    let mut v = rand::seq::index::sample(rng, k, count).into_vec();
    v.sort_unstable();
    Ok(v)
}
