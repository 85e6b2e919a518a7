//! Empirical ROC curves over a quantile threshold grid, trapezoidal AUC and
//! paired bootstrap replicates.

use rand::Rng;
use serde::Serialize;

use super::trial::AlgoStats;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::specfun::TailProb;

/// Quantile levels in the threshold sweep.
pub const GRID_POINTS: usize = 129;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub pf: TailProb,
    pub pd: TailProb,
    pub trials: usize,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Strictly increasing thresholds at `points` evenly spaced empirical
/// quantiles (nearest rank) of the null statistics, from min to max.
pub fn threshold_grid(null: &[f64], points: usize) -> Result<Vec<f64>> {
    if null.is_empty() || points < 2 {
        return Err(Error::arg("threshold grid needs null statistics and at least two points"));
    }
    let s = sorted(null);
    let last = s.len() - 1;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| s[((i * last) as f64 / (points - 1) as f64).round() as usize])
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Fraction of `sorted_stats` at or above `tau`.
fn exceed(sorted_stats: &[f64], tau: f64) -> f64 {
    let below = sorted_stats.partition_point(|&x| x < tau);
    (sorted_stats.len() - below) as f64 / sorted_stats.len() as f64
}

/// Empirical `(P_f, P_d)` at each threshold, deciding H1 when `Λ ≥ τ`.
pub fn roc_curve(null: &[f64], alt: &[f64], grid: &[f64]) -> Result<Vec<RocPoint>> {
    if null.is_empty() || alt.is_empty() {
        return Err(Error::arg("empty statistics"));
    }
    let (s0, s1) = (sorted(null), sorted(alt));
    grid.iter()
        .map(|&tau| {
            Ok(RocPoint {
                threshold: tau,
                pf: TailProb::new(exceed(&s0, tau))?,
                pd: TailProb::new(exceed(&s1, tau))?,
                trials: null.len(),
            })
        })
        .collect()
}

/// Single operating point at threshold `tau`.
pub fn operating_point(null: &[f64], alt: &[f64], tau: f64) -> Result<RocPoint> {
    Ok(roc_curve(null, alt, &[tau])?[0])
}

/// Trapezoidal area under the curve, anchored at `(0,0)` and `(1,1)`.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.pf.value(), p.pd.value())).collect();
    xy.push((0.0, 0.0));
    xy.push((1.0, 1.0));
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    xy.windows(2).map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1)).sum()
}

/// AUC of one detector on the standard quantile grid.
pub fn auc_of(null: &[f64], alt: &[f64]) -> Result<f64> {
    Ok(auc(&roc_curve(null, alt, &threshold_grid(null, GRID_POINTS)?)?))
}

/// Bootstrap AUC replicates, `[detector][replicate]`. Every replicate
/// resamples trial indices once and applies them to all detectors, keeping
/// null/alternative pairs and detectors aligned.
pub fn bootstrap_auc(stats: &[AlgoStats], replicates: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = stats.first().map(|s| s.null.len()).unwrap_or(0);
    if n == 0 || stats.iter().any(|s| s.null.len() != n || s.alt.len() != n) {
        return Err(Error::arg("bootstrap needs equally sized statistics"));
    }
    let mut out = vec![Vec::with_capacity(replicates); stats.len()];
    let mut null = vec![0.0; n];
    let mut alt = vec![0.0; n];
    for r in 0..replicates {
        let mut rng = substream(seed, domain::BOOTSTRAP, r as u64);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        for (a, s) in stats.iter().enumerate() {
            for (slot, &i) in idx.iter().enumerate() {
                null[slot] = s.null[i];
                alt[slot] = s.alt[i];
            }
            out[a].push(auc_of(&null, &alt)?);
        }
    }
    Ok(out)
}

/// Sample standard deviation (0 for fewer than two values).
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Standard error of `AUC_a − AUC_b` from paired replicates.
pub fn paired_difference_se(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    std_dev(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::AlgorithmKind;

    fn pt(pf: f64, pd: f64) -> RocPoint {
        RocPoint {
            threshold: 0.0,
            pf: TailProb::new(pf).unwrap(),
            pd: TailProb::new(pd).unwrap(),
            trials: 1,
        }
    }

    #[test]
    fn auc_examples() {
        assert!((auc(&[]) - 0.5).abs() < 1e-15);
        assert!((auc(&[pt(0.0, 1.0)]) - 1.0).abs() < 1e-15);
        assert!((auc(&[pt(0.5, 0.5)]) - 0.5).abs() < 1e-15);
        assert!((auc(&[pt(0.2, 0.6)]) - (0.06 + 0.8 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn grid_and_curve_shape() {
        let null: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let alt: Vec<f64> = (0..1000).map(|i| i as f64 + 500.0).collect();
        let grid = threshold_grid(&null, GRID_POINTS).unwrap();
        assert_eq!(grid.len(), GRID_POINTS);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let curve = roc_curve(&null, &alt, &grid).unwrap();
        assert_eq!(curve[0].pf.value(), 1.0);
        assert!(curve.last().unwrap().pf.value() <= 0.01);
        assert!(curve.windows(2).all(|w| w[1].pf <= w[0].pf && w[1].pd <= w[0].pd));
        // Mann–Whitney value for this shift is 0.875; the coarse grid is close.
        assert!((auc(&curve) - 0.875).abs() < 0.01);
        let tied = threshold_grid(&[1.0, 1.0, 1.0, 2.0], 9).unwrap();
        assert_eq!(tied, vec![1.0, 2.0]);
    }

    #[test]
    fn bootstrap_is_paired_and_deterministic() {
        let null: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let alt: Vec<f64> = null.iter().map(|x| x + 0.8).collect();
        let s = vec![
            AlgoStats {
                algo: AlgorithmKind::Somp,
                null: null.clone(),
                alt: alt.clone(),
            },
            AlgoStats {
                algo: AlgorithmKind::Dist1,
                null,
                alt,
            },
        ];
        let r = bootstrap_auc(&s, 50, 4).unwrap();
        assert_eq!(r[0], r[1]);
        assert_eq!(paired_difference_se(&r[0], &r[1]), 0.0);
        assert!(std_dev(&r[0]) > 0.0);
        assert_eq!(r, bootstrap_auc(&s, 50, 4).unwrap());
    }
}
