//! Smallest number of known support indices meeting a detection target
//! under the cube-root normal approximations.

use serde::Serialize;

use crate::detector::{noncentrality_approx_at, threshold_sankaran_at, TheoryInputs};
use crate::error::{Error, Result};
use crate::specfun::{self, TailProb};

/// Points in the pre-scan of `[1, k]` used to bracket roots.
pub const SCAN_POINTS: usize = 512;
/// Bisection tolerance in `t`.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlannerStatus {
    AchievedAtOne,
    Interior,
    Infeasible,
}

impl PlannerStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerStatus::AchievedAtOne => "achieved_at_one",
            PlannerStatus::Interior => "interior",
            PlannerStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerResult {
    pub t_continuous: Option<f64>,
    pub t_hat: Option<usize>,
    pub status: PlannerStatus,
    /// Approximate `P_d = Q(f(t_hat))`; for infeasible cells, `Q(f(k))`.
    pub pd_at_t_hat: TailProb,
    /// `t_hat / k`.
    pub fraction: Option<f64>,
    /// Number of crossings of `Q(f(t)) = τ_d` seen on the scan grid.
    pub root_multiplicity: usize,
    /// Set when a crossing existed but none had `f′ ≤ 0`, or when the
    /// selected root is not the first crossing.
    pub kkt_flag: bool,
}

fn check(inputs: &TheoryInputs, t: f64) -> Result<()> {
    let k = inputs.k as f64;
    if !(t >= 1.0 && t <= k) {
        return Err(Error::arg(format!("t = {t} outside [1, {k}]")));
    }
    Ok(())
}

/// `f(t)` such that `P_d(t) ≈ Q(f(t))`, with `t` relaxed to a real number.
pub fn f_of_t(t: f64, inputs: &TheoryInputs) -> Result<f64> {
    check(inputs, t)?;
    f_raw(t, inputs)
}

fn f_raw(t: f64, inputs: &TheoryInputs) -> Result<f64> {
    let sigma2 = inputs.noise_variance;
    let tl = t * inputs.l as f64;
    let lambda = noncentrality_approx_at(inputs, t);
    if !(lambda >= 0.0) || !(tl >= 1.0) {
        return Err(Error::domain(format!("degenerate f(t) at t = {t}")));
    }
    let tau0 = threshold_sankaran_at(inputs.alpha, t, inputs.l, sigma2)?;
    specfun::sankaran_nc_argument(tl, lambda, tau0 / sigma2)
}

/// Approximate detection probability `Q(f(t))`.
pub fn pd_approx(t: f64, inputs: &TheoryInputs) -> Result<TailProb> {
    specfun::gaussian_q(f_of_t(t, inputs)?)
}

/// Finite-difference derivative of `f`: central with step
/// `max(1e-5, 1e-5 t)`, one-sided where the stencil leaves `[1, k]`.
pub fn f_prime(t: f64, inputs: &TheoryInputs) -> Result<f64> {
    check(inputs, t)?;
    let k = inputs.k as f64;
    let h = (1e-5 * t).max(1e-5);
    if t - h < 1.0 {
        Ok((f_raw(t + h, inputs)? - f_raw(t, inputs)?) / h)
    } else if t + h > k {
        Ok((f_raw(t, inputs)? - f_raw(t - h, inputs)?) / h)
    } else {
        Ok((f_raw(t + h, inputs)? - f_raw(t - h, inputs)?) / (2.0 * h))
    }
}

fn round_clamp(t: f64, k: usize) -> usize {
    let r = (t + 0.5).floor() as usize;
    r.clamp(1, k - 1)
}

/// Continuous and rounded minimum support size.
pub fn solve_min_fraction(inputs: &TheoryInputs) -> Result<PlannerResult> {
    inputs.validate()?;
    let k = inputs.k;
    if k <= 1 {
        return Err(Error::arg("need k > 1"));
    }
    let tau_d = inputs.tau_d;
    let kf = k as f64;
    let pd = |t: f64| -> Result<f64> { Ok(specfun::q_unchecked(f_raw(t, inputs)?)) };

    let at_one = pd(1.0)?;
    if tau_d <= at_one {
        return Ok(PlannerResult {
            t_continuous: Some(1.0),
            t_hat: Some(1),
            status: PlannerStatus::AchievedAtOne,
            pd_at_t_hat: TailProb::saturating(at_one),
            fraction: Some(1.0 / kf),
            root_multiplicity: 0,
            kkt_flag: false,
        });
    }
    let at_k = pd(kf)?;

    // Scan for every sign change of Q(f(t)) − τ_d.
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| 1.0 + (kf - 1.0) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| pd(t).map(|p| p - tau_d)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..SCAN_POINTS - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a < 0.0 && b >= 0.0 || a >= 0.0 && b < 0.0 {
            roots.push(bisect(&pd, tau_d, grid[i], grid[i + 1], a)?);
        }
    }
    let infeasible = |flag: bool| PlannerResult {
        t_continuous: None,
        t_hat: None,
        status: PlannerStatus::Infeasible,
        pd_at_t_hat: TailProb::saturating(at_k),
        fraction: None,
        root_multiplicity: roots.len(),
        kkt_flag: flag,
    };
    if !(tau_d < at_k) {
        return Ok(infeasible(false));
    }
    let mut chosen = None;
    for (i, &r) in roots.iter().enumerate() {
        if f_prime(r, inputs)? <= 0.0 {
            chosen = Some((i, r));
            break;
        }
    }
    let Some((pos, root)) = chosen else {
        return Ok(infeasible(!roots.is_empty()));
    };
    let t_hat = round_clamp(root, k);
    Ok(PlannerResult {
        t_continuous: Some(root),
        t_hat: Some(t_hat),
        status: PlannerStatus::Interior,
        pd_at_t_hat: TailProb::saturating(pd(t_hat as f64)?),
        fraction: Some(t_hat as f64 / kf),
        root_multiplicity: roots.len(),
        kkt_flag: pos > 0,
    })
}

fn bisect<F: Fn(f64) -> Result<f64>>(pd: &F, tau_d: f64, mut lo: f64, mut hi: f64, at_lo: f64) -> Result<f64> {
    let below = at_lo < 0.0;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if (pd(mid)? - tau_d < 0.0) == below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Planner results over a grid, indexed `[tau_d][alpha]`.
pub fn min_fraction_map(tau_d: &[f64], alpha: &[f64], base: &TheoryInputs) -> Result<Vec<Vec<PlannerResult>>> {
    if tau_d.is_empty() || alpha.is_empty() {
        return Err(Error::arg("planner grids must be nonempty"));
    }
    tau_d
        .iter()
        .map(|&td| {
            alpha
                .iter()
                .map(|&a| {
                    solve_min_fraction(&TheoryInputs {
                        tau_d: td,
                        alpha: a,
                        ..base.clone()
                    })
                })
                .collect()
        })
        .collect()
}

/// `(t, f(t), f′(t), Q(f(t)))` at `points` equally spaced values in `[1, k]`.
pub fn f_trace(inputs: &TheoryInputs, points: usize) -> Result<Vec<(f64, f64, f64, f64)>> {
    if points < 2 {
        return Err(Error::arg("need at least two trace points"));
    }
    let kf = inputs.k as f64;
    (0..points)
        .map(|i| {
            let t = 1.0 + (kf - 1.0) * i as f64 / (points - 1) as f64;
            let f = f_of_t(t, inputs)?;
            Ok((t, f, f_prime(t, inputs)?, specfun::q_unchecked(f)))
        })
        .collect()
}
