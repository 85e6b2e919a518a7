//! Special functions behind the closed-form detection probabilities.
//!
//! Exact routines return [`TailProb`]. The two cube-root normal
//! approximations return raw `f64` formula output; clamping is left to the
//! caller.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const MAX_ITER: usize = 20_000;
const EPS: f64 = 2.0 * f64::EPSILON;
const FPMIN: f64 = 1e-300;

/// Poisson mass allowed to fall outside the truncated mixture.
const POISSON_TAIL: f64 = 1e-14;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
#[serde(transparent)]
pub struct TailProb(f64);

impl TailProb {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(TailProb(value))
        } else {
            Err(Error::domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps round-off excursions; `value` must not be NaN.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        TailProb(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        TailProb(1.0 - self.0)
    }
}

impl From<TailProb> for f64 {
    fn from(p: TailProb) -> f64 {
        p.0
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {x}")))
    }
}

/// erfc(z) for z >= 0.
fn erfc_nonneg(z: f64) -> f64 {
    if z < 1.5 {
        // erf(z) = 2/sqrt(pi) e^{-z^2} sum 2^n z^{2n+1} / (2n+1)!!, all terms positive.
        let z2 = z * z;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * z2 / (2.0 * n + 1.0);
            sum += term;
            if term <= sum * EPS {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * (-z2).exp() * sum
    } else {
        // Modified Lentz on z + (1/2)/(z + 1/(z + (3/2)/(z + ...))).
        let mut f = z;
        let mut c = z;
        let mut d = 0.0;
        for i in 1..MAX_ITER {
            let a = i as f64 * 0.5;
            d = z + a * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = z + a / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (-z * z).exp() / (PI.sqrt() * f)
    }
}

/// Upper tail of the standard normal, `Q(x) = P(Z > x)`.
pub fn gaussian_q(x: f64) -> Result<TailProb> {
    check_finite("x", x)?;
    Ok(TailProb::saturating(q_unchecked(x)))
}

pub(crate) fn q_unchecked(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * erfc_nonneg(x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc_nonneg(-x * FRAC_1_SQRT_2)
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`gaussian_q`] on `(0, 1)`.
///
/// Safeguarded Newton iteration inside a bracket that always contains the
/// root; falls back to bisection whenever a step would leave it.
pub fn gaussian_q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("gaussian_q_inv needs p in (0,1), got {p}")));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    // Rough start from a logistic-type approximation of the normal tail.
    let mut x = if p < 0.5 {
        let t = (-2.0 * p.ln()).sqrt();
        t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
            / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t)
    } else if p > 0.5 {
        let t = (-2.0 * (1.0 - p).ln()).sqrt();
        -(t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
            / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t))
    } else {
        return Ok(0.0);
    };
    for _ in 0..200 {
        let q = q_unchecked(x);
        let resid = q - p;
        if resid == 0.0 {
            return Ok(x);
        }
        // Q is decreasing: Q(x) > p means the root lies to the right.
        if resid > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = -normal_pdf(x);
        let mut next = if slope != 0.0 { x - resid / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(a) for a > 0 (Lanczos, g = 7).
pub fn ln_gamma(a: f64) -> f64 {
    if a < 0.5 {
        // Reflection: Γ(a)Γ(1-a) = π / sin(πa).
        (PI / (PI * a).sin()).ln() - ln_gamma(1.0 - a)
    } else {
        let x = a - 1.0;
        let mut acc = LANCZOS[0];
        let t = x + 7.5;
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Regularized lower and upper incomplete gamma `(P(a,x), Q(a,x))`.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_pref = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() <= sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_pref).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_pref).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// `F(a, x) = γ(a, x) / Γ(a)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<TailProb> {
    check_gamma_args(a, x)?;
    Ok(TailProb::saturating(gamma_pq(a, x).0))
}

/// `1 - F(a, x)`, computed without cancellation.
pub fn reg_upper_gamma(a: f64, x: f64) -> Result<TailProb> {
    check_gamma_args(a, x)?;
    Ok(TailProb::saturating(gamma_pq(a, x).1))
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    check_finite("a", a)?;
    if a <= 0.0 {
        return Err(Error::domain(format!("gamma shape must be > 0, got {a}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

fn check_df(df: f64) -> Result<()> {
    if df.is_finite() && df > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("degrees of freedom must be > 0, got {df}")))
    }
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::domain(format!("{name} must be >= 0, got {x}")))
    } else {
        Ok(())
    }
}

/// Central chi-squared cdf.
pub fn chi2_cdf(df: f64, x: f64) -> Result<TailProb> {
    check_df(df)?;
    check_nonneg("x", x)?;
    Ok(TailProb::saturating(gamma_pq(0.5 * df, 0.5 * x).0))
}

/// Central chi-squared survival function `1 - cdf`.
pub fn chi2_sf(df: f64, x: f64) -> Result<TailProb> {
    check_df(df)?;
    check_nonneg("x", x)?;
    Ok(TailProb::saturating(gamma_pq(0.5 * df, 0.5 * x).1))
}

/// `(cdf, sf)` of the noncentral chi-squared law as a Poisson(λ/2) mixture of
/// central laws with `df + 2i` degrees of freedom.
///
/// Summation starts at the Poisson mode and walks outward in both directions;
/// each side stops once a geometric bound on its remaining Poisson mass drops
/// below half of [`POISSON_TAIL`].
fn ncchi2_pair(df: f64, lambda: f64, x: f64) -> (f64, f64) {
    if lambda == 0.0 {
        return gamma_pq(0.5 * df, 0.5 * x);
    }
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let mu = 0.5 * lambda;
    let half_x = 0.5 * x;
    let mode = mu.floor();
    let w_mode = (-mu + mode * mu.ln() - ln_gamma(mode + 1.0)).exp();
    let side_budget = 0.5 * POISSON_TAIL;

    let (p0, q0) = gamma_pq(0.5 * df + mode, half_x);
    let mut cdf = w_mode * p0;
    let mut sf = w_mode * q0;

    // Upward: w_{i+1} = w_i μ / (i+1).
    let mut w = w_mode;
    let mut i = mode;
    loop {
        let r_next = mu / (i + 2.0);
        let tail_bound = if r_next < 1.0 {
            w * (mu / (i + 1.0)) / (1.0 - r_next)
        } else {
            f64::INFINITY
        };
        if tail_bound < side_budget || w == 0.0 && i > mu {
            break;
        }
        w *= mu / (i + 1.0);
        i += 1.0;
        let (p, q) = gamma_pq(0.5 * df + i, half_x);
        cdf += w * p;
        sf += w * q;
    }

    // Downward: w_{i-1} = w_i i / μ.
    let mut w = w_mode;
    let mut i = mode;
    while i > 0.0 {
        let r = i / mu;
        let tail_bound = if r < 1.0 { w * r / (1.0 - r) } else { f64::INFINITY };
        if tail_bound < side_budget {
            break;
        }
        w *= i / mu;
        i -= 1.0;
        let (p, q) = gamma_pq(0.5 * df + i, half_x);
        cdf += w * p;
        sf += w * q;
    }
    (cdf, sf)
}

/// Noncentral chi-squared cdf.
pub fn ncchi2_cdf(df: f64, noncentrality: f64, x: f64) -> Result<TailProb> {
    check_df(df)?;
    check_nonneg("noncentrality", noncentrality)?;
    check_nonneg("x", x)?;
    Ok(TailProb::saturating(ncchi2_pair(df, noncentrality, x).0))
}

/// Noncentral chi-squared survival function.
pub fn ncchi2_sf(df: f64, noncentrality: f64, x: f64) -> Result<TailProb> {
    check_df(df)?;
    check_nonneg("noncentrality", noncentrality)?;
    check_nonneg("x", x)?;
    Ok(TailProb::saturating(ncchi2_pair(df, noncentrality, x).1))
}

/// Generalized Marcum Q function `Q_M(a, b)`.
///
/// Any positive order is accepted, which covers the half-integer orders
/// `T0·L/2` produced by the detectors. Evaluated through the identity
/// `Q_M(a, b) = 1 - F_{χ²_{2M}(a²)}(b²)`.
pub fn marcum_q(order: f64, a: f64, b: f64) -> Result<TailProb> {
    if !(order.is_finite() && order > 0.0) {
        return Err(Error::domain(format!("Marcum Q order must be > 0, got {order}")));
    }
    check_nonneg("a", a)?;
    check_nonneg("b", b)?;
    if !a.is_finite() {
        return Err(Error::domain("Marcum Q parameter a must be finite"));
    }
    if b.is_infinite() {
        return Ok(TailProb(0.0));
    }
    Ok(TailProb::saturating(ncchi2_pair(2.0 * order, a * a, b * b).1))
}

/// Cube-root normal approximation of the central chi-squared cdf,
/// `1 - Q(((x/k)^{1/3} - (1 - 2/(9k))) / sqrt(2/(9k)))`. Not clamped.
pub fn chi2_cdf_sankaran(df: f64, x: f64) -> Result<f64> {
    check_df(df)?;
    check_nonneg("x", x)?;
    let v = 2.0 / (9.0 * df);
    let arg = ((x / df).cbrt() - (1.0 - v)) / v.sqrt();
    Ok(1.0 - q_unchecked(arg))
}

/// Argument of `Q` in the noncentral cube-root approximation, so that the
/// approximate survival function is `Q(arg)`.
pub fn sankaran_nc_argument(df: f64, noncentrality: f64, x: f64) -> Result<f64> {
    check_df(df)?;
    check_nonneg("noncentrality", noncentrality)?;
    check_nonneg("x", x)?;
    let k = df;
    let l = noncentrality;
    let h = 1.0 - (2.0 / 3.0) * (k + l) * (k + 3.0 * l) / ((k + 2.0 * l) * (k + 2.0 * l));
    let p = (k + 2.0 * l) / ((k + l) * (k + l));
    let m = (h - 1.0) * (1.0 - 3.0 * h);
    let num = (x / (k + l)).powf(h) - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p));
    let den = h * (2.0 * p).sqrt() * (1.0 + 0.5 * m * p);
    Ok(num / den)
}

/// Cube-root normal approximation of the noncentral chi-squared cdf. Not
/// clamped.
pub fn ncchi2_cdf_sankaran(df: f64, noncentrality: f64, x: f64) -> Result<f64> {
    let arg = sankaran_nc_argument(df, noncentrality, x)?;
    Ok(1.0 - q_unchecked(arg))
}
