//! Slow reference implementations used as test oracles and by the
//! `validate` command.
//!
//! Nothing here calls into [`crate::specfun`], [`crate::detector`] or
//! [`crate::omp`]; every value is obtained by a different route (quadrature
//! of defining integrals, power series, explicit normal equations, plain
//! counting) so that agreement is meaningful.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Adaptive Simpson on `[a, b]`, first split into `panels` equal pieces.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    let per_panel = tol / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == panels { b } else { lo + h };
            let fa = f(lo);
            let fb = f(hi);
            let m = 0.5 * (lo + hi);
            let fm = f(m);
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_rec(f, lo, hi, fa, fm, fb, whole, per_panel, 30)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-13 * (left.abs() + right.abs()) {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// ln Γ(x) by upward recurrence to x >= 15 and the Stirling series.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < 15.0 {
        shift += z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z2 * z2 * z)
        - 1.0 / (1680.0 * z2 * z2 * z2 * z);
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - shift
}

/// `Q(x)` from the defining integral, written as
/// `φ(x) ∫_0^∞ exp(-x u - u²/2) du` for `x >= 0`.
pub fn normal_upper_tail(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_upper_tail(-x);
    }
    let g = |u: f64| (-x * u - 0.5 * u * u).exp();
    let upper = 40.0;
    let integral = integrate(&g, 0.0, upper, 64, 1e-16);
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt() * integral
}

/// Bisection on [`normal_upper_tail`].
pub fn normal_upper_tail_inverse(p: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0, 12.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_upper_tail(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `γ(a, x) / Γ(a)` as a ratio of two quadratures of `t^{a-1} e^{-t}`.
pub fn reg_lower_gamma_quadrature(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if a < 1.0 {
        // t = u^{1/a} removes the singularity at 0.
        let g = |u: f64| (-(u.powf(1.0 / a))).exp();
        let top = (60.0f64).powf(a);
        let total = integrate(&g, 0.0, top, 256, 1e-15);
        let xa = x.powf(a);
        if xa >= top {
            return 1.0;
        }
        return integrate(&g, 0.0, xa, 256, 1e-15) / total;
    }
    // Scale by the peak value at t = a - 1 to keep magnitudes near one.
    let peak = a - 1.0;
    let log_scale = if peak > 0.0 { peak * peak.ln() - peak } else { 0.0 };
    let g = |t: f64| {
        if t <= 0.0 {
            if a == 1.0 {
                (-log_scale).exp()
            } else {
                0.0
            }
        } else {
            ((a - 1.0) * t.ln() - t - log_scale).exp()
        }
    };
    let upper = a + 40.0 * a.sqrt() + 60.0;
    let width = (a.sqrt() + 1.0) * 10.0;
    let total = integrate(&g, 0.0, upper, (upper / width).ceil().max(64.0) as usize, 1e-14);
    if x >= upper {
        return 1.0;
    }
    let panels = (x / width).ceil().max(64.0) as usize;
    integrate(&g, 0.0, x, panels, 1e-14 * total) / total
}

/// `Q_M(a, b)` by quadrature of its defining integral with the modified
/// Bessel function expanded in its power series (log domain).
pub fn marcum_q_integral(order: f64, a: f64, b: f64) -> f64 {
    let nu = order - 1.0;
    let integrand = |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if a == 0.0 {
            // Limit a -> 0 of x (x/a)^ν I_ν(ax) e^{-(x²+a²)/2}.
            let ln = (2.0 * nu + 1.0) * x.ln() - 0.5 * x * x - nu * 2f64.ln() - ln_gamma_stirling(nu + 1.0);
            return ln.exp();
        }
        // x (x/a)^ν I_ν(ax) = Σ_m x^{2ν+2m+1} a^{2m} 2^{-(2m+ν)} / (m! Γ(m+ν+1)).
        let base = -0.5 * (x * x + a * a);
        let mut sum = 0.0;
        let mut m = 0.0;
        let mut best: f64 = f64::NEG_INFINITY;
        loop {
            let ln = (2.0 * nu + 2.0 * m + 1.0) * x.ln() + 2.0 * m * a.ln() - (2.0 * m + nu) * 2f64.ln()
                - ln_gamma_stirling(m + 1.0)
                - ln_gamma_stirling(m + nu + 1.0)
                + base;
            best = best.max(ln);
            let t = ln.exp();
            sum += t;
            // Terms peak near m ≈ ax/2 and then decay geometrically.
            if m > a * x && ln < best - 40.0 {
                break;
            }
            m += 1.0;
            if m > 5000.0 {
                break;
            }
        }
        sum
    };
    let upper = b.max(a + (2.0 * order).sqrt()) + 40.0;
    if b >= upper {
        return 0.0;
    }
    integrate(&integrand, b, upper, 400, 1e-13)
}

/// Noncentral chi-squared cdf as a forward Poisson sum from `i = 0`. The
/// first central term comes from [`reg_lower_gamma_quadrature`]; later ones
/// from `P(a + 1, z) = P(a, z) − z^a e^{−z} / Γ(a + 1)`.
pub fn ncchi2_cdf_poisson_forward(df: f64, lambda: f64, x: f64) -> f64 {
    let mu = 0.5 * lambda;
    let z = 0.5 * x;
    let mut a = 0.5 * df;
    let mut central = reg_lower_gamma_quadrature(a, z);
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut i = 0.0;
    loop {
        let lw = -mu + if i > 0.0 { i * mu.ln() } else { 0.0 } - ln_gamma_stirling(i + 1.0);
        let w = lw.exp();
        total += w * central;
        mass += w;
        if i > mu && w < 1e-18 {
            break;
        }
        if z > 0.0 {
            central -= (a * z.ln() - z - ln_gamma_stirling(a + 1.0)).exp();
            central = central.max(0.0);
        }
        a += 1.0;
        i += 1.0;
    }
    debug_assert!((mass - 1.0).abs() < 1e-9);
    total
}

/// Orthogonal projector `C (Cᵀ C)^{-1} Cᵀ` formed with an explicit inverse.
pub fn explicit_projector(c: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = c.transpose() * c;
    let inv = gram.try_inverse().expect("selected columns must be independent");
    c * inv * c.transpose()
}

/// OMP run literally: explicit projector each step, argmax over all columns
/// not yet chosen (lowest index on ties). Returns the selection order.
pub fn omp_reference(y: &DVector<f64>, b: &DMatrix<f64>, iterations: usize) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    for _ in 0..iterations {
        let mut best = None;
        let mut best_val = -1.0;
        for w in 0..b.ncols() {
            if selected.contains(&w) {
                continue;
            }
            let v = residual.dot(&b.column(w)).abs();
            if v > best_val {
                best_val = v;
                best = Some(w);
            }
        }
        selected.push(best.expect("at least one column left"));
        let c = b.select_columns(selected.iter());
        let p = explicit_projector(&c);
        residual = y - &p * y;
    }
    selected
}

/// Frequency fusion by explicit tallying: count, then mean selection
/// position, then index.
pub fn fuse_tally(locals: &[Vec<usize>], k: usize) -> Vec<usize> {
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for set in locals {
        for (pos, &idx) in set.iter().enumerate() {
            let e = tally.entry(idx).or_insert((0, 0));
            e.0 += 1;
            e.1 += pos;
        }
    }
    let mut rows: Vec<(usize, f64, usize)> =
        tally.into_iter().map(|(idx, (c, p))| (c, p as f64 / c as f64, idx)).collect();
    rows.sort_by(|x, y| {
        y.0.cmp(&x.0)
            .then(x.1.partial_cmp(&y.1).unwrap())
            .then(x.2.cmp(&y.2))
    });
    rows.into_iter().take(k).map(|r| r.2).collect()
}

/// One-sample Kolmogorov–Smirnov test. Returns `(D, p-value)` with the
/// asymptotic Kolmogorov distribution.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_sf(t))
}

/// Two-sample Kolmogorov–Smirnov test `(D, p-value)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let t = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_sf(t))
}

fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..200 {
        let j = j as f64;
        let term = 2.0 * (if j as i64 % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * j * j * t * t).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_known_functions() {
        let v = integrate(&|x: f64| x.exp(), 0.0, 1.0, 8, 1e-14);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
        let v = integrate(&|x: f64| x.powi(5), -1.0, 2.0, 4, 1e-14);
        assert!((v - (64.0 - 1.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn stirling_gamma_known_values() {
        assert!(ln_gamma_stirling(1.0).abs() < 1e-13);
        assert!((ln_gamma_stirling(0.5) - 0.5 * PI.ln()).abs() < 1e-13);
        assert!((ln_gamma_stirling(21.0) - (2_432_902_008_176_640_000f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn reference_normal_tail_is_accurate() {
        // Q(1.959963984540054) = 0.025.
        assert!((normal_upper_tail(1.959_963_984_540_054) - 0.025).abs() < 1e-14);
        assert!((normal_upper_tail(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reference_gamma_closed_forms() {
        assert!((reg_lower_gamma_quadrature(1.0, 2.0) - (1.0 - (-2f64).exp())).abs() < 1e-12);
        // P(2, x) = 1 - e^{-x}(1 + x)
        let x = 3.3f64;
        assert!((reg_lower_gamma_quadrature(2.0, x) - (1.0 - (-x).exp() * (1.0 + x))).abs() < 1e-12);
        // P(1/2, x) = erf(sqrt x) = 1 - 2 Q(sqrt(2x))
        let x = 0.7f64;
        let e = 1.0 - 2.0 * normal_upper_tail((2.0 * x).sqrt());
        assert!((reg_lower_gamma_quadrature(0.5, x) - e).abs() < 1e-11);
    }

    #[test]
    fn reference_marcum_rayleigh_limit() {
        let v = marcum_q_integral(1.0, 0.0, 2.0);
        assert!((v - (-2f64).exp()).abs() < 1e-12);
        // Q_1(a, 0) = 1.
        assert!((marcum_q_integral(1.0, 1.5, 0.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tally_orders_by_count_then_position() {
        let locals = vec![vec![1, 5], vec![5, 7], vec![5, 1]];
        assert_eq!(fuse_tally(&locals, 3), vec![5, 1, 7]);
    }
}
