//! Invariant suite run by the `validate` subcommand.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::config::{AlgorithmKind, ExperimentConfig, ThresholdPolicy};
use super::{experiments, output, p1p2_table, roc_tables};
use crate::detector::SubspaceProjector;
use crate::error::Result;
use crate::model::{self, Hypothesis, SupportSet};
use crate::omp::{self, UsedSupport};
use crate::oracle;
use crate::rng::{domain, substream, SimRng};
use crate::specfun;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: worst <= tol,
        detail: format!("max error {worst:e} (tolerance {tol:e})"),
    }
}

fn gaussian(rng: &mut SimRng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

fn special_functions() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for i in 0..=64 {
        let x = -8.0 + 0.25 * i as f64;
        worst = worst.max((specfun::gaussian_q(x)?.value() - oracle::normal_upper_tail(x)).abs());
    }
    out.push(check("gaussian_q vs quadrature", worst, 1e-10));

    // The inverse is limited by the conditioning 1/φ(x) of p near 1.
    let mut bad = 0usize;
    for i in 0..=160 {
        let x = -8.0 + 0.1 * i as f64;
        let back = specfun::gaussian_q_inv(specfun::gaussian_q(x)?.value())?;
        let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if (back - x).abs() > (1e-10f64).max(4.0 * f64::EPSILON / phi) {
            bad += 1;
        }
    }
    out.push(CheckResult {
        name: "gaussian_q_inv round trip".to_string(),
        passed: bad == 0,
        detail: format!("{bad} points beyond max(1e-10, 4 eps / phi(x))"),
    });

    let mut worst: f64 = 0.0;
    for p in [1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
        worst = worst.max((specfun::gaussian_q(specfun::gaussian_q_inv(p)?)?.value() - p).abs());
    }
    out.push(check("gaussian_q(gaussian_q_inv(p)) = p", worst, 1e-10));

    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.5, 5.0, 12.0, 40.0] {
        for x in [0.05, 0.7, 2.0, 6.0, 15.0, 45.0] {
            let v = specfun::reg_lower_gamma(a, x)?.value();
            worst = worst.max((v - oracle::reg_lower_gamma_quadrature(a, x)).abs());
        }
    }
    out.push(check("regularized lower gamma vs quadrature", worst, 1e-10));

    let mut worst: f64 = 0.0;
    for order in [0.5, 1.0, 2.5, 5.0] {
        for (a, b) in [(0.0, 1.0), (1.0, 2.0), (2.0, 1.5), (3.0, 4.0), (0.5, 5.0)] {
            let v = specfun::marcum_q(order, a, b)?.value();
            worst = worst.max((v - oracle::marcum_q_integral(order, a, b)).abs());
        }
    }
    out.push(check("marcum Q vs defining integral", worst, 1e-8));

    let mut worst: f64 = 0.0;
    for (df, l, x) in [(10.0, 6.0, 12.0), (5.0, 0.5, 4.3), (25.0, 40.0, 60.0), (3.0, 80.0, 70.0)] {
        let v = specfun::ncchi2_cdf(df, l, x)?.value();
        worst = worst.max((v - oracle::ncchi2_cdf_poisson_forward(df, l, x)).abs());
    }
    out.push(check("noncentral chi-squared vs forward Poisson sum", worst, 1e-10));
    Ok(out)
}

fn projector_checks() -> Result<Vec<CheckResult>> {
    let mut worst_idem: f64 = 0.0;
    let mut worst_pyth: f64 = 0.0;
    for seed in 0..30u64 {
        let mut rng = substream(seed, domain::VALIDATE, 1);
        let m = 5 + (seed as usize % 20);
        let r = 1 + (seed as usize % m);
        let c = DMatrix::from_fn(m, r, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(m, |_, _| gaussian(&mut rng));
        let p = SubspaceProjector::from_matrix(&c);
        let py = p.project(&y)?;
        let scale = y.norm_squared().max(1.0);
        worst_idem = worst_idem.max((p.project(&py)? - &py).norm() / scale.sqrt());
        let perp = p.residual(&y)?;
        worst_pyth = worst_pyth.max((py.norm_squared() + perp.norm_squared() - y.norm_squared()).abs() / scale);
    }
    Ok(vec![
        check("projector idempotency", worst_idem, 1e-10),
        check("projector Pythagoras", worst_pyth, 1e-10),
    ])
}

struct Instance {
    obs: model::ObservationSet,
    sensing: model::SensingEnsemble,
}

fn instance(seed: u64, n: usize, k: usize, l: usize, m: usize) -> Result<Instance> {
    let mut rng = substream(seed, domain::VALIDATE, 2);
    let support = model::draw_support(n, k, &mut rng)?;
    let signals = model::draw_signals(&support, l, 1.0, 2.0, &mut rng)?;
    let sensing = model::draw_sensing(m, n, l, &mut rng)?;
    let hyp = if seed % 2 == 0 { Hypothesis::H1 } else { Hypothesis::H0 };
    let obs = model::observe(&signals, &sensing, hyp, 0.5, &mut rng)?;
    Ok(Instance { obs, sensing })
}

fn omp_checks() -> Result<Vec<CheckResult>> {
    let mut monotone_violations = 0usize;
    let mut duplicate_violations = 0usize;
    let mut worst_l1: f64 = 0.0;
    let mut fuse_mismatch = 0usize;
    let mut message_mismatch = 0usize;
    for seed in 0..20u64 {
        let inst = instance(seed, 64, 5, 4, 12)?;
        let t0 = 1 + (seed as usize % 5);
        let outs = [
            omp::somp_detect(&inst.obs, &inst.sensing, t0, 1.0)?,
            omp::dist1_detect(&inst.obs, &inst.sensing, t0, 1.0)?,
            omp::dist2_detect(&inst.obs, &inst.sensing, t0, 5, 1.0)?,
        ];
        for o in &outs {
            for tr in &o.traces {
                if tr.residual_norms.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
                    monotone_violations += 1;
                }
                let mut s = tr.selected.sorted();
                s.dedup();
                if s.len() != tr.selected.len() {
                    duplicate_violations += 1;
                }
            }
            let expected = o.algorithm.messages_per_node(12, t0);
            let table = match o.algorithm {
                omp::Algorithm::Somp => 12,
                omp::Algorithm::Dist1 => 1,
                omp::Algorithm::Dist2 => t0 + 1,
            };
            if o.messages_per_node != expected || expected != table {
                message_mismatch += 1;
            }
        }
        if let UsedSupport::Fused { local, fused } = &outs[2].support {
            let raw: Vec<Vec<usize>> = local.iter().map(|s| s.indices().to_vec()).collect();
            if fused.indices() != oracle::fuse_tally(&raw, 5).as_slice() {
                fuse_mismatch += 1;
            }
        }

        let single = instance(100 + seed, 48, 4, 1, 14)?;
        let a = omp::somp_detect(&single.obs, &single.sensing, 4, 0.0)?.statistic;
        let b = omp::dist1_detect(&single.obs, &single.sensing, 4, 0.0)?.statistic;
        let c = omp::dist2_detect(&single.obs, &single.sensing, 4, 4, 0.0)?.statistic;
        worst_l1 = worst_l1.max((a - b).abs()).max((a - c).abs());
    }

    // Fusion against the tally on random local sets with heavy overlap.
    for seed in 0..200u64 {
        let mut rng = substream(seed, domain::VALIDATE, 3);
        let nodes = rng.random_range(1..6);
        let t0 = rng.random_range(1..5);
        let locals: Vec<SupportSet> = (0..nodes)
            .map(|_| {
                let idx = rand::seq::index::sample(&mut rng, 8, t0).into_vec();
                SupportSet::new(idx, 8)
            })
            .collect::<Result<_>>()?;
        let k = rng.random_range(t0..9);
        let raw: Vec<Vec<usize>> = locals.iter().map(|s| s.indices().to_vec()).collect();
        if omp::fuse_supports(&locals, k)?.indices() != oracle::fuse_tally(&raw, k).as_slice() {
            fuse_mismatch += 1;
        }
    }

    let count = |name: &str, bad: usize| CheckResult {
        name: name.to_string(),
        passed: bad == 0,
        detail: format!("{bad} violations"),
    };
    Ok(vec![
        count("OMP residual norms nonincreasing", monotone_violations),
        count("selected indices distinct", duplicate_violations),
        check("single-node algorithms coincide", worst_l1, 1e-12),
        count("support fusion equals brute-force tally", fuse_mismatch),
        count("message counts match table", message_mismatch),
    ])
}

fn determinism(cfg: &ExperimentConfig) -> Result<CheckResult> {
    let small = ExperimentConfig {
        n: 64,
        k: 3,
        l: 3,
        m: Some(12),
        c_r: None,
        t0: 2,
        trials: 120,
        bootstrap: 10,
        algorithms: vec![
            AlgorithmKind::KnownSupport,
            AlgorithmKind::Somp,
            AlgorithmKind::Dist1,
            AlgorithmKind::Dist2,
            AlgorithmKind::MlIgnoreSparsity,
        ],
        threshold_policy: ThresholdPolicy::Sweep,
        c_r_grid: vec![0.1, 0.3],
        seed: cfg.seed,
        ..ExperimentConfig::default()
    };
    let render = || -> Result<String> {
        let report = experiments::run_roc(&small)?;
        let (roc, summary) = roc_tables(&report);
        let meta = output::metadata("roc", &small, &[report.protocol.clone()]);
        let p1p2 = experiments::run_p1_p2(&small)?;
        Ok(output::render(&meta, &roc)? + &output::render(&meta, &summary)? + &output::render(&meta, &p1p2_table(&p1p2))?)
    };
    let (a, b) = (render()?, render()?);
    Ok(CheckResult {
        name: "seed determinism (byte-identical CSV)".to_string(),
        passed: a == b,
        detail: format!("{} bytes", a.len()),
    })
}

/// Run every check; failures are reported, not raised.
pub fn run_validation(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let mut out = special_functions()?;
    out.extend(projector_checks()?);
    out.extend(omp_checks()?);
    out.push(determinism(cfg)?);
    Ok(out)
}
