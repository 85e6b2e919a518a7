use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use sparse_detect::detector::{self, SubspaceProjector, TheoryInputs};
use sparse_detect::model::{self, Hypothesis, SupportSet};
use sparse_detect::rng::{domain, substream, SimRng};
use sparse_detect::{omp, oracle, planner, specfun};

fn normal(rng: &mut SimRng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

fn instance(seed: u64, n: usize, k: usize, l: usize, m: usize) -> (SupportSet, model::ObservationSet, model::SensingEnsemble) {
    let mut rng = substream(seed, domain::TRIAL, 0);
    let support = model::draw_support(n, k, &mut rng).unwrap();
    let signals = model::draw_signals(&support, l, 1.0, 2.0, &mut rng).unwrap();
    let sensing = model::draw_sensing(m, n, l, &mut rng).unwrap();
    let obs = model::observe(&signals, &sensing, Hypothesis::H1, 0.3, &mut rng).unwrap();
    (support, obs, sensing)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projector_is_idempotent_and_orthogonal(seed in any::<u64>(), m in 2usize..30, r in 1usize..8) {
        let mut rng = substream(seed, domain::VALIDATE, 0);
        let r = r.min(m);
        let c = DMatrix::from_fn(m, r, |_, _| normal(&mut rng));
        let y = DVector::from_fn(m, |_, _| normal(&mut rng));
        let p = SubspaceProjector::from_matrix(&c);
        let py = p.project(&y).unwrap();
        prop_assert!((p.project(&py).unwrap() - &py).norm() <= 1e-10 * y.norm().max(1.0));
        let res = p.residual(&y).unwrap();
        prop_assert!((py.norm_squared() + res.norm_squared() - y.norm_squared()).abs() <= 1e-10 * y.norm_squared().max(1.0));
        prop_assert!((c.transpose() * res).norm() <= 1e-9 * y.norm().max(1.0) * c.norm().max(1.0));
    }

    #[test]
    fn omp_is_monotone_and_distinct(seed in any::<u64>(), t in 1usize..6) {
        let (_, obs, sensing) = instance(seed, 48, 5, 3, 14);
        for out in [
            omp::somp_detect(&obs, &sensing, t, 0.0).unwrap(),
            omp::dist1_detect(&obs, &sensing, t, 0.0).unwrap(),
            omp::dist2_detect(&obs, &sensing, t.min(5), 5, 0.0).unwrap(),
        ] {
            for tr in &out.traces {
                prop_assert!(tr.residual_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
                let mut s = tr.selected.sorted();
                s.dedup();
                prop_assert_eq!(s.len(), tr.selected.len());
            }
            prop_assert!(out.statistic >= 0.0);
        }
    }

    #[test]
    fn omp_matches_reference(seed in any::<u64>(), t in 1usize..5) {
        let mut rng = substream(seed, domain::VALIDATE, 1);
        let b = DMatrix::from_fn(10, 30, |_, _| normal(&mut rng));
        let y = DVector::from_fn(10, |_, _| normal(&mut rng));
        let ours = omp::omp_select(&y, &b, t).unwrap();
        let reference = oracle::omp_reference(&y, &b, t);
        prop_assert_eq!(ours.selected.indices(), reference.as_slice());
    }

    #[test]
    fn single_node_algorithms_coincide(seed in any::<u64>(), t in 1usize..5) {
        let (_, obs, sensing) = instance(seed, 40, 4, 1, 12);
        let a = omp::somp_detect(&obs, &sensing, t, 0.0).unwrap().statistic;
        let b = omp::dist1_detect(&obs, &sensing, t, 0.0).unwrap().statistic;
        let c = omp::dist2_detect(&obs, &sensing, t, t, 0.0).unwrap().statistic;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!((a - c).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn fusion_equals_tally(seed in any::<u64>()) {
        let mut rng = substream(seed, domain::VALIDATE, 2);
        let nodes = rng.random_range(1..7);
        let t = rng.random_range(1..5);
        let locals: Vec<SupportSet> = (0..nodes)
            .map(|_| SupportSet::new(rand::seq::index::sample(&mut rng, 9, t).into_vec(), 9).unwrap())
            .collect();
        let k = rng.random_range(t..10);
        let raw: Vec<Vec<usize>> = locals.iter().map(|s| s.indices().to_vec()).collect();
        let fused = omp::fuse_supports(&locals, k).unwrap();
        let tally = oracle::fuse_tally(&raw, k);
        prop_assert_eq!(fused.indices(), tally.as_slice());
    }

    #[test]
    fn exact_threshold_inverts_false_alarm(alpha in 0.001f64..0.999, t in 1usize..6, l in 1usize..8, s2 in 0.1f64..10.0) {
        let tau = detector::threshold_exact(alpha, t, l, s2).unwrap();
        let pf = detector::pf_theoretical(tau, t, l, s2).unwrap().value();
        prop_assert!((pf - alpha).abs() <= 1e-9);
    }

    #[test]
    fn detection_exceeds_false_alarm(lambda in 0.0f64..60.0, tau in 0.1f64..80.0, t in 1usize..5, l in 1usize..6) {
        let pf = detector::pf_theoretical(tau, t, l, 1.0).unwrap().value();
        let pd = detector::pd_theoretical(tau, lambda, t, l, 1.0).unwrap().value();
        prop_assert!(pd + 1e-12 >= pf);
    }

    #[test]
    fn marcum_q_is_a_probability(order in 0.5f64..10.0, a in 0.0f64..8.0, b in 0.0f64..12.0) {
        let q = specfun::marcum_q(order, a, b).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&q));
        let q2 = specfun::marcum_q(order, a + 0.5, b).unwrap().value();
        prop_assert!(q2 + 1e-12 >= q);
    }

    #[test]
    fn planner_output_is_well_formed(tau_d in 0.05f64..0.95, alpha in 0.01f64..0.3, s2 in 0.2f64..5.0, m in 10usize..120) {
        let inputs = TheoryInputs::from_coefficient_range(5, 5, m, 256, s2, 3.0, 4.0, alpha, tau_d);
        let r = planner::solve_min_fraction(&inputs).unwrap();
        match r.status {
            planner::PlannerStatus::AchievedAtOne => prop_assert_eq!(r.t_hat, Some(1)),
            planner::PlannerStatus::Interior => {
                let t = r.t_hat.unwrap();
                prop_assert!((1..=4).contains(&t));
                let tc = r.t_continuous.unwrap();
                prop_assert!((1.0..=5.0).contains(&tc));
            }
            planner::PlannerStatus::Infeasible => prop_assert!(r.t_hat.is_none()),
        }
    }
}

#[test]
fn energy_detector_is_total_energy() {
    let (_, obs, sensing) = instance(3, 64, 4, 4, 16);
    let total: f64 = obs.measurements.iter().map(|y| y.norm_squared()).sum();
    let ml = detector::ml_statistic(&obs, &sensing).unwrap();
    assert!((ml - total).abs() <= 1e-10 * total);
}

#[test]
fn full_support_recovery_at_high_snr() {
    let mut rng = substream(11, domain::TRIAL, 0);
    let support = model::draw_support(64, 3, &mut rng).unwrap();
    let signals = model::draw_signals(&support, 4, 3.0, 4.0, &mut rng).unwrap();
    let sensing = model::draw_sensing(32, 64, 4, &mut rng).unwrap();
    let obs = model::observe(&signals, &sensing, Hypothesis::H1, 1e-6, &mut rng).unwrap();
    let traces = omp::somp_select(&obs, &sensing, 3).unwrap();
    assert_eq!(traces[0].selected.sorted(), support.sorted());
}
