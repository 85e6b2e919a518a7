//! Greedy support estimation (OMP and simultaneous OMP), the three
//! OMP-based detectors, support fusion and first-iteration success rates.

use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::detector::SubspaceProjector;
use crate::error::{Error, Result};
use crate::model::{self, Hypothesis, ObservationSet, SensingEnsemble, SupportSet};
use crate::rng::{domain, substream};
use crate::specfun::TailProb;

/// Selection history of one greedy run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmpTrace {
    /// Indices in selection order.
    pub selected: SupportSet,
    /// `‖r_0‖, ‖r_1‖, …, ‖r_T‖` with `r_0 = y`.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
}

/// Which detector produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    /// Centralized simultaneous OMP.
    Somp,
    /// Independent per-node OMP, local statistics summed.
    Dist1,
    /// Independent per-node OMP, supports fused and fed back.
    Dist2,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Somp => "somp",
            Algorithm::Dist1 => "dist1",
            Algorithm::Dist2 => "dist2",
        }
    }

    /// Scalars each node transmits per decision.
    pub fn messages_per_node(self, m: usize, t0: usize) -> usize {
        match self {
            Algorithm::Somp => m,
            Algorithm::Dist1 => 1,
            Algorithm::Dist2 => t0 + 1,
        }
    }
}

/// Supports used by the per-node projectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum UsedSupport {
    Shared(SupportSet),
    PerNode(Vec<SupportSet>),
    Fused { local: Vec<SupportSet>, fused: SupportSet },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionOutcome {
    pub algorithm: Algorithm,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Hypothesis,
    pub per_node: Vec<f64>,
    pub support: UsedSupport,
    pub messages_per_node: usize,
    pub traces: Vec<OmpTrace>,
}

fn decide(statistic: f64, threshold: f64) -> Hypothesis {
    if statistic >= threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Index of the largest score among those not yet taken; ties go to the
/// lowest index.
fn argmax_excluding(scores: &[f64], taken: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if taken[i] {
            continue;
        }
        match best {
            Some(b) if scores[b] >= s => {}
            _ => best = Some(i),
        }
    }
    best
}

fn check_iterations(t: usize, m: usize, n: usize) -> Result<()> {
    if t < 1 {
        return Err(Error::arg("need at least one iteration"));
    }
    if t > m || t > n {
        return Err(Error::arg(format!("{t} iterations exceed min(M, N) = {}", m.min(n))));
    }
    Ok(())
}

/// Correlation magnitudes `|⟨r, B(ω)⟩|` for every column.
fn correlations(b: &DMatrix<f64>, r: &DVector<f64>) -> Vec<f64> {
    b.tr_mul(r).iter().map(|v| v.abs()).collect()
}

/// Orthogonal matching pursuit for `t` iterations.
pub fn omp_select(y: &DVector<f64>, b: &DMatrix<f64>, t: usize) -> Result<OmpTrace> {
    let (m, n) = b.shape();
    if y.len() != m {
        return Err(Error::arg(format!("measurement length {} for {m}×{n} operator", y.len())));
    }
    check_iterations(t, m, n)?;
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(t);
    let mut r = y.clone();
    let mut norms = vec![r.norm()];
    for _ in 0..t {
        let idx = argmax_excluding(&correlations(b, &r), &taken).expect("t <= N leaves a column");
        taken[idx] = true;
        selected.push(idx);
        r = y - SubspaceProjector::from_columns(b, &selected)?.project(y)?;
        norms.push(r.norm());
    }
    Ok(OmpTrace {
        selected: SupportSet::from_trusted(selected, n),
        residual_norms: norms,
        iterations: t,
    })
}

fn check_shapes(obs: &ObservationSet, sensing: &SensingEnsemble) -> Result<(usize, usize)> {
    if obs.nodes() != sensing.nodes() || obs.nodes() == 0 {
        return Err(Error::arg(format!(
            "{} observations for {} sensing operators",
            obs.nodes(),
            sensing.nodes()
        )));
    }
    let (m, n) = (sensing.measurements(), sensing.ambient_dim());
    if obs.measurements.iter().any(|y| y.len() != m) {
        return Err(Error::arg("measurement length does not match operators"));
    }
    Ok((m, n))
}

/// Simultaneous OMP: one shared index sequence chosen by the summed
/// correlation magnitudes, residuals updated per node.
pub fn somp_select(obs: &ObservationSet, sensing: &SensingEnsemble, t: usize) -> Result<Vec<OmpTrace>> {
    let (m, n) = check_shapes(obs, sensing)?;
    check_iterations(t, m, n)?;
    let l = obs.nodes();
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(t);
    let mut residuals: Vec<DVector<f64>> = obs.measurements.clone();
    let mut norms: Vec<Vec<f64>> = residuals.iter().map(|r| vec![r.norm()]).collect();
    for _ in 0..t {
        let mut score = vec![0.0; n];
        for (b, r) in sensing.operators.iter().zip(&residuals) {
            for (s, c) in score.iter_mut().zip(correlations(b, r)) {
                *s += c;
            }
        }
        let idx = argmax_excluding(&score, &taken).expect("t <= N leaves a column");
        taken[idx] = true;
        selected.push(idx);
        for j in 0..l {
            let y = &obs.measurements[j];
            let p = SubspaceProjector::from_columns(&sensing.operators[j], &selected)?;
            residuals[j] = y - p.project(y)?;
            norms[j].push(residuals[j].norm());
        }
    }
    let shared = SupportSet::from_trusted(selected, n);
    Ok(norms
        .into_iter()
        .map(|residual_norms| OmpTrace {
            selected: shared.clone(),
            residual_norms,
            iterations: t,
        })
        .collect())
}

fn local_energies(obs: &ObservationSet, sensing: &SensingEnsemble, supports: &[&SupportSet]) -> Result<Vec<f64>> {
    obs.measurements
        .iter()
        .zip(&sensing.operators)
        .zip(supports)
        .map(|((y, b), s)| SubspaceProjector::from_columns(b, s.indices())?.energy(y))
        .collect()
}

/// Centralized detector: `Λ = Σ_j ‖P_{j,T0} y_j‖²` on the simultaneous-OMP
/// support.
pub fn somp_detect(obs: &ObservationSet, sensing: &SensingEnsemble, t0: usize, tau0: f64) -> Result<DetectionOutcome> {
    let traces = somp_select(obs, sensing, t0)?;
    let shared = traces[0].selected.clone();
    let per_node = local_energies(obs, sensing, &vec![&shared; obs.nodes()])?;
    let statistic = per_node.iter().sum();
    Ok(DetectionOutcome {
        algorithm: Algorithm::Somp,
        statistic,
        threshold: tau0,
        decision: decide(statistic, tau0),
        per_node,
        support: UsedSupport::Shared(shared),
        messages_per_node: Algorithm::Somp.messages_per_node(sensing.measurements(), t0),
        traces,
    })
}

fn local_traces(obs: &ObservationSet, sensing: &SensingEnsemble, t0: usize) -> Result<Vec<OmpTrace>> {
    check_shapes(obs, sensing)?;
    obs.measurements
        .iter()
        .zip(&sensing.operators)
        .map(|(y, b)| omp_select(y, b, t0))
        .collect()
}

/// Each node runs OMP on its own data and reports `‖P_{j,Û_j} y_j‖²`.
pub fn dist1_detect(obs: &ObservationSet, sensing: &SensingEnsemble, t0: usize, tau0: f64) -> Result<DetectionOutcome> {
    let traces = local_traces(obs, sensing, t0)?;
    let supports: Vec<&SupportSet> = traces.iter().map(|t| &t.selected).collect();
    let per_node = local_energies(obs, sensing, &supports)?;
    let statistic = per_node.iter().sum();
    Ok(DetectionOutcome {
        algorithm: Algorithm::Dist1,
        statistic,
        threshold: tau0,
        decision: decide(statistic, tau0),
        per_node,
        support: UsedSupport::PerNode(traces.iter().map(|t| t.selected.clone()).collect()),
        messages_per_node: Algorithm::Dist1.messages_per_node(sensing.measurements(), t0),
        traces,
    })
}

/// Merge local supports: distinct indices by descending frequency, ties by
/// smaller mean selection position, then by lower index; truncated to `k`.
pub fn fuse_supports(locals: &[SupportSet], k: usize) -> Result<SupportSet> {
    let first = locals.first().ok_or_else(|| Error::arg("no local supports to fuse"))?;
    let n = first.ambient_dim();
    if locals.iter().any(|s| s.ambient_dim() != n) {
        return Err(Error::arg("local supports live in different dimensions"));
    }
    // index -> (count, sum of positions)
    let mut tally: HashMap<usize, (usize, usize)> = HashMap::new();
    for s in locals {
        for (pos, &i) in s.indices().iter().enumerate() {
            let e = tally.entry(i).or_insert((0, 0));
            e.0 += 1;
            e.1 += pos;
        }
    }
    let mut entries: Vec<(usize, usize, usize)> = tally.into_iter().map(|(i, (c, p))| (i, c, p)).collect();
    entries.sort_by(|a, b| {
        b.1.cmp(&a.1)
            // mean positions p/c compared exactly as p_a c_b vs p_b c_a
            .then_with(|| (a.2 * b.1).cmp(&(b.2 * a.1)))
            .then_with(|| a.0.cmp(&b.0))
    });
    entries.truncate(k.min(entries.len()));
    Ok(SupportSet::from_trusted(entries.into_iter().map(|e| e.0).collect(), n))
}

/// Local OMP supports are fused at the fusion center and fed back; each
/// node then reports `‖P_{j,Û} y_j‖²`.
pub fn dist2_detect(
    obs: &ObservationSet,
    sensing: &SensingEnsemble,
    t0: usize,
    k: usize,
    tau0: f64,
) -> Result<DetectionOutcome> {
    if t0 > k {
        return Err(Error::arg(format!("T0 = {t0} exceeds k = {k}")));
    }
    let traces = local_traces(obs, sensing, t0)?;
    let local: Vec<SupportSet> = traces.iter().map(|t| t.selected.clone()).collect();
    let fused = fuse_supports(&local, k)?;
    let per_node = local_energies(obs, sensing, &vec![&fused; obs.nodes()])?;
    let statistic = per_node.iter().sum();
    Ok(DetectionOutcome {
        algorithm: Algorithm::Dist2,
        statistic,
        threshold: tau0,
        decision: decide(statistic, tau0),
        per_node,
        support: UsedSupport::Fused { local, fused },
        messages_per_node: Algorithm::Dist2.messages_per_node(sensing.measurements(), t0),
        traces,
    })
}

/// Model parameters for the first-iteration success experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1P2Config {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub noise_variance: f64,
    pub coeff_a: f64,
    pub coeff_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1P2Estimate {
    /// Frequency of a true index at the first simultaneous-OMP pick.
    pub p1: TailProb,
    /// Frequency of a true index among the first picks of at least one node.
    pub p2: TailProb,
    /// Per-node first-pick success frequencies.
    pub per_node: Vec<f64>,
    /// `1 − Π_j (1 − per_node_j)`.
    pub p2_product: f64,
    /// Trials where the ratio criterion disagreed with the argmax event.
    pub ratio_mismatches: usize,
    pub trials: usize,
}

/// `max_{ω∉U} Σ_j|⟨y_j,B_j(ω)⟩| / max_{ω∈U} Σ_j|⟨y_j,B_j(ω)⟩|`.
pub fn rho_centralized(obs: &ObservationSet, sensing: &SensingEnsemble, support: &SupportSet) -> f64 {
    let n = sensing.ambient_dim();
    let mut score = vec![0.0; n];
    for (b, y) in sensing.operators.iter().zip(&obs.measurements) {
        for (s, c) in score.iter_mut().zip(correlations(b, y)) {
            *s += c;
        }
    }
    let mut inside = 0.0f64;
    let mut outside = 0.0f64;
    for (i, &s) in score.iter().enumerate() {
        if support.contains(i) {
            inside = inside.max(s);
        } else {
            outside = outside.max(s);
        }
    }
    outside / inside
}

/// Monte Carlo estimate of the first-iteration success probabilities under
/// H1. Each trial redraws support, coefficients, operators and noise from
/// its own substream of `seed`.
pub fn estimate_p1_p2(config: &P1P2Config, trials: usize, seed: u64) -> Result<P1P2Estimate> {
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    let P1P2Config {
        n,
        k,
        l,
        m,
        noise_variance,
        coeff_a,
        coeff_b,
    } = *config;
    let mut hits_c = 0usize;
    let mut hits_d = 0usize;
    let mut hits_node = vec![0usize; l];
    let mut mismatches = 0usize;
    for trial in 0..trials {
        let mut rng = substream(seed, domain::P1P2, trial as u64);
        let support = model::draw_support(n, k, &mut rng)?;
        let signals = model::draw_signals(&support, l, coeff_a, coeff_b, &mut rng)?;
        let sensing = model::draw_sensing(m, n, l, &mut rng)?;
        let obs = model::observe(&signals, &sensing, Hypothesis::H1, noise_variance, &mut rng)?;

        let c = somp_select(&obs, &sensing, 1)?[0].selected.indices()[0];
        let ok_c = support.contains(c);
        hits_c += ok_c as usize;
        let rho = rho_centralized(&obs, &sensing, &support);
        let ok_rho = match rho.partial_cmp(&1.0) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => ok_c,
            _ => false,
        };
        mismatches += (ok_rho != ok_c) as usize;

        let mut any = false;
        for j in 0..l {
            let d = omp_select(&obs.measurements[j], &sensing.operators[j], 1)?.selected.indices()[0];
            if support.contains(d) {
                hits_node[j] += 1;
                any = true;
            }
        }
        hits_d += any as usize;
    }
    let tf = trials as f64;
    let per_node: Vec<f64> = hits_node.iter().map(|&h| h as f64 / tf).collect();
    let p2_product = 1.0 - per_node.iter().map(|p| 1.0 - p).product::<f64>();
    Ok(P1P2Estimate {
        p1: TailProb::new(hits_c as f64 / tf)?,
        p2: TailProb::new(hits_d as f64 / tf)?,
        per_node,
        p2_product,
        ratio_mismatches: mismatches,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_sensing, draw_signals, draw_support, observe};
    use crate::oracle;
    use nalgebra::dvector;
    use rand_distr::{Distribution, StandardNormal};

    fn set(v: &[usize], n: usize) -> SupportSet {
        SupportSet::new(v.to_vec(), n).unwrap()
    }

    #[test]
    fn omp_identity_examples() {
        let b = DMatrix::<f64>::identity(4, 4);
        let y = dvector![0.0, 5.0, 0.0, 1.0];
        let t1 = omp_select(&y, &b, 1).unwrap();
        assert_eq!(t1.selected.indices(), &[1]);
        assert_eq!(t1.residual_norms, vec![26f64.sqrt(), 1.0]);
        let t2 = omp_select(&y, &b, 2).unwrap();
        assert_eq!(t2.selected.indices(), &[1, 3]);
        assert_eq!(*t2.residual_norms.last().unwrap(), 0.0);
        assert!(omp_select(&y, &b, 5).is_err());
        assert!(omp_select(&y, &b, 0).is_err());
    }

    #[test]
    fn omp_matches_reference() {
        for seed in 0..20 {
            let mut rng = substream(seed, domain::VALIDATE, 7);
            let b = DMatrix::from_fn(8, 16, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
            let y = DVector::from_fn(8, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
            let ours = omp_select(&y, &b, 3).unwrap();
            assert_eq!(ours.selected.indices(), oracle::omp_reference(&y, &b, 3).as_slice());
        }
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let b = DMatrix::<f64>::identity(3, 3);
        let y = dvector![1.0, 2.0, 2.0];
        assert_eq!(omp_select(&y, &b, 1).unwrap().selected.indices(), &[1]);
        assert_eq!(argmax_excluding(&[1.0, 1.0], &[false, false]), Some(0));
        assert_eq!(argmax_excluding(&[1.0, 1.0], &[true, false]), Some(1));
    }

    fn instance(seed: u64, n: usize, k: usize, l: usize, m: usize, s2: f64) -> (SupportSet, ObservationSet, SensingEnsemble) {
        let mut rng = substream(seed, domain::TRIAL, 0);
        let sup = draw_support(n, k, &mut rng).unwrap();
        let sig = draw_signals(&sup, l, 1.0, 2.0, &mut rng).unwrap();
        let sen = draw_sensing(m, n, l, &mut rng).unwrap();
        let obs = observe(&sig, &sen, Hypothesis::H1, s2, &mut rng).unwrap();
        (sup, obs, sen)
    }

    #[test]
    fn residuals_nonincreasing_and_indices_distinct() {
        for seed in 0..10 {
            let (_, obs, sen) = instance(seed, 64, 6, 3, 12, 0.5);
            let mut traces = somp_select(&obs, &sen, 8).unwrap();
            traces.extend(local_traces(&obs, &sen, 8).unwrap());
            for t in &traces {
                assert_eq!(t.residual_norms.len(), 9);
                for w in t.residual_norms.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12));
                }
                let mut s = t.selected.sorted();
                s.dedup();
                assert_eq!(s.len(), 8);
            }
        }
    }

    #[test]
    fn single_node_algorithms_coincide() {
        for seed in 0..10 {
            let (_, obs, sen) = instance(seed, 50, 3, 1, 15, 1.0);
            let a = somp_detect(&obs, &sen, 3, 1.0).unwrap();
            let b = dist1_detect(&obs, &sen, 3, 1.0).unwrap();
            let c = dist2_detect(&obs, &sen, 3, 3, 1.0).unwrap();
            let o = omp_select(&obs.measurements[0], &sen.operators[0], 3).unwrap();
            assert_eq!(a.traces[0].selected, o.selected);
            assert!((a.statistic - b.statistic).abs() < 1e-12);
            assert!((a.statistic - c.statistic).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_full_sampling_finds_true_support() {
        let mut rng = substream(5, domain::TRIAL, 0);
        let sup = draw_support(32, 4, &mut rng).unwrap();
        let sig = draw_signals(&sup, 3, 1.0, 2.0, &mut rng).unwrap();
        let sen = SensingEnsemble {
            operators: vec![DMatrix::identity(32, 32); 3],
            canonical_basis: true,
        };
        let obs = observe(&sig, &sen, Hypothesis::H1, 1e-300, &mut rng).unwrap();
        let tr = somp_select(&obs, &sen, 4).unwrap();
        for &i in tr[0].selected.indices() {
            assert!(sup.contains(i));
        }
    }

    #[test]
    fn statistics_are_consistent() {
        let (_, obs, sen) = instance(9, 64, 5, 4, 10, 1.0);
        let energy: f64 = obs.measurements.iter().map(|y| y.norm_squared()).sum();
        let a = somp_detect(&obs, &sen, 2, 3.0).unwrap();
        let UsedSupport::Shared(s) = &a.support else { panic!() };
        let mut direct = 0.0;
        for (y, b) in obs.measurements.iter().zip(&sen.operators) {
            let c = b.select_columns(s.indices().iter());
            direct += (oracle::explicit_projector(&c) * y).norm_squared();
        }
        assert!((a.statistic - direct).abs() < 1e-10);
        assert_eq!(a.decision == Hypothesis::H1, a.statistic >= 3.0);
        let b = dist1_detect(&obs, &sen, 2, 3.0).unwrap();
        assert!(b.statistic >= 0.0 && b.statistic <= energy);
        assert_eq!(a.messages_per_node, 10);
        assert_eq!(b.messages_per_node, 1);
        assert_eq!(dist2_detect(&obs, &sen, 2, 5, 3.0).unwrap().messages_per_node, 3);
        assert!(dist2_detect(&obs, &sen, 6, 5, 3.0).is_err());
    }

    #[test]
    fn fuse_examples() {
        let locals = vec![set(&[1, 5], 10), set(&[5, 7], 10), set(&[5, 1], 10)];
        assert_eq!(fuse_supports(&locals, 3).unwrap().indices(), &[5, 1, 7]);
        assert_eq!(fuse_supports(&locals, 2).unwrap().indices(), &[5, 1]);
        let same = vec![set(&[4, 2], 10); 3];
        assert_eq!(fuse_supports(&same, 5).unwrap().indices(), &[4, 2]);
        assert!(fuse_supports(&[], 3).is_err());
        // Equal counts: earlier mean position first, then lower index.
        let tie = vec![set(&[3, 8], 10), set(&[9, 2], 10)];
        assert_eq!(fuse_supports(&tie, 4).unwrap().indices(), &[3, 9, 2, 8]);
    }

    #[test]
    fn fuse_matches_tally_and_dist2_consensus() {
        for seed in 0..20 {
            let (_, obs, sen) = instance(100 + seed, 40, 4, 5, 8, 2.0);
            let d = dist2_detect(&obs, &sen, 3, 4, 0.0).unwrap();
            let UsedSupport::Fused { local, fused } = &d.support else { panic!() };
            let raw: Vec<Vec<usize>> = local.iter().map(|s| s.indices().to_vec()).collect();
            assert_eq!(fused.indices(), oracle::fuse_tally(&raw, 4).as_slice());
            let distinct = {
                let mut all: Vec<usize> = raw.concat();
                all.sort();
                all.dedup();
                all.len()
            };
            assert!(distinct >= 3 && distinct <= 15);
        }
    }

    #[test]
    fn p1p2_small_run() {
        let cfg = P1P2Config {
            n: 64,
            k: 4,
            l: 3,
            m: 16,
            noise_variance: 0.5,
            coeff_a: 1.0,
            coeff_b: 2.0,
        };
        let est = estimate_p1_p2(&cfg, 400, 11).unwrap();
        assert_eq!(est.ratio_mismatches, 0);
        for &p in &est.per_node {
            assert!(est.p2.value() >= p);
        }
        let se = (est.p2_product * (1.0 - est.p2_product) / 400.0).sqrt();
        assert!((est.p2.value() - est.p2_product).abs() < 4.0 * se + 0.02);
        assert_eq!(estimate_p1_p2(&cfg, 50, 3).unwrap(), estimate_p1_p2(&cfg, 50, 3).unwrap());
    }
}
