//! Joint-sparse signal ensembles, row-orthonormal sensing operators and
//! compressed observations.
//!
//! Indices are zero-based throughout the crate: a [`SupportSet`] over an
//! ambient dimension `N` holds values in `0..N`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Signal plus noise.
    H1,
}

/// Ordered collection of distinct column indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl SupportSet {
    pub fn new(indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        if indices.len() > ambient_dim {
            return Err(Error::arg(format!(
                "support of size {} exceeds ambient dimension {ambient_dim}",
                indices.len()
            )));
        }
        let mut seen = vec![false; ambient_dim];
        for &i in &indices {
            if i >= ambient_dim {
                return Err(Error::arg(format!("index {i} out of range 0..{ambient_dim}")));
            }
            if seen[i] {
                return Err(Error::arg(format!("duplicate index {i}")));
            }
            seen[i] = true;
        }
        Ok(SupportSet { indices, ambient_dim })
    }

    pub fn empty(ambient_dim: usize) -> Self {
        SupportSet {
            indices: Vec::new(),
            ambient_dim,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    /// The first `t` indices, in order.
    pub fn prefix(&self, t: usize) -> SupportSet {
        SupportSet {
            indices: self.indices[..t.min(self.indices.len())].to_vec(),
            ambient_dim: self.ambient_dim,
        }
    }

    /// Indices sorted ascending.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }

    /// `t` indices drawn uniformly without replacement, in draw order.
    pub fn random_subset<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<SupportSet> {
        if t > self.len() {
            return Err(Error::arg(format!("cannot draw {t} of {} indices", self.len())));
        }
        let picks = index::sample(rng, self.len(), t);
        Ok(SupportSet {
            indices: picks.into_iter().map(|p| self.indices[p]).collect(),
            ambient_dim: self.ambient_dim,
        })
    }

    pub(crate) fn from_trusted(indices: Vec<usize>, ambient_dim: usize) -> Self {
        debug_assert!(SupportSet::new(indices.clone(), ambient_dim).is_ok());
        SupportSet { indices, ambient_dim }
    }
}

/// `L` coefficient vectors sharing one support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEnsemble {
    pub coefficients: Vec<DVector<f64>>,
    pub true_support: SupportSet,
    pub coeff_range: (f64, f64),
}

impl SignalEnsemble {
    pub fn nodes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.true_support.ambient_dim()
    }

    /// All-zero ensemble, used for null-signal probes.
    pub fn zeros(nodes: usize, ambient_dim: usize) -> Self {
        SignalEnsemble {
            coefficients: vec![DVector::zeros(ambient_dim); nodes],
            true_support: SupportSet::empty(ambient_dim),
            coeff_range: (0.0, 0.0),
        }
    }
}

/// One `M×N` operator per node with `B Bᵀ = I_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingEnsemble {
    pub operators: Vec<DMatrix<f64>>,
    /// `true` when the sparsifying basis is the canonical one (`B_j = A_j`).
    pub canonical_basis: bool,
}

impl SensingEnsemble {
    pub fn nodes(&self) -> usize {
        self.operators.len()
    }

    pub fn measurements(&self) -> usize {
        self.operators.first().map_or(0, |b| b.nrows())
    }

    pub fn ambient_dim(&self) -> usize {
        self.operators.first().map_or(0, |b| b.ncols())
    }

    /// Re-expresses the operators in an orthonormal sparsifying basis `Ψ`:
    /// `B_j = A_j Ψ`. Row orthonormality is preserved when `Ψ` is orthogonal.
    pub fn with_basis(&self, psi: &DMatrix<f64>) -> Result<SensingEnsemble> {
        let n = self.ambient_dim();
        if psi.nrows() != n || psi.ncols() != n {
            return Err(Error::arg(format!("basis must be {n}x{n}")));
        }
        let gram = psi.transpose() * psi;
        if (gram - DMatrix::<f64>::identity(n, n)).norm() > 1e-8 {
            return Err(Error::arg("sparsifying basis is not orthonormal"));
        }
        Ok(SensingEnsemble {
            operators: self.operators.iter().map(|a| a * psi).collect(),
            canonical_basis: false,
        })
    }

    /// Largest `‖B_j B_jᵀ − I‖_F` over nodes.
    pub fn orthonormality_defect(&self) -> f64 {
        self.operators
            .iter()
            .map(|b| {
                let m = b.nrows();
                (b * b.transpose() - DMatrix::<f64>::identity(m, m)).norm()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub measurements: Vec<DVector<f64>>,
    pub hypothesis: Hypothesis,
    pub noise_variance: f64,
}

impl ObservationSet {
    pub fn nodes(&self) -> usize {
        self.measurements.len()
    }
}

/// `k` distinct indices drawn uniformly from `0..n`, returned sorted.
pub fn draw_support<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<SupportSet> {
    if k < 1 || k >= n {
        return Err(Error::arg(format!("need 1 <= k < N, got k={k}, N={n}")));
    }
    let mut idx = index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(SupportSet::from_trusted(idx, n))
}

/// Coefficients on `support` with magnitudes uniform in `[a, b]` and
/// independent equiprobable signs, for each of `nodes` nodes.
pub fn draw_signals<R: Rng + ?Sized>(
    support: &SupportSet,
    nodes: usize,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<SignalEnsemble> {
    if !(a > 0.0 && b >= a && b.is_finite()) {
        return Err(Error::arg(format!("coefficient range needs 0 < a <= b, got [{a}, {b}]")));
    }
    if nodes < 1 {
        return Err(Error::arg("need at least one node"));
    }
    let n = support.ambient_dim();
    let coefficients = (0..nodes)
        .map(|_| {
            let mut s = DVector::zeros(n);
            for &i in support.indices() {
                let mag = if a == b { a } else { rng.random_range(a..=b) };
                s[i] = if rng.random::<bool>() { mag } else { -mag };
            }
            s
        })
        .collect();
    Ok(SignalEnsemble {
        coefficients,
        true_support: support.clone(),
        coeff_range: (a, b),
    })
}

/// One operator with orthonormal rows spanning a uniformly random
/// `m`-dimensional subspace of `R^n`.
pub fn draw_operator<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if m < 1 || m >= n {
        return Err(Error::arg(format!("need 1 <= M < N, got M={m}, N={n}")));
    }
    let g = DMatrix::<f64>::from_fn(m, n, |_, _| StandardNormal.sample(rng));
    // Cholesky QR of the rows; a second pass once the Gram matrix is poorly
    // conditioned. Householder QR handles the (measure-zero) singular case.
    let once = cholesky_rows(&g).and_then(|a| if 2 * m > n { cholesky_rows(&a) } else { Some(a) });
    Ok(once.unwrap_or_else(|| g.transpose().qr().q().transpose()))
}

fn cholesky_rows(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = g.nrows();
    let l = (g * g.transpose()).cholesky()?.l();
    let inv = l.solve_lower_triangular(&DMatrix::identity(m, m))?;
    Some(inv * g)
}

pub fn draw_sensing<R: Rng + ?Sized>(m: usize, n: usize, nodes: usize, rng: &mut R) -> Result<SensingEnsemble> {
    if nodes < 1 {
        return Err(Error::arg("need at least one node"));
    }
    let operators = (0..nodes).map(|_| draw_operator(m, n, rng)).collect::<Result<Vec<_>>>()?;
    Ok(SensingEnsemble {
        operators,
        canonical_basis: true,
    })
}

fn noise_vector<R: Rng + ?Sized>(len: usize, sd: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| sd * Distribution::<f64>::sample(&StandardNormal, rng))
}

fn check_pair(signals: &SignalEnsemble, sensing: &SensingEnsemble) -> Result<()> {
    if signals.nodes() != sensing.nodes() {
        return Err(Error::arg(format!(
            "{} signal vectors but {} sensing operators",
            signals.nodes(),
            sensing.nodes()
        )));
    }
    for (s, b) in signals.coefficients.iter().zip(&sensing.operators) {
        if s.len() != b.ncols() {
            return Err(Error::arg(format!("signal length {} vs operator width {}", s.len(), b.ncols())));
        }
    }
    Ok(())
}

/// `y_j = B_j s_j + v_j` under H1, `y_j = v_j` under H0, with
/// `v_j ~ N(0, σ² I_M)` independent across nodes.
pub fn observe<R: Rng + ?Sized>(
    signals: &SignalEnsemble,
    sensing: &SensingEnsemble,
    hypothesis: Hypothesis,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::arg(format!("noise variance must be > 0, got {noise_variance}")));
    }
    check_pair(signals, sensing)?;
    let sd = noise_variance.sqrt();
    let measurements = signals
        .coefficients
        .iter()
        .zip(&sensing.operators)
        .map(|(s, b)| {
            let noise = noise_vector(b.nrows(), sd, rng);
            match hypothesis {
                Hypothesis::H1 => b * s + noise,
                Hypothesis::H0 => noise,
            }
        })
        .collect();
    Ok(ObservationSet {
        measurements,
        hypothesis,
        noise_variance,
    })
}

/// Front end with noise before compression (`σ_v²`, length `N`) and after it
/// (`σ_n²`, length `M`). Equivalent in law to [`observe`] with variance
/// `σ_v² + σ_n²` when the rows are orthonormal.
pub fn observe_two_stage<R: Rng + ?Sized>(
    signals: &SignalEnsemble,
    sensing: &SensingEnsemble,
    hypothesis: Hypothesis,
    pre_variance: f64,
    post_variance: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    if !(pre_variance >= 0.0 && post_variance >= 0.0 && pre_variance + post_variance > 0.0) {
        return Err(Error::arg("noise variances must be >= 0 with a positive sum"));
    }
    check_pair(signals, sensing)?;
    let (sv, sn) = (pre_variance.sqrt(), post_variance.sqrt());
    let measurements = signals
        .coefficients
        .iter()
        .zip(&sensing.operators)
        .map(|(s, b)| {
            let v = noise_vector(b.ncols(), sv, rng);
            let x = match hypothesis {
                Hypothesis::H1 => s + v,
                Hypothesis::H0 => v,
            };
            b * x + noise_vector(b.nrows(), sn, rng)
        })
        .collect();
    Ok(ObservationSet {
        measurements,
        hypothesis,
        noise_variance: pre_variance + post_variance,
    })
}

/// Per-node SNRs `γ_j = ‖s_j‖²/σ²` and the average uncompressed SNR
/// `γ̄ = Σγ_j/(L N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSummary {
    pub per_node: Vec<f64>,
    pub average: f64,
}

pub fn snr_summary(signals: &SignalEnsemble, noise_variance: f64) -> Result<SnrSummary> {
    if !(noise_variance > 0.0) {
        return Err(Error::arg("noise variance must be > 0"));
    }
    let per_node: Vec<f64> = signals
        .coefficients
        .iter()
        .map(|s| s.norm_squared() / noise_variance)
        .collect();
    let ln = (signals.nodes() * signals.ambient_dim()) as f64;
    let average = per_node.iter().sum::<f64>() / ln;
    Ok(SnrSummary { per_node, average })
}

/// `E[c²]` for `|c|` uniform on `[a, b]`.
pub fn mean_square_magnitude(a: f64, b: f64) -> f64 {
    if a == b {
        a * a
    } else {
        (b * b * b - a * a * a) / (3.0 * (b - a))
    }
}

/// Noise variance giving average uncompressed SNR `snr_db` for `k`
/// coefficients with magnitudes uniform on `[a, b]`, using the expected
/// signal energy.
pub fn noise_variance_for_snr_db(snr_db: f64, n: usize, k: usize, a: f64, b: f64) -> f64 {
    let gamma_bar = 10f64.powf(snr_db / 10.0);
    k as f64 * mean_square_magnitude(a, b) / (n as f64 * gamma_bar)
}
