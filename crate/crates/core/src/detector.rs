//! Subspace projections, the projected-energy statistic, and the
//! theoretical false-alarm and detection probabilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ObservationSet, SensingEnsemble, SignalEnsemble, SupportSet};
use crate::specfun::{self, TailProb};

/// Directions whose residual norm after orthogonalization falls below this
/// fraction of the largest column norm are treated as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Orthogonal projector onto the span of a set of columns, stored as an
/// orthonormal basis `Q` so that `P y = Q Qᵀ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjector {
    basis: DMatrix<f64>,
    requested: usize,
}

impl SubspaceProjector {
    /// Projector onto the zero subspace of `R^m`.
    pub fn empty(m: usize) -> Self {
        SubspaceProjector {
            basis: DMatrix::zeros(m, 0),
            requested: 0,
        }
    }

    /// Projector onto the span of the columns of `c`.
    ///
    /// Columns are orthonormalized by Gram–Schmidt with one
    /// reorthogonalization pass; columns left with a residual below
    /// [`RANK_TOL`] times the largest column norm are dropped, so a rank
    /// deficient set yields the pseudo-inverse projector.
    pub fn from_matrix(c: &DMatrix<f64>) -> Self {
        let m = c.nrows();
        let scale = c.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
        let mut q: Vec<DVector<f64>> = Vec::with_capacity(c.ncols().min(m));
        for col in c.column_iter() {
            if q.len() == m {
                break;
            }
            let mut v: DVector<f64> = col.into_owned();
            for _ in 0..2 {
                for qi in &q {
                    let d = qi.dot(&v);
                    v.axpy(-d, qi, 1.0);
                }
            }
            let r = v.norm();
            if scale > 0.0 && r > RANK_TOL * scale {
                q.push(v / r);
            }
        }
        let basis = if q.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&q)
        };
        SubspaceProjector {
            basis,
            requested: c.ncols(),
        }
    }

    /// Projector onto the span of the columns of `b` indexed by `cols`.
    pub fn from_columns(b: &DMatrix<f64>, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&i| i >= b.ncols()) {
            return Err(Error::arg(format!("column {bad} out of range for {} columns", b.ncols())));
        }
        if cols.is_empty() {
            return Ok(SubspaceProjector::empty(b.nrows()));
        }
        Ok(SubspaceProjector::from_matrix(&b.select_columns(cols.iter())))
    }

    /// Dimension of the ambient measurement space.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Effective rank actually spanned.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of columns the projector was built from.
    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank() < self.requested
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(y)?;
        if self.rank() == 0 {
            return Ok(DVector::zeros(y.len()));
        }
        let coords = self.basis.tr_mul(y);
        Ok(&self.basis * coords)
    }

    /// `‖P y‖²`.
    pub fn energy(&self, y: &DVector<f64>) -> Result<f64> {
        self.check_len(y)?;
        Ok(self.energy_unchecked(y))
    }

    pub(crate) fn energy_unchecked(&self, y: &DVector<f64>) -> f64 {
        if self.rank() == 0 {
            0.0
        } else {
            self.basis.tr_mul(y).norm_squared()
        }
    }

    /// `(I − P) y`.
    pub fn residual(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y - self.project(y)?)
    }

    fn check_len(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::arg(format!("vector of length {} for projector in R^{}", y.len(), self.dim())));
        }
        Ok(())
    }
}

/// One projector per node from a shared support.
pub fn projectors_for(sensing: &SensingEnsemble, support: &SupportSet) -> Result<Vec<SubspaceProjector>> {
    sensing
        .operators
        .iter()
        .map(|b| SubspaceProjector::from_columns(b, support.indices()))
        .collect()
}

/// `Λ = Σ_j ‖P_j y_j‖²`.
pub fn statistic(projectors: &[SubspaceProjector], observations: &ObservationSet) -> Result<f64> {
    Ok(per_node_statistic(projectors, observations)?.iter().sum())
}

/// The individual terms `‖P_j y_j‖²`.
pub fn per_node_statistic(projectors: &[SubspaceProjector], observations: &ObservationSet) -> Result<Vec<f64>> {
    if projectors.len() != observations.nodes() {
        return Err(Error::arg(format!(
            "{} projectors for {} nodes",
            projectors.len(),
            observations.nodes()
        )));
    }
    projectors
        .iter()
        .zip(&observations.measurements)
        .map(|(p, y)| p.energy(y))
        .collect()
}

/// Statistic of the detector that knows `support` in advance.
pub fn known_support_statistic(
    observations: &ObservationSet,
    sensing: &SensingEnsemble,
    support: &SupportSet,
) -> Result<f64> {
    statistic(&projectors_for(sensing, support)?, observations)
}

/// `Λ_ML = Σ_j ‖B_j (B_jᵀB_j)⁺ B_jᵀ y_j‖²`, the projection onto the full
/// column span of each operator (sparsity ignored).
pub fn ml_statistic(observations: &ObservationSet, sensing: &SensingEnsemble) -> Result<f64> {
    let projectors: Vec<SubspaceProjector> = sensing
        .operators
        .iter()
        .map(SubspaceProjector::from_matrix)
        .collect();
    statistic(&projectors, observations)
}

/// `λ = Σ_j ‖P_j B_j s_j‖² / σ²` for the projector built on `support_subset`.
pub fn noncentrality_exact(
    signals: &SignalEnsemble,
    sensing: &SensingEnsemble,
    support_subset: &SupportSet,
    noise_variance: f64,
) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(Error::arg("noise variance must be > 0"));
    }
    if signals.nodes() != sensing.nodes() {
        return Err(Error::arg("signal and sensing ensembles disagree on node count"));
    }
    let mut total = 0.0;
    for (s, b) in signals.coefficients.iter().zip(&sensing.operators) {
        if s.len() != b.ncols() {
            return Err(Error::arg("signal length does not match operator width"));
        }
        let p = SubspaceProjector::from_columns(b, support_subset.indices())?;
        total += p.energy_unchecked(&(b * s));
    }
    Ok(total / noise_variance)
}

/// Rayleigh quotients `κ_j = ‖P_j B_j s_j‖² / ‖B_j s_j‖²` (0 for a zero signal).
pub fn rayleigh_quotients(
    signals: &SignalEnsemble,
    sensing: &SensingEnsemble,
    support_subset: &SupportSet,
) -> Result<Vec<f64>> {
    signals
        .coefficients
        .iter()
        .zip(&sensing.operators)
        .map(|(s, b)| {
            let bs = b * s;
            let e = bs.norm_squared();
            let p = SubspaceProjector::from_columns(b, support_subset.indices())?;
            Ok(if e > 0.0 { p.energy_unchecked(&bs) / e } else { 0.0 })
        })
        .collect()
}

/// Parameters of the closed-form performance analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    /// Number of known support indices `t` (the `T0` of the detector).
    pub t0: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub noise_variance: f64,
    /// Per-node SNRs `γ_j = ‖s_j‖²/σ²`.
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub tau_d: f64,
}

impl TheoryInputs {
    /// Inputs with every node at the expected energy of `k` coefficients
    /// whose magnitudes are uniform on `[a, b]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_coefficient_range(
        k: usize,
        l: usize,
        m: usize,
        n: usize,
        noise_variance: f64,
        a: f64,
        b: f64,
        alpha: f64,
        tau_d: f64,
    ) -> Self {
        let g = k as f64 * crate::model::mean_square_magnitude(a, b) / noise_variance;
        TheoryInputs {
            t0: k,
            k,
            l,
            m,
            n,
            noise_variance,
            gamma: vec![g; l],
            alpha,
            tau_d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::arg(what.to_string()));
        if self.t0 < 1 || self.t0 > self.k {
            return bad("need 1 <= T0 <= k");
        }
        if self.k >= self.n {
            return bad("need k < N");
        }
        if self.m < 1 || self.m >= self.n {
            return bad("need 1 <= M < N");
        }
        if self.l < 1 || self.gamma.len() != self.l {
            return bad("need one SNR per node");
        }
        if self.gamma.iter().any(|g| !(*g >= 0.0)) {
            return bad("SNRs must be >= 0");
        }
        if !(self.noise_variance > 0.0) {
            return bad("noise variance must be > 0");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.tau_d > 0.0 && self.tau_d < 1.0) {
            return bad("alpha and tau_d must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma.iter().sum()
    }

    pub fn with_t0(&self, t0: usize) -> Self {
        TheoryInputs { t0, ..self.clone() }
    }
}

/// Equal-magnitude approximation
/// `λ_t ≈ (M t/(N k)) (1 + (k − t)/M) Σ_j γ_j` at real-valued `t`.
pub fn noncentrality_approx_at(inputs: &TheoryInputs, t: f64) -> f64 {
    let (m, n, k) = (inputs.m as f64, inputs.n as f64, inputs.k as f64);
    m * t / (n * k) * (1.0 + (k - t) / m) * inputs.gamma_sum()
}

/// [`noncentrality_approx_at`] at `t = inputs.t0`.
pub fn noncentrality_approx(inputs: &TheoryInputs) -> f64 {
    noncentrality_approx_at(inputs, inputs.t0 as f64)
}

fn check_variance(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("noise variance must be > 0, got {sigma2}")))
    }
}

fn dof(t0: usize, l: usize) -> Result<f64> {
    if t0 == 0 || l == 0 {
        return Err(Error::arg("need T0 >= 1 and L >= 1"));
    }
    Ok((t0 * l) as f64)
}

/// `P_f = 1 − F(T0 L/2, τ0/(2σ²))`.
pub fn pf_theoretical(tau0: f64, t0: usize, l: usize, sigma2: f64) -> Result<TailProb> {
    check_variance(sigma2)?;
    if !(tau0 >= 0.0) {
        return Err(Error::arg("threshold must be >= 0"));
    }
    specfun::reg_upper_gamma(0.5 * dof(t0, l)?, tau0 / (2.0 * sigma2))
}

/// `P_d = Q_{T0 L/2}(√λ, √(τ0/σ²))`.
pub fn pd_theoretical(tau0: f64, lambda: f64, t0: usize, l: usize, sigma2: f64) -> Result<TailProb> {
    check_variance(sigma2)?;
    if !(tau0 >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::arg("threshold and noncentrality must be >= 0"));
    }
    specfun::marcum_q(0.5 * dof(t0, l)?, lambda.sqrt(), (tau0 / sigma2).sqrt())
}

/// Threshold with exact false-alarm probability `α` for the known-support
/// detector: inverts the chi-squared survival function by bisection.
pub fn threshold_exact(alpha: f64, t0: usize, l: usize, sigma2: f64) -> Result<f64> {
    check_variance(sigma2)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let df = dof(t0, l)?;
    let sf = |x: f64| specfun::chi2_sf(df, x).map(|p| p.value());
    let mut lo = 0.0;
    let mut hi = df.max(1.0);
    while sf(hi)? > alpha {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sf(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(sigma2 * 0.5 * (lo + hi))
}

/// Cube-root normal threshold
/// `τ0 ≈ σ² t L ((1 − 2/(9tL)) + √(2/(9tL)) Q⁻¹(α))³`.
pub fn threshold_sankaran(alpha: f64, t: usize, l: usize, sigma2: f64) -> Result<f64> {
    threshold_sankaran_at(alpha, t as f64, l, sigma2)
}

/// [`threshold_sankaran`] with a real-valued support size.
pub fn threshold_sankaran_at(alpha: f64, t: f64, l: usize, sigma2: f64) -> Result<f64> {
    check_variance(sigma2)?;
    let tl = t * l as f64;
    if !(tl >= 1.0) {
        return Err(Error::arg("need t·L >= 1"));
    }
    let v = 2.0 / (9.0 * tl);
    let z = specfun::gaussian_q_inv(alpha)?;
    let c = (1.0 - v) + v.sqrt() * z;
    Ok(sigma2 * tl * c * c * c)
}
