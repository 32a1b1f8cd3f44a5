//! Plug-in estimators for the asymptotic law of the barycenter, limit-law
//! sampling, and finite-sample envelopes.
//!
//! All operators are materialized as `m × m` real symmetric matrices in an
//! orthonormal basis of the tangent subspace `M`:
//!
//! - `Σ̂ = Σ_i w_i (T_i − I) ⊗ (T_i − I)`,
//! - `F̂ = −Σ_i w_i dT_Q^{S_i}`,
//! - `Ξ̂ = F̂^{-1} Σ̂ F̂^{-1}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::barycenter::{frechet_variance, solve_barycenter, SampleSet, SolverConfig};
use crate::error::{BwError, Result};
use crate::geometry::{bw_distance, bw_distance_sq, DtOperator};
use crate::hermitian::{
    check_dims, eig_trusted, frobenius, hermitian_part, pd_spectrum, BasisKind, PsdMatrix,
    SpectralDecomposition, SubspaceBasis,
};
use crate::scalar::Scalar;

/// Relative cut-off for inverting `Ξ̂` and `F̂`.
pub const XI_RANK_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-10;

/// Self-adjoint operator on `M` in the coordinates of `basis`.
#[derive(Debug, Clone)]
pub struct OperatorOnM<T: Scalar> {
    basis: SubspaceBasis<T>,
    matrix: DMatrix<f64>,
}

impl<T: Scalar> OperatorOnM<T> {
    /// Checks symmetry to `1e-10` (relative to the largest entry) and
    /// stores the exact symmetric part.
    pub fn new(basis: SubspaceBasis<T>, matrix: DMatrix<f64>) -> Result<Self> {
        check_dims(basis.len(), matrix.nrows())?;
        check_dims(basis.len(), matrix.ncols())?;
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(BwError::NonFinite);
        }
        let scale = matrix.amax().max(1.0);
        let asymmetry = (&matrix - matrix.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(BwError::NotHermitian {
                asymmetry,
                tolerance: SYMMETRY_TOL * scale,
            });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &SubspaceBasis<T> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigen-decomposition, eigenvalues descending.
    pub fn spectrum(&self) -> SpectralDecomposition<f64> {
        eig_trusted(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().eigenvalues.iter().copied().collect()
    }

    pub fn lambda_min(&self) -> f64 {
        self.spectrum().lambda_min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.spectrum().lambda_max()
    }

    /// Spectral norm.
    pub fn op_norm(&self) -> f64 {
        let s = self.spectrum();
        s.lambda_max().abs().max(s.lambda_min().abs())
    }

    /// `Σ |λ_k|`.
    pub fn nuclear_norm(&self) -> f64 {
        self.spectrum().eigenvalues.iter().map(|l| l.abs()).sum()
    }

    /// Applies the operator to a matrix in `M`.
    pub fn apply(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        let v = self.basis.vectorize(x)?;
        self.basis.devectorize(&(&self.matrix * v))
    }

    /// `A^{1/2}` for a PSD operator; eigenvalues down to `−1e-10·λ_max` are clamped.
    pub fn sqrt_psd(&self) -> Result<DMatrix<f64>> {
        let s = self.spectrum();
        let floor = -SYMMETRY_TOL * s.lambda_max().abs().max(1.0);
        if s.dim() > 0 && s.lambda_min() < floor {
            return Err(BwError::NotPsd {
                min_eigenvalue: s.lambda_min(),
                tolerance: -floor,
            });
        }
        Ok(s.map(|l| l.max(0.0).sqrt()))
    }

    /// `A^{-1/2}`; any eigenvalue at or below `rank_tol·λ_max` is an error.
    pub fn inverse_sqrt(&self, rank_tol: f64) -> Result<DMatrix<f64>> {
        let s = self.invertible_spectrum(rank_tol)?;
        Ok(s.map(|l| 1.0 / l.sqrt()))
    }

    pub fn inverse(&self, rank_tol: f64) -> Result<DMatrix<f64>> {
        let s = self.invertible_spectrum(rank_tol)?;
        Ok(s.map(|l| 1.0 / l))
    }

    fn invertible_spectrum(&self, rank_tol: f64) -> Result<SpectralDecomposition<f64>> {
        let s = self.spectrum();
        let threshold = rank_tol * s.lambda_max();
        if s.dim() == 0 || !(s.lambda_max() > 0.0) || s.lambda_min() <= threshold {
            return Err(BwError::DegenerateCovariance(format!(
                "operator is singular on M (λ_min {:.3e}, λ_max {:.3e}, rank_tol {rank_tol:.1e})",
                s.lambda_min(),
                s.lambda_max()
            )));
        }
        Ok(s)
    }
}

/// Per-sample transport data at a fixed base point.
struct PlugIn {
    /// Coordinates of `T_i − I`.
    deviations: Vec<DVector<f64>>,
    /// `‖T_i − I‖_F²`.
    deviation_sq: Vec<f64>,
}

fn plug_in<T: Scalar>(samples: &SampleSet<T>, q: &PsdMatrix<T>, basis: &SubspaceBasis<T>) -> Result<PlugIn> {
    check_dims(samples.dim(), q.dim())?;
    check_dims(basis.ambient_dim(), q.dim())?;
    pd_spectrum(q.as_matrix())?;
    let d = q.dim();
    let parts = samples.map_ordered(|s| -> Result<(DVector<f64>, f64)> {
        let op = DtOperator::new(q, s)?;
        let dev = op.transport() - DMatrix::<T>::identity(d, d);
        Ok((basis.coords(&dev), frobenius(&dev).powi(2)))
    });
    let mut deviations = Vec::with_capacity(parts.len());
    let mut deviation_sq = Vec::with_capacity(parts.len());
    for (k, p) in parts.into_iter().enumerate() {
        let (c, n2) = p.map_err(|e| e.in_matrix(k))?;
        deviations.push(c);
        deviation_sq.push(n2);
    }
    Ok(PlugIn {
        deviations,
        deviation_sq,
    })
}

fn sigma_from(plug: &PlugIn, weights: &[f64], m: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::<f64>::zeros(m, m);
    for (c, &w) in plug.deviations.iter().zip(weights) {
        acc.ger(w, c, c, 1.0);
    }
    acc
}

/// `Σ̂ = Σ_i w_i (T_i − I) ⊗ (T_i − I)` on `M`, transport maps taken at `Q`.
pub fn estimate_sigma_hat<T: Scalar>(samples: &SampleSet<T>, q: &PsdMatrix<T>, basis: &SubspaceBasis<T>) -> Result<OperatorOnM<T>> {
    let plug = plug_in(samples, q, basis)?;
    OperatorOnM::new(basis.clone(), sigma_from(&plug, samples.weights(), basis.len()))
}

/// Orthonormal basis of `Q^{-1/2} M Q^{-1/2}`, the domain of the rescaled operator.
pub fn rescaled_basis<T: Scalar>(q: &PsdMatrix<T>, basis: &SubspaceBasis<T>) -> Result<SubspaceBasis<T>> {
    if basis.is_full() {
        return Ok(basis.clone());
    }
    let inv_root = pd_spectrum(q.as_matrix())?.map(|l| 1.0 / l.sqrt());
    basis.congruence(&inv_root)
}

/// `F̂ = −Σ_i w_i dT_Q^{S_i}` on `M`, or with `rescaled` the operator
/// `ζ ↦ −Σ_i w_i Q^{1/2} dT(Q^{1/2} ζ Q^{1/2}) Q^{1/2}` on `Q^{-1/2} M Q^{-1/2}`.
pub fn estimate_f_hat<T: Scalar>(
    samples: &SampleSet<T>,
    q: &PsdMatrix<T>,
    basis: &SubspaceBasis<T>,
    rescaled: bool,
) -> Result<OperatorOnM<T>> {
    check_dims(samples.dim(), q.dim())?;
    check_dims(basis.ambient_dim(), q.dim())?;
    pd_spectrum(q.as_matrix())?;
    let domain = if rescaled {
        rescaled_basis(q, basis)?
    } else {
        basis.clone()
    };
    let parts = samples.map_ordered(|s| DtOperator::new(q, s)?.materialize(&domain, rescaled));
    let m = domain.len();
    let mut acc = DMatrix::<f64>::zeros(m, m);
    for (k, (p, w)) in parts.into_iter().zip(samples.weights()).enumerate() {
        acc -= p.map_err(|e| e.in_matrix(k))? * *w;
    }
    OperatorOnM::new(domain, acc)
}

/// `Ξ̂ = F̂^{-1} Σ̂ F̂^{-1}`.
pub fn estimate_xi_hat<T: Scalar>(sigma_hat: &OperatorOnM<T>, f_hat: &OperatorOnM<T>, rank_tol: f64) -> Result<OperatorOnM<T>> {
    check_dims(sigma_hat.dim(), f_hat.dim())?;
    let f_inv = f_hat.inverse(rank_tol)?;
    let xi = &f_inv * sigma_hat.matrix() * &f_inv;
    let xi = (&xi + xi.transpose()) * 0.5;
    OperatorOnM::new(sigma_hat.basis().clone(), xi)
}

/// `√n Ξ̂^{-1/2} vec(Q_n − Q_ref)`.
pub fn studentized_statistic<T: Scalar>(
    q_n: &PsdMatrix<T>,
    q_ref: &PsdMatrix<T>,
    xi_hat: &OperatorOnM<T>,
    basis: &SubspaceBasis<T>,
    n: usize,
) -> Result<DVector<f64>> {
    check_dims(q_n.dim(), q_ref.dim())?;
    check_dims(basis.len(), xi_hat.dim())?;
    let diff = q_n.as_matrix() - q_ref.as_matrix();
    let coords = basis.vectorize(&diff)?;
    let off = frobenius(&(&diff - basis.devectorize(&coords)?));
    if off > 1e-8 {
        log::warn!("Q_n − Q_ref leaves M by {off:.3e}; projecting");
    }
    let root = xi_hat.inverse_sqrt(XI_RANK_TOL)?;
    Ok(root * coords * (n as f64).sqrt())
}

/// Draws from the limit law of `√n d_BW(Q_n, Q_*)`:
/// `‖Q_*^{1/2} dT_{Q_*}^{Q_*}(Z)‖_F` with `Z = Σ_k (Ξ^{1/2} g)_k B_k`, `g ~ N(0, I_m)`.
pub fn sample_limit_dbw<T: Scalar, R: Rng + ?Sized>(
    q_star: &PsdMatrix<T>,
    xi: &OperatorOnM<T>,
    basis: &SubspaceBasis<T>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dims(basis.len(), xi.dim())?;
    check_dims(basis.ambient_dim(), q_star.dim())?;
    let root_xi = xi.sqrt_psd()?;
    let op = DtOperator::new(q_star, q_star)?;
    let root_q = pd_spectrum(q_star.as_matrix())?.map(f64::sqrt);
    let m = basis.len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let g = DVector::<f64>::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let z = basis.devectorize(&(&root_xi * g))?;
        out.push(frobenius(&(&root_q * op.apply_raw(&z))));
    }
    Ok(out)
}

/// Normalization of an empirical variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceForm {
    /// Divide by `n` (weighted second moment about the weighted mean).
    #[default]
    Population,
    /// Multiply the population form by `n/(n−1)`.
    Unbiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCltStats {
    /// `V_n(Q_n)`.
    pub v_n: f64,
    /// `√n (V_n − V_ref)`.
    pub stat: f64,
    /// Empirical variance of `d²_BW(Q_ref, S_i)`.
    pub var_hat: f64,
}

/// Statistics for the Fréchet-variance CLT, solving for `Q_n` first.
pub fn variance_clt_stats<T: Scalar>(
    samples: &SampleSet<T>,
    q_ref: &PsdMatrix<T>,
    v_ref: f64,
    constraint: Option<&SubspaceBasis<T>>,
    solver: &SolverConfig,
    form: VarianceForm,
) -> Result<VarianceCltStats> {
    let fit = solve_barycenter(samples, constraint, solver)?;
    variance_clt_at(samples, &fit.barycenter, q_ref, v_ref, form)
}

/// Same as [`variance_clt_stats`] with a known barycenter `Q_n`.
pub fn variance_clt_at<T: Scalar>(
    samples: &SampleSet<T>,
    q_n: &PsdMatrix<T>,
    q_ref: &PsdMatrix<T>,
    v_ref: f64,
    form: VarianceForm,
) -> Result<VarianceCltStats> {
    let v_n = frechet_variance(q_n, samples)?;
    let n = samples.len();
    let stat = (n as f64).sqrt() * (v_n - v_ref);
    let d2 = samples.map_ordered(|s| bw_distance_sq(q_ref, s));
    let mut values = Vec::with_capacity(n);
    for v in d2 {
        values.push(v?);
    }
    let var_hat = weighted_variance(&values, samples.weights(), form);
    Ok(VarianceCltStats { v_n, stat, var_hat })
}

pub(crate) fn weighted_variance(values: &[f64], weights: &[f64], form: VarianceForm) -> f64 {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let pop: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean).powi(2))
        .sum();
    let n = values.len();
    match form {
        VarianceForm::Population => pop,
        VarianceForm::Unbiased if n > 1 => pop * n as f64 / (n - 1) as f64,
        VarianceForm::Unbiased => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaDiagnostic {
    pub eta: f64,
    /// `η/(1 − ¾η)` when `η < 4/3`.
    pub bound: Option<f64>,
}

/// `η/(1 − ¾η)` if `η < 4/3`.
pub fn eta_bound(eta: f64) -> Option<f64> {
    (eta < 4.0 / 3.0).then(|| eta / (1.0 - 0.75 * eta))
}

/// `η_n = ‖Q_*^{1/2} Π_M(T̄_n − I) Q_*^{1/2}‖_F / λ_min(F′_n)` with `T̄_n` and
/// `F′_n` evaluated at `Q_*`.
pub fn eta_n_diagnostic<T: Scalar>(samples: &SampleSet<T>, q_star: &PsdMatrix<T>, basis: &SubspaceBasis<T>) -> Result<EtaDiagnostic> {
    let plug = plug_in(samples, q_star, basis)?;
    let m = basis.len();
    let mut mean = DVector::<f64>::zeros(m);
    for (c, w) in plug.deviations.iter().zip(samples.weights()) {
        mean.axpy(*w, c, 1.0);
    }
    let projected = basis.devectorize(&mean)?;
    let root_q = pd_spectrum(q_star.as_matrix())?.map(f64::sqrt);
    let numerator = frobenius(&hermitian_part(&(&root_q * projected * &root_q)));
    let f_prime = estimate_f_hat(samples, q_star, basis, true)?;
    let lmin = f_prime.lambda_min();
    if !(lmin > 0.0) {
        return Err(BwError::DegenerateCovariance(format!(
            "F'_n is not positive definite (λ_min {lmin:.3e})"
        )));
    }
    let eta = numerator / lmin;
    Ok(EtaDiagnostic {
        eta,
        bound: eta_bound(eta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPerturbation {
    /// Nuclear norm of `Σ̂_n − Σ_n`.
    pub lhs: f64,
    /// `β_n [2 (mean ‖T_i − I‖_F²)^{1/2} + β_n]`.
    pub rhs: f64,
    pub beta: f64,
}

/// Compares `Σ̂_n` (maps at `Q_n`) with `Σ_n` (maps at `Q_*`) on the full space.
/// Requires `‖Q_*^{-1/2} Q_n Q_*^{-1/2} − I‖ ≤ 1/2`.
pub fn sigma_perturbation_bound<T: Scalar>(samples: &SampleSet<T>, q_star: &PsdMatrix<T>, q_n: &PsdMatrix<T>) -> Result<SigmaPerturbation> {
    check_dims(samples.dim(), q_star.dim())?;
    check_dims(q_star.dim(), q_n.dim())?;
    let d = q_star.dim();
    let star_spec = pd_spectrum(q_star.as_matrix())?;
    pd_spectrum(q_n.as_matrix())?;
    let inv_root = star_spec.map(|l| 1.0 / l.sqrt());
    let rel = hermitian_part(&(&inv_root * q_n.as_matrix() * &inv_root)) - DMatrix::<T>::identity(d, d);
    let rel_spec = eig_trusted(&rel);
    let rel_op = rel_spec.lambda_max().abs().max(rel_spec.lambda_min().abs());
    if rel_op > 0.5 {
        return Err(BwError::Validation(format!(
            "‖Q'_n − I‖ = {rel_op:.3e} exceeds 1/2"
        )));
    }
    let basis = SubspaceBasis::standard(d, BasisKind::Full)?;
    let at_star = plug_in(samples, q_star, &basis)?;
    let at_n = plug_in(samples, q_n, &basis)?;
    let m = basis.len();
    let diff = sigma_from(&at_n, samples.weights(), m) - sigma_from(&at_star, samples.weights(), m);
    let lhs = eig_trusted(&((&diff + diff.transpose()) * 0.5))
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .sum();

    let q_norm = star_spec.lambda_max();
    let kappa = q_norm / star_spec.lambda_min();
    let mean_s_norm: f64 = samples
        .iter()
        .map(|(s, w)| w * s.spectrum().lambda_max().max(0.0))
        .sum();
    let beta = kappa * (mean_s_norm / q_norm).sqrt() * frobenius(&rel);
    let mean_dev_sq: f64 = at_star
        .deviation_sq
        .iter()
        .zip(samples.weights())
        .map(|(v, w)| v * w)
        .sum();
    let rhs = beta * (2.0 * mean_dev_sq.sqrt() + beta);
    Ok(SigmaPerturbation { lhs, rhs, beta })
}

/// Plug-in summary of one sample of size `n`.
#[derive(Debug, Clone)]
pub struct CltReport<T: Scalar> {
    pub n: usize,
    pub q_hat: PsdMatrix<T>,
    pub sigma_hat: OperatorOnM<T>,
    pub f_hat: OperatorOnM<T>,
    pub xi_hat: OperatorOnM<T>,
    /// `None` when `Ξ̂` is singular.
    pub studentized: Option<DVector<f64>>,
    /// `√n d_BW(Q_n, Q_ref)`.
    pub dbw_stat: f64,
    /// `√n (V_n − V_ref)`.
    pub variance_stat: f64,
}

/// Builds a [`CltReport`] around an already solved barycenter `q_hat`.
pub fn clt_report<T: Scalar>(
    samples: &SampleSet<T>,
    q_hat: &PsdMatrix<T>,
    q_ref: &PsdMatrix<T>,
    v_ref: f64,
    basis: &SubspaceBasis<T>,
) -> Result<CltReport<T>> {
    let n = samples.len();
    let sigma_hat = estimate_sigma_hat(samples, q_hat, basis)?;
    let f_hat = estimate_f_hat(samples, q_hat, basis, false)?;
    let xi_hat = estimate_xi_hat(&sigma_hat, &f_hat, XI_RANK_TOL)?;
    let studentized = match studentized_statistic(q_hat, q_ref, &xi_hat, basis, n) {
        Ok(v) => Some(v),
        Err(BwError::DegenerateCovariance(_)) => None,
        Err(e) => return Err(e),
    };
    let root_n = (n as f64).sqrt();
    let dbw_stat = root_n * bw_distance(q_hat, q_ref)?;
    let variance_stat = root_n * (frechet_variance(q_hat, samples)? - v_ref);
    Ok(CltReport {
        n,
        q_hat: q_hat.clone(),
        sigma_hat,
        f_hat,
        xi_hat,
        studentized,
        dbw_stat,
        variance_stat,
    })
}

/// `c_Q (d + t) / √n`.
pub fn concentration_envelope_q(c_q: f64, d: usize, n: usize, t: f64) -> f64 {
    c_q * (d as f64 + t) / (n as f64).sqrt()
}

/// `c_Q ‖Q_*‖^{1/2} (d + t) / √n`, the envelope for `d_BW(Q_n, Q_*)`.
pub fn concentration_envelope_dbw(c_q: f64, norm_q_star: f64, d: usize, n: usize, t: f64) -> f64 {
    concentration_envelope_q(c_q, d, n, t) * norm_q_star.sqrt()
}

/// `max(b t²/n, ν t/√n) + 3 c_Q² ‖F′‖ (d + t)² / n`.
pub fn concentration_envelope_v(b: f64, nu: f64, c_q: f64, norm_f_prime: f64, d: usize, n: usize, t: f64) -> f64 {
    let nf = n as f64;
    let dt = d as f64 + t;
    (b * t * t / nf).max(nu * t / nf.sqrt()) + 3.0 * c_q * c_q * norm_f_prime * dt * dt / nf
}

/// `c_Q = 4 ‖Q_*‖ σ_T / λ_min(F′)`.
pub fn compose_c_q(norm_q_star: f64, sigma_t: f64, lambda_min_f_prime: f64) -> f64 {
    4.0 * norm_q_star * sigma_t / lambda_min_f_prime
}

/// Sub-exponential tail: `exp(−t²/(2ν²))` for `t ≤ ν²/b`, else `exp(−t/(2b))`.
pub fn subexp_tail(nu: f64, b: f64, t: f64) -> f64 {
    if t <= nu * nu / b {
        (-t * t / (2.0 * nu * nu)).exp()
    } else {
        (-t / (2.0 * b)).exp()
    }
}
