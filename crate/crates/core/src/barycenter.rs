//! Fréchet barycenters in the Bures-Wasserstein geometry, unconstrained or
//! restricted to an affine set `Q₀ + M`.
//!
//! Convergence is certified by the first-order condition
//! `Π_M (Σ_i w_i T_Q^{S_i} − I) = 0`; the returned residual is the norm of
//! that projection at the returned iterate.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BwError, Result};
use crate::geometry::bw_distance_sq;
use crate::hermitian::{
    check_dims, eig_trusted, eps_pd, frobenius, hermitian_part, psd_spectrum, PsdMatrix,
    SpectralDecomposition, SubspaceBasis,
};
use crate::scalar::Scalar;

/// Sample sizes at or above this evaluate per-sample work on the rayon pool.
const PARALLEL_MIN_SAMPLES: usize = 64;

/// Weighted empirical measure `Σ_i w_i δ_{S_i}`.
#[derive(Debug, Clone)]
pub struct SampleSet<T: Scalar> {
    matrices: Vec<PsdMatrix<T>>,
    weights: Vec<f64>,
}

impl<T: Scalar> SampleSet<T> {
    /// Uniform weights `1/n`.
    pub fn new(matrices: Vec<PsdMatrix<T>>) -> Result<Self> {
        let n = matrices.len();
        Self::with_weights(matrices, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn with_weights(matrices: Vec<PsdMatrix<T>>, weights: Vec<f64>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(BwError::Validation("sample set is empty".into()));
        }
        check_dims(matrices.len(), weights.len())?;
        let d = matrices[0].dim();
        for (k, m) in matrices.iter().enumerate() {
            check_dims(d, m.dim()).map_err(|e| e.in_matrix(k))?;
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(BwError::Validation(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(BwError::Validation(format!(
                "weights must sum to 1 (sum = {total:.17})"
            )));
        }
        Ok(Self { matrices, weights })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn matrices(&self) -> &[PsdMatrix<T>] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PsdMatrix<T>, f64)> {
        self.matrices.iter().zip(self.weights.iter().copied())
    }

    /// `Σ_i w_i S_i`.
    pub fn euclidean_mean(&self) -> PsdMatrix<T> {
        let d = self.dim();
        let mut acc = DMatrix::<T>::zeros(d, d);
        let uniform = self.weights.iter().all(|w| *w == self.weights[0]);
        if uniform {
            // Sum first so that identical samples average exactly.
            for s in &self.matrices {
                acc += s.as_matrix();
            }
            acc /= T::from_real(self.len() as f64);
        } else {
            for (s, w) in self.iter() {
                acc += s.as_matrix() * T::from_real(w);
            }
        }
        PsdMatrix::from_hermitian(acc)
    }

    /// Weighted map over samples with a fixed-order result vector; runs on
    /// the rayon pool for large samples. Output order never depends on
    /// scheduling.
    pub(crate) fn map_ordered<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&PsdMatrix<T>) -> R + Sync + Send,
    {
        if self.len() >= PARALLEL_MIN_SAMPLES {
            self.matrices.par_iter().map(&f).collect()
        } else {
            self.matrices.iter().map(f).collect()
        }
    }
}

/// Update rule of the barycenter solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `Q ← Q^{-1/2} (Σ_i w_i (Q^{1/2} S_i Q^{1/2})^{1/2})² Q^{-1/2}`; unconstrained only.
    FixedPoint,
    /// `Q ← Q − γ Π_M (I − Σ_i w_i T_Q^{S_i})`, staying in `Q₀ + M`.
    ProjectedDescent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol_residual: f64,
    /// `None` picks fixed-point without a constraint, projected descent with one.
    pub step_rule: Option<StepRule>,
    /// Fixed descent step; `None` uses `1/L̂` from the local smoothness bound.
    pub descent_step: Option<f64>,
    /// Iterates must satisfy `λ_min > pd_floor · λ_max`.
    pub pd_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol_residual: 1e-10,
            step_rule: None,
            descent_step: None,
            pd_floor: 1e-12,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(BwError::Validation("tol_residual must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(BwError::Validation("max_iter must be >= 1".into()));
        }
        if let Some(g) = self.descent_step {
            if !(g > 0.0) || !g.is_finite() {
                return Err(BwError::Validation("descent_step must be > 0".into()));
            }
        }
        if !(self.pd_floor >= 0.0) {
            return Err(BwError::Validation("pd_floor must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult<T: Scalar> {
    pub barycenter: PsdMatrix<T>,
    pub iterations: usize,
    /// `‖Π_M(T̄ − I)‖_F` at the returned barycenter.
    pub residual: f64,
    /// Fréchet variance `V_n(Q_n)`.
    pub variance: f64,
    pub trace_history: Vec<f64>,
}

/// `Σ_i w_i d²_BW(Q, S_i)`.
pub fn frechet_variance<T: Scalar>(q: &PsdMatrix<T>, samples: &SampleSet<T>) -> Result<f64> {
    check_dims(samples.dim(), q.dim())?;
    let terms = samples.map_ordered(|s| bw_distance_sq(q, s));
    let mut total = 0.0;
    for (t, w) in terms.into_iter().zip(samples.weights()) {
        total += w * t?;
    }
    Ok(total)
}

/// One pass over the samples at a fixed `Q ≻ 0` using
/// `T_Q^S = Q^{-1/2} (Q^{1/2} S Q^{1/2})^{1/2} Q^{-1/2}`.
struct Sweep<T: Scalar> {
    /// `Σ_i w_i (Q^{1/2} S_i Q^{1/2})^{1/2}`.
    mean_root: DMatrix<T>,
    /// `Σ_i w_i T_Q^{S_i}`.
    mean_transport: DMatrix<T>,
    variance: f64,
    /// `Σ_i w_i λ_max^{1/2}(Q^{1/2} S_i Q^{1/2})`.
    weighted_root_lmax: f64,
}

fn sweep<T: Scalar>(q: &PsdMatrix<T>, spec: &SpectralDecomposition<T>, samples: &SampleSet<T>) -> Result<Sweep<T>> {
    let root_q = spec.map(f64::sqrt);
    let inv_root_q = spec.map(|l| 1.0 / l.sqrt());
    let parts = samples.map_ordered(|s| -> Result<(DMatrix<T>, f64, f64)> {
        let middle = hermitian_part(&(&root_q * s.as_matrix() * &root_q));
        let m = psd_spectrum(&middle)?;
        let fidelity: f64 = m.eigenvalues.iter().map(|l| l.sqrt()).sum();
        Ok((m.map(f64::sqrt), fidelity, m.lambda_max().sqrt()))
    });
    let d = q.dim();
    let mut mean_root = DMatrix::<T>::zeros(d, d);
    let mut variance = q.trace();
    let mut weighted_root_lmax = 0.0;
    for (k, (part, (s, w))) in parts.into_iter().zip(samples.iter()).enumerate() {
        let (root, fidelity, root_lmax) = part.map_err(|e| e.in_matrix(k))?;
        mean_root += root * T::from_real(w);
        variance += w * (s.trace() - 2.0 * fidelity);
        weighted_root_lmax += w * root_lmax;
    }
    let mean_transport = hermitian_part(&(&inv_root_q * &mean_root * &inv_root_q));
    Ok(Sweep {
        mean_root,
        mean_transport,
        variance: variance.max(0.0),
        weighted_root_lmax,
    })
}

fn positive_spectrum<T: Scalar>(q: &PsdMatrix<T>, floor: f64) -> Option<SpectralDecomposition<T>> {
    let spec = eig_trusted(q.as_matrix());
    let lmax = spec.lambda_max();
    let threshold = (floor * lmax).max(eps_pd(lmax));
    (lmax > 0.0 && spec.lambda_min() > threshold).then_some(spec)
}

fn require_positive_member<T: Scalar>(samples: &SampleSet<T>) -> Result<()> {
    let any = samples
        .iter()
        .any(|(s, w)| w > 0.0 && positive_spectrum(s, 0.0).is_some());
    if any {
        Ok(())
    } else {
        Err(BwError::DegenerateInput(
            "no strictly positive definite sample with positive weight".into(),
        ))
    }
}

/// `‖Π_M(Σ_i w_i T_Q^{S_i} − I)‖_F` at `Q ≻ 0`.
pub fn residual<T: Scalar>(q: &PsdMatrix<T>, samples: &SampleSet<T>, basis: &SubspaceBasis<T>) -> Result<f64> {
    check_dims(samples.dim(), q.dim())?;
    check_dims(basis.ambient_dim(), q.dim())?;
    let spec = crate::hermitian::pd_spectrum(q.as_matrix())?;
    let sw = sweep(q, &spec, samples)?;
    let d = q.dim();
    let excess = sw.mean_transport - DMatrix::<T>::identity(d, d);
    Ok(frobenius(&basis.project(&excess)?))
}

/// Barycenter of a weighted sample, optionally constrained to
/// `anchor + span(basis)`.
pub fn solve_barycenter<T: Scalar>(
    samples: &SampleSet<T>,
    constraint: Option<&SubspaceBasis<T>>,
    config: &SolverConfig,
) -> Result<BarycenterResult<T>> {
    config.validate()?;
    require_positive_member(samples)?;
    match (constraint, config.step_rule) {
        (None, None | Some(StepRule::FixedPoint)) => fixed_point(samples, config),
        (None, Some(StepRule::ProjectedDescent)) => {
            let basis = SubspaceBasis::standard(samples.dim(), crate::hermitian::BasisKind::Full)?
                .with_anchor(samples.euclidean_mean())?;
            projected_descent(samples, &basis, config)
        }
        (Some(_), Some(StepRule::FixedPoint)) => Err(BwError::Validation(
            "the fixed-point rule does not support affine constraints".into(),
        )),
        (Some(basis), _) => {
            check_dims(samples.dim(), basis.ambient_dim())?;
            projected_descent(samples, basis, config)
        }
    }
}

fn fixed_point<T: Scalar>(samples: &SampleSet<T>, config: &SolverConfig) -> Result<BarycenterResult<T>> {
    let d = samples.dim();
    let identity = DMatrix::<T>::identity(d, d);
    let mut q = if samples.len() == 1 {
        // The barycenter of a single point is the point itself.
        samples.matrices()[0].clone()
    } else {
        samples.euclidean_mean()
    };
    let mut history = Vec::new();
    let mut last_variance = f64::INFINITY;
    for iter in 0..=config.max_iter {
        let spec = positive_spectrum(&q, config.pd_floor).ok_or_else(|| BwError::PositivityLost {
            halvings: 0,
            min_eigenvalue: q.spectrum().lambda_min(),
        })?;
        let sw = sweep(&q, &spec, samples)?;
        let res = frobenius(&(&sw.mean_transport - &identity));
        history.push(res);
        if sw.variance > last_variance + 1e-10 {
            log::warn!(
                "fixed-point variance increased at iteration {iter}: {last_variance:.12e} -> {:.12e}",
                sw.variance
            );
        }
        last_variance = sw.variance;
        if res <= config.tol_residual || samples.len() == 1 {
            return Ok(BarycenterResult {
                barycenter: q,
                iterations: iter,
                residual: res,
                variance: sw.variance,
                trace_history: history,
            });
        }
        if iter == config.max_iter {
            return Err(BwError::NoConvergence {
                iterations: iter,
                residual: res,
            });
        }
        let inv_root = spec.map(|l| 1.0 / l.sqrt());
        let squared = &sw.mean_root * &sw.mean_root;
        q = PsdMatrix::from_hermitian(hermitian_part(&(&inv_root * squared * &inv_root)));
    }
    unreachable!("loop returns on its last iteration")
}

/// Positive definite starting point in `anchor + M`.
fn feasible_start<T: Scalar>(samples: &SampleSet<T>, basis: &SubspaceBasis<T>, anchor: &PsdMatrix<T>, floor: f64) -> Result<PsdMatrix<T>> {
    if positive_spectrum(anchor, floor).is_some() {
        return Ok(anchor.clone());
    }
    let d = anchor.dim();
    let targets = [DMatrix::<T>::identity(d, d), samples.euclidean_mean().into_matrix()];
    for target in &targets {
        let ridge = basis.project(&(target - anchor.as_matrix()))?;
        let mut eps = 1e-3;
        while eps <= 1.0 {
            let cand = PsdMatrix::from_hermitian(anchor.as_matrix() + &ridge * T::from_real(eps));
            if positive_spectrum(&cand, floor).is_some() {
                return Ok(cand);
            }
            eps *= 2.0;
        }
    }
    Err(BwError::DegenerateInput(
        "could not find a positive definite point in the affine constraint set".into(),
    ))
}

const MAX_HALVINGS: usize = 60;
const STEP_REFRESH: usize = 10;

fn projected_descent<T: Scalar>(samples: &SampleSet<T>, basis: &SubspaceBasis<T>, config: &SolverConfig) -> Result<BarycenterResult<T>> {
    let anchor = basis
        .anchor()
        .ok_or_else(|| BwError::Validation("affine constraint needs an anchor Q0".into()))?;
    check_dims(samples.dim(), anchor.dim())?;
    let d = samples.dim();
    let identity = DMatrix::<T>::identity(d, d);
    let mut q = feasible_start(samples, basis, anchor, config.pd_floor)?;
    let mut spec = eig_trusted(q.as_matrix());
    let mut step = config.descent_step.unwrap_or(0.0);
    let mut history = Vec::new();
    let mut last_variance = f64::INFINITY;
    for iter in 0..=config.max_iter {
        let sw = sweep(&q, &spec, samples)?;
        let direction = basis.project(&(&sw.mean_transport - &identity))?;
        let res = frobenius(&direction);
        history.push(res);
        if sw.variance > last_variance + 1e-10 {
            log::debug!("descent variance increased at iteration {iter}");
        }
        last_variance = sw.variance;
        if res <= config.tol_residual {
            return Ok(BarycenterResult {
                barycenter: q,
                iterations: iter,
                residual: res,
                variance: sw.variance,
                trace_history: history,
            });
        }
        if iter == config.max_iter {
            return Err(BwError::NoConvergence {
                iterations: iter,
                residual: res,
            });
        }
        if config.descent_step.is_none() && (iter % STEP_REFRESH == 0 || step == 0.0) {
            // Local smoothness: −⟨dT X, X⟩ ≤ ½ λ_max^{1/2}(S^{1/2}QS^{1/2}) ‖Q^{-1/2}XQ^{-1/2}‖².
            let lmin = spec.lambda_min();
            let lipschitz = 0.5 * sw.weighted_root_lmax / (lmin * lmin);
            step = 1.0 / lipschitz;
        }
        let mut accepted = None;
        let mut last_min = f64::NAN;
        for _ in 0..=MAX_HALVINGS {
            let moved = q.as_matrix() + &direction * T::from_real(step);
            let offset = basis.project(&(moved - anchor.as_matrix()))?;
            let cand = PsdMatrix::from_hermitian(anchor.as_matrix() + offset);
            match positive_spectrum(&cand, config.pd_floor) {
                Some(s) => {
                    accepted = Some((cand, s));
                    break;
                }
                None => {
                    last_min = cand.spectrum().lambda_min();
                    step *= 0.5;
                }
            }
        }
        let (next, next_spec) = accepted.ok_or(BwError::PositivityLost {
            halvings: MAX_HALVINGS,
            min_eigenvalue: last_min,
        })?;
        q = next;
        spec = next_spec;
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::BasisKind;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn diag(v: &[f64]) -> PsdMatrix<f64> {
        PsdMatrix::from_diagonal(v).unwrap()
    }

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::<f64>::new(vec![]).is_err());
        let err = SampleSet::with_weights(vec![diag(&[1.0]), diag(&[2.0])], vec![0.5, 0.6]).unwrap_err();
        assert!(err.to_string().contains("1.1"));
        assert!(SampleSet::with_weights(vec![diag(&[1.0]), diag(&[2.0, 1.0])], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn variance_examples() {
        let q = diag(&[1.0, 4.0]);
        let same = SampleSet::new(vec![q.clone(), q.clone()]).unwrap();
        assert_eq!(frechet_variance(&q, &same).unwrap(), 0.0);

        let one = SampleSet::new(vec![diag(&[4.0, 9.0])]).unwrap();
        assert_abs_diff_eq!(frechet_variance(&q, &one).unwrap(), 2.0, epsilon = 1e-13);

        let s = SampleSet::with_weights(vec![diag(&[4.0, 9.0]), diag(&[1.0, 2.0])], vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(
            frechet_variance(&PsdMatrix::zeros(2), &s).unwrap(),
            0.25 * 13.0 + 0.75 * 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn commuting_barycenter() {
        let s = SampleSet::new(vec![diag(&[1.0, 4.0]), diag(&[9.0, 16.0])]).unwrap();
        let r = solve_barycenter(&s, None, &SolverConfig::default()).unwrap();
        assert!((r.barycenter.as_matrix() - dmatrix![4.0, 0.0; 0.0, 9.0]).norm() < 1e-10);
        assert!(r.residual <= 1e-10);
        assert_eq!(r.trace_history.len(), r.iterations + 1);
    }

    #[test]
    fn single_sample_is_returned_exactly() {
        let s1 = PsdMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let r = solve_barycenter(&SampleSet::new(vec![s1.clone()]).unwrap(), None, &SolverConfig::default()).unwrap();
        assert_eq!(r.barycenter, s1);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let full = SubspaceBasis::standard(2, BasisKind::Full).unwrap();
        let s1 = PsdMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let one = SampleSet::new(vec![s1.clone()]).unwrap();
        assert!(residual(&s1, &one, &full).unwrap() < 1e-12);
        let s = SampleSet::new(vec![diag(&[4.0, 9.0])]).unwrap();
        assert_abs_diff_eq!(
            residual(&PsdMatrix::identity(2), &s, &full).unwrap(),
            5f64.sqrt(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn all_singular_samples_are_refused() {
        let s = SampleSet::new(vec![diag(&[1.0, 0.0]), diag(&[0.0, 2.0])]).unwrap();
        let err = solve_barycenter(&s, None, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, BwError::DegenerateInput(_)));
    }

    #[test]
    fn singular_members_are_kept() {
        let s = SampleSet::new(vec![diag(&[1.0, 0.0]), diag(&[4.0, 9.0])]).unwrap();
        let r = solve_barycenter(&s, None, &SolverConfig::default()).unwrap();
        // Commuting case: √q_j = mean √s_j.
        assert!((r.barycenter.as_matrix() - dmatrix![2.25, 0.0; 0.0, 2.25]).norm() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let s = SampleSet::new(vec![
            diag(&[1.0, 4.0]),
            PsdMatrix::new(dmatrix![9.0, 5.0; 5.0, 16.0]).unwrap(),
        ])
        .unwrap();
        let cfg = SolverConfig {
            max_iter: 1,
            tol_residual: 1e-15,
            ..SolverConfig::default()
        };
        match solve_barycenter(&s, None, &cfg).unwrap_err() {
            BwError::NoConvergence { iterations, residual } => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fixed_point_rejects_constraint() {
        let s = SampleSet::new(vec![diag(&[1.0, 4.0])]).unwrap();
        let tl = SubspaceBasis::standard(2, BasisKind::Traceless).unwrap();
        let cfg = SolverConfig {
            step_rule: Some(StepRule::FixedPoint),
            ..SolverConfig::default()
        };
        assert!(matches!(solve_barycenter(&s, Some(&tl), &cfg), Err(BwError::Validation(_))));
    }

    #[test]
    fn projected_descent_matches_fixed_point_unconstrained() {
        let s = SampleSet::new(vec![
            PsdMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap(),
            PsdMatrix::new(dmatrix![1.0, -0.5; -0.5, 3.0]).unwrap(),
            diag(&[0.5, 0.7]),
        ])
        .unwrap();
        let fp = solve_barycenter(&s, None, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig {
            step_rule: Some(StepRule::ProjectedDescent),
            ..SolverConfig::default()
        };
        let pgd = solve_barycenter(&s, None, &cfg).unwrap();
        assert!((fp.barycenter.as_matrix() - pgd.barycenter.as_matrix()).norm() < 1e-9);
    }

    #[test]
    fn trace_one_constraint_on_density_matrices() {
        let s = SampleSet::new(vec![
            PsdMatrix::new(dmatrix![0.7, 0.1; 0.1, 0.3]).unwrap(),
            PsdMatrix::new(dmatrix![0.2, -0.05; -0.05, 0.8]).unwrap(),
        ])
        .unwrap();
        let tl = SubspaceBasis::standard(2, BasisKind::Traceless).unwrap();
        let r = solve_barycenter(&s, Some(&tl), &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(r.barycenter.trace(), 1.0, epsilon = 1e-12);
        assert!(r.residual <= 1e-10);
        let free = solve_barycenter(&s, None, &SolverConfig::default()).unwrap();
        assert!(free.barycenter.trace() < 1.0);
    }
}
