//! Bures-Wasserstein distance, optimal transport maps between centred
//! Gaussian laws, and the differential of the map `Q ↦ T_Q^S`.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hermitian::{
    check_dims, eps_pd, frobenius, hermitian_part, inner, pd_spectrum, pinv_sqrt_from,
    psd_spectrum, PsdMatrix, SubspaceBasis,
};
use crate::scalar::Scalar;

/// Relative eigenvalue cut-off defining the rank of `S` (and of `S^{1/2}QS^{1/2}`).
pub const RANK_TOL: f64 = 1e-12;

/// Lexicographic total order on entries; used to evaluate symmetric
/// functions of two matrices in a fixed argument order.
fn entry_order<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let (xr, xi) = x.to_parts();
        let (yr, yi) = y.to_parts();
        let o = xr.total_cmp(&yr).then(xi.total_cmp(&yi));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// `tr Q + tr S − 2 tr (Q^{1/2} S Q^{1/2})^{1/2}`, clamped at zero.
///
/// The pair is put in a canonical order first so the result is bitwise
/// symmetric in its arguments.
pub fn bw_distance_sq<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<f64> {
    check_dims(q.dim(), s.dim())?;
    let (a, b) = match entry_order(q.as_matrix(), s.as_matrix()) {
        Ordering::Equal => return Ok(0.0),
        Ordering::Less => (q, s),
        Ordering::Greater => (s, q),
    };
    let root_a = psd_spectrum(a.as_matrix())?.map(f64::sqrt);
    let middle = hermitian_part(&(&root_a * b.as_matrix() * &root_a));
    let fidelity: f64 = psd_spectrum(&middle)?
        .eigenvalues
        .iter()
        .map(|l| l.sqrt())
        .sum();
    let raw = a.trace() + b.trace() - 2.0 * fidelity;
    if raw < 0.0 {
        if raw < -1e-10 * (1.0 + a.trace() + b.trace()) {
            log::warn!("d_BW^2 roundoff {raw:.3e} exceeds tolerance; clamped to 0");
        } else {
            log::trace!("d_BW^2 roundoff {raw:.3e} clamped to 0");
        }
        return Ok(0.0);
    }
    Ok(raw)
}

pub fn bw_distance<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<f64> {
    bw_distance_sq(q, s).map(f64::sqrt)
}

/// Optimal transport map `T_Q^S` pushing `N(0, Q)` onto `N(0, S)`.
#[derive(Debug, Clone)]
pub struct TransportMap<T: Scalar> {
    pub matrix: PsdMatrix<T>,
    pub source: PsdMatrix<T>,
    pub target: PsdMatrix<T>,
}

impl<T: Scalar> TransportMap<T> {
    /// `‖T Q T − S‖_F`.
    pub fn pushforward_residual(&self) -> f64 {
        let t = self.matrix.as_matrix();
        frobenius(&(t * self.source.as_matrix() * t - self.target.as_matrix()))
    }

    /// `‖(T − I) Q^{1/2}‖_F² = tr (T − I) Q (T − I)`.
    pub fn cost(&self) -> f64 {
        let d = self.matrix.dim();
        let shifted = self.matrix.as_matrix() - DMatrix::<T>::identity(d, d);
        inner(&shifted, &(self.source.as_matrix() * &shifted))
    }
}

/// `T = S^{1/2} (S^{1/2} Q S^{1/2})^{-1/2} S^{1/2}` with a pseudo-inverse on
/// the range of `S`; requires `Q ≻ 0`.
pub fn transport_map<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<TransportMap<T>> {
    let matrix = transport_matrix(q, s)?;
    Ok(TransportMap {
        matrix: PsdMatrix::from_hermitian(matrix),
        source: q.clone(),
        target: s.clone(),
    })
}

pub(crate) fn transport_matrix<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<DMatrix<T>> {
    check_dims(q.dim(), s.dim())?;
    pd_spectrum(q.as_matrix())?;
    let root_s = psd_spectrum(s.as_matrix())?.map(f64::sqrt);
    let middle = hermitian_part(&(&root_s * q.as_matrix() * &root_s));
    let spec = psd_spectrum(&middle)?;
    let pinv = pinv_sqrt_from(&spec, RANK_TOL);
    Ok(hermitian_part(&(&root_s * pinv * &root_s)))
}

/// Frobenius gradient `I − T_Q^S` of `Q ↦ d²_BW(Q, S)`.
pub fn grad_bw_sq<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<DMatrix<T>> {
    let t = transport_matrix(q, s)?;
    Ok(DMatrix::identity(q.dim(), q.dim()) - t)
}

/// Differential `dT_Q^S` of `Q ↦ T_Q^S` with cached spectral data of
/// `S^{1/2} Q S^{1/2}`.
#[derive(Debug, Clone)]
pub struct DtOperator<T: Scalar> {
    base_q: PsdMatrix<T>,
    base_s: PsdMatrix<T>,
    /// `L = U S^{1/2}`, so that `Δ = L X L*`.
    lift: DMatrix<T>,
    /// Eigenvalues of `S^{1/2} Q S^{1/2}`, descending.
    lambda: Vec<f64>,
    rank: usize,
    /// `1 / (√(λ_iλ_j)(√λ_i + √λ_j))` on the rank block, zero elsewhere.
    coef: DMatrix<f64>,
    root_q: DMatrix<T>,
}

impl<T: Scalar> DtOperator<T> {
    /// Builds the operator at `Q ≻ 0`; `S` may be singular.
    pub fn new(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<Self> {
        check_dims(q.dim(), s.dim())?;
        let q_spec = pd_spectrum(q.as_matrix())?;
        let root_q = q_spec.map(f64::sqrt);
        let root_s = psd_spectrum(s.as_matrix())?.map(f64::sqrt);
        let middle = hermitian_part(&(&root_s * q.as_matrix() * &root_s));
        let spec = psd_spectrum(&middle)?;
        let d = q.dim();
        let cut = RANK_TOL * spec.lambda_max();
        let lambda: Vec<f64> = spec.eigenvalues.iter().copied().collect();
        let rank = lambda.iter().filter(|&&l| l > cut && l > 0.0).count();
        let coef = DMatrix::from_fn(d, d, |i, j| {
            if i < rank && j < rank {
                let (ri, rj) = (lambda[i].sqrt(), lambda[j].sqrt());
                1.0 / (ri * rj * (ri + rj))
            } else {
                0.0
            }
        });
        Ok(Self {
            base_q: q.clone(),
            base_s: s.clone(),
            lift: &spec.vectors * root_s,
            lambda,
            rank,
            coef,
            root_q,
        })
    }

    pub fn dim(&self) -> usize {
        self.base_q.dim()
    }

    pub fn base_q(&self) -> &PsdMatrix<T> {
        &self.base_q
    }

    pub fn base_s(&self) -> &PsdMatrix<T> {
        &self.base_s
    }

    /// Eigenvalues of `S^{1/2} Q S^{1/2}` in descending order.
    pub fn middle_eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `dT(X) = −S^{1/2} U* Λ^{-1/2} δ Λ^{-1/2} U S^{1/2}`.
    pub fn apply_raw(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut delta = &self.lift * x * self.lift.adjoint();
        delta.zip_apply(&self.coef, |z, c| *z *= T::from_real(-c));
        hermitian_part(&(self.lift.adjoint() * delta * &self.lift))
    }

    /// `dt(ζ) = Q^{1/2} dT(Q^{1/2} ζ Q^{1/2}) Q^{1/2}`.
    pub fn apply_rescaled(&self, zeta: &DMatrix<T>) -> DMatrix<T> {
        let r = &self.root_q;
        let inner_arg = r * zeta * r;
        hermitian_part(&(r * self.apply_raw(&inner_arg) * r))
    }

    /// The transport map `T_Q^S` from the cached decomposition.
    pub fn transport(&self) -> DMatrix<T> {
        let d = self.dim();
        let mut diag = DMatrix::<T>::zeros(d, d);
        for i in 0..self.rank {
            diag[(i, i)] = T::from_real(1.0 / self.lambda[i].sqrt());
        }
        hermitian_part(&(self.lift.adjoint() * diag * &self.lift))
    }

    /// Matrix `⟨B_k, dT(B_l)⟩` (or of `dt` when `rescaled`) in the given basis.
    pub fn materialize(&self, basis: &SubspaceBasis<T>, rescaled: bool) -> Result<DMatrix<f64>> {
        if rescaled {
            operator_matrix(basis, |x| self.apply_rescaled(x))
        } else {
            operator_matrix(basis, |x| self.apply_raw(x))
        }
    }
}

/// Convenience constructor mirroring [`transport_map`].
pub fn dt_build<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<DtOperator<T>> {
    DtOperator::new(q, s)
}

/// Matrix `M_kl = ⟨B_k, op(B_l)⟩` of a linear map in an orthonormal basis.
/// The result is not symmetrized.
pub fn operator_matrix<T, F>(basis: &SubspaceBasis<T>, op: F) -> Result<DMatrix<f64>>
where
    T: Scalar,
    F: Fn(&DMatrix<T>) -> DMatrix<T>,
{
    let m = basis.len();
    let mut out = DMatrix::<f64>::zeros(m, m);
    for (l, bl) in basis.elements().iter().enumerate() {
        let image = op(bl);
        check_dims(basis.ambient_dim(), image.nrows())?;
        for (k, bk) in basis.elements().iter().enumerate() {
            out[(k, l)] = inner(bk, &image);
        }
    }
    Ok(out)
}

/// Strict-positivity check with the library-wide threshold.
pub fn is_strictly_positive<T: Scalar>(q: &PsdMatrix<T>) -> bool {
    let spec = q.spectrum();
    spec.lambda_max() > 0.0 && spec.lambda_min() > eps_pd(spec.lambda_max())
}
