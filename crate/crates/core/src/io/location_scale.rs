//! Gaussian (location-scale) measures `N(m, S)` and their 2-Wasserstein geometry.

use nalgebra::DVector;

use crate::barycenter::{solve_barycenter, SampleSet, SolverConfig};
use crate::error::{BwError, Result};
use crate::geometry::bw_distance_sq;
use crate::hermitian::{check_dims, PsdMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LocationScaleMeasure<T: Scalar> {
    pub mean: DVector<f64>,
    pub covariance: PsdMatrix<T>,
}

impl<T: Scalar> LocationScaleMeasure<T> {
    pub fn new(mean: DVector<f64>, covariance: PsdMatrix<T>) -> Result<Self> {
        check_dims(covariance.dim(), mean.len())?;
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(BwError::NonFinite);
        }
        Ok(Self { mean, covariance })
    }

    /// Centred measure `N(0, S)`.
    pub fn centred(covariance: PsdMatrix<T>) -> Self {
        Self {
            mean: DVector::zeros(covariance.dim()),
            covariance,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `‖m₁ − m₂‖² + d²_BW(S₁, S₂)`.
pub fn w2_distance_sq<T: Scalar>(a: &LocationScaleMeasure<T>, b: &LocationScaleMeasure<T>) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok((&a.mean - &b.mean).norm_squared() + bw_distance_sq(&a.covariance, &b.covariance)?)
}

/// Barycenter of Gaussian measures: weighted mean of the means, Bures-Wasserstein
/// barycenter of the covariances.
pub fn scale_location_barycenter<T: Scalar>(
    measures: &[LocationScaleMeasure<T>],
    weights: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<LocationScaleMeasure<T>> {
    if measures.is_empty() {
        return Err(BwError::Validation("no measures supplied".into()));
    }
    let covs: Vec<_> = measures.iter().map(|m| m.covariance.clone()).collect();
    let samples = match weights {
        Some(w) => SampleSet::with_weights(covs, w.to_vec())?,
        None => SampleSet::new(covs)?,
    };
    let d = samples.dim();
    let mut mean = DVector::<f64>::zeros(d);
    for (k, (m, w)) in measures.iter().zip(samples.weights()).enumerate() {
        check_dims(d, m.dim()).map_err(|e| e.in_matrix(k))?;
        mean.axpy(*w, &m.mean, 1.0);
    }
    let fit = solve_barycenter(&samples, None, config)?;
    LocationScaleMeasure::new(mean, fit.barycenter)
}
