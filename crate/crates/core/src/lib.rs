//! Bures-Wasserstein geometry on positive semi-definite Hermitian matrices.
//!
//! The crate is organised bottom-up:
//!
//! - [`hermitian`]: spectral decompositions, square roots, constraint subspaces.
//! - [`geometry`]: the Bures-Wasserstein distance, optimal transport maps and
//!   their differentials.
//! - [`barycenter`]: (affine-constrained) Fréchet barycenters and variances.
//! - [`inference`]: plug-in covariance operators, studentized statistics,
//!   limit-law sampling and concentration envelopes.
//! - [`mclab`]: seeded Monte Carlo experiments, KDE and KS utilities.
//! - [`io`]: matrix bundle formats, location-scale wrappers, report output.

pub mod barycenter;
pub mod error;
pub mod geometry;
pub mod hermitian;
pub mod inference;
pub mod io;
pub mod mclab;
pub mod scalar;

pub use barycenter::{
    frechet_variance, residual, solve_barycenter, BarycenterResult, SampleSet, SolverConfig, StepRule,
};
pub use nalgebra;
pub use num_complex::Complex64;

pub use error::{BwError, Result};
pub use geometry::{
    bw_distance, bw_distance_sq, dt_build, grad_bw_sq, operator_matrix, transport_map, DtOperator,
    TransportMap,
};
pub use hermitian::{
    eig_hermitian, pinv_sqrt_psd, sqrt_differential, sqrt_psd, BasisKind, PsdMatrix,
    SpectralDecomposition, SubspaceBasis,
};
pub use inference::{
    clt_report, compose_c_q, concentration_envelope_dbw, concentration_envelope_q,
    concentration_envelope_v, estimate_f_hat, estimate_sigma_hat, estimate_xi_hat, eta_bound,
    eta_n_diagnostic, sample_limit_dbw, sigma_perturbation_bound, studentized_statistic,
    subexp_tail, variance_clt_at, variance_clt_stats, CltReport, EtaDiagnostic, OperatorOnM,
    SigmaPerturbation, VarianceCltStats, VarianceForm,
};
pub use scalar::{Mode, Scalar};
