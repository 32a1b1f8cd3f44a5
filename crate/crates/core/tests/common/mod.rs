#![allow(dead_code)]

use bures::nalgebra::DMatrix;
use bures::{Complex64, PsdMatrix};
use proptest::prelude::*;

pub fn real_square(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, d * d).prop_map(move |v| DMatrix::from_vec(d, d, v))
}

pub fn complex_square(d: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    (
        prop::collection::vec(-1.0..1.0f64, d * d),
        prop::collection::vec(-1.0..1.0f64, d * d),
    )
        .prop_map(move |(re, im)| DMatrix::from_fn(d, d, |i, j| Complex64::new(re[i * d + j], im[i * d + j])))
}

/// Real symmetric matrix with unit Frobenius norm.
pub fn sym_direction(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    real_square(d).prop_filter_map("zero direction", |a| {
        let h = (&a + a.transpose()) * 0.5;
        let n = h.norm();
        (n > 1e-3).then(|| h / n)
    })
}

pub fn herm_direction(d: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    complex_square(d).prop_filter_map("zero direction", |a| {
        let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let n = h.norm();
        (n > 1e-3).then(|| h.map(|z| z / n))
    })
}

/// `A Aᵀ + floor·I`.
pub fn spd(d: usize, floor: f64) -> impl Strategy<Value = PsdMatrix<f64>> {
    real_square(d).prop_map(move |a| {
        PsdMatrix::new(&a * a.transpose() + DMatrix::identity(d, d) * floor).unwrap()
    })
}

pub fn complex_spd(d: usize, floor: f64) -> impl Strategy<Value = PsdMatrix<Complex64>> {
    complex_square(d).prop_map(move |a| {
        PsdMatrix::new(&a * a.adjoint() + DMatrix::identity(d, d) * Complex64::new(floor, 0.0)).unwrap()
    })
}

/// Orthogonal factor of a QR decomposition.
pub fn orthogonal(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    real_square(d).prop_filter_map("rank deficient", |a| {
        let qr = a.qr();
        (qr.r().diagonal().iter().all(|x| x.abs() > 1e-3)).then(|| qr.q())
    })
}

pub fn unitary(d: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    complex_square(d).prop_filter_map("rank deficient", |a| {
        let qr = a.qr();
        (qr.r().diagonal().iter().all(|x| x.norm() > 1e-3)).then(|| qr.q())
    })
}

pub fn rel_diff<T: bures::Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
