mod common;

use bures::hermitian::{frobenius, inner};
use bures::nalgebra::DMatrix;
use bures::{
    bw_distance, bw_distance_sq, dt_build, eig_hermitian, grad_bw_sq, sqrt_psd, transport_map, BasisKind,
    Complex64, PsdMatrix, Scalar, SubspaceBasis,
};
use common::*;
use proptest::prelude::*;

fn middle_extremes<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> (f64, f64) {
    let r = sqrt_psd(s).unwrap();
    let m = r.as_matrix() * q.as_matrix() * r.as_matrix();
    let spec = eig_hermitian(&((&m + m.adjoint()) * T::from_real(0.5))).unwrap();
    (spec.lambda_min(), spec.lambda_max())
}

fn inv_sqrt<T: Scalar>(q: &PsdMatrix<T>) -> DMatrix<T> {
    q.spectrum().map(|l| 1.0 / l.sqrt())
}

fn check_dt_bounds<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>, x: &DMatrix<T>) -> Result<(), TestCaseError> {
    let dt = dt_build(q, s).unwrap();
    let quad = -inner(&dt.apply_raw(x), x);
    let w = inv_sqrt(q);
    let scale = frobenius(&(&w * x * &w)).powi(2);
    let (lo, hi) = middle_extremes(q, s);
    let tol = 1e-10 * quad.abs().max(1e-300);
    prop_assert!(quad >= 0.5 * lo.sqrt() * scale - tol, "{quad} below {}", 0.5 * lo.sqrt() * scale);
    prop_assert!(quad <= 0.5 * hi.sqrt() * scale + tol, "{quad} above {}", 0.5 * hi.sqrt() * scale);
    Ok(())
}

fn check_dt_spectrum<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>) -> Result<(), TestCaseError> {
    let basis = SubspaceBasis::<T>::standard(q.dim(), BasisKind::Full).unwrap();
    let m = dt_build(q, s).unwrap().materialize(&basis, true).unwrap();
    let neg = -(&m + m.transpose()) * 0.5;
    let spec = eig_hermitian(&neg).unwrap();
    let (lo, hi) = middle_extremes(q, s);
    let (want_lo, want_hi) = (0.5 * lo.sqrt(), 0.5 * hi.sqrt());
    prop_assert!((spec.lambda_min() - want_lo).abs() <= 1e-8 * want_lo);
    prop_assert!((spec.lambda_max() - want_hi).abs() <= 1e-8 * want_hi);
    Ok(())
}

fn transport_remainder<T: Scalar>(q: &PsdMatrix<T>, s: &PsdMatrix<T>, x: &DMatrix<T>, eps: f64) -> f64 {
    let shifted = PsdMatrix::new(q.as_matrix() + x * T::from_real(eps)).unwrap();
    let t1 = transport_map(&shifted, s).unwrap().matrix.into_matrix();
    let t0 = transport_map(q, s).unwrap().matrix.into_matrix();
    let lin = dt_build(q, s).unwrap().apply_raw(x) * T::from_real(eps);
    frobenius(&(t1 - t0 - lin))
}

/// `d²(Q₁,S) − d²(Q₀,S) + ⟨T_{Q₀} − I, Q₁ − Q₀⟩` and its two bounds.
fn quadratic_terms<T: Scalar>(q0: &PsdMatrix<T>, q1: &PsdMatrix<T>, s: &PsdMatrix<T>) -> (f64, f64, f64) {
    let delta = q1.as_matrix() - q0.as_matrix();
    let grad = grad_bw_sq(q0, s).unwrap();
    let middle = bw_distance_sq(q1, s).unwrap() - bw_distance_sq(q0, s).unwrap() - inner(&grad, &delta);
    let curvature = -inner(&dt_build(q0, s).unwrap().apply_raw(&delta), &delta);
    let w = inv_sqrt(q0);
    let rel = eig_hermitian(&(&w * q1.as_matrix() * &w)).unwrap();
    let lower = 2.0 / (1.0 + rel.lambda_max().sqrt()).powi(2) * curvature;
    let upper = 2.0 / (1.0 + rel.lambda_min().sqrt()).powi(2) * curvature;
    (lower, middle, upper)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn triangle_inequality(a in spd(3, 0.0), b in spd(3, 0.0), c in spd(3, 0.0)) {
        let ab = bw_distance(&a, &b).unwrap();
        let bc = bw_distance(&b, &c).unwrap();
        let ac = bw_distance(&a, &c).unwrap();
        prop_assert!(ab + bc - ac >= -1e-9, "{ab} + {bc} < {ac}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(a in spd(4, 0.0), b in spd(4, 0.0)) {
        prop_assert_eq!(bw_distance_sq(&a, &a).unwrap(), 0.0);
        let ab = bw_distance_sq(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, bw_distance_sq(&b, &a).unwrap());
    }

    #[test]
    fn complex_metric_axioms(a in complex_spd(3, 0.0), b in complex_spd(3, 0.0), u in unitary(3)) {
        let ab = bw_distance_sq(&a, &b).unwrap();
        prop_assert_eq!(ab, bw_distance_sq(&b, &a).unwrap());
        let rotated = bw_distance_sq(&a.congruence(&u), &b.congruence(&u)).unwrap();
        prop_assert!((rotated - ab).abs() <= 1e-10 * (1.0 + ab));
    }

    #[test]
    fn transport_cost_equals_squared_distance(q in spd(4, 0.1), s in spd(4, 0.0)) {
        let t = transport_map(&q, &s).unwrap();
        let d2 = bw_distance_sq(&q, &s).unwrap();
        prop_assert!((t.cost() - d2).abs() <= 1e-9 * (1.0 + d2));
        prop_assert!(t.pushforward_residual() <= 1e-9 * (1.0 + s.as_matrix().norm()));
    }

    #[test]
    fn transport_cost_complex(q in complex_spd(3, 0.1), s in complex_spd(3, 0.0)) {
        let t = transport_map(&q, &s).unwrap();
        let d2 = bw_distance_sq(&q, &s).unwrap();
        prop_assert!((t.cost() - d2).abs() <= 1e-9 * (1.0 + d2));
    }

    #[test]
    fn transport_to_singular_target(q in spd(3, 0.1), v in sym_direction(3)) {
        let col = v.column(0).into_owned();
        let s = PsdMatrix::new(&col * col.transpose()).unwrap();
        let t = transport_map(&q, &s).unwrap();
        prop_assert!(t.pushforward_residual() <= 1e-9);
        // Roundoff eigenvalues of the rank-one product enter the distance through
        // square roots, so agreement is only at the √ε level.
        let d2 = bw_distance_sq(&q, &s).unwrap();
        prop_assert!((t.cost() - d2).abs() <= 1e-7 * (1.0 + d2));
    }

    #[test]
    fn dt_quadratic_form_bounds(q in spd(4, 0.1), s in spd(4, 0.05), x in sym_direction(4)) {
        check_dt_bounds(&q, &s, &x)?;
    }

    #[test]
    fn dt_quadratic_form_bounds_complex(q in complex_spd(3, 0.1), s in complex_spd(3, 0.05), x in herm_direction(3)) {
        check_dt_bounds(&q, &s, &x)?;
    }

    #[test]
    fn rescaled_spectrum_is_sharp(d in 1usize..6, q in spd(5, 0.1), s in spd(5, 0.1)) {
        let q = PsdMatrix::new(q.as_matrix().view((0, 0), (d, d)).into_owned()).unwrap();
        let s = PsdMatrix::new(s.as_matrix().view((0, 0), (d, d)).into_owned()).unwrap();
        check_dt_spectrum(&q, &s)?;
    }

    #[test]
    fn rescaled_spectrum_is_sharp_complex(q in complex_spd(3, 0.1), s in complex_spd(3, 0.1)) {
        check_dt_spectrum(&q, &s)?;
    }

    #[test]
    fn dt_is_self_adjoint_and_negative(q in spd(3, 0.1), s in spd(3, 0.0)) {
        let basis = SubspaceBasis::<f64>::standard(3, BasisKind::Full).unwrap();
        let m = dt_build(&q, &s).unwrap().materialize(&basis, false).unwrap();
        prop_assert!((&m - m.transpose()).norm() <= 1e-10 * m.norm().max(1e-300));
        let spec = eig_hermitian(&((&m + m.transpose()) * 0.5)).unwrap();
        prop_assert!(spec.lambda_max() <= 1e-10 * m.norm());
    }

    #[test]
    fn dt_homogeneity(q in spd(3, 0.1), s in spd(3, 0.1), a in prop::sample::select(vec![0.5, 2.0, 4.0])) {
        let basis = SubspaceBasis::<f64>::standard(3, BasisKind::Full).unwrap();
        let base = dt_build(&q, &s).unwrap().materialize(&basis, false).unwrap();
        let in_q = dt_build(&q.scaled(a), &s).unwrap().materialize(&basis, false).unwrap();
        let in_s = dt_build(&q, &s.scaled(a)).unwrap().materialize(&basis, false).unwrap();
        prop_assert!(rel_diff(&in_q, &(&base * a.powf(-1.5))) < 1e-10);
        prop_assert!(rel_diff(&in_s, &(&base * a.sqrt())) < 1e-10);
    }

    #[test]
    fn dt_is_monotone_in_q(q in spd(3, 0.1), p in spd(3, 0.0), s in spd(3, 0.1)) {
        let basis = SubspaceBasis::<f64>::standard(3, BasisKind::Full).unwrap();
        let larger = PsdMatrix::new(q.as_matrix() + p.as_matrix()).unwrap();
        let m0 = dt_build(&q, &s).unwrap().materialize(&basis, false).unwrap();
        let m1 = dt_build(&larger, &s).unwrap().materialize(&basis, false).unwrap();
        let gap = &m1 - &m0;
        let spec = eig_hermitian(&((&gap + gap.transpose()) * 0.5)).unwrap();
        prop_assert!(spec.lambda_min() >= -1e-10 * m0.norm(), "{}", spec.lambda_min());
    }

    #[test]
    fn transport_first_order_expansion(q in spd(4, 0.2), s in spd(4, 0.1), x in sym_direction(4)) {
        let coarse = transport_remainder(&q, &s, &x, 1e-3);
        let fine = transport_remainder(&q, &s, &x, 1e-4);
        prop_assert!(fine <= coarse / 50.0 + 1e-12, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn gradient_matches_finite_differences(q in spd(3, 0.2), s in spd(3, 0.0), x in sym_direction(3)) {
        let eps = 1e-5;
        let plus = PsdMatrix::new(q.as_matrix() + &x * eps).unwrap();
        let minus = PsdMatrix::new(q.as_matrix() - &x * eps).unwrap();
        let fd = (bw_distance_sq(&plus, &s).unwrap() - bw_distance_sq(&minus, &s).unwrap()) / (2.0 * eps);
        let analytic = inner(&grad_bw_sq(&q, &s).unwrap(), &x);
        prop_assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0));
    }

    #[test]
    fn quadratic_sandwich(q0 in spd(3, 0.2), step in spd(3, 0.0), s in spd(3, 0.1), t in 0.05f64..1.0, shrink in any::<bool>()) {
        let q1 = if shrink {
            q0.scaled(1.0 - 0.5 * t)
        } else {
            PsdMatrix::new(q0.as_matrix() + step.as_matrix() * t).unwrap()
        };
        let (lower, middle, upper) = quadratic_terms(&q0, &q1, &s);
        let tol = 1e-9 * (1.0 + middle.abs());
        prop_assert!(lower <= middle + tol, "{lower} > {middle}");
        prop_assert!(middle <= upper + tol, "{middle} > {upper}");
    }

    #[test]
    fn quadratic_sandwich_complex(q0 in complex_spd(2, 0.2), step in complex_spd(2, 0.0), s in complex_spd(2, 0.1)) {
        let q1 = PsdMatrix::new(q0.as_matrix() + step.as_matrix() * Complex64::new(0.5, 0.0)).unwrap();
        let (lower, middle, upper) = quadratic_terms(&q0, &q1, &s);
        let tol = 1e-9 * (1.0 + middle.abs());
        prop_assert!(lower <= middle + tol && middle <= upper + tol);
    }
}

#[test]
fn quadratic_sandwich_is_tight_for_scalars() {
    let q0 = PsdMatrix::<f64>::from_diagonal(&[2.0]).unwrap();
    let q1 = PsdMatrix::from_diagonal(&[5.0]).unwrap();
    let s = PsdMatrix::from_diagonal(&[3.0]).unwrap();
    let (lower, middle, upper) = quadratic_terms(&q0, &q1, &s);
    assert!((lower - middle).abs() < 1e-14 && (upper - middle).abs() < 1e-14);
}
