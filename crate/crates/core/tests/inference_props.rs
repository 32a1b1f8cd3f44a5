mod common;

use bures::hermitian::inner;
use bures::mclab::{random_spd, stream_rng, Rotation};
use bures::nalgebra::DMatrix;
use bures::{
    clt_report, concentration_envelope_dbw, concentration_envelope_q, concentration_envelope_v,
    eig_hermitian, estimate_f_hat, estimate_sigma_hat, estimate_xi_hat, frechet_variance, solve_barycenter,
    variance_clt_at, BasisKind, Complex64, PsdMatrix, SampleSet, Scalar, SolverConfig, SubspaceBasis,
    VarianceForm,
};
use common::*;
use proptest::prelude::*;

fn operator_spectra<T: Scalar>(samples: &SampleSet<T>, q: &PsdMatrix<T>, basis: &SubspaceBasis<T>) -> [Vec<f64>; 3] {
    let sigma = estimate_sigma_hat(samples, q, basis).unwrap();
    let f = estimate_f_hat(samples, q, basis, false).unwrap();
    let xi = estimate_xi_hat(&sigma, &f, 1e-10).unwrap();
    [sigma.eigenvalues(), f.eigenvalues(), xi.eigenvalues()]
}

fn check_invariance<T: Scalar>(samples: Vec<PsdMatrix<T>>, q: PsdMatrix<T>, u: &DMatrix<T>, kind: BasisKind) -> Result<(), TestCaseError> {
    let basis = SubspaceBasis::<T>::standard(q.dim(), kind).unwrap();
    let rotated: Vec<_> = samples.iter().map(|s| s.congruence(u)).collect();
    let before = operator_spectra(&SampleSet::new(samples).unwrap(), &q, &basis);
    let after = operator_spectra(&SampleSet::new(rotated).unwrap(), &q.congruence(u), &basis);
    for (a, b) in before.iter().zip(&after) {
        let scale = a.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
        }
    }
    Ok(())
}

/// `Q_*^{1/2} (I + E) Q_*^{1/2}` with `‖E‖ = r`.
fn perturb(q: &PsdMatrix<f64>, direction: &DMatrix<f64>, r: f64) -> PsdMatrix<f64> {
    let spec = eig_hermitian(direction).unwrap();
    let e = direction * (r / spec.lambda_max().abs().max(spec.lambda_min().abs()));
    let root = q.spectrum().map(f64::sqrt);
    PsdMatrix::new(&root * (DMatrix::identity(q.dim(), q.dim()) + e) * &root).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operators_are_rotation_invariant(samples in prop::collection::vec(spd(3, 0.1), 3..8), q in spd(3, 0.2), u in orthogonal(3)) {
        check_invariance(samples.clone(), q.clone(), &u, BasisKind::Full)?;
        check_invariance(samples, q, &u, BasisKind::Traceless)?;
    }

    #[test]
    fn operators_are_unitary_invariant(samples in prop::collection::vec(complex_spd(2, 0.1), 5..9), q in complex_spd(2, 0.2), u in unitary(2)) {
        check_invariance::<Complex64>(samples, q, &u, BasisKind::Full)?;
    }

    #[test]
    fn f_hat_is_sandwiched_by_f_at_the_barycenter(
        samples in prop::collection::vec(spd(3, 0.1), 2..6),
        direction in sym_direction(3),
        r in 0.0f64..0.9,
        traceless in any::<bool>(),
    ) {
        let samples = SampleSet::new(samples).unwrap();
        let q_star = solve_barycenter(&samples, None, &SolverConfig::default()).unwrap().barycenter;
        let q_n = perturb(&q_star, &direction, r);
        let basis = SubspaceBasis::standard(3, if traceless { BasisKind::Traceless } else { BasisKind::Full }).unwrap();
        let f_n = estimate_f_hat(&samples, &q_star, &basis, false).unwrap();
        let f_hat = estimate_f_hat(&samples, &q_n, &basis, false).unwrap();
        let lower = f_hat.matrix() - f_n.matrix() * (1.0 + r).powf(-1.5);
        let upper = f_n.matrix() * (1.0 - r).powf(-1.5) - f_hat.matrix();
        let slack = -1e-8 * f_hat.op_norm();
        prop_assert!(eig_hermitian(&lower).unwrap().lambda_min() >= slack);
        prop_assert!(eig_hermitian(&upper).unwrap().lambda_min() >= slack);
    }

    #[test]
    fn sigma_hat_has_the_plug_in_trace(samples in prop::collection::vec(spd(3, 0.1), 1..6), q in spd(3, 0.2)) {
        let samples = SampleSet::new(samples).unwrap();
        let basis = SubspaceBasis::standard(3, BasisKind::Full).unwrap();
        let sigma = estimate_sigma_hat(&samples, &q, &basis).unwrap();
        let expected: f64 = samples
            .iter()
            .map(|(s, w)| {
                let g = bures::grad_bw_sq(&q, s).unwrap();
                w * inner(&g, &g)
            })
            .sum();
        prop_assert!((sigma.matrix().trace() - expected).abs() <= 1e-10 * expected.max(1.0));
        prop_assert!(sigma.lambda_min() >= -1e-10 * sigma.op_norm().max(1.0));
    }

    #[test]
    fn variance_statistic_matches_definition(samples in prop::collection::vec(spd(3, 0.1), 2..8), q_ref in spd(3, 0.1), v_ref in 0.0f64..5.0) {
        let samples = SampleSet::new(samples).unwrap();
        let q_n = solve_barycenter(&samples, None, &SolverConfig::default()).unwrap().barycenter;
        let stats = variance_clt_at(&samples, &q_n, &q_ref, v_ref, VarianceForm::Population).unwrap();
        let n = samples.len() as f64;
        let direct = n.sqrt() * (frechet_variance(&q_n, &samples).unwrap() - v_ref);
        prop_assert!((stats.stat - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        let report = clt_report(&samples, &q_n, &q_ref, v_ref, &SubspaceBasis::standard(3, BasisKind::Full).unwrap()).unwrap();
        prop_assert!((report.variance_stat - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn envelopes_are_monotone(c in 0.01f64..10.0, norm in 0.01f64..10.0, d in 1usize..10, n in 1usize..10_000, t in 0.0f64..10.0, b in 0.01f64..5.0, nu in 0.01f64..5.0) {
        let q = |d, n, t| concentration_envelope_q(c, d, n, t);
        let w = |d, n, t| concentration_envelope_dbw(c, norm, d, n, t);
        let v = |d, n, t| concentration_envelope_v(b, nu, c, norm, d, n, t);
        for f in [&q as &dyn Fn(usize, usize, f64) -> f64, &w, &v] {
            prop_assert!(f(d, n + 1, t) < f(d, n, t));
            prop_assert!(f(d, n, t + 0.5) > f(d, n, t));
            prop_assert!(f(d + 1, n, t) > f(d, n, t));
        }
        prop_assert!((q(d, 4 * n, t) - 0.5 * q(d, n, t)).abs() <= 1e-12 * q(d, n, t));
    }
}

#[test]
fn xi_hat_is_stable_between_sample_sizes() {
    let mut rng = stream_rng(11, 0);
    let draws: Vec<_> = (0..8000)
        .map(|_| random_spd(3, [18.0, 22.0], Rotation::Haar, &mut rng).unwrap())
        .collect();
    let basis = SubspaceBasis::standard(3, BasisKind::Full).unwrap();
    let xi_at = |n: usize| {
        let samples = SampleSet::new(draws[..n].to_vec()).unwrap();
        let q = solve_barycenter(&samples, None, &SolverConfig::default()).unwrap().barycenter;
        let sigma = estimate_sigma_hat(&samples, &q, &basis).unwrap();
        let f = estimate_f_hat(&samples, &q, &basis, false).unwrap();
        estimate_xi_hat(&sigma, &f, 1e-10).unwrap()
    };
    let small = xi_at(4000);
    let large = xi_at(8000);
    let gap = eig_hermitian(&(small.matrix() - large.matrix())).unwrap();
    let gap = gap.lambda_max().abs().max(gap.lambda_min().abs());
    assert!(gap <= 0.1 * large.op_norm(), "relative gap {}", gap / large.op_norm());
}
