//! Counter-based random streams and random SPD generation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{BwError, Result};
use crate::hermitian::{hermitian_part, PsdMatrix};

/// Purpose of a random stream; distinct domains never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Proxy = 1,
    Replicate = 2,
    Limit = 3,
    NormalReference = 4,
    VarianceReference = 5,
}

const FIELD_BITS: u32 = 28;
const FIELD_MAX: u64 = (1 << FIELD_BITS) - 1;

/// Stream identifier `(domain, a, b)` packed into 64 bits.
pub fn stream_id(domain: Domain, a: u64, b: u64) -> Result<u64> {
    if a > FIELD_MAX || b > FIELD_MAX {
        return Err(BwError::Validation(format!(
            "stream coordinates ({a}, {b}) exceed 2^{FIELD_BITS} - 1"
        )));
    }
    Ok(((domain as u64) << (2 * FIELD_BITS)) | (a << FIELD_BITS) | b)
}

/// ChaCha8 generator keyed by the master seed, positioned on `stream`.
/// The result depends only on `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Eigenvector law of [`random_spd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    /// Haar-distributed orthogonal matrix.
    #[default]
    Haar,
    /// `U = I`; samples are diagonal and commute.
    Identity,
}

/// Haar orthogonal matrix from the QR factorization of a Gaussian matrix,
/// columns sign-corrected so that `diag(R) > 0`.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `U diag(λ) Uᵀ` with `λ_i ~ Unif[a, b]` i.i.d.
pub fn random_spd<R: Rng + ?Sized>(d: usize, eig_law: [f64; 2], rotation: Rotation, rng: &mut R) -> Result<PsdMatrix<f64>> {
    let [a, b] = eig_law;
    if d == 0 {
        return Err(BwError::Validation("dimension must be >= 1".into()));
    }
    if !(a > 0.0) || !(a <= b) || !b.is_finite() {
        return Err(BwError::Validation(format!(
            "eigenvalue law [{a}, {b}] must satisfy 0 < a <= b"
        )));
    }
    let lambda: DVector<f64> = if a == b {
        DVector::from_element(d, a)
    } else {
        let law = Uniform::new_inclusive(a, b).map_err(|e| BwError::Validation(e.to_string()))?;
        DVector::from_iterator(d, (0..d).map(|_| rng.sample(law)))
    };
    let m = match rotation {
        Rotation::Identity => DMatrix::from_diagonal(&lambda),
        Rotation::Haar => {
            let u = haar_orthogonal(d, rng);
            let mut scaled = u.clone();
            for (j, l) in lambda.iter().enumerate() {
                scaled.column_mut(j).scale_mut(*l);
            }
            hermitian_part(&(scaled * u.transpose()))
        }
    };
    Ok(PsdMatrix::from_hermitian(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = stream_id(Domain::Replicate, 10, 3).unwrap();
        let a: Vec<u64> = (0..4).map({
            let mut r = stream_rng(42, s);
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = stream_rng(42, s);
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        let other = stream_id(Domain::Replicate, 10, 4).unwrap();
        assert_ne!(stream_rng(42, other).random::<u64>(), a[0]);
        assert!(stream_id(Domain::Proxy, 1 << 28, 0).is_err());
    }

    #[test]
    fn spd_eigenvalues_in_law() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let s = random_spd(5, [18.0, 22.0], Rotation::Haar, &mut rng).unwrap();
            let spec = s.spectrum();
            assert!(spec.lambda_min() >= 18.0 - 1e-10 && spec.lambda_max() <= 22.0 + 1e-10);
        }
        let one = random_spd(1, [18.0, 22.0], Rotation::Haar, &mut rng).unwrap();
        assert!((18.0..=22.0).contains(&one.as_matrix()[(0, 0)]));
        assert!(random_spd(2, [0.0, 1.0], Rotation::Haar, &mut rng).is_err());
        assert!(random_spd(2, [2.0, 1.0], Rotation::Haar, &mut rng).is_err());
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = stream_rng(9, 1);
        let u = haar_orthogonal(4, &mut rng);
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).amax() < 1e-13);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let a = random_spd(3, [18.0, 22.0], Rotation::Haar, &mut stream_rng(5, 7)).unwrap();
        let b = random_spd(3, [18.0, 22.0], Rotation::Haar, &mut stream_rng(5, 7)).unwrap();
        assert_eq!(a, b);
    }
}
