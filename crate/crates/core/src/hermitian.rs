//! Hermitian matrix primitives: validated PSD matrices, spectral
//! decompositions, square roots and their differential, and orthonormal
//! bases of constraint subspaces.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

use crate::error::{BwError, Result};
use crate::scalar::{Mode, Scalar};

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// PSD validation tolerance: eigenvalues in `[-eps_psd, 0)` count as zero.
pub fn eps_psd(lambda_max: f64) -> f64 {
    1e-10 * lambda_max.max(1.0)
}

/// Strict-positivity threshold for operations that need `Q ≻ 0`.
pub fn eps_pd(lambda_max: f64) -> f64 {
    1e-12 * lambda_max
}

/// Frobenius inner product `Re tr(A* B)`.
pub fn inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.conjugate() * *y).real())
        .sum()
}

pub fn frobenius<T: Scalar>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
}

/// `(A + A*) / 2`, exactly Hermitian as stored.
pub fn hermitian_part<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let half = T::from_real(0.5);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            T::from_real(a[(i, i)].real())
        } else if i < j {
            (a[(i, j)] + a[(j, i)].conjugate()) * half
        } else {
            (a[(j, i)] + a[(i, j)].conjugate()).conjugate() * half
        }
    })
}

pub fn trace_re<T: Scalar>(a: &DMatrix<T>) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].real()).sum()
}

fn check_square<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(BwError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|x| {
        let (re, im) = x.to_parts();
        !re.is_finite() || !im.is_finite()
    }) {
        return Err(BwError::NonFinite);
    }
    Ok(())
}

/// Fails unless `‖A − A*‖_F ≤ 1e-10·‖A‖_F`.
pub fn check_hermitian<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    check_square(a)?;
    let asym = frobenius(&(a - a.adjoint()));
    let tolerance = HERMITIAN_TOL * frobenius(a);
    if asym > tolerance {
        return Err(BwError::NotHermitian {
            asymmetry: asym,
            tolerance,
        });
    }
    Ok(())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(BwError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Eigendecomposition `A = U* diag(λ) U` with eigenvalues in descending
/// order and the eigenvectors stored as the rows of `U`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T: Scalar> {
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `U* diag(f(λ)) U`, Hermitian as stored.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<T> {
        let u = &self.vectors;
        let mut scaled = u.adjoint();
        for k in 0..self.dim() {
            let fk = T::from_real(f(self.eigenvalues[k]));
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= fk);
        }
        hermitian_part(&(scaled * u))
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        self.map(|x| x)
    }
}

/// Spectral decomposition of a Hermitian matrix, validated.
pub fn eig_hermitian<T: Scalar>(a: &DMatrix<T>) -> Result<SpectralDecomposition<T>> {
    check_hermitian(a)?;
    Ok(eig_trusted(a))
}

/// Spectral decomposition of a matrix already known to be Hermitian.
pub(crate) fn eig_trusted<T: Scalar>(a: &DMatrix<T>) -> SpectralDecomposition<T> {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (row, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        // Sign convention: first non-negligible coordinate is real positive.
        let pivot = col
            .iter()
            .copied()
            .find(|z| z.modulus() > 1e-10)
            .unwrap_or_else(T::one);
        let phase = pivot.conjugate() / T::from_real(pivot.modulus());
        for (c, z) in col.iter().enumerate() {
            // Row of U is the conjugate transpose of the eigenvector.
            vectors[(row, c)] = (*z * phase).conjugate();
        }
    }
    SpectralDecomposition {
        eigenvalues,
        vectors,
    }
}

/// Hermitian positive semi-definite matrix, stored exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix<T: Scalar> {
    inner: DMatrix<T>,
}

impl<T: Scalar> PsdMatrix<T> {
    /// Validates Hermitian symmetry and positive semi-definiteness.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        check_hermitian(&m)?;
        let spec = eig_trusted(&m);
        let tolerance = eps_psd(spec.lambda_max());
        if spec.lambda_min() < -tolerance {
            return Err(BwError::NotPsd {
                min_eigenvalue: spec.lambda_min(),
                tolerance,
            });
        }
        Ok(Self::from_hermitian(m))
    }

    /// Wraps a matrix known to be PSD up to roundoff; only symmetrizes.
    pub(crate) fn from_hermitian(m: DMatrix<T>) -> Self {
        let exact = (0..m.nrows()).all(|i| {
            (i..m.ncols()).all(|j| m[(i, j)] == m[(j, i)].conjugate())
        });
        if exact {
            Self { inner: m }
        } else {
            Self {
                inner: hermitian_part(&m),
            }
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            inner: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            inner: DMatrix::zeros(d, d),
        }
    }

    /// Diagonal matrix; fails on negative entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if let Some(&bad) = diag.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(BwError::NotPsd {
                min_eigenvalue: bad,
                tolerance: 0.0,
            });
        }
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| T::from_real(x)));
        Ok(Self {
            inner: DMatrix::from_diagonal(&v),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn mode(&self) -> Mode {
        T::MODE
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.inner)
    }

    pub fn spectrum(&self) -> SpectralDecomposition<T> {
        eig_trusted(&self.inner)
    }

    /// `λ_min > eps_pd(λ_max)`.
    pub fn is_positive_definite(&self) -> bool {
        let s = self.spectrum();
        s.lambda_max() > 0.0 && s.lambda_min() > eps_pd(s.lambda_max())
    }

    /// Multiplies by a nonnegative scalar.
    pub fn scaled(&self, a: f64) -> Self {
        assert!(a >= 0.0, "PSD matrices can only be scaled by a >= 0");
        Self {
            inner: self.inner.map(|x| x * T::from_real(a)),
        }
    }

    /// `W A W*`, PSD for any W.
    pub fn congruence(&self, w: &DMatrix<T>) -> Self {
        Self::from_hermitian(hermitian_part(&(w * &self.inner * w.adjoint())))
    }
}

impl<T: Scalar> AsRef<DMatrix<T>> for PsdMatrix<T> {
    fn as_ref(&self) -> &DMatrix<T> {
        &self.inner
    }
}

/// Spectral decomposition of a PSD matrix with tolerance-clamped eigenvalues.
pub(crate) fn psd_spectrum<T: Scalar>(a: &DMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let mut spec = eig_trusted(a);
    let tolerance = eps_psd(spec.lambda_max());
    if spec.lambda_min() < -tolerance {
        return Err(BwError::NotPsd {
            min_eigenvalue: spec.lambda_min(),
            tolerance,
        });
    }
    spec.eigenvalues.apply(|x| *x = x.max(0.0));
    Ok(spec)
}

/// Spectral decomposition of a strictly positive definite matrix.
pub(crate) fn pd_spectrum<T: Scalar>(a: &DMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let spec = eig_trusted(a);
    let threshold = eps_pd(spec.lambda_max());
    if !(spec.lambda_max() > 0.0) || spec.lambda_min() <= threshold {
        return Err(BwError::Singular {
            min_eigenvalue: spec.lambda_min(),
            threshold,
        });
    }
    Ok(spec)
}

/// Principal square root `A^{1/2}`.
pub fn sqrt_psd<T: Scalar>(a: &PsdMatrix<T>) -> Result<PsdMatrix<T>> {
    let spec = psd_spectrum(a.as_matrix())?;
    Ok(PsdMatrix::from_hermitian(spec.map(f64::sqrt)))
}

/// Pseudo-inverse square root `(A^{1/2})⁺`; eigenvalues at or below
/// `rank_tol·λ_max` are treated as zero.
pub fn pinv_sqrt_psd<T: Scalar>(a: &PsdMatrix<T>, rank_tol: f64) -> Result<DMatrix<T>> {
    let spec = psd_spectrum(a.as_matrix())?;
    Ok(pinv_sqrt_from(&spec, rank_tol))
}

pub(crate) fn pinv_sqrt_from<T: Scalar>(spec: &SpectralDecomposition<T>, rank_tol: f64) -> DMatrix<T> {
    let cut = rank_tol * spec.lambda_max();
    spec.map(|x| if x > cut && x > 0.0 { 1.0 / x.sqrt() } else { 0.0 })
}

/// Differential of `Q ↦ Q^{1/2}` at `Q ≻ 0` applied to `X`.
pub fn sqrt_differential<T: Scalar>(q: &PsdMatrix<T>, x: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_dims(q.dim(), x.nrows())?;
    check_hermitian(x)?;
    let spec = pd_spectrum(q.as_matrix())?;
    let u = &spec.vectors;
    let mut inner = u * x * u.adjoint();
    let roots: Vec<f64> = spec.eigenvalues.iter().map(|l| l.sqrt()).collect();
    for i in 0..q.dim() {
        for j in 0..q.dim() {
            inner[(i, j)] /= T::from_real(roots[i] + roots[j]);
        }
    }
    Ok(hermitian_part(&(u.adjoint() * inner * u)))
}

/// Which standard subspace to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// All Hermitian matrices.
    Full,
    /// Trace-zero Hermitian matrices, anchored at `I/d`.
    Traceless,
}

impl std::str::FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(BasisKind::Full),
            "traceless" => Ok(BasisKind::Traceless),
            other => Err(format!("unknown basis `{other}` (expected full|traceless)")),
        }
    }
}

/// Frobenius-orthonormal basis of a subspace `M` of Hermitian matrices,
/// optionally anchored at `Q₀` to describe the affine set `Q₀ + M`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis<T: Scalar> {
    dim: usize,
    elements: Vec<DMatrix<T>>,
    anchor: Option<PsdMatrix<T>>,
}

const ORTHONORMAL_TOL: f64 = 1e-12;

impl<T: Scalar> SubspaceBasis<T> {
    /// Validates orthonormality and Hermitian symmetry of `elements`.
    pub fn new(dim: usize, elements: Vec<DMatrix<T>>, anchor: Option<PsdMatrix<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(BwError::Validation("ambient dimension must be >= 1".into()));
        }
        let max = T::MODE.hermitian_dim(dim);
        if elements.len() > max {
            return Err(BwError::Validation(format!(
                "{} basis elements exceed the dimension {max} of H({dim})",
                elements.len()
            )));
        }
        for (k, b) in elements.iter().enumerate() {
            check_dims(dim, b.nrows()).map_err(|e| e.in_matrix(k))?;
            check_hermitian(b).map_err(|e| e.in_matrix(k))?;
        }
        for k in 0..elements.len() {
            for l in k..elements.len() {
                let g = inner(&elements[k], &elements[l]);
                let target = if k == l { 1.0 } else { 0.0 };
                if (g - target).abs() > ORTHONORMAL_TOL {
                    return Err(BwError::Validation(format!(
                        "basis not orthonormal: <B_{k}, B_{l}> = {g:.3e}"
                    )));
                }
            }
        }
        if let Some(a) = &anchor {
            check_dims(dim, a.dim())?;
        }
        let elements = elements.iter().map(hermitian_part).collect();
        Ok(Self {
            dim,
            elements,
            anchor,
        })
    }

    /// Orthonormalizes a spanning set (modified Gram-Schmidt, two passes);
    /// generators that are numerically dependent are dropped.
    pub fn from_spanning(dim: usize, generators: &[DMatrix<T>], anchor: Option<PsdMatrix<T>>) -> Result<Self> {
        let mut out: Vec<DMatrix<T>> = Vec::new();
        for (k, g) in generators.iter().enumerate() {
            check_dims(dim, g.nrows()).map_err(|e| e.in_matrix(k))?;
            check_hermitian(g).map_err(|e| e.in_matrix(k))?;
            let scale = frobenius(g);
            let mut v = hermitian_part(g);
            for _ in 0..2 {
                for b in &out {
                    let c = inner(b, &v);
                    v -= b * T::from_real(c);
                }
            }
            let norm = frobenius(&v);
            if norm > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                out.push(hermitian_part(&(v / T::from_real(norm))));
            }
        }
        Self::new(dim, out, anchor)
    }

    /// Canonical bases of `H(d)` or its trace-zero subspace.
    pub fn standard(d: usize, kind: BasisKind) -> Result<Self> {
        if d == 0 {
            return Err(BwError::Validation("dimension must be >= 1".into()));
        }
        let mut elements = Vec::new();
        match kind {
            BasisKind::Full => {
                for i in 0..d {
                    let mut e = DMatrix::<T>::zeros(d, d);
                    e[(i, i)] = T::one();
                    elements.push(e);
                }
            }
            BasisKind::Traceless => {
                if d < 2 {
                    return Err(BwError::Validation(
                        "traceless basis requires d >= 2".into(),
                    ));
                }
                // Helmert vectors: orthonormal basis of {v : Σ v = 0}.
                for k in 1..d {
                    let norm = ((k * (k + 1)) as f64).sqrt();
                    let mut e = DMatrix::<T>::zeros(d, d);
                    for i in 0..k {
                        e[(i, i)] = T::from_real(1.0 / norm);
                    }
                    e[(k, k)] = T::from_real(-(k as f64) / norm);
                    elements.push(e);
                }
            }
        }
        let h = T::from_real(std::f64::consts::FRAC_1_SQRT_2);
        for i in 0..d {
            for j in (i + 1)..d {
                let mut e = DMatrix::<T>::zeros(d, d);
                e[(i, j)] = h;
                e[(j, i)] = h;
                elements.push(e);
                if let Some(iu) = T::imaginary_unit() {
                    let mut e = DMatrix::<T>::zeros(d, d);
                    e[(i, j)] = -iu * h;
                    e[(j, i)] = iu * h;
                    elements.push(e);
                }
            }
        }
        let anchor = match kind {
            BasisKind::Full => None,
            BasisKind::Traceless => Some(PsdMatrix::identity(d).scaled(1.0 / d as f64)),
        };
        Ok(Self {
            dim: d,
            elements,
            anchor,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// m = dim(M).
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// True when `M` is all of `H(d)`.
    pub fn is_full(&self) -> bool {
        self.len() == T::MODE.hermitian_dim(self.dim)
    }

    pub fn elements(&self) -> &[DMatrix<T>] {
        &self.elements
    }

    pub fn anchor(&self) -> Option<&PsdMatrix<T>> {
        self.anchor.as_ref()
    }

    pub fn with_anchor(mut self, anchor: PsdMatrix<T>) -> Result<Self> {
        check_dims(self.dim, anchor.dim())?;
        self.anchor = Some(anchor);
        Ok(self)
    }

    /// Coordinates `v_k = ⟨B_k, X⟩`.
    pub fn vectorize(&self, x: &DMatrix<T>) -> Result<DVector<f64>> {
        check_dims(self.dim, x.nrows())?;
        check_dims(self.dim, x.ncols())?;
        Ok(self.coords(x))
    }

    pub(crate) fn coords(&self, x: &DMatrix<T>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.elements.iter().map(|b| inner(b, x)))
    }

    /// `Σ_k v_k B_k`.
    pub fn devectorize(&self, v: &DVector<f64>) -> Result<DMatrix<T>> {
        check_dims(self.len(), v.len())?;
        let mut out = DMatrix::<T>::zeros(self.dim, self.dim);
        for (b, &c) in self.elements.iter().zip(v.iter()) {
            out += b * T::from_real(c);
        }
        Ok(out)
    }

    /// Orthogonal projection `Π_M X`.
    pub fn project(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        let v = self.vectorize(x)?;
        self.devectorize(&v)
    }

    /// Orthonormal basis of `W M W*` (anchor is dropped).
    pub fn congruence(&self, w: &DMatrix<T>) -> Result<Self> {
        check_dims(self.dim, w.nrows())?;
        let generators: Vec<_> = self
            .elements
            .iter()
            .map(|b| hermitian_part(&(w * b * w.adjoint())))
            .collect();
        Self::from_spanning(self.dim, &generators, None)
    }
}
