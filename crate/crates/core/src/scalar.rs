//! Scalar fields supported by the library: real-symmetric (`f64`) and
//! complex-Hermitian (`Complex64`) matrices.

use std::fmt::Write as _;

use nalgebra::ComplexField;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Storage mode of a matrix bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Real,
    Complex,
}

impl Mode {
    /// Real dimension of the space of d×d Hermitian matrices in this mode.
    pub fn hermitian_dim(self, d: usize) -> usize {
        match self {
            Mode::Real => d * (d + 1) / 2,
            Mode::Complex => d * d,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Real => "real",
            Mode::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Mode::Real),
            "complex" => Ok(Mode::Complex),
            other => Err(format!("unknown mode `{other}` (expected real|complex)")),
        }
    }
}

/// Entry type of a Hermitian matrix.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const MODE: Mode;

    /// Builds a scalar from real and imaginary parts; `None` if the
    /// imaginary part is nonzero in real mode.
    fn from_parts(re: f64, im: f64) -> Option<Self>;

    fn to_parts(self) -> (f64, f64);

    /// Hermitian off-diagonal generator `(E_jk - E_kj) * i` entry, if the field has one.
    fn imaginary_unit() -> Option<Self>;

    /// Shortest round-trip decimal token.
    fn write_token(self, out: &mut String);

    fn parse_token(token: &str) -> Option<Self>;
}

impl Scalar for f64 {
    const MODE: Mode = Mode::Real;

    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(re)
    }

    fn to_parts(self) -> (f64, f64) {
        (self, 0.0)
    }

    fn imaginary_unit() -> Option<Self> {
        None
    }

    fn write_token(self, out: &mut String) {
        let _ = write!(out, "{self:?}");
    }

    fn parse_token(token: &str) -> Option<Self> {
        token.parse().ok()
    }
}

impl Scalar for Complex64 {
    const MODE: Mode = Mode::Complex;

    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(Complex64::new(re, im))
    }

    fn to_parts(self) -> (f64, f64) {
        (self.re, self.im)
    }

    fn imaginary_unit() -> Option<Self> {
        Some(Complex64::i())
    }

    fn write_token(self, out: &mut String) {
        if self.im.is_sign_negative() {
            let _ = write!(out, "{:?}-{:?}i", self.re, -self.im);
        } else {
            let _ = write!(out, "{:?}+{:?}i", self.re, self.im);
        }
    }

    fn parse_token(token: &str) -> Option<Self> {
        let Some(body) = token.strip_suffix('i') else {
            return token.parse().ok().map(|re| Complex64::new(re, 0.0));
        };
        // Split at the last sign that is not a leading sign or an exponent sign.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
        let re: f64 = body[..split].parse().ok()?;
        let im: f64 = body[split..].parse().ok()?;
        Some(Complex64::new(re, im))
    }
}
