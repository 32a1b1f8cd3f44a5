//! Matrix bundle files.
//!
//! Text (`BWB v1`):
//!
//! ```text
//! BWB v1 <d> <real|complex> <n>
//! weights: w1 ... wn          (optional)
//! <n blocks of d rows with d entries each>
//! ```
//!
//! Complex entries are written `a+bi`. Values use the shortest decimal
//! representation that round-trips, so save followed by load is exact.
//!
//! Binary (`BWBB v1`, little-endian): magic `BWBB`, `u32` version, `u64` d,
//! `u8` mode (0 real, 1 complex), `u64` n, `u8` weight flag, optional `n`
//! weights, then entries row-major as `f64` (real, or re/im pairs).

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::barycenter::SampleSet;
use crate::error::{BwError, Result};
use crate::hermitian::{check_dims, PsdMatrix};
use crate::scalar::{Mode, Scalar};

const TEXT_MAGIC: &str = "BWB";
const BINARY_MAGIC: &[u8; 4] = b"BWBB";
const VERSION: &str = "v1";
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBundle<T: Scalar> {
    matrices: Vec<PsdMatrix<T>>,
    weights: Option<Vec<f64>>,
}

impl<T: Scalar> MatrixBundle<T> {
    pub fn new(matrices: Vec<PsdMatrix<T>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if let Some(first) = matrices.first() {
            for (k, m) in matrices.iter().enumerate() {
                check_dims(first.dim(), m.dim()).map_err(|e| e.in_matrix(k))?;
            }
        }
        if let Some(w) = &weights {
            check_weights(w, matrices.len())?;
        }
        Ok(Self { matrices, weights })
    }

    pub fn single(m: PsdMatrix<T>) -> Self {
        Self {
            matrices: vec![m],
            weights: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.dim())
    }

    pub fn mode(&self) -> Mode {
        T::MODE
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[PsdMatrix<T>] {
        &self.matrices
    }

    pub fn into_matrices(self) -> Vec<PsdMatrix<T>> {
        self.matrices
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn to_sample_set(&self) -> Result<SampleSet<T>> {
        match &self.weights {
            Some(w) => SampleSet::with_weights(self.matrices.clone(), w.clone()),
            None => SampleSet::new(self.matrices.clone()),
        }
    }

    /// First matrix of a single-matrix bundle.
    pub fn into_single(self) -> Result<PsdMatrix<T>> {
        if self.matrices.len() != 1 {
            return Err(BwError::Validation(format!(
                "expected a bundle with one matrix, found {}",
                self.matrices.len()
            )));
        }
        Ok(self.matrices.into_iter().next().expect("length checked"))
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(BwError::Validation(format!(
            "expected {n} weights, found {}",
            w.len()
        )));
    }
    if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(BwError::Validation(format!("invalid weight {bad}")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(BwError::Validation(format!(
            "weights must sum to 1, found sum {sum:.17}"
        )));
    }
    Ok(())
}

/// Bundle of either scalar field.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyBundle {
    Real(MatrixBundle<f64>),
    Complex(MatrixBundle<Complex64>),
}

impl AnyBundle {
    pub fn mode(&self) -> Mode {
        match self {
            AnyBundle::Real(_) => Mode::Real,
            AnyBundle::Complex(_) => Mode::Complex,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyBundle::Real(b) => b.dim(),
            AnyBundle::Complex(b) => b.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyBundle::Real(b) => b.len(),
            AnyBundle::Complex(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_real(self) -> Result<MatrixBundle<f64>> {
        match self {
            AnyBundle::Real(b) => Ok(b),
            AnyBundle::Complex(_) => Err(BwError::Validation("expected a real bundle".into())),
        }
    }

    pub fn into_complex(self) -> Result<MatrixBundle<Complex64>> {
        match self {
            AnyBundle::Complex(b) => Ok(b),
            AnyBundle::Real(_) => Err(BwError::Validation("expected a complex bundle".into())),
        }
    }
}

impl From<MatrixBundle<f64>> for AnyBundle {
    fn from(b: MatrixBundle<f64>) -> Self {
        AnyBundle::Real(b)
    }
}

impl From<MatrixBundle<Complex64>> for AnyBundle {
    fn from(b: MatrixBundle<Complex64>) -> Self {
        AnyBundle::Complex(b)
    }
}

/// Text serialization.
pub fn format_bundle<T: Scalar>(bundle: &MatrixBundle<T>) -> String {
    let d = bundle.dim();
    let mut out = format!(
        "{TEXT_MAGIC} {VERSION} {d} {} {}\n",
        T::MODE.as_str(),
        bundle.len()
    );
    if let Some(w) = bundle.weights() {
        out.push_str("weights:");
        for x in w {
            out.push(' ');
            x.write_token(&mut out);
        }
        out.push('\n');
    }
    for (k, m) in bundle.matrices().iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let a = m.as_matrix();
        for i in 0..d {
            for j in 0..d {
                if j > 0 {
                    out.push(' ');
                }
                a[(i, j)].write_token(&mut out);
            }
            out.push('\n');
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> BwError {
    BwError::Parse {
        line,
        message: message.into(),
    }
}

struct Header {
    d: usize,
    mode: Mode,
    n: usize,
}

fn parse_header(line_no: usize, line: &str) -> Result<Header> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    match tokens.as_slice() {
        [magic, version, d, mode, n] if *magic == TEXT_MAGIC => {
            if *version != VERSION {
                return Err(parse_err(line_no, format!("unsupported version `{version}`")));
            }
            let d = d
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("bad dimension `{d}`")))?;
            let mode = mode.parse::<Mode>().map_err(|e| parse_err(line_no, e))?;
            let n = n
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("bad count `{n}`")))?;
            if d == 0 {
                return Err(parse_err(line_no, "dimension must be >= 1"));
            }
            Ok(Header { d, mode, n })
        }
        _ => Err(parse_err(
            line_no,
            "expected header `BWB v1 <d> <real|complex> <n>`",
        )),
    }
}

fn parse_body<T: Scalar>(header: &Header, lines: &mut dyn Iterator<Item = (usize, &str)>) -> Result<MatrixBundle<T>> {
    let d = header.d;
    let mut weights = None;
    let mut pending: Option<(usize, &str)> = None;
    if let Some((no, line)) = lines.next() {
        if let Some(rest) = line.trim_start().strip_prefix("weights:") {
            let mut w = Vec::new();
            for tok in rest.split_whitespace() {
                w.push(
                    tok.parse::<f64>()
                        .map_err(|_| parse_err(no, format!("bad weight `{tok}`")))?,
                );
            }
            weights = Some(w);
        } else {
            pending = Some((no, line));
        }
    }
    let mut rows = pending.into_iter().chain(lines);
    let mut raw = Vec::with_capacity(header.n);
    for k in 0..header.n {
        let mut m = DMatrix::<T>::zeros(d, d);
        for i in 0..d {
            let (no, line) = rows.next().ok_or_else(|| {
                parse_err(0, format!("unexpected end of file in matrix {k}, row {i}"))
            })?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != d {
                return Err(parse_err(no, format!("expected {d} entries, found {}", tokens.len())));
            }
            for (j, tok) in tokens.iter().enumerate() {
                m[(i, j)] = T::parse_token(tok).ok_or_else(|| {
                    parse_err(no, format!("bad {} entry `{tok}`", T::MODE.as_str()))
                })?;
            }
        }
        raw.push(m);
    }
    if let Some((no, _)) = rows.next() {
        return Err(parse_err(no, "unexpected content after the last matrix"));
    }
    let mut matrices = Vec::with_capacity(raw.len());
    for (k, m) in raw.into_iter().enumerate() {
        matrices.push(PsdMatrix::new(m).map_err(|e| e.in_matrix(k))?);
    }
    MatrixBundle::new(matrices, weights)
}

/// Parses the text format.
pub fn parse_bundle(text: &str) -> Result<AnyBundle> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (no, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = parse_header(no, first)?;
    Ok(match header.mode {
        Mode::Real => AnyBundle::Real(parse_body(&header, &mut lines)?),
        Mode::Complex => AnyBundle::Complex(parse_body(&header, &mut lines)?),
    })
}

/// Binary serialization.
pub fn encode_binary<T: Scalar>(bundle: &MatrixBundle<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    let write = |out: &mut Vec<u8>| -> std::io::Result<()> {
        out.write_u32::<LittleEndian>(1)?;
        out.write_u64::<LittleEndian>(bundle.dim() as u64)?;
        out.write_u8(match T::MODE {
            Mode::Real => 0,
            Mode::Complex => 1,
        })?;
        out.write_u64::<LittleEndian>(bundle.len() as u64)?;
        match bundle.weights() {
            Some(w) => {
                out.write_u8(1)?;
                for x in w {
                    out.write_f64::<LittleEndian>(*x)?;
                }
            }
            None => out.write_u8(0)?,
        }
        for m in bundle.matrices() {
            let a = m.as_matrix();
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    let (re, im) = a[(i, j)].to_parts();
                    out.write_f64::<LittleEndian>(re)?;
                    if T::MODE == Mode::Complex {
                        out.write_f64::<LittleEndian>(im)?;
                    }
                }
            }
        }
        Ok(())
    };
    write(&mut out).expect("writing to a Vec cannot fail");
    out
}

fn decode_body<T: Scalar>(cur: &mut Cursor<&[u8]>, d: usize, n: usize) -> Result<MatrixBundle<T>> {
    let weights = match cur.read_u8()? {
        0 => None,
        1 => {
            let mut w = Vec::with_capacity(n);
            for _ in 0..n {
                w.push(cur.read_f64::<LittleEndian>()?);
            }
            Some(w)
        }
        flag => return Err(BwError::Validation(format!("bad weight flag {flag}"))),
    };
    let mut matrices = Vec::with_capacity(n);
    for k in 0..n {
        let mut m = DMatrix::<T>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let re = cur.read_f64::<LittleEndian>()?;
                let im = if T::MODE == Mode::Complex {
                    cur.read_f64::<LittleEndian>()?
                } else {
                    0.0
                };
                m[(i, j)] = T::from_parts(re, im).expect("imaginary part is zero in real mode");
            }
        }
        matrices.push(PsdMatrix::new(m).map_err(|e| e.in_matrix(k))?);
    }
    let mut rest = Vec::new();
    cur.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(BwError::Validation(format!(
            "{} trailing bytes after the last matrix",
            rest.len()
        )));
    }
    MatrixBundle::new(matrices, weights)
}

/// Parses the binary format.
pub fn decode_binary(bytes: &[u8]) -> Result<AnyBundle> {
    if bytes.len() < 4 || &bytes[..4] != BINARY_MAGIC {
        return Err(BwError::Validation("missing BWBB magic".into()));
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let version = cur.read_u32::<LittleEndian>()?;
    if version != 1 {
        return Err(BwError::Validation(format!("unsupported BWBB version {version}")));
    }
    let d = cur.read_u64::<LittleEndian>()? as usize;
    let mode = cur.read_u8()?;
    let n = cur.read_u64::<LittleEndian>()? as usize;
    if d == 0 {
        return Err(BwError::Validation("dimension must be >= 1".into()));
    }
    match mode {
        0 => Ok(AnyBundle::Real(decode_body(&mut cur, d, n)?)),
        1 => Ok(AnyBundle::Complex(decode_body(&mut cur, d, n)?)),
        other => Err(BwError::Validation(format!("bad mode byte {other}"))),
    }
}

/// Loads either format, detected from the leading magic bytes.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<AnyBundle> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| parse_err(1, format!("invalid UTF-8: {e}")))?;
        parse_bundle(text)
    }
}

/// Writes the text format.
pub fn save_bundle<T: Scalar>(bundle: &MatrixBundle<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_bundle(bundle).as_bytes())?;
    Ok(())
}

/// Writes the binary format.
pub fn save_bundle_binary<T: Scalar>(bundle: &MatrixBundle<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_binary(bundle))?;
    Ok(())
}
