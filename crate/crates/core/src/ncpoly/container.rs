//! Persistence for matrix tuples and polynomials.
//!
//! Binary layout (all little-endian), one record per tuple, records
//! concatenated:
//!
//! ```text
//! b"NCMT" | u32 version = 1 | u64 n | u64 generator count
//! per generator: u16 factor | u32 index | n*n x (f64 re, f64 im), row-major
//! ```

use std::io::{self, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, GenId, MatrixTuple, NcError, Word};

const MAGIC: &[u8; 4] = b"NCMT";
const VERSION: u32 = 1;

pub fn write_tuples<W: Write>(mut out: W, tuples: &[MatrixTuple]) -> Result<(), NcError> {
    for t in tuples {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(t.dim() as u64).to_le_bytes())?;
        out.write_all(&(t.len() as u64).to_le_bytes())?;
        for (g, m) in t.iter() {
            out.write_all(&g.factor.to_le_bytes())?;
            out.write_all(&g.index.to_le_bytes())?;
            for i in 0..t.dim() {
                for j in 0..t.dim() {
                    let z = m[(i, j)];
                    out.write_all(&z.re.to_le_bytes())?;
                    out.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_exact_or_eof<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<bool, NcError> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(NcError::Container("truncated record header".into())),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

fn take<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N], NcError> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            NcError::Container("truncated record".into())
        } else {
            e.into()
        }
    })?;
    Ok(buf)
}

pub fn read_tuples<R: Read>(mut input: R) -> Result<Vec<MatrixTuple>, NcError> {
    let mut out = Vec::new();
    loop {
        let mut magic = [0u8; 4];
        if !read_exact_or_eof(&mut input, &mut magic)? {
            return Ok(out);
        }
        if &magic != MAGIC {
            return Err(NcError::Container("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut input)?);
        if version != VERSION {
            return Err(NcError::Container(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(take(&mut input)?) as usize;
        let count = u64::from_le_bytes(take(&mut input)?) as usize;
        if n == 0 {
            return Err(NcError::Container("zero dimension".into()));
        }
        let mut tuple = MatrixTuple::new(n);
        for _ in 0..count {
            let factor = u16::from_le_bytes(take(&mut input)?);
            let index = u32::from_le_bytes(take(&mut input)?);
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let re = f64::from_le_bytes(take(&mut input)?);
                    let im = f64::from_le_bytes(take(&mut input)?);
                    m[(i, j)] = Complex64::new(re, im);
                }
            }
            tuple.insert(GenId::new(factor, index), m)?;
        }
        out.push(tuple);
    }
}

/// JSON form of a tuple, meant for small `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleJson {
    pub dim: usize,
    pub entries: Vec<TupleJsonEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleJsonEntry {
    pub generator: GenId,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&MatrixTuple> for TupleJson {
    fn from(t: &MatrixTuple) -> Self {
        let n = t.dim();
        let rows = |f: fn(&Complex64) -> f64, m: &CMatrix| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        TupleJson {
            dim: n,
            entries: t
                .iter()
                .map(|(g, m)| TupleJsonEntry {
                    generator: g,
                    re: rows(|z| z.re, m),
                    im: rows(|z| z.im, m),
                })
                .collect(),
        }
    }
}

impl TryFrom<TupleJson> for MatrixTuple {
    type Error = NcError;

    fn try_from(j: TupleJson) -> Result<Self, NcError> {
        if j.dim == 0 {
            return Err(NcError::Container("zero dimension".into()));
        }
        let n = j.dim;
        let mut t = MatrixTuple::new(n);
        for e in j.entries {
            let shape_ok = e.re.len() == n
                && e.im.len() == n
                && e.re.iter().chain(&e.im).all(|r| r.len() == n);
            if !shape_ok {
                return Err(NcError::DimMismatch {
                    gen: e.generator,
                    expected: n,
                    found: e.re.len(),
                });
            }
            let m = CMatrix::from_fn(n, n, |i, k| Complex64::new(e.re[i][k], e.im[i][k]));
            t.insert(e.generator, m)?;
        }
        Ok(t)
    }
}

impl Serialize for MatrixTuple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TupleJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixTuple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = TupleJson::deserialize(d)?;
        MatrixTuple::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// One `(word, re, im)` entry of a serialized polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialRecord {
    pub word: Word,
    pub re: f64,
    pub im: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{NcPolynomial, parse_polynomial};

    fn sample_tuple(n: usize) -> MatrixTuple {
        let a = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new((i + j) as f64 * 0.25, i as f64 - j as f64)
        });
        let b = CMatrix::from_fn(n, n, |i, j| Complex64::new(((i * j) % 3) as f64, 0.0));
        MatrixTuple::new(n)
            .with(GenId::new(1, 0), a)
            .unwrap()
            .with(GenId::new(2, 7), b)
            .unwrap()
    }

    #[test]
    fn binary_container_round_trip() {
        let tuples = vec![sample_tuple(3), sample_tuple(1)];
        let mut buf = Vec::new();
        write_tuples(&mut buf, &tuples).unwrap();
        // header 24 bytes, per generator 6 + 16 n^2
        assert_eq!(buf.len(), (24 + 2 * (6 + 16 * 9)) + (24 + 2 * (6 + 16)));
        assert_eq!(&buf[..4], b"NCMT");
        let back = read_tuples(&buf[..]).unwrap();
        assert_eq!(back, tuples);
    }

    #[test]
    fn truncated_container_is_an_error() {
        let mut buf = Vec::new();
        write_tuples(&mut buf, &[sample_tuple(2)]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_tuples(&buf[..]), Err(NcError::Container(_))));
        assert!(matches!(read_tuples(&b"XXXX"[..]), Err(NcError::Container(_))));
    }

    #[test]
    fn json_round_trip() {
        let t = sample_tuple(2);
        let s = serde_json::to_string(&t).unwrap();
        let back: MatrixTuple = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn polynomial_serializes_as_records() {
        let p = parse_polynomial("3 f1.g0^2 - f2.g0 + 1").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"word\":\"f1.g0^2\""), "{s}");
        let back: NcPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
