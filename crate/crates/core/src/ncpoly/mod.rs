//! Non-commutative *-polynomials over indexed self-adjoint generators.
//!
//! Generators are labelled by a [`GenId`] (factor, index). Factor `0` is
//! reserved for the amalgam `D`; factors `1..` are the free factors. Every
//! generator is self-adjoint, so the adjoint of a word is its reversal.

mod container;
mod matrix;
mod parse;

pub use container::{read_tuples, write_tuples, PolynomialRecord, TupleJson};
pub use matrix::{
    hs_norm2, matmul, matmul_adj_right, normalized_trace, op_norm, op_norm_dense, symmetrize,
    trace_of_product, unitary_conjugate, CMatrix, MatrixTuple, WordEvaluator, HERMITIAN_TOL,
};
pub use parse::parse_polynomial;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NcError {
    #[error("no matrix supplied for generator {0}")]
    MissingGenerator(GenId),
    #[error("generator {gen} has a {found}x{found} matrix, tuple dimension is {expected}")]
    DimMismatch {
        gen: GenId,
        expected: usize,
        found: usize,
    },
    #[error("matrix for {0} is not square")]
    NotSquare(GenId),
    #[error("power iteration did not converge (best estimate {best})")]
    NoConvergence { best: f64 },
    #[error("polynomial parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("malformed tuple container: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A self-adjoint generator `t_i`, identified by its factor label and its
/// index inside the factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GenId {
    pub factor: u16,
    pub index: u32,
}

impl GenId {
    pub const fn new(factor: u16, index: u32) -> Self {
        GenId { factor, index }
    }
}

impl fmt::Display for GenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}.g{}", self.factor, self.index)
    }
}

/// A monomial `t_{i(1)} ... t_{i(l)}`. The empty word is the unit.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(SmallVec<[GenId; 8]>);

impl Word {
    pub fn unit() -> Self {
        Word(SmallVec::new())
    }

    pub fn letter(g: GenId) -> Self {
        Word(smallvec::smallvec![g])
    }

    pub fn from_letters<I: IntoIterator<Item = GenId>>(letters: I) -> Self {
        Word(letters.into_iter().collect())
    }

    pub fn letters(&self) -> &[GenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reversal; generators are self-adjoint.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        Word(out)
    }

    /// Cyclic rotation moving the first `k` letters to the end.
    pub fn rotate(&self, k: usize) -> Word {
        if self.0.is_empty() {
            return self.clone();
        }
        let k = k % self.0.len();
        Word(self.0[k..].iter().chain(&self.0[..k]).copied().collect())
    }

    pub fn map_letters(&self, mut f: impl FnMut(GenId) -> GenId) -> Word {
        Word(self.0.iter().map(|&g| f(g)).collect())
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Word {
        Word(self.0[range].iter().copied().collect())
    }

    /// Maximal runs of consecutive letters from the same factor, as
    /// `(factor, start..end)`.
    pub fn factor_runs(&self) -> Vec<(u16, std::ops::Range<usize>)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.0.len() {
            if i == self.0.len() || self.0[i].factor != self.0[start].factor {
                runs.push((self.0[start].factor, start..i));
                start = i;
            }
        }
        runs
    }
}

impl fmt::Display for Word {
    /// Grammar form, e.g. `f1.g0^2 f2.g0`; the unit renders as `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let mut i = 0;
        let mut first = true;
        while i < self.0.len() {
            let g = self.0[i];
            let mut j = i + 1;
            while j < self.0.len() && self.0[j] == g {
                j += 1;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if j - i > 1 {
                write!(f, "{}^{}", g, j - i)?;
            } else {
                write!(f, "{}", g)?;
            }
            i = j;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = NcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = parse_polynomial(s)?;
        let mut terms = p.terms();
        match (terms.next(), terms.next()) {
            (Some((w, c)), None) if *c == Complex64::new(1.0, 0.0) => Ok(w.clone()),
            (None, _) => Err(NcError::Parse {
                pos: 0,
                msg: "empty word string".into(),
            }),
            _ => Err(NcError::Parse {
                pos: 0,
                msg: format!("`{s}` is not a single monomial with coefficient 1"),
            }),
        }
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Finite linear combination of words with complex coefficients. Zero
/// coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NcPolynomial {
    terms: BTreeMap<Word, Complex64>,
}

impl NcPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(Word::unit(), c)
    }

    pub fn generator(g: GenId) -> Self {
        Self::monomial(Word::letter(g), Complex64::new(1.0, 0.0))
    }

    pub fn monomial(w: Word, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(w, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Word, Complex64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (w, c) in terms {
            p.add_term(w, c);
        }
        p
    }

    /// Adds `c * w`, collecting like terms.
    pub fn add_term(&mut self, w: Word, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let v = self.coefficient(&w) + c;
        if v == Complex64::new(0.0, 0.0) {
            self.terms.remove(&w);
        } else {
            self.terms.insert(w, v);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &Word) -> Complex64 {
        self.terms.get(w).copied().unwrap_or_default()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn generators(&self) -> BTreeSet<GenId> {
        self.terms
            .keys()
            .flat_map(|w| w.letters().iter().copied())
            .collect()
    }

    pub fn factors(&self) -> BTreeSet<u16> {
        self.generators().into_iter().map(|g| g.factor).collect()
    }

    /// Conjugates coefficients and reverses words.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (w.adjoint(), c.conj())))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, v)| (w.clone(), v * c)))
    }

    pub fn map_letters(&self, mut f: impl FnMut(GenId) -> GenId) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (w.map_letters(&mut f), *c)))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Renames every letter of factor `from` to factor `to`, keeping indices.
    pub fn relabel_factor(&self, from: u16, to: u16) -> Self {
        self.map_letters(|g| {
            if g.factor == from {
                GenId::new(to, g.index)
            } else {
                g
            }
        })
    }
}

impl fmt::Display for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            let integral = c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() < 1e15;
            if integral {
                let (sign, mag) = if c.re < 0.0 { ("-", -c.re) } else { ("+", c.re) };
                if i == 0 {
                    if sign == "-" {
                        f.write_str("-")?;
                    }
                } else {
                    write!(f, " {sign} ")?;
                }
                if w.is_empty() {
                    write!(f, "{mag}")?;
                } else if mag == 1.0 {
                    write!(f, "{w}")?;
                } else {
                    write!(f, "{mag} {w}")?;
                }
            } else {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "({}{:+}i)", c.re, c.im)?;
                if !w.is_empty() {
                    write!(f, " {w}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for NcPolynomial {
    type Err = NcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_polynomial(s)
    }
}

impl Serialize for NcPolynomial {
    /// Serialized as a list of `(word, re, im)` records.
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let records: Vec<PolynomialRecord> = self
            .terms
            .iter()
            .map(|(w, c)| PolynomialRecord {
                word: w.clone(),
                re: c.re,
                im: c.im,
            })
            .collect();
        records.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NcPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let records = Vec::<PolynomialRecord>::deserialize(d)?;
        Ok(Self::from_terms(
            records
                .into_iter()
                .map(|r| (r.word, Complex64::new(r.re, r.im))),
        ))
    }
}

impl Add for &NcPolynomial {
    type Output = NcPolynomial;
    fn add(self, rhs: &NcPolynomial) -> NcPolynomial {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), *c);
        }
        out
    }
}

impl Sub for &NcPolynomial {
    type Output = NcPolynomial;
    fn sub(self, rhs: &NcPolynomial) -> NcPolynomial {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), -c);
        }
        out
    }
}

impl Neg for &NcPolynomial {
    type Output = NcPolynomial;
    fn neg(self) -> NcPolynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Bilinear extension of word concatenation.
impl Mul for &NcPolynomial {
    type Output = NcPolynomial;
    fn mul(self, rhs: &NcPolynomial) -> NcPolynomial {
        let mut out = NcPolynomial::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &rhs.terms {
                out.add_term(w1.concat(w2), c1 * c2);
            }
        }
        out
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for NcPolynomial {
            type Output = NcPolynomial;
            fn $m(self, rhs: NcPolynomial) -> NcPolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

/// Operator-norm bounds `R_i` for generators.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    bounds: BTreeMap<GenId, f64>,
}

impl NormBounds {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `r` is not strictly positive.
    pub fn insert(&mut self, g: GenId, r: f64) {
        assert!(r > 0.0 && r.is_finite(), "norm bound for {g} must be positive, got {r}");
        self.bounds.insert(g, r);
    }

    pub fn get(&self, g: GenId) -> Option<f64> {
        self.bounds.get(&g).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GenId, f64)> + '_ {
        self.bounds.iter().map(|(g, r)| (*g, *r))
    }

    /// `prod_j R_{i(j)}`, the a priori bound on `|tr(w)|`.
    pub fn word_bound(&self, w: &Word) -> Option<f64> {
        w.letters().iter().map(|g| self.get(*g)).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: u32) -> NcPolynomial {
        NcPolynomial::generator(GenId::new(1, i))
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn concatenation_product() {
        let p = &t(1) * &t(2);
        assert_eq!(p.num_terms(), 1);
        let w = Word::from_letters([GenId::new(1, 1), GenId::new(1, 2)]);
        assert_eq!(p.coefficient(&w), c(1.0, 0.0));
    }

    #[test]
    fn unit_is_identity() {
        let p = &(&t(1) * &t(2)) + &t(3).scale(c(0.0, 2.0));
        assert_eq!(&p * &NcPolynomial::one(), p);
        assert_eq!(&NcPolynomial::one() * &p, p);
    }

    #[test]
    fn difference_of_squares_expands_to_four_terms() {
        let p = &(&t(1) + &t(2)) * &(&t(1) - &t(2));
        let w = |a: u32, b: u32| Word::from_letters([GenId::new(1, a), GenId::new(1, b)]);
        assert_eq!(p.num_terms(), 4);
        assert_eq!(p.coefficient(&w(1, 1)), c(1.0, 0.0));
        assert_eq!(p.coefficient(&w(1, 2)), c(-1.0, 0.0));
        assert_eq!(p.coefficient(&w(2, 1)), c(1.0, 0.0));
        assert_eq!(p.coefficient(&w(2, 2)), c(-1.0, 0.0));
    }

    #[test]
    fn adjoint_conjugates_and_reverses() {
        let p = (&t(1) * &t(2)).scale(c(0.0, 1.0));
        let q = p.adjoint();
        let w = Word::from_letters([GenId::new(1, 2), GenId::new(1, 1)]);
        assert_eq!(q.num_terms(), 1);
        assert_eq!(q.coefficient(&w), c(0.0, -1.0));
        assert_eq!(t(1).adjoint(), t(1));
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = &t(1) - &t(1);
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn word_display_uses_powers() {
        let w = Word::from_letters([
            GenId::new(1, 0),
            GenId::new(1, 0),
            GenId::new(2, 0),
            GenId::new(1, 0),
        ]);
        assert_eq!(w.to_string(), "f1.g0^2 f2.g0 f1.g0");
        assert_eq!(Word::unit().to_string(), "1");
    }

    #[test]
    fn factor_runs_merge_same_factor_letters() {
        let w = Word::from_letters([
            GenId::new(1, 0),
            GenId::new(1, 3),
            GenId::new(2, 0),
            GenId::new(1, 0),
        ]);
        let runs = w.factor_runs();
        assert_eq!(runs, vec![(1, 0..2), (2, 2..3), (1, 3..4)]);
        assert!(Word::unit().factor_runs().is_empty());
    }

    #[test]
    fn word_bound_multiplies_bounds() {
        let mut r = NormBounds::new();
        r.insert(GenId::new(1, 0), 2.0);
        r.insert(GenId::new(2, 0), 3.0);
        let w = Word::from_letters([GenId::new(1, 0), GenId::new(2, 0), GenId::new(1, 0)]);
        assert_eq!(r.word_bound(&w), Some(12.0));
        assert_eq!(r.word_bound(&Word::letter(GenId::new(3, 0))), None);
    }
}
