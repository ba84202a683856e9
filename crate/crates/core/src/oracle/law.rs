use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::OracleError;
use crate::ncpoly::{CMatrix, Word, matmul, normalized_trace};

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("a discrete law needs at least one atom")]
    Empty,
    #[error("atom {0} has a non-finite value")]
    NonFiniteValue(usize),
    #[error("atom {index} has weight {weight}; weights must be positive")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("weights sum to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
}

/// Tolerance on the total mass of a discrete law.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finitely supported probability measure on the real line: the law of a
/// self-adjoint element with finite spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteLaw {
    /// `(value, weight)`, sorted by value, values distinct.
    atoms: Vec<(f64, f64)>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, LawError> {
        if atoms.is_empty() {
            return Err(LawError::Empty);
        }
        for (i, &(v, w)) in atoms.iter().enumerate() {
            if !v.is_finite() {
                return Err(LawError::NonFiniteValue(i));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(LawError::NonPositiveWeight {
                    index: i,
                    weight: w,
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(LawError::NotNormalized(total));
        }
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (v, w) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        Ok(DiscreteLaw { atoms: merged })
    }

    /// The symmetric Bernoulli law `(delta_{-1} + delta_{+1})/2`.
    pub fn symmetric_bernoulli() -> Self {
        DiscreteLaw::new(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `sum_i w_i lambda_i^k`.
    pub fn moment(&self, k: usize) -> f64 {
        self.atoms.iter().map(|&(v, w)| w * v.powi(k as i32)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max)
    }

    /// Diagonal entries of the size-`n` quantile microstate: entry `i` is
    /// the smallest atom whose CDF reaches `(i + 1/2)/n`. Ascending.
    pub fn quantiles(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut atom = 0;
        let mut cdf = self.atoms[0].1;
        for i in 0..n {
            let level = (i as f64 + 0.5) / n as f64;
            while cdf < level && atom + 1 < self.atoms.len() {
                atom += 1;
                cdf += self.atoms[atom].1;
            }
            out.push(self.atoms[atom].0);
        }
        out
    }
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteLaw {
    type Error = LawError;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self, LawError> {
        DiscreteLaw::new(v)
    }
}

impl From<DiscreteLaw> for Vec<(f64, f64)> {
    fn from(l: DiscreteLaw) -> Self {
        l.atoms
    }
}

/// The law of one free factor.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseLaw {
    /// `count` free standard semicircular generators (indices `0..count`).
    SemicircularFamily { count: u32 },
    /// One generator (index 0) with finite spectrum.
    Discrete(DiscreteLaw),
    /// Amalgamated factors only: one generator (index 0) commuting with an
    /// abelian amalgam, with law `laws[j]` under the atom `e_j`.
    PerAtomDiscrete(Vec<DiscreteLaw>),
    /// Fixed Hermitian `r x r` matrices (indices in list order) under the
    /// normalized trace `tau_r`.
    MatrixBlock { generators: Vec<CMatrix> },
}

impl BaseLaw {
    pub fn generator_count(&self) -> u32 {
        match self {
            BaseLaw::SemicircularFamily { count } => *count,
            BaseLaw::Discrete(_) | BaseLaw::PerAtomDiscrete(_) => 1,
            BaseLaw::MatrixBlock { generators } => generators.len() as u32,
        }
    }
}

fn check_letters(law: &BaseLaw, factor: u16, w: &Word) -> Result<(), OracleError> {
    let count = law.generator_count();
    for g in w.letters() {
        if g.factor != factor {
            return Err(OracleError::ForeignLetter { letter: *g, factor });
        }
        if g.index >= count {
            return Err(OracleError::UnknownGenerator(*g));
        }
    }
    Ok(())
}

/// `tau(w)` for a word in the generators of a single factor labelled
/// `factor`.
///
/// Semicircular families count the noncrossing pair partitions that only
/// pair equal generators; discrete laws give `sum_i w_i lambda_i^len`.
/// [`BaseLaw::PerAtomDiscrete`] has no scalar trace and is rejected here; use
/// [`base_moment_at_atom`].
pub fn base_moment(law: &BaseLaw, factor: u16, w: &Word) -> Result<Complex64, OracleError> {
    check_letters(law, factor, w)?;
    if w.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(match law {
        BaseLaw::SemicircularFamily { .. } => {
            let idx: Vec<u32> = w.letters().iter().map(|g| g.index).collect();
            Complex64::new(noncrossing_pairings(&idx), 0.0)
        }
        BaseLaw::Discrete(d) => Complex64::new(d.moment(w.len()), 0.0),
        BaseLaw::PerAtomDiscrete(_) => {
            return Err(OracleError::UnsupportedAmalgam(
                "per-atom laws have no scalar trace without an amalgam".into(),
            ));
        }
        BaseLaw::MatrixBlock { generators } => {
            let mut prod = generators[w.letters()[0].index as usize].clone();
            for g in &w.letters()[1..] {
                prod = matmul(&prod, &generators[g.index as usize]);
            }
            normalized_trace(&prod)
        }
    })
}

/// `E_D(w)` restricted to atom `atom`, for a factor of the form `D (x) A`.
pub fn base_moment_at_atom(
    law: &BaseLaw,
    factor: u16,
    atom: usize,
    w: &Word,
) -> Result<Complex64, OracleError> {
    match law {
        BaseLaw::PerAtomDiscrete(laws) => {
            check_letters(law, factor, w)?;
            Ok(Complex64::new(laws[atom].moment(w.len()), 0.0))
        }
        other => base_moment(other, factor, w),
    }
}

/// Number of noncrossing pair partitions of the positions of `letters`
/// whose blocks join equal letters. Interval dynamic programme, O(len^3).
pub fn noncrossing_pairings(letters: &[u32]) -> f64 {
    let n = letters.len();
    if n % 2 == 1 {
        return 0.0;
    }
    // count[i][j]: pairings of letters[i..j]
    let mut count = vec![vec![0.0f64; n + 1]; n + 1];
    for (i, row) in count.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for len in (2..=n).step_by(2) {
        for i in 0..=n - len {
            let j = i + len;
            let mut total = 0.0;
            for k in (i + 1..j).step_by(2) {
                if letters[i] == letters[k] {
                    total += count[i + 1][k] * count[k + 1][j];
                }
            }
            count[i][j] = total;
        }
    }
    count[0][n]
}
