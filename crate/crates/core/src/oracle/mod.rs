//! Exact moments of free products, with or without amalgamation over a
//! finite-dimensional abelian algebra.

mod dvector;
mod law;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::RwLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::models::AtomicAlgebra;
use crate::ncpoly::{GenId, NcPolynomial, Word};

pub use dvector::DVector;
pub use law::{
    base_moment, base_moment_at_atom, noncrossing_pairings, BaseLaw, DiscreteLaw, LawError,
    WEIGHT_SUM_TOL,
};

pub const DEFAULT_DEGREE_CAP: usize = 16;

/// Squared norms below zero but above this are clamped to zero.
pub const NEGATIVE_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("letter {letter} does not belong to factor {factor}")]
    ForeignLetter { letter: GenId, factor: u16 },
    #[error("generator {0} is not part of its factor's law")]
    UnknownGenerator(GenId),
    #[error("no law registered for factor {0}")]
    MissingFactorLaw(u16),
    #[error("word length {len} exceeds the degree cap {cap}")]
    DegreeLimitExceeded { len: usize, cap: usize },
    #[error("unsupported amalgam: {0}")]
    UnsupportedAmalgam(String),
    #[error("squared norm {0} is negative beyond tolerance")]
    NegativeNorm(f64),
    #[error("factor label 0 is reserved for the amalgam")]
    ReservedFactor,
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
struct Amalgam {
    weights: Vec<f64>,
}

/// The trace functional of a free product of base laws, possibly amalgamated
/// over an abelian atomic algebra (factor label 0, generator `j` being the
/// minimal projection `e_j`).
///
/// Queries are memoized; the caches are safe to share between threads.
#[derive(Debug)]
pub struct MomentOracle {
    factors: BTreeMap<u16, BaseLaw>,
    amalgam: Option<Amalgam>,
    degree_cap: usize,
    scalar_memo: RwLock<HashMap<Word, Complex64>>,
    d_memo: RwLock<HashMap<Word, DVector>>,
}

impl Clone for MomentOracle {
    fn clone(&self) -> Self {
        MomentOracle {
            factors: self.factors.clone(),
            amalgam: self.amalgam.clone(),
            degree_cap: self.degree_cap,
            scalar_memo: RwLock::new(HashMap::new()),
            d_memo: RwLock::new(HashMap::new()),
        }
    }
}

fn memo_get<V: Clone>(m: &RwLock<HashMap<Word, V>>, w: &Word) -> Option<V> {
    m.read().unwrap_or_else(|e| e.into_inner()).get(w).cloned()
}

fn memo_put<V>(m: &RwLock<HashMap<Word, V>>, w: &Word, v: V) {
    m.write()
        .unwrap_or_else(|e| e.into_inner())
        .entry(w.clone())
        .or_insert(v);
}

/// Blocks of `w` (maximal same-factor runs) and the word obtained by keeping
/// only the blocks in `mask`.
fn kept_blocks(blocks: &[Word], mask: u64) -> Word {
    Word::from_letters(
        blocks
            .iter()
            .enumerate()
            .filter(|(t, _)| mask >> t & 1 == 1)
            .flat_map(|(_, b)| b.letters().iter().copied()),
    )
}

fn split_blocks(w: &Word) -> (Vec<u16>, Vec<Word>) {
    w.factor_runs()
        .into_iter()
        .map(|(f, r)| (f, w.slice(r)))
        .unzip()
}

impl MomentOracle {
    /// Free product over the scalars.
    pub fn free_product<I>(factors: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = (u16, BaseLaw)>,
    {
        let factors: BTreeMap<u16, BaseLaw> = factors.into_iter().collect();
        for (&label, law) in &factors {
            if label == 0 {
                return Err(OracleError::ReservedFactor);
            }
            if matches!(law, BaseLaw::PerAtomDiscrete(_)) {
                return Err(OracleError::UnsupportedAmalgam(format!(
                    "factor {label} has per-atom laws but there is no amalgam"
                )));
            }
        }
        Ok(Self::build(factors, None))
    }

    /// Free product with amalgamation over an abelian `d`. Every factor must
    /// be of the form `D (x) A` with `A` generated by one discrete element.
    pub fn amalgamated<I>(d: &AtomicAlgebra, factors: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = (u16, BaseLaw)>,
    {
        if !d.is_abelian() {
            return Err(OracleError::UnsupportedAmalgam(
                "only abelian amalgams (all blocks of size 1) are supported".into(),
            ));
        }
        let atoms = d.num_blocks();
        let factors: BTreeMap<u16, BaseLaw> = factors.into_iter().collect();
        for (&label, law) in &factors {
            if label == 0 {
                return Err(OracleError::ReservedFactor);
            }
            match law {
                BaseLaw::Discrete(_) => {}
                BaseLaw::PerAtomDiscrete(laws) if laws.len() == atoms => {}
                BaseLaw::PerAtomDiscrete(laws) => {
                    return Err(OracleError::UnsupportedAmalgam(format!(
                        "factor {label} has {} per-atom laws, the amalgam has {atoms} atoms",
                        laws.len()
                    )));
                }
                _ => {
                    return Err(OracleError::UnsupportedAmalgam(format!(
                        "factor {label} is not of the form D (x) discrete"
                    )));
                }
            }
        }
        let weights = d.blocks().iter().map(|b| b.1).collect();
        Ok(Self::build(factors, Some(Amalgam { weights })))
    }

    fn build(factors: BTreeMap<u16, BaseLaw>, amalgam: Option<Amalgam>) -> Self {
        MomentOracle {
            factors,
            amalgam,
            degree_cap: DEFAULT_DEGREE_CAP,
            scalar_memo: RwLock::new(HashMap::new()),
            d_memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn factor_labels(&self) -> impl Iterator<Item = u16> + '_ {
        self.factors.keys().copied()
    }

    pub fn factor_law(&self, label: u16) -> Option<&BaseLaw> {
        self.factors.get(&label)
    }

    pub fn is_amalgamated(&self) -> bool {
        self.amalgam.is_some()
    }

    /// Atom weights of the amalgam, if any.
    pub fn amalgam_weights(&self) -> Option<&[f64]> {
        self.amalgam.as_ref().map(|a| a.weights.as_slice())
    }

    fn check_word(&self, w: &Word) -> Result<(), OracleError> {
        if w.len() > self.degree_cap {
            return Err(OracleError::DegreeLimitExceeded {
                len: w.len(),
                cap: self.degree_cap,
            });
        }
        for g in w.letters() {
            if g.factor == 0 {
                match &self.amalgam {
                    None => return Err(OracleError::MissingFactorLaw(0)),
                    Some(a) if g.index as usize >= a.weights.len() => {
                        return Err(OracleError::UnknownGenerator(*g));
                    }
                    Some(_) => {}
                }
            } else {
                let law = self
                    .factors
                    .get(&g.factor)
                    .ok_or(OracleError::MissingFactorLaw(g.factor))?;
                if g.index >= law.generator_count() {
                    return Err(OracleError::UnknownGenerator(*g));
                }
            }
        }
        Ok(())
    }

    /// `tau(w)` in a free product over the scalars.
    pub fn free_product_moment(&self, w: &Word) -> Result<Complex64, OracleError> {
        if self.amalgam.is_some() {
            return Err(OracleError::UnsupportedAmalgam(
                "use amalgamated_moment for an amalgamated oracle".into(),
            ));
        }
        self.check_word(w)?;
        self.scalar(w)
    }

    fn scalar(&self, w: &Word) -> Result<Complex64, OracleError> {
        if w.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if let Some(v) = memo_get(&self.scalar_memo, w) {
            return Ok(v);
        }
        let (labels, blocks) = split_blocks(w);
        let value = if blocks.len() == 1 {
            base_moment(&self.factors[&labels[0]], labels[0], w)?
        } else {
            let taus = blocks
                .iter()
                .zip(&labels)
                .map(|(b, f)| base_moment(&self.factors[f], *f, b))
                .collect::<Result<Vec<_>, _>>()?;
            // tau(prod (b_t - tau_t)) = 0; expand and solve for tau(w).
            let m = blocks.len();
            let full = (1u64 << m) - 1;
            let mut sum = Complex64::new(0.0, 0.0);
            for mask in 0..full {
                let mut coef = Complex64::new(1.0, 0.0);
                for (t, tau) in taus.iter().enumerate() {
                    if mask >> t & 1 == 0 {
                        coef *= -tau;
                    }
                }
                if coef == Complex64::new(0.0, 0.0) {
                    continue;
                }
                sum += coef * self.scalar(&kept_blocks(&blocks, mask))?;
            }
            -sum
        };
        memo_put(&self.scalar_memo, w, value);
        Ok(value)
    }

    /// `E_D(w)` for an amalgamated oracle, one component per atom.
    pub fn amalgamated_moment(&self, w: &Word) -> Result<DVector, OracleError> {
        let atoms = match &self.amalgam {
            Some(a) => a.weights.len(),
            None => {
                return Err(OracleError::UnsupportedAmalgam(
                    "oracle has no amalgam".into(),
                ));
            }
        };
        self.check_word(w)?;
        // D is central in every factor, so projections factor out.
        let mut indicator = DVector::ones(atoms);
        let rest = Word::from_letters(w.letters().iter().copied().filter(|g| {
            if g.factor == 0 {
                indicator = indicator.mul(&DVector::indicator(atoms, g.index as usize));
                false
            } else {
                true
            }
        }));
        Ok(indicator.mul(&self.d_core(&rest, atoms)?))
    }

    fn d_block(&self, label: u16, b: &Word, atoms: usize) -> Result<DVector, OracleError> {
        let law = &self.factors[&label];
        (0..atoms)
            .map(|j| base_moment_at_atom(law, label, j, b))
            .collect::<Result<Vec<_>, _>>()
            .map(DVector::from)
    }

    fn d_core(&self, w: &Word, atoms: usize) -> Result<DVector, OracleError> {
        if w.is_empty() {
            return Ok(DVector::ones(atoms));
        }
        if let Some(v) = memo_get(&self.d_memo, w) {
            return Ok(v);
        }
        let (labels, blocks) = split_blocks(w);
        let value = if blocks.len() == 1 {
            self.d_block(labels[0], w, atoms)?
        } else {
            let taus = blocks
                .iter()
                .zip(&labels)
                .map(|(b, f)| self.d_block(*f, b, atoms))
                .collect::<Result<Vec<_>, _>>()?;
            let m = blocks.len();
            let full = (1u64 << m) - 1;
            let mut sum = DVector::zeros(atoms);
            for mask in 0..full {
                let mut coef = DVector::ones(atoms);
                for (t, tau) in taus.iter().enumerate() {
                    if mask >> t & 1 == 0 {
                        coef = coef.mul(&tau.neg());
                    }
                }
                if coef.is_zero() {
                    continue;
                }
                sum = sum.add(&coef.mul(&self.d_core(&kept_blocks(&blocks, mask), atoms)?));
            }
            sum.neg()
        };
        memo_put(&self.d_memo, w, value.clone());
        Ok(value)
    }

    /// The scalar trace of `w`, whichever kind of oracle this is.
    pub fn trace(&self, w: &Word) -> Result<Complex64, OracleError> {
        match &self.amalgam {
            None => self.free_product_moment(w),
            Some(a) => Ok(self.amalgamated_moment(w)?.weighted_sum(&a.weights)),
        }
    }

    pub fn trace_poly(&self, p: &NcPolynomial) -> Result<Complex64, OracleError> {
        let mut total = Complex64::new(0.0, 0.0);
        for (w, c) in p.terms() {
            total += c * self.trace(w)?;
        }
        Ok(total)
    }

    /// A new oracle in which each `(source, ghost)` pair adds a free copy of
    /// factor `source` under label `ghost`.
    pub fn with_ghosts(&self, pairs: &[(u16, u16)]) -> Result<Self, OracleError> {
        let mut out = self.clone();
        for &(source, ghost) in pairs {
            let law = self
                .factors
                .get(&source)
                .ok_or(OracleError::MissingFactorLaw(source))?
                .clone();
            if ghost == 0 || self.factors.contains_key(&ghost) {
                return Err(OracleError::UnsupportedAmalgam(format!(
                    "ghost label {ghost} is already in use"
                )));
            }
            out.factors.insert(ghost, law);
        }
        Ok(out)
    }

    fn other_factors(&self, p: &NcPolynomial, target: u16) -> Result<Vec<u16>, OracleError> {
        if !self.factors.contains_key(&target) {
            return Err(OracleError::MissingFactorLaw(target));
        }
        Ok(p.factors()
            .into_iter()
            .filter(|&f| f != target && f != 0)
            .collect())
    }

    /// `||E_{M_target}[p]||_2`, computed as
    /// `sqrt(tau(p(x, y)^* p(x, y~)))` where `y~` is a free copy of every
    /// non-target factor (free from the rest with amalgamation over the
    /// target factor).
    pub fn cond_exp_norm(&self, p: &NcPolynomial, target: u16) -> Result<f64, OracleError> {
        let others = self.other_factors(p, target)?;
        let mut next = self.factors.keys().max().copied().unwrap_or(0) + 1;
        let pairs: Vec<(u16, u16)> = others
            .iter()
            .map(|&f| {
                let ghost = next;
                next += 1;
                (f, ghost)
            })
            .collect();
        let tripled = self.with_ghosts(&pairs)?;
        let relabel: HashMap<u16, u16> = pairs.iter().copied().collect();
        let ghost_p = p.map_letters(|g| match relabel.get(&g.factor) {
            Some(&to) => GenId::new(to, g.index),
            None => g,
        });
        let q = &p.adjoint() * &ghost_p;
        let v = tripled.trace_poly(&q)?.re;
        if v < -NEGATIVE_NORM_TOL {
            return Err(OracleError::NegativeNorm(v));
        }
        Ok(v.max(0.0).sqrt())
    }

    /// `E_{M_target}[p]` as a polynomial in the target factor's generators.
    /// Free products over the scalars only.
    pub fn cond_exp_onto_factor(
        &self,
        p: &NcPolynomial,
        target: u16,
    ) -> Result<NcPolynomial, OracleError> {
        if self.amalgam.is_some() {
            return Err(OracleError::UnsupportedAmalgam(
                "projection onto a factor needs a scalar oracle".into(),
            ));
        }
        self.other_factors(p, target)?;
        let mut memo = HashMap::new();
        let mut out = NcPolynomial::zero();
        for (w, c) in p.terms() {
            self.check_word(w)?;
            let e = self.cond_exp_word(w, target, &mut memo)?;
            out = &out + &e.scale(*c);
        }
        Ok(out)
    }

    fn cond_exp_word(
        &self,
        w: &Word,
        target: u16,
        memo: &mut HashMap<Word, NcPolynomial>,
    ) -> Result<NcPolynomial, OracleError> {
        if w.is_empty() {
            return Ok(NcPolynomial::one());
        }
        if let Some(v) = memo.get(w) {
            return Ok(v.clone());
        }
        let (labels, blocks) = split_blocks(w);
        let value = if blocks.len() == 1 {
            if labels[0] == target {
                NcPolynomial::monomial(w.clone(), Complex64::new(1.0, 0.0))
            } else {
                NcPolynomial::constant(self.scalar(w)?)
            }
        } else {
            // An alternating product of at least two centered blocks is
            // orthogonal to L^2 of any single factor.
            let taus = blocks
                .iter()
                .map(|b| self.scalar(b))
                .collect::<Result<Vec<_>, _>>()?;
            let m = blocks.len();
            let full = (1u64 << m) - 1;
            let mut sum = NcPolynomial::zero();
            for mask in 0..full {
                let mut coef = Complex64::new(1.0, 0.0);
                for (t, tau) in taus.iter().enumerate() {
                    if mask >> t & 1 == 0 {
                        coef *= -tau;
                    }
                }
                if coef == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let sub = self.cond_exp_word(&kept_blocks(&blocks, mask), target, memo)?;
                sum = &sum + &sub.scale(coef);
            }
            -&sum
        };
        memo.insert(w.clone(), value.clone());
        Ok(value)
    }

    /// Writes `word,re,im` rows for every word over `generators` of length
    /// at most `max_len`, in shortlex order.
    pub fn export_moment_table<W: Write>(
        &self,
        out: W,
        generators: &BTreeSet<GenId>,
        max_len: usize,
    ) -> Result<(), OracleError> {
        let mut out = out;
        writeln!(out, "word,re,im")?;
        for w in all_words(generators, max_len) {
            let v = self.trace(&w)?;
            writeln!(out, "{w},{:e},{:e}", v.re, v.im)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// All words of length `<= max_len` over `generators`, shortlex.
pub fn all_words(generators: &BTreeSet<GenId>, max_len: usize) -> Vec<Word> {
    let gens: Vec<GenId> = generators.iter().copied().collect();
    let mut out = vec![Word::unit()];
    let mut layer = vec![Word::unit()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * gens.len());
        for w in &layer {
            for &g in &gens {
                next.push(w.concat(&Word::letter(g)));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::parse_polynomial;

    fn g(f: u16, i: u32) -> GenId {
        GenId::new(f, i)
    }

    fn two_semicirculars() -> MomentOracle {
        MomentOracle::free_product([
            (1, BaseLaw::SemicircularFamily { count: 1 }),
            (2, BaseLaw::SemicircularFamily { count: 1 }),
        ])
        .unwrap()
    }

    fn poly(s: &str) -> NcPolynomial {
        parse_polynomial(s).unwrap()
    }

    #[test]
    fn xy_factorizes() {
        let x = DiscreteLaw::new(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let y = DiscreteLaw::new(vec![(-1.0, 0.25), (2.0, 0.75)]).unwrap();
        let o = MomentOracle::free_product([
            (1, BaseLaw::Discrete(x.clone())),
            (2, BaseLaw::Discrete(y.clone())),
        ])
        .unwrap();
        let w = Word::from_letters([g(1, 0), g(2, 0)]);
        let v = o.free_product_moment(&w).unwrap();
        assert!((v.re - x.moment(1) * y.moment(1)).abs() < 1e-14);
    }

    #[test]
    fn sum_of_free_semicirculars() {
        let o = two_semicirculars();
        let v = o.trace_poly(&poly("f1.g0 + f2.g0").pow(4)).unwrap();
        assert!((v.re - 8.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn errors() {
        let o = two_semicirculars();
        assert!(matches!(
            o.free_product_moment(&Word::letter(g(3, 0))),
            Err(OracleError::MissingFactorLaw(3))
        ));
        let long = Word::from_letters(std::iter::repeat_n(g(1, 0), 18));
        assert!(matches!(
            o.free_product_moment(&long),
            Err(OracleError::DegreeLimitExceeded { len: 18, cap: 16 })
        ));
        let o = o.with_degree_cap(20);
        assert!((o.free_product_moment(&long).unwrap().re - 4862.0).abs() < 1e-9);
    }

    #[test]
    fn cond_exp_norm_examples() {
        let o = two_semicirculars();
        assert!((o.cond_exp_norm(&poly("f1.g0"), 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(o.cond_exp_norm(&poly("f1.g0 f2.g0"), 1).unwrap().abs() < 1e-12);
        let v = o.cond_exp_norm(&poly("f1.g0 f2.g0^2 f1.g0"), 1).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cond_exp_onto_factor_examples() {
        let o = two_semicirculars();
        assert!(o.cond_exp_onto_factor(&poly("f2.g0"), 1).unwrap().is_zero());
        assert_eq!(
            o.cond_exp_onto_factor(&poly("f1.g0 + f2.g0^2"), 1).unwrap(),
            poly("f1.g0 + 1")
        );
        assert_eq!(
            o.cond_exp_onto_factor(&poly("f1.g0 f2.g0^2 f1.g0"), 1).unwrap(),
            poly("f1.g0^2")
        );
    }

    #[test]
    fn amalgamated_examples() {
        let d = AtomicAlgebra::abelian(vec![0.5, 0.5]).unwrap();
        let pm = BaseLaw::Discrete(DiscreteLaw::symmetric_bernoulli());
        let o = MomentOracle::amalgamated(&d, [(1, pm.clone()), (2, pm)]).unwrap();
        let e1 = o.amalgamated_moment(&Word::letter(g(0, 1))).unwrap();
        assert_eq!(e1.as_slice(), &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(o.amalgamated_moment(&Word::letter(g(1, 0))).unwrap().is_zero());
        let alt = Word::from_letters([g(1, 0), g(2, 0), g(1, 0), g(2, 0)]);
        assert!(o.amalgamated_moment(&alt).unwrap().is_zero());
        assert_eq!(o.trace(&alt).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn amalgam_is_rejected_when_nonabelian() {
        let d = AtomicAlgebra::new(vec![(2, 1.0)]).unwrap();
        assert!(matches!(
            MomentOracle::amalgamated(&d, []),
            Err(OracleError::UnsupportedAmalgam(_))
        ));
        let pm = BaseLaw::Discrete(DiscreteLaw::symmetric_bernoulli());
        let d = AtomicAlgebra::abelian(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            MomentOracle::amalgamated(&d, [(1, BaseLaw::SemicircularFamily { count: 1 })]),
            Err(OracleError::UnsupportedAmalgam(_))
        ));
        assert!(matches!(
            MomentOracle::amalgamated(&d, [(1, BaseLaw::PerAtomDiscrete(vec![]))]),
            Err(OracleError::UnsupportedAmalgam(_))
        ));
        assert!(MomentOracle::amalgamated(&d, [(1, pm)]).is_ok());
    }

    #[test]
    fn moment_table_csv() {
        let o = MomentOracle::free_product([(1, BaseLaw::SemicircularFamily { count: 1 })])
            .unwrap();
        let mut buf = Vec::new();
        o.export_moment_table(&mut buf, &[g(1, 0)].into_iter().collect(), 4)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "word,re,im");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[5], "f1.g0^4,2e0,0e0");
    }
}
