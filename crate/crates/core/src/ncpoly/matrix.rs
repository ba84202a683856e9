use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{GenId, NcError, NcPolynomial, Word};

pub type CMatrix = DMatrix<Complex64>;

/// Max-entry deviation from Hermitian symmetry tolerated on ingestion.
pub const HERMITIAN_TOL: f64 = 1e-10;

const POWER_MAX_ITER: usize = 20_000;

fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    re.zip_map(im, Complex64::new)
}

/// Complex product through four real GEMMs; nalgebra only dispatches the
/// real types to the blocked kernel. Diagonal factors are applied by
/// scaling instead.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    if b.is_square() && is_diagonal(b) {
        let mut out = a.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= b[(j, j)];
        }
        return out;
    }
    if a.is_square() && is_diagonal(a) {
        let mut out = b.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= a[(i, i)];
        }
        return out;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut re = &ar * &br;
    re.gemm(-1.0, &ai, &bi, 1.0);
    let mut im = &ar * &bi;
    im.gemm(1.0, &ai, &br, 1.0);
    join(&re, &im)
}

/// `a * b^†`.
pub fn matmul_adj_right(a: &CMatrix, b: &CMatrix) -> CMatrix {
    matmul(a, &b.adjoint())
}

fn is_diagonal(m: &CMatrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(k, z)| k % m.nrows() == k / m.nrows() || *z == Complex64::new(0.0, 0.0))
}

/// `u x u^†`, using a single GEMM when `x` is diagonal.
pub fn unitary_conjugate(u: &CMatrix, x: &CMatrix) -> CMatrix {
    let out = matmul_adj_right(&matmul(u, x), u);
    symmetrize(&out).0
}

/// `tau_n = (1/n) Tr`.
pub fn normalized_trace(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    m.diagonal().iter().sum::<Complex64>() / n as f64
}

/// `tau_n(a b)` in O(n^2).
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        let acol = a.column(j);
        let brow = b.row(j);
        for i in 0..n {
            acc += acol[i] * brow[i];
        }
    }
    acc / n as f64
}

/// Normalized Hilbert-Schmidt norm `tau(M^† M)^{1/2}`.
pub fn hs_norm2(m: &CMatrix) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    (m.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt()
}

/// `(M + M^†)/2` and the largest entry that symmetrization changed.
pub fn symmetrize(m: &CMatrix) -> (CMatrix, f64) {
    let adj = m.adjoint();
    let herm = (m + &adj).map(|z| z * 0.5);
    let correction = m
        .iter()
        .zip(herm.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    (herm, correction)
}

fn start_vector(attempt: usize, n: usize) -> DVector<Complex64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let v = match attempt {
        0 => DVector::from_element(n, Complex64::new(1.0, 0.0)),
        1 => DVector::from_fn(n, |i, _| {
            let phase = (i as f64 * GOLDEN).fract() * std::f64::consts::TAU;
            Complex64::from_polar(1.0, phase)
        }),
        _ => DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * (i + attempt) as f64, 0.0)
        }),
    };
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Largest singular value by power iteration on `M^† M`.
///
/// Starts from a fixed schedule of three vectors (constant, golden-ratio
/// phases, alternating ramp) and stops once successive Rayleigh quotients
/// agree to relative tolerance `tol`. The estimate never exceeds the true
/// norm.
pub fn op_norm(m: &CMatrix, tol: f64) -> Result<f64, NcError> {
    assert!(tol > 0.0, "op_norm tolerance must be positive");
    if m.is_empty() || m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let adj = m.adjoint();
    let mut best: f64 = 0.0;
    for attempt in 0..3 {
        let mut v = start_vector(attempt, m.ncols());
        let mut prev: Option<f64> = None;
        for _ in 0..POWER_MAX_ITER {
            let w = m * &v;
            let s2 = w.norm_squared();
            best = best.max(s2);
            if s2 == 0.0 {
                break;
            }
            if let Some(p) = prev {
                if (s2 - p).abs() <= tol * s2 {
                    return Ok(best.sqrt());
                }
            }
            prev = Some(s2);
            let next = &adj * &w;
            let norm = next.norm();
            if norm == 0.0 {
                break;
            }
            v = next / Complex64::new(norm, 0.0);
        }
    }
    Err(NcError::NoConvergence { best: best.sqrt() })
}

/// Largest singular value from a full SVD; the cross-check for `op_norm`.
pub fn op_norm_dense(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// An I-indexed tuple of `n x n` Hermitian matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    dim: usize,
    entries: BTreeMap<GenId, CMatrix>,
}

impl MatrixTuple {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "matrix tuples need a positive dimension");
        MatrixTuple {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Inserts `(M + M^†)/2`, warning when that changes an entry by more
    /// than [`HERMITIAN_TOL`].
    pub fn insert(&mut self, g: GenId, m: CMatrix) -> Result<(), NcError> {
        if m.nrows() != m.ncols() {
            return Err(NcError::NotSquare(g));
        }
        if m.nrows() != self.dim {
            return Err(NcError::DimMismatch {
                gen: g,
                expected: self.dim,
                found: m.nrows(),
            });
        }
        let (herm, correction) = symmetrize(&m);
        if correction > HERMITIAN_TOL {
            log::warn!("matrix for {g} was not Hermitian (max correction {correction:.3e})");
        }
        self.entries.insert(g, herm);
        Ok(())
    }

    pub fn with(mut self, g: GenId, m: CMatrix) -> Result<Self, NcError> {
        self.insert(g, m)?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, g: GenId) -> Option<&CMatrix> {
        self.entries.get(&g)
    }

    pub fn generators(&self) -> impl Iterator<Item = GenId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GenId, &CMatrix)> {
        self.entries.iter().map(|(g, m)| (*g, m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `p(A)`, the image of `p` under the evaluation *-homomorphism.
    pub fn evaluate(&self, p: &NcPolynomial) -> Result<CMatrix, NcError> {
        WordEvaluator::new(self).evaluate(p)
    }
}

/// Evaluates words on a fixed tuple, memoizing prefix products so that
/// batches of words sharing prefixes cost one GEMM per distinct prefix.
pub struct WordEvaluator<'a> {
    tuple: &'a MatrixTuple,
    products: HashMap<Word, CMatrix>,
    identity: CMatrix,
}

impl<'a> WordEvaluator<'a> {
    pub fn new(tuple: &'a MatrixTuple) -> Self {
        WordEvaluator {
            tuple,
            products: HashMap::new(),
            identity: CMatrix::identity(tuple.dim(), tuple.dim()),
        }
    }

    fn check(&self, w: &Word) -> Result<(), NcError> {
        for g in w.letters() {
            if self.tuple.get(*g).is_none() {
                return Err(NcError::MissingGenerator(*g));
            }
        }
        Ok(())
    }

    fn ensure(&mut self, w: &Word) {
        if w.len() < 2 || self.products.contains_key(w) {
            return;
        }
        let prefix = w.slice(0..w.len() - 1);
        self.ensure(&prefix);
        let last = w.letters()[w.len() - 1];
        let m = matmul(self.lookup(&prefix), &self.tuple.entries[&last]);
        self.products.insert(w.clone(), m);
    }

    fn lookup(&self, w: &Word) -> &CMatrix {
        match w.len() {
            0 => &self.identity,
            1 => &self.tuple.entries[&w.letters()[0]],
            _ => &self.products[w],
        }
    }

    /// The matrix `w(A)`.
    pub fn product(&mut self, w: &Word) -> Result<&CMatrix, NcError> {
        self.check(w)?;
        self.ensure(w);
        Ok(self.lookup(w))
    }

    /// `tau_n(w(A))`, splitting `w` into two halves and tracing their
    /// product in O(n^2).
    pub fn trace(&mut self, w: &Word) -> Result<Complex64, NcError> {
        self.check(w)?;
        match w.len() {
            0 => Ok(Complex64::new(1.0, 0.0)),
            1 => Ok(normalized_trace(self.lookup(w))),
            len => {
                let h = len.div_ceil(2);
                let left = w.slice(0..h);
                let right = w.slice(h..len);
                self.ensure(&left);
                self.ensure(&right);
                Ok(trace_of_product(self.lookup(&left), self.lookup(&right)))
            }
        }
    }

    pub fn trace_poly(&mut self, p: &NcPolynomial) -> Result<Complex64, NcError> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, c) in p.terms() {
            acc += c * self.trace(w)?;
        }
        Ok(acc)
    }

    pub fn evaluate(&mut self, p: &NcPolynomial) -> Result<CMatrix, NcError> {
        let n = self.tuple.dim();
        let mut out = CMatrix::zeros(n, n);
        for (w, c) in p.terms() {
            let m = self.product(w)?;
            out.zip_apply(m, |o, x| *o += c * x);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::GenId;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|v| c(*v)),
        ))
    }

    const G1: GenId = GenId::new(1, 0);
    const G2: GenId = GenId::new(1, 1);

    #[test]
    fn square_of_involution_is_identity() {
        let a = MatrixTuple::new(2).with(G1, diag(&[1.0, -1.0])).unwrap();
        let p = &NcPolynomial::generator(G1) * &NcPolynomial::generator(G1);
        assert_eq!(a.evaluate(&p).unwrap(), CMatrix::identity(2, 2));
    }

    #[test]
    fn unit_evaluates_to_identity() {
        let a = MatrixTuple::new(3).with(G1, diag(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(a.evaluate(&NcPolynomial::one()).unwrap(), CMatrix::identity(3, 3));
    }

    #[test]
    fn commutator_of_diagonals_vanishes() {
        let a = MatrixTuple::new(3)
            .with(G1, diag(&[1.0, 2.0, 3.0]))
            .unwrap()
            .with(G2, diag(&[-1.0, 0.5, 4.0]))
            .unwrap();
        let x = NcPolynomial::generator(G1);
        let y = NcPolynomial::generator(G2);
        let p = &(&x * &y) - &(&y * &x);
        assert_eq!(a.evaluate(&p).unwrap(), CMatrix::zeros(3, 3));
    }

    #[test]
    fn missing_generator_is_reported() {
        let a = MatrixTuple::new(2).with(G1, diag(&[1.0, 1.0])).unwrap();
        let err = a.evaluate(&NcPolynomial::generator(G2)).unwrap_err();
        assert!(matches!(err, NcError::MissingGenerator(g) if g == G2));
    }

    #[test]
    fn insert_rejects_wrong_dimension() {
        let mut a = MatrixTuple::new(2);
        assert!(matches!(
            a.insert(G1, diag(&[1.0, 2.0, 3.0])),
            Err(NcError::DimMismatch { expected: 2, found: 3, .. })
        ));
    }

    #[test]
    fn insert_symmetrizes() {
        let mut m = diag(&[1.0, 2.0]);
        m[(0, 1)] = Complex64::new(1.0, 1.0);
        let a = MatrixTuple::new(2).with(G1, m).unwrap();
        let stored = a.get(G1).unwrap();
        assert_eq!(stored[(0, 1)], Complex64::new(0.5, 0.5));
        assert_eq!(stored[(1, 0)], Complex64::new(0.5, -0.5));
    }

    #[test]
    fn trace_basics() {
        assert_eq!(normalized_trace(&CMatrix::identity(5, 5)), c(1.0));
        assert_eq!(normalized_trace(&diag(&[1.0, -1.0])), c(0.0));
    }

    #[test]
    fn hs_norm_basics() {
        assert_eq!(hs_norm2(&CMatrix::zeros(3, 3)), 0.0);
        assert_eq!(hs_norm2(&CMatrix::identity(4, 4)), 1.0);
        assert!((hs_norm2(&diag(&[3.0, 4.0])) - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn op_norm_of_diagonal() {
        let v = op_norm(&diag(&[2.0, -3.0]), 1e-12).unwrap();
        assert!((v - 3.0).abs() < 1e-9, "{v}");
        assert_eq!(op_norm(&CMatrix::zeros(4, 4), 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn op_norm_restarts_when_start_vector_is_in_kernel() {
        // constant start vector is annihilated
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0);
        m[(0, 1)] = c(-1.0);
        let v = op_norm(&m, 1e-12).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn evaluator_trace_matches_full_product() {
        let mut m1 = diag(&[1.0, 2.0, -1.0]);
        m1[(0, 2)] = Complex64::new(0.3, -0.2);
        m1[(2, 0)] = Complex64::new(0.3, 0.2);
        let mut m2 = diag(&[0.5, 0.0, 1.5]);
        m2[(1, 2)] = Complex64::new(0.0, 1.0);
        m2[(2, 1)] = Complex64::new(0.0, -1.0);
        let a = MatrixTuple::new(3).with(G1, m1).unwrap().with(G2, m2).unwrap();
        let w = Word::from_letters([G1, G2, G2, G1, G2]);
        let full = a.evaluate(&NcPolynomial::monomial(w.clone(), c(1.0))).unwrap();
        let mut ev = WordEvaluator::new(&a);
        let t = ev.trace(&w).unwrap();
        assert!((t - normalized_trace(&full)).norm() < 1e-13);
    }
}
