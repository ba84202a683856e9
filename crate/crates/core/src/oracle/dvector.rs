use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A value in an abelian atomic algebra: one complex number per atom.
/// Multiplication is pointwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DVector(Vec<Complex64>);

impl DVector {
    pub fn zeros(atoms: usize) -> Self {
        DVector(vec![Complex64::new(0.0, 0.0); atoms])
    }

    pub fn ones(atoms: usize) -> Self {
        DVector(vec![Complex64::new(1.0, 0.0); atoms])
    }

    /// The minimal projection `e_j`.
    pub fn indicator(atoms: usize, j: usize) -> Self {
        let mut v = Self::zeros(atoms);
        v.0[j] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    pub fn mul(&self, other: &DVector) -> DVector {
        assert_eq!(self.len(), other.len());
        DVector(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn add(&self, other: &DVector) -> DVector {
        assert_eq!(self.len(), other.len());
        DVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> DVector {
        DVector(self.0.iter().map(|a| -a).collect())
    }

    /// `sum_j weights[j] * self[j]`, the trace `tau_D`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Complex64 {
        assert_eq!(self.len(), weights.len());
        self.0.iter().zip(weights).map(|(a, w)| a * w).sum()
    }
}

impl From<Vec<Complex64>> for DVector {
    fn from(v: Vec<Complex64>) -> Self {
        DVector(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_arithmetic() {
        let a = DVector::from(vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)]);
        let b = DVector::indicator(2, 1);
        assert_eq!(a.mul(&b).as_slice()[0], Complex64::new(0.0, 0.0));
        assert_eq!(a.mul(&b).as_slice()[1], Complex64::new(0.0, 1.0));
        assert_eq!(a.add(&a.neg()), DVector::zeros(2));
        assert_eq!(a.weighted_sum(&[0.5, 0.5]), Complex64::new(1.0, 0.5));
    }
}
