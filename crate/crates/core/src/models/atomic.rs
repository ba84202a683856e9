use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ncpoly::{matmul, normalized_trace, op_norm_dense, CMatrix};
use crate::oracle::WEIGHT_SUM_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBlock {
    /// Matrix size `r(j)`.
    pub size: usize,
    /// Trace weight `gamma(j)`.
    pub weight: f64,
}

/// `D = (+)_j M_{r(j)}` with trace `(+)_j gamma(j) tau_{r(j)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AtomBlock>", into = "Vec<AtomBlock>")]
pub struct AtomicAlgebra {
    blocks: Vec<AtomBlock>,
}

impl AtomicAlgebra {
    pub fn new(blocks: Vec<(usize, f64)>) -> Result<Self, ModelError> {
        Self::from_blocks(
            blocks
                .into_iter()
                .map(|(size, weight)| AtomBlock { size, weight })
                .collect(),
        )
    }

    fn from_blocks(blocks: Vec<AtomBlock>) -> Result<Self, ModelError> {
        if blocks.is_empty() {
            return Err(ModelError::InvalidAmalgam("no blocks".into()));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(ModelError::InvalidAmalgam(format!("block {j} has size 0")));
            }
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return Err(ModelError::InvalidAmalgam(format!(
                    "block {j} has weight {}",
                    b.weight
                )));
            }
        }
        let total: f64 = blocks.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ModelError::InvalidAmalgam(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(AtomicAlgebra { blocks })
    }

    /// `C^J` with the given weights.
    pub fn abelian(weights: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(weights.into_iter().map(|w| (1, w)).collect())
    }

    /// The scalars `C`.
    pub fn scalar() -> Self {
        AtomicAlgebra {
            blocks: vec![AtomBlock {
                size: 1,
                weight: 1.0,
            }],
        }
    }

    pub fn blocks(&self) -> Vec<(usize, f64)> {
        self.blocks.iter().map(|b| (b.size, b.weight)).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_abelian(&self) -> bool {
        self.blocks.iter().all(|b| b.size == 1)
    }

    pub fn is_scalar(&self) -> bool {
        self.blocks.len() == 1 && self.blocks[0].size == 1
    }

    /// `tau_D(z)`.
    pub fn trace(&self, z: &AtomicElement) -> Complex64 {
        self.blocks
            .iter()
            .zip(&z.blocks)
            .map(|(b, zj)| normalized_trace(zj) * b.weight)
            .sum()
    }
}

impl TryFrom<Vec<AtomBlock>> for AtomicAlgebra {
    type Error = ModelError;
    fn try_from(v: Vec<AtomBlock>) -> Result<Self, ModelError> {
        Self::from_blocks(v)
    }
}

impl From<AtomicAlgebra> for Vec<AtomBlock> {
    fn from(d: AtomicAlgebra) -> Self {
        d.blocks
    }
}

/// `z = (+)_j z_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicElement {
    blocks: Vec<CMatrix>,
}

impl AtomicElement {
    pub fn new(d: &AtomicAlgebra, blocks: Vec<CMatrix>) -> Result<Self, ModelError> {
        if blocks.len() != d.num_blocks() {
            return Err(ModelError::ElementShape(format!(
                "{} blocks given, the algebra has {}",
                blocks.len(),
                d.num_blocks()
            )));
        }
        for (j, (z, b)) in blocks.iter().zip(&d.blocks).enumerate() {
            if z.nrows() != b.size || z.ncols() != b.size {
                return Err(ModelError::ElementShape(format!(
                    "block {j} is {}x{}, expected {}x{}",
                    z.nrows(),
                    z.ncols(),
                    b.size,
                    b.size
                )));
            }
        }
        Ok(AtomicElement { blocks })
    }

    pub fn identity(d: &AtomicAlgebra) -> Self {
        AtomicElement {
            blocks: d.blocks.iter().map(|b| CMatrix::identity(b.size, b.size)).collect(),
        }
    }

    /// The central projection onto block `j`.
    pub fn block_projection(d: &AtomicAlgebra, j: usize) -> Self {
        AtomicElement {
            blocks: d
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    if i == j {
                        CMatrix::identity(b.size, b.size)
                    } else {
                        CMatrix::zeros(b.size, b.size)
                    }
                })
                .collect(),
        }
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn mul(&self, other: &AtomicElement) -> AtomicElement {
        AtomicElement {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| matmul(a, b))
                .collect(),
        }
    }

    pub fn adjoint(&self) -> AtomicElement {
        AtomicElement {
            blocks: self.blocks.iter().map(|a| a.adjoint()).collect(),
        }
    }

    /// Operator norms of the blocks.
    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(op_norm_dense).collect()
    }
}

/// Multiplicities `m(j,k) = floor(k gamma(j) / r(j))` and the resulting
/// dimension `n(k) = sum_j r(j) m(j,k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockPlan {
    pub k: usize,
    pub sizes: Vec<usize>,
    pub m: Vec<usize>,
    pub n: usize,
}

impl BlockPlan {
    /// Start row of block `j`.
    pub fn offset(&self, j: usize) -> usize {
        (0..j).map(|i| self.sizes[i] * self.m[i]).sum()
    }

    /// `r(j) m(j,k) / n(k)`, the fraction of the dimension taken by block `j`.
    pub fn fraction(&self, j: usize) -> f64 {
        (self.sizes[j] * self.m[j]) as f64 / self.n as f64
    }
}

pub fn block_plan(d: &AtomicAlgebra, k: usize) -> Result<BlockPlan, ModelError> {
    if k == 0 {
        return Err(ModelError::EmptyPlan { k });
    }
    let sizes: Vec<usize> = d.blocks.iter().map(|b| b.size).collect();
    // Guard against 0.7 * 10 = 6.999... style rounding.
    let m: Vec<usize> = d
        .blocks
        .iter()
        .map(|b| (k as f64 * b.weight / b.size as f64 + 1e-9).floor() as usize)
        .collect();
    let n = sizes.iter().zip(&m).map(|(r, m)| r * m).sum();
    if n == 0 {
        return Err(ModelError::EmptyPlan { k });
    }
    Ok(BlockPlan { k, sizes, m, n })
}

/// `pi^(k)(z) = (+)_j z_j (x) I_{m(j,k)}`; inside block `j`, row `a m + s`
/// carries matrix index `a` and copy `s`.
pub fn pi_k(z: &AtomicElement, plan: &BlockPlan) -> Result<CMatrix, ModelError> {
    if z.blocks.len() != plan.sizes.len() {
        return Err(ModelError::ElementShape(
            "element and plan disagree on the number of blocks".into(),
        ));
    }
    let mut out = CMatrix::zeros(plan.n, plan.n);
    let mut off = 0;
    for (j, zj) in z.blocks.iter().enumerate() {
        let (r, m) = (plan.sizes[j], plan.m[j]);
        for a in 0..r {
            for b in 0..r {
                let v = zj[(a, b)];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for s in 0..m {
                    out[(off + a * m + s, off + b * m + s)] = v;
                }
            }
        }
        off += r * m;
    }
    Ok(out)
}
