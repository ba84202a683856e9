//! Random matrix models for (amalgamated) free products: the block embedding
//! of an atomic algebra, Haar samplers and the conjugated model
//! `X = (X_1, U X_2 U^*)`.

mod atomic;
mod haar;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ncpoly::{unitary_conjugate, CMatrix, GenId, MatrixTuple, NcError, NormBounds};
use crate::oracle::{BaseLaw, DiscreteLaw, LawError, MomentOracle, OracleError};
use crate::seed::derive_seed;

pub use atomic::{block_plan, pi_k, AtomBlock, AtomicAlgebra, AtomicElement, BlockPlan};
pub use haar::{ginibre, haar_commutant_unitary, haar_unitary};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scale k = {k} gives an empty block plan")]
    EmptyPlan { k: usize },
    #[error("invalid amalgam: {0}")]
    InvalidAmalgam(String),
    #[error("element shape: {0}")]
    ElementShape(String),
    #[error("recipe does not fit the amalgam: {0}")]
    RecipeAmalgamMismatch(String),
    #[error("norm bound for factor {factor} must be positive, got {bound}")]
    InvalidBound { factor: u16, bound: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Matrix(#[from] NcError),
}

/// How the generators of one factor are realized at a given scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MicrostateRecipe {
    /// One generator: the diagonal of quantiles of `law`.
    QuantileDiagonal { law: DiscreteLaw },
    /// `count` independent normalized GUE matrices drawn from `seed`.
    SeededGue { count: u32, seed: u64 },
    /// One generator commuting with the amalgam: inside block `j` the
    /// quantile diagonal of `laws[j]` (or of `laws[0]` if only one is
    /// given), tensored with `I_{r(j)}`.
    DTensorAbelian { laws: Vec<DiscreteLaw> },
}

impl MicrostateRecipe {
    pub fn generator_count(&self) -> u32 {
        match self {
            MicrostateRecipe::SeededGue { count, .. } => *count,
            _ => 1,
        }
    }

    fn check(&self, d: Option<&AtomicAlgebra>) -> Result<(), ModelError> {
        let trivial = d.is_none_or(AtomicAlgebra::is_scalar);
        match self {
            MicrostateRecipe::QuantileDiagonal { .. } | MicrostateRecipe::SeededGue { .. }
                if !trivial =>
            {
                Err(ModelError::RecipeAmalgamMismatch(
                    "quantile and GUE microstates need a scalar amalgam".into(),
                ))
            }
            MicrostateRecipe::SeededGue { count: 0, .. } => Err(
                ModelError::RecipeAmalgamMismatch("a GUE factor needs at least one generator".into()),
            ),
            MicrostateRecipe::DTensorAbelian { laws } => {
                let Some(d) = d.filter(|d| !d.is_scalar()) else {
                    return Err(ModelError::RecipeAmalgamMismatch(
                        "DTensorAbelian needs a non-trivial amalgam".into(),
                    ));
                };
                if laws.len() != 1 && laws.len() != d.num_blocks() {
                    return Err(ModelError::RecipeAmalgamMismatch(format!(
                        "{} laws given for {} blocks",
                        laws.len(),
                        d.num_blocks()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The limiting law of this factor.
    pub fn base_law(&self) -> BaseLaw {
        match self {
            MicrostateRecipe::QuantileDiagonal { law } => BaseLaw::Discrete(law.clone()),
            MicrostateRecipe::SeededGue { count, .. } => {
                BaseLaw::SemicircularFamily { count: *count }
            }
            MicrostateRecipe::DTensorAbelian { laws } if laws.len() == 1 => {
                BaseLaw::Discrete(laws[0].clone())
            }
            MicrostateRecipe::DTensorAbelian { laws } => BaseLaw::PerAtomDiscrete(laws.clone()),
        }
    }

    /// Whether the microstate is only a seeded stand-in for a deterministic
    /// one.
    pub fn is_seeded(&self) -> bool {
        matches!(self, MicrostateRecipe::SeededGue { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub recipe: MicrostateRecipe,
    /// Operator norm bound `R` shared by the factor's generators.
    pub bound: f64,
}

/// `X^(k) = (X_1, U X_2 U^*)`, plus `pi^(k)(e_j)` as generators `f0.g{j}`
/// when a non-trivial amalgam is present. Factor 1 is deterministic, factor
/// 2 is conjugated by a Haar unitary on the commutant of `pi^(k)(D)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amalgam: Option<AtomicAlgebra>,
    pub factor1: FactorSpec,
    pub factor2: FactorSpec,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (label, f) in [(1, &self.factor1), (2, &self.factor2)] {
            if !(f.bound > 0.0 && f.bound.is_finite()) {
                return Err(ModelError::InvalidBound {
                    factor: label,
                    bound: f.bound,
                });
            }
            f.recipe.check(self.amalgam.as_ref())?;
        }
        Ok(())
    }

    fn effective_amalgam(&self) -> AtomicAlgebra {
        self.amalgam.clone().unwrap_or_else(AtomicAlgebra::scalar)
    }

    fn has_amalgam_generators(&self) -> bool {
        self.amalgam.as_ref().is_some_and(|d| !d.is_scalar())
    }

    pub fn factor(&self, label: u16) -> Option<&FactorSpec> {
        match label {
            1 => Some(&self.factor1),
            2 => Some(&self.factor2),
            _ => None,
        }
    }

    pub fn generators(&self) -> Vec<GenId> {
        let mut out = Vec::new();
        if self.has_amalgam_generators() {
            let j = self.amalgam.as_ref().map_or(0, AtomicAlgebra::num_blocks);
            out.extend((0..j as u32).map(|i| GenId::new(0, i)));
        }
        for (label, f) in [(1u16, &self.factor1), (2, &self.factor2)] {
            out.extend((0..f.recipe.generator_count()).map(|i| GenId::new(label, i)));
        }
        out
    }

    /// `R_i` for every generator; projections of the amalgam get 1.
    pub fn norm_bounds(&self) -> NormBounds {
        let mut b = NormBounds::new();
        for g in self.generators() {
            let r = match g.factor {
                0 => 1.0,
                1 => self.factor1.bound,
                _ => self.factor2.bound,
            };
            b.insert(g, r);
        }
        b
    }

    /// The limiting moment oracle of the model.
    pub fn oracle(&self) -> Result<MomentOracle, ModelError> {
        self.validate()?;
        let factors = [
            (1u16, self.factor1.recipe.base_law()),
            (2u16, self.factor2.recipe.base_law()),
        ];
        Ok(match &self.amalgam {
            Some(d) if !d.is_scalar() => MomentOracle::amalgamated(d, factors)?,
            _ => MomentOracle::free_product(factors)?,
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model spec serializes");
        hex_digest(&json)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn real_diagonal(values: &[f64]) -> CMatrix {
    let n = values.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = Complex64::new(*v, 0.0);
    }
    m
}

/// A normalized GUE matrix `(A + A^*) / sqrt(2n)` with `A` Ginibre.
pub fn gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let a = ginibre(n, rng);
    let s = 1.0 / (2.0 * n as f64).sqrt();
    CMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * s)
}

/// The deterministic microstate of one factor at the scale of `plan`.
pub fn compatible_microstate(
    recipe: &MicrostateRecipe,
    label: u16,
    plan: &BlockPlan,
    d: Option<&AtomicAlgebra>,
) -> Result<MatrixTuple, ModelError> {
    recipe.check(d)?;
    let n = plan.n;
    let mut tuple = MatrixTuple::new(n);
    match recipe {
        MicrostateRecipe::QuantileDiagonal { law } => {
            tuple.insert(GenId::new(label, 0), real_diagonal(&law.quantiles(n)))?;
        }
        MicrostateRecipe::SeededGue { count, seed } => {
            for i in 0..*count {
                let stream = format!("gue/f{label}.g{i}/n{n}");
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, &stream, 0));
                tuple.insert(GenId::new(label, i), gue(n, &mut rng))?;
            }
        }
        MicrostateRecipe::DTensorAbelian { laws } => {
            let mut diag = Vec::with_capacity(n);
            for (j, (&r, &m)) in plan.sizes.iter().zip(&plan.m).enumerate() {
                let law = if laws.len() == 1 { &laws[0] } else { &laws[j] };
                let q = law.quantiles(m);
                for _ in 0..r {
                    diag.extend_from_slice(&q);
                }
            }
            tuple.insert(GenId::new(label, 0), real_diagonal(&diag))?;
        }
    }
    Ok(tuple)
}

/// Everything about a model at a fixed scale that does not depend on the
/// random unitary.
#[derive(Clone, Debug)]
pub struct PreparedModel {
    plan: BlockPlan,
    fixed: BTreeMap<GenId, CMatrix>,
    conjugated: BTreeMap<GenId, CMatrix>,
}

impl PreparedModel {
    pub fn new(spec: &ModelSpec, k: usize) -> Result<Self, ModelError> {
        spec.validate()?;
        let d = spec.effective_amalgam();
        let plan = block_plan(&d, k)?;
        let mut fixed = BTreeMap::new();
        if spec.has_amalgam_generators() {
            for j in 0..d.num_blocks() {
                let e = pi_k(&AtomicElement::block_projection(&d, j), &plan)?;
                fixed.insert(GenId::new(0, j as u32), e);
            }
        }
        let x1 = compatible_microstate(&spec.factor1.recipe, 1, &plan, spec.amalgam.as_ref())?;
        fixed.extend(x1.iter().map(|(g, m)| (g, m.clone())));
        let x2 = compatible_microstate(&spec.factor2.recipe, 2, &plan, spec.amalgam.as_ref())?;
        let conjugated = x2.iter().map(|(g, m)| (g, m.clone())).collect();
        Ok(PreparedModel {
            plan,
            fixed,
            conjugated,
        })
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    pub fn dim(&self) -> usize {
        self.plan.n
    }

    /// The tuple with `U = I`.
    pub fn unconjugated(&self) -> MatrixTuple {
        let mut t = MatrixTuple::new(self.plan.n);
        for (g, m) in self.fixed.iter().chain(&self.conjugated) {
            t.insert(*g, m.clone()).expect("prepared matrices are Hermitian");
        }
        t
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MatrixTuple, ModelError> {
        let u = haar_commutant_unitary(&self.plan, rng)?;
        let mut t = MatrixTuple::new(self.plan.n);
        for (g, m) in &self.fixed {
            t.insert(*g, m.clone())?;
        }
        for (g, m) in &self.conjugated {
            t.insert(*g, unitary_conjugate(&u, m))?;
        }
        Ok(t)
    }
}

/// One draw of `X^(k)`.
pub fn sample_model<R: Rng + ?Sized>(
    spec: &ModelSpec,
    k: usize,
    rng: &mut R,
) -> Result<MatrixTuple, ModelError> {
    PreparedModel::new(spec, k)?.sample(rng)
}
