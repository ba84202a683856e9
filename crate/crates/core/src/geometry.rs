//! Geometry of finite sets of microstates: `(F, eps)`-neighborhoods,
//! covering numbers, and concentration functions of finite measures.
//!
//! Distances are `d_F(A, B) = max_{i in F} ||A_i - B_i||_2` with the
//! normalized Hilbert-Schmidt norm, and neighborhoods are open:
//! `B in N_{F,eps}(A)` iff `d_F(A, B) < eps`.

use std::collections::BTreeSet;
use std::io::Read;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ncpoly::{hs_norm2, read_tuples, GenId, MatrixTuple, NcError, NcPolynomial};

/// Exhaustive subset enumeration is limited to this many atoms.
pub const MAX_EXACT_ATOMS: usize = 15;

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("the point cloud is empty")]
    EmptyCloud,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{atoms} atoms is too many for exhaustive enumeration (max {max})")]
    TooManyAtoms { atoms: usize, max: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("eps must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("the generator set F is empty")]
    EmptyGeneratorSet,
    #[error("no observables given")]
    NoObservables,
    #[error(transparent)]
    Matrix(#[from] NcError),
}

fn check_args(f: &BTreeSet<GenId>, eps: f64) -> Result<(), GeometryError> {
    if f.is_empty() {
        return Err(GeometryError::EmptyGeneratorSet);
    }
    if !(eps > 0.0) {
        return Err(GeometryError::InvalidEpsilon(eps));
    }
    Ok(())
}

fn same_shape(a: &MatrixTuple, b: &MatrixTuple) -> Result<(), GeometryError> {
    if a.dim() != b.dim() || !a.generators().eq(b.generators()) {
        return Err(GeometryError::ShapeMismatch(format!(
            "tuples of dimension {} and {} or with different generators",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `max_{i in F} ||A_i - B_i||_2`.
pub fn f_distance(
    a: &MatrixTuple,
    b: &MatrixTuple,
    f: &BTreeSet<GenId>,
) -> Result<f64, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::ShapeMismatch(format!(
            "dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut d: f64 = 0.0;
    for &g in f {
        let (Some(x), Some(y)) = (a.get(g), b.get(g)) else {
            return Err(GeometryError::ShapeMismatch(format!("generator {g} is missing")));
        };
        d = d.max(hs_norm2(&(x - y)));
    }
    Ok(d)
}

pub fn in_neighborhood(
    a: &MatrixTuple,
    b: &MatrixTuple,
    f: &BTreeSet<GenId>,
    eps: f64,
) -> Result<bool, GeometryError> {
    check_args(f, eps)?;
    Ok(f_distance(a, b, f)? < eps)
}

fn distance_matrix(
    points: &[MatrixTuple],
    f: &BTreeSet<GenId>,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            (0..points.len())
                .map(|j| {
                    if i == j {
                        Ok(0.0)
                    } else {
                        f_distance(&points[i], &points[j], f)
                    }
                })
                .collect()
        })
        .collect()
}

/// Microstates of equal dimension and generator set.
#[derive(Clone, Debug)]
pub struct PointCloud {
    points: Vec<MatrixTuple>,
}

impl PointCloud {
    pub fn new(points: Vec<MatrixTuple>) -> Result<Self, GeometryError> {
        if let Some(first) = points.first() {
            for p in &points[1..] {
                same_shape(first, p)?;
            }
        }
        Ok(PointCloud { points })
    }

    /// Reads a cloud from the binary tuple container.
    pub fn from_reader<R: Read>(r: R) -> Result<Self, GeometryError> {
        Self::new(read_tuples(r)?)
    }

    pub fn points(&self) -> &[MatrixTuple] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(MatrixTuple::dim)
    }
}

/// Upper and lower bounds on the covering number `K_{F,eps}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverBounds {
    /// Size of a greedy `eps`-cover with centers in the cloud.
    pub upper: usize,
    /// Size of a greedy `2 eps`-separated subset.
    pub lower: usize,
    pub centers: Vec<usize>,
    pub packing: Vec<usize>,
}

/// Farthest-point greedy: start from point 0, then repeatedly add the point
/// farthest from the chosen set (ties to the lowest index) while that
/// distance is at least `threshold`.
fn farthest_point(dist: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let n = dist.len();
    let mut chosen = vec![0];
    let mut nearest: Vec<f64> = dist[0].clone();
    loop {
        let mut best = None;
        for i in 0..n {
            if nearest[i] >= threshold && best.is_none_or(|b: usize| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { return chosen };
        chosen.push(b);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[b][i]);
        }
    }
}

/// Every point is within `< eps` of a center, so `K <= upper`; points of the
/// packing are pairwise `>= 2 eps` apart, so no open `eps`-ball holds two of
/// them and `lower <= K`.
pub fn covering_number(
    cloud: &PointCloud,
    f: &BTreeSet<GenId>,
    eps: f64,
) -> Result<CoverBounds, GeometryError> {
    check_args(f, eps)?;
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let dist = distance_matrix(&cloud.points, f)?;
    let centers = farthest_point(&dist, eps);
    let packing = farthest_point(&dist, 2.0 * eps);
    Ok(CoverBounds {
        upper: centers.len(),
        lower: packing.len(),
        centers,
        packing,
    })
}

/// Covering bounds for every `(F, eps)` pair of a sweep, indexed
/// `[family][eps]`.
///
/// A greedy run alone is monotone in `eps` but not in `F`. An `eps'`-cover
/// for `F' ⊇ F` with `eps' <= eps` is also an `eps`-cover for `F`, and a
/// `2 eps'`-packing for `F' ⊆ F` with `eps' >= eps` is a `2 eps`-packing for
/// `F`. Each bound is tightened over those pairs, so the reported bounds are
/// monotone in both arguments.
pub fn cover_sweep(
    cloud: &PointCloud,
    families: &[BTreeSet<GenId>],
    eps: &[f64],
) -> Result<Vec<Vec<CoverBounds>>, GeometryError> {
    let mut raw = Vec::with_capacity(families.len());
    for f in families {
        raw.push(
            eps.iter()
                .map(|&e| covering_number(cloud, f, e))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let mut out = raw.clone();
    for (a, fa) in families.iter().enumerate() {
        for (i, &ea) in eps.iter().enumerate() {
            for (b, fb) in families.iter().enumerate() {
                for (j, &eb) in eps.iter().enumerate() {
                    let src = &raw[b][j];
                    let dst = &mut out[a][i];
                    if fb.is_superset(fa) && eb <= ea && src.upper < dst.upper {
                        dst.upper = src.upper;
                        dst.centers = src.centers.clone();
                    }
                    if fb.is_subset(fa) && eb >= ea && src.lower > dst.lower {
                        dst.lower = src.lower;
                        dst.packing = src.packing.clone();
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One line of a covering experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverRow {
    pub n: usize,
    pub generators: String,
    pub eps: f64,
    pub points: usize,
    pub lower: usize,
    pub upper: usize,
    /// `log(upper) / n^2`; exploratory at desk-scale `n`.
    pub log_upper_over_n2: f64,
}

impl CoverRow {
    pub fn new(n: usize, f: &BTreeSet<GenId>, eps: f64, points: usize, b: &CoverBounds) -> Self {
        CoverRow {
            n,
            generators: f.iter().map(GenId::to_string).collect::<Vec<_>>().join(" "),
            eps,
            points,
            lower: b.lower,
            upper: b.upper,
            log_upper_over_n2: (b.upper as f64).ln() / (n * n) as f64,
        }
    }
}

/// A probability measure on finitely many microstates.
#[derive(Clone, Debug)]
pub struct FiniteMeasure {
    atoms: Vec<MatrixTuple>,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<(MatrixTuple, f64)>) -> Result<Self, GeometryError> {
        if atoms.is_empty() {
            return Err(GeometryError::InvalidMeasure("no atoms".into()));
        }
        let (atoms, weights): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(GeometryError::InvalidMeasure(format!(
                "atom {i} has weight {}",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(GeometryError::InvalidMeasure(format!(
                "weights sum to {total}"
            )));
        }
        for a in &atoms[1..] {
            same_shape(&atoms[0], a)?;
        }
        Ok(FiniteMeasure { atoms, weights })
    }

    /// Equal weights on every point of `cloud`.
    pub fn uniform(cloud: &PointCloud) -> Result<Self, GeometryError> {
        let w = 1.0 / cloud.len() as f64;
        Self::new(cloud.points.iter().map(|p| (p.clone(), w)).collect())
    }

    pub fn atoms(&self) -> &[MatrixTuple] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn mass(&self, members: impl Iterator<Item = usize>) -> f64 {
        members.map(|i| self.weights[i]).sum()
    }
}

/// `mu(N_{F,eps}(Omega_g)^c)` for each observable `g`, where `Omega_g` is
/// the upper half-mass set `{atoms with Re tau(g) >= m}` and `m` the largest
/// value with `mu(Re tau(g) >= m) >= 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationWitness {
    pub per_observable: Vec<f64>,
    /// The maximum; a lower bound on `alpha_mu(F, eps)`.
    pub value: f64,
}

pub fn empirical_concentration(
    mu: &FiniteMeasure,
    f: &BTreeSet<GenId>,
    eps: f64,
    observables: &[NcPolynomial],
) -> Result<ConcentrationWitness, GeometryError> {
    check_args(f, eps)?;
    if observables.is_empty() {
        return Err(GeometryError::NoObservables);
    }
    let dist = distance_matrix(&mu.atoms, f)?;
    let mut per_observable = Vec::with_capacity(observables.len());
    for g in observables {
        let values = mu
            .atoms
            .iter()
            .map(|a| Ok(crate::ncpoly::normalized_trace(&a.evaluate(g)?).re))
            .collect::<Result<Vec<f64>, GeometryError>>()?;
        let mut order: Vec<usize> = (0..mu.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut acc = 0.0;
        let mut threshold = values[order[order.len() - 1]];
        for &i in &order {
            acc += mu.weights[i];
            if acc >= 0.5 - MASS_TOL {
                threshold = values[i];
                break;
            }
        }
        let omega: Vec<usize> = (0..mu.len()).filter(|&i| values[i] >= threshold).collect();
        let outside = mu.mass((0..mu.len()).filter(|&b| omega.iter().all(|&a| dist[a][b] >= eps)));
        per_observable.push(outside);
    }
    let value = per_observable.iter().copied().fold(0.0, f64::max);
    Ok(ConcentrationWitness {
        per_observable,
        value,
    })
}

/// `nb[b]`: bitmask of atoms `a` with `d_F(a, b) < eps`.
fn neighbor_masks(dist: &[Vec<f64>], eps: f64) -> Vec<u32> {
    dist.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, d)| **d < eps)
                .fold(0u32, |m, (a, _)| m | 1 << a)
        })
        .collect()
}

fn outside_mass(mu: &FiniteMeasure, nb: &[u32], set: u32) -> f64 {
    mu.mass((0..mu.len()).filter(|&b| nb[b] & set == 0))
}

/// `alpha_mu(F, eps)` exactly: for a finitely supported measure the sup
/// over Borel sets of mass `>= 1/2` is attained on sets of atoms.
pub fn exact_concentration(
    mu: &FiniteMeasure,
    f: &BTreeSet<GenId>,
    eps: f64,
) -> Result<f64, GeometryError> {
    check_args(f, eps)?;
    if mu.len() > MAX_EXACT_ATOMS {
        return Err(GeometryError::TooManyAtoms {
            atoms: mu.len(),
            max: MAX_EXACT_ATOMS,
        });
    }
    let dist = distance_matrix(&mu.atoms, f)?;
    Ok(alpha_from(mu, &neighbor_masks(&dist, eps)))
}

fn alpha_from(mu: &FiniteMeasure, nb: &[u32]) -> f64 {
    let j = mu.len();
    let mut alpha: f64 = 0.0;
    for set in 1u32..(1 << j) {
        if mu.mass((0..j).filter(|i| set >> i & 1 == 1)) >= 0.5 - MASS_TOL {
            alpha = alpha.max(outside_mass(mu, nb, set));
        }
    }
    alpha
}

/// Checks `mu(Omega) > alpha_mu(F, eps) => mu(N_{F,2eps}(Omega)) >= 1 -
/// alpha_mu(F, eps)` with `alpha` computed exhaustively. This is a theorem,
/// so `false` means the distance or measure code is wrong.
pub fn dichotomy_check(
    mu: &FiniteMeasure,
    omega: &BTreeSet<usize>,
    f: &BTreeSet<GenId>,
    eps: f64,
) -> Result<bool, GeometryError> {
    check_args(f, eps)?;
    if mu.len() > MAX_EXACT_ATOMS {
        return Err(GeometryError::TooManyAtoms {
            atoms: mu.len(),
            max: MAX_EXACT_ATOMS,
        });
    }
    if let Some(&bad) = omega.iter().find(|&&i| i >= mu.len()) {
        return Err(GeometryError::InvalidMeasure(format!("atom {bad} does not exist")));
    }
    let dist = distance_matrix(&mu.atoms, f)?;
    let alpha = alpha_from(mu, &neighbor_masks(&dist, eps));
    let set = omega.iter().fold(0u32, |m, &i| m | 1 << i);
    if mu.mass(omega.iter().copied()) <= alpha + MASS_TOL {
        return Ok(true);
    }
    let widened = 1.0 - outside_mass(mu, &neighbor_masks(&dist, 2.0 * eps), set);
    Ok(widened >= 1.0 - alpha - MASS_TOL)
}
