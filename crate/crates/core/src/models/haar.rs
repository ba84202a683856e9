use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BlockPlan, ModelError};
use crate::ncpoly::CMatrix;

/// `n x n` matrix of i.i.d. standard complex Gaussians (`E|z|^2 = 1`).
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

/// A Haar-distributed unitary: `Q` from the QR factorization of a Ginibre
/// matrix, with column `i` multiplied by `R_ii / |R_ii|`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    assert!(n > 0, "haar_unitary needs n >= 1");
    let qr = ginibre(n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..n {
        let d = r[(i, i)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..n {
            q[(row, i)] *= phase;
        }
    }
    q
}

/// A Haar unitary on the commutant of `pi^(k)(D)`:
/// `(+)_j I_{r(j)} (x) U_j` with independent Haar `U_j` in `U(m(j,k))`.
pub fn haar_commutant_unitary<R: Rng + ?Sized>(
    plan: &BlockPlan,
    rng: &mut R,
) -> Result<CMatrix, ModelError> {
    if plan.n == 0 {
        return Err(ModelError::EmptyPlan { k: plan.k });
    }
    if plan.sizes.len() == 1 && plan.sizes[0] == 1 {
        return Ok(haar_unitary(plan.n, rng));
    }
    let mut out = CMatrix::zeros(plan.n, plan.n);
    let mut off = 0;
    for (&r, &m) in plan.sizes.iter().zip(&plan.m) {
        if m == 0 {
            continue;
        }
        let u = haar_unitary(m, rng);
        for a in 0..r {
            let base = off + a * m;
            out.view_mut((base, base), (m, m)).copy_from(&u);
        }
        off += r * m;
    }
    Ok(out)
}
