use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::stats::{pairwise_sum, sum_f64};
use super::VerifyError;
use crate::models::PreparedModel;
use crate::ncpoly::{hs_norm2, op_norm, CMatrix, GenId, NcPolynomial, WordEvaluator};
use crate::seed::derive_seed;

/// Samples are drawn and reduced in fixed chunks of this size, in index
/// order, whatever the number of worker threads.
pub const CHUNK: usize = 16;

/// Stream label of the per-sample seeds at scale `k`.
pub fn sample_stream(k: usize) -> String {
    format!("sample/k{k}")
}

pub(crate) struct PassRequest<'a> {
    pub polys: &'a [NcPolynomial],
    pub matrices: bool,
    pub norm_tol: Option<f64>,
}

/// Second-moment statistics of the random matrices `p(X_s)`.
#[derive(Clone, Debug)]
pub(crate) struct MatrixStats {
    /// Unbiased estimate of `||E p(X)||_2^2`.
    pub unbiased_sq: f64,
    /// `||(1/S) sum_s p(X_s)||_2`.
    pub plug_in: f64,
    /// `(1/S) sum_s ||p(X_s)||_2^2`.
    pub mean_sq_norm: f64,
    /// Unbiased estimate of `E ||p(X) - E p(X)||_2^2`.
    pub collapse: f64,
    /// Batch-means standard error of `collapse` (NaN with a single batch).
    pub collapse_stderr: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct ScaleStats {
    pub k: usize,
    pub n: usize,
    pub samples: usize,
    /// `traces[i][s] = tau_n(p_i(X_s))`.
    pub traces: Vec<Vec<Complex64>>,
    pub matrices: Vec<MatrixStats>,
    /// Largest operator norm seen per generator.
    pub max_norms: BTreeMap<GenId, f64>,
}

struct SampleOut {
    traces: Vec<Complex64>,
    mats: Vec<CMatrix>,
    norms: Vec<(GenId, f64)>,
}

#[derive(Default)]
struct MatrixAcc {
    total: Option<CMatrix>,
    shifted: Option<CMatrix>,
    sq_norms: Vec<f64>,
    shifted_sq_norms: Vec<f64>,
    batch_collapse: Vec<f64>,
}

fn add_opt(acc: &mut Option<CMatrix>, m: CMatrix) {
    match acc {
        Some(a) => *a += m,
        None => *acc = Some(m),
    }
}

fn madd(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a + b
}

fn norm_sq(m: &CMatrix) -> f64 {
    hs_norm2(m).powi(2)
}

pub(crate) fn scale_pass(
    prepared: &PreparedModel,
    k: usize,
    samples: usize,
    seed: u64,
    req: &PassRequest<'_>,
) -> Result<ScaleStats, VerifyError> {
    let stream = sample_stream(k);
    let n = prepared.dim();
    let draw = |s: usize| -> Result<SampleOut, VerifyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &stream, s as u64));
        let x = prepared.sample(&mut rng)?;
        let mut ev = WordEvaluator::new(&x);
        let traces = req
            .polys
            .iter()
            .map(|p| ev.trace_poly(p))
            .collect::<Result<Vec<_>, _>>()?;
        let mats = if req.matrices {
            req.polys
                .iter()
                .map(|p| ev.evaluate(p))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        let norms = match req.norm_tol {
            Some(tol) => x
                .iter()
                .map(|(g, m)| Ok((g, op_norm(m, tol)?)))
                .collect::<Result<Vec<_>, VerifyError>>()?,
            None => Vec::new(),
        };
        Ok(SampleOut {
            traces,
            mats,
            norms,
        })
    };

    let np = req.polys.len();
    let mut traces = vec![Vec::with_capacity(samples); np];
    let mut accs: Vec<MatrixAcc> = (0..np).map(|_| MatrixAcc::default()).collect();
    let mut first: Vec<CMatrix> = Vec::new();
    let mut max_norms: BTreeMap<GenId, f64> = BTreeMap::new();

    for start in (0..samples).step_by(CHUNK) {
        let end = (start + CHUNK).min(samples);
        let outs = (start..end)
            .into_par_iter()
            .map(draw)
            .collect::<Result<Vec<_>, _>>()?;
        for out in &outs {
            for (i, t) in out.traces.iter().enumerate() {
                traces[i].push(*t);
            }
            for &(g, v) in &out.norms {
                let e = max_norms.entry(g).or_insert(0.0);
                *e = e.max(v);
            }
        }
        if !req.matrices {
            continue;
        }
        if first.is_empty() {
            first = outs[0].mats.clone();
        }
        let c = outs.len();
        for (i, acc) in accs.iter_mut().enumerate() {
            let mats: Vec<CMatrix> = outs.iter().map(|o| o.mats[i].clone()).collect();
            let shifted: Vec<CMatrix> = mats.iter().map(|m| m - &first[i]).collect();
            let dd: Vec<f64> = shifted.iter().map(norm_sq).collect();
            acc.sq_norms.extend(mats.iter().map(norm_sq));
            acc.shifted_sq_norms.extend(dd.iter().copied());
            let chunk_total = pairwise_sum(&mats, &madd).expect("chunk is nonempty");
            let chunk_shifted = pairwise_sum(&shifted, &madd).expect("chunk is nonempty");
            if c >= 2 {
                let est = (sum_f64(&dd) - norm_sq(&chunk_shifted) / c as f64) / (c - 1) as f64;
                acc.batch_collapse.push(est);
            }
            add_opt(&mut acc.total, chunk_total);
            add_opt(&mut acc.shifted, chunk_shifted);
        }
    }

    let s = samples as f64;
    let matrices = accs
        .into_iter()
        .filter(|_| req.matrices)
        .map(|acc| {
            let total = acc.total.expect("at least one sample");
            let shifted = acc.shifted.expect("at least one sample");
            let q = sum_f64(&acc.sq_norms);
            let t2 = norm_sq(&total);
            let unbiased_sq = if samples >= 2 {
                (t2 - q) / (s * (s - 1.0))
            } else {
                t2
            };
            let collapse = if samples >= 2 {
                ((sum_f64(&acc.shifted_sq_norms) - norm_sq(&shifted) / s) / (s - 1.0)).max(0.0)
            } else {
                0.0
            };
            let b = acc.batch_collapse.len();
            let collapse_stderr = if b >= 2 {
                let mean = sum_f64(&acc.batch_collapse) / b as f64;
                let var = acc
                    .batch_collapse
                    .iter()
                    .map(|v| (v - mean).powi(2))
                    .sum::<f64>()
                    / (b - 1) as f64;
                (var / b as f64).sqrt()
            } else {
                f64::NAN
            };
            MatrixStats {
                unbiased_sq,
                plug_in: (t2.sqrt()) / s,
                mean_sq_norm: q / s,
                collapse,
                collapse_stderr,
            }
        })
        .collect();

    Ok(ScaleStats {
        k,
        n,
        samples,
        traces,
        matrices,
        max_norms,
    })
}

/// Sample variance `E|v - mean|^2`, computed after shifting by the first
/// value so that a constant sample has exactly zero spread.
pub(crate) fn variance(values: &[Complex64]) -> f64 {
    let s = values.len();
    if s < 2 {
        return f64::NAN;
    }
    let c = values[0];
    let d: Vec<Complex64> = values.iter().map(|v| v - c).collect();
    let dsum = pairwise_sum(&d, &|a: &Complex64, b: &Complex64| a + b).unwrap_or_default();
    let sq: Vec<f64> = d.iter().map(|z| z.norm_sqr()).collect();
    ((sum_f64(&sq) - dsum.norm_sqr() / s as f64) / (s - 1) as f64).max(0.0)
}

/// Variances at or below this are rounding noise around a constant: the
/// traces agree to about 1e-12 of their size.
pub(crate) fn rounding_floor(values: &[Complex64]) -> f64 {
    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    (1e-12 * scale).powi(2)
}

/// Mean and standard error of the mean.
pub(crate) fn mean_stderr(values: &[Complex64]) -> (Complex64, f64) {
    let s = values.len();
    let mean = pairwise_sum(values, &|a: &Complex64, b: &Complex64| a + b).unwrap_or_default()
        / s as f64;
    (mean, (variance(values) / s as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_noise_is_below_floor() {
        let v: Vec<Complex64> = (0..50)
            .map(|i| Complex64::new(3.0 + (i % 3) as f64 * 4e-16, 0.0))
            .collect();
        assert!(variance(&v) > 0.0);
        assert!(variance(&v) <= rounding_floor(&v));
        let w = [Complex64::new(3.0, 0.0), Complex64::new(3.0 + 1e-6, 0.0)];
        assert!(variance(&w) > rounding_floor(&w));
    }

    #[test]
    fn constant_sample_has_zero_spread() {
        let v = vec![Complex64::new(0.1, 0.3); 37];
        let (m, se) = mean_stderr(&v);
        assert_eq!(se, 0.0);
        assert!((m - v[0]).norm() < 1e-15);
        assert_eq!(variance(&v), 0.0);
    }

    #[test]
    fn known_variance() {
        let v: Vec<Complex64> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|x| Complex64::new(*x, 0.0))
            .collect();
        assert!((variance(&v) - 5.0 / 3.0).abs() < 1e-14);
    }
}
