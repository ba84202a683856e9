use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sums `items` by recursive halving. The association order depends only on
/// the length, so the result is reproducible.
pub fn pairwise_sum<T: Clone>(items: &[T], add: &impl Fn(&T, &T) -> T) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        len => {
            let (l, r) = items.split_at(len / 2);
            Some(add(&pairwise_sum(l, add)?, &pairwise_sum(r, add)?))
        }
    }
}

pub fn sum_f64(items: &[f64]) -> f64 {
    pairwise_sum(items, &|a, b| a + b).unwrap_or(0.0)
}

/// Least-squares line `y = intercept + slope x` with a two-sided 95%
/// Student-t interval on the slope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let k = x.len();
    if k < 2 || k != y.len() {
        return None;
    }
    let mx = sum_f64(x) / k as f64;
    let my = sum_f64(y) / k as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, half) = if k > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / (k - 2) as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, (k - 2) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        ci_low: slope - half,
        ci_high: slope + half,
        points: k,
    })
}
