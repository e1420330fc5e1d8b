//! Goodness-of-fit statistics used to check samplers against known laws.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov–Smirnov statistic `sup |F_n − F|` of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS statistic `d` with sample size
/// `n`, using the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected counts.
pub fn chi_square_gof(observed: &[usize], expected: &[f64]) -> ChiSquareTest {
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = observed.len().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64).map_or(f64::NAN, |c| 1.0 - c.cdf(statistic));
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}
