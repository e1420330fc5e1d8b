//! Autocorrelation, effective sample size and moment summaries of a chain.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ChainRun;

/// Normalized autocorrelation `ρ_0..ρ_{n−1}` via zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat_n(Complex::new(0.0, 0.0), m - n))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Integrated autocorrelation time by Geyer's initial positive sequence:
/// `τ = −1 + 2 Σ_k Γ_k`, `Γ_k = ρ_{2k} + ρ_{2k+1}`, summed while `Γ_k > 0`.
/// Floored at 1.
pub fn integrated_autocorrelation_time(x: &[f64]) -> f64 {
    let rho = autocorrelation(x);
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < rho.len() {
        let gamma = rho[2 * k] + rho[2 * k + 1];
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        k += 1;
    }
    tau.max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub n: usize,
    pub acceptance_rate: f64,
    /// Per coordinate.
    pub tau: Vec<f64>,
    pub ess: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn chain_diagnostics(run: &ChainRun) -> Result<ChainDiagnostics> {
    let n = run.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "chain diagnostics need at least 10 samples, got {n}"
        )));
    }
    let d = run.samples[0].len();
    let mut tau = Vec::with_capacity(d);
    let mut ess = Vec::with_capacity(d);
    let mut mean = Vec::with_capacity(d);
    let mut variance = Vec::with_capacity(d);
    for j in 0..d {
        let x: Vec<f64> = run.samples.iter().map(|q| q[j]).collect();
        let m = x.iter().sum::<f64>() / n as f64;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = integrated_autocorrelation_time(&x);
        tau.push(t);
        ess.push(n as f64 / t);
        mean.push(m);
        variance.push(v);
    }
    Ok(ChainDiagnostics {
        n,
        acceptance_rate: run.acceptance_rate(),
        tau,
        ess,
        mean,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::LeapfrogConfig;
    use crate::kernel::KernelSpec;
    use crate::rng::stream;
    use crate::vecops::standard_normal;

    fn fake_run(samples: Vec<Vec<f64>>) -> ChainRun {
        let n = samples.len();
        ChainRun {
            samples,
            accepted: vec![true; n],
            proposal_dh: vec![0.0; n],
            chosen: vec![0; n],
            flagged: vec![],
            kernel: KernelSpec::Hmc(LeapfrogConfig::new(0.1, 1).unwrap()),
            seed: 0,
            failure: None,
        }
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let x = [1.0, 3.0, 2.0, 5.0, 4.0, 4.5];
        let rho = autocorrelation(&x);
        let m = x.iter().sum::<f64>() / 6.0;
        let c = |k: usize| (0..6 - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>();
        for k in 0..6 {
            assert!((rho[k] - c(k) / c(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn iid_ess_close_to_n() {
        let mut rng = stream(1, 0);
        let samples: Vec<Vec<f64>> = (0..20_000).map(|_| standard_normal(&mut rng, 1)).collect();
        let diag = chain_diagnostics(&fake_run(samples)).unwrap();
        let ratio = diag.ess[0] / diag.n as f64;
        assert!((0.8..=1.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn alternating_run_floors_tau() {
        let samples: Vec<Vec<f64>> = (0..100).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        let diag = chain_diagnostics(&fake_run(samples)).unwrap();
        assert_eq!(diag.tau[0], 1.0);
        assert_eq!(diag.ess[0], 100.0);
    }

    #[test]
    fn short_run_rejected() {
        assert!(matches!(
            chain_diagnostics(&fake_run(vec![vec![0.0]; 9])),
            Err(Error::InsufficientData(_))
        ));
    }
}
