//! Foster–Lyapunov drift of the proposal kernel for `V_a(q) = exp(a‖q‖)`
//! and the mass of the rejection region inside the `V_a` sublevel set.
//!
//! Both estimates use the proposal kernel before the accept step, started
//! from `q0 = r·u` with `u` uniform on the sphere and `p ~ N(0, I)`. All
//! `V_a` ratios are accumulated in the log domain, since `exp(a r)`
//! overflows for the radii of interest.

use serde::{Deserialize, Serialize};

use super::tail::check_radii;
use crate::error::{Error, Result};
use crate::integrator::{hamiltonian, leapfrog_final, LeapfrogConfig, PhaseState};
use crate::potential::Potential;
use crate::rng::{derive_seed, par_chunks};
use crate::vecops::{norm, scale, standard_normal, unit_vector};

pub const DEFAULT_A_GRID: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];

/// One proposal from radius `r`: `‖q_T‖ − ‖q0‖` and `ΔH`.
#[derive(Debug, Clone, Copy)]
struct Sample {
    growth: f64,
    dh: f64,
}

fn proposals<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    r: f64,
    n: usize,
    seed: u64,
) -> Vec<Option<Sample>> {
    let d = model.dim();
    par_chunks(n, seed, |range, rng| {
        range
            .map(|_| {
                let q0 = scale(&unit_vector(rng, d), r);
                let p0 = standard_normal(rng, d);
                let s0 = PhaseState { q: q0, p: p0 };
                let end = leapfrog_final(model, &s0, cfg).ok()?;
                let growth = norm(&end.q) - norm(&s0.q);
                if !growth.is_finite() {
                    return None;
                }
                let dh = match (hamiltonian(model, &end), hamiltonian(model, &s0)) {
                    (Ok(h1), Ok(h0)) => h1 - h0,
                    _ => f64::INFINITY,
                };
                Some(Sample { growth, dh })
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub radius: f64,
    /// `log( E[V_a(q_T)] / V_a(q0) )`.
    pub log_ratio: f64,
    /// `E[V_a(q_T)] / V_a(q0)`; `+∞` if it overflows.
    pub ratio: f64,
    /// Standard error of `ratio` (`+∞` if the ratio overflows).
    pub stderr: f64,
    /// Standard error relative to the ratio; always finite.
    pub rel_stderr: f64,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCurve {
    pub a: f64,
    pub points: Vec<DriftPoint>,
    /// Least-squares fit of `ratio ≈ λ + b / V_a(r)` over the radii.
    pub lambda_hat: f64,
    pub b_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub leapfrog: LeapfrogConfig,
    pub radii: Vec<f64>,
    pub n_momenta: usize,
    pub curves: Vec<DriftCurve>,
    /// `a` with the smallest ratio at the largest radius.
    pub best_a: f64,
}

impl DriftReport {
    pub fn curve(&self, a: f64) -> Option<&DriftCurve> {
        self.curves.iter().find(|c| c.a == a)
    }

    /// Ratio and standard error at `radius` for every `a`.
    pub fn at_radius(&self, radius: f64) -> Vec<(f64, &DriftPoint)> {
        self.curves
            .iter()
            .filter_map(|c| c.points.iter().find(|p| p.radius == radius).map(|p| (c.a, p)))
            .collect()
    }
}

fn drift_point(radius: f64, a: f64, samples: &[Option<Sample>]) -> DriftPoint {
    let xs: Vec<f64> = samples.iter().flatten().map(|s| a * s.growth).collect();
    let n_failed = samples.len() - xs.len();
    if xs.is_empty() {
        return DriftPoint {
            radius,
            log_ratio: f64::NAN,
            ratio: f64::NAN,
            stderr: f64::NAN,
            rel_stderr: f64::NAN,
            n_failed,
        };
    }
    let n = xs.len() as f64;
    let shift = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - shift).exp()).collect();
    let mean_w = w.iter().sum::<f64>() / n;
    let var_w = if xs.len() > 1 {
        w.iter().map(|x| (x - mean_w).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let rel_stderr = (var_w / n).sqrt() / mean_w;
    let log_ratio = shift + mean_w.ln();
    let ratio = log_ratio.exp();
    DriftPoint {
        radius,
        log_ratio,
        ratio,
        stderr: ratio * rel_stderr,
        rel_stderr,
        n_failed,
    }
}

/// Fits `ratio ≈ λ + b·x` with `x = exp(−a r)`; degenerate designs give
/// `λ = mean ratio`, `b = 0`.
fn fit_lambda_b(a: f64, points: &[DriftPoint]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.ratio.is_finite())
        .map(|p| ((-a * p.radius).exp(), p.ratio))
        .collect();
    if pts.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= f64::MIN_POSITIVE * 1e6 {
        return (my, 0.0);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

pub fn drift_estimate<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    a_grid: &[f64],
    radii: &[f64],
    n_momenta: usize,
    seed: u64,
) -> Result<DriftReport> {
    cfg.validate()?;
    check_radii(radii)?;
    if a_grid.is_empty() || a_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::config("a_grid", "must be a nonempty list of positive values"));
    }
    if n_momenta < 2 {
        return Err(Error::config("n_momenta", "must be at least 2"));
    }
    let per_radius: Vec<Vec<Option<Sample>>> = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| proposals(model, cfg, r, n_momenta, derive_seed(seed, i as u64)))
        .collect();
    let curves: Vec<DriftCurve> = a_grid
        .iter()
        .map(|&a| {
            let points: Vec<DriftPoint> = radii
                .iter()
                .zip(&per_radius)
                .map(|(&r, s)| drift_point(r, a, s))
                .collect();
            let (lambda_hat, b_hat) = fit_lambda_b(a, &points);
            DriftCurve {
                a,
                points,
                lambda_hat,
                b_hat,
            }
        })
        .collect();
    let best_a = curves
        .iter()
        .filter(|c| c.points.last().is_some_and(|p| p.log_ratio.is_finite()))
        .min_by(|x, y| {
            let lx = x.points.last().unwrap().log_ratio;
            let ly = y.points.last().unwrap().log_ratio;
            lx.total_cmp(&ly)
        })
        .map_or(f64::NAN, |c| c.a);
    Ok(DriftReport {
        leapfrog: *cfg,
        radii: radii.to_vec(),
        n_momenta,
        curves,
        best_a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionMassRow {
    pub radius: f64,
    pub mass: f64,
    pub stderr: f64,
    pub n_failed: usize,
}

/// Proposal probability of `{ΔH > 0} ∩ {V_a(q_T) ≤ V_a(q0)}` per radius.
/// Since `V_a` is increasing in `‖q‖` for `a > 0`, the second event is
/// `‖q_T‖ ≤ ‖q0‖`. Proposals that overflow are counted in `n_failed` and
/// left out.
pub fn rejection_mass<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    a: f64,
    radii: &[f64],
    n_momenta: usize,
    seed: u64,
) -> Result<Vec<RejectionMassRow>> {
    cfg.validate()?;
    check_radii(radii)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::config("a", "must be > 0"));
    }
    if n_momenta < 2 {
        return Err(Error::config("n_momenta", "must be at least 2"));
    }
    Ok(radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let samples = proposals(model, cfg, r, n_momenta, derive_seed(seed, i as u64));
            let valid: Vec<&Sample> = samples.iter().flatten().filter(|s| s.dh.is_finite()).collect();
            let n = valid.len() as f64;
            let hits = valid.iter().filter(|s| s.dh > 0.0 && s.growth <= 0.0).count() as f64;
            let mass = if n > 0.0 { hits / n } else { f64::NAN };
            RejectionMassRow {
                radius: r,
                mass,
                stderr: (mass * (1.0 - mass) / n).sqrt(),
                n_failed: samples.len() - valid.len(),
            }
        })
        .collect())
}
