//! Growth and invertibility of the position map `F_q(p) = Φ^{q,∘T}(q, p)`.
//!
//! The map is written as `F_q(p) = b·p + g(q, p)` with `b = T h`. If
//! `‖g(q,p)‖ ≤ C0 + C1‖p‖` for `‖q‖ ≤ R` and `b > C1`, then every target in
//! `B(0, M)` has a preimage in `B(0, M̃)`, `M̃ = (M + C0)/(b − C1)`, and the
//! proposal density from any start in `B(0, R)` is bounded below on
//! `B(0, M)` by `ε = L^{−d} · inf_{B(0,M̃)} φ`, where `L` is a Lipschitz
//! constant of `F_q` and `φ` the standard normal density.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{leapfrog_final, LeapfrogConfig, PhaseState};
use crate::potential::Potential;
use crate::rng::{derive_seed, par_chunks, stream};
use crate::vecops::{norm, scale, sub, uniform_in_ball, unit_vector};

/// `F_q(p)`; `None` if the trajectory fails.
fn position_map<P: Potential + ?Sized>(model: &P, cfg: &LeapfrogConfig, q: &[f64], p: &[f64]) -> Option<Vec<f64>> {
    let s = PhaseState {
        q: q.to_vec(),
        p: p.to_vec(),
    };
    leapfrog_final(model, &s, cfg).ok().map(|e| e.q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProbe {
    pub radius: f64,
    pub p_max: f64,
    /// `b = T h`.
    pub b: f64,
    /// Largest sampled difference quotient of `g` in `p`.
    pub l_hat: f64,
    /// Largest sampled difference quotient of `F_q` in `p`.
    pub map_lipschitz: f64,
    pub c0_hat: f64,
    pub c1_hat: f64,
    /// `b − Ĉ1`.
    pub margin: f64,
    pub condition_ok: bool,
    pub n_samples: usize,
    pub n_failed: usize,
}

const GROWTH_SAMPLES: usize = 4096;
const GROWTH_SHELLS: usize = 16;

struct GrowthSample {
    p_norm: f64,
    g_norm: f64,
    g_quot: f64,
    f_quot: f64,
}

/// Samples `q` in `B(0, R)` (half of them on the sphere `‖q‖ = R`) and `p`
/// in `B(0, p_max)`, and estimates the envelope `‖g‖ ≤ Ĉ0 + Ĉ1‖p‖`: `Ĉ1` is
/// the (nonnegative) least-squares slope through the largest `‖g‖` in each
/// of 16 equal-width `‖p‖` shells, and `Ĉ0` the largest residual
/// `‖g‖ − Ĉ1‖p‖`, so the envelope holds on every sample. Lipschitz
/// estimates use pairs `(p, p')` both at unit-order separation and at a
/// small separation.
pub fn proposal_growth_probe<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    radius: f64,
    p_max: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GrowthProbe> {
    cfg.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("R", "must be > 0"));
    }
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::config("p_max", "must be > 0"));
    }
    if n_samples < 2 {
        return Err(Error::config("n_samples", "must be at least 2"));
    }
    let d = model.dim();
    let b = cfg.duration();
    let samples: Vec<Option<GrowthSample>> = par_chunks(n_samples, seed, |range, rng| {
        range
            .map(|i| {
                let q = if i % 2 == 0 {
                    scale(&unit_vector(rng, d), radius)
                } else {
                    uniform_in_ball(rng, d, radius)
                };
                let p = uniform_in_ball(rng, d, p_max);
                let far = uniform_in_ball(rng, d, p_max);
                let near_dir = unit_vector(rng, d);
                let eps = 1e-4 * (1.0 + norm(&p));
                let near: Vec<f64> = p.iter().zip(&near_dir).map(|(x, u)| x + eps * u).collect();
                let g_of = |pp: &[f64]| -> Option<Vec<f64>> {
                    let f = position_map(model, cfg, &q, pp)?;
                    Some(f.iter().zip(pp).map(|(fi, pi)| fi - b * pi).collect())
                };
                let f_p = position_map(model, cfg, &q, &p)?;
                let g_p: Vec<f64> = f_p.iter().zip(&p).map(|(fi, pi)| fi - b * pi).collect();
                let mut g_quot: f64 = 0.0;
                let mut f_quot: f64 = 0.0;
                for other in [&far, &near] {
                    let dp = norm(&sub(other, &p));
                    if dp == 0.0 {
                        continue;
                    }
                    let g_o = g_of(other)?;
                    let f_o: Vec<f64> = g_o.iter().zip(other.iter()).map(|(gi, pi)| gi + b * pi).collect();
                    g_quot = g_quot.max(norm(&sub(&g_o, &g_p)) / dp);
                    f_quot = f_quot.max(norm(&sub(&f_o, &f_p)) / dp);
                }
                let sample = GrowthSample {
                    p_norm: norm(&p),
                    g_norm: norm(&g_p),
                    g_quot,
                    f_quot,
                };
                sample.g_norm.is_finite().then_some(sample)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let valid: Vec<&GrowthSample> = samples.iter().flatten().collect();
    if valid.len() < 2 {
        return Err(Error::numeric("growth probe: fewer than two valid samples"));
    }
    // Upper envelope: the sample with the largest ‖g‖ in each ‖p‖ shell.
    let mut shell_max: Vec<Option<(f64, f64)>> = vec![None; GROWTH_SHELLS];
    for s in &valid {
        let k = ((s.p_norm / p_max) * GROWTH_SHELLS as f64) as usize;
        let slot = &mut shell_max[k.min(GROWTH_SHELLS - 1)];
        if slot.is_none_or(|(_, g)| s.g_norm > g) {
            *slot = Some((s.p_norm, s.g_norm));
        }
    }
    let env: Vec<(f64, f64)> = shell_max.into_iter().flatten().collect();
    let n = env.len() as f64;
    let mx = env.iter().map(|e| e.0).sum::<f64>() / n;
    let my = env.iter().map(|e| e.1).sum::<f64>() / n;
    let sxx: f64 = env.iter().map(|e| (e.0 - mx).powi(2)).sum();
    let sxy: f64 = env.iter().map(|e| (e.0 - mx) * (e.1 - my)).sum();
    let slope = if env.len() > 1 && sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c1 = slope.max(0.0);
    let c0 = valid
        .iter()
        .map(|s| s.g_norm - c1 * s.p_norm)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let l_hat = valid.iter().map(|s| s.g_quot).fold(0.0, f64::max);
    let map_lipschitz = valid.iter().map(|s| s.f_quot).fold(0.0, f64::max);
    Ok(GrowthProbe {
        radius,
        p_max,
        b,
        l_hat,
        map_lipschitz,
        c0_hat: c0,
        c1_hat: c1,
        margin: b - c1,
        condition_ok: b > c1,
        n_samples,
        n_failed: samples.len() - valid.len(),
    })
}

/// `M̃ = (M + C0) / (b − C1)`; infinite when `b ≤ C1`.
pub fn preimage_radius(m: f64, c0: f64, c1: f64, b: f64) -> f64 {
    if b > c1 {
        (m + c0) / (b - c1)
    } else {
        f64::INFINITY
    }
}

/// `L^{−d} · (2π)^{−d/2} · exp(−M̃²/2)`: the standard normal density
/// infimum over `B(0, M̃)` scaled by the inverse Jacobian bound.
pub fn minorization_constant(l_hat: f64, m_tilde: f64, d: usize) -> f64 {
    let df = d as f64;
    let log = -df * l_hat.ln() - 0.5 * df * (2.0 * std::f64::consts::PI).ln() - 0.5 * m_tilde * m_tilde;
    log.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSetProbe {
    pub radius: f64,
    pub m: f64,
    pub m_tilde: f64,
    pub l_hat: f64,
    pub coverage_fraction: f64,
    pub epsilon_hat: f64,
    pub growth: GrowthProbe,
    pub n_targets: usize,
    pub n_starts: usize,
}

const MAX_P_DOUBLINGS: usize = 12;

/// Verifies `B(0, M) ⊂ F_q(B(0, M̃))` for a grid of targets and a set of
/// starts `q` in `B(0, R)` by Gauss–Newton root finding, and reports the
/// minorization constant `ε̂` (zero unless every pair is covered).
///
/// The growth envelope is re-probed with `p_max` doubled until it covers
/// the ball `B(0, M̃)` it is used on. If `b ≤ Ĉ1` the probe returns with
/// `M̃ = ∞`, zero coverage and `ε̂ = 0`.
pub fn smallset_probe<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    radius: f64,
    m: f64,
    grid_n: usize,
    seed: u64,
) -> Result<SmallSetProbe> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::config("M", "must be > 0"));
    }
    if grid_n < 1 {
        return Err(Error::config("grid_n", "must be at least 1"));
    }
    let d = model.dim();
    let mut p_max = (m + radius) / cfg.duration();
    let mut growth = proposal_growth_probe(model, cfg, radius, p_max, GROWTH_SAMPLES, derive_seed(seed, 0))?;
    let mut m_tilde = preimage_radius(m, growth.c0_hat, growth.c1_hat, growth.b);
    for _ in 0..MAX_P_DOUBLINGS {
        if !growth.condition_ok || m_tilde <= p_max {
            break;
        }
        p_max = (2.0 * p_max).max(m_tilde);
        growth = proposal_growth_probe(model, cfg, radius, p_max, GROWTH_SAMPLES, derive_seed(seed, 0))?;
        m_tilde = preimage_radius(m, growth.c0_hat, growth.c1_hat, growth.b);
    }
    let targets = target_grid(d, m, grid_n, seed);
    let starts = start_points(d, radius, seed);
    let l_hat = growth.map_lipschitz;
    if !growth.condition_ok {
        return Ok(SmallSetProbe {
            radius,
            m,
            m_tilde: f64::INFINITY,
            l_hat,
            coverage_fraction: 0.0,
            epsilon_hat: 0.0,
            growth,
            n_targets: targets.len(),
            n_starts: starts.len(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..starts.len())
        .flat_map(|i| (0..targets.len()).map(move |j| (i, j)))
        .collect();
    let hits: usize = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .filter(|&&(i, j)| {
                solve_position_map(model, cfg, &starts[i], &targets[j])
                    .is_some_and(|p| norm(&p) <= m_tilde * (1.0 + 1e-9))
            })
            .count()
    };
    let coverage_fraction = hits as f64 / pairs.len() as f64;
    let epsilon_hat = if coverage_fraction == 1.0 {
        minorization_constant(l_hat, m_tilde, d)
    } else {
        0.0
    };
    Ok(SmallSetProbe {
        radius,
        m,
        m_tilde,
        l_hat,
        coverage_fraction,
        epsilon_hat,
        growth,
        n_targets: targets.len(),
        n_starts: starts.len(),
    })
}

/// Targets in `B(0, M)`: an evenly spaced grid on `[−M, M]` in one
/// dimension, a square grid clipped to the disk in two, uniform draws
/// otherwise.
fn target_grid(d: usize, m: f64, grid_n: usize, seed: u64) -> Vec<Vec<f64>> {
    match d {
        1 => {
            if grid_n == 1 {
                return vec![vec![0.0]];
            }
            (0..grid_n)
                .map(|i| vec![-m + 2.0 * m * i as f64 / (grid_n - 1) as f64])
                .collect()
        }
        2 => {
            let side = ((grid_n as f64) * 4.0 / std::f64::consts::PI).sqrt().ceil().max(2.0) as usize;
            let mut pts = Vec::new();
            for i in 0..side {
                for j in 0..side {
                    let x = -m + 2.0 * m * i as f64 / (side - 1) as f64;
                    let y = -m + 2.0 * m * j as f64 / (side - 1) as f64;
                    if x * x + y * y <= m * m {
                        pts.push(vec![x, y]);
                    }
                }
            }
            pts
        }
        _ => {
            let mut rng = stream(derive_seed(seed, 1), 0);
            (0..grid_n).map(|_| uniform_in_ball(&mut rng, d, m)).collect()
        }
    }
}

/// `0`, `±R e_i`, and three uniform draws in `B(0, R)`.
fn start_points(d: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]];
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = sign * radius;
            pts.push(e);
        }
    }
    let mut rng = stream(derive_seed(seed, 2), 0);
    for _ in 0..3 {
        pts.push(uniform_in_ball(&mut rng, d, radius));
    }
    pts
}

/// Solves `F_q(p) = y` by Gauss–Newton with a central-difference Jacobian
/// and backtracking, starting from `(y − q)/b`. Success at residual
/// `≤ 1e−8·(1 + ‖y‖)` within 100 iterations.
pub fn solve_position_map<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    q: &[f64],
    y: &[f64],
) -> Option<Vec<f64>> {
    let d = q.len();
    let b = cfg.duration();
    let tol = 1e-8 * (1.0 + norm(y));
    let mut p: Vec<f64> = y.iter().zip(q).map(|(yi, qi)| (yi - qi) / b).collect();
    let residual = |p: &[f64]| -> Option<Vec<f64>> { Some(sub(&position_map(model, cfg, q, p)?, y)) };
    let mut r = residual(&p)?;
    let mut rn = norm(&r);
    for _ in 0..100 {
        if rn <= tol {
            return Some(p);
        }
        let step = 1e-6 * (1.0 + norm(&p));
        let mut jac = DMatrix::<f64>::zeros(d, d);
        let mut pp = p.clone();
        for j in 0..d {
            pp[j] = p[j] + step;
            let up = position_map(model, cfg, q, &pp)?;
            pp[j] = p[j] - step;
            let down = position_map(model, cfg, q, &pp)?;
            pp[j] = p[j];
            for i in 0..d {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * step);
            }
        }
        let rhs = DVector::from_iterator(d, r.iter().map(|x| -x));
        let delta = jac.clone().lu().solve(&rhs).or_else(|| {
            // Singular Jacobian: fall back to the least-squares step.
            jac.svd(true, true).solve(&rhs, 1e-12).ok()
        })?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = p.iter().zip(delta.iter()).map(|(pi, di)| pi + t * di).collect();
            if let Some(rc) = residual(&cand) {
                let rcn = norm(&rc);
                if rcn < rn {
                    p = cand;
                    r = rc;
                    rn = rcn;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (rn <= tol).then_some(p)
}
