//! Acceptance of leapfrog proposals started far out in the tails with a
//! moderately sized momentum `‖p0‖ ≤ ‖q0‖^γ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{hamiltonian, leapfrog_final, LeapfrogConfig, PhaseState};
use crate::potential::Potential;
use crate::rng::{derive_seed, par_chunks};
use crate::vecops::{scale, uniform_in_ball, unit_vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub radius: f64,
    pub n_momenta: usize,
    /// Samples whose trajectory failed numerically; excluded from `fraction`.
    pub n_failed: usize,
    /// Fraction of valid samples with `ΔH ≤ 0`.
    pub fraction: f64,
    pub worst_dh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailAcceptanceProfile {
    pub gamma: f64,
    pub leapfrog: LeapfrogConfig,
    pub rows: Vec<TailRow>,
    /// Negative-energy horizons per radius, when computed.
    pub horizon: Option<Vec<usize>>,
}

impl TailAcceptanceProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.radius).collect()
    }
}

/// For each radius `r`: `q0 = r·u` with `u` uniform on the sphere, `p0`
/// uniform in the ball of radius `r^γ`; records the fraction of
/// `H(Φ^T(q0,p0)) − H(q0,p0) ≤ 0`.
pub fn tail_acceptance<P: Potential + ?Sized>(
    model: &P,
    cfg: &LeapfrogConfig,
    radii: &[f64],
    gamma: f64,
    n_momenta: usize,
    seed: u64,
) -> Result<TailAcceptanceProfile> {
    cfg.validate()?;
    if n_momenta < 100 {
        return Err(Error::config("n_momenta", "must be at least 100"));
    }
    let upper = model.growth_order().map(|m| m - 1.0);
    let gamma_ok = gamma >= 0.0 && upper.is_none_or(|u| gamma < u);
    if !gamma_ok {
        return Err(Error::config(
            "gamma",
            match upper {
                Some(u) => format!("must lie in [0, {u}) for this potential"),
                None => "must be ≥ 0".to_string(),
            },
        ));
    }
    check_radii(radii)?;
    let d = model.dim();
    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let p_radius = r.powf(gamma);
        let chunks = par_chunks(n_momenta, derive_seed(seed, ri as u64), |range, rng| {
            range
                .map(|_| {
                    let q0 = scale(&unit_vector(rng, d), r);
                    let p0 = uniform_in_ball(rng, d, p_radius);
                    let s0 = PhaseState { q: q0, p: p0 };
                    let h0 = hamiltonian(model, &s0).ok()?;
                    let end = leapfrog_final(model, &s0, cfg).ok()?;
                    let dh = hamiltonian(model, &end).ok()? - h0;
                    Some(dh)
                })
                .collect::<Vec<_>>()
        });
        let all: Vec<Option<f64>> = chunks.into_iter().flatten().collect();
        let valid: Vec<f64> = all.iter().flatten().copied().collect();
        let n_failed = all.len() - valid.len();
        let fraction = if valid.is_empty() {
            0.0
        } else {
            valid.iter().filter(|&&x| x <= 0.0).count() as f64 / valid.len() as f64
        };
        rows.push(TailRow {
            radius: r,
            n_momenta,
            n_failed,
            fraction,
            worst_dh: valid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(TailAcceptanceProfile {
        gamma,
        leapfrog: *cfg,
        rows,
        horizon: None,
    })
}

pub(crate) fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::config("radii", "must not be empty"));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::config("radii", "must be positive and finite"));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("radii", "must be strictly increasing"));
    }
    Ok(())
}
