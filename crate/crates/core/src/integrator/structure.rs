//! Numerical checks of the geometric properties of the leapfrog map:
//! reversibility under momentum flip, volume preservation and symplecticity.

use nalgebra::DMatrix;

use super::{leapfrog_final, LeapfrogConfig, PhaseState};
use crate::error::Result;
use crate::potential::Potential;

/// Default central-difference step for the Jacobian of the `T`-step map.
pub fn default_jacobian_step(s0: &PhaseState) -> f64 {
    1e-6 * (1.0 + s0.norm())
}

/// `‖F ∘ Φ^T ∘ F ∘ Φ^T (s0) − s0‖ / max(‖s0‖, 1)` where `F` flips the
/// momentum. Zero up to rounding for the exact leapfrog.
pub fn reversibility_residual<P: Potential + ?Sized>(model: &P, s0: &PhaseState, cfg: &LeapfrogConfig) -> Result<f64> {
    let fwd = leapfrog_final(model, s0, cfg)?;
    let back = leapfrog_final(model, &fwd.flip_momentum(), cfg)?.flip_momentum();
    let a = back.to_vec();
    let b = s0.to_vec();
    Ok(crate::vecops::rel_err(&a, &b))
}

/// Returns `(|det B − 1|, max_ij |Bᵀ J B − J|_ij)` for the central-difference
/// Jacobian `B` of `Φ^T` at `s0`. `fd_step` defaults to
/// [`default_jacobian_step`].
pub fn volume_symplectic_residual<P: Potential + ?Sized>(
    model: &P,
    s0: &PhaseState,
    cfg: &LeapfrogConfig,
    fd_step: Option<f64>,
) -> Result<(f64, f64)> {
    let eps = fd_step.unwrap_or_else(|| default_jacobian_step(s0));
    if !(eps > 0.0) {
        return Err(crate::Error::config("fd_step", "must be > 0"));
    }
    let z0 = s0.to_vec();
    let n = z0.len();
    let d = n / 2;
    let mut b = DMatrix::<f64>::zeros(n, n);
    let mut z = z0.clone();
    for j in 0..n {
        z[j] = z0[j] + eps;
        let up = leapfrog_final(model, &PhaseState::from_slice(&z), cfg)?.to_vec();
        z[j] = z0[j] - eps;
        let down = leapfrog_final(model, &PhaseState::from_slice(&z), cfg)?.to_vec();
        z[j] = z0[j];
        for i in 0..n {
            b[(i, j)] = (up[i] - down[i]) / (2.0 * eps);
        }
    }
    let mut jmat = DMatrix::<f64>::zeros(n, n);
    for i in 0..d {
        jmat[(i, d + i)] = 1.0;
        jmat[(d + i, i)] = -1.0;
    }
    let det_err = (b.determinant() - 1.0).abs();
    let sym = b.transpose() * &jmat * &b - &jmat;
    let sym_err = sym.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((det_err, sym_err))
}
