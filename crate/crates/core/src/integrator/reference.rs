//! High-accuracy reference solution of Hamilton's equations
//! `q' = p, p' = −∇U(q)`, used as an oracle for the leapfrog.

use super::PhaseState;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::vecops::all_finite;

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 10_000_000;

fn rhs<P: Potential + ?Sized>(model: &P, z: &[f64], out: &mut [f64]) {
    let d = z.len() / 2;
    out[..d].copy_from_slice(&z[d..]);
    model.grad_into(&z[..d], &mut out[d..]);
    for x in &mut out[d..] {
        *x = -*x;
    }
}

/// Exact Hamiltonian flow `φ_t(s0)` approximated by adaptive Dormand–Prince
/// 5(4) with absolute and relative tolerance `tol`. Fails with an oracle
/// error if the step size underflows.
pub fn reference_flow<P: Potential + ?Sized>(model: &P, s0: &PhaseState, t: f64, tol: f64) -> Result<PhaseState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::config("t", "must be a finite non-negative time"));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be > 0"));
    }
    let mut z = s0.to_vec();
    let n = z.len();
    if t == 0.0 {
        return Ok(s0.clone());
    }
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut z5 = vec![0.0; n];
    let mut time = 0.0;
    let mut h = (t / 100.0).min(tol.powf(0.2));
    rhs(model, &z, &mut k[0]);

    for _ in 0..MAX_STEPS {
        if time >= t {
            return Ok(PhaseState::from_slice(&z));
        }
        let last = time + h >= t;
        if last {
            h = t - time;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = z[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                stage[i] = acc;
            }
            rhs(model, &stage, &mut k[s]);
        }
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        z5.copy_from_slice(&stage);
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += h * (B5[s] - B4[s]) * k[s][i];
            }
            let sc = tol + tol * z[i].abs().max(z5[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if err <= 1.0 && all_finite(&z5) {
            time = if last { t } else { time + h };
            z.copy_from_slice(&z5);
            k.swap(0, 6);
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            h *= if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            if h < 1e-14 * t.max(1.0) {
                return Err(Error::Oracle(format!(
                    "reference integrator step size underflow at t = {time} (tolerance {tol})"
                )));
            }
        }
    }
    Err(Error::Oracle("reference integrator exceeded its step budget".into()))
}
