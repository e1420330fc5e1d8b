//! Accumulated energy change along a leapfrog trajectory and the
//! negative-energy horizon `T̃ = max{k ≤ t_max : H_k − H_0 < 0}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::integrator::{leapfrog_run, LeapfrogConfig, PhaseState};
use crate::potential::Potential;

/// Radii used for the horizon scan of the power potential.
pub const HORIZON_RADII: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

/// `H_k − H_0` for `k = 0..=t_max`.
pub fn energy_trace<P: Potential + ?Sized>(model: &P, s0: &PhaseState, h: f64, t_max: usize) -> Result<Vec<f64>> {
    let traj = leapfrog_run(model, s0, &LeapfrogConfig::new(h, t_max)?)?;
    Ok(traj.energies.iter().map(|e| e - traj.energies[0]).collect())
}

/// Largest `k ∈ 1..=t_max` with `H_k − H_0 < 0`, or 0 if there is none.
pub fn horizon_from_trace(trace: &[f64]) -> usize {
    trace.iter().rposition(|&x| x < 0.0).filter(|&k| k > 0).unwrap_or(0)
}

pub fn negative_energy_horizon<P: Potential + ?Sized>(
    model: &P,
    q0: &[f64],
    p0: &[f64],
    h: f64,
    t_max: usize,
) -> Result<usize> {
    if t_max < 1 {
        return Err(Error::config("t_max", "must be at least 1"));
    }
    let s0 = PhaseState::new(q0.to_vec(), p0.to_vec())?;
    Ok(horizon_from_trace(&energy_trace(model, &s0, h, t_max)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub radius: f64,
    pub t_tilde: usize,
    /// `H_k − H_0`, `k = 0..=t_max`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonScan {
    pub step_size: f64,
    pub t_max: usize,
    pub p_norm: f64,
    pub rows: Vec<HorizonRow>,
}

impl HorizonScan {
    pub fn nondecreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].t_tilde <= w[1].t_tilde)
    }

    /// `radius, T_tilde`.
    pub fn horizon_csv(&self) -> String {
        let header = ["radius".to_string(), "T_tilde".to_string()];
        format::csv(
            &header,
            self.rows
                .iter()
                .map(|r| vec![format::float(r.radius), r.t_tilde.to_string()]),
        )
    }

    /// `k, H_k_minus_H_0` for one row.
    pub fn trace_csv(row: &HorizonRow) -> String {
        let header = ["k".to_string(), "H_k_minus_H_0".to_string()];
        format::csv(
            &header,
            row.trace
                .iter()
                .enumerate()
                .map(|(k, &x)| vec![k.to_string(), format::float(x)]),
        )
    }

    /// File name for a row's trace: `energy_trace_r<radius>.csv`.
    pub fn trace_file_name(radius: f64) -> String {
        format!("energy_trace_r{radius}.csv")
    }
}

/// Horizon at `q0 = r·e_1`, `p0 = p_norm·e_2` (`p_norm·e_1` in one
/// dimension) for each radius.
pub fn horizon_scan<P: Potential + ?Sized>(
    model: &P,
    radii: &[f64],
    h: f64,
    p_norm: f64,
    t_max: usize,
) -> Result<HorizonScan> {
    if t_max < 1 {
        return Err(Error::config("t_max", "must be at least 1"));
    }
    let d = model.dim();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut q0 = vec![0.0; d];
        let mut p0 = vec![0.0; d];
        q0[0] = r;
        p0[if d > 1 { 1 } else { 0 }] = p_norm;
        let trace = energy_trace(model, &PhaseState::new(q0, p0)?, h, t_max)?;
        rows.push(HorizonRow {
            radius: r,
            t_tilde: horizon_from_trace(&trace),
            trace,
        });
    }
    Ok(HorizonScan {
        step_size: h,
        t_max,
        p_norm,
        rows,
    })
}
