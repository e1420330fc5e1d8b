//! Leapfrog (Störmer–Verlet) integration of Hamiltonian dynamics with
//! `H(q, p) = U(q) + ‖p‖²/2`.
//!
//! One leapfrog step is a half kick, a full drift and a half kick:
//!
//! ```text
//! p_{k+1/2} = p_k − (h/2) ∇U(q_k)
//! q_{k+1}   = q_k + h p_{k+1/2}
//! p_{k+1}   = p_{k+1/2} − (h/2) ∇U(q_{k+1})
//! ```
//!
//! Multi-step runs reuse the end-of-step gradient as the next start-of-step
//! gradient, so `T` steps cost `T + 1` gradient evaluations. The arithmetic
//! is identical to chaining [`leapfrog_step`], so recorded trajectories match
//! step-by-step recomputation bit for bit.

mod reference;
mod structure;

pub use reference::reference_flow;
pub use structure::{default_jacobian_step, reversibility_residual, volume_symplectic_residual};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::potential::Potential;
use crate::vecops::{all_finite, dot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::config(
                "state",
                format!("position has dimension {} but momentum has {}", q.len(), p.len()),
            ));
        }
        if !(all_finite(&q) && all_finite(&p)) {
            return Err(Error::numeric("phase state has non-finite entries"));
        }
        Ok(PhaseState { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `(q, −p)`.
    pub fn flip_momentum(&self) -> PhaseState {
        PhaseState {
            q: self.q.clone(),
            p: self.p.iter().map(|x| -x).collect(),
        }
    }

    /// Euclidean norm of the stacked vector `(q, p)`.
    pub fn norm(&self) -> f64 {
        (dot(&self.q, &self.q) + dot(&self.p, &self.p)).sqrt()
    }

    /// Stacked `(q, p)` as one vector of length `2d`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    pub fn from_slice(z: &[f64]) -> PhaseState {
        let d = z.len() / 2;
        PhaseState {
            q: z[..d].to_vec(),
            p: z[d..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeapfrogConfig {
    /// Step size `h > 0`.
    pub step_size: f64,
    /// Number of leapfrog steps `T ≥ 1`.
    pub n_steps: usize,
}

impl LeapfrogConfig {
    pub fn new(step_size: f64, n_steps: usize) -> Result<Self> {
        let cfg = LeapfrogConfig { step_size, n_steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("kernel.h", "must be > 0"));
        }
        if self.n_steps < 1 {
            return Err(Error::config("kernel.steps", "must be at least 1"));
        }
        Ok(())
    }

    /// Integration time `T·h`.
    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.step_size
    }
}

/// A recorded leapfrog run: `states[k] = Φ^{∘k}(states[0])` for `k = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    /// `H(states[k])`.
    pub energies: Vec<f64>,
    /// `H_{k+1} − H_k`, length `T`.
    pub dh: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn n_steps(&self) -> usize {
        self.dh.len()
    }

    /// CSV with columns `k, q_0..q_{d−1}, p_0..p_{d−1}, H, dH`; `dH` on row `k`
    /// is `H_k − H_{k−1}` (zero on row 0).
    pub fn to_csv(&self) -> String {
        let d = self.states[0].dim();
        let header: Vec<String> = std::iter::once("k".to_string())
            .chain(format::indexed("q", d))
            .chain(format::indexed("p", d))
            .chain(["H".to_string(), "dH".to_string()])
            .collect();
        let rows = self.states.iter().enumerate().map(|(k, s)| {
            let dh = if k == 0 { 0.0 } else { self.dh[k - 1] };
            std::iter::once(k.to_string())
                .chain(s.q.iter().chain(&s.p).map(|&x| format::float(x)))
                .chain([format::float(self.energies[k]), format::float(dh)])
                .collect::<Vec<_>>()
        });
        format::csv(&header, rows)
    }
}

pub fn hamiltonian<P: Potential + ?Sized>(model: &P, s: &PhaseState) -> Result<f64> {
    if s.q.len() != s.p.len() {
        return Err(Error::config("state", "position and momentum dimensions differ"));
    }
    let h = model.value(&s.q) + 0.5 * dot(&s.p, &s.p);
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::Numeric {
            step: None,
            message: "non-finite Hamiltonian".into(),
            state: Some(Box::new(s.clone())),
        })
    }
}

fn gradient_checked<P: Potential + ?Sized>(model: &P, q: &[f64], p: &[f64], g: &mut [f64]) -> Result<()> {
    model.grad_into(q, g);
    if all_finite(g) {
        Ok(())
    } else {
        Err(Error::Numeric {
            step: None,
            message: "non-finite gradient".into(),
            state: Some(Box::new(PhaseState {
                q: q.to_vec(),
                p: p.to_vec(),
            })),
        })
    }
}

/// Advances `(q, p)` by one step given `g = ∇U(q)`; leaves `g = ∇U(q')`.
#[inline]
fn kick_drift_kick<P: Potential + ?Sized>(
    model: &P,
    q: &mut [f64],
    p: &mut [f64],
    g: &mut [f64],
    h: f64,
) -> Result<()> {
    let half = 0.5 * h;
    for (pi, gi) in p.iter_mut().zip(g.iter()) {
        *pi -= half * gi;
    }
    for (qi, pi) in q.iter_mut().zip(p.iter()) {
        *qi += h * pi;
    }
    gradient_checked(model, q, p, g)?;
    for (pi, gi) in p.iter_mut().zip(g.iter()) {
        *pi -= half * gi;
    }
    Ok(())
}

fn check_inputs<P: Potential + ?Sized>(model: &P, s: &PhaseState, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config("kernel.h", "must be > 0"));
    }
    if s.q.len() != s.p.len() || s.q.len() != model.dim() {
        return Err(Error::config(
            "state",
            format!("expected dimension {}, got q: {}, p: {}", model.dim(), s.q.len(), s.p.len()),
        ));
    }
    Ok(())
}

/// One leapfrog step `Φ_h(q, p)`.
pub fn leapfrog_step<P: Potential + ?Sized>(model: &P, s: &PhaseState, h: f64) -> Result<PhaseState> {
    check_inputs(model, s, h)?;
    let (mut q, mut p) = (s.q.clone(), s.p.clone());
    let mut g = vec![0.0; q.len()];
    gradient_checked(model, &q, &p, &mut g)?;
    kick_drift_kick(model, &mut q, &mut p, &mut g, h)?;
    Ok(PhaseState { q, p })
}

/// `Φ_h^{∘T}(s0)` without recording intermediate states.
pub fn leapfrog_final<P: Potential + ?Sized>(model: &P, s0: &PhaseState, cfg: &LeapfrogConfig) -> Result<PhaseState> {
    cfg.validate()?;
    check_inputs(model, s0, cfg.step_size)?;
    let (mut q, mut p) = (s0.q.clone(), s0.p.clone());
    let mut g = vec![0.0; q.len()];
    gradient_checked(model, &q, &p, &mut g).map_err(|e| e.at_step(0))?;
    for k in 0..cfg.n_steps {
        kick_drift_kick(model, &mut q, &mut p, &mut g, cfg.step_size).map_err(|e| e.at_step(k + 1))?;
    }
    Ok(PhaseState { q, p })
}

/// Recorded run of `T` leapfrog steps with per-step energy differences.
pub fn leapfrog_run<P: Potential + ?Sized>(model: &P, s0: &PhaseState, cfg: &LeapfrogConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_inputs(model, s0, cfg.step_size)?;
    let (mut q, mut p) = (s0.q.clone(), s0.p.clone());
    let mut g = vec![0.0; q.len()];
    gradient_checked(model, &q, &p, &mut g).map_err(|e| e.at_step(0))?;

    let mut states = Vec::with_capacity(cfg.n_steps + 1);
    let mut energies = Vec::with_capacity(cfg.n_steps + 1);
    let mut dh = Vec::with_capacity(cfg.n_steps);
    states.push(s0.clone());
    energies.push(hamiltonian(model, s0).map_err(|e| e.at_step(0))?);
    for k in 0..cfg.n_steps {
        kick_drift_kick(model, &mut q, &mut p, &mut g, cfg.step_size).map_err(|e| e.at_step(k + 1))?;
        let s = PhaseState {
            q: q.clone(),
            p: p.clone(),
        };
        let e = hamiltonian(model, &s).map_err(|e| e.at_step(k + 1))?;
        dh.push(e - energies[k]);
        energies.push(e);
        states.push(s);
    }
    Ok(Trajectory { states, energies, dh })
}

/// Position after `k` steps from the expansion
/// `q_k = q0 + k h p0 − (k h²/2) ∇U(q0) − h² Σ_{i=1}^{k−1} (k−i) ∇U(q_i)`,
/// with the intermediate positions `q_i` taken from a leapfrog run.
pub fn closed_form_position<P: Potential + ?Sized>(
    model: &P,
    s0: &PhaseState,
    h: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let (g0, grads) = intermediate_gradients(model, s0, h, k)?;
    let kf = k as f64;
    let mut correction = vec![0.0; s0.dim()];
    for (i, gi) in grads.iter().enumerate().take(k - 1) {
        let weight = (k - (i + 1)) as f64;
        for (c, g) in correction.iter_mut().zip(gi) {
            *c += weight * g;
        }
    }
    Ok((0..s0.dim())
        .map(|j| s0.q[j] + kf * h * s0.p[j] - 0.5 * kf * h * h * g0[j] - h * h * correction[j])
        .collect())
}

/// Momentum after `k` steps from
/// `p_k = p0 − (h/2){∇U(q0) + ∇U(q_k)} − h Σ_{i=1}^{k−1} ∇U(q_i)`.
pub fn closed_form_momentum<P: Potential + ?Sized>(
    model: &P,
    s0: &PhaseState,
    h: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let (g0, grads) = intermediate_gradients(model, s0, h, k)?;
    let mut inner = vec![0.0; s0.dim()];
    for gi in grads.iter().take(k - 1) {
        for (c, g) in inner.iter_mut().zip(gi) {
            *c += g;
        }
    }
    let gk = &grads[k - 1];
    Ok((0..s0.dim())
        .map(|j| s0.p[j] - 0.5 * h * (g0[j] + gk[j]) - h * inner[j])
        .collect())
}

/// `∇U(q0)` and `[∇U(q_1), …, ∇U(q_k)]` along the leapfrog trajectory.
fn intermediate_gradients<P: Potential + ?Sized>(
    model: &P,
    s0: &PhaseState,
    h: f64,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if k < 1 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let traj = leapfrog_run(model, s0, &LeapfrogConfig::new(h, k)?)?;
    let g0 = model.grad(&s0.q);
    let grads = traj.states[1..].iter().map(|s| model.grad(&s.q)).collect();
    Ok((g0, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Family;

    fn st(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn free_particle_step() {
        let s = leapfrog_step(&Family::flat(2), &st(&[1.0, 2.0], &[0.5, -1.0]), 0.1).unwrap();
        assert_eq!(s.q, vec![1.0 + 0.1 * 0.5, 2.0 - 0.1]);
        assert_eq!(s.p, vec![0.5, -1.0]);
    }

    #[test]
    fn quadratic_hand_computed_step_and_reversal() {
        let u = Family::standard_gaussian(1);
        let s1 = leapfrog_step(&u, &st(&[1.0], &[0.0]), 0.5).unwrap();
        assert_eq!(s1.q, vec![0.875]);
        assert_eq!(s1.p, vec![-0.46875]);
        let back = leapfrog_step(&u, &s1.flip_momentum(), 0.5).unwrap();
        assert_eq!(back.q, vec![1.0]);
        assert_eq!(back.p[0], 0.0);
    }

    #[test]
    fn quadratic_two_steps() {
        let u = Family::standard_gaussian(1);
        let tr = leapfrog_run(&u, &st(&[1.0], &[0.0]), &LeapfrogConfig::new(0.5, 2).unwrap()).unwrap();
        assert_eq!(tr.last().q, vec![0.53125]);
        assert_eq!(tr.last().p, vec![-0.8203125]);
        assert_eq!(tr.dh[0], -0.00732421875);
    }

    #[test]
    fn closed_form_quadratic_k2() {
        let u = Family::standard_gaussian(1);
        let s0 = st(&[1.0], &[0.0]);
        assert_eq!(closed_form_position(&u, &s0, 0.5, 2).unwrap(), vec![0.53125]);
        // k = 1: empty correction sum.
        let q1 = closed_form_position(&u, &s0, 0.5, 1).unwrap();
        assert_eq!(q1, vec![1.0 - 0.125]);
        assert!(closed_form_position(&u, &s0, 0.5, 0).is_err());
    }

    #[test]
    fn hamiltonian_values() {
        let u = Family::standard_gaussian(1);
        assert_eq!(hamiltonian(&u, &st(&[0.0], &[0.0])).unwrap(), 0.0);
        assert_eq!(hamiltonian(&u, &st(&[1.0], &[0.0])).unwrap(), 0.5);
    }

    #[test]
    fn invalid_inputs() {
        let u = Family::standard_gaussian(1);
        assert!(LeapfrogConfig::new(0.0, 3).is_err());
        assert!(LeapfrogConfig::new(0.1, 0).is_err());
        assert!(PhaseState::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(leapfrog_step(&u, &st(&[1.0], &[0.0]), -1.0).is_err());
        assert!(leapfrog_step(&Family::standard_gaussian(2), &st(&[1.0], &[0.0]), 0.1).is_err());
    }

    #[test]
    fn nonfinite_gradient_reports_step_and_state() {
        // Double well blows up for huge steps.
        let u = Family::double_well(1, 1.0);
        let err = leapfrog_run(&u, &st(&[1e3], &[0.0]), &LeapfrogConfig::new(1.0, 50).unwrap()).unwrap_err();
        match err {
            Error::Numeric { step, state, .. } => {
                assert!(step.unwrap() >= 1);
                assert!(state.is_some());
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let u = Family::standard_gaussian(1);
        let tr = leapfrog_run(&u, &st(&[1.0], &[0.0]), &LeapfrogConfig::new(0.5, 2).unwrap()).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,q_0,p_0,H,dH");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,8.7500000000000000e-1,-4.6875000000000000e-1,"));
    }
}
