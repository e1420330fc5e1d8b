//! Metropolis-adjusted HMC kernel `P_{h,T}`, its randomized mixture
//! `Σ a_i P_{h_i,T_i}` and chain drivers.
//!
//! Each iteration draws a fresh standard normal momentum, runs `T` leapfrog
//! steps and accepts the end position with probability
//! `min(1, exp(H(start) − H(end)))`. Momenta are not carried between
//! iterations, so the sign flip applied to the momentum on acceptance is
//! irrelevant for the position chain and is not stored.
//!
//! Per iteration the random stream is consumed in a fixed order: schedule
//! index (mixtures with more than one entry only), `d` normals for the
//! momentum, then one uniform for the accept test, which is drawn even when
//! the acceptance probability is 1.

mod chain;

pub use chain::{run_chain, run_chain_with_rng, run_chains, ChainRun};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{hamiltonian, leapfrog_final, LeapfrogConfig, PhaseState};
use crate::potential::Potential;
use crate::vecops::standard_normal;

/// `min(1, exp(h0 − h1))`. A non-finite `h1` is a hard reject (0); a
/// non-finite `h0` is an error.
pub fn accept_prob(h0: f64, h1: f64) -> Result<f64> {
    if !h0.is_finite() {
        return Err(Error::numeric(format!("starting Hamiltonian is not finite ({h0})")));
    }
    if !h1.is_finite() {
        return Ok(0.0);
    }
    Ok((h0 - h1).min(0.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcParams {
    pub leapfrog: LeapfrogConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub weight: f64,
    pub step_size: f64,
    pub n_steps: usize,
}

impl ScheduleEntry {
    pub fn leapfrog(&self) -> LeapfrogConfig {
        LeapfrogConfig {
            step_size: self.step_size,
            n_steps: self.n_steps,
        }
    }
}

/// Weighted list of `(a_i, h_i, T_i)` defining a mixture of HMC kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ScheduleEntry>", into = "Vec<ScheduleEntry>")]
pub struct RandomizedSchedule {
    entries: Vec<ScheduleEntry>,
}

impl TryFrom<Vec<ScheduleEntry>> for RandomizedSchedule {
    type Error = Error;
    fn try_from(entries: Vec<ScheduleEntry>) -> Result<Self> {
        RandomizedSchedule::new(entries)
    }
}

impl From<RandomizedSchedule> for Vec<ScheduleEntry> {
    fn from(s: RandomizedSchedule) -> Self {
        s.entries
    }
}

impl RandomizedSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("kernel.schedule", "must have at least one entry"));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::config(format!("kernel.schedule[{i}].weight"), "must be ≥ 0"));
            }
            if !(e.step_size > 0.0 && e.step_size.is_finite()) {
                return Err(Error::config(format!("kernel.schedule[{i}].h"), "must be > 0"));
            }
            if e.n_steps < 1 {
                return Err(Error::config(format!("kernel.schedule[{i}].steps"), "must be at least 1"));
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "kernel.schedule",
                format!("weights must sum to 1 (got {total})"),
            ));
        }
        if !entries.iter().any(|e| e.weight > 0.0) {
            return Err(Error::config("kernel.schedule", "needs at least one positive weight"));
        }
        Ok(RandomizedSchedule { entries })
    }

    /// The mixture with `T_i = i` for `i = 1..=n`.
    pub fn with_step_counts_by_index(weights: &[f64], step_sizes: &[f64]) -> Result<Self> {
        if weights.len() != step_sizes.len() {
            return Err(Error::config(
                "kernel.schedule",
                "weights and step sizes must have the same length",
            ));
        }
        Self::new(
            weights
                .iter()
                .zip(step_sizes)
                .enumerate()
                .map(|(i, (&weight, &step_size))| ScheduleEntry {
                    weight,
                    step_size,
                    n_steps: i + 1,
                })
                .collect(),
        )
    }

    pub fn single(cfg: LeapfrogConfig) -> Self {
        RandomizedSchedule {
            entries: vec![ScheduleEntry {
                weight: 1.0,
                step_size: cfg.step_size,
                n_steps: cfg.n_steps,
            }],
        }
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Draws an index with probability `a_i`. Zero-weight entries are never
    /// chosen. Single-entry schedules consume no randomness.
    pub fn choose<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        if self.entries.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.weight > 0.0 {
                acc += e.weight;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Hmc(LeapfrogConfig),
    Randomized { schedule: RandomizedSchedule },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Hmc(cfg) => cfg.validate(),
            KernelSpec::Randomized { schedule } => RandomizedSchedule::new(schedule.entries.clone()).map(|_| ()),
        }
    }
}

/// One draw from the proposal kernel `Q_{h,T}(q, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub q_prop: Vec<f64>,
    pub start: PhaseState,
    pub end: PhaseState,
}

/// Draws `p ~ N(0, I)` and integrates `T` leapfrog steps from `(q, p)`.
pub fn proposal_sample<P, R>(model: &P, q: &[f64], cfg: &LeapfrogConfig, rng: &mut R) -> Result<Proposal>
where
    P: Potential + ?Sized,
    R: RngCore + ?Sized,
{
    let p = standard_normal(rng, q.len());
    let start = PhaseState { q: q.to_vec(), p };
    let end = leapfrog_final(model, &start, cfg)?;
    Ok(Proposal {
        q_prop: end.q.clone(),
        start,
        end,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub q_next: Vec<f64>,
    pub accepted: bool,
    /// `H(end) − H(start)`; `+∞` for a hard reject.
    pub dh: f64,
    /// The proposal overflowed and was rejected without evaluating `H`.
    pub flagged: bool,
}

/// One Metropolis-adjusted HMC transition from `q`.
///
/// If the start state is finite but the trajectory overflows (non-finite
/// gradient or Hamiltonian at some step `k ≥ 1`), the move is rejected with
/// `dh = +∞` and flagged instead of failing.
pub fn hmc_step<P, R>(model: &P, q: &[f64], cfg: &LeapfrogConfig, rng: &mut R) -> Result<StepOutcome>
where
    P: Potential + ?Sized,
    R: RngCore + ?Sized,
{
    if q.len() != model.dim() {
        return Err(Error::config(
            "q0",
            format!("expected dimension {}, got {}", model.dim(), q.len()),
        ));
    }
    let p = standard_normal(rng, q.len());
    let start = PhaseState { q: q.to_vec(), p };
    let h0 = hamiltonian(model, &start)?;
    let (h1, q_prop) = match leapfrog_final(model, &start, cfg) {
        Ok(end) => {
            let h1 = model.value(&end.q) + 0.5 * crate::vecops::dot(&end.p, &end.p);
            (h1, Some(end.q))
        }
        Err(Error::Numeric { step: Some(k), .. }) if k >= 1 => (f64::INFINITY, None),
        Err(e) => return Err(e),
    };
    let alpha = accept_prob(h0, h1)?;
    let u: f64 = rng.random();
    let flagged = !h1.is_finite();
    let dh = if flagged { f64::INFINITY } else { h1 - h0 };
    match q_prop {
        Some(qp) if u < alpha => Ok(StepOutcome {
            q_next: qp,
            accepted: true,
            dh,
            flagged,
        }),
        _ => Ok(StepOutcome {
            q_next: q.to_vec(),
            accepted: false,
            dh,
            flagged,
        }),
    }
}

/// One transition of the mixture kernel: pick `i` with probability `a_i`,
/// then apply `P_{h_i,T_i}`. Returns the outcome and the chosen index.
pub fn randomized_step<P, R>(
    model: &P,
    q: &[f64],
    schedule: &RandomizedSchedule,
    rng: &mut R,
) -> Result<(StepOutcome, usize)>
where
    P: Potential + ?Sized,
    R: RngCore + ?Sized,
{
    let i = schedule.choose(rng);
    let out = hmc_step(model, q, &schedule.entries[i].leapfrog(), rng)?;
    Ok((out, i))
}

/// One transition of either kernel kind.
pub fn kernel_step<P, R>(model: &P, q: &[f64], spec: &KernelSpec, rng: &mut R) -> Result<(StepOutcome, usize)>
where
    P: Potential + ?Sized,
    R: RngCore + ?Sized,
{
    match spec {
        KernelSpec::Hmc(cfg) => hmc_step(model, q, cfg, rng).map(|o| (o, 0)),
        KernelSpec::Randomized { schedule } => randomized_step(model, q, schedule, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Family;
    use crate::rng::stream;

    #[test]
    fn accept_prob_cases() {
        assert_eq!(accept_prob(1.0, 1.0).unwrap(), 1.0);
        assert!((accept_prob(0.0, 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(accept_prob(0.0, -0.00732421875).unwrap(), 1.0);
        assert_eq!(accept_prob(0.0, f64::INFINITY).unwrap(), 0.0);
        assert_eq!(accept_prob(0.0, f64::NAN).unwrap(), 0.0);
        assert!(accept_prob(f64::NAN, 0.0).is_err());
        assert!(accept_prob(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn schedule_validation() {
        let e = |weight, step_size, n_steps| ScheduleEntry {
            weight,
            step_size,
            n_steps,
        };
        assert!(RandomizedSchedule::new(vec![]).is_err());
        assert!(RandomizedSchedule::new(vec![e(0.5, 0.1, 1), e(0.4, 0.1, 2)]).is_err());
        assert!(RandomizedSchedule::new(vec![e(1.0, 0.0, 1)]).is_err());
        assert!(RandomizedSchedule::new(vec![e(1.0, 0.1, 0)]).is_err());
        assert!(RandomizedSchedule::new(vec![e(-0.5, 0.1, 1), e(1.5, 0.1, 1)]).is_err());
        let s = RandomizedSchedule::with_step_counts_by_index(&[0.25, 0.75], &[0.3, 0.2]).unwrap();
        assert_eq!(s.entries()[1].n_steps, 2);
    }

    #[test]
    fn zero_weight_entry_never_chosen() {
        let s = RandomizedSchedule::new(vec![
            ScheduleEntry {
                weight: 0.0,
                step_size: 0.1,
                n_steps: 1,
            },
            ScheduleEntry {
                weight: 1.0,
                step_size: 0.1,
                n_steps: 2,
            },
        ])
        .unwrap();
        let mut rng = stream(3, 0);
        assert!((0..1000).all(|_| s.choose(&mut rng) == 1));
    }

    #[test]
    fn flat_model_always_accepts() {
        let u = Family::flat(2);
        let cfg = LeapfrogConfig::new(0.3, 4).unwrap();
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            let out = hmc_step(&u, &[1.0, 2.0], &cfg, &mut rng).unwrap();
            assert!(out.accepted);
            assert_eq!(out.dh, 0.0);
        }
    }

    #[test]
    fn overflow_is_hard_reject() {
        let u = Family::double_well(1, 1.0);
        let cfg = LeapfrogConfig::new(1.0, 50).unwrap();
        let mut rng = stream(1, 0);
        let out = hmc_step(&u, &[1e3], &cfg, &mut rng).unwrap();
        assert!(!out.accepted && out.flagged);
        assert_eq!(out.q_next, vec![1e3]);
        assert_eq!(out.dh, f64::INFINITY);
    }

    #[test]
    fn single_entry_schedule_matches_hmc_step() {
        let u = Family::standard_gaussian(2);
        let cfg = LeapfrogConfig::new(0.4, 3).unwrap();
        let sched = RandomizedSchedule::single(cfg);
        let (mut r1, mut r2) = (stream(9, 0), stream(9, 0));
        let mut q = vec![0.5, -0.5];
        for _ in 0..20 {
            let a = hmc_step(&u, &q, &cfg, &mut r1).unwrap();
            let (b, i) = randomized_step(&u, &q, &sched, &mut r2).unwrap();
            assert_eq!(i, 0);
            assert_eq!(a, b);
            q = a.q_next;
        }
    }
}
