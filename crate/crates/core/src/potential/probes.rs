//! Numerical probes for the regularity assumption A1(β) and the tail
//! assumption A2(m).
//!
//! A finite sample cannot certify a supremum, so each probe evaluates a ratio
//! on spheres of increasing radius and checks for the absence of a trend: the
//! worst ratio over the upper half of the radius grid may not exceed
//! [`TREND_FACTOR`] times the ratio at the median radius (or, for lower
//! bounds, fall below it by the same factor).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Potential;
use crate::error::{Error, Result};
use crate::rng;
use crate::vecops::{dot, norm, scale, sub, unit_vector};

pub const DEFAULT_RADII: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];
pub const TREND_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Assumption {
    A1 { beta: f64 },
    A2 { m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub id: String,
    pub pass: bool,
    /// Fitted constant (`L1`, `M1`, `A1`..`A4`).
    pub constant: f64,
    /// Sample point realising the worst ratio; the violation witness on failure.
    pub witness: Vec<f64>,
    /// Worst ratio found on each sphere of the radius grid.
    pub per_radius: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub radii: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub parameter: f64,
    pub per_condition: Vec<ConditionResult>,
    pub sample_spec: SampleSpec,
    /// A2 only: smallest grid radius from which A2(ii) holds with the fitted
    /// constant on every larger sphere.
    pub a2_radius: Option<f64>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.per_condition.iter().all(|c| c.pass)
    }

    pub fn condition(&self, id: &str) -> Option<&ConditionResult> {
        self.per_condition.iter().find(|c| c.id == id)
    }
}

fn validate_grid(radii: &[f64], n_samples: usize) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::config("radii", "must be nonempty"));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::config("radii", "entries must be positive and finite"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("radii", "must be strictly increasing"));
    }
    if n_samples < 2 {
        return Err(Error::config("n_samples", "must be at least 2"));
    }
    Ok(())
}

/// Index of the (lower) median radius; entries after it form the upper half.
fn median_index(n: usize) -> usize {
    (n - 1) / 2
}

fn no_growth(per_radius: &[f64]) -> bool {
    let med = median_index(per_radius.len());
    let reference = per_radius[med];
    per_radius.iter().all(|r| r.is_finite())
        && per_radius[med + 1..].iter().all(|&r| r <= TREND_FACTOR * reference)
}

fn no_decay(per_radius: &[f64]) -> bool {
    let med = median_index(per_radius.len());
    let reference = per_radius[med];
    per_radius.iter().all(|r| r.is_finite())
        && per_radius[med..].iter().all(|&r| r > 0.0 && r * TREND_FACTOR >= reference)
}

/// Per-sphere extremum of `ratio(q, rng)` with its arg-extremum.
struct Sweep {
    per_radius: Vec<f64>,
    witnesses: Vec<Vec<f64>>,
}

fn sweep<F>(radii: &[f64], n: usize, seed: u64, salt: u64, dim: usize, maximize: bool, mut ratio: F) -> Sweep
where
    F: FnMut(&[f64], &mut rng::StreamRng) -> f64,
{
    let mut per_radius = Vec::with_capacity(radii.len());
    let mut witnesses = Vec::with_capacity(radii.len());
    for (i, &r) in radii.iter().enumerate() {
        let mut rng = rng::stream(rng::derive_seed(seed, salt), i as u64);
        let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut witness = vec![0.0; dim];
        for _ in 0..n {
            let q = scale(&unit_vector(&mut rng, dim), r);
            let x = ratio(&q, &mut rng);
            let better = if x.is_nan() {
                true
            } else if maximize {
                x > best
            } else {
                x < best
            };
            if better {
                best = if x.is_nan() { f64::NAN } else { x };
                witness = q;
                if x.is_nan() {
                    break;
                }
            }
        }
        per_radius.push(best);
        witnesses.push(witness);
    }
    Sweep {
        per_radius,
        witnesses,
    }
}

fn upper_condition(id: &str, s: Sweep) -> ConditionResult {
    let pass = no_growth(&s.per_radius);
    let med = median_index(s.per_radius.len());
    // Worst point in the upper half when failing, overall maximum otherwise.
    let range = if pass { 0 } else { med + 1 };
    let (idx, _) = s.per_radius[range..]
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if !(x <= acc.1) { (i, x) } else { acc });
    let constant = s.per_radius.iter().cloned().fold(0.0, f64::max);
    ConditionResult {
        id: id.to_string(),
        pass,
        constant,
        witness: s.witnesses[range + idx].clone(),
        per_radius: s.per_radius,
    }
}

fn lower_condition(id: &str, s: &Sweep) -> ConditionResult {
    let pass = no_decay(&s.per_radius);
    let med = median_index(s.per_radius.len());
    let (idx, constant) = s.per_radius[med..]
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &x)| if !(x >= acc.1) { (i, x) } else { acc });
    ConditionResult {
        id: id.to_string(),
        pass: pass && constant > 0.0,
        constant: constant.max(0.0),
        witness: s.witnesses[med + idx].clone(),
        per_radius: s.per_radius.clone(),
    }
}

/// Probes A1(β): (i) global Lipschitz gradient, (ii) `‖∇U(q)‖ ≤ M1(1+‖q‖^β)`.
pub fn check_a1<P: Potential + ?Sized>(
    model: &P,
    beta: f64,
    radii: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    validate_grid(radii, n_samples)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config("beta", "must lie in [0, 1]"));
    }
    let d = model.dim();

    let lipschitz = sweep(radii, n_samples, seed, 1, d, true, |q, rng| {
        let r = norm(q);
        let eps = r * 10f64.powf(-3.0 * rng.random::<f64>());
        let q2: Vec<f64> = q.iter().zip(unit_vector(rng, d)).map(|(a, u)| a + eps * u).collect();
        norm(&sub(&model.grad(q), &model.grad(&q2))) / norm(&sub(q, &q2))
    });
    let growth = sweep(radii, n_samples, seed, 2, d, true, |q, _| {
        norm(&model.grad(q)) / (1.0 + norm(q).powf(beta))
    });

    Ok(AssumptionReport {
        assumption: Assumption::A1 { beta },
        parameter: beta,
        per_condition: vec![upper_condition("A1.i", lipschitz), upper_condition("A1.ii", growth)],
        sample_spec: SampleSpec {
            radii: radii.to_vec(),
            n_samples,
            seed,
        },
        a2_radius: None,
    })
}

/// Probes A2(m): (i) `‖D^k U(q)‖ ≤ A1(‖q‖+1)^{m−k}` for k = 2, 3 on sampled
/// directions, (ii) `D²U(q){∇U(q)⊗∇U(q)} ≥ A2‖q‖^{3m−4}` in the tail,
/// (iii) `⟨∇U(q), q⟩ ≥ A3‖q‖^m − A4`.
pub fn check_a2<P: Potential + ?Sized>(
    model: &P,
    m: f64,
    radii: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    validate_grid(radii, n_samples)?;
    if !(m > 1.0 && m <= 2.0) {
        return Err(Error::config("m", "must lie in (1, 2]"));
    }
    if !(model.has_hessian() && model.has_third()) {
        return Err(Error::Capability(
            "A2 probe needs second and third directional derivatives \
             (wrap the model in FiniteDifferenceDerivatives for a numerical fallback)"
                .into(),
        ));
    }
    let d = model.dim();
    let missing = || f64::NAN;

    let second = sweep(radii, n_samples, seed, 3, d, true, |q, rng| {
        let v = unit_vector(rng, d);
        model.hess_dir(q, &v).map(|h| norm(&h)).unwrap_or_else(missing) / (norm(q) + 1.0).powf(m - 2.0)
    });
    let third = sweep(radii, n_samples, seed, 4, d, true, |q, rng| {
        let v = unit_vector(rng, d);
        let w = unit_vector(rng, d);
        model.third_dir(q, &v, &w).map(|t| norm(&t)).unwrap_or_else(missing)
            / (norm(q) + 1.0).powf(m - 3.0)
    });
    let curvature = sweep(radii, n_samples, seed, 5, d, false, |q, _| {
        let g = model.grad(q);
        model.hess_dir(q, &g).map(|h| dot(&h, &g)).unwrap_or_else(missing) / norm(q).powf(3.0 * m - 4.0)
    });
    let radial = sweep(radii, n_samples, seed, 6, d, false, |q, _| {
        dot(&model.grad(q), q) / norm(q).powf(m)
    });

    let c2 = lower_condition("A2.ii", &curvature);
    let a2_radius = if c2.constant > 0.0 {
        let mut start = radii.len();
        for i in (0..radii.len()).rev() {
            if curvature.per_radius[i] >= c2.constant {
                start = i;
            } else {
                break;
            }
        }
        radii.get(start).copied()
    } else {
        None
    };

    let mut c3 = lower_condition("A2.iii", &radial);
    // A4 covers every sampled sphere with the fitted A3.
    let a3 = c3.constant;
    let a4 = radii
        .iter()
        .zip(&radial.per_radius)
        .map(|(r, ratio)| (a3 - ratio) * r.powf(m))
        .fold(0.0, f64::max);

    let mut a4_result = c3.clone();
    a4_result.id = "A2.iii.A4".into();
    a4_result.constant = a4;
    c3.id = "A2.iii".into();

    Ok(AssumptionReport {
        assumption: Assumption::A2 { m },
        parameter: m,
        per_condition: vec![
            upper_condition("A2.i.k2", second),
            upper_condition("A2.i.k3", third),
            c2,
            c3,
            a4_result,
        ],
        sample_spec: SampleSpec {
            radii: radii.to_vec(),
            n_samples,
            seed,
        },
        a2_radius,
    })
}
