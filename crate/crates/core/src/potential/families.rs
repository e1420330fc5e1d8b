use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FamilyTag, Potential};
use crate::error::{Error, Result};
use crate::vecops::dot;

/// Radius beyond which the homogeneous-perturbed base is exactly `‖q‖^m`.
const HOMOGENEOUS_R1: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum FamilyVariant {
    /// `U ≡ 0`: the free particle.
    Flat,
    /// `U(q) = ½ Σ λ_i q_i²`.
    Gaussian { precision: Vec<f64> },
    /// `U(q) = (‖q‖² + δ)^κ`.
    Power { delta: f64, kappa: f64 },
    /// `m`-homogeneous base outside a ball plus a bounded perturbation
    /// `scale · sin(ln(1 + ‖q‖²))` whose derivatives decay.
    HomogeneousPerturbed { m: f64, scale: f64 },
    /// `U(q) = scale · (‖q‖² − 1)²`.
    DoubleWell { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    #[serde(flatten)]
    pub variant: FamilyVariant,
    pub dim: usize,
}

impl FamilyConfig {
    pub fn gaussian_identity(dim: usize) -> Self {
        FamilyConfig {
            variant: FamilyVariant::Gaussian {
                precision: vec![1.0; dim],
            },
            dim,
        }
    }

    pub fn power(delta: f64, kappa: f64, dim: usize) -> Self {
        FamilyConfig {
            variant: FamilyVariant::Power { delta, kappa },
            dim,
        }
    }

    /// Checks every range constraint, returning one error per violation.
    pub fn validate(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        if self.dim < 1 {
            errs.push(Error::config("potential.dim", "must be at least 1"));
        }
        match &self.variant {
            FamilyVariant::Flat => {}
            FamilyVariant::Gaussian { precision } => {
                if precision.len() != self.dim {
                    errs.push(Error::config(
                        "gaussian.precision",
                        format!("must have {} entries (one per dimension)", self.dim),
                    ));
                }
                if precision.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                    errs.push(Error::config("gaussian.precision", "entries must be > 0"));
                }
            }
            FamilyVariant::Power { delta, kappa } => {
                if !(*delta > 0.0 && delta.is_finite()) {
                    errs.push(Error::config("power.delta", "must be > 0"));
                }
                if !(*kappa > 0.5 && *kappa <= 1.0) {
                    errs.push(Error::config("power.kappa", "must lie in (0.5, 1]"));
                }
            }
            FamilyVariant::HomogeneousPerturbed { m, scale } => {
                if !(*m > 1.0 && *m <= 2.0) {
                    errs.push(Error::config("homogeneous_perturbed.m", "must lie in (1, 2]"));
                }
                if !scale.is_finite() {
                    errs.push(Error::config("homogeneous_perturbed.scale", "must be finite"));
                }
            }
            FamilyVariant::DoubleWell { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    errs.push(Error::config("double_well.scale", "must be > 0"));
                }
            }
        }
        errs
    }
}

/// Built-in potential families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Flat { dim: usize },
    Gaussian { precision: Vec<f64> },
    Power { dim: usize, delta: f64, kappa: f64 },
    HomogeneousPerturbed { dim: usize, m: f64, scale: f64 },
    DoubleWell { dim: usize, scale: f64 },
}

pub fn build_family(config: &FamilyConfig) -> Result<Family> {
    if let Some(e) = config.validate().into_iter().next() {
        return Err(e);
    }
    let dim = config.dim;
    Ok(match &config.variant {
        FamilyVariant::Flat => Family::Flat { dim },
        FamilyVariant::Gaussian { precision } => Family::Gaussian {
            precision: precision.clone(),
        },
        FamilyVariant::Power { delta, kappa } => Family::Power {
            dim,
            delta: *delta,
            kappa: *kappa,
        },
        FamilyVariant::HomogeneousPerturbed { m, scale } => Family::HomogeneousPerturbed {
            dim,
            m: *m,
            scale: *scale,
        },
        FamilyVariant::DoubleWell { scale } => Family::DoubleWell { dim, scale: *scale },
    })
}

impl Family {
    pub fn flat(dim: usize) -> Self {
        Family::Flat { dim }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Family::Gaussian {
            precision: vec![1.0; dim],
        }
    }

    pub fn power(dim: usize, delta: f64, kappa: f64) -> Self {
        Family::Power { dim, delta, kappa }
    }

    pub fn homogeneous_perturbed(dim: usize, m: f64, scale: f64) -> Self {
        Family::HomogeneousPerturbed { dim, m, scale }
    }

    pub fn double_well(dim: usize, scale: f64) -> Self {
        Family::DoubleWell { dim, scale }
    }

    /// `g(s), g'(s), g''(s), g'''(s)` for families of the form `U(q) = g(‖q‖²)`.
    fn sq_norm_derivs(&self, s: f64) -> Option<[f64; 4]> {
        match *self {
            Family::Power { delta, kappa, .. } => {
                let b = s + delta;
                let k = kappa;
                Some([
                    b.powf(k),
                    k * b.powf(k - 1.0),
                    k * (k - 1.0) * b.powf(k - 2.0),
                    k * (k - 1.0) * (k - 2.0) * b.powf(k - 3.0),
                ])
            }
            Family::DoubleWell { scale, .. } => Some([
                scale * (s - 1.0) * (s - 1.0),
                2.0 * scale * (s - 1.0),
                2.0 * scale,
                0.0,
            ]),
            Family::HomogeneousPerturbed { m, scale, .. } => {
                let base = homogeneous_base(s, m);
                let pert = log_sine(s);
                Some(std::array::from_fn(|i| base[i] + scale * pert[i]))
            }
            Family::Flat { .. } | Family::Gaussian { .. } => None,
        }
    }
}

/// Septic smoothstep on [0, 1] and its first three derivatives; the first
/// three derivatives vanish at both ends.
fn smoothstep7(x: f64) -> [f64; 4] {
    if x <= 0.0 {
        return [0.0; 4];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let x2 = x * x;
    let x3 = x2 * x;
    let x4 = x3 * x;
    [
        x4 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x3),
        140.0 * x3 * (1.0 - x).powi(3),
        420.0 * x2 * (1.0 - x).powi(2) * (1.0 - 2.0 * x),
        840.0 * x * (1.0 - x) * (1.0 - 5.0 * x + 5.0 * x2),
    ]
}

/// Derivatives in `s` of `c^a` where `c = s + shift`.
fn power_derivs(c: f64, a: f64) -> [f64; 4] {
    [
        c.powf(a),
        a * c.powf(a - 1.0),
        a * (a - 1.0) * c.powf(a - 2.0),
        a * (a - 1.0) * (a - 2.0) * c.powf(a - 3.0),
    ]
}

/// `U0(s) = (1 − χ)(s + 1)^{m/2} + χ s^{m/2}` with `χ` switching on over
/// `‖q‖ ∈ [R1/2, R1]`.
fn homogeneous_base(s: f64, m: f64) -> [f64; 4] {
    let inner = power_derivs(s + 1.0, 0.5 * m);
    let s_lo = 0.25 * HOMOGENEOUS_R1 * HOMOGENEOUS_R1;
    let s_hi = HOMOGENEOUS_R1 * HOMOGENEOUS_R1;
    if s <= s_lo {
        return inner;
    }
    let outer = power_derivs(s, 0.5 * m);
    if s >= s_hi {
        return outer;
    }
    let width = s_hi - s_lo;
    let raw = smoothstep7((s - s_lo) / width);
    let chi = [raw[0], raw[1] / width, raw[2] / (width * width), raw[3] / width.powi(3)];
    let diff: [f64; 4] = std::array::from_fn(|i| outer[i] - inner[i]);
    // Leibniz rule for inner + χ·(outer − inner).
    [
        inner[0] + chi[0] * diff[0],
        inner[1] + chi[1] * diff[0] + chi[0] * diff[1],
        inner[2] + chi[2] * diff[0] + 2.0 * chi[1] * diff[1] + chi[0] * diff[2],
        inner[3]
            + chi[3] * diff[0]
            + 3.0 * chi[2] * diff[1]
            + 3.0 * chi[1] * diff[2]
            + chi[0] * diff[3],
    ]
}

/// `sin(ln(1 + s))` and its `s`-derivatives.
fn log_sine(s: f64) -> [f64; 4] {
    let c = 1.0 + s;
    let u = c.ln();
    let (su, cu) = u.sin_cos();
    let u1 = 1.0 / c;
    let u2 = -u1 * u1;
    let u3 = 2.0 * u1 * u1 * u1;
    [
        su,
        cu * u1,
        -su * u1 * u1 + cu * u2,
        -cu * u1 * u1 * u1 - 3.0 * su * u1 * u2 + cu * u3,
    ]
}

impl Potential for Family {
    fn dim(&self) -> usize {
        match self {
            Family::Flat { dim }
            | Family::Power { dim, .. }
            | Family::HomogeneousPerturbed { dim, .. }
            | Family::DoubleWell { dim, .. } => *dim,
            Family::Gaussian { precision } => precision.len(),
        }
    }

    fn value(&self, q: &[f64]) -> f64 {
        match self {
            Family::Flat { .. } => 0.0,
            Family::Gaussian { precision } => {
                0.5 * precision.iter().zip(q).map(|(l, x)| l * x * x).sum::<f64>()
            }
            _ => self.sq_norm_derivs(dot(q, q)).map(|g| g[0]).unwrap_or(f64::NAN),
        }
    }

    fn grad_into(&self, q: &[f64], out: &mut [f64]) {
        match self {
            Family::Flat { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            Family::Gaussian { precision } => {
                for ((o, l), x) in out.iter_mut().zip(precision).zip(q) {
                    *o = l * x;
                }
            }
            _ => {
                let g1 = self.sq_norm_derivs(dot(q, q)).map(|g| g[1]).unwrap_or(f64::NAN);
                for (o, x) in out.iter_mut().zip(q) {
                    *o = 2.0 * g1 * x;
                }
            }
        }
    }

    fn hess_dir(&self, q: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(match self {
            Family::Flat { .. } => vec![0.0; q.len()],
            Family::Gaussian { precision } => precision.iter().zip(v).map(|(l, x)| l * x).collect(),
            _ => {
                let g = self.sq_norm_derivs(dot(q, q))?;
                let qv = dot(q, v);
                v.iter()
                    .zip(q)
                    .map(|(vi, qi)| 2.0 * g[1] * vi + 4.0 * g[2] * qv * qi)
                    .collect()
            }
        })
    }

    fn third_dir(&self, q: &[f64], v: &[f64], w: &[f64]) -> Option<Vec<f64>> {
        Some(match self {
            Family::Flat { .. } | Family::Gaussian { .. } => vec![0.0; q.len()],
            _ => {
                let g = self.sq_norm_derivs(dot(q, q))?;
                let (qv, qw, vw) = (dot(q, v), dot(q, w), dot(v, w));
                (0..q.len())
                    .map(|i| {
                        4.0 * g[2] * (qw * v[i] + qv * w[i] + vw * q[i])
                            + 8.0 * g[3] * qv * qw * q[i]
                    })
                    .collect()
            }
        })
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn has_third(&self) -> bool {
        true
    }

    fn family(&self) -> FamilyTag {
        match self {
            Family::Flat { .. } => FamilyTag::Flat,
            Family::Gaussian { .. } => FamilyTag::Gaussian,
            Family::Power { .. } => FamilyTag::Power,
            Family::HomogeneousPerturbed { .. } => FamilyTag::HomogeneousPerturbed,
            Family::DoubleWell { .. } => FamilyTag::DoubleWell,
        }
    }

    fn growth_order(&self) -> Option<f64> {
        match *self {
            Family::Gaussian { .. } => Some(2.0),
            Family::Power { kappa, .. } => Some(2.0 * kappa),
            Family::HomogeneousPerturbed { m, .. } => Some(m),
            Family::Flat { .. } | Family::DoubleWell { .. } => None,
        }
    }

    fn exact_sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        match self {
            Family::Gaussian { precision } => Some(
                precision
                    .iter()
                    .map(|l| {
                        let z: f64 = StandardNormal.sample(rng);
                        z / l.sqrt()
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}
