//! Potential energies `U` with target density `π ∝ exp(−U)`.
//!
//! A [`Potential`] supplies `U` and `∇U`, and optionally directional second
//! and third derivatives. The built-in [`Family`] covers the models used
//! throughout the diagnostics; anything else can implement the trait.

mod families;
mod fd;
mod probes;

pub use families::{build_family, Family, FamilyConfig, FamilyVariant};
pub use fd::{default_fd_step, finite_diff_grad, finite_diff_hess_dir, FiniteDifferenceDerivatives};
pub use probes::{
    check_a1, check_a2, Assumption, AssumptionReport, ConditionResult, SampleSpec, DEFAULT_RADII,
};

use rand::RngCore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Flat,
    Gaussian,
    Power,
    HomogeneousPerturbed,
    DoubleWell,
    Custom,
}

/// Potential energy evaluator. Implementations must be pure.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &[f64]) -> f64;

    /// Writes `∇U(q)` into `out`.
    fn grad_into(&self, q: &[f64], out: &mut [f64]);

    fn grad(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        self.grad_into(q, &mut g);
        g
    }

    /// `D²U(q) v`, if available.
    fn hess_dir(&self, _q: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `D³U(q)[v ⊗ w]` as a vector, if available.
    fn third_dir(&self, _q: &[f64], _v: &[f64], _w: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn has_hessian(&self) -> bool {
        false
    }

    fn has_third(&self) -> bool {
        false
    }

    fn family(&self) -> FamilyTag {
        FamilyTag::Custom
    }

    /// Tail growth order `m` (`U ~ ‖q‖^m`) when the model is known to lie in
    /// the class `m ∈ (1, 2]`.
    fn growth_order(&self) -> Option<f64> {
        None
    }

    /// An exact draw from `π`, when one is cheaply available.
    fn exact_sample(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, q: &[f64]) -> f64 {
        (**self).value(q)
    }
    fn grad_into(&self, q: &[f64], out: &mut [f64]) {
        (**self).grad_into(q, out)
    }
    fn hess_dir(&self, q: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        (**self).hess_dir(q, v)
    }
    fn third_dir(&self, q: &[f64], v: &[f64], w: &[f64]) -> Option<Vec<f64>> {
        (**self).third_dir(q, v, w)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn has_third(&self) -> bool {
        (**self).has_third()
    }
    fn family(&self) -> FamilyTag {
        (**self).family()
    }
    fn growth_order(&self) -> Option<f64> {
        (**self).growth_order()
    }
    fn exact_sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        (**self).exact_sample(rng)
    }
}

/// Unnormalized target density `exp(−U(q))`.
pub fn unnormalized_density<P: Potential + ?Sized>(model: &P, q: &[f64]) -> f64 {
    (-model.value(q)).exp()
}
