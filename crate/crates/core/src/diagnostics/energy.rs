//! Energy change of one leapfrog step, split into six integrals along the
//! segment `q_t = q0 + t (q1 − q0)`.
//!
//! With `g0 = ∇U(q0)` and `A_t = D²U(q_t)`:
//!
//! ```text
//! H(Φ_h(q0,p0)) − H(q0,p0) =
//!       h²  ∫ ⟨A_t p0, p0⟩ (1/2 − t) dt
//!     + h³  ∫ ⟨A_t p0, g0⟩ (t − 1/4) dt
//!     − h⁴/4 ∫ ⟨A_t g0, g0⟩ t dt
//!     + h⁴/8 ‖∫ A_t p0 dt‖²
//!     − h⁵/8 ⟨∫ A_t g0 dt, ∫ A_t p0 dt⟩
//!     + h⁶/32 ‖∫ A_t g0 dt‖²
//! ```
//!
//! all integrals over `t ∈ [0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{hamiltonian, leapfrog_step, PhaseState};
use crate::potential::Potential;
use crate::quadrature::GaussLegendre;
use crate::vecops::{dot, norm};

pub const DEFAULT_QUAD_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDecomposition {
    /// The six terms, in the order of the identity above.
    pub terms: [f64; 6],
    pub total: f64,
    pub direct: f64,
    pub residual: f64,
    /// Gauss-Legendre nodes per panel of the adaptive composite rule.
    pub quad_nodes: usize,
    /// `|total(n) − total(2n)|`, a quadrature error estimate.
    pub quadrature_error: f64,
}

pub fn energy_decomposition<P: Potential + ?Sized>(
    model: &P,
    s0: &PhaseState,
    h: f64,
    quad_nodes: usize,
) -> Result<EnergyDecomposition> {
    if quad_nodes < 8 {
        return Err(Error::config("quad_nodes", "must be at least 8"));
    }
    if !model.has_hessian() {
        return Err(Error::Capability(
            "energy decomposition needs Hessian-vector products".into(),
        ));
    }
    let s1 = leapfrog_step(model, s0, h)?;
    let direct = hamiltonian(model, &s1)? - hamiltonian(model, s0)?;
    let terms = six_terms(model, s0, &s1.q, h, quad_nodes)?;
    let total: f64 = terms.iter().sum();
    let refined: f64 = six_terms(model, s0, &s1.q, h, 2 * quad_nodes)?.iter().sum();
    Ok(EnergyDecomposition {
        terms,
        total,
        direct,
        residual: (total - direct).abs(),
        quad_nodes,
        quadrature_error: (total - refined).abs(),
    })
}

/// Weighted integrals along the segment, accumulated panel by panel.
#[derive(Debug, Clone)]
struct Integrals {
    i1: f64,
    i2: f64,
    i3: f64,
    ap: Vec<f64>,
    ag: Vec<f64>,
}

impl Integrals {
    fn add(&self, o: &Integrals) -> Integrals {
        let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Integrals {
            i1: self.i1 + o.i1,
            i2: self.i2 + o.i2,
            i3: self.i3 + o.i3,
            ap: sum(&self.ap, &o.ap),
            ag: sum(&self.ag, &o.ag),
        }
    }

    fn components(&self) -> impl Iterator<Item = f64> + '_ {
        [self.i1, self.i2, self.i3].into_iter().chain(self.ap.iter().copied()).chain(self.ag.iter().copied())
    }

    fn distance(&self, o: &Integrals) -> f64 {
        self.components().zip(o.components()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Panels are bisected until halving changes no integral by more than
/// `PANEL_TOL` times the panel share of the overall scale.
const PANEL_TOL: f64 = 1e-15;
const MAX_DEPTH: u32 = 24;

struct Segment<'a, P: ?Sized> {
    model: &'a P,
    q0: &'a [f64],
    q1: &'a [f64],
    p0: &'a [f64],
    g0: Vec<f64>,
    rule: GaussLegendre,
}

impl<P: Potential + ?Sized> Segment<'_, P> {
    fn panel(&self, a: f64, b: f64) -> Result<Integrals> {
        let d = self.q0.len();
        let mut out = Integrals {
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            ap: vec![0.0; d],
            ag: vec![0.0; d],
        };
        let mut qt = vec![0.0; d];
        for (t, w) in self.rule.on_interval(a, b) {
            for j in 0..d {
                qt[j] = self.q0[j] + t * (self.q1[j] - self.q0[j]);
            }
            let missing = || Error::Capability("hess_dir returned nothing".into());
            let ap = self.model.hess_dir(&qt, self.p0).ok_or_else(missing)?;
            let ag = self.model.hess_dir(&qt, &self.g0).ok_or_else(missing)?;
            out.i1 += w * dot(&ap, self.p0) * (0.5 - t);
            out.i2 += w * dot(&ap, &self.g0) * (t - 0.25);
            out.i3 += w * dot(&ag, &self.g0) * t;
            for j in 0..d {
                out.ap[j] += w * ap[j];
                out.ag[j] += w * ag[j];
            }
        }
        Ok(out)
    }

    fn adaptive(&self, a: f64, b: f64, whole: Integrals, scale: f64, depth: u32) -> Result<Integrals> {
        let m = 0.5 * (a + b);
        let left = self.panel(a, m)?;
        let right = self.panel(m, b)?;
        let split = left.add(&right);
        if depth >= MAX_DEPTH || split.distance(&whole) <= PANEL_TOL * scale * (b - a) {
            return Ok(split);
        }
        Ok(self
            .adaptive(a, m, left, scale, depth + 1)?
            .add(&self.adaptive(m, b, right, scale, depth + 1)?))
    }
}

fn six_terms<P: Potential + ?Sized>(
    model: &P,
    s0: &PhaseState,
    q1: &[f64],
    h: f64,
    n: usize,
) -> Result<[f64; 6]> {
    let seg = Segment {
        model,
        q0: &s0.q,
        q1,
        p0: &s0.p,
        g0: model.grad(&s0.q),
        rule: GaussLegendre::new(n),
    };
    let whole = seg.panel(0.0, 1.0)?;
    let scale = whole.components().fold(1.0f64, |m, x| m.max(x.abs()));
    let ints = seg.adaptive(0.0, 1.0, whole, scale, 0)?;
    let h2 = h * h;
    let h4 = h2 * h2;
    let terms = [
        h2 * ints.i1,
        h2 * h * ints.i2,
        -h4 / 4.0 * ints.i3,
        h4 / 8.0 * norm(&ints.ap).powi(2),
        -h4 * h / 8.0 * dot(&ints.ag, &ints.ap),
        h4 * h2 / 32.0 * norm(&ints.ag).powi(2),
    ];
    if terms.iter().all(|x| x.is_finite()) {
        Ok(terms)
    } else {
        Err(Error::numeric("non-finite term in energy decomposition"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Family;

    #[test]
    fn quadratic_worked_example() {
        let u = Family::standard_gaussian(1);
        let s0 = PhaseState::new(vec![1.0], vec![0.0]).unwrap();
        let e = energy_decomposition(&u, &s0, 0.5, 32).unwrap();
        assert_eq!(e.direct, -0.00732421875);
        assert!((e.terms[2] + 0.0078125).abs() < 1e-15);
        assert_eq!(e.terms[3], 0.0);
        assert!((e.terms[5] - 4.8828125e-4).abs() < 1e-15);
        assert!(e.terms[0].abs() < 1e-16 && e.terms[1].abs() < 1e-16);
        assert!(e.residual < 1e-15);
    }

    #[test]
    fn stationary_point_is_all_zero() {
        let u = Family::standard_gaussian(2);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let e = energy_decomposition(&u, &s0, 0.7, 16).unwrap();
        assert_eq!(e.terms, [0.0; 6]);
        assert_eq!(e.direct, 0.0);
    }

    #[test]
    fn preconditions() {
        let s0 = PhaseState::new(vec![1.0], vec![0.0]).unwrap();
        assert!(energy_decomposition(&Family::standard_gaussian(1), &s0, 0.5, 4).is_err());
        struct NoHess;
        impl Potential for NoHess {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, q: &[f64]) -> f64 {
                q[0] * q[0]
            }
            fn grad_into(&self, q: &[f64], out: &mut [f64]) {
                out[0] = 2.0 * q[0];
            }
        }
        assert!(matches!(
            energy_decomposition(&NoHess, &s0, 0.5, 16),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn power_potential_residual() {
        let u = Family::power(2, 1.0, 0.75);
        let s0 = PhaseState::new(vec![1.3, -0.4], vec![0.8, 1.1]).unwrap();
        let e = energy_decomposition(&u, &s0, 0.9, 32).unwrap();
        assert!(e.residual < 1e-9, "{}", e.residual);
    }
}
