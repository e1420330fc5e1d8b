use rand::RngCore;

use super::{FamilyTag, Potential};
use crate::error::{Error, Result};
use crate::vecops::{all_finite, norm};

/// Default central-difference step for gradients at `q`.
pub fn default_fd_step(q: &[f64]) -> f64 {
    1e-5 * (1.0 + norm(q))
}

/// Central-difference gradient of `U` at `q`.
pub fn finite_diff_grad<P: Potential + ?Sized>(model: &P, q: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::config("step", "must be > 0"));
    }
    let mut x = q.to_vec();
    let mut out = Vec::with_capacity(q.len());
    for i in 0..q.len() {
        x[i] = q[i] + step;
        let up = model.value(&x);
        x[i] = q[i] - step;
        let down = model.value(&x);
        x[i] = q[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite potential at stencil point along coordinate {i}"
            )));
        }
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Central-difference `D²U(q) v` from gradients, step `1e−4·(1+‖q‖)` along
/// the unit direction of `v`.
pub fn finite_diff_hess_dir<P: Potential + ?Sized>(model: &P, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let vn = norm(v);
    if vn == 0.0 {
        return Ok(vec![0.0; q.len()]);
    }
    let eps = 1e-4 * (1.0 + norm(q)) / vn;
    let plus: Vec<f64> = q.iter().zip(v).map(|(x, d)| x + eps * d).collect();
    let minus: Vec<f64> = q.iter().zip(v).map(|(x, d)| x - eps * d).collect();
    let gp = model.grad(&plus);
    let gm = model.grad(&minus);
    if !(all_finite(&gp) && all_finite(&gm)) {
        return Err(Error::numeric("non-finite gradient in Hessian stencil"));
    }
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
}

/// Adds finite-difference second and third directional derivatives to a
/// potential that lacks them. Analytic derivatives of the wrapped model are
/// used where present.
#[derive(Debug, Clone)]
pub struct FiniteDifferenceDerivatives<P>(pub P);

impl<P: Potential> FiniteDifferenceDerivatives<P> {
    fn hess(&self, q: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        self.0
            .hess_dir(q, v)
            .or_else(|| finite_diff_hess_dir(&self.0, q, v).ok())
    }
}

impl<P: Potential> Potential for FiniteDifferenceDerivatives<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.0.value(q)
    }
    fn grad_into(&self, q: &[f64], out: &mut [f64]) {
        self.0.grad_into(q, out)
    }
    fn hess_dir(&self, q: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        self.hess(q, v)
    }
    fn third_dir(&self, q: &[f64], v: &[f64], w: &[f64]) -> Option<Vec<f64>> {
        if let Some(t) = self.0.third_dir(q, v, w) {
            return Some(t);
        }
        let wn = norm(w);
        if wn == 0.0 {
            return Some(vec![0.0; q.len()]);
        }
        let eps = 1e-3 * (1.0 + norm(q)) / wn;
        let plus: Vec<f64> = q.iter().zip(w).map(|(x, d)| x + eps * d).collect();
        let minus: Vec<f64> = q.iter().zip(w).map(|(x, d)| x - eps * d).collect();
        let hp = self.hess(&plus, v)?;
        let hm = self.hess(&minus, v)?;
        Some(hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_third(&self) -> bool {
        true
    }
    fn family(&self) -> FamilyTag {
        self.0.family()
    }
    fn growth_order(&self) -> Option<f64> {
        self.0.growth_order()
    }
    fn exact_sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.0.exact_sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Family;

    struct Cubic;
    impl Potential for Cubic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, q: &[f64]) -> f64 {
            q[0].powi(3)
        }
        fn grad_into(&self, q: &[f64], out: &mut [f64]) {
            out[0] = 3.0 * q[0] * q[0];
        }
    }

    #[test]
    fn gaussian_fd_gradient() {
        let g = finite_diff_grad(&Family::standard_gaussian(1), &[2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn power_fd_gradient() {
        let g = finite_diff_grad(&Family::power(1, 1.0, 0.75), &[1.0], 1e-5).unwrap();
        assert!((g[0] - 1.261_34).abs() < 1e-5);
    }

    #[test]
    fn flat_fd_gradient_is_zero() {
        let g = finite_diff_grad(&Family::flat(3), &[1.0, -2.0, 5.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn rejects_bad_step_and_nonfinite_values() {
        assert!(finite_diff_grad(&Family::flat(1), &[0.0], 0.0).is_err());
        struct Blowup;
        impl Potential for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, q: &[f64]) -> f64 {
                if q[0] > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            fn grad_into(&self, _q: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        assert!(matches!(
            finite_diff_grad(&Blowup, &[0.0], 1e-3),
            Err(Error::Numeric { .. })
        ));
    }

    #[test]
    fn fd_wrapper_supplies_second_and_third_derivatives() {
        let w = FiniteDifferenceDerivatives(Cubic);
        assert!(Cubic.hess_dir(&[1.0], &[1.0]).is_none());
        let h = w.hess_dir(&[2.0], &[1.0]).unwrap();
        assert!((h[0] - 12.0).abs() < 1e-6);
        let t = w.third_dir(&[2.0], &[1.0], &[1.0]).unwrap();
        assert!((t[0] - 6.0).abs() < 1e-4);
    }
}
