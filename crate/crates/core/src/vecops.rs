//! Small dense-vector helpers on slices.

use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform direction on the unit sphere (normalized Gaussian draw).
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let z = standard_normal(rng, d);
        let n = norm(&z);
        if n > 1e-300 {
            return scale(&z, 1.0 / n);
        }
    }
}

/// Uniform point in the ball of the given radius.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    scale(&unit_vector(rng, d), r)
}

/// `‖a − b‖ / max(‖b‖, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(b).max(1.0)
}
