//! Binned total-variation distance between the law of `Q_n` over many
//! independent chains and the target, with a log-linear rate fit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{run_chains, KernelSpec};
use crate::potential::Potential;
use crate::quadrature::GaussLegendre;
use crate::rng::{derive_seed, stream};

/// Bins cover the region where `U − min U ≤ 20`.
const SUPPORT_LEVEL: f64 = 20.0;
const SUPPORT_GRID: usize = 2001;
const BOOTSTRAP_REPS: usize = 200;
/// Fit only uses checkpoints with `3·floor ≤ TV ≤ 1 − 3·floor`.
const FLOOR_FACTOR: f64 = 3.0;
const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TvStart {
    /// Every chain starts at the same point.
    Point { q0: Vec<f64> },
    /// Chains start from exact target draws.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvDecayCurve {
    pub iterations: Vec<usize>,
    pub tv_hat: Vec<f64>,
    /// Mean TV of `n_chains` exact target draws (multinomial bootstrap).
    pub noise_floor: f64,
    /// Checkpoints used in the fit.
    pub fit_iterations: Vec<usize>,
    pub rho_hat: Option<f64>,
    pub r2: Option<f64>,
    /// Why no rate was fitted.
    pub no_fit_reason: Option<String>,
    pub bins: usize,
    /// Bin edges per axis.
    pub range: Vec<(f64, f64)>,
    pub replications: usize,
    pub seed: u64,
}

impl TvDecayCurve {
    /// `n, tv_hat, used_in_fit`.
    pub fn to_csv(&self) -> String {
        let header = ["n".to_string(), "tv_hat".to_string(), "used_in_fit".to_string()];
        crate::format::csv(
            &header,
            self.iterations.iter().zip(&self.tv_hat).map(|(&n, &tv)| {
                vec![
                    n.to_string(),
                    crate::format::float(tv),
                    u8::from(self.fit_iterations.contains(&n)).to_string(),
                ]
            }),
        )
    }
}

/// Cell layout: `bins` cells per axis over a box, plus one overflow cell.
struct Binning {
    range: Vec<(f64, f64)>,
    bins: usize,
}

impl Binning {
    fn n_cells(&self) -> usize {
        self.bins.pow(self.range.len() as u32) + 1
    }

    fn cell(&self, q: &[f64]) -> usize {
        let mut idx = 0;
        for (k, &(lo, hi)) in self.range.iter().enumerate() {
            let x = q[k];
            if !(x >= lo && x < hi) {
                return self.n_cells() - 1;
            }
            let b = (((x - lo) / (hi - lo)) * self.bins as f64) as usize;
            idx = idx * self.bins + b.min(self.bins - 1);
        }
        idx
    }
}

/// Smallest box containing `{U − min U ≤ 20}`, found on a grid that is
/// widened until the level set is interior.
fn support_box<P: Potential + ?Sized>(model: &P) -> Result<Vec<(f64, f64)>> {
    let d = model.dim();
    let mut half = 1.0;
    while half <= 1e6 {
        let n = if d == 1 { SUPPORT_GRID } else { 401 };
        let axis: Vec<f64> = (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect();
        let values: Vec<(Vec<f64>, f64)> = if d == 1 {
            axis.iter().map(|&x| (vec![x], model.value(&[x]))).collect()
        } else {
            axis.iter()
                .flat_map(|&x| axis.iter().map(move |&y| vec![x, y]))
                .map(|q| {
                    let v = model.value(&q);
                    (q, v)
                })
                .collect()
        };
        let umin = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        if !umin.is_finite() {
            return Err(Error::numeric("potential is not finite on the binning grid"));
        }
        let inside: Vec<&Vec<f64>> = values
            .iter()
            .filter(|v| v.1 - umin <= SUPPORT_LEVEL)
            .map(|v| &v.0)
            .collect();
        let cell = 2.0 * half / (n - 1) as f64;
        let mut bx = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for q in &inside {
            for k in 0..d {
                bx[k].0 = bx[k].0.min(q[k]);
                bx[k].1 = bx[k].1.max(q[k]);
            }
        }
        let interior = bx.iter().all(|&(lo, hi)| lo > -half + cell && hi < half - cell);
        if interior {
            return Ok(bx.into_iter().map(|(lo, hi)| (lo - cell, hi + cell)).collect());
        }
        half *= 2.0;
    }
    Err(Error::numeric("target does not concentrate within |q| ≤ 1e6"))
}

/// Target probability of each cell by Gauss–Legendre quadrature of
/// `exp(−(U − U_ref))`; the overflow cell gets the remaining mass, taken
/// as zero.
fn target_masses<P: Potential + ?Sized>(model: &P, binning: &Binning) -> Vec<f64> {
    let rule = GaussLegendre::new(8);
    let d = binning.range.len();
    let bins = binning.bins;
    let edges: Vec<Vec<f64>> = binning
        .range
        .iter()
        .map(|&(lo, hi)| (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect())
        .collect();
    let u_ref = {
        let mid: Vec<f64> = binning.range.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        model.value(&mid)
    };
    let mut masses = vec![0.0; binning.n_cells()];
    if d == 1 {
        for i in 0..bins {
            masses[i] = rule.integrate(edges[0][i], edges[0][i + 1], |x| (u_ref - model.value(&[x])).exp());
        }
    } else {
        for i in 0..bins {
            for j in 0..bins {
                let mut acc = 0.0;
                for (x, wx) in rule.on_interval(edges[0][i], edges[0][i + 1]) {
                    for (y, wy) in rule.on_interval(edges[1][j], edges[1][j + 1]) {
                        acc += wx * wy * (u_ref - model.value(&[x, y])).exp();
                    }
                }
                masses[i * bins + j] = acc;
            }
        }
    }
    let z: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= z);
    masses
}

fn tv(counts: &[usize], n: usize, target: &[f64]) -> f64 {
    0.5 * counts
        .iter()
        .zip(target)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
}

/// Mean TV between `n` exact draws from the binned target and the target.
fn bootstrap_floor(target: &[f64], n: usize, seed: u64) -> f64 {
    let cdf: Vec<f64> = target
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut rng = stream(seed, 0);
    let mut total = 0.0;
    for _ in 0..BOOTSTRAP_REPS {
        let mut counts = vec![0usize; target.len()];
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let k = cdf.partition_point(|&c| c <= u).min(target.len() - 1);
            counts[k] += 1;
        }
        total += tv(&counts, n, target);
    }
    total / BOOTSTRAP_REPS as f64
}

/// Least-squares fit of `log TV_n = c + n log ρ`; returns `(ρ̂, R²)`.
fn log_linear_fit(points: &[(usize, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 0.0 };
    (slope.exp(), r2)
}

/// TV decay curve for a 1-D or 2-D target over `n_chains ≥ 1000` chains.
///
/// The noise floor is the mean TV of `n_chains` exact draws from the
/// binned target. The fit window excludes checkpoints below `3·floor`
/// (noise) and above `1 − 3·floor` (saturated, before the chains reach the
/// binned region). At least three checkpoints are needed for a fit.
pub fn tv_decay<P: Potential + ?Sized>(
    model: &P,
    spec: &KernelSpec,
    start: &TvStart,
    checkpoints: &[usize],
    n_chains: usize,
    bins: usize,
    seed: u64,
) -> Result<TvDecayCurve> {
    let d = model.dim();
    if !(1..=2).contains(&d) {
        return Err(Error::config("potential.dim", "TV decay supports dimension 1 or 2"));
    }
    if n_chains < 1000 {
        return Err(Error::config("n_chains", "must be at least 1000"));
    }
    if bins < 2 {
        return Err(Error::config("bins", "must be at least 2"));
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("checkpoints", "must be a nonempty increasing list"));
    }
    spec.validate()?;
    let starts: Vec<Vec<f64>> = match start {
        TvStart::Point { q0 } => {
            if q0.len() != d {
                return Err(Error::config("q0", format!("expected dimension {d}")));
            }
            vec![q0.clone(); n_chains]
        }
        TvStart::Stationary => {
            let mut rng = stream(derive_seed(seed, 1), 0);
            (0..n_chains)
                .map(|_| {
                    model
                        .exact_sample(&mut rng)
                        .ok_or_else(|| Error::Capability("stationary start needs exact target draws".into()))
                })
                .collect::<Result<_>>()?
        }
    };
    let binning = Binning {
        range: support_box(model)?,
        bins,
    };
    let target = target_masses(model, &binning);
    let noise_floor = bootstrap_floor(&target, n_chains, derive_seed(seed, 2));

    let n_max = *checkpoints.last().unwrap();
    let runs = if n_max > 0 {
        run_chains(model, &starts, spec, n_max, derive_seed(seed, 0))?
    } else {
        Vec::new()
    };
    if let Some(f) = runs.iter().find_map(|r| r.failure.as_ref()) {
        return Err(Error::numeric(format!("chain failed: {f}")));
    }
    let tv_hat: Vec<f64> = checkpoints
        .iter()
        .map(|&n| {
            let mut counts = vec![0usize; binning.n_cells()];
            for (k, q0) in starts.iter().enumerate() {
                let q = if n == 0 { q0 } else { &runs[k].samples[n - 1] };
                counts[binning.cell(q)] += 1;
            }
            tv(&counts, n_chains, &target)
        })
        .collect();

    let lo = FLOOR_FACTOR * noise_floor;
    let hi = 1.0 - FLOOR_FACTOR * noise_floor;
    let fit: Vec<(usize, f64)> = checkpoints
        .iter()
        .zip(&tv_hat)
        .filter(|(_, &t)| t >= lo && t <= hi)
        .map(|(&n, &t)| (n, t))
        .collect();
    let (rho_hat, r2, no_fit_reason) = if fit.len() < MIN_FIT_POINTS {
        let reason = if tv_hat.iter().all(|&t| t < lo) {
            "all checkpoints are within the noise floor".to_string()
        } else {
            format!("only {} checkpoints above the noise floor", fit.len())
        };
        (None, None, Some(reason))
    } else {
        let (rho, r2) = log_linear_fit(&fit);
        (Some(rho), Some(r2), None)
    };
    Ok(TvDecayCurve {
        iterations: checkpoints.to_vec(),
        tv_hat,
        noise_floor,
        fit_iterations: fit.iter().map(|p| p.0).collect(),
        rho_hat,
        r2,
        no_fit_reason,
        bins,
        range: binning.range,
        replications: n_chains,
        seed,
    })
}
