use hmc_lab::diagnostics::stats::{chi_square_gof, ks_pvalue, ks_statistic, normal_cdf};
use hmc_lab::kernel::{kernel_step, run_chain, run_chains, ScheduleEntry};
use hmc_lab::potential::Potential;
use hmc_lab::rng::stream;
use hmc_lab::{Family, KernelSpec, LeapfrogConfig, RandomizedSchedule};

fn hmc(h: f64, steps: usize) -> KernelSpec {
    KernelSpec::Hmc(LeapfrogConfig::new(h, steps).unwrap())
}

fn mixture() -> KernelSpec {
    KernelSpec::Randomized {
        schedule: RandomizedSchedule::new(vec![
            ScheduleEntry { weight: 0.5, step_size: 0.5, n_steps: 2 },
            ScheduleEntry { weight: 0.3, step_size: 0.3, n_steps: 4 },
            ScheduleEntry { weight: 0.2, step_size: 0.8, n_steps: 1 },
        ])
        .unwrap(),
    }
}

/// One kernel step from exact draws of `π` must again be distributed as `π`.
fn one_step_from_stationarity(spec: &KernelSpec) -> f64 {
    let model = Family::standard_gaussian(1);
    let mut rng = stream(11, 0);
    let mut out = Vec::with_capacity(20_000);
    for _ in 0..20_000 {
        let q0 = model.exact_sample(&mut rng).unwrap();
        let (step, _) = kernel_step(&model, &q0, spec, &mut rng).unwrap();
        out.push(step.q_next[0]);
    }
    ks_pvalue(ks_statistic(&out, normal_cdf), out.len())
}

#[test]
fn hmc_step_preserves_the_gaussian() {
    let p = one_step_from_stationarity(&hmc(1.2, 3));
    assert!(p > 0.01, "{p}");
}

#[test]
fn randomized_step_preserves_the_gaussian() {
    let p = one_step_from_stationarity(&mixture());
    assert!(p > 0.01, "{p}");
}

#[test]
fn schedule_frequencies_match_weights() {
    let model = Family::standard_gaussian(2);
    let run = run_chain(&model, &[0.0, 0.0], &mixture(), 30_000, 5).unwrap();
    let mut counts = [0usize; 3];
    for &i in &run.chosen {
        counts[i] += 1;
    }
    let n = run.len() as f64;
    let test = chi_square_gof(&counts, &[0.5 * n, 0.3 * n, 0.2 * n]);
    assert!(test.p_value > 0.01, "{test:?}");
}

/// CDF of `exp(−(q² + 1)^{3/4})` on a fine trapezoid grid.
fn power_cdf_table() -> (Vec<f64>, Vec<f64>) {
    let (lo, hi, n) = (-40.0, 40.0, 400_001);
    let dx = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * dx).collect();
    let dens: Vec<f64> = xs.iter().map(|x| (-(x * x + 1.0f64).powf(0.75)).exp()).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * dx * (dens[i] + dens[i - 1]);
    }
    let z = cdf[n - 1];
    (xs, cdf.into_iter().map(|c| c / z).collect())
}

#[test]
fn power_chain_matches_quadrature_cdf() {
    let model = Family::power(1, 1.0, 0.75);
    let runs = run_chains(&model, &vec![vec![0.0]; 8], &hmc(0.9, 10), 6_000, 17).unwrap();
    let samples: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.samples[1_000..].iter().step_by(5).map(|q| q[0]))
        .collect();
    let (xs, table) = power_cdf_table();
    let dx = xs[1] - xs[0];
    let cdf = |x: f64| {
        let t = ((x - xs[0]) / dx).clamp(0.0, (xs.len() - 2) as f64);
        let i = t.floor() as usize;
        table[i] + (t - i as f64) * (table[i + 1] - table[i])
    };
    let p = ks_pvalue(ks_statistic(&samples, cdf), samples.len());
    assert!(p > 0.01, "{p}");
}

#[test]
fn gaussian_2d_moments() {
    let model = Family::standard_gaussian(2);
    let run = run_chain(&model, &[3.0, -3.0], &hmc(0.4, 4), 40_000, 23).unwrap();
    for j in 0..2 {
        let x: Vec<f64> = run.samples[500..].iter().map(|q| q[j]).collect();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(m.abs() < 0.05, "{m}");
        assert!((v - 1.0).abs() < 0.06, "{v}");
    }
    let rate = run.acceptance_rate();
    assert!(rate > 0.9 && rate < 1.0, "{rate}");
}
