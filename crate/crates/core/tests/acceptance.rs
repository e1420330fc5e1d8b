//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances and runtime budgets are pinned below.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hmc_lab::diagnostics::stats::{ks_pvalue, ks_statistic, normal_cdf};
use hmc_lab::diagnostics::{
    drift_estimate, energy_decomposition, horizon_scan, rejection_mass, smallset_probe, tail_acceptance, tv_decay,
    TvStart, DEFAULT_A_GRID, DEFAULT_QUAD_NODES, HORIZON_RADII,
};
use hmc_lab::integrator::{closed_form_position, leapfrog_final, reversibility_residual, volume_symplectic_residual};
use hmc_lab::kernel::{run_chain, ScheduleEntry};
use hmc_lab::potential::{check_a1, check_a2, DEFAULT_RADII};
use hmc_lab::rng::stream;
use hmc_lab::vecops::{rel_err, uniform_in_ball};
use hmc_lab::{Family, KernelSpec, LeapfrogConfig, PhaseState, RandomizedSchedule};

const REVERSIBILITY_TOL: f64 = 1e-10;
const VOLUME_TOL: f64 = 1e-5;
const SYMPLECTIC_TOL: f64 = 1e-5;
const CLOSED_FORM_TOL: f64 = 1e-12;
const ENERGY_RESIDUAL_TOL: f64 = 1e-9;
const QUADRATIC_CLOSED_FORM_TOL: f64 = 1e-12;
const DRIFT_RATIO_MAX: f64 = 0.95;
const REJECTION_DECAY: f64 = 0.1;
const MEAN_TOL: f64 = 0.02;
const VARIANCE_TOL: f64 = 0.05;
const KS_ALPHA: f64 = 0.01;
/// Thinning stride for the KS test, so that the retained draws are close to
/// independent.
const KS_STRIDE: usize = 10;
const TV_R2_MIN: f64 = 0.9;
/// Relative tolerance for the free-particle M̃; the map is affine but its
/// estimate carries rounding from the position map solve.
const M_TILDE_REL_TOL: f64 = 1e-9;

type Verdict = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn families() -> Vec<(&'static str, Family, f64)> {
    vec![
        ("flat", Family::flat(3), 0.2),
        ("gaussian", Family::standard_gaussian(3), 0.2),
        ("power", Family::power(3, 1.0, 0.75), 0.2),
        ("homogeneous_perturbed", Family::homogeneous_perturbed(3, 1.5, 0.1), 0.2),
        ("double_well", Family::double_well(3, 1.0), 0.05),
    ]
}

fn random_state(rng: &mut hmc_lab::rng::StreamRng, d: usize, radius: f64) -> PhaseState {
    let q = uniform_in_ball(rng, d, radius);
    let p = uniform_in_ball(rng, d, radius);
    PhaseState::new(q, p).unwrap()
}

fn c1_integrator() -> Verdict {
    let steps = 10;
    let (mut rev, mut det, mut symp, mut cf) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut ok = true;
    for (i, (_, model, h)) in families().into_iter().enumerate() {
        let cfg = LeapfrogConfig::new(h, steps).unwrap();
        let mut rng = stream(101, i as u64);
        for _ in 0..50 {
            let s0 = random_state(&mut rng, 3, 3.0);
            let r = reversibility_residual(&model, &s0, &cfg).unwrap() / (1.0 + s0.norm());
            let (dv, ds) = volume_symplectic_residual(&model, &s0, &cfg, None).unwrap();
            let end = leapfrog_final(&model, &s0, &cfg).unwrap();
            let c = rel_err(&closed_form_position(&model, &s0, h, steps).unwrap(), &end.q);
            rev = rev.max(r);
            det = det.max(dv);
            symp = symp.max(ds);
            cf = cf.max(c);
            ok &= r <= REVERSIBILITY_TOL && dv <= VOLUME_TOL && ds <= SYMPLECTIC_TOL && c <= CLOSED_FORM_TOL;
        }
    }
    check(
        ok,
        format!("5 families x 50 states: max reversibility {rev:.1e}, |det-1| {det:.1e}, symplectic {symp:.1e}, closed form {cf:.1e}"),
    )
}

fn c2_energy() -> Verdict {
    let mut worst = 0.0f64;
    for (i, (_, model, h)) in families().into_iter().enumerate() {
        let mut rng = stream(202, i as u64);
        for _ in 0..100 {
            let s0 = random_state(&mut rng, 3, 2.5);
            let e = energy_decomposition(&model, &s0, h, DEFAULT_QUAD_NODES).unwrap();
            worst = worst.max(e.residual);
        }
    }
    // U = q²/2: A_t ≡ 1, g0 = q0, so each integral is elementary.
    let model = Family::standard_gaussian(1);
    let mut quad_worst = 0.0f64;
    let mut rng = stream(203, 0);
    let mut cases: Vec<(f64, f64, f64)> = vec![(1.0, 0.0, 0.5)];
    for _ in 0..100 {
        let s = random_state(&mut rng, 1, 2.0);
        cases.push((s.q[0], s.p[0], 0.1 + (s.q[0] + s.p[0]).abs() / 4.0));
    }
    let mut worked = f64::NAN;
    for (k, &(q0, p0, h)) in cases.iter().enumerate() {
        let analytic = [
            0.0,
            h.powi(3) * p0 * q0 / 4.0,
            -h.powi(4) * q0 * q0 / 8.0,
            h.powi(4) * p0 * p0 / 8.0,
            -h.powi(5) * q0 * p0 / 8.0,
            h.powi(6) * q0 * q0 / 32.0,
        ];
        let total: f64 = analytic.iter().sum();
        let e = energy_decomposition(&model, &PhaseState::new(vec![q0], vec![p0]).unwrap(), h, DEFAULT_QUAD_NODES).unwrap();
        quad_worst = quad_worst.max((total - e.direct).abs());
        for (a, b) in analytic.iter().zip(&e.terms) {
            quad_worst = quad_worst.max((a - b).abs());
        }
        if k == 0 {
            worked = e.direct;
        }
    }
    check(
        worst <= ENERGY_RESIDUAL_TOL && quad_worst <= QUADRATIC_CLOSED_FORM_TOL && worked == -0.00732421875,
        format!("max residual {worst:.1e} over 5x100 states; quadratic closed form error {quad_worst:.1e}; worked dH {worked}"),
    )
}

fn c3_horizon() -> Verdict {
    let model = Family::power(2, 1.0, 0.75);
    let scan = horizon_scan(&model, &HORIZON_RADII, 0.9, 1.0, 15).unwrap();
    let t: Vec<usize> = scan.rows.iter().map(|r| r.t_tilde).collect();
    check(scan.nondecreasing() && t[3] > t[0], format!("T_tilde over r = 1e1..1e4: {t:?}"))
}

fn c4_tail() -> Verdict {
    let power = Family::power(2, 1.0, 0.75);
    let p = tail_acceptance(&power, &LeapfrogConfig::new(0.9, 10).unwrap(), &[1e4], 0.25, 1000, 404).unwrap();
    let gauss = Family::standard_gaussian(2);
    let g = tail_acceptance(&gauss, &LeapfrogConfig::new(0.1, 10).unwrap(), &[1e4], 0.25, 1000, 405).unwrap();
    let (pf, gf) = (p.rows[0].fraction, g.rows[0].fraction);
    check(
        pf == 1.0 && gf == 1.0,
        format!("fraction dH <= 0 at r = 1e4: power {pf} ({} violations), gaussian {gf}", p.rows[0].n_failed),
    )
}

fn c5_drift() -> Verdict {
    let cfg = LeapfrogConfig::new(0.9, 10).unwrap();
    let power = Family::power(2, 1.0, 0.75);
    let rep = drift_estimate(&power, &cfg, &DEFAULT_A_GRID, &[1e3], 10_000, 505).unwrap();
    let best = rep
        .at_radius(1e3)
        .into_iter()
        .map(|(a, p)| (a, p.ratio + 3.0 * p.stderr))
        .fold((f64::NAN, f64::INFINITY), |m, x| if x.1 < m.1 { x } else { m });
    let flat = drift_estimate(&Family::flat(2), &cfg, &DEFAULT_A_GRID, &[1e3], 10_000, 506).unwrap();
    let flat_min = flat.at_radius(1e3).iter().map(|(_, p)| p.ratio).fold(f64::INFINITY, f64::min);
    check(
        best.1 <= DRIFT_RATIO_MAX && flat_min >= 1.0,
        format!(
            "power r = 1e3: best a = {} with ratio + 3se = {:.4}; flat control min ratio {flat_min:.4}",
            best.0, best.1
        ),
    )
}

fn c6_rejection() -> Verdict {
    let model = Family::power(2, 1.0, 0.75);
    let rows = rejection_mass(&model, &LeapfrogConfig::new(0.9, 10).unwrap(), 0.1, &HORIZON_RADII, 10_000, 606).unwrap();
    let (first, last) = (rows[0].mass, rows[3].mass);
    check(
        first > 0.0 && last <= REJECTION_DECAY * first,
        format!("mass r = 1e1: {first:.4e}, r = 1e4: {last:.4e}"),
    )
}

fn moments_and_ks(spec: &KernelSpec, seed: u64) -> (bool, String) {
    let model = Family::standard_gaussian(1);
    let burn = 1_000;
    let run = run_chain(&model, &[0.0], spec, burn + 100_000, seed).unwrap();
    let x: Vec<f64> = run.samples[burn..].iter().map(|q| q[0]).collect();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let thinned: Vec<f64> = x.iter().step_by(KS_STRIDE).copied().collect();
    let p = ks_pvalue(ks_statistic(&thinned, normal_cdf), thinned.len());
    (
        mean.abs() <= MEAN_TOL && (var - 1.0).abs() <= VARIANCE_TOL && p > KS_ALPHA,
        format!("mean {mean:.4}, var {var:.4}, KS p {p:.3}"),
    )
}

fn c7_stationarity() -> Verdict {
    let (a, da) = moments_and_ks(&KernelSpec::Hmc(LeapfrogConfig::new(0.5, 5).unwrap()), 707);
    let schedule = RandomizedSchedule::new(vec![
        ScheduleEntry { weight: 0.5, step_size: 0.5, n_steps: 5 },
        ScheduleEntry { weight: 0.3, step_size: 0.4, n_steps: 6 },
        ScheduleEntry { weight: 0.2, step_size: 0.6, n_steps: 4 },
    ])
    .unwrap();
    let (b, db) = moments_and_ks(&KernelSpec::Randomized { schedule }, 708);
    check(a && b, format!("fixed: {da}; mixture: {db}"))
}

fn c8_tv() -> Verdict {
    let model = Family::standard_gaussian(1);
    let spec = KernelSpec::Hmc(LeapfrogConfig::new(0.5, 5).unwrap());
    let checkpoints: Vec<usize> = (0..=40).collect();
    let curve = tv_decay(&model, &spec, &TvStart::Point { q0: vec![10.0] }, &checkpoints, 1000, 30, 808).unwrap();
    let control = tv_decay(&model, &spec, &TvStart::Stationary, &checkpoints, 1000, 30, 809).unwrap();
    let (rho, r2) = (curve.rho_hat.unwrap_or(f64::NAN), curve.r2.unwrap_or(f64::NAN));
    check(
        rho < 1.0 && r2 >= TV_R2_MIN && control.rho_hat.is_none(),
        format!(
            "q0 = 10: rho_hat {rho:.4}, R^2 {r2:.4}, {} fit points; stationary control rate: {:?}",
            curve.fit_iterations.len(),
            control.rho_hat
        ),
    )
}

fn c9_smallset() -> Verdict {
    let cfg = LeapfrogConfig::new(0.5, 3).unwrap();
    let g = smallset_probe(&Family::standard_gaussian(1), &cfg, 2.0, 2.0, 100, 909).unwrap();
    let f = smallset_probe(&Family::flat(1), &cfg, 2.0, 2.0, 100, 910).unwrap();
    let predicted = (2.0 + 2.0) / cfg.duration();
    let err = (f.m_tilde - predicted).abs() / predicted;
    check(
        g.coverage_fraction == 1.0 && g.epsilon_hat > 0.0 && err <= M_TILDE_REL_TOL,
        format!(
            "gaussian: coverage {}, eps_hat {:.4e}; free particle M_tilde {} vs (M+R)/(Th) = {predicted} (rel {err:.1e})",
            g.coverage_fraction, g.epsilon_hat, f.m_tilde
        ),
    )
}

fn c10_assumptions() -> Verdict {
    let n = 200;
    let gauss = Family::standard_gaussian(2);
    let power = Family::power(2, 1.0, 0.75);
    let well = Family::double_well(2, 1.0);
    let g1 = check_a1(&gauss, 1.0, &DEFAULT_RADII, n, 1001).unwrap().passed();
    let g2 = check_a2(&gauss, 2.0, &DEFAULT_RADII, n, 1002).unwrap().passed();
    let p1 = check_a1(&power, 0.5, &DEFAULT_RADII, n, 1003).unwrap().passed();
    let p2 = check_a2(&power, 1.5, &DEFAULT_RADII, n, 1004).unwrap().passed();
    let w = check_a1(&well, 1.0, &DEFAULT_RADII, n, 1005).unwrap();
    let w_growth = w.condition("A1.ii").map(|c| c.pass);
    check(
        g1 && g2 && p1 && p2 && w_growth == Some(false),
        format!("gaussian A1(1) {g1}, A2(2) {g2}; power A1(0.5) {p1}, A2(1.5) {p2}; double-well A1(1) growth pass = {w_growth:?}"),
    )
}

const REPRO_CONFIGS: [(&str, &str); 10] = [
    ("sample", "[potential]\nvariant = \"power\"\nkappa = 0.75\ndim = 2\n[kernel]\nschedule = [{ weight = 0.6, h = 0.5, steps = 4 }, { weight = 0.4, h = 0.9, steps = 2 }]\n[sample]\nn = 2000\nq0 = [3.0, -1.0]\n"),
    ("trace-energy", "[potential]\nvariant = \"double_well\"\ndim = 2\n[kernel]\nh = 0.05\nsteps = 50\n[trace-energy]\nq0 = [1.5, 0.2]\np0 = [0.0, 1.0]\n"),
    ("horizon", "[potential]\nvariant = \"power\"\nkappa = 0.75\ndim = 2\n[kernel]\nh = 0.9\nsteps = 1\n"),
    ("tail-accept", "[potential]\nvariant = \"power\"\nkappa = 0.75\ndim = 2\n[kernel]\nh = 0.9\nsteps = 10\n[tail-accept]\nn_momenta = 700\nhorizon_t_max = 15\n"),
    ("drift", "[potential]\nvariant = \"power\"\nkappa = 0.75\ndim = 2\n[kernel]\nh = 0.9\nsteps = 10\n[drift]\nn_momenta = 1500\n"),
    ("rejection-mass", "[potential]\nvariant = \"power\"\nkappa = 0.75\ndim = 2\n[kernel]\nh = 0.9\nsteps = 10\n[rejection-mass]\nn_momenta = 1500\n"),
    ("smallset", "[potential]\nvariant = \"gaussian\"\ndim = 2\n[kernel]\nh = 0.5\nsteps = 3\n[smallset]\ngrid_n = 10\n"),
    ("tv-decay", "[potential]\nvariant = \"gaussian\"\ndim = 1\n[kernel]\nh = 0.5\nsteps = 5\n[tv-decay]\nq0 = [10.0]\nchains = 1000\ncheckpoints = [0, 1, 2, 4, 8, 16]\n"),
    ("check-assumptions", "[potential]\nvariant = \"homogeneous_perturbed\"\nm = 1.5\ndim = 2\n[check-assumptions]\nm = 1.5\nbeta = 0.5\nn_samples = 100\n"),
    ("decompose-energy", "[potential]\nvariant = \"power\"\nkappa = 0.75\ndim = 2\n[kernel]\nh = 0.4\nsteps = 1\n[decompose-energy]\nn_states = 50\n"),
];

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn c11_reproducibility() -> Verdict {
    let root = tempfile::TempDir::new().unwrap();
    let mut mismatched = Vec::new();
    let mut n_files = 0;
    for (name, body) in REPRO_CONFIGS {
        let mut outputs = Vec::new();
        for (run, workers) in ["1", "8", "1", "8"].iter().enumerate() {
            let out = format!("{name}-{run}");
            let cfg = root.path().join(format!("{out}.toml"));
            fs::write(&cfg, format!("experiment = \"{name}\"\nseed = 1111\noutput_dir = \"{out}\"\n{body}")).unwrap();
            let status = Command::new(env!("CARGO_BIN_EXE_hmc-lab"))
                .current_dir(root.path())
                .env("HMC_LAB_WORKERS", workers)
                .arg("run")
                .arg(&cfg)
                .output()
                .unwrap();
            if status.status.code() != Some(0) {
                return Err(format!("{name} exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(csv_files(&root.path().join(&out)));
        }
        n_files += outputs[0].len();
        if outputs[0].is_empty() || outputs.iter().any(|o| o != &outputs[0]) {
            mismatched.push(name);
        }
    }
    check(
        mismatched.is_empty(),
        format!("10 experiments x 4 runs (workers 1, 8, 1, 8), {n_files} CSVs per run set; mismatches: {mismatched:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("integrator identities", Duration::from_secs(30), c1_integrator),
        ("energy decomposition", Duration::from_secs(10), c2_energy),
        ("negative-energy horizon over radii", Duration::from_secs(5), c3_horizon),
        ("tail acceptance", Duration::from_secs(60), c4_tail),
        ("drift", Duration::from_secs(120), c5_drift),
        ("rejection-mass decay", Duration::from_secs(120), c6_rejection),
        ("stationarity and moments", Duration::from_secs(60), c7_stationarity),
        ("geometric TV decay", Duration::from_secs(300), c8_tv),
        ("small-set probe", Duration::from_secs(60), c9_smallset),
        ("assumption probes", Duration::from_secs(30), c10_assumptions),
        ("reproducibility across worker counts", Duration::from_secs(300), c11_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let (ok, detail) = match verdict {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.2}s / {}s{}] {}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" },
            detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
