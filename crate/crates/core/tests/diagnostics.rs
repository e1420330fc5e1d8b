use hmc_lab::diagnostics::{
    drift_estimate, energy_decomposition, proposal_growth_probe, rejection_mass, smallset_probe, tail_acceptance,
    tv_decay, TvStart, DEFAULT_QUAD_NODES,
};
use hmc_lab::potential::Potential;
use hmc_lab::rng::stream;
use hmc_lab::vecops::uniform_in_ball;
use hmc_lab::{Family, KernelSpec, LeapfrogConfig, PhaseState};

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn energy_identity_on_every_family() {
    let families = [
        (Family::standard_gaussian(3), 0.4),
        (Family::power(3, 1.0, 0.75), 0.4),
        (Family::homogeneous_perturbed(3, 1.5, 0.1), 0.4),
        (Family::double_well(3, 1.0), 0.05),
    ];
    let mut rng = stream(2, 0);
    for (model, h) in families {
        assert!(model.has_hessian());
        for _ in 0..20 {
            let q = uniform_in_ball(&mut rng, 3, 2.5);
            let p = uniform_in_ball(&mut rng, 3, 2.5);
            let e = energy_decomposition(&model, &PhaseState::new(q, p).unwrap(), h, DEFAULT_QUAD_NODES).unwrap();
            assert!(e.residual <= 1e-9, "{model:?}: {e:?}");
        }
    }
}

#[test]
fn monte_carlo_diagnostics_ignore_thread_count() {
    let model = Family::power(2, 1.0, 0.75);
    let cfg = LeapfrogConfig::new(0.9, 10).unwrap();
    let radii = [10.0, 100.0];
    let run = || {
        (
            tail_acceptance(&model, &cfg, &radii, 0.25, 600, 4).unwrap(),
            drift_estimate(&model, &cfg, &[0.05, 0.5], &radii, 700, 4).unwrap(),
            rejection_mass(&model, &cfg, 0.1, &radii, 700, 4).unwrap(),
        )
    };
    let one = pool(1).install(run);
    let many = pool(8).install(run);
    assert_eq!(format!("{one:?}"), format!("{many:?}"));

    let gauss = Family::standard_gaussian(1);
    let spec = KernelSpec::Hmc(LeapfrogConfig::new(0.5, 5).unwrap());
    let start = TvStart::Point { q0: vec![10.0] };
    let tv = || tv_decay(&gauss, &spec, &start, &[0, 2, 4, 8], 1000, 20, 9).unwrap().to_csv();
    assert_eq!(pool(1).install(tv), pool(8).install(tv));
}

#[test]
fn flat_potential_has_no_drift_and_always_accepts() {
    let model = Family::flat(2);
    let cfg = LeapfrogConfig::new(0.9, 10).unwrap();
    let rep = drift_estimate(&model, &cfg, &[0.1, 0.5, 1.0], &[1000.0], 2000, 1).unwrap();
    for (_, p) in rep.at_radius(1000.0) {
        assert!(p.ratio >= 1.0, "{p:?}");
    }
    let tail = tail_acceptance(&model, &cfg, &[10.0, 1e4], 0.25, 200, 1).unwrap();
    assert!(tail.rows.iter().all(|r| r.fraction == 1.0));
}

#[test]
fn harmonic_growth_constants() {
    // One-dimensional Gaussian, h = 0.5, T = 3: q_T = A q0 + B p0 with
    // A = 0.0546875 and B = 1.03125, so g = q_T − Th p0 = A q0 − (Th − B) p0.
    let model = Family::standard_gaussian(1);
    let cfg = LeapfrogConfig::new(0.5, 3).unwrap();
    let g = proposal_growth_probe(&model, &cfg, 2.0, 8.0, 4096, 3).unwrap();
    let (a, b, th) = (0.0546875, 1.03125, 1.5);
    assert!((g.b - th).abs() < 1e-12);
    assert!((g.map_lipschitz - b).abs() < 1e-8, "{g:?}");
    // Shell maxima are sampled, so the envelope is approached from below.
    assert!((g.c1_hat - (th - b)).abs() < 1e-3, "{g:?}");
    assert!((g.c0_hat - a * 2.0).abs() < 1e-3, "{g:?}");
    assert!(g.condition_ok);
}

#[test]
fn smallset_covers_gaussian_ball() {
    let model = Family::standard_gaussian(2);
    let cfg = LeapfrogConfig::new(0.5, 3).unwrap();
    let probe = smallset_probe(&model, &cfg, 1.5, 1.5, 12, 8).unwrap();
    assert_eq!(probe.coverage_fraction, 1.0);
    assert!(probe.epsilon_hat > 0.0);
}
