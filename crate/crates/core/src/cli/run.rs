use std::fs;
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{AssumptionChoice, ExperimentConfig, Params, TvStartChoice};
use crate::diagnostics::{
    chain_diagnostics, drift_estimate, energy_decomposition, horizon_scan, rejection_mass, smallset_probe,
    tail_acceptance, tv_decay, HorizonScan, TvStart,
};
use crate::error::{Error, Result};
use crate::format::{self, float};
use crate::integrator::{leapfrog_run, PhaseState};
use crate::kernel::run_chain;
use crate::potential::{build_family, check_a1, check_a2, AssumptionReport, FiniteDifferenceDerivatives, Potential};
use crate::rng::stream;
use crate::vecops::uniform_in_ball;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Capability(_) => EXIT_CONFIG,
        Error::Numeric { .. } | Error::Oracle(_) | Error::InsufficientData(_) => EXIT_NUMERIC,
        Error::Io(_) | Error::Json(_) => EXIT_IO,
    }
}

/// In-memory result of an experiment: CSV files by name, a JSON summary
/// of the outputs, and the verdict of the optional invariant check.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub outputs: Value,
    /// `(holds, description)` of the experiment's invariant.
    pub check: (bool, String),
}

/// Runs the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let model = build_family(&cfg.potential)?;
    let lf = || {
        cfg.leapfrog()
            .ok_or_else(|| Error::config("kernel", "this experiment needs `h` and `steps`"))
    };
    match &cfg.params {
        Params::Sample { n, q0, burn_in } => {
            let spec = cfg.kernel.clone().ok_or_else(|| Error::config("kernel", "is required"))?;
            let run = run_chain(&model, q0, &spec, *n, cfg.seed)?;
            let mut outputs = run.summary_json();
            if run.len() > *burn_in {
                let mut kept = run.clone();
                kept.samples.drain(..*burn_in);
                kept.accepted.drain(..*burn_in);
                kept.proposal_dh.drain(..*burn_in);
                if let Ok(diag) = chain_diagnostics(&kept) {
                    outputs["diagnostics_after_burn_in"] = serde_json::to_value(diag)?;
                }
            }
            let ok = run.failure.is_none();
            Ok(Artifacts {
                files: vec![("chain.csv".into(), run.to_csv())],
                outputs,
                check: (ok, "chain completed without numeric failure".into()),
            })
        }
        Params::TraceEnergy { q0, p0 } => {
            let traj = leapfrog_run(&model, &PhaseState::new(q0.clone(), p0.clone())?, &lf()?)?;
            let total = traj.energies.last().unwrap() - traj.energies[0];
            Ok(Artifacts {
                files: vec![("trajectory.csv".into(), traj.to_csv())],
                outputs: json!({ "n_steps": traj.n_steps(), "total_dh": total }),
                check: (true, "no invariant".into()),
            })
        }
        Params::Horizon { radii, t_max, p_norm } => {
            let scan = horizon_scan(&model, radii, lf()?.step_size, *p_norm, *t_max)?;
            let mut files = vec![("horizon.csv".to_string(), scan.horizon_csv())];
            for row in &scan.rows {
                files.push((HorizonScan::trace_file_name(row.radius), HorizonScan::trace_csv(row)));
            }
            let t: Vec<usize> = scan.rows.iter().map(|r| r.t_tilde).collect();
            Ok(Artifacts {
                files,
                outputs: json!({ "t_tilde": t, "nondecreasing": scan.nondecreasing(), "q0_direction": "e_1", "p0_direction": "e_2" }),
                check: (scan.nondecreasing(), "T_tilde is nondecreasing in the radius".into()),
            })
        }
        Params::TailAccept {
            radii,
            gamma,
            n_momenta,
            horizon_t_max,
        } => {
            let cfg_lf = lf()?;
            let mut prof = tail_acceptance(&model, &cfg_lf, radii, *gamma, *n_momenta, cfg.seed)?;
            if let Some(t_max) = horizon_t_max {
                let scan = horizon_scan(&model, radii, cfg_lf.step_size, 1.0, *t_max)?;
                prof.horizon = Some(scan.rows.iter().map(|r| r.t_tilde).collect());
            }
            let mut header: Vec<String> = ["radius", "n_momenta", "n_failed", "fraction", "worst_dh"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            if prof.horizon.is_some() {
                header.push("T_tilde".into());
            }
            let rows = prof.rows.iter().enumerate().map(|(i, r)| {
                let mut row = vec![
                    float(r.radius),
                    r.n_momenta.to_string(),
                    r.n_failed.to_string(),
                    float(r.fraction),
                    float(r.worst_dh),
                ];
                if let Some(h) = &prof.horizon {
                    row.push(h[i].to_string());
                }
                row
            });
            let csv = format::csv(&header, rows);
            let last_one = prof.rows.last().is_some_and(|r| r.fraction == 1.0);
            Ok(Artifacts {
                files: vec![("tail_acceptance.csv".into(), csv)],
                outputs: serde_json::to_value(&prof)?,
                check: (last_one, "fraction with dH <= 0 is 1 at the largest radius".into()),
            })
        }
        Params::Drift {
            a_grid,
            radii,
            n_momenta,
        } => {
            let rep = drift_estimate(&model, &lf()?, a_grid, radii, *n_momenta, cfg.seed)?;
            let header: Vec<String> = ["a", "radius", "ratio", "log_ratio", "stderr", "rel_stderr", "n_failed"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows = rep.curves.iter().flat_map(|c| {
                c.points.iter().map(move |p| {
                    vec![
                        float(c.a),
                        float(p.radius),
                        float(p.ratio),
                        float(p.log_ratio),
                        float(p.stderr),
                        float(p.rel_stderr),
                        p.n_failed.to_string(),
                    ]
                })
            });
            let fit_header: Vec<String> = ["a", "lambda_hat", "b_hat"].iter().map(|s| s.to_string()).collect();
            let fit_rows = rep
                .curves
                .iter()
                .map(|c| vec![float(c.a), float(c.lambda_hat), float(c.b_hat)]);
            let r_max = *radii.last().unwrap();
            let drift_found = rep
                .at_radius(r_max)
                .iter()
                .any(|(_, p)| p.ratio.is_finite() && p.ratio + 3.0 * p.stderr < 1.0);
            Ok(Artifacts {
                files: vec![
                    ("drift.csv".into(), format::csv(&header, rows)),
                    ("drift_fit.csv".into(), format::csv(&fit_header, fit_rows)),
                ],
                outputs: json!({
                    "kernel": "proposal kernel before the accept step",
                    "report": rep,
                    "drift_at_largest_radius": drift_found,
                }),
                check: (drift_found, "some a has ratio + 3 stderr < 1 at the largest radius".into()),
            })
        }
        Params::RejectionMass { a, radii, n_momenta } => {
            let rows = rejection_mass(&model, &lf()?, *a, radii, *n_momenta, cfg.seed)?;
            let header: Vec<String> = ["radius", "mass", "stderr", "n_failed"].iter().map(|s| s.to_string()).collect();
            let csv = format::csv(
                &header,
                rows.iter()
                    .map(|r| vec![float(r.radius), float(r.mass), float(r.stderr), r.n_failed.to_string()]),
            );
            let first = rows.first().map_or(f64::NAN, |r| r.mass);
            let last = rows.last().map_or(f64::NAN, |r| r.mass);
            Ok(Artifacts {
                files: vec![("rejection_mass.csv".into(), csv)],
                outputs: json!({ "a": a, "rows": rows }),
                check: (
                    last <= 0.1 * first,
                    "mass at the largest radius is at most 0.1x the mass at the smallest".into(),
                ),
            })
        }
        Params::Smallset { radius, m, grid_n } => {
            let probe = smallset_probe(&model, &lf()?, *radius, *m, *grid_n, cfg.seed)?;
            let header: Vec<String> = [
                "R",
                "M",
                "M_tilde",
                "L_hat",
                "C0_hat",
                "C1_hat",
                "margin",
                "coverage_fraction",
                "epsilon_hat",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let row = vec![
                float(probe.radius),
                float(probe.m),
                float(probe.m_tilde),
                float(probe.l_hat),
                float(probe.growth.c0_hat),
                float(probe.growth.c1_hat),
                float(probe.growth.margin),
                float(probe.coverage_fraction),
                float(probe.epsilon_hat),
            ];
            let ok = probe.coverage_fraction == 1.0 && probe.epsilon_hat > 0.0;
            Ok(Artifacts {
                files: vec![("smallset.csv".into(), format::csv(&header, [row]))],
                outputs: serde_json::to_value(&probe)?,
                check: (ok, "coverage is 1 and epsilon_hat > 0".into()),
            })
        }
        Params::TvDecay {
            start,
            checkpoints,
            chains,
            bins,
        } => {
            let spec = cfg.kernel.clone().ok_or_else(|| Error::config("kernel", "is required"))?;
            let st = match start {
                TvStartChoice::Point { q0 } => TvStart::Point { q0: q0.clone() },
                TvStartChoice::Stationary => TvStart::Stationary,
            };
            let curve = tv_decay(&model, &spec, &st, checkpoints, *chains, *bins, cfg.seed)?;
            let ok = match start {
                TvStartChoice::Point { .. } => curve.rho_hat.is_some_and(|r| r < 1.0) && curve.r2.is_some_and(|r| r >= 0.9),
                TvStartChoice::Stationary => curve.rho_hat.is_none(),
            };
            let what = match start {
                TvStartChoice::Point { .. } => "rho_hat < 1 with R^2 >= 0.9",
                TvStartChoice::Stationary => "no rate is fitted from a stationary start",
            };
            Ok(Artifacts {
                files: vec![("tv_decay.csv".into(), curve.to_csv())],
                outputs: serde_json::to_value(&curve)?,
                check: (ok, what.into()),
            })
        }
        Params::CheckAssumptions {
            assumption,
            beta,
            m,
            radii,
            n_samples,
            finite_difference,
        } => {
            let run = |p: &dyn Potential| -> Result<Vec<AssumptionReport>> {
                let mut out = Vec::new();
                if matches!(assumption, AssumptionChoice::A1 | AssumptionChoice::Both) {
                    out.push(check_a1(p, *beta, radii, *n_samples, cfg.seed)?);
                }
                if matches!(assumption, AssumptionChoice::A2 | AssumptionChoice::Both) {
                    out.push(check_a2(p, *m, radii, *n_samples, cfg.seed)?);
                }
                Ok(out)
            };
            let reports = if *finite_difference {
                run(&FiniteDifferenceDerivatives(model.clone()))?
            } else {
                run(&model)?
            };
            let mut header: Vec<String> = ["assumption", "parameter", "condition", "pass", "constant"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend(radii.iter().map(|r| format!("worst_r{r}")));
            let rows = reports.iter().flat_map(|rep| {
                let name = match rep.assumption {
                    crate::potential::Assumption::A1 { .. } => "A1",
                    crate::potential::Assumption::A2 { .. } => "A2",
                };
                rep.per_condition.iter().map(move |c| {
                    let mut row = vec![
                        name.to_string(),
                        float(rep.parameter),
                        c.id.clone(),
                        c.pass.to_string(),
                        float(c.constant),
                    ];
                    row.extend(c.per_radius.iter().map(|&x| float(x)));
                    row
                })
            });
            let csv = format::csv(&header, rows);
            let ok = reports.iter().all(|r| r.passed());
            Ok(Artifacts {
                files: vec![("assumptions.csv".into(), csv)],
                outputs: json!({ "reports": reports, "all_passed": ok }),
                check: (ok, "every probed condition passes".into()),
            })
        }
        Params::DecomposeEnergy {
            n_states,
            state_radius,
            quad_nodes,
            tolerance,
        } => {
            let h = lf()?.step_size;
            let d = model.dim();
            let mut rng = stream(cfg.seed, 0);
            let mut header: Vec<String> = std::iter::once("i".to_string())
                .chain(format::indexed("q", d))
                .chain(format::indexed("p", d))
                .collect();
            header.extend(
                ["T1", "T2", "T3", "T4", "T5", "T6", "total", "direct", "residual"]
                    .iter()
                    .map(|s| s.to_string()),
            );
            let mut rows = Vec::with_capacity(*n_states);
            let mut worst: f64 = 0.0;
            for i in 0..*n_states {
                let q = uniform_in_ball(&mut rng, d, *state_radius);
                let p = uniform_in_ball(&mut rng, d, *state_radius);
                let e = energy_decomposition(&model, &PhaseState::new(q.clone(), p.clone())?, h, *quad_nodes)?;
                worst = worst.max(e.residual);
                let mut row = vec![i.to_string()];
                row.extend(q.iter().chain(&p).map(|&x| float(x)));
                row.extend(e.terms.iter().map(|&x| float(x)));
                row.extend([float(e.total), float(e.direct), float(e.residual)]);
                rows.push(row);
            }
            Ok(Artifacts {
                files: vec![("energy_decomposition.csv".into(), format::csv(&header, rows))],
                outputs: json!({ "max_residual": worst, "tolerance": tolerance, "step_size": h }),
                check: (worst <= *tolerance, format!("every residual is at most {tolerance:e}")),
            })
        }
    }
}

/// What `run` did, for the caller to turn into an exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub message: Option<String>,
}

/// Runs the experiment, writes its CSVs and `summary.json` under
/// `output_dir`, and maps the result to an exit code.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Outcome {
    let start = Instant::now();
    let result = execute(cfg);
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        return Outcome {
            code: EXIT_IO,
            message: Some(format!("cannot create {}: {e}", cfg.output_dir.display())),
        };
    }
    let (code, message, outputs, files, check) = match result {
        Ok(art) => {
            let failed = cfg.verify && !art.check.0;
            let code = if failed { EXIT_VERIFY } else { EXIT_OK };
            let msg = failed.then(|| format!("verification failed: {}", art.check.1));
            let names: Vec<String> = art.files.iter().map(|f| f.0.clone()).collect();
            for (name, content) in &art.files {
                if let Err(e) = fs::write(cfg.output_dir.join(name), content) {
                    return Outcome {
                        code: EXIT_IO,
                        message: Some(format!("cannot write {name}: {e}")),
                    };
                }
            }
            let check = json!({ "invariant": art.check.1, "holds": art.check.0, "enforced": cfg.verify });
            (code, msg, art.outputs, names, check)
        }
        Err(e) => {
            let code = exit_code(&e);
            (code, Some(e.to_string()), json!({ "error": e.to_string() }), Vec::new(), Value::Null)
        }
    };
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "workers": workers,
        "wall_time_seconds": wall,
        "exit_code": code,
        "inputs": cfg,
        "outputs": outputs,
        "check": check,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&summary).unwrap_or_else(|_| "{}".into());
    if let Err(e) = fs::write(cfg.output_dir.join("summary.json"), text + "\n") {
        return Outcome {
            code: EXIT_IO,
            message: Some(format!("cannot write summary.json: {e}")),
        };
    }
    Outcome { code, message }
}
