//! Experiment configuration files.
//!
//! A config is a TOML document with top-level keys `experiment`, `seed`
//! (required) and `output_dir`, a `[potential]` table, a `[kernel]` table
//! and an optional table named after the experiment holding its
//! parameters. Validation is strict: unknown keys, wrong types and range
//! violations are all collected and reported together.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};

use crate::diagnostics::{DEFAULT_A_GRID, DEFAULT_QUAD_NODES, HORIZON_RADII};
use crate::integrator::LeapfrogConfig;
use crate::kernel::{KernelSpec, RandomizedSchedule, ScheduleEntry};
use crate::potential::{FamilyConfig, FamilyVariant, DEFAULT_RADII};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    TraceEnergy,
    Horizon,
    TailAccept,
    Drift,
    RejectionMass,
    Smallset,
    TvDecay,
    CheckAssumptions,
    DecomposeEnergy,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Sample,
        Experiment::TraceEnergy,
        Experiment::Horizon,
        Experiment::TailAccept,
        Experiment::Drift,
        Experiment::RejectionMass,
        Experiment::Smallset,
        Experiment::TvDecay,
        Experiment::CheckAssumptions,
        Experiment::DecomposeEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::TraceEnergy => "trace-energy",
            Experiment::Horizon => "horizon",
            Experiment::TailAccept => "tail-accept",
            Experiment::Drift => "drift",
            Experiment::RejectionMass => "rejection-mass",
            Experiment::Smallset => "smallset",
            Experiment::TvDecay => "tv-decay",
            Experiment::CheckAssumptions => "check-assumptions",
            Experiment::DecomposeEnergy => "decompose-energy",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Sample => "run one HMC or randomized-HMC chain",
            Experiment::TraceEnergy => "record a leapfrog trajectory with per-step energy",
            Experiment::Horizon => "negative-energy horizon over a radius grid",
            Experiment::TailAccept => "fraction of energy-decreasing proposals in the tails",
            Experiment::Drift => "Foster-Lyapunov ratio E V_a(q_T) / V_a(q0) over radii",
            Experiment::RejectionMass => "mass of the rejection region inside the V_a sublevel set",
            Experiment::Smallset => "growth constants, preimage coverage and minorization constant",
            Experiment::TvDecay => "binned total-variation decay over many chains",
            Experiment::CheckAssumptions => "probe the regularity and tail assumptions",
            Experiment::DecomposeEnergy => "six-term energy identity on random states",
        }
    }

    pub fn from_name(s: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }

    fn needs_kernel(self) -> bool {
        !matches!(self, Experiment::CheckAssumptions)
    }

    fn allows_schedule(self) -> bool {
        matches!(self, Experiment::Sample | Experiment::TvDecay)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionChoice {
    A1,
    A2,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TvStartChoice {
    Point { q0: Vec<f64> },
    Stationary,
}

/// Experiment parameters after defaults are applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Sample {
        n: usize,
        q0: Vec<f64>,
        burn_in: usize,
    },
    TraceEnergy {
        q0: Vec<f64>,
        p0: Vec<f64>,
    },
    Horizon {
        radii: Vec<f64>,
        t_max: usize,
        p_norm: f64,
    },
    TailAccept {
        radii: Vec<f64>,
        gamma: f64,
        n_momenta: usize,
        horizon_t_max: Option<usize>,
    },
    Drift {
        a_grid: Vec<f64>,
        radii: Vec<f64>,
        n_momenta: usize,
    },
    RejectionMass {
        a: f64,
        radii: Vec<f64>,
        n_momenta: usize,
    },
    Smallset {
        radius: f64,
        m: f64,
        grid_n: usize,
    },
    TvDecay {
        start: TvStartChoice,
        checkpoints: Vec<usize>,
        chains: usize,
        bins: usize,
    },
    CheckAssumptions {
        assumption: AssumptionChoice,
        beta: f64,
        m: f64,
        radii: Vec<f64>,
        n_samples: usize,
        finite_difference: bool,
    },
    DecomposeEnergy {
        n_states: usize,
        state_radius: f64,
        quad_nodes: usize,
        tolerance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub potential: FamilyConfig,
    pub kernel: Option<KernelSpec>,
    pub params: Params,
    /// Check the experiment's invariant and fail with exit code 4 if it
    /// does not hold.
    pub verify: bool,
}

impl ExperimentConfig {
    pub fn leapfrog(&self) -> Option<LeapfrogConfig> {
        match &self.kernel {
            Some(KernelSpec::Hmc(cfg)) => Some(*cfg),
            _ => None,
        }
    }
}

/// All problems found in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                ConfigErrors(vec![format!("parse error at line {line}, column {col}: {msg}")])
            }
            None => ConfigErrors(vec![format!("parse error: {msg}")]),
        }
    })?;
    let mut v = Validator::default();
    let cfg = v.config(&table);
    match cfg {
        Some(cfg) if v.errors.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(v.errors)),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, col)
}

/// Reads typed values out of TOML tables, recording every problem.
#[derive(Default)]
struct Validator {
    errors: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Validator {
    fn err(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn unknown_keys(&mut self, t: &Table, path: &str, known: &[&str]) {
        let mut unknown: Vec<&String> = t.keys().filter(|k| !known.contains(&k.as_str())).collect();
        unknown.sort();
        for k in unknown {
            self.err(format!("unknown key `{}`", join(path, k)));
        }
    }

    fn f64_value(&mut self, v: &Value, field: &str) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.err(format!("{field} must be a number"));
                None
            }
        }
    }

    fn f64_opt(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        let field = join(path, key);
        t.get(key).and_then(|v| self.f64_value(v, &field))
    }

    fn f64_or(&mut self, t: &Table, path: &str, key: &str, default: f64) -> f64 {
        if t.contains_key(key) {
            self.f64_opt(t, path, key).unwrap_or(default)
        } else {
            default
        }
    }

    fn f64_req(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(format!("missing required key `{}`", join(path, key)));
            return None;
        }
        self.f64_opt(t, path, key)
    }

    fn usize_value(&mut self, v: &Value, field: &str) -> Option<usize> {
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(_) => {
                self.err(format!("{field} must be ≥ 0"));
                None
            }
            _ => {
                self.err(format!("{field} must be an integer"));
                None
            }
        }
    }

    fn usize_or(&mut self, t: &Table, path: &str, key: &str, default: usize) -> usize {
        match t.get(key) {
            Some(v) => self.usize_value(v, &join(path, key)).unwrap_or(default),
            None => default,
        }
    }

    fn bool_or(&mut self, t: &Table, path: &str, key: &str, default: bool) -> bool {
        match t.get(key) {
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.err(format!("{} must be true or false", join(path, key)));
                default
            }
            None => default,
        }
    }

    fn str_opt<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(format!("{} must be a string", join(path, key)));
                None
            }
            None => None,
        }
    }

    fn f64_list(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let field = join(path, key);
        match t.get(key)? {
            Value::Array(items) => {
                let n_err = self.errors.len();
                let out: Vec<f64> = items
                    .iter()
                    .enumerate()
                    .filter_map(|(i, v)| self.f64_value(v, &format!("{field}[{i}]")))
                    .collect();
                (self.errors.len() == n_err).then_some(out)
            }
            _ => {
                self.err(format!("{field} must be an array of numbers"));
                None
            }
        }
    }

    fn usize_list(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<usize>> {
        let field = join(path, key);
        match t.get(key)? {
            Value::Array(items) => {
                let n_err = self.errors.len();
                let out: Vec<usize> = items
                    .iter()
                    .enumerate()
                    .filter_map(|(i, v)| self.usize_value(v, &format!("{field}[{i}]")))
                    .collect();
                (self.errors.len() == n_err).then_some(out)
            }
            _ => {
                self.err(format!("{field} must be an array of integers"));
                None
            }
        }
    }

    fn positive(&mut self, field: &str, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.err(format!("{field} must be > 0"));
        }
    }

    fn radii(&mut self, t: &Table, path: &str, default: &[f64]) -> Vec<f64> {
        let field = join(path, "radii");
        let r = self.f64_list(t, path, "radii").unwrap_or_else(|| default.to_vec());
        if r.is_empty() {
            self.err(format!("{field} must not be empty"));
        } else if r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            self.err(format!("{field} entries must be > 0"));
        } else if r.windows(2).any(|w| w[0] >= w[1]) {
            self.err(format!("{field} must be strictly increasing"));
        }
        r
    }

    fn sub_table<'a>(&mut self, t: &'a Table, key: &str) -> Option<&'a Table> {
        match t.get(key) {
            Some(Value::Table(s)) => Some(s),
            Some(_) => {
                self.err(format!("`{key}` must be a table"));
                None
            }
            None => None,
        }
    }

    fn config(&mut self, root: &Table) -> Option<ExperimentConfig> {
        let experiment = match self.str_opt(root, "", "experiment") {
            Some(name) => match Experiment::from_name(name) {
                Some(e) => Some(e),
                None => {
                    let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                    self.err(format!(
                        "experiment must be one of {} (got `{name}`)",
                        names.join(", ")
                    ));
                    None
                }
            },
            None => {
                if !root.contains_key("experiment") {
                    self.err("missing required key `experiment`");
                }
                None
            }
        };
        let mut known = vec!["experiment", "seed", "output_dir", "potential", "kernel"];
        if let Some(e) = experiment {
            known.push(e.name());
        }
        self.unknown_keys(root, "", &known);

        let seed = match root.get("seed") {
            None => {
                self.err("missing required key `seed`");
                None
            }
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(_) => {
                self.err("seed must be a non-negative integer");
                None
            }
        };
        let output_dir = PathBuf::from(self.str_opt(root, "", "output_dir").unwrap_or("output"));

        let potential = match self.sub_table(root, "potential") {
            Some(t) => self.potential(t),
            None => {
                if !root.contains_key("potential") {
                    self.err("missing required table `[potential]`");
                }
                None
            }
        };

        let kernel = match (self.sub_table(root, "kernel"), experiment) {
            (Some(t), Some(e)) => self.kernel(t, e),
            (Some(t), None) => {
                self.kernel(t, Experiment::Sample);
                None
            }
            (None, Some(e)) if e.needs_kernel() => {
                if !root.contains_key("kernel") {
                    self.err(format!("missing required table `[kernel]` for experiment `{}`", e.name()));
                }
                None
            }
            _ => None,
        };

        let experiment = experiment?;
        let empty = Table::new();
        let params_table = self.sub_table(root, experiment.name()).unwrap_or(&empty);
        let verify = self.bool_or(params_table, experiment.name(), "verify", false);
        let dim = potential.as_ref().map_or(1, |p: &FamilyConfig| p.dim);
        let params = self.params(experiment, params_table, dim);

        let potential = potential?;
        if experiment.needs_kernel() && kernel.is_none() {
            return None;
        }
        Some(ExperimentConfig {
            experiment,
            seed: seed?,
            output_dir,
            potential,
            kernel,
            params,
            verify,
        })
    }

    fn potential(&mut self, t: &Table) -> Option<FamilyConfig> {
        let path = "potential";
        let variant_name = match self.str_opt(t, path, "variant") {
            Some(v) => v.to_string(),
            None => {
                if !t.contains_key("variant") {
                    self.err("missing required key `potential.variant`");
                }
                return None;
            }
        };
        let dim = match t.get("dim") {
            Some(v) => self.usize_value(v, "potential.dim").unwrap_or(1),
            None => {
                self.err("missing required key `potential.dim`");
                1
            }
        };
        let (variant, known): (Option<FamilyVariant>, &[&str]) = match variant_name.as_str() {
            "flat" => (Some(FamilyVariant::Flat), &["variant", "dim"]),
            "gaussian" => {
                let precision = self
                    .f64_list(t, path, "precision")
                    .unwrap_or_else(|| vec![1.0; dim]);
                (Some(FamilyVariant::Gaussian { precision }), &["variant", "dim", "precision"])
            }
            "power" => {
                let delta = self.f64_or(t, path, "delta", 1.0);
                let kappa = self.f64_req(t, path, "kappa");
                (
                    kappa.map(|kappa| FamilyVariant::Power { delta, kappa }),
                    &["variant", "dim", "delta", "kappa"],
                )
            }
            "homogeneous_perturbed" => {
                let m = self.f64_req(t, path, "m");
                let scale = self.f64_or(t, path, "scale", 0.1);
                (
                    m.map(|m| FamilyVariant::HomogeneousPerturbed { m, scale }),
                    &["variant", "dim", "m", "scale"],
                )
            }
            "double_well" => {
                let scale = self.f64_or(t, path, "scale", 1.0);
                (Some(FamilyVariant::DoubleWell { scale }), &["variant", "dim", "scale"])
            }
            other => {
                self.err(format!(
                    "potential.variant must be one of flat, gaussian, power, homogeneous_perturbed, double_well (got `{other}`)"
                ));
                return None;
            }
        };
        self.unknown_keys(t, path, known);
        let cfg = FamilyConfig { variant: variant?, dim };
        let errs = cfg.validate();
        if errs.is_empty() {
            Some(cfg)
        } else {
            for e in errs {
                self.err(e.to_string());
            }
            None
        }
    }

    fn kernel(&mut self, t: &Table, experiment: Experiment) -> Option<KernelSpec> {
        let path = "kernel";
        if t.contains_key("schedule") {
            self.unknown_keys(t, path, &["schedule"]);
            if !experiment.allows_schedule() {
                self.err(format!(
                    "kernel.schedule is only supported by `sample` and `tv-decay`, not `{}`",
                    experiment.name()
                ));
            }
            let items = match t.get("schedule") {
                Some(Value::Array(items)) => items,
                _ => {
                    self.err("kernel.schedule must be an array of tables");
                    return None;
                }
            };
            let mut entries = Vec::with_capacity(items.len());
            let n_err = self.errors.len();
            for (i, item) in items.iter().enumerate() {
                let p = format!("kernel.schedule[{i}]");
                let Value::Table(e) = item else {
                    self.err(format!("{p} must be a table"));
                    continue;
                };
                self.unknown_keys(e, &p, &["weight", "h", "steps"]);
                let weight = self.f64_req(e, &p, "weight");
                let h = self.f64_req(e, &p, "h");
                let steps = match e.get("steps") {
                    Some(v) => self.usize_value(v, &format!("{p}.steps")),
                    None => {
                        self.err(format!("missing required key `{p}.steps`"));
                        None
                    }
                };
                if let (Some(weight), Some(step_size), Some(n_steps)) = (weight, h, steps) {
                    entries.push(ScheduleEntry {
                        weight,
                        step_size,
                        n_steps,
                    });
                }
            }
            if self.errors.len() != n_err {
                return None;
            }
            match RandomizedSchedule::new(entries) {
                Ok(schedule) => Some(KernelSpec::Randomized { schedule }),
                Err(e) => {
                    let mut msg = e.to_string();
                    if msg.contains("sum to 1") {
                        msg.push_str(" (Σ a_i = 1 within 1e-12)");
                    }
                    self.err(msg);
                    None
                }
            }
        } else {
            self.unknown_keys(t, path, &["h", "steps"]);
            let h = self.f64_req(t, path, "h");
            let steps = match t.get("steps") {
                Some(v) => self.usize_value(v, "kernel.steps"),
                None => {
                    self.err("missing required key `kernel.steps`");
                    None
                }
            };
            let (h, steps) = (h?, steps?);
            match LeapfrogConfig::new(h, steps) {
                Ok(cfg) => Some(KernelSpec::Hmc(cfg)),
                Err(e) => {
                    self.err(e.to_string());
                    None
                }
            }
        }
    }

    fn vector(&mut self, t: &Table, path: &str, key: &str, dim: usize, default: Option<Vec<f64>>) -> Vec<f64> {
        let field = join(path, key);
        match self.f64_list(t, path, key) {
            Some(v) => {
                if v.len() != dim {
                    self.err(format!("{field} must have {dim} entries (potential.dim)"));
                }
                v
            }
            None => {
                if t.contains_key(key) {
                    return vec![0.0; dim];
                }
                match default {
                    Some(d) => d,
                    None => {
                        self.err(format!("missing required key `{field}`"));
                        vec![0.0; dim]
                    }
                }
            }
        }
    }

    fn params(&mut self, e: Experiment, t: &Table, dim: usize) -> Params {
        let path = e.name();
        let known: &[&str] = match e {
            Experiment::Sample => &["verify", "n", "q0", "burn_in"],
            Experiment::TraceEnergy => &["verify", "q0", "p0"],
            Experiment::Horizon => &["verify", "radii", "t_max", "p_norm"],
            Experiment::TailAccept => &["verify", "radii", "gamma", "n_momenta", "horizon_t_max"],
            Experiment::Drift => &["verify", "a_grid", "radii", "n_momenta"],
            Experiment::RejectionMass => &["verify", "a", "radii", "n_momenta"],
            Experiment::Smallset => &["verify", "R", "M", "grid_n"],
            Experiment::TvDecay => &["verify", "start", "q0", "checkpoints", "chains", "bins"],
            Experiment::CheckAssumptions => &[
                "verify",
                "assumption",
                "beta",
                "m",
                "radii",
                "n_samples",
                "finite_difference",
            ],
            Experiment::DecomposeEnergy => &["verify", "n_states", "state_radius", "quad_nodes", "tolerance"],
        };
        self.unknown_keys(t, path, known);
        match e {
            Experiment::Sample => {
                let n = self.usize_or(t, path, "n", 1000);
                if n < 1 {
                    self.err("sample.n must be at least 1");
                }
                let burn_in = self.usize_or(t, path, "burn_in", 0);
                if burn_in >= n.max(1) {
                    self.err("sample.burn_in must be smaller than sample.n");
                }
                Params::Sample {
                    n,
                    q0: self.vector(t, path, "q0", dim, Some(vec![0.0; dim])),
                    burn_in,
                }
            }
            Experiment::TraceEnergy => Params::TraceEnergy {
                q0: self.vector(t, path, "q0", dim, None),
                p0: self.vector(t, path, "p0", dim, None),
            },
            Experiment::Horizon => {
                let t_max = self.usize_or(t, path, "t_max", 15);
                if t_max < 1 {
                    self.err("horizon.t_max must be at least 1");
                }
                let p_norm = self.f64_or(t, path, "p_norm", 1.0);
                if !(p_norm >= 0.0 && p_norm.is_finite()) {
                    self.err("horizon.p_norm must be ≥ 0");
                }
                Params::Horizon {
                    radii: self.radii(t, path, &HORIZON_RADII),
                    t_max,
                    p_norm,
                }
            }
            Experiment::TailAccept => {
                let gamma = self.f64_or(t, path, "gamma", 0.25);
                if !(gamma >= 0.0) {
                    self.err("tail-accept.gamma must be ≥ 0");
                }
                let n_momenta = self.usize_or(t, path, "n_momenta", 1000);
                if n_momenta < 100 {
                    self.err("tail-accept.n_momenta must be at least 100");
                }
                let horizon_t_max = t
                    .get("horizon_t_max")
                    .and_then(|v| self.usize_value(v, "tail-accept.horizon_t_max"));
                if horizon_t_max == Some(0) {
                    self.err("tail-accept.horizon_t_max must be at least 1");
                }
                Params::TailAccept {
                    radii: self.radii(t, path, &HORIZON_RADII),
                    gamma,
                    n_momenta,
                    horizon_t_max,
                }
            }
            Experiment::Drift => {
                let a_grid = self.f64_list(t, path, "a_grid").unwrap_or_else(|| DEFAULT_A_GRID.to_vec());
                if a_grid.is_empty() || a_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                    self.err("drift.a_grid must be a nonempty list of positive numbers");
                }
                let n_momenta = self.usize_or(t, path, "n_momenta", 10_000);
                if n_momenta < 2 {
                    self.err("drift.n_momenta must be at least 2");
                }
                Params::Drift {
                    a_grid,
                    radii: self.radii(t, path, &[1e1, 1e2, 1e3]),
                    n_momenta,
                }
            }
            Experiment::RejectionMass => {
                let a = self.f64_or(t, path, "a", 0.1);
                self.positive("rejection-mass.a", a);
                let n_momenta = self.usize_or(t, path, "n_momenta", 10_000);
                if n_momenta < 2 {
                    self.err("rejection-mass.n_momenta must be at least 2");
                }
                Params::RejectionMass {
                    a,
                    radii: self.radii(t, path, &HORIZON_RADII),
                    n_momenta,
                }
            }
            Experiment::Smallset => {
                let radius = self.f64_or(t, path, "R", 2.0);
                self.positive("smallset.R", radius);
                let m = self.f64_or(t, path, "M", 2.0);
                self.positive("smallset.M", m);
                let grid_n = self.usize_or(t, path, "grid_n", 100);
                if grid_n < 1 {
                    self.err("smallset.grid_n must be at least 1");
                }
                Params::Smallset { radius, m, grid_n }
            }
            Experiment::TvDecay => {
                let start = match self.str_opt(t, path, "start").unwrap_or("point") {
                    "point" => TvStartChoice::Point {
                        q0: self.vector(t, path, "q0", dim, None),
                    },
                    "stationary" => TvStartChoice::Stationary,
                    other => {
                        self.err(format!("tv-decay.start must be `point` or `stationary` (got `{other}`)"));
                        TvStartChoice::Stationary
                    }
                };
                if dim > 2 {
                    self.err("tv-decay supports potential.dim 1 or 2");
                }
                let checkpoints = self.usize_list(t, path, "checkpoints").unwrap_or_else(|| (0..=40).collect());
                if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
                    self.err("tv-decay.checkpoints must be a nonempty increasing list");
                }
                let chains = self.usize_or(t, path, "chains", 1000);
                if chains < 1000 {
                    self.err("tv-decay.chains must be at least 1000");
                }
                let bins = self.usize_or(t, path, "bins", 30);
                if bins < 2 {
                    self.err("tv-decay.bins must be at least 2");
                }
                Params::TvDecay {
                    start,
                    checkpoints,
                    chains,
                    bins,
                }
            }
            Experiment::CheckAssumptions => {
                let assumption = match self.str_opt(t, path, "assumption").unwrap_or("both") {
                    "A1" | "a1" => AssumptionChoice::A1,
                    "A2" | "a2" => AssumptionChoice::A2,
                    "both" => AssumptionChoice::Both,
                    other => {
                        self.err(format!(
                            "check-assumptions.assumption must be `A1`, `A2` or `both` (got `{other}`)"
                        ));
                        AssumptionChoice::Both
                    }
                };
                let beta = self.f64_or(t, path, "beta", 1.0);
                if !(0.0..=1.0).contains(&beta) {
                    self.err("check-assumptions.beta must lie in [0, 1]");
                }
                let m = self.f64_or(t, path, "m", 2.0);
                if !(m > 1.0 && m <= 2.0) {
                    self.err("check-assumptions.m must lie in (1, 2]");
                }
                let n_samples = self.usize_or(t, path, "n_samples", 200);
                if n_samples < 2 {
                    self.err("check-assumptions.n_samples must be at least 2");
                }
                Params::CheckAssumptions {
                    assumption,
                    beta,
                    m,
                    radii: self.radii(t, path, &DEFAULT_RADII),
                    n_samples,
                    finite_difference: self.bool_or(t, path, "finite_difference", false),
                }
            }
            Experiment::DecomposeEnergy => {
                let n_states = self.usize_or(t, path, "n_states", 100);
                if n_states < 1 {
                    self.err("decompose-energy.n_states must be at least 1");
                }
                let state_radius = self.f64_or(t, path, "state_radius", 3.0);
                self.positive("decompose-energy.state_radius", state_radius);
                let quad_nodes = self.usize_or(t, path, "quad_nodes", DEFAULT_QUAD_NODES);
                if quad_nodes < 8 {
                    self.err("decompose-energy.quad_nodes must be at least 8");
                }
                let tolerance = self.f64_or(t, path, "tolerance", 1e-9);
                self.positive("decompose-energy.tolerance", tolerance);
                Params::DecomposeEnergy {
                    n_states,
                    state_radius,
                    quad_nodes,
                    tolerance,
                }
            }
        }
    }
}
