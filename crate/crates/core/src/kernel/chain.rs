use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kernel_step, KernelSpec};
use crate::error::{Error, Result};
use crate::format;
use crate::potential::Potential;
use crate::rng::stream;

/// The output of a chain: positions `Q_1..Q_n` (the start `Q_0` is not
/// included), acceptance flags and proposal energy differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub samples: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    pub proposal_dh: Vec<f64>,
    /// Schedule index used at each iteration (always 0 for plain HMC).
    pub chosen: Vec<usize>,
    /// Iterations whose proposal overflowed and was hard-rejected.
    pub flagged: Vec<usize>,
    pub kernel: KernelSpec,
    pub seed: u64,
    /// Set when the chain halted early; the recorded prefix stays valid.
    pub failure: Option<String>,
}

impl ChainRun {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }

    /// CSV with columns `iter, accepted, dh, q_0..q_{d−1}`; `iter` starts at 1.
    pub fn to_csv(&self) -> String {
        let d = self.samples.first().map_or(0, Vec::len);
        let header: Vec<String> = ["iter", "accepted", "dh"]
            .iter()
            .map(|s| s.to_string())
            .chain(format::indexed("q", d))
            .collect();
        let rows = (0..self.len()).map(|k| {
            [
                (k + 1).to_string(),
                u8::from(self.accepted[k]).to_string(),
                format::float(self.proposal_dh[k]),
            ]
            .into_iter()
            .chain(self.samples[k].iter().map(|&x| format::float(x)))
            .collect::<Vec<_>>()
        });
        format::csv(&header, rows)
    }

    /// `{n, acceptance_rate, seed, params}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.len(),
            "acceptance_rate": self.acceptance_rate(),
            "seed": self.seed,
            "params": self.kernel,
            "flagged": self.flagged.len(),
            "failure": self.failure,
        })
    }
}

/// Runs `n` iterations from `q0` on `stream(seed, 0)`.
pub fn run_chain<P: Potential + ?Sized>(
    model: &P,
    q0: &[f64],
    spec: &KernelSpec,
    n: usize,
    seed: u64,
) -> Result<ChainRun> {
    run_chain_with_rng(model, q0, spec, n, seed, &mut stream(seed, 0))
}

/// Like [`run_chain`] with a caller-supplied stream; `seed` is only echoed.
pub fn run_chain_with_rng<P, R>(
    model: &P,
    q0: &[f64],
    spec: &KernelSpec,
    n: usize,
    seed: u64,
    rng: &mut R,
) -> Result<ChainRun>
where
    P: Potential + ?Sized,
    R: RngCore + ?Sized,
{
    if n < 1 {
        return Err(Error::config("n", "must be at least 1"));
    }
    if q0.len() != model.dim() {
        return Err(Error::config(
            "q0",
            format!("expected dimension {}, got {}", model.dim(), q0.len()),
        ));
    }
    spec.validate()?;
    let mut run = ChainRun {
        samples: Vec::with_capacity(n),
        accepted: Vec::with_capacity(n),
        proposal_dh: Vec::with_capacity(n),
        chosen: Vec::with_capacity(n),
        flagged: Vec::new(),
        kernel: spec.clone(),
        seed,
        failure: None,
    };
    let mut q = q0.to_vec();
    for it in 0..n {
        match kernel_step(model, &q, spec, rng) {
            Ok((out, i)) => {
                if out.flagged {
                    run.flagged.push(it + 1);
                }
                q = out.q_next;
                run.samples.push(q.clone());
                run.accepted.push(out.accepted);
                run.proposal_dh.push(out.dh);
                run.chosen.push(i);
            }
            Err(e) => {
                run.failure = Some(format!("iteration {}: {e}", it + 1));
                break;
            }
        }
    }
    Ok(run)
}

/// Independent chains, chain `k` started at `starts[k]` on `stream(seed, k)`.
/// Results are independent of the number of worker threads.
pub fn run_chains<P: Potential + ?Sized>(
    model: &P,
    starts: &[Vec<f64>],
    spec: &KernelSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<ChainRun>> {
    starts
        .par_iter()
        .enumerate()
        .map(|(k, q0)| run_chain_with_rng(model, q0, spec, n, seed, &mut stream(seed, k as u64)))
        .collect()
}
