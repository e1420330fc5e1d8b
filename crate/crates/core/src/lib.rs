//! Hamiltonian Monte Carlo with an exact leapfrog kernel, a randomized
//! step-size/step-count mixture kernel, and a suite of numerical
//! diagnostics for the conditions behind irreducibility and geometric
//! ergodicity of the sampler.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: potential energies `U`, built-in families and
//!   assumption probes.
//! * [`integrator`]: the leapfrog map, its iterates, closed forms and a
//!   high-order reference flow used as an oracle.
//! * [`kernel`]: the Metropolis-adjusted HMC kernel, its randomized
//!   mixture and chain drivers.
//! * [`diagnostics`]: energy identities, tail acceptance, drift,
//!   minorization and total-variation decay estimates.
//! * [`cli`]: the declarative experiment runner behind the `hmc-lab`
//!   binary.

// Negated comparisons are used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod format;
pub mod integrator;
pub mod kernel;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod vecops;

pub use error::{Error, Result};
pub use integrator::{LeapfrogConfig, PhaseState, Trajectory};
pub use kernel::{ChainRun, HmcParams, KernelSpec, RandomizedSchedule};
pub use potential::{build_family, Family, FamilyConfig, FamilyVariant, Potential};
