//! Numerical checks of the conditions behind irreducibility and geometric
//! ergodicity of HMC.
//!
//! Every diagnostic is a pure function of its inputs and a `seed`. Monte
//! Carlo loops fan out over fixed-size chunks with one random stream per
//! chunk (see [`crate::rng`]), so results do not depend on the number of
//! worker threads.
//!
//! Drift and rejection-mass estimates use the proposal kernel before the
//! accept step, not the full Metropolis kernel.

mod chain_stats;
mod drift;
mod energy;
mod horizon;
mod smallset;
pub mod stats;
mod tail;
mod tv;

pub use chain_stats::{autocorrelation, chain_diagnostics, integrated_autocorrelation_time, ChainDiagnostics};
pub use drift::{drift_estimate, rejection_mass, DriftCurve, DriftPoint, DriftReport, RejectionMassRow, DEFAULT_A_GRID};
pub use energy::{energy_decomposition, EnergyDecomposition, DEFAULT_QUAD_NODES};
pub use horizon::{
    energy_trace, horizon_from_trace, horizon_scan, negative_energy_horizon, HorizonRow, HorizonScan, HORIZON_RADII,
};
pub use smallset::{
    minorization_constant, preimage_radius, proposal_growth_probe, smallset_probe, solve_position_map, GrowthProbe,
    SmallSetProbe,
};
pub use tail::{tail_acceptance, TailAcceptanceProfile, TailRow};
pub use tv::{tv_decay, TvDecayCurve, TvStart};
