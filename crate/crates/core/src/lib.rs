//! Simulation and exact drift verification for one-dimensional random walks
//! whose one-step drift at position `x` and time `t` is `rho x^alpha / t^beta`.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: transition laws realising the drift on the integer lattice.
//! - [`phase`]: analytic recurrence/transience classification of `(alpha, beta, rho)`.
//! - [`engine`]: seeded trajectories, exit times and replica fan-out.
//! - [`lyapunov`]: exact expected increments of test functionals over state grids.
//! - [`stats`]: Monte Carlo estimators with confidence intervals.
//! - [`urn`]: Friedman urns and their coupling to the `alpha = beta = 1` walk.
//! - [`report`]: CSV and JSON output.

pub mod engine;
pub mod error;
pub mod kernels;
pub mod lyapunov;
pub mod phase;
pub mod report;
pub mod rng;
pub mod stats;
pub mod urn;

pub use engine::{
    first_exit, first_exit_levels, replicate, simulate, ExitOutcome, ReplicaPlan, ReplicaSet, Trajectory, Walker,
};
pub use error::{Error, Result};
pub use kernels::{DriftSpec, HypothesisBounds, Kernel, StepLaw, Variant};
pub use lyapunov::{expected_increment, verify_region, Functional, Region, RegionReport, Sign};
pub use phase::{classify, region_grid, Interval, Justification, PhaseGrid, PhaseLabel, Verdict};
pub use stats::EstimateCI;
pub use urn::{urn_rho, UrnSpec, UrnState};
