//! Joint AP beamforming and IRS phase-shift optimization for the downlink of an
//! IRS-aided cell-free massive MIMO system, with energy efficiency (bit/Joule)
//! as the objective.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs plus an explicit seed; file formats, the CLI and the
//! Monte-Carlo driver live in the `cfee` companion crate.
//!
//! Module map:
//!
//! * [`channel`]: geometry, Rician channel draws, cascaded channel algebra.
//! * [`metrics`]: rates, power, EE, constraint checks, penalized objective.
//! * [`beam`]: quadratic-transform beamforming update for fixed phases.
//! * [`phase`]: Lagrangian-dual / quadratic-transform phase update for fixed beams.
//! * [`sdr`]: semidefinite relaxation backend with Gaussian randomization.
//! * [`altopt`]: the alternating outer loop.
//! * [`ga`]: genetic-algorithm baseline.
//! * [`stats`]: percentile and CDF helpers used for reporting.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod altopt;
pub mod beam;
pub mod channel;
pub mod config;
pub mod ga;
pub mod linalg;
pub mod metrics;
pub mod phase;
pub mod sdr;
pub mod stats;

pub use altopt::{run_algorithm1, AlgorithmOptions, InitPolicy};
pub use beam::{optimize_beamforming, BeamSolverOptions};
pub use channel::{sample_scenario, ChannelSet, PhaseVector};
pub use config::{ConfigError, ScenarioConfig};
pub use ga::{run_ga, GaConfig};
pub use linalg::{CMatrix, CVector, C64};
pub use metrics::{BeamMatrix, Evaluation, FeasibilityReport, Solution};
pub use phase::{optimize_phases, PhaseBackend, PhaseOptions};
