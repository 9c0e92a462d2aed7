//! Discrete branching chains with immigration, their continuous-state
//! limits, and the downcrossing chains of drifted Brownian motion.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the simulators and the
//! command-line harness use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alias;
pub mod cbi;
pub mod dbi;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod ode;
pub mod pgf;
pub mod rayknight;
pub mod rng;
pub mod scalar;
pub mod scaling;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
pub use rng::RngSeed;
pub use tolerances::Tolerances;

pub type Pgf = pgf::Pgf<f64>;
pub type BranchingMechanism = mechanisms::BranchingMechanism<f64>;
pub type ImmigrationMechanism = mechanisms::ImmigrationMechanism<f64>;
pub type LevyAtoms = mechanisms::LevyAtoms<f64>;
pub type DbiProcess = dbi::DbiProcess<f64>;
pub type PsiSolution = cbi::PsiSolution<f64>;
pub type CbiLaw = cbi::CbiLaw<f64>;
pub type ScalingScheme = scaling::ScalingScheme<f64>;
pub type EmbeddedPair = scaling::EmbeddedPair<f64>;
pub type DriftedBm = rayknight::DriftedBm<f64>;
