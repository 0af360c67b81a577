//! Scheduling Bernoulli jobs on identical parallel machines to minimize the
//! total expected completion time.
//!
//! The crate provides an exact dynamic program over machine-load profiles,
//! a polynomial dynamic program over stratified policies restricted to a
//! nested time grid, baseline policies, a replay simulator, and an
//! experiment harness comparing them.

pub mod dp_exact;
pub mod dp_stratified;
pub mod error;
pub mod filling;
pub mod harness;
pub mod instance;
pub mod numerics;
pub mod policy;
pub mod quasipoly;
pub mod simulate;
pub mod state;
pub mod timegrid;

pub use error::{InstanceError, NumericsError, PolicyError, SolveError};
pub use instance::{GroupStructure, Instance, JobId, JobType};
pub use numerics::{rat, Rational, SeedStream};
