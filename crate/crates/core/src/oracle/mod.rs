//! Independent checks of the deterministic engines: moment ODEs of the OPA
//! Langevin dynamics and Monte-Carlo sampling of protocol circuits.

pub mod draws;
pub mod mc;
pub mod ode;
pub mod suite;

pub use draws::random_params;
pub use mc::{mc_estimate, mc_estimate_circuit, McEstimate, RNG_ALGORITHM, SHARDS};
pub use ode::{
    closed_form_moments, integrate_opa_moments, integrate_segments, ode_check, ode_check_with, MomentTrajectory, Moments,
    OdeCheck,
};
pub use suite::{run_suite, Check, Mutation};
