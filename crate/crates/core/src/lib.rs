//! Nonlocal continuous-variable QND gates mediated by lossy OPAs.
//!
//! Two independent engines ([`linform`] in the Heisenberg picture and
//! [`gstate`] on covariance matrices) execute the same protocol circuits.

pub mod circuit;
pub mod cluster;
pub mod elements;
pub mod error;
pub mod gstate;
pub mod linform;
pub mod metrics;
pub mod optimize;
pub mod oracle;
pub mod protocols;

pub use circuit::{Circuit, FormRun, Op, StateRun};
pub use cluster::{build_cluster, fuse, nullifiers, vlf_check, Cluster, ClusterSpec, NullifierReport};
pub use elements::{OpaParams, PhysicalOpaParams};
pub use error::{Error, Result};
pub use gstate::{GaussianChannel, GaussianState, StateKind};
pub use linform::{Context, LinearForm, Quad};
pub use metrics::{log_negativity_closed, log_negativity_cm, EntanglementReport};
pub use optimize::{optimize, optimize_gains, OptResult, OptimizerOptions, Problem};
pub use protocols::{build, Case, NoiseBudget, ProtocolRealization, Scheme, SchemeParams};
