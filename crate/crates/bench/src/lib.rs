//! Shared parameter points for the benchmarks.

use nlqnd::optimize::analytic_optimum_ideal;
use nlqnd::{optimize_gains, Case, ClusterSpec, Scheme, SchemeParams};

/// Mid-range operating point: moderate loss, lossy OPAs.
pub const G: f64 = 1.0;
pub const T: f64 = 0.7;
pub const ETA: f64 = 0.9;

/// Optimized online parameters for every scheme at the mid-range point.
pub fn lossy_points() -> Vec<SchemeParams> {
    Scheme::ALL
        .iter()
        .map(|&s| optimize_gains(s, G, T, ETA, Case::On).expect("mid-range point optimizes").best_params)
        .collect()
}

/// Closed-form ideal optima, cheap to build.
pub fn ideal_points() -> Vec<SchemeParams> {
    Scheme::ALL
        .iter()
        .map(|&s| analytic_optimum_ideal(s, G, T).expect("ideal optimum exists").0)
        .collect()
}

pub fn cluster_spec(pairs: usize) -> ClusterSpec {
    ClusterSpec::uniform(pairs, G, 1.0)
}
