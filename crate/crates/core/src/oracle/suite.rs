//! The invariant suite behind `nlqnd validate`, with optional deliberate
//! faults to confirm that the checks bite.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::draws::random_params;
use super::ode::{ode_check_with, Moments};
use crate::elements::{opa_noise_variances, OpaParams, PhysicalOpaParams};
use crate::error::Result;
use crate::metrics::{asymptotics, log_negativity_closed};
use crate::optimize::optimize_gains;
use crate::protocols::{build, build_gp_with, closed_form_noise, verify_gate_shape, Case, GpOverrides, Scheme, SchemeParams};

/// A fault injected into the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    #[default]
    None,
    /// Scales the x noise variance of the OPA by 1 + 1e-3.
    NoiseVariance,
    /// Flips the sign of the GP displacement factor Γ.
    GammaSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn below(name: &str, observed: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: observed < limit,
            observed,
            limit,
            detail: detail.into(),
        }
    }
}

/// Twenty `(χ, γ, t)` points, the last six at or next to the removable
/// singularities `G = 1`, `ηG = 1` and `η = 1`.
pub fn ode_points() -> Vec<PhysicalOpaParams> {
    let mut pts = Vec::new();
    for (i, chi) in [-0.6, -0.2, 0.15, 0.5, 0.9, 1.3, 0.35].iter().enumerate() {
        for gamma in [0.1, 0.7] {
            let time = 0.5 + 0.25 * i as f64;
            pts.push(PhysicalOpaParams { chi: *chi, gamma, time });
        }
    }
    let p = |chi, gamma, time| PhysicalOpaParams { chi, gamma, time };
    pts.extend([
        p(0.0, 0.4, 1.0),
        p(1e-10, 0.4, 1.0),
        p(0.2, 0.4, 1.0),
        p(0.2, 0.4 + 1e-9, 1.0),
        p(0.6, 0.0, 1.0),
        p(0.6, 1e-10, 1.0),
    ]);
    pts
}

pub const ODE_STEPS: usize = 2000;

pub fn run_suite(mutation: Mutation) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // Engine equivalence on random points.
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let (mut closed_vs_forms, mut cm_vs_forms, mut shape): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for scheme in Scheme::ALL {
        for _ in 0..25 {
            let params = random_params(scheme, &mut rng);
            let r = match (&params, mutation) {
                (SchemeParams::Gp(p), Mutation::GammaSign) => build_gp_with(
                    p,
                    GpOverrides {
                        gamma: Some(-p.gamma()?),
                        ..Default::default()
                    },
                )?,
                _ => build(&params)?,
            };
            let closed = closed_form_noise(&params)?;
            closed_vs_forms = closed_vs_forms.max(r.budget.max_relative_difference(&closed));
            let (gx, gp) = r.gstate_excess();
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
            cm_vs_forms = cm_vs_forms.max(rel(gx, r.budget.xi_x)).max(rel(gp, r.budget.xi_p));
            shape = shape.max(verify_gate_shape(&r));
        }
    }
    checks.push(Check::below("closed form vs linear forms", closed_vs_forms, 1e-10, "max relative difference over 100 draws"));
    checks.push(Check::below("covariance vs linear forms", cm_vs_forms, 1e-10, "max relative difference over 100 draws"));
    checks.push(Check::below("gate-shape residual", shape, 1e-10, "max coefficient deviation from the ideal QND"));

    // Moment ODE against the effective OPA channel.
    let noise = |p: OpaParams| {
        let (x, v) = opa_noise_variances(p);
        match mutation {
            Mutation::NoiseVariance => (x * (1.0 + 1e-3), v),
            _ => (x, v),
        }
    };
    let mut worst: f64 = 0.0;
    for pt in ode_points() {
        worst = worst.max(ode_check_with(pt, Moments::VACUUM, ODE_STEPS, noise)?.relative_error);
    }
    checks.push(Check::below("ODE oracle", worst, 1e-8, "max relative error over 20 points"));

    // Ideal optima.
    let mut worst: f64 = 0.0;
    for g in [0.5, 2.0] {
        for t in [0.25, 0.9] {
            let sb = optimize_gains(Scheme::Sb, g, t, 1.0, Case::Ideal)?.xi;
            let gp = optimize_gains(Scheme::Gp, g, t, 1.0, Case::Ideal)?.xi;
            worst = worst
                .max((sb - 2.0 * g * (1.0 - t)).abs())
                .max((gp - 2.0 * g * (1.0 - t) / (1.0 + t)).abs());
        }
    }
    checks.push(Check::below("ideal optima", worst, 1e-6, "|ξ_opt − ξ_exact| for SB and GP"));

    // Small-loss slopes.
    let g = 1.0;
    let h = 1e-6;
    let slope = |s: Scheme| -> Result<f64> {
        let e = |t: f64| -> Result<f64> { Ok(log_negativity_closed(g, optimize_gains(s, g, t, 1.0, Case::Ideal)?.xi)) };
        Ok((e(1.0 - 1e-4 + h)? - e(1.0 - 1e-4 - h)?) / (2.0 * h))
    };
    let mut worst: f64 = 0.0;
    for s in [Scheme::Sb, Scheme::Gp] {
        let (_, gamma) = asymptotics(s, g);
        worst = worst.max((slope(s)? / gamma - 1.0).abs());
    }
    checks.push(Check::below("small-loss asymptotics", worst, 2e-2, "relative slope error against the expansion"));
    Ok(checks)
}
