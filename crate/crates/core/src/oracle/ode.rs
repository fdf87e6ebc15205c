//! Second moments of a lossy OPA from the Langevin equations
//! `ẋ = (χ − γ/2)x + √γ x_in`, `ṗ = −(χ + γ/2)p + √γ p_in` with a vacuum
//! bath:
//!
//! ```text
//! d⟨x²⟩/dt = (2χ − γ)⟨x²⟩ + γ      d⟨p²⟩/dt = −(2χ + γ)⟨p²⟩ + γ
//! d⟨x⟩/dt  = (χ − γ/2)⟨x⟩          d⟨p⟩/dt  = −(χ + γ/2)⟨p⟩
//! ```

use serde::{Deserialize, Serialize};

use crate::elements::{opa_from_physical, opa_noise_variances, OpaParams, PhysicalOpaParams};
use crate::error::{domain, Result};

/// Relative accuracy below which the step-doubling estimate stays silent.
const ACCURACY_TARGET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub x2: f64,
    pub p2: f64,
    pub mean_x: f64,
    pub mean_p: f64,
}

impl Moments {
    pub const VACUUM: Moments = Moments {
        x2: 1.0,
        p2: 1.0,
        mean_x: 0.0,
        mean_p: 0.0,
    };

    fn as_array(&self) -> [f64; 4] {
        [self.x2, self.p2, self.mean_x, self.mean_p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub x2: Vec<f64>,
    pub p2: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_p: Vec<f64>,
    /// Step-doubling estimate of the relative error of the final point.
    pub error_estimate: f64,
    /// Set when `error_estimate` exceeds the accuracy target.
    pub warning: Option<String>,
}

impl MomentTrajectory {
    pub fn last(&self) -> Moments {
        let n = self.times.len() - 1;
        Moments {
            x2: self.x2[n],
            p2: self.p2[n],
            mean_x: self.mean_x[n],
            mean_p: self.mean_p[n],
        }
    }
}

fn rhs(chi: f64, gamma: f64, y: [f64; 4]) -> [f64; 4] {
    [
        (2.0 * chi - gamma) * y[0] + gamma,
        -(2.0 * chi + gamma) * y[1] + gamma,
        (chi - 0.5 * gamma) * y[2],
        -(chi + 0.5 * gamma) * y[3],
    ]
}

fn rk4(chi: f64, gamma: f64, t_final: f64, init: [f64; 4], steps: usize, mut visit: impl FnMut(f64, [f64; 4])) -> [f64; 4] {
    let h = t_final / steps as f64;
    let axpy = |y: [f64; 4], a: f64, k: [f64; 4]| std::array::from_fn(|i| y[i] + a * k[i]);
    let mut y = init;
    visit(0.0, y);
    for i in 0..steps {
        let k1 = rhs(chi, gamma, y);
        let k2 = rhs(chi, gamma, axpy(y, 0.5 * h, k1));
        let k3 = rhs(chi, gamma, axpy(y, 0.5 * h, k2));
        let k4 = rhs(chi, gamma, axpy(y, h, k3));
        y = std::array::from_fn(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        visit((i + 1) as f64 * h, y);
    }
    y
}

/// Fixed-step RK4 over `[0, t_final]`.
pub fn integrate_opa_moments(chi: f64, gamma: f64, t_final: f64, init: Moments, steps: usize) -> Result<MomentTrajectory> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return domain(format!("integration time must be finite and >= 0, got {t_final}"));
    }
    if !(gamma >= 0.0) || !chi.is_finite() || !gamma.is_finite() {
        return domain(format!("need finite chi and gamma >= 0, got chi={chi}, gamma={gamma}"));
    }
    if steps < 10 {
        return domain(format!("at least 10 steps are required, got {steps}"));
    }
    if !(init.x2 > 0.0 && init.p2 > 0.0) {
        return domain("initial second moments must be positive");
    }
    let mut traj = MomentTrajectory {
        times: Vec::with_capacity(steps + 1),
        x2: Vec::with_capacity(steps + 1),
        p2: Vec::with_capacity(steps + 1),
        mean_x: Vec::with_capacity(steps + 1),
        mean_p: Vec::with_capacity(steps + 1),
        error_estimate: 0.0,
        warning: None,
    };
    let fine = rk4(chi, gamma, t_final, init.as_array(), steps, |t, y| {
        traj.times.push(t);
        traj.x2.push(y[0]);
        traj.p2.push(y[1]);
        traj.mean_x.push(y[2]);
        traj.mean_p.push(y[3]);
    });
    // Richardson: the half-resolution run is 16× less accurate.
    let coarse = rk4(chi, gamma, t_final, init.as_array(), steps / 2, |_, _| {});
    traj.error_estimate = (0..4)
        .map(|i| (fine[i] - coarse[i]).abs() / 15.0 / fine[i].abs().max(1.0))
        .fold(0.0, f64::max);
    if traj.error_estimate > ACCURACY_TARGET {
        traj.warning = Some(format!(
            "{steps} steps give an estimated relative error of {:.1e}; increase the step count",
            traj.error_estimate
        ));
    }
    Ok(traj)
}

/// Moments after the effective channel `(G, η)`:
/// `⟨x²⟩ = ηG x₀² + (1 − η)⟨x_n²⟩` and likewise for `p`.
pub fn closed_form_moments(p: OpaParams, init: Moments) -> Moments {
    closed_form_moments_with(p, init, opa_noise_variances)
}

fn closed_form_moments_with(p: OpaParams, init: Moments, noise: impl Fn(OpaParams) -> (f64, f64)) -> Moments {
    let (ax, ap) = p.amplitudes();
    let (vx, vp) = noise(p);
    let w = 1.0 - p.efficiency;
    Moments {
        x2: ax * ax * init.x2 + w * vx,
        p2: ap * ap * init.p2 + w * vp,
        mean_x: ax * init.mean_x,
        mean_p: ap * init.mean_p,
    }
}

/// Consecutive OPA segments `(χ, γ, t)` integrated back to back.
pub fn integrate_segments(segments: &[PhysicalOpaParams], init: Moments, steps: usize) -> Result<Moments> {
    let mut m = init;
    for s in segments {
        let traj = integrate_opa_moments(s.chi, s.gamma, s.time, m, steps)?;
        m = traj.last();
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeCheck {
    pub point: PhysicalOpaParams,
    pub ode: Moments,
    pub closed: Moments,
    pub relative_error: f64,
}

/// ODE against the effective channel at one physical point.
pub fn ode_check(point: PhysicalOpaParams, init: Moments, steps: usize) -> Result<OdeCheck> {
    ode_check_with(point, init, steps, opa_noise_variances)
}

/// As [`ode_check`] with a substitute noise-variance function, so that a
/// validation run can confirm the check is sensitive to it.
pub fn ode_check_with(
    point: PhysicalOpaParams,
    init: Moments,
    steps: usize,
    noise: impl Fn(OpaParams) -> (f64, f64),
) -> Result<OdeCheck> {
    let ode = integrate_opa_moments(point.chi, point.gamma, point.time, init, steps)?.last();
    let closed = closed_form_moments_with(opa_from_physical(point)?, init, noise);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let relative_error = rel(ode.x2, closed.x2)
        .max(rel(ode.p2, closed.p2))
        .max((ode.mean_x - closed.mean_x).abs() / closed.mean_x.abs().max(1.0))
        .max((ode.mean_p - closed.mean_p).abs() / closed.mean_p.abs().max(1.0));
    Ok(OdeCheck {
        point,
        ode,
        closed,
        relative_error,
    })
}
