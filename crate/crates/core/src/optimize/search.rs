//! One-dimensional searches on top of the optimizer: the GP efficiency
//! threshold, the entanglement break point and the minimum entanglement ratio.

use serde::{Deserialize, Serialize};

use super::{optimize, optimize_gains, OptimizerOptions, Problem};
use crate::error::{Error, Result};
use crate::metrics::{log_negativity_closed, max_tolerable_noise};
use crate::protocols::{Case, Scheme};

/// Smallest transmissivity probed by [`max_loss`].
pub const T_FLOOR: f64 = 1e-6;

/// Smallest efficiency probed by [`threshold_eta_gp`].
const ETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub eta: f64,
    pub xi_on: f64,
    pub xi_off: f64,
}

impl Threshold {
    pub fn residual(&self) -> f64 {
        (self.xi_on - self.xi_off).abs()
    }
}

/// Efficiency above which online GP squeezing beats case (off):
/// root of `ξ_on(η) = ξ_off` on `(0, 1)`.
pub fn threshold_eta_gp(g: f64, transmissivity: f64) -> Result<Threshold> {
    if !(transmissivity > 0.0 && transmissivity < 1.0) {
        return Err(Error::Domain(format!("threshold needs 0 < T < 1, got {transmissivity}")));
    }
    // Case (off) is independent of η in the position-squeezing limit.
    let xi_off = optimize_gains(Scheme::Gp, g, transmissivity, 1.0, Case::Off)?.xi;
    let xi_on = |eta: f64| optimize_gains(Scheme::Gp, g, transmissivity, eta, Case::On).map(|r| r.xi);

    let mut grid: Vec<f64> = vec![ETA_FLOOR, 1e-5, 1e-4, 1e-3, 1e-2, 0.03];
    grid.extend((1..=16).map(|i| i as f64 / 16.0));
    let values = grid.iter().map(|&e| xi_on(e)).collect::<Result<Vec<f64>>>()?;
    for w in values.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-12) {
            return Err(Error::Optimization(format!(
                "online GP noise is not monotone in η ({:e} then {:e})",
                w[0], w[1]
            )));
        }
    }
    let f: Vec<f64> = values.iter().map(|v| v - xi_off).collect();
    if f[f.len() - 1] >= 0.0 {
        return Err(Error::NoThreshold(format!(
            "online squeezing never beats case (off) at T = {transmissivity}"
        )));
    }
    if f[0] < 0.0 {
        return Err(Error::NoThreshold(format!(
            "online squeezing beats case (off) for every η at T = {transmissivity}"
        )));
    }
    let i = f.iter().rposition(|&v| v >= 0.0).expect("f[0] >= 0");
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if xi_on(mid)? >= xi_off {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = 0.5 * (lo + hi);
    Ok(Threshold {
        eta,
        xi_on: xi_on(eta)?,
        xi_off,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossBreak {
    /// Optimized `ξ` reaches `2g` at this transmissivity.
    At { transmissivity: f64, xi: f64 },
    /// Entanglement survives down to [`T_FLOOR`].
    NoneAboveFloor { floor: f64 },
}

impl LossBreak {
    pub fn loss_db(&self) -> Option<f64> {
        match self {
            LossBreak::At { transmissivity, .. } => Some(-10.0 * transmissivity.log10()),
            LossBreak::NoneAboveFloor { .. } => None,
        }
    }
}

/// Largest channel loss with `E_N > 0`: bisection of the optimized
/// `ξ(T) − 2g` on `[T_FLOOR, 1]`.
pub fn max_loss(scheme: Scheme, g: f64, eta: f64, case: Case) -> Result<LossBreak> {
    let limit = max_tolerable_noise(g);
    let xi = |t: f64| optimize_gains(scheme, g, t, eta, case).map(|r| r.xi);
    if xi(T_FLOOR)? < limit {
        return Ok(LossBreak::NoneAboveFloor { floor: T_FLOOR });
    }
    if xi(1.0)? >= limit {
        return Err(Error::Optimization("no entanglement even without channel loss".into()));
    }
    // Bisection in log T: the break can sit decades below 1.
    let (mut lo, mut hi) = (T_FLOOR.ln(), 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let at_mid = xi(mid.exp())?;
        if at_mid >= limit {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) * mid.exp() < 1e-13 || (at_mid - limit).abs() < 1e-9 {
            break;
        }
    }
    let t = (0.5 * (lo + hi)).exp();
    Ok(LossBreak::At {
        transmissivity: t,
        xi: xi(t)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioMinimum {
    pub transmissivity: f64,
    pub ratio: f64,
}

/// `E_N(η)/E_N(η = 1)` of the optimized scheme at one transmissivity.
pub fn entanglement_ratio(scheme: Scheme, case: Case, g: f64, transmissivity: f64, eta: f64) -> Result<f64> {
    let opts = OptimizerOptions::default();
    let ideal = optimize(&Problem::new(scheme, g, transmissivity, 1.0, Case::Ideal), &opts)?;
    if !(ideal.e_n > 0.0) {
        return Err(Error::Domain(format!(
            "ratio undefined: ideal E_N vanishes at T = {transmissivity}"
        )));
    }
    let lossy = optimize(&Problem::new(scheme, g, transmissivity, eta, case), &opts)?;
    Ok(log_negativity_closed(g, lossy.xi) / log_negativity_closed(g, ideal.xi))
}

/// Minimum of the entanglement ratio over `T ∈ [lo, hi]`: a scan on a
/// grid of `points` values followed by golden-section refinement.
pub fn min_ratio_over_t(scheme: Scheme, case: Case, g: f64, eta: f64, lo: f64, hi: f64, points: usize) -> Result<RatioMinimum> {
    if !(0.0 < lo && lo < hi && hi <= 1.0) || points < 3 {
        return Err(Error::Domain(format!("bad ratio window [{lo}, {hi}] with {points} points")));
    }
    let r = |t: f64| entanglement_ratio(scheme, case, g, t, eta);
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let vals = grid.iter().map(|&t| r(t)).collect::<Result<Vec<f64>>>()?;
    let (i, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(points - 1)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (r(c)?, r(d)?);
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = r(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = r(d)?;
        }
    }
    let t = 0.5 * (a + b);
    let ratio = r(t)?.min(vals[i]);
    Ok(RatioMinimum { transmissivity: t, ratio })
}
