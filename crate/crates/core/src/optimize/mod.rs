//! Gain optimization under the symmetric-noise constraint, analytic optima
//! and the threshold and break-point finders.
//!
//! Every scheme has one balancing gain `k` that trades `ξ_x` against `ξ_p`:
//! with `u = k²` (SB, EB, BM) or `u = 1/k²` (GP) the budget takes the form
//! `ξ_x = X/u`, `ξ_p = P u + R`, where `X, P, R` do not depend on `k`. The
//! constraint `ξ_x = ξ_p` is then solved exactly, giving
//! `ξ = (R + √(R² + 4PX))/2`, and only the remaining gains are searched.

pub mod nelder_mead;
mod search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use nelder_mead::{SimplexOptions, SimplexResult};
pub use search::{entanglement_ratio, max_loss, min_ratio_over_t, threshold_eta_gp, LossBreak, RatioMinimum, Threshold, T_FLOOR};

use crate::elements::OpaParams;
use crate::error::{domain, Error, Result};
use crate::metrics::log_negativity_closed;
use crate::protocols::{
    closed_form_noise, BellMeasurement, BmParams, Case, EbParams, GpParams, OfflineSqueeze, SbParams, Scheme, SchemeParams,
};

/// Gain used in place of a vanishing gain in analytic optima (`g_A → 0` in
/// EB, `g_B → ∞` in BM, `G₁ → 0` in SB at `T = 1`).
pub const ANALYTIC_LIMIT: f64 = 1e-6;

/// Largest `u` used when `ξ_p` does not depend on the balancing gain.
const BALANCE_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Number of deterministic starts in the first round.
    pub starts: usize,
    /// How many times the start count may double when the two best starts
    /// disagree.
    pub max_doublings: usize,
    /// Agreement in `E_N` required between the two best starts.
    pub agreement: f64,
    /// Free gains live in `[e^{−bound}, e^{bound}]`.
    pub log_bound: f64,
    /// Starts are spread over `[e^{−span}, e^{span}]`.
    pub start_span: f64,
    pub diameter_tol: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_doublings: 2,
            agreement: 1e-6,
            log_bound: 1e9f64.ln(),
            start_span: 1e3f64.ln(),
            diameter_tol: 1e-10,
            max_iterations: 20_000,
        }
    }
}

/// One optimization problem: scheme, target gain, channel, OPA case and the
/// scheme variants that change the search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub scheme: Scheme,
    pub g: f64,
    pub transmissivity: f64,
    /// OPA efficiency; ignored in the ideal case.
    pub eta: f64,
    pub case: Case,
    pub bell: BellMeasurement,
    /// GP only: fixed finite offline gain instead of `G₁ → 0`. The ratio
    /// `c = g_A/g_A^matched` becomes a free parameter.
    pub offline_gain: Option<f64>,
    pub mediator_nbar: f64,
    /// GP only: optimize an extra PSA in front of the first channel pass.
    pub first_pass_psa: bool,
}

impl Problem {
    pub fn new(scheme: Scheme, g: f64, transmissivity: f64, eta: f64, case: Case) -> Self {
        Self {
            scheme,
            g,
            transmissivity,
            eta,
            case,
            bell: BellMeasurement::Qnd,
            offline_gain: None,
            mediator_nbar: 0.0,
            first_pass_psa: false,
        }
    }

    pub fn with_offline_gain(mut self, gain: f64, mediator_nbar: f64) -> Self {
        self.offline_gain = Some(gain);
        self.mediator_nbar = mediator_nbar;
        self
    }

    pub fn with_first_pass_psa(mut self) -> Self {
        self.first_pass_psa = true;
        self
    }

    pub fn with_bell(mut self, bell: BellMeasurement) -> Self {
        self.bell = bell;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.g.is_finite()) {
            return domain(format!("g must be finite and > 0, got {}", self.g));
        }
        if !(self.transmissivity > 0.0 && self.transmissivity <= 1.0) {
            return domain(format!("transmissivity must lie in (0, 1], got {}", self.transmissivity));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return domain(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if self.scheme != Scheme::Gp && (self.offline_gain.is_some() || self.first_pass_psa) {
            return domain("finite offline gain and first-pass PSA apply to GP only");
        }
        if let Some(g1) = self.offline_gain {
            OpaParams::new(g1, 1.0)?;
        }
        if !(self.mediator_nbar >= 0.0 && self.mediator_nbar.is_finite()) {
            return domain(format!("mediator n̄ must be finite and >= 0, got {}", self.mediator_nbar));
        }
        Ok(())
    }

    fn efficiency(&self) -> f64 {
        match self.case {
            Case::Ideal => 1.0,
            Case::Off | Case::On => self.eta,
        }
    }

    fn offline(&self, gain: f64) -> OpaParams {
        OpaParams {
            gain,
            efficiency: self.efficiency(),
        }
    }

    /// Online PSAs are removed in case (off).
    fn online(&self, gain: f64) -> OpaParams {
        match self.case {
            Case::Off => OpaParams::IDENTITY,
            Case::Ideal | Case::On => self.offline(gain),
        }
    }

    fn has_online(&self) -> bool {
        self.case != Case::Off
    }

    /// Names of the searched parameters, in the order used by [`Self::params`].
    pub fn free_parameters(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        match self.scheme {
            // The ideal split of G₁G₂ is degenerate; G₂ = 1 is the
            // representative there.
            Scheme::Sb => {
                v.push("G1");
                if self.case == Case::On {
                    v.push("G2");
                }
            }
            Scheme::Eb => {
                v.extend(["g_A", "G1", "G2"]);
                if self.case == Case::On {
                    v.push("G3");
                }
            }
            Scheme::Bm => {
                v.extend(["g_B", "G1", "G2"]);
                if self.case == Case::On {
                    v.push("G3");
                }
            }
            Scheme::Gp => {
                if self.offline_gain.is_some() {
                    v.push("c");
                }
                if self.has_online() {
                    v.push("G2");
                    if self.first_pass_psa {
                        v.push("Gf");
                    }
                }
            }
        }
        v
    }

    /// Parameter record for free values `free` and balancing gain `k`.
    pub fn params(&self, free: &[f64], k: f64) -> SchemeParams {
        let (g, t) = (self.g, self.transmissivity);
        let at = |i: usize| free.get(i).copied().unwrap_or(1.0);
        match self.scheme {
            Scheme::Sb => SchemeParams::Sb(SbParams {
                g,
                g_a: k,
                opa1: self.offline(at(0)),
                opa2: if self.case == Case::On { self.online(at(1)) } else { OpaParams::IDENTITY },
                transmissivity: t,
            }),
            Scheme::Eb => SchemeParams::Eb(EbParams {
                g,
                g_a: at(0),
                g_0: k,
                opa1: self.offline(at(1)),
                opa2: self.offline(at(2)),
                opa3: if self.case == Case::On { self.online(at(3)) } else { OpaParams::IDENTITY },
                transmissivity: t,
            }),
            Scheme::Bm => SchemeParams::Bm(BmParams {
                g,
                g_a: k,
                g_b: at(0),
                opa1: self.offline(at(1)),
                opa2: self.offline(at(2)),
                opa3: if self.case == Case::On { self.online(at(3)) } else { OpaParams::IDENTITY },
                transmissivity: t,
                bell: self.bell,
            }),
            Scheme::Gp => {
                let mut i = 0;
                let mut next = || {
                    i += 1;
                    at(i - 1)
                };
                let (opa1, c) = match self.offline_gain {
                    Some(g1) => (OfflineSqueeze::Finite(self.offline(g1)), next()),
                    None => (
                        OfflineSqueeze::PositionLimit {
                            efficiency: self.efficiency(),
                        },
                        1.0,
                    ),
                };
                let (opa2, first) = if self.has_online() {
                    let opa2 = self.online(next());
                    let first = if self.first_pass_psa { self.online(next()) } else { OpaParams::IDENTITY };
                    (opa2, first)
                } else {
                    (OpaParams::IDENTITY, OpaParams::IDENTITY)
                };
                let mut p = GpParams::matched(g, k, opa1, opa2, t, self.mediator_nbar);
                p.first_pass_psa = first;
                p.g_a = c * p.matched_g_a();
                SchemeParams::Gp(p)
            }
        }
    }

    /// `(X, P, R)` of the balanced form, read off the budget at `k = 1`.
    fn split(&self, unit: &SchemeParams) -> Result<(f64, f64, f64)> {
        let b = closed_form_noise(unit)?;
        let free_of_k: &[&str] = match self.scheme {
            Scheme::Eb => &["M1", "n1"],
            Scheme::Bm => &["M2", "n2"],
            Scheme::Sb | Scheme::Gp => &[],
        };
        let (mut p, mut r) = (0.0, 0.0);
        for (label, (_, cp)) in &b.per_source {
            if free_of_k.contains(&label.as_str()) {
                r += cp;
            } else {
                p += cp;
            }
        }
        Ok((b.xi_x, p, r))
    }

    /// Balanced excess noise and the balancing gain that realizes it.
    pub fn balanced(&self, free: &[f64]) -> Result<(f64, f64)> {
        let (x, p, r) = self.split(&self.params(free, 1.0))?;
        let (xi, u) = if x == 0.0 {
            (r, 1.0)
        } else if p == 0.0 && r == 0.0 {
            // Lossless link: ξ_p vanishes identically and ξ_x only decays
            // with the balancing gain, which is capped.
            (x / BALANCE_CAP, BALANCE_CAP)
        } else {
            let xi = 0.5 * (r + (r * r + 4.0 * p * x).sqrt());
            (xi, x / xi)
        };
        if !xi.is_finite() || !(u > 0.0 && u.is_finite()) {
            return Err(Error::Optimization(format!("unbalanced budget (X={x:e}, P={p:e}, R={r:e})")));
        }
        let k = match self.scheme {
            Scheme::Gp => 1.0 / u.sqrt(),
            _ => u.sqrt(),
        };
        Ok((xi, k))
    }

    fn degeneracy_note(&self) -> Option<String> {
        match (self.scheme, self.case) {
            (Scheme::Sb, Case::Ideal) => {
                Some("only G1·G2 is fixed at the optimum; reported with G2 = 1".into())
            }
            (Scheme::Eb | Scheme::Bm, Case::Ideal) => {
                Some("only G_offline·G3 is fixed at the optimum; reported with G3 = 1".into())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: SchemeParams,
    pub xi: f64,
    pub e_n: f64,
    /// `|ξ_x − ξ_p|` of the closed-form budget at `best_params`.
    pub constraint_residual: f64,
    pub evaluations: usize,
    /// Set when the optimum is a family and one member was picked.
    pub note: Option<String>,
}

/// Optimizes with default options.
pub fn optimize_gains(scheme: Scheme, g: f64, transmissivity: f64, eta: f64, case: Case) -> Result<OptResult> {
    optimize(&Problem::new(scheme, g, transmissivity, eta, case), &OptimizerOptions::default())
}

/// Multi-start search over the log-gains of `problem`, minimizing the
/// balanced `ξ`, hence maximizing `E_N`.
pub fn optimize(problem: &Problem, opts: &OptimizerOptions) -> Result<OptResult> {
    problem.validate()?;
    let dim = problem.free_parameters().len();
    let objective = |theta: &[f64]| -> f64 {
        let free: Vec<f64> = theta.iter().map(|v| v.exp()).collect();
        problem.balanced(&free).map(|(xi, _)| xi).unwrap_or(f64::INFINITY)
    };
    let simplex = SimplexOptions {
        diameter_tol: opts.diameter_tol,
        max_iterations: opts.max_iterations,
        ..SimplexOptions::default()
    };

    let mut n = opts.starts.max(1);
    let mut runs: Vec<SimplexResult> = Vec::new();
    let mut evaluations = 0;
    for round in 0..=opts.max_doublings {
        let starts: Vec<Vec<f64>> = (runs.len()..n).map(|i| start_point(i, dim, opts.start_span)).collect();
        let fresh: Vec<SimplexResult> = starts
            .par_iter()
            .map(|x0| nelder_mead::minimize(objective, x0, -opts.log_bound, opts.log_bound, &simplex))
            .collect();
        evaluations += fresh.iter().map(|r| r.evaluations).sum::<usize>();
        runs.extend(fresh);
        if dim == 0 {
            break;
        }
        runs.sort_by(|a, b| a.f.total_cmp(&b.f));
        let agree = runs.len() < 2
            || (log_negativity_closed(problem.g, runs[0].f) - log_negativity_closed(problem.g, runs[1].f)).abs()
                <= opts.agreement;
        if agree || round == opts.max_doublings {
            break;
        }
        n *= 2;
    }
    runs.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = &runs[0];
    if !best.f.is_finite() {
        return Err(Error::Optimization(format!(
            "no start reached a finite balanced budget for {} ({})",
            problem.scheme, problem.case
        )));
    }
    let free: Vec<f64> = best.x.iter().map(|v| v.exp()).collect();
    let (_, k) = problem.balanced(&free)?;
    let mut result = finish(problem.params(&free, k), evaluations)?;
    result.note = problem.degeneracy_note();
    Ok(result)
}

/// Packages a parameter record with its closed-form budget.
fn finish(best_params: SchemeParams, evaluations: usize) -> Result<OptResult> {
    let budget = closed_form_noise(&best_params)?;
    let xi = budget.xi();
    Ok(OptResult {
        xi,
        e_n: log_negativity_closed(best_params.gain(), xi),
        constraint_residual: budget.asymmetry(),
        best_params,
        evaluations,
        note: None,
    })
}

/// Deterministic start: the origin first, then a Kronecker sequence on the
/// cube `[−span, span]ᵈ`.
fn start_point(i: usize, dim: usize, span: f64) -> Vec<f64> {
    if i == 0 {
        return vec![0.0; dim];
    }
    (0..dim)
        .map(|j| {
            // Fractional parts of multiples of the generalized golden ratio.
            let phi = generalized_golden(dim);
            let alpha = (1.0 / phi).powi(j as i32 + 1);
            let frac = (0.5 + alpha * i as f64).fract();
            span * (2.0 * frac - 1.0)
        })
        .collect()
}

/// Unique positive root of `x^{d+1} = x + 1`.
fn generalized_golden(d: usize) -> f64 {
    let mut x: f64 = 2.0;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

/// Closed-form ideal-OPA optimum. SB and GP use their known optimal gains;
/// EB and BM use their SB-equivalent limits with the vanishing gain set to
/// [`ANALYTIC_LIMIT`]. Returns the record and the exact limiting `ξ`.
pub fn analytic_optimum_ideal(scheme: Scheme, g: f64, transmissivity: f64) -> Result<(SchemeParams, f64)> {
    Problem::new(scheme, g, transmissivity, 1.0, Case::Ideal).validate()?;
    let t = transmissivity;
    // G₁G₂ = (1−T)/T degenerates at T = 1; the floor keeps the record valid.
    let offline = ((1.0 - t) / t).max(ANALYTIC_LIMIT * ANALYTIC_LIMIT);
    let sb_xi = 2.0 * g * (1.0 - t);
    let p = match scheme {
        Scheme::Sb => SchemeParams::Sb(SbParams {
            g,
            g_a: (g / t).sqrt(),
            opa1: OpaParams::ideal(offline),
            opa2: OpaParams::IDENTITY,
            transmissivity: t,
        }),
        Scheme::Eb => SchemeParams::Eb(EbParams {
            g,
            g_a: ANALYTIC_LIMIT,
            g_0: (g / t).sqrt(),
            opa1: OpaParams::IDENTITY,
            opa2: OpaParams::ideal(offline),
            opa3: OpaParams::IDENTITY,
            transmissivity: t,
        }),
        Scheme::Bm => SchemeParams::Bm(BmParams {
            g,
            g_a: (g / t).sqrt(),
            g_b: 1.0 / ANALYTIC_LIMIT,
            opa1: OpaParams::ideal(offline),
            opa2: OpaParams::IDENTITY,
            opa3: OpaParams::IDENTITY,
            transmissivity: t,
            bell: BellMeasurement::Qnd,
        }),
        Scheme::Gp => SchemeParams::Gp(GpParams::matched(
            g,
            (g * (1.0 + t)).sqrt(),
            OfflineSqueeze::PositionLimit { efficiency: 1.0 },
            OpaParams::ideal(t),
            t,
            0.0,
        )),
    };
    let xi = match scheme {
        Scheme::Gp => 2.0 * g * (1.0 - t) / (1.0 + t),
        _ => sb_xi,
    };
    Ok((p, xi))
}

/// [`analytic_optimum_ideal`] packaged as an [`OptResult`] evaluated on the
/// closed-form budget.
pub fn analytic_result(scheme: Scheme, g: f64, transmissivity: f64) -> Result<OptResult> {
    let (p, _) = analytic_optimum_ideal(scheme, g, transmissivity)?;
    finish(p, 0)
}
