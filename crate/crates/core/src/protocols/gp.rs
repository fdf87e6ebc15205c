//! Geometric-phase protocol: the mediator crosses the channel twice and a
//! final local QND at Alice's side removes its anti-squeezed quadrature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::budget::{NoiseBudget, Tally};
use super::{amplified_link, check_positive, check_transmissivity, ProtocolRealization, SchemeParams, INPUT_A, INPUT_B};
use crate::circuit::Circuit;
use crate::elements::{opa_noise_variances, OpaParams};
use crate::error::{domain, Error, Result};
use crate::linform::Quad;

/// Gain used by the engines in place of `G₁ → 0`.
pub const G1_FLOOR: f64 = 1e-9;

/// Relative size below which a coefficient is treated as an exact cancellation.
const CANCEL_TOL: f64 = 1e-12;

/// Offline squeezing of the GP mediator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OfflineSqueeze {
    Finite(OpaParams),
    /// Infinite position squeezing (`G₁ → 0`) at the given efficiency. The
    /// closed form takes the exact limit, the engines run at [`G1_FLOOR`].
    PositionLimit { efficiency: f64 },
}

impl OfflineSqueeze {
    pub fn efficiency(&self) -> f64 {
        match self {
            OfflineSqueeze::Finite(p) => p.efficiency,
            OfflineSqueeze::PositionLimit { efficiency } => *efficiency,
        }
    }

    /// Parameters handed to the engines.
    pub fn engine_params(&self) -> OpaParams {
        match self {
            OfflineSqueeze::Finite(p) => *p,
            OfflineSqueeze::PositionLimit { efficiency } => OpaParams {
                gain: G1_FLOOR,
                efficiency: *efficiency,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine_params().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub g: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub opa1: OfflineSqueeze,
    /// PSA before the second channel pass.
    pub opa2: OpaParams,
    pub transmissivity: f64,
    /// Thermal occupation of the mediator before squeezing.
    #[serde(default)]
    pub mediator_nbar: f64,
    /// Optional PSA before the first channel pass; identity by default.
    #[serde(default = "identity_opa")]
    pub first_pass_psa: OpaParams,
}

fn identity_opa() -> OpaParams {
    OpaParams::IDENTITY
}

/// Deliberate deviations from the matched gains, used by sensitivity probes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GpOverrides {
    pub g_c: Option<f64>,
    pub gamma: Option<f64>,
}

impl GpParams {
    /// Parameters with `g_A` set by the mediator-independence condition
    /// `g_A = g √(η_f T/G_f) / g_B` (`g √T / g_B` without first-pass PSA).
    pub fn matched(g: f64, g_b: f64, opa1: OfflineSqueeze, opa2: OpaParams, transmissivity: f64, mediator_nbar: f64) -> Self {
        let mut p = Self {
            g,
            g_a: 0.0,
            g_b,
            opa1,
            opa2,
            transmissivity,
            mediator_nbar,
            first_pass_psa: OpaParams::IDENTITY,
        };
        p.g_a = p.matched_g_a();
        p
    }

    pub fn matched_g_a(&self) -> f64 {
        self.g * self.first_pass().1 / self.g_b
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("g", self.g)?;
        check_positive("g_A", self.g_a)?;
        check_positive("g_B", self.g_b)?;
        self.opa1.validate()?;
        self.opa2.validate()?;
        self.first_pass_psa.validate()?;
        check_transmissivity(self.transmissivity)?;
        if !(self.mediator_nbar >= 0.0 && self.mediator_nbar.is_finite()) {
            return domain(format!("mediator n̄ must be finite and >= 0, got {}", self.mediator_nbar));
        }
        Ok(())
    }

    /// First pass `(a_f, b_f, w_f)`: amplitudes of x and p and the PSA-noise weight.
    fn first_pass(&self) -> (f64, f64, f64) {
        amplified_link(self.first_pass_psa, self.transmissivity)
    }

    /// Second pass `(a₂, b₂, w₂)`.
    fn second_pass(&self) -> (f64, f64, f64) {
        amplified_link(self.opa2, self.transmissivity)
    }

    /// Final QND gain `−g √(G₂/(η₂T)) / g_B`.
    pub fn g_c(&self) -> f64 {
        -self.g / (self.g_b * self.second_pass().1)
    }

    /// Displacement factor Γ; Bob applies `x_B += g_B Γ x̄`.
    pub fn gamma(&self) -> Result<f64> {
        self.gamma_for(self.g_c())
    }

    fn gamma_for(&self, g_c: f64) -> Result<f64> {
        let (af, _, _) = self.first_pass();
        let (a2, _, _) = self.second_pass();
        let direct = self.g_a * self.g_b * af;
        let numerator = self.g - direct;
        let (u, v) = (self.g_b * self.g_a * af * a2, self.g_b * g_c);
        let denominator = u + v;
        if denominator.abs() <= CANCEL_TOL * (u.abs() + v.abs()) {
            if numerator.abs() <= CANCEL_TOL * (self.g + direct.abs()) {
                return Ok(0.0);
            }
            return Err(Error::SingularGamma {
                numerator,
                denominator,
            });
        }
        Ok(numerator / denominator)
    }

    /// Coefficient of the squeezed mediator momentum in 𝒩_p; zero under the
    /// mediator-independence condition.
    pub fn mediator_p_coefficient(&self) -> f64 {
        -(self.g_a - self.g * self.first_pass().1 / self.g_b)
    }

    pub fn mediator_variance(&self) -> f64 {
        2.0 * self.mediator_nbar + 1.0
    }

    pub fn summary(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::from([
            ("g".into(), self.g),
            ("g_A".into(), self.g_a),
            ("g_B".into(), self.g_b),
            ("g_C".into(), self.g_c()),
            ("G1".into(), self.opa1.engine_params().gain),
            ("eta1".into(), self.opa1.efficiency()),
            ("G2".into(), self.opa2.gain),
            ("eta2".into(), self.opa2.efficiency),
            ("T".into(), self.transmissivity),
            ("nbar".into(), self.mediator_nbar),
        ]);
        if let Ok(gamma) = self.gamma() {
            m.insert("Gamma".into(), gamma);
        }
        if !self.first_pass_psa.is_identity() {
            m.insert("Gf".into(), self.first_pass_psa.gain);
            m.insert("etaf".into(), self.first_pass_psa.efficiency);
        }
        m
    }
}

pub fn build_gp(p: &GpParams) -> Result<ProtocolRealization> {
    build_gp_with(p, GpOverrides::default())
}

/// GP builder with optional replacement of `g_C` and Γ.
pub fn build_gp_with(p: &GpParams, overrides: GpOverrides) -> Result<ProtocolRealization> {
    p.validate()?;
    let g_c = overrides.g_c.unwrap_or_else(|| p.g_c());
    let gamma = match overrides.gamma {
        Some(v) => v,
        None => p.gamma_for(g_c)?,
    };
    let v = p.mediator_variance();
    let mut c = Circuit::new();
    let a = c.vacuum(INPUT_A);
    let b = c.vacuum(INPUT_B);
    let m = c.mode("M", v, v);
    c.opa(m, p.opa1.engine_params(), "n1")
        .qnd(a, m, p.g_a)
        .opa(m, p.first_pass_psa, "nf")
        .loss(m, p.transmissivity, "ch1")
        .qnd(m, b, p.g_b)
        .opa(m, p.opa2, "n2")
        .loss(m, p.transmissivity, "ch2")
        .qnd(a, m, g_c)
        .feedforward(m, Quad::X, &[(b, Quad::X, p.g_b * gamma)]);
    ProtocolRealization::from_circuit(SchemeParams::Gp(*p), c)
}

pub(super) fn closed_form(p: &GpParams) -> Result<NoiseBudget> {
    p.validate()?;
    let t = p.transmissivity;
    let c1 = (1.0 - t).sqrt();
    let (af, bf, wf) = p.first_pass();
    let (a2, b2, w2) = p.second_pass();
    let gamma = p.gamma()?;
    let (xnf, pnf) = opa_noise_variances(p.first_pass_psa);
    let (xn2, pn2) = opa_noise_variances(p.opa2);
    let v = p.mediator_variance();
    let mut n = Tally::default();

    // Mediator and OPA-1 noise.
    let kp = p.mediator_p_coefficient();
    let kx = p.g_b * (1.0 + gamma * a2) * af;
    match p.opa1 {
        OfflineSqueeze::Finite(o) => {
            let (e1, g1) = (o.efficiency, o.gain);
            let (xn1, pn1) = opa_noise_variances(o);
            n.p("M", kp * (e1 / g1).sqrt(), v)
                .p("n1", kp * (1.0 - e1).sqrt(), pn1)
                .x("M", kx * (e1 * g1).sqrt(), v)
                .x("n1", kx * (1.0 - e1).sqrt(), xn1);
        }
        OfflineSqueeze::PositionLimit { .. } => {
            // Position quadrature fully squeezed, momentum infinitely
            // anti-squeezed: only an exact cancellation keeps 𝒩_p finite.
            let scale = p.g_a.max(p.g * bf / p.g_b);
            if kp.abs() > CANCEL_TOL * scale {
                n.p("M", 1.0, f64::INFINITY);
            }
        }
    }

    let gb = p.g / p.g_b;
    n.p("nf", gb * wf, pnf)
        .p("ch1", gb * c1, 1.0)
        .p("ch2", gb / b2 * c1, 1.0)
        .p("n2", gb / b2 * w2, pn2);
    let kf = p.g_b * (1.0 + gamma * a2);
    n.x("nf", kf * wf, xnf)
        .x("ch1", kf * c1, 1.0)
        .x("ch2", p.g_b * gamma * c1, 1.0)
        .x("n2", p.g_b * gamma * w2, xn2);
    Ok(n.finish())
}
