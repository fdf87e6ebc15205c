//! Bell-measurement protocol: two independent squeezed mediators, one sent
//! through the channel and jointly measured with the other at Bob's side.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::budget::{NoiseBudget, Tally};
use super::{amplified_link, check_positive, check_transmissivity, ProtocolRealization, SchemeParams, INPUT_A, INPUT_B};
use crate::circuit::Circuit;
use crate::elements::{opa_noise_variances, OpaParams};
use crate::error::Result;
use crate::linform::Quad;

/// How Bob entangles the two mediators before reading them out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellMeasurement {
    /// QND of gain `g_M`, then `p` of the channel mediator and `x` of the
    /// local one.
    #[default]
    Qnd,
    /// Beam splitter of transmissivity `1/(1 + g_M²)`, reading the same
    /// quadrature pair; the displacement gains are rescaled by `1/√τ`.
    /// Balanced when `|g_M| = 1`.
    BeamSplitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmParams {
    pub g: f64,
    pub g_a: f64,
    pub g_b: f64,
    /// Offline squeezer of Alice's mediator (the one sent through the channel).
    pub opa1: OpaParams,
    /// Offline squeezer of Bob's mediator.
    pub opa2: OpaParams,
    /// PSA in front of the channel.
    pub opa3: OpaParams,
    pub transmissivity: f64,
    #[serde(default)]
    pub bell: BellMeasurement,
}

impl BmParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("g", self.g)?;
        check_positive("g_A", self.g_a)?;
        check_positive("g_B", self.g_b)?;
        self.opa1.validate()?;
        self.opa2.validate()?;
        self.opa3.validate()?;
        check_transmissivity(self.transmissivity)
    }

    /// `√(η₃G₃T)`.
    pub fn link_amplitude(&self) -> f64 {
        amplified_link(self.opa3, self.transmissivity).0
    }

    /// Bell-measurement gain `−g / (g_A g_B √(η₃G₃T))`.
    pub fn g_m(&self) -> f64 {
        -self.g / (self.g_a * self.g_b * self.link_amplitude())
    }

    pub fn summary(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("g".into(), self.g),
            ("g_A".into(), self.g_a),
            ("g_B".into(), self.g_b),
            ("g_M".into(), self.g_m()),
            ("G1".into(), self.opa1.gain),
            ("eta1".into(), self.opa1.efficiency),
            ("G2".into(), self.opa2.gain),
            ("eta2".into(), self.opa2.efficiency),
            ("G3".into(), self.opa3.gain),
            ("eta3".into(), self.opa3.efficiency),
            ("T".into(), self.transmissivity),
        ])
    }
}

pub fn build_bm(p: &BmParams) -> Result<ProtocolRealization> {
    p.validate()?;
    let mut c = Circuit::new();
    let a = c.vacuum(INPUT_A);
    let b = c.vacuum(INPUT_B);
    let m1 = c.vacuum("M1");
    let m2 = c.vacuum("M2");
    let g_m = p.g_m();
    c.opa(m1, p.opa1, "n1")
        .opa(m2, p.opa2, "n2")
        .qnd(a, m1, p.g_a)
        .qnd(m2, b, p.g_b)
        .opa(m1, p.opa3, "n3")
        .loss(m1, p.transmissivity, "ch");
    let feed_p = p.g_a * p.link_amplitude();
    let feed_x = -p.g_b;
    match p.bell {
        BellMeasurement::Qnd => {
            c.qnd(m1, m2, g_m)
                .feedforward(m1, Quad::P, &[(a, Quad::P, feed_p)])
                .feedforward(m2, Quad::X, &[(b, Quad::X, feed_x)]);
        }
        BellMeasurement::BeamSplitter => {
            // out₁ = √τ(M₁ + k M₂), out₂ = √τ(M₂ − k M₁) with k = |g_M|:
            // p of out₁ and x of out₂ are the QND readouts scaled by √τ.
            let tau = 1.0 / (1.0 + g_m * g_m);
            let s = tau.sqrt();
            c.beam_splitter(m1, m2, tau)
                .feedforward(m1, Quad::P, &[(a, Quad::P, feed_p / s)])
                .feedforward(m2, Quad::X, &[(b, Quad::X, feed_x / s)]);
        }
    }
    ProtocolRealization::from_circuit(SchemeParams::Bm(*p), c)
}

pub(super) fn closed_form(p: &BmParams) -> Result<NoiseBudget> {
    p.validate()?;
    let t = p.transmissivity;
    let (e1, g1) = (p.opa1.efficiency, p.opa1.gain);
    let (e2, g2) = (p.opa2.efficiency, p.opa2.gain);
    let (e3, g3) = (p.opa3.efficiency, p.opa3.gain);
    let (xn1, pn1) = opa_noise_variances(p.opa1);
    let (_, pn2) = opa_noise_variances(p.opa2);
    let (xn3, pn3) = opa_noise_variances(p.opa3);
    let a3 = (e3 * g3 * t).sqrt();
    let mut n = Tally::default();
    let kp = -p.g_a * (1.0 - e3 * t);
    n.p("M1", kp * (e1 / g1).sqrt(), 1.0)
        .p("n1", kp * (1.0 - e1).sqrt(), pn1)
        .p("ch", p.g_a * a3 * (1.0 - t).sqrt(), 1.0)
        .p("n3", p.g_a * a3 * ((1.0 - e3) * t).sqrt(), pn3)
        .p("M2", p.g / p.g_b * (e2 / g2).sqrt(), 1.0)
        .p("n2", p.g / p.g_b * (1.0 - e2).sqrt(), pn2);
    let kx = p.g / p.g_a;
    n.x("M1", kx * (e1 * g1).sqrt(), 1.0)
        .x("n1", kx * (1.0 - e1).sqrt(), xn1)
        .x("ch", kx / a3 * (1.0 - t).sqrt(), 1.0)
        .x("n3", kx / a3 * ((1.0 - e3) * t).sqrt(), xn3);
    Ok(n.finish())
}
