//! Entanglement-based protocol: a QND-entangled mediator pair, one half sent
//! through the channel, two feed-forwards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::budget::{NoiseBudget, Tally};
use super::{amplified_link, check_positive, check_transmissivity, ProtocolRealization, SchemeParams, INPUT_A, INPUT_B};
use crate::circuit::Circuit;
use crate::elements::{opa_noise_variances, OpaParams};
use crate::error::Result;
use crate::linform::Quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbParams {
    pub g: f64,
    pub g_a: f64,
    pub g_0: f64,
    /// Offline squeezer of the mediator kept by Alice.
    pub opa1: OpaParams,
    /// Offline squeezer of the mediator sent to Bob.
    pub opa2: OpaParams,
    /// PSA in front of the channel.
    pub opa3: OpaParams,
    pub transmissivity: f64,
}

impl EbParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("g", self.g)?;
        check_positive("g_A", self.g_a)?;
        check_positive("g_0", self.g_0)?;
        self.opa1.validate()?;
        self.opa2.validate()?;
        self.opa3.validate()?;
        check_transmissivity(self.transmissivity)?;
        check_positive("g_B", self.g_b())
    }

    /// `√(η₃G₃T)`.
    pub fn link_amplitude(&self) -> f64 {
        amplified_link(self.opa3, self.transmissivity).0
    }

    /// Resource-preparation gain `−g₀/g_A`.
    pub fn g_m(&self) -> f64 {
        -self.g_0 / self.g_a
    }

    /// Bob's gain `g / (g₀ √(η₃G₃T))`.
    pub fn g_b(&self) -> f64 {
        self.g / (self.g_0 * self.link_amplitude())
    }

    pub fn summary(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("g".into(), self.g),
            ("g_A".into(), self.g_a),
            ("g_0".into(), self.g_0),
            ("g_M".into(), self.g_m()),
            ("g_B".into(), self.g_b()),
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

/// Appends the EB link between user modes `a` (Alice) and `b` (Bob) to a
/// circuit, declaring the two mediators. Shared with cluster fusion.
pub(crate) fn wire_eb(c: &mut Circuit, p: &EbParams, a: usize, b: usize) -> (usize, usize) {
    let m1 = c.vacuum("M1");
    let m2 = c.vacuum("M2");
    c.opa(m1, p.opa1, "n1")
        .opa(m2, p.opa2, "n2")
        .qnd(m1, m2, p.g_m())
        .opa(m2, p.opa3, "n3")
        .loss(m2, p.transmissivity, "ch")
        .qnd(a, m1, p.g_a)
        .qnd(m2, b, p.g_b())
        .feedforward(m1, Quad::X, &[(b, Quad::X, p.g / p.g_a)])
        .feedforward(m2, Quad::P, &[(a, Quad::P, p.g_0 * p.link_amplitude())]);
    (m1, m2)
}

pub fn build_eb(p: &EbParams) -> Result<ProtocolRealization> {
    p.validate()?;
    let mut c = Circuit::new();
    let a = c.vacuum(INPUT_A);
    let b = c.vacuum(INPUT_B);
    wire_eb(&mut c, p, a, b);
    ProtocolRealization::from_circuit(SchemeParams::Eb(*p), c)
}

pub(super) fn closed_form(p: &EbParams) -> Result<NoiseBudget> {
    p.validate()?;
    let t = p.transmissivity;
    let (e1, g1) = (p.opa1.efficiency, p.opa1.gain);
    let (e2, g2) = (p.opa2.efficiency, p.opa2.gain);
    let (e3, g3) = (p.opa3.efficiency, p.opa3.gain);
    let (_, pn1) = opa_noise_variances(p.opa1);
    let (xn2, pn2) = opa_noise_variances(p.opa2);
    let (xn3, pn3) = opa_noise_variances(p.opa3);
    let a3 = (e3 * g3 * t).sqrt();
    let mut n = Tally::default();
    let kp = -p.g_0 * (1.0 - e3 * t);
    n.p("M2", kp * (e2 / g2).sqrt(), 1.0)
        .p("n2", kp * (1.0 - e2).sqrt(), pn2)
        .p("ch", p.g_0 * a3 * (1.0 - t).sqrt(), 1.0)
        .p("n3", p.g_0 * a3 * ((1.0 - e3) * t).sqrt(), pn3)
        .p("M1", -p.g_a * (e1 / g1).sqrt(), 1.0)
        .p("n1", -p.g_a * (1.0 - e1).sqrt(), pn1);
    let kx = p.g / p.g_0;
    n.x("M2", kx * (e2 * g2).sqrt(), 1.0)
        .x("n2", kx * (1.0 - e2).sqrt(), xn2)
        .x("ch", kx / a3 * (1.0 - t).sqrt(), 1.0)
        .x("n3", kx / a3 * ((1.0 - e3) * t).sqrt(), xn3);
    Ok(n.finish())
}
