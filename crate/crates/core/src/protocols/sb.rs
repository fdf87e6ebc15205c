//! Squeezing-based protocol: one squeezed mediator, one channel use, one
//! feed-forward.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::budget::{NoiseBudget, Tally};
use super::{amplified_link, check_positive, check_transmissivity, ProtocolRealization, SchemeParams, INPUT_A, INPUT_B};
use crate::circuit::Circuit;
use crate::elements::{opa_noise_variances, OpaParams};
use crate::error::Result;
use crate::linform::Quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbParams {
    pub g: f64,
    pub g_a: f64,
    /// Offline squeezer of the mediator.
    pub opa1: OpaParams,
    /// PSA in front of the channel.
    pub opa2: OpaParams,
    pub transmissivity: f64,
}

impl SbParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("g", self.g)?;
        check_positive("g_A", self.g_a)?;
        self.opa1.validate()?;
        self.opa2.validate()?;
        check_transmissivity(self.transmissivity)?;
        check_positive("g_B", self.g_b())
    }

    /// `√(η₂G₂T)`.
    pub fn link_amplitude(&self) -> f64 {
        amplified_link(self.opa2, self.transmissivity).0
    }

    /// Bob's gain `g / (g_A √(η₂G₂T))`.
    pub fn g_b(&self) -> f64 {
        self.g / (self.g_a * self.link_amplitude())
    }

    pub fn summary(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("g".into(), self.g),
            ("g_A".into(), self.g_a),
            ("g_B".into(), self.g_b()),
            ("G1".into(), self.opa1.gain),
            ("eta1".into(), self.opa1.efficiency),
            ("G2".into(), self.opa2.gain),
            ("eta2".into(), self.opa2.efficiency),
            ("T".into(), self.transmissivity),
        ])
    }
}

pub fn build_sb(p: &SbParams) -> Result<ProtocolRealization> {
    p.validate()?;
    let mut c = Circuit::new();
    let a = c.vacuum(INPUT_A);
    let b = c.vacuum(INPUT_B);
    let m = c.vacuum("M");
    c.opa(m, p.opa1, "n1")
        .qnd(a, m, p.g_a)
        .opa(m, p.opa2, "n2")
        .loss(m, p.transmissivity, "ch")
        .qnd(m, b, p.g_b())
        .feedforward(m, Quad::P, &[(a, Quad::P, p.g_a * p.link_amplitude())]);
    ProtocolRealization::from_circuit(SchemeParams::Sb(*p), c)
}

pub(super) fn closed_form(p: &SbParams) -> Result<NoiseBudget> {
    p.validate()?;
    let t = p.transmissivity;
    let (e1, g1) = (p.opa1.efficiency, p.opa1.gain);
    let (e2, g2) = (p.opa2.efficiency, p.opa2.gain);
    let (xn1, pn1) = opa_noise_variances(p.opa1);
    let (xn2, pn2) = opa_noise_variances(p.opa2);
    let a2 = (e2 * g2 * t).sqrt();
    let mut n = Tally::default();
    let kp = -p.g_a * (1.0 - e2 * t);
    n.p("M", kp * (e1 / g1).sqrt(), 1.0)
        .p("n1", kp * (1.0 - e1).sqrt(), pn1)
        .p("ch", p.g_a * a2 * (1.0 - t).sqrt(), 1.0)
        .p("n2", p.g_a * a2 * ((1.0 - e2) * t).sqrt(), pn2);
    let kx = p.g / p.g_a;
    n.x("M", kx * (e1 * g1).sqrt(), 1.0)
        .x("n1", kx * (1.0 - e1).sqrt(), xn1)
        .x("ch", kx / a2 * (1.0 - t).sqrt(), 1.0)
        .x("n2", kx / a2 * ((1.0 - e2) * t).sqrt(), xn2);
    Ok(n.finish())
}
