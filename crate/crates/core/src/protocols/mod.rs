//! The four nonlocal QND protocols (SB, EB, BM, GP).
//!
//! Each builder wires a [`Circuit`], runs it through both engines and
//! returns a [`ProtocolRealization`]. The analytic noise operators are
//! transcribed separately in [`closed_form_noise`] so that the circuits and
//! the formulas check each other.

mod bm;
mod budget;
mod eb;
mod gp;
mod sb;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

pub use bm::{build_bm, BellMeasurement, BmParams};
pub use budget::NoiseBudget;
pub use eb::{build_eb, EbParams};
pub(crate) use eb::wire_eb;
pub use gp::{build_gp, build_gp_with, GpOverrides, GpParams, OfflineSqueeze, G1_FLOOR};
pub use sb::{build_sb, SbParams};

use crate::circuit::Circuit;
use crate::error::{domain, Error, Result};
use crate::gstate::GaussianState;
use crate::linform::{commutator_check, Context, LinearForm, Quad};

/// Labels of the two users' modes in every protocol circuit.
pub const INPUT_A: &str = "A";
pub const INPUT_B: &str = "B";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sb,
    Eb,
    Bm,
    Gp,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Sb, Scheme::Eb, Scheme::Bm, Scheme::Gp];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sb => "sb",
            Scheme::Eb => "eb",
            Scheme::Bm => "bm",
            Scheme::Gp => "gp",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sb" => Ok(Scheme::Sb),
            "eb" => Ok(Scheme::Eb),
            "bm" => Ok(Scheme::Bm),
            "gp" => Ok(Scheme::Gp),
            other => domain(format!("unknown scheme `{other}` (expected sb, eb, bm or gp)")),
        }
    }
}

/// Which OPAs are present and lossy.
///
/// `Ideal`: every OPA lossless. `Off`: only the offline squeezers, with
/// efficiency η; online PSAs removed. `On`: every OPA present with
/// efficiency η.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Ideal,
    Off,
    On,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Ideal => "ideal",
            Case::Off => "off",
            Case::On => "on",
        })
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(Case::Ideal),
            "off" => Ok(Case::Off),
            "on" => Ok(Case::On),
            other => domain(format!("unknown case `{other}` (expected ideal, off or on)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeParams {
    Sb(SbParams),
    Eb(EbParams),
    Bm(BmParams),
    Gp(GpParams),
}

impl SchemeParams {
    pub fn scheme(&self) -> Scheme {
        match self {
            SchemeParams::Sb(_) => Scheme::Sb,
            SchemeParams::Eb(_) => Scheme::Eb,
            SchemeParams::Bm(_) => Scheme::Bm,
            SchemeParams::Gp(_) => Scheme::Gp,
        }
    }

    /// Target gain `g`.
    pub fn gain(&self) -> f64 {
        match self {
            SchemeParams::Sb(p) => p.g,
            SchemeParams::Eb(p) => p.g,
            SchemeParams::Bm(p) => p.g,
            SchemeParams::Gp(p) => p.g,
        }
    }

    pub fn transmissivity(&self) -> f64 {
        match self {
            SchemeParams::Sb(p) => p.transmissivity,
            SchemeParams::Eb(p) => p.transmissivity,
            SchemeParams::Bm(p) => p.transmissivity,
            SchemeParams::Gp(p) => p.transmissivity,
        }
    }

    /// Named scalar parameters, including derived gains, for reports.
    pub fn summary(&self) -> BTreeMap<String, f64> {
        match self {
            SchemeParams::Sb(p) => p.summary(),
            SchemeParams::Eb(p) => p.summary(),
            SchemeParams::Bm(p) => p.summary(),
            SchemeParams::Gp(p) => p.summary(),
        }
    }
}

pub fn build(params: &SchemeParams) -> Result<ProtocolRealization> {
    match params {
        SchemeParams::Sb(p) => build_sb(p),
        SchemeParams::Eb(p) => build_eb(p),
        SchemeParams::Bm(p) => build_bm(p),
        SchemeParams::Gp(p) => build_gp(p),
    }
}

/// Noise operators from their analytic expressions.
pub fn closed_form_noise(params: &SchemeParams) -> Result<NoiseBudget> {
    match params {
        SchemeParams::Sb(p) => sb::closed_form(p),
        SchemeParams::Eb(p) => eb::closed_form(p),
        SchemeParams::Bm(p) => bm::closed_form(p),
        SchemeParams::Gp(p) => gp::closed_form(p),
    }
}

/// Symplectic matrix of the ideal QND of gain `g` on `(x_A, p_A, x_B, p_B)`.
pub fn ideal_gate(g: f64) -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, -g, //
        g, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// A fully wired protocol instance.
#[derive(Debug, Clone)]
pub struct ProtocolRealization {
    pub params: SchemeParams,
    pub circuit: Circuit,
    pub context: Context,
    /// `(x_A', p_A', x_B', p_B')`.
    pub outputs: [LinearForm; 4],
    /// Two-mode output state for vacuum inputs, ordered `(A, B)`.
    pub state: GaussianState,
    pub budget: NoiseBudget,
}

impl ProtocolRealization {
    /// Runs both engines on a protocol circuit whose user modes are labelled
    /// [`INPUT_A`] and [`INPUT_B`].
    pub(crate) fn from_circuit(params: SchemeParams, circuit: Circuit) -> Result<Self> {
        let a = circuit
            .mode_index(INPUT_A)
            .ok_or_else(|| Error::Contract("circuit lacks mode A".into()))?;
        let b = circuit
            .mode_index(INPUT_B)
            .ok_or_else(|| Error::Contract("circuit lacks mode B".into()))?;
        let run = circuit.run_forms()?;
        let (xa, pa) = run.mode(a)?.clone();
        let (xb, pb) = run.mode(b)?.clone();
        let outputs = [xa, pa, xb, pb];
        let state = circuit.run_state()?.reduced(&[a, b])?;
        let budget = NoiseBudget::from_forms(&run.context, &noise_x(&outputs), &noise_p(&outputs))?;
        Ok(Self {
            params,
            circuit,
            context: run.context,
            outputs,
            state,
            budget,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.params.scheme()
    }

    /// `(𝒩_x, 𝒩_p)`: the parts of `x_B'` and `p_A'` not carried by the
    /// users' own input quadratures.
    pub fn noise_forms(&self) -> (LinearForm, LinearForm) {
        (noise_x(&self.outputs), noise_p(&self.outputs))
    }

    /// `(ξ_x, ξ_p)` read off the covariance engine: output covariance minus
    /// the ideal-gate image of the vacuum input.
    pub fn gstate_excess(&self) -> (f64, f64) {
        let s = ideal_gate(self.params.gain());
        let ideal = s * s.transpose();
        let cm = self.state.cm();
        (cm[(2, 2)] - ideal[(2, 2)], cm[(1, 1)] - ideal[(1, 1)])
    }

    /// Normalized commutators of the output pairs `(x_A', p_A')`,
    /// `(x_B', p_B')`; both equal 1 for a canonical map.
    pub fn commutators(&self) -> (f64, f64) {
        (
            commutator_check(&self.outputs[0], &self.outputs[1]),
            commutator_check(&self.outputs[2], &self.outputs[3]),
        )
    }
}

fn noise_x(outputs: &[LinearForm; 4]) -> LinearForm {
    outputs[2].without(&[INPUT_A, INPUT_B]).pruned()
}

fn noise_p(outputs: &[LinearForm; 4]) -> LinearForm {
    outputs[1].without(&[INPUT_A, INPUT_B]).pruned()
}

/// Largest absolute deviation of the output-form coefficients on
/// `(x_A, p_A, x_B, p_B)` from the ideal QND matrix, offsets included.
pub fn verify_gate_shape(r: &ProtocolRealization) -> f64 {
    let s = ideal_gate(r.params.gain());
    let inputs = [(INPUT_A, Quad::X), (INPUT_A, Quad::P), (INPUT_B, Quad::X), (INPUT_B, Quad::P)];
    let mut worst: f64 = 0.0;
    for (row, form) in r.outputs.iter().enumerate() {
        for (col, (label, q)) in inputs.iter().enumerate() {
            worst = worst.max((form.coeff(label, *q) - s[(row, col)]).abs());
        }
        worst = worst.max(form.offset.abs());
    }
    worst
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be finite and > 0, got {v}"))
    }
}

pub(crate) fn check_transmissivity(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        domain(format!("transmissivity must lie in (0, 1], got {t}"))
    }
}

/// `(√(ηGT), √(ηT/G), √((1−η)T))`: amplitudes of an OPA followed by the
/// channel, and the weight of its noise mode.
pub(crate) fn amplified_link(opa: crate::elements::OpaParams, t: f64) -> (f64, f64, f64) {
    let (ax, ap) = opa.amplitudes();
    (ax * t.sqrt(), ap * t.sqrt(), ((1.0 - opa.efficiency) * t).sqrt())
}
