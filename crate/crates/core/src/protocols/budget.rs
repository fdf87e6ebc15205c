use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linform::{Context, LinearForm};

/// Variances of the additive noise operators with their per-source split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub xi_x: f64,
    pub xi_p: f64,
    /// label → (contribution to ξ_x, contribution to ξ_p)
    pub per_source: BTreeMap<String, (f64, f64)>,
}

impl NoiseBudget {
    pub fn from_forms(ctx: &Context, nx: &LinearForm, np: &LinearForm) -> Result<Self> {
        let mut per_source: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for (label, v) in ctx.variance_by_source(nx)? {
            per_source.entry(label).or_default().0 += v;
        }
        for (label, v) in ctx.variance_by_source(np)? {
            per_source.entry(label).or_default().1 += v;
        }
        Ok(Self {
            xi_x: ctx.variance(nx)?,
            xi_p: ctx.variance(np)?,
            per_source,
        })
    }

    /// Symmetric excess noise, when `ξ_x = ξ_p`; otherwise the mean of the two.
    pub fn xi(&self) -> f64 {
        0.5 * (self.xi_x + self.xi_p)
    }

    pub fn asymmetry(&self) -> f64 {
        (self.xi_x - self.xi_p).abs()
    }

    /// Largest relative deviation between two budgets over ξ_x, ξ_p and every
    /// per-source entry present in either.
    pub fn max_relative_difference(&self, other: &NoiseBudget) -> f64 {
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        let mut worst = rel(self.xi_x, other.xi_x).max(rel(self.xi_p, other.xi_p));
        let labels: std::collections::BTreeSet<&String> =
            self.per_source.keys().chain(other.per_source.keys()).collect();
        for l in labels {
            let a = self.per_source.get(l).copied().unwrap_or_default();
            let b = other.per_source.get(l).copied().unwrap_or_default();
            // Per-source entries are compared against the total so that tiny
            // contributions do not dominate the measure.
            let sx = self.xi_x.abs().max(other.xi_x.abs()).max(f64::MIN_POSITIVE);
            let sp = self.xi_p.abs().max(other.xi_p.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max((a.0 - b.0).abs() / sx).max((a.1 - b.1).abs() / sp);
        }
        worst
    }
}

/// Accumulates `Σ c² var` terms of a transcribed noise operator.
#[derive(Debug, Default)]
pub(crate) struct Tally {
    per_source: BTreeMap<String, (f64, f64)>,
}

impl Tally {
    /// Adds a term `coeff · q_label` of 𝒩_x, where `q_label` has variance `var`.
    pub fn x(&mut self, label: &str, coeff: f64, var: f64) -> &mut Self {
        self.per_source.entry(label.to_string()).or_default().0 += square_times(coeff, var);
        self
    }

    pub fn p(&mut self, label: &str, coeff: f64, var: f64) -> &mut Self {
        self.per_source.entry(label.to_string()).or_default().1 += square_times(coeff, var);
        self
    }

    pub fn finish(mut self) -> NoiseBudget {
        self.per_source.retain(|_, (x, p)| *x != 0.0 || *p != 0.0);
        NoiseBudget {
            xi_x: self.per_source.values().map(|v| v.0).sum(),
            xi_p: self.per_source.values().map(|v| v.1).sum(),
            per_source: self.per_source,
        }
    }
}

/// `c² v` with `0 · ∞ = 0`: a source that is switched off contributes
/// nothing however large its variance.
fn square_times(c: f64, v: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * c * v
    }
}
