//! Heisenberg-picture bookkeeping with linear forms.
//!
//! Every quadrature is written as a real linear combination of the
//! quadratures of mutually independent, zero-mean Gaussian sources. Sources
//! carry no x–p correlation, so variances and covariances reduce to
//! coefficient sums and stay exact up to floating-point rounding.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Quadrature selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quad {
    X,
    P,
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quad::X => f.write_str("x"),
            Quad::P => f.write_str("p"),
        }
    }
}

/// An independent single-mode Gaussian source in shot-noise units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMode {
    pub label: String,
    pub x_var: f64,
    pub p_var: f64,
}

impl SourceMode {
    pub fn var(&self, q: Quad) -> f64 {
        match q {
            Quad::X => self.x_var,
            Quad::P => self.p_var,
        }
    }
}

/// Creates a source; the quadrature forms of the source are
/// [`LinearForm::basis`]`(label, X)` and `(label, P)`.
pub fn new_source(label: &str, x_var: f64, p_var: f64) -> Result<SourceMode> {
    if !(x_var >= 0.0 && p_var >= 0.0) || !x_var.is_finite() || !p_var.is_finite() {
        return domain(format!(
            "source `{label}` needs finite non-negative variances, got ({x_var}, {p_var})"
        ));
    }
    Ok(SourceMode {
        label: label.to_string(),
        x_var,
        p_var,
    })
}

/// Append-only registry of sources. Labels are unique.
#[derive(Debug, Clone, Default)]
pub struct Context {
    sources: Vec<SourceMode>,
    index: HashMap<String, usize>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a source and returns its `(x, p)` basis forms.
    pub fn add(&mut self, source: SourceMode) -> Result<(LinearForm, LinearForm)> {
        if self.index.contains_key(&source.label) {
            return domain(format!("duplicate source label `{}`", source.label));
        }
        let label = source.label.clone();
        self.index.insert(label.clone(), self.sources.len());
        self.sources.push(source);
        Ok((
            LinearForm::basis(&label, Quad::X),
            LinearForm::basis(&label, Quad::P),
        ))
    }

    pub fn add_new(&mut self, label: &str, x_var: f64, p_var: f64) -> Result<(LinearForm, LinearForm)> {
        self.add(new_source(label, x_var, p_var)?)
    }

    pub fn get(&self, label: &str) -> Option<&SourceMode> {
        self.index.get(label).map(|&i| &self.sources[i])
    }

    pub fn sources(&self) -> &[SourceMode] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    fn lookup(&self, label: &str) -> Result<&SourceMode> {
        self.get(label)
            .ok_or_else(|| Error::UnknownSource(label.to_string()))
    }

    /// Variance of a form: `Σ c_x² x_var + c_p² p_var`.
    pub fn variance(&self, f: &LinearForm) -> Result<f64> {
        self.covariance(f, f)
    }

    /// Symmetrized covariance of two forms.
    pub fn covariance(&self, f: &LinearForm, h: &LinearForm) -> Result<f64> {
        let mut acc = 0.0;
        for ((label, q), c) in &f.terms {
            let src = self.lookup(label)?;
            if let Some(d) = h.terms.get(&(label.clone(), *q)) {
                acc += c * d * src.var(*q);
            }
        }
        // Labels only present in `h` still have to exist.
        for (label, _) in h.terms.keys() {
            self.lookup(label)?;
        }
        Ok(acc)
    }

    /// Per-source split of a variance: label → contribution.
    pub fn variance_by_source(&self, f: &LinearForm) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for ((label, q), c) in &f.terms {
            let src = self.lookup(label)?;
            *out.entry(label.clone()).or_insert(0.0) += c * c * src.var(*q);
        }
        Ok(out)
    }
}

/// Linear combination of source quadratures plus a constant offset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    terms: BTreeMap<(String, Quad), f64>,
    pub offset: f64,
}

impl LinearForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(offset: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            offset,
        }
    }

    pub fn basis(label: &str, q: Quad) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((label.to_string(), q), 1.0);
        Self { terms, offset: 0.0 }
    }

    pub fn coeff(&self, label: &str, q: Quad) -> f64 {
        self.terms
            .get(&(label.to_string(), q))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, Quad, f64)> {
        self.terms.iter().map(|((l, q), c)| (l.as_str(), *q, *c))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        let mut seen: Vec<&str> = self.terms.keys().map(|(l, _)| l.as_str()).collect();
        seen.dedup();
        seen.into_iter()
    }

    /// `self + c · other`, in place.
    pub fn add_scaled(&mut self, c: f64, other: &LinearForm) {
        if c == 0.0 {
            return;
        }
        for ((label, q), v) in &other.terms {
            *self.terms.entry((label.clone(), *q)).or_insert(0.0) += c * v;
        }
        self.offset += c * other.offset;
    }

    pub fn scaled(&self, c: f64) -> LinearForm {
        LinearForm {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), c * v)).collect(),
            offset: c * self.offset,
        }
    }

    /// Drops coefficients that are exactly zero.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|_, v| *v != 0.0);
        self
    }

    /// Restriction of the form to the given labels.
    pub fn restricted_to(&self, labels: &[&str]) -> LinearForm {
        LinearForm {
            terms: self
                .terms
                .iter()
                .filter(|((l, _), _)| labels.contains(&l.as_str()))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            offset: 0.0,
        }
    }

    /// Everything except the given labels.
    pub fn without(&self, labels: &[&str]) -> LinearForm {
        LinearForm {
            terms: self
                .terms
                .iter()
                .filter(|((l, _), _)| !labels.contains(&l.as_str()))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            offset: self.offset,
        }
    }
}

impl Add for &LinearForm {
    type Output = LinearForm;
    fn add(self, rhs: &LinearForm) -> LinearForm {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub for &LinearForm {
    type Output = LinearForm;
    fn sub(self, rhs: &LinearForm) -> LinearForm {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Mul<&LinearForm> for f64 {
    type Output = LinearForm;
    fn mul(self, rhs: &LinearForm) -> LinearForm {
        rhs.scaled(self)
    }
}

impl Neg for &LinearForm {
    type Output = LinearForm;
    fn neg(self) -> LinearForm {
        self.scaled(-1.0)
    }
}

/// Normalized commutator `[xf, pf] / 2i`, i.e.
/// `Σ (c_x[xf]·c_p[pf] − c_p[xf]·c_x[pf])`.
pub fn commutator_check(xf: &LinearForm, pf: &LinearForm) -> f64 {
    let mut acc = 0.0;
    for ((label, q), c) in &xf.terms {
        let conj = match q {
            Quad::X => Quad::P,
            Quad::P => Quad::X,
        };
        if let Some(d) = pf.terms.get(&(label.clone(), conj)) {
            match q {
                Quad::X => acc += c * d,
                Quad::P => acc -= c * d,
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_and_squeezed_sources() {
        let vac = new_source("vac", 1.0, 1.0).unwrap();
        assert_eq!((vac.x_var, vac.p_var), (1.0, 1.0));
        let sqz = new_source("sqz", 0.5, 2.0).unwrap();
        assert_eq!(sqz.x_var * sqz.p_var, 1.0);
        assert!(matches!(new_source("bad", -1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn variance_of_sums() {
        let mut ctx = Context::new();
        let (x1, _) = ctx.add_new("vac", 1.0, 1.0).unwrap();
        let (x2, _) = ctx.add_new("vac2", 1.0, 1.0).unwrap();
        assert_eq!(ctx.variance(&x1).unwrap(), 1.0);
        assert_eq!(ctx.variance(&(&x1 + &x2)).unwrap(), 2.0);
        assert_eq!(ctx.variance(&(&x1 - &x1)).unwrap(), 0.0);
    }

    #[test]
    fn dangling_label_is_an_error() {
        let ctx = Context::new();
        let f = LinearForm::basis("ghost", Quad::X);
        assert_eq!(ctx.variance(&f), Err(Error::UnknownSource("ghost".into())));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut ctx = Context::new();
        ctx.add_new("a", 1.0, 1.0).unwrap();
        assert!(ctx.add_new("a", 1.0, 1.0).is_err());
    }

    #[test]
    fn commutators() {
        let x = LinearForm::basis("vac", Quad::X);
        let p = LinearForm::basis("vac", Quad::P);
        let p_other = LinearForm::basis("other", Quad::P);
        assert_eq!(commutator_check(&x, &p), 1.0);
        assert_eq!(commutator_check(&p, &x), -1.0);
        assert_eq!(commutator_check(&x, &p_other), 0.0);
    }

    #[test]
    fn variance_by_source_sums_to_variance() {
        let mut ctx = Context::new();
        let (xa, pa) = ctx.add_new("a", 2.0, 0.5).unwrap();
        let (xb, _) = ctx.add_new("b", 3.0, 1.0).unwrap();
        let mut f = 0.5 * &xa;
        f.add_scaled(-1.5, &pa);
        f.add_scaled(2.0, &xb);
        let parts = ctx.variance_by_source(&f).unwrap();
        let total: f64 = parts.values().sum();
        assert!((total - ctx.variance(&f).unwrap()).abs() < 1e-15);
        assert!((parts["a"] - (0.25 * 2.0 + 2.25 * 0.5)).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn variance_scales_quadratically(a in -10.0f64..10.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
                                         vx in 0.0f64..5.0, vp in 0.0f64..5.0) {
            let mut ctx = Context::new();
            let (x, p) = ctx.add_new("s", vx, vp).unwrap();
            let mut f = c1 * &x;
            f.add_scaled(c2, &p);
            let v = ctx.variance(&f).unwrap();
            let va = ctx.variance(&f.scaled(a)).unwrap();
            proptest::prop_assert!(v >= 0.0);
            proptest::prop_assert!((va - a * a * v).abs() <= 1e-12 * (1.0 + va.abs()));
        }
    }
}
