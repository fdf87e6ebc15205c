//! Physical elements: QND gates, beam splitters, lossy OPAs, pure loss and
//! homodyne feed-forward.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gstate::{index, GaussianChannel, GaussianState};
use crate::linform::{LinearForm, Quad};

/// Effective OPA parameters: gain `G > 0` and efficiency `η ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpaParams {
    pub gain: f64,
    pub efficiency: f64,
}

impl OpaParams {
    pub const IDENTITY: OpaParams = OpaParams {
        gain: 1.0,
        efficiency: 1.0,
    };

    pub fn new(gain: f64, efficiency: f64) -> Result<Self> {
        let p = Self { gain, efficiency };
        p.validate()?;
        Ok(p)
    }

    /// Lossless squeezer.
    pub fn ideal(gain: f64) -> Self {
        Self {
            gain,
            efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0) || !self.gain.is_finite() {
            return domain(format!("OPA gain must be finite and > 0, got {}", self.gain));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return domain(format!("OPA efficiency must lie in (0, 1], got {}", self.efficiency));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.efficiency == 1.0
    }

    pub fn is_identity(&self) -> bool {
        self.gain == 1.0 && self.efficiency == 1.0
    }

    /// Amplitude factors `(√(ηG), √(η/G))`.
    pub fn amplitudes(&self) -> (f64, f64) {
        (
            (self.efficiency * self.gain).sqrt(),
            (self.efficiency / self.gain).sqrt(),
        )
    }
}

/// Microscopic OPA description: squeezing rate, loss rate, interaction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalOpaParams {
    pub chi: f64,
    pub gamma: f64,
    pub time: f64,
}

/// `G = e^{2χt}`, `η = e^{−γt}`.
pub fn opa_from_physical(p: PhysicalOpaParams) -> Result<OpaParams> {
    if !(p.time >= 0.0) || !(p.gamma >= 0.0) || !p.chi.is_finite() {
        return domain(format!(
            "physical OPA needs t >= 0, gamma >= 0 and finite chi, got {p:?}"
        ));
    }
    OpaParams::new((2.0 * p.chi * p.time).exp(), (-p.gamma * p.time).exp())
}

/// Width of the band around `a = 1` inside which `(a − 1)/ln a` is
/// evaluated by its series.
const SERIES_BAND: f64 = 1e-8;

/// `(a − 1) / ln a`, continuous at `a = 1` (value 1) and at `a = 0`
/// (value 0).
pub(crate) fn log_ratio(a: f64) -> f64 {
    let u = a - 1.0;
    if u.abs() < SERIES_BAND {
        1.0 + u / 2.0 - u * u / 12.0
    } else if a == 0.0 {
        0.0
    } else {
        u / u.ln_1p()
    }
}

/// Quadrature variances of the squeezed-thermal noise mode of a lossy OPA.
///
/// With `h(a) = (a − 1)/ln a` this is `x = h(ηG)/h(η)` and
/// `p = h(η/G)/h(η)`, which covers the removable singularities at `G = 1`,
/// `ηG = 1` and `η = 1`.
pub fn opa_noise_variances(p: OpaParams) -> (f64, f64) {
    let eta = p.efficiency;
    let h_eta = log_ratio(eta);
    (
        log_ratio(eta * p.gain) / h_eta,
        log_ratio(eta / p.gain) / h_eta,
    )
}

/// Single-mode channel of a lossy OPA:
/// `X = diag(√(ηG), √(η/G))`, `Y = (1 − η)·diag(⟨x_n²⟩, ⟨p_n²⟩)`.
pub fn opa_channel(p: OpaParams) -> Result<GaussianChannel> {
    p.validate()?;
    let (ax, ap) = p.amplitudes();
    let (vx, vp) = opa_noise_variances(p);
    let w = 1.0 - p.efficiency;
    let ch = GaussianChannel {
        x: DMatrix::from_diagonal(&DVector::from_vec(vec![ax, ap])),
        y: DMatrix::from_diagonal(&DVector::from_vec(vec![w * vx, w * vp])),
    };
    ch.check_cp()
        .map_err(|e| Error::Contract(format!("OPA channel self-check failed for {p:?}: {e}")))?;
    Ok(ch)
}

/// Pure-loss channel of transmissivity `T ∈ (0, 1]`.
pub fn pure_loss(t: f64) -> Result<GaussianChannel> {
    if !(t > 0.0 && t <= 1.0) {
        return domain(format!("transmissivity must lie in (0, 1], got {t}"));
    }
    Ok(GaussianChannel {
        x: DMatrix::identity(2, 2) * t.sqrt(),
        y: DMatrix::identity(2, 2) * (1.0 - t),
    })
}

/// QND gate on (control, target):
/// `x_c' = x_c`, `p_c' = p_c − g p_t`, `x_t' = x_t + g x_c`, `p_t' = p_t`.
pub fn qnd_gate(g: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, -g, //
            g, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    )
}

/// Beam splitter of transmissivity τ:
/// `a' = √τ a + √(1−τ) b`, `b' = −√(1−τ) a + √τ b`, both quadratures alike.
pub fn beam_splitter(tau: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return domain(format!("beam-splitter transmissivity must lie in [0, 1], got {tau}"));
    }
    let (c, s) = (tau.sqrt(), (1.0 - tau).sqrt());
    Ok(DMatrix::from_row_slice(
        4,
        4,
        &[
            c, 0.0, s, 0.0, //
            0.0, c, 0.0, s, //
            -s, 0.0, c, 0.0, //
            0.0, -s, 0.0, c,
        ],
    ))
}

/// One feed-forward correction: `target += gain · measured`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedTarget {
    pub mode: usize,
    pub quad: Quad,
    pub gain: f64,
}

/// Homodyne measurement of `measured` followed by outcome-proportional
/// displacements, averaged over outcomes. Implemented as the linear update
/// `target += gain · measured` followed by discarding the measured mode.
/// Returned modes keep their relative order.
pub fn homodyne_feedforward(
    state: &GaussianState,
    measured: (usize, Quad),
    targets: &[FeedTarget],
) -> Result<GaussianState> {
    let (m, mq) = measured;
    let n = state.n_modes();
    if m >= n {
        return domain(format!("measured mode {m} out of range"));
    }
    for t in targets {
        if t.mode == m {
            return domain("feed-forward target coincides with the measured mode");
        }
        if t.mode >= n {
            return domain(format!("target mode {} out of range", t.mode));
        }
    }
    let modes: Vec<usize> = (0..n).collect();
    let mut l = DMatrix::identity(2 * n, 2 * n);
    for t in targets {
        l[(index(t.mode, t.quad), index(m, mq))] += t.gain;
    }
    let coupled = state.apply_linear(&l, &modes)?;
    let keep: Vec<usize> = (0..n).filter(|&k| k != m).collect();
    coupled.partial_trace(&keep)
}

/// Linear-form counterpart of [`homodyne_feedforward`]: updates the target
/// quadratures in `forms` (indexed by mode, `(x, p)` pairs).
pub fn homodyne_feedforward_forms(
    forms: &mut [(LinearForm, LinearForm)],
    measured: (usize, Quad),
    targets: &[FeedTarget],
) -> Result<()> {
    let (m, mq) = measured;
    if m >= forms.len() {
        return domain(format!("measured mode {m} out of range"));
    }
    let read = match mq {
        Quad::X => forms[m].0.clone(),
        Quad::P => forms[m].1.clone(),
    };
    for t in targets {
        if t.mode == m {
            return domain("feed-forward target coincides with the measured mode");
        }
        let slot = forms
            .get_mut(t.mode)
            .ok_or_else(|| Error::Domain(format!("target mode {} out of range", t.mode)))?;
        match t.quad {
            Quad::X => slot.0.add_scaled(t.gain, &read),
            Quad::P => slot.1.add_scaled(t.gain, &read),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gstate::{is_symplectic, make_state, omega, StateKind};
    use approx::assert_relative_eq;

    #[test]
    fn noise_variances_reference_point() {
        // Direct evaluation of the log-ratio formula at (G, η) = (2, 0.7).
        let eta: f64 = 0.7;
        let g: f64 = 2.0;
        let x_direct = (1.0 - eta * g) / (1.0 - eta) * eta.ln() / (eta * g).ln();
        let p_direct = (1.0 - eta / g) / (1.0 - eta) * eta.ln() / (eta / g).ln();
        let (x, p) = opa_noise_variances(OpaParams::new(g, eta).unwrap());
        assert_relative_eq!(x, x_direct, max_relative = 1e-14);
        assert_relative_eq!(p, p_direct, max_relative = 1e-14);
        assert!((x - 1.41340).abs() < 1e-5);
        assert!((p - 0.73612).abs() < 5e-6);
    }

    #[test]
    fn noise_variances_limits() {
        assert_eq!(opa_noise_variances(OpaParams::new(1.0, 0.5).unwrap()), (1.0, 1.0));
        // ηG = 1: x = −ln η / (1 − η).
        let eta: f64 = 0.4;
        let (x, _) = opa_noise_variances(OpaParams::new(1.0 / eta, eta).unwrap());
        assert_relative_eq!(x, -eta.ln() / (1.0 - eta), max_relative = 1e-12);
        // η = 1: x = (G − 1)/ln G, p = (1 − 1/G)/ln G.
        let g: f64 = 3.0;
        let (x, p) = opa_noise_variances(OpaParams::ideal(g));
        assert_relative_eq!(x, (g - 1.0) / g.ln(), max_relative = 1e-14);
        assert_relative_eq!(p, (1.0 - 1.0 / g) / g.ln(), max_relative = 1e-14);
    }

    #[test]
    fn noise_variances_continuous_across_guard_band() {
        let g: f64 = 3.0;
        let (lx, lp) = opa_noise_variances(OpaParams::ideal(g));
        let (x, p) = opa_noise_variances(OpaParams::new(g, 1.0 - 1e-9).unwrap());
        assert!((x - lx).abs() < 1e-6 && (p - lp).abs() < 1e-6);

        let (x, p) = opa_noise_variances(OpaParams::new(1.0 + 1e-9, 0.6).unwrap());
        assert!((x - 1.0).abs() < 1e-6 && (p - 1.0).abs() < 1e-6);

        let eta: f64 = 0.6;
        let lim = -eta.ln() / (1.0 - eta);
        let (x, _) = opa_noise_variances(OpaParams::new((1.0 + 1e-9) / eta, eta).unwrap());
        assert!((x - lim).abs() < 1e-6);
        // Either side of the band edge.
        for d in [0.9e-8, 1.1e-8] {
            let (x, _) = opa_noise_variances(OpaParams::new((1.0 + d) / eta, eta).unwrap());
            assert!((x - lim).abs() < 1e-7);
        }
    }

    #[test]
    fn opa_channel_cases() {
        let id = opa_channel(OpaParams::IDENTITY).unwrap();
        assert_eq!(id, GaussianChannel::identity(1));
        let sq = opa_channel(OpaParams::ideal(4.0)).unwrap();
        assert_relative_eq!(sq.x, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])), epsilon = 1e-15);
        assert_eq!(sq.y, DMatrix::zeros(2, 2));
        let lossy = opa_channel(OpaParams::new(2.0, 0.7).unwrap()).unwrap();
        assert_relative_eq!(lossy.x[(0, 0)], 1.4f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(lossy.x[(1, 1)], 0.35f64.sqrt(), epsilon = 1e-15);
        let (vx, vp) = opa_noise_variances(OpaParams::new(2.0, 0.7).unwrap());
        assert_relative_eq!(lossy.y[(0, 0)], 0.3 * vx, epsilon = 1e-15);
        assert_relative_eq!(lossy.y[(1, 1)], 0.3 * vp, epsilon = 1e-15);
    }

    #[test]
    fn opa_on_vacuum() {
        let v = make_state(StateKind::Vacuum, 1).unwrap();
        let out = v.apply_channel(&opa_channel(OpaParams::new(1.0, 0.5).unwrap()).unwrap(), &[0]).unwrap();
        assert_relative_eq!(out.cm(), &DMatrix::identity(2, 2), epsilon = 1e-15);
        let out = v.apply_channel(&opa_channel(OpaParams::new(2.0, 0.7).unwrap()).unwrap(), &[0]).unwrap();
        assert!((out.cm()[(0, 0)] - 1.82402).abs() < 5e-6);
        assert!((out.cm()[(1, 1)] - 0.57084).abs() < 5e-6);
    }

    #[test]
    fn physical_parameters() {
        let p = opa_from_physical(PhysicalOpaParams { chi: 0.0, gamma: 0.0, time: 3.0 }).unwrap();
        assert_eq!(p, OpaParams::IDENTITY);
        let p = opa_from_physical(PhysicalOpaParams { chi: 0.5, gamma: 0.0, time: 1.0 }).unwrap();
        assert_eq!(p.gain, std::f64::consts::E);
        let p = opa_from_physical(PhysicalOpaParams { chi: 0.3, gamma: 0.2, time: 2.0 }).unwrap();
        assert!((p.gain - 3.32012).abs() < 5e-6);
        assert!((p.efficiency - 0.67032).abs() < 5e-6);
        assert!(opa_from_physical(PhysicalOpaParams { chi: 0.1, gamma: -1.0, time: 1.0 }).is_err());
    }

    #[test]
    fn pure_loss_cases() {
        assert_eq!(pure_loss(1.0).unwrap(), GaussianChannel::identity(1));
        let v = make_state(StateKind::Vacuum, 1).unwrap();
        assert_relative_eq!(v.apply_channel(&pure_loss(0.5).unwrap(), &[0]).unwrap().cm(), v.cm(), epsilon = 1e-15);
        let th = make_state(StateKind::Thermal(1.0), 1).unwrap();
        let out = th.apply_channel(&pure_loss(0.5).unwrap(), &[0]).unwrap();
        assert_relative_eq!(out.cm(), &(DMatrix::identity(2, 2) * 2.0), epsilon = 1e-15);
        assert!(pure_loss(0.0).is_err());
    }

    #[test]
    fn unitary_elements_are_symplectic() {
        for g in [-2.0, -0.3, 0.0, 0.7, 5.0] {
            assert!(is_symplectic(&qnd_gate(g)));
        }
        for tau in [0.0, 0.3, 0.5, 1.0] {
            let bs = beam_splitter(tau).unwrap();
            let w = omega(2);
            assert!((&bs * &w * bs.transpose() - &w).amax() < 1e-15);
        }
        assert_eq!(qnd_gate(0.0), DMatrix::identity(4, 4));
        assert_eq!(beam_splitter(1.0).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn qnd_composition_is_additive() {
        let a = qnd_gate(0.4) * qnd_gate(-1.3);
        assert_relative_eq!(a, qnd_gate(-0.9), epsilon = 1e-15);
    }

    #[test]
    fn balanced_splitter_keeps_vacuum() {
        let v = make_state(StateKind::Vacuum, 2).unwrap();
        let out = v.apply_symplectic(&beam_splitter(0.5).unwrap(), &[0, 1]).unwrap();
        assert_relative_eq!(out.cm(), v.cm(), epsilon = 1e-15);
    }

    #[test]
    fn lossy_opa_is_not_undone_by_inverse_squeeze() {
        let p = OpaParams::new(2.5, 0.8).unwrap();
        let c = opa_channel(p).unwrap().then(&opa_channel(OpaParams::ideal(1.0 / p.gain)).unwrap());
        assert!(c.y.amax() > 1e-3);
        assert_relative_eq!(c.x, DMatrix::identity(2, 2) * p.efficiency.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn feedforward_gain_zero_is_partial_trace() {
        let v = make_state(StateKind::Vacuum, 2).unwrap();
        let s = v.apply_symplectic(&qnd_gate(1.2), &[0, 1]).unwrap();
        let ff = homodyne_feedforward(&s, (1, Quad::P), &[FeedTarget { mode: 0, quad: Quad::P, gain: 0.0 }]).unwrap();
        assert_eq!(ff, s.partial_trace(&[0]).unwrap());
        assert!(homodyne_feedforward(&s, (1, Quad::P), &[FeedTarget { mode: 1, quad: Quad::X, gain: 1.0 }]).is_err());
    }

    #[test]
    fn feedforward_two_targets_bilinear() {
        // Modes: 0, 1 targets, 2 measured; correlated through a QND.
        let s0 = crate::gstate::product_state(&[(1.0, 1.0), (2.0, 0.5), (1.5, 1.0 / 1.5)]).unwrap();
        let s = s0.apply_symplectic(&qnd_gate(0.8), &[2, 0]).unwrap();
        let (lam, mu) = (0.6, -1.1);
        let out = homodyne_feedforward(
            &s,
            (2, Quad::X),
            &[
                FeedTarget { mode: 0, quad: Quad::X, gain: lam },
                FeedTarget { mode: 1, quad: Quad::P, gain: mu },
            ],
        )
        .unwrap();
        let vm = s.entry(2, Quad::X, 2, Quad::X);
        let expect_x0 = s.entry(0, Quad::X, 0, Quad::X) + 2.0 * lam * s.entry(0, Quad::X, 2, Quad::X) + lam * lam * vm;
        let expect_p1 = s.entry(1, Quad::P, 1, Quad::P) + 2.0 * mu * s.entry(1, Quad::P, 2, Quad::X) + mu * mu * vm;
        assert_relative_eq!(out.entry(0, Quad::X, 0, Quad::X), expect_x0, epsilon = 1e-14);
        assert_relative_eq!(out.entry(1, Quad::P, 1, Quad::P), expect_p1, epsilon = 1e-14);
    }
}
