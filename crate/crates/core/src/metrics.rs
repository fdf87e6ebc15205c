//! Logarithmic negativity of the two-mode gate output, tolerable noise and
//! the small-loss expansion coefficients.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gstate::{min_hermitian_eigenvalue, omega, PHYSICALITY_TOL};
use crate::protocols::Scheme;

pub use crate::optimize::entanglement_ratio;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub e_n: f64,
    /// Smallest symplectic eigenvalue of the partial transpose.
    pub d_minus_tilde: f64,
    /// `I_A + I_B − 2 I_AB`.
    pub delta_tilde: f64,
    /// Symmetric excess noise, when the report comes from one.
    pub xi: Option<f64>,
}

impl EntanglementReport {
    /// Negativity in bits.
    pub fn e_n_log2(&self) -> f64 {
        self.e_n / std::f64::consts::LN_2
    }
}

fn block(cm: &DMatrix<f64>, r: usize, c: usize) -> Matrix2<f64> {
    Matrix2::new(cm[(r, c)], cm[(r, c + 1)], cm[(r + 1, c)], cm[(r + 1, c + 1)])
}

/// Logarithmic negativity of a two-mode covariance matrix ordered
/// `(x_A, p_A, x_B, p_B)`.
pub fn log_negativity_cm(cm: &DMatrix<f64>) -> Result<EntanglementReport> {
    if cm.nrows() != 4 || cm.ncols() != 4 {
        return domain("log-negativity needs a 4×4 covariance matrix");
    }
    let margin = min_hermitian_eigenvalue(cm, &omega(2));
    if margin < -PHYSICALITY_TOL * cm.amax().max(1.0) {
        return domain(format!("unphysical covariance matrix (cm + iΩ has eigenvalue {margin:e})"));
    }
    let (sa, sb, sab) = (block(cm, 0, 0), block(cm, 2, 2), block(cm, 0, 2));
    let det4 = cm.determinant();
    let delta = sa.determinant() + sb.determinant() - 2.0 * sab.determinant();
    // d̃₋² = (Δ̃ − √(Δ̃² − 4 det σ))/2, rewritten without the cancellation.
    let disc = (delta * delta - 4.0 * det4).max(0.0);
    let d2 = 2.0 * det4 / (delta + disc.sqrt());
    let d_minus = d2.max(0.0).sqrt();
    Ok(EntanglementReport {
        e_n: (-d_minus.ln()).max(0.0),
        d_minus_tilde: d_minus,
        delta_tilde: delta,
        xi: None,
    })
}

/// Output covariance of the noisy gate on vacuum inputs:
/// `𝕊 𝕊ᵀ + diag(0, ξ_p, ξ_x, 0)`.
pub fn sigma_out(g: f64, xi_x: f64, xi_p: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, g, 0.0, //
            0.0, 1.0 + g * g + xi_p, 0.0, -g, //
            g, 0.0, 1.0 + g * g + xi_x, 0.0, //
            0.0, -g, 0.0, 1.0,
        ],
    )
}

/// `−½ ln(1 + 2g² + ξ − 2g√(1+g²+ξ))` for `ξ < 2g`, else 0.
///
/// The argument is `(√(1+g²+ξ) − g)²`, so this equals
/// `ln((√(1+g²+ξ) + g)/(1 + ξ))`, which is what gets evaluated.
pub fn log_negativity_closed(g: f64, xi: f64) -> f64 {
    if xi >= max_tolerable_noise(g) {
        return 0.0;
    }
    let s = (1.0 + g * g + xi).sqrt();
    ((s + g) / (1.0 + xi)).ln().max(0.0)
}

/// Closed-form report, with the same fields as the matrix route.
pub fn log_negativity_report(g: f64, xi: f64) -> EntanglementReport {
    let s = (1.0 + g * g + xi).sqrt();
    let d = (1.0 + xi) / (s + g);
    EntanglementReport {
        e_n: log_negativity_closed(g, xi),
        d_minus_tilde: d,
        delta_tilde: 2.0 * (1.0 + 2.0 * g * g + xi),
        xi: Some(xi),
    }
}

/// `ξ_max = 2g`.
pub fn max_tolerable_noise(g: f64) -> f64 {
    2.0 * g
}

/// Small-loss expansion `E_N ≈ E_N⁰ − γ (1 − T)`: returns `(E_N⁰, γ)`.
pub fn asymptotics(scheme: Scheme, g: f64) -> (f64, f64) {
    let s = (1.0 + g * g).sqrt();
    let e0 = log_negativity_closed(g, 0.0);
    let gamma_sb = g * (1.0 - g / s) / (1.0 + 2.0 * g * g - 2.0 * g * s);
    match scheme {
        Scheme::Gp => (e0, gamma_sb / 2.0),
        _ => (e0, gamma_sb),
    }
}

/// Long-distance approximation of the ideal SB negativity, `gT/(1+g)`.
pub fn long_distance_sb(g: f64, t: f64) -> f64 {
    g * t / (1.0 + g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_vacuum_is_separable() {
        let r = log_negativity_cm(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(r.e_n, 0.0);
        assert_relative_eq!(r.d_minus_tilde, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn noiseless_unit_gate() {
        let expected = (1.0 + 2f64.sqrt()).ln();
        assert_relative_eq!(log_negativity_closed(1.0, 0.0), expected, epsilon = 1e-15);
        let r = log_negativity_cm(&sigma_out(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(r.e_n, expected, epsilon = 1e-13);
        assert!((expected - 0.881374).abs() < 5e-7);
    }

    #[test]
    fn boundary_noise_kills_entanglement() {
        assert_eq!(log_negativity_closed(1.0, 2.0), 0.0);
        let r = log_negativity_cm(&sigma_out(1.0, 2.0, 2.0)).unwrap();
        assert!(r.e_n < 1e-12);
        assert_relative_eq!(r.d_minus_tilde, 1.0, epsilon = 1e-12);
        for g in [0.3, 1.0, 3.0] {
            assert_eq!(log_negativity_closed(g, max_tolerable_noise(g)), 0.0);
        }
        assert_eq!(max_tolerable_noise(0.5), 1.0);
    }

    #[test]
    fn closed_form_matches_matrix_route() {
        for g in [0.3, 1.0, 3.0] {
            for xi in [0.0, 0.1, 1.0, 2.0 * g - 1e-6] {
                let a = log_negativity_closed(g, xi);
                let b = log_negativity_cm(&sigma_out(g, xi, xi)).unwrap().e_n;
                assert!((a - b).abs() < 1e-10, "g={g} xi={xi}: {a} vs {b}");
                let rep = log_negativity_report(g, xi);
                let cm = log_negativity_cm(&sigma_out(g, xi, xi)).unwrap();
                assert_relative_eq!(rep.d_minus_tilde, cm.d_minus_tilde, max_relative = 1e-10);
                assert_relative_eq!(rep.delta_tilde, cm.delta_tilde, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn printed_argument_and_stable_form_agree() {
        for g in [0.3f64, 1.0, 3.0] {
            for xi in [0.0, 0.05, 0.5, 1.5 * g] {
                let printed = -0.5 * (1.0 + 2.0 * g * g + xi - 2.0 * g * (1.0 + g * g + xi).sqrt()).ln();
                assert_relative_eq!(log_negativity_closed(g, xi), printed, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn monotone_in_noise() {
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let e = log_negativity_closed(1.3, k as f64 * 0.015);
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn unphysical_matrix_rejected() {
        let mut cm = DMatrix::identity(4, 4);
        cm[(0, 0)] = 0.1;
        assert!(log_negativity_cm(&cm).is_err());
    }

    #[test]
    fn expansion_coefficients() {
        let (e0, gsb) = asymptotics(Scheme::Sb, 1.0);
        assert_relative_eq!(e0, (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-15);
        let direct = (1.0 - 1.0 / 2f64.sqrt()) / (3.0 - 2.0 * 2f64.sqrt());
        assert_relative_eq!(gsb, direct, epsilon = 1e-12);
        assert!((gsb - 1.70711).abs() < 5e-6);
        let (_, ggp) = asymptotics(Scheme::Gp, 1.0);
        assert!((ggp - 0.853553).abs() < 5e-7);
    }

    #[test]
    fn expansion_slope_matches_finite_difference() {
        for g in [0.5, 1.0, 2.0] {
            let (_, gamma) = asymptotics(Scheme::Sb, g);
            let h = 1e-6;
            let loss = 1e-4;
            let e = |l: f64| log_negativity_closed(g, 2.0 * g * l);
            let slope = (e(loss + h) - e(loss - h)) / (2.0 * h);
            assert!((slope + gamma).abs() < 0.01 * gamma);
        }
    }
}
