//! Random protocol parameters for property checks.

use rand::Rng;

use crate::elements::OpaParams;
use crate::protocols::{BellMeasurement, BmParams, EbParams, GpParams, OfflineSqueeze, SbParams, Scheme, SchemeParams};

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn opa<R: Rng>(rng: &mut R) -> OpaParams {
    OpaParams {
        gain: log_uniform(rng, 0.2, 5.0),
        efficiency: rng.random_range(0.5..=1.0),
    }
}

/// A valid parameter point for `scheme`: gains log-uniform over roughly a
/// decade, OPAs lossy, `T ∈ [0.2, 1]`. GP draws keep a finite offline gain
/// and a nonsingular Γ.
pub fn random_params<R: Rng>(scheme: Scheme, rng: &mut R) -> SchemeParams {
    loop {
        let g = log_uniform(rng, 0.3, 2.0);
        let t = rng.random_range(0.2..=1.0);
        let p = match scheme {
            Scheme::Sb => SchemeParams::Sb(SbParams {
                g,
                g_a: log_uniform(rng, 0.3, 3.0),
                opa1: opa(rng),
                opa2: opa(rng),
                transmissivity: t,
            }),
            Scheme::Eb => SchemeParams::Eb(EbParams {
                g,
                g_a: log_uniform(rng, 0.3, 3.0),
                g_0: log_uniform(rng, 0.3, 3.0),
                opa1: opa(rng),
                opa2: opa(rng),
                opa3: opa(rng),
                transmissivity: t,
            }),
            Scheme::Bm => SchemeParams::Bm(BmParams {
                g,
                g_a: log_uniform(rng, 0.3, 3.0),
                g_b: log_uniform(rng, 0.3, 3.0),
                opa1: opa(rng),
                opa2: opa(rng),
                opa3: opa(rng),
                transmissivity: t,
                bell: BellMeasurement::Qnd,
            }),
            Scheme::Gp => SchemeParams::Gp(GpParams {
                g,
                g_a: log_uniform(rng, 0.3, 3.0),
                g_b: log_uniform(rng, 0.3, 3.0),
                opa1: OfflineSqueeze::Finite(opa(rng)),
                opa2: opa(rng),
                transmissivity: t,
                mediator_nbar: rng.random_range(0.0..3.0),
                first_pass_psa: if rng.random_bool(0.5) { opa(rng) } else { OpaParams::IDENTITY },
            }),
        };
        if let SchemeParams::Gp(gp) = &p {
            if gp.gamma().is_err() {
                continue;
            }
        }
        return p;
    }
}
