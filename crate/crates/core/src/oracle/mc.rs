//! Monte-Carlo estimate of the gate noise. Every source quadrature is drawn
//! as an independent Gaussian, the circuit is walked shot by shot, homodyne
//! outcomes are read off the sampled quadrature and the feed-forward is an
//! explicit displacement. Nothing is shared with the deterministic engines
//! apart from the op list.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Op};
use crate::elements::opa_noise_variances;
use crate::error::{domain, Error, Result};
use crate::linform::Quad;
use crate::protocols::{NoiseBudget, ProtocolRealization, INPUT_A, INPUT_B};

/// Identifier recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.9/seed_from_u64+stream=shard";

/// Fixed shard count, so results do not depend on the thread pool.
pub const SHARDS: usize = 16;

const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub xi_x: f64,
    pub xi_p: f64,
    pub se_x: f64,
    pub se_p: f64,
    pub samples: usize,
    pub seed: u64,
    pub rng: String,
}

impl McEstimate {
    /// `(ξ̂ − ξ)/SE` per quadrature.
    pub fn z_scores(&self, budget: &NoiseBudget) -> (f64, f64) {
        let z = |est: f64, exact: f64, se: f64| {
            if se == 0.0 {
                if est == exact {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (est - exact) / se
            }
        };
        (z(self.xi_x, budget.xi_x, self.se_x), z(self.xi_p, budget.xi_p, self.se_p))
    }
}

/// Power sums `Σ v^k`, k = 1..4.
#[derive(Debug, Clone, Copy, Default)]
struct Sums([f64; 4]);

impl Sums {
    fn push(&mut self, v: f64) {
        let v2 = v * v;
        self.0[0] += v;
        self.0[1] += v2;
        self.0[2] += v2 * v;
        self.0[3] += v2 * v2;
    }

    fn merge(mut self, o: Sums) -> Sums {
        for k in 0..4 {
            self.0[k] += o.0[k];
        }
        self
    }

    /// Sample variance and its standard error `√((m₄ − s⁴)/n)`.
    fn variance(&self, n: usize) -> (f64, f64) {
        let n = n as f64;
        let [s1, s2, s3, s4] = self.0.map(|s| s / n);
        let m2 = (s2 - s1 * s1).max(0.0);
        let m4 = (s4 - 4.0 * s1 * s3 + 6.0 * s1 * s1 * s2 - 3.0 * s1.powi(4)).max(0.0);
        (m2, ((m4 - m2 * m2).max(0.0) / n).sqrt())
    }
}

/// Runs the sampler on a built protocol.
pub fn mc_estimate(r: &ProtocolRealization, n_samples: usize, seed: u64) -> Result<McEstimate> {
    let a = r.circuit.mode_index(INPUT_A).ok_or_else(|| Error::Contract("circuit lacks mode A".into()))?;
    let b = r.circuit.mode_index(INPUT_B).ok_or_else(|| Error::Contract("circuit lacks mode B".into()))?;
    mc_estimate_circuit(&r.circuit, a, b, r.params.gain(), n_samples, seed)
}

/// Samples `𝒩_x = x_b' − x_b − g x_a` and `𝒩_p = p_a' − p_a + g p_b` over
/// any circuit.
pub fn mc_estimate_circuit(circuit: &Circuit, a: usize, b: usize, g: f64, n_samples: usize, seed: u64) -> Result<McEstimate> {
    circuit.validate()?;
    if n_samples < MIN_SAMPLES {
        return domain(format!("need at least {MIN_SAMPLES} samples, got {n_samples}"));
    }
    let ops = Walker::new(circuit);
    let per_shard: Vec<(Sums, Sums)> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = n_samples / SHARDS + usize::from(shard < n_samples % SHARDS);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let (mut sx, mut sp) = (Sums::default(), Sums::default());
            let mut q = vec![0.0; 2 * circuit.modes().len()];
            for _ in 0..count {
                let (nx, np) = ops.shot(&mut rng, &mut q, a, b, g);
                sx.push(nx);
                sp.push(np);
            }
            (sx, sp)
        })
        .collect();
    let (sx, sp) = per_shard
        .into_iter()
        .fold((Sums::default(), Sums::default()), |(x, p), (sx, sp)| (x.merge(sx), p.merge(sp)));
    let (xi_x, se_x) = sx.variance(n_samples);
    let (xi_p, se_p) = sp.variance(n_samples);
    Ok(McEstimate {
        xi_x,
        xi_p,
        se_x,
        se_p,
        samples: n_samples,
        seed,
        rng: RNG_ALGORITHM.to_string(),
    })
}

/// Op list with the per-op constants precomputed.
struct Walker<'c> {
    circuit: &'c Circuit,
    /// Per op: `(√var_x, √var_p)` of the noise mode it injects, if any.
    noise: Vec<Option<(f64, f64)>>,
}

impl<'c> Walker<'c> {
    fn new(circuit: &'c Circuit) -> Self {
        let noise = circuit
            .ops()
            .iter()
            .map(|op| match op {
                Op::Opa { params, .. } if !params.is_lossless() => {
                    let (vx, vp) = opa_noise_variances(*params);
                    Some((vx.sqrt(), vp.sqrt()))
                }
                Op::Loss { transmissivity, .. } if *transmissivity < 1.0 => Some((1.0, 1.0)),
                _ => None,
            })
            .collect();
        Self { circuit, noise }
    }

    fn shot(&self, rng: &mut ChaCha20Rng, q: &mut [f64], a: usize, b: usize, g: f64) -> (f64, f64) {
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        for (m, decl) in self.circuit.modes().iter().enumerate() {
            q[2 * m] = decl.x_var.sqrt() * normal();
            q[2 * m + 1] = decl.p_var.sqrt() * normal();
        }
        let (xa, pa, xb, pb) = (q[2 * a], q[2 * a + 1], q[2 * b], q[2 * b + 1]);
        for (op, noise) in self.circuit.ops().iter().zip(&self.noise) {
            match op {
                Op::Opa { mode, params, .. } => {
                    let (ax, ap) = params.amplitudes();
                    q[2 * mode] *= ax;
                    q[2 * mode + 1] *= ap;
                    if let Some((sx, sp)) = noise {
                        let w = (1.0 - params.efficiency).sqrt();
                        q[2 * mode] += w * sx * normal();
                        q[2 * mode + 1] += w * sp * normal();
                    }
                }
                Op::Loss { mode, transmissivity, .. } => {
                    let t = transmissivity.sqrt();
                    q[2 * mode] *= t;
                    q[2 * mode + 1] *= t;
                    if noise.is_some() {
                        let w = (1.0 - transmissivity).sqrt();
                        q[2 * mode] += w * normal();
                        q[2 * mode + 1] += w * normal();
                    }
                }
                Op::Qnd { control, target, gain } => {
                    q[2 * control + 1] -= gain * q[2 * target + 1];
                    q[2 * target] += gain * q[2 * control];
                }
                Op::BeamSplitter { first, second, tau } => {
                    let (c, s) = (tau.sqrt(), (1.0 - tau).sqrt());
                    for k in 0..2 {
                        let (u, v) = (q[2 * first + k], q[2 * second + k]);
                        q[2 * first + k] = c * u + s * v;
                        q[2 * second + k] = -s * u + c * v;
                    }
                }
                Op::Feedforward { measured, quad, targets } => {
                    let outcome = q[2 * measured + usize::from(*quad == Quad::P)];
                    for t in targets {
                        q[2 * t.mode + usize::from(t.quad == Quad::P)] += t.gain * outcome;
                    }
                }
            }
        }
        (q[2 * b] - xb - g * xa, q[2 * a + 1] - pa + g * pb)
    }
}
