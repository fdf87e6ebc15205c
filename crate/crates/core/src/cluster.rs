//! QND cluster states: construction, nullifiers, the van Loock–Furusawa
//! test and EB-based fusion of two distant clusters.
//!
//! Modes come in pairs `(A_k, B_k)`. `A_k` enters x-squeezed and `B_k`
//! p-squeezed with the same `S_k`. All pair gates `A_k → B_k` act first,
//! then the links `B_k → A_{k+1}`. Node `k` sits on the link `k, k+1`.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, FormRun};
use crate::error::{domain, Result};
use crate::gstate::GaussianState;
use crate::linform::{commutator_check, LinearForm, Quad};
use crate::optimize::{analytic_optimum_ideal, optimize, OptimizerOptions, Problem};
use crate::protocols::{Case, EbParams, Scheme, SchemeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// `g_k` between `A_k` and `B_k`.
    pub pair_gains: Vec<f64>,
    /// `g_{k,k+1}` between `B_k` and `A_{k+1}`; one fewer than the pairs.
    pub link_gains: Vec<f64>,
    /// `S_k`: x variance of `A_k` and p variance of `B_k`.
    pub squeezing: Vec<f64>,
}

impl ClusterSpec {
    /// `n` pairs with every gain `g` and every input squeezed to `s`.
    pub fn uniform(n_pairs: usize, g: f64, s: f64) -> Self {
        Self {
            pair_gains: vec![g; n_pairs],
            link_gains: vec![g; n_pairs.saturating_sub(1)],
            squeezing: vec![s; n_pairs],
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_pairs();
        if n == 0 {
            return domain("a cluster needs at least one pair");
        }
        if self.link_gains.len() + 1 != n || self.squeezing.len() != n {
            return domain(format!(
                "{n} pairs need {} link gains and {n} squeezing values, got {} and {}",
                n - 1,
                self.link_gains.len(),
                self.squeezing.len()
            ));
        }
        if let Some(g) = self.pair_gains.iter().chain(&self.link_gains).find(|g| !g.is_finite()) {
            return domain(format!("gains must be finite, got {g}"));
        }
        if let Some(s) = self.squeezing.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return domain(format!("input squeezing must lie in (0, 1], got {s}"));
        }
        Ok(())
    }

    /// Concatenation of two clusters joined by a link of gain `g`.
    pub fn joined(&self, other: &ClusterSpec, g: f64) -> ClusterSpec {
        let mut links = self.link_gains.clone();
        links.push(g);
        links.extend(&other.link_gains);
        ClusterSpec {
            pair_gains: [self.pair_gains.as_slice(), other.pair_gains.as_slice()].concat(),
            link_gains: links,
            squeezing: [self.squeezing.as_slice(), other.squeezing.as_slice()].concat(),
        }
    }
}

/// A built cluster: the circuit, both engine results and the circuit
/// indices of `A_k`, `B_k`.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub spec: ClusterSpec,
    pub circuit: Circuit,
    pub forms: FormRun,
    /// Reduced state over `(A_1, B_1, …, A_n, B_n)`.
    pub state: GaussianState,
    pub a_modes: Vec<usize>,
    pub b_modes: Vec<usize>,
    /// Index of the fused node, if any.
    pub fused_node: Option<usize>,
}

impl Cluster {
    pub fn output(&self, mode: usize, q: Quad) -> Result<&LinearForm> {
        self.forms.quad(mode, q)
    }

    /// `(𝕟_x, 𝕟_p)` of node `k` (0-based):
    /// `x'_{A_{k+1}} − g x'_{B_k}` and `p'_{B_k} + g p'_{A_{k+1}}`.
    pub fn nullifier_forms(&self, k: usize) -> Result<(LinearForm, LinearForm)> {
        let g = self.spec.link_gains[k];
        let (a, b) = (self.a_modes[k + 1], self.b_modes[k]);
        let mut nx = self.output(a, Quad::X)?.clone();
        nx.add_scaled(-g, self.output(b, Quad::X)?);
        let mut np = self.output(b, Quad::P)?.clone();
        np.add_scaled(g, self.output(a, Quad::P)?);
        Ok((nx.pruned(), np.pruned()))
    }
}

fn declare(c: &mut Circuit, spec: &ClusterSpec, first_index: usize) -> (Vec<usize>, Vec<usize>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, s) in spec.squeezing.iter().enumerate() {
        let k = first_index + i + 1;
        a.push(c.mode(&format!("A{k}"), *s, 1.0 / s));
        b.push(c.mode(&format!("B{k}"), 1.0 / s, *s));
    }
    (a, b)
}

fn entangle(c: &mut Circuit, spec: &ClusterSpec, a: &[usize], b: &[usize]) {
    for (k, g) in spec.pair_gains.iter().enumerate() {
        c.qnd(a[k], b[k], *g);
    }
    for (k, g) in spec.link_gains.iter().enumerate() {
        c.qnd(b[k], a[k + 1], *g);
    }
}

fn finish(spec: ClusterSpec, circuit: Circuit, a_modes: Vec<usize>, b_modes: Vec<usize>, fused_node: Option<usize>) -> Result<Cluster> {
    let forms = circuit.run_forms()?;
    let order: Vec<usize> = a_modes.iter().zip(&b_modes).flat_map(|(a, b)| [*a, *b]).collect();
    let state = circuit.run_state()?.reduced(&order)?;
    Ok(Cluster {
        spec,
        circuit,
        forms,
        state,
        a_modes,
        b_modes,
        fused_node,
    })
}

pub fn build_cluster(spec: &ClusterSpec) -> Result<Cluster> {
    spec.validate()?;
    let mut c = Circuit::new();
    let (a, b) = declare(&mut c, spec, 0);
    entangle(&mut c, spec, &a, &b);
    finish(spec.clone(), c, a, b, None)
}

/// Type-II fusion: the EB link joins `B_n` of `first` to `A_{n+1}` of
/// `second`, consuming the two mediators. The merged node uses the link
/// gain `eb.g`.
pub fn fuse(first: &ClusterSpec, second: &ClusterSpec, eb: &EbParams) -> Result<Cluster> {
    first.validate()?;
    second.validate()?;
    eb.validate()?;
    let mut c = Circuit::new();
    let (mut a, mut b) = declare(&mut c, first, 0);
    let (a2, b2) = declare(&mut c, second, first.n_pairs());
    entangle(&mut c, first, &a, &b);
    entangle(&mut c, second, &a2, &b2);
    let edge = first.n_pairs() - 1;
    crate::protocols::wire_eb(&mut c, eb, b[edge], a2[0]);
    a.extend(a2);
    b.extend(b2);
    finish(first.joined(second, eb.g), c, a, b, Some(edge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeNullifiers {
    /// 1-based node index `k`, between `B_k` and `A_{k+1}`.
    pub node: usize,
    pub var_x: f64,
    pub var_p: f64,
    /// `2 |g_{k,k+1}|`.
    pub threshold: f64,
    pub entangled: bool,
}

impl NodeNullifiers {
    /// Sum form of the criterion, `Var_x + Var_p < 4 |g_{k,k+1}|`.
    pub fn sum_criterion(&self) -> bool {
        self.var_x + self.var_p < 2.0 * self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullifierReport {
    pub nodes: Vec<NodeNullifiers>,
    /// Largest difference between the linear-form and covariance-matrix
    /// variances. The covariance engine loses digits as `(g/g_A)²` when the
    /// fusion link runs near its degenerate optimum.
    pub engine_discrepancy: f64,
    /// Largest `|[𝕟_i, 𝕟_j]|` over all pairs of nullifiers.
    pub max_commutator: f64,
}

pub fn nullifiers(cluster: &Cluster) -> Result<NullifierReport> {
    let n = cluster.spec.n_pairs();
    let mut nodes = Vec::new();
    let mut forms = Vec::new();
    let mut discrepancy: f64 = 0.0;
    let cm = cluster.state.cm();
    for k in 0..n - 1 {
        let (nx, np) = cluster.nullifier_forms(k)?;
        let var_x = cluster.forms.context.variance(&nx)?;
        let var_p = cluster.forms.context.variance(&np)?;
        let g = cluster.spec.link_gains[k];
        // Positions in the reduced state: A_k at 2·2k, B_k at 2·(2k+1).
        let (ia, ib) = (2 * (2 * (k + 1)), 2 * (2 * k + 1));
        let cm_x = cm[(ia, ia)] + g * g * cm[(ib, ib)] - 2.0 * g * cm[(ia, ib)];
        let cm_p = cm[(ib + 1, ib + 1)] + g * g * cm[(ia + 1, ia + 1)] + 2.0 * g * cm[(ia + 1, ib + 1)];
        discrepancy = discrepancy.max((cm_x - var_x).abs()).max((cm_p - var_p).abs());
        let threshold = 2.0 * g.abs();
        nodes.push(NodeNullifiers {
            node: k + 1,
            var_x,
            var_p,
            threshold,
            entangled: var_x < threshold && var_p < threshold,
        });
        forms.push(nx);
        forms.push(np);
    }
    let mut max_commutator: f64 = 0.0;
    for i in 0..forms.len() {
        for j in i + 1..forms.len() {
            max_commutator = max_commutator.max(commutator_check(&forms[i], &forms[j]).abs());
        }
    }
    Ok(NullifierReport {
        nodes,
        engine_discrepancy: discrepancy,
        max_commutator,
    })
}

/// Strict van Loock–Furusawa verdict per node.
pub fn vlf_check(report: &NullifierReport) -> Vec<bool> {
    report.nodes.iter().map(|n| n.var_x < n.threshold && n.var_p < n.threshold).collect()
}

/// EB link parameters for fusion: the analytic optimum with ideal OPAs,
/// otherwise the optimizer's choice for the given case.
pub fn fusion_link(g: f64, transmissivity: f64, eta: f64, case: Case) -> Result<EbParams> {
    let params = if case == Case::Ideal {
        analytic_optimum_ideal(Scheme::Eb, g, transmissivity)?.0
    } else {
        optimize(&Problem::new(Scheme::Eb, g, transmissivity, eta, case), &OptimizerOptions::default())?.best_params
    };
    match params {
        SchemeParams::Eb(p) => Ok(p),
        _ => unreachable!("EB problem yields EB parameters"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{closed_form_noise, ideal_gate};

    #[test]
    fn single_pair_is_a_qnd() {
        let c = build_cluster(&ClusterSpec::uniform(1, 0.7, 1.0)).unwrap();
        let s = ideal_gate(0.7);
        let cm = c.state.cm();
        let expected = s * s.transpose();
        for i in 0..4 {
            for j in 0..4 {
                assert!((cm[(i, j)] - expected[(i, j)]).abs() < 1e-14);
            }
        }
        assert!(nullifiers(&c).unwrap().nodes.is_empty());
    }

    #[test]
    fn heisenberg_transform_coefficients() {
        let spec = ClusterSpec {
            pair_gains: vec![0.5, 1.5, 0.8],
            link_gains: vec![1.2, -0.7],
            squeezing: vec![0.3, 0.6, 0.9],
        };
        let c = build_cluster(&spec).unwrap();
        let (gp, gl) = (&spec.pair_gains, &spec.link_gains);
        for k in 0..3 {
            let (a, b) = (c.a_modes[k], c.b_modes[k]);
            let name = |m: &str, i: usize| format!("{m}{}", i + 1);
            let xa = c.output(a, Quad::X).unwrap();
            assert_eq!(xa.coeff(&name("A", k), Quad::X), 1.0);
            if k > 0 {
                assert!((xa.coeff(&name("B", k - 1), Quad::X) - gl[k - 1]).abs() < 1e-15);
                assert!((xa.coeff(&name("A", k - 1), Quad::X) - gl[k - 1] * gp[k - 1]).abs() < 1e-15);
            }
            let pa = c.output(a, Quad::P).unwrap();
            assert!((pa.coeff(&name("B", k), Quad::P) + gp[k]).abs() < 1e-15);
            let xb = c.output(b, Quad::X).unwrap();
            assert!((xb.coeff(&name("A", k), Quad::X) - gp[k]).abs() < 1e-15);
            let pb = c.output(b, Quad::P).unwrap();
            if k < 2 {
                assert!((pb.coeff(&name("A", k + 1), Quad::P) + gl[k]).abs() < 1e-15);
                assert!((pb.coeff(&name("B", k + 1), Quad::P) - gl[k] * gp[k + 1]).abs() < 1e-15);
            }
        }
        let r = nullifiers(&c).unwrap();
        assert!((r.nodes[0].var_x - 0.6).abs() < 1e-14 && (r.nodes[0].var_p - 0.3).abs() < 1e-14);
        assert!(r.engine_discrepancy < 1e-12);
        assert_eq!(r.max_commutator, 0.0);
        // A well-conditioned link keeps both engines in agreement.
        let eb = fusion_link(1.0, 0.6, 0.9, Case::On).unwrap();
        let c = fuse(&ClusterSpec::uniform(2, 1.0, 0.4), &spec, &eb).unwrap();
        let r = nullifiers(&c).unwrap();
        assert!(r.engine_discrepancy < 1e-9 * (1.0 / eb.g_a).powi(2).max(1.0), "{}", r.engine_discrepancy);
    }

    #[test]
    fn squeezing_drives_nullifiers_to_zero() {
        let r = nullifiers(&build_cluster(&ClusterSpec::uniform(2, 1.0, 1e-9)).unwrap()).unwrap();
        assert!(r.nodes[0].var_x < 1e-8 && r.nodes[0].var_p < 1e-8);
        let r = nullifiers(&build_cluster(&ClusterSpec::uniform(2, 1.0, 1.0)).unwrap()).unwrap();
        assert!((r.nodes[0].var_x - 1.0).abs() < 1e-14);
        assert!(r.nodes[0].entangled && vlf_check(&r)[0]);
    }

    #[test]
    fn fused_edge_noise() {
        let (g, s) = (1.0, 0.4);
        for t in [0.5, 0.95, 1.0] {
            let eb = fusion_link(g, t, 1.0, Case::Ideal).unwrap();
            let c = fuse(&ClusterSpec::uniform(2, g, s), &ClusterSpec::uniform(3, g, s), &eb).unwrap();
            assert_eq!(c.fused_node, Some(1));
            let r = nullifiers(&c).unwrap();
            let edge = r.nodes[1];
            assert!((edge.var_x - (s + 2.0 * g * (1.0 - t))).abs() < 1e-10, "{edge:?}");
            assert!((edge.var_p - (s + 2.0 * g * (1.0 - t))).abs() < 1e-10);
            let budget = closed_form_noise(&SchemeParams::Eb(eb)).unwrap();
            assert!((edge.var_x - s - budget.xi_x).abs() < 1e-12);
            assert!(r.engine_discrepancy < 1e-13 * (g / eb.g_a).powi(2), "t={t} {}", r.engine_discrepancy);
            assert!(r.max_commutator < 1e-12);
            for (i, n) in r.nodes.iter().enumerate() {
                if i != 1 {
                    assert!((n.var_x - s).abs() < 1e-12 && (n.var_p - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fusion_threshold_is_s_over_2g() {
        let (g, s) = (1.0, 1.0);
        let verdict = |t: f64| {
            let eb = fusion_link(g, t, 1.0, Case::Ideal).unwrap();
            let c = fuse(&ClusterSpec::uniform(1, g, s), &ClusterSpec::uniform(1, g, s), &eb).unwrap();
            nullifiers(&c).unwrap().nodes[0].entangled
        };
        assert!(verdict(0.5 + 1e-6));
        assert!(!verdict(0.5 - 1e-6));
        assert!(verdict(0.95));
    }

    #[test]
    fn strict_inequality_at_boundary() {
        let r = NullifierReport {
            nodes: vec![NodeNullifiers {
                node: 1,
                var_x: 2.0,
                var_p: 1.0,
                threshold: 2.0,
                entangled: false,
            }],
            engine_discrepancy: 0.0,
            max_commutator: 0.0,
        };
        assert_eq!(vlf_check(&r), vec![false]);
    }

    #[test]
    fn bad_specs_rejected() {
        let mut spec = ClusterSpec::uniform(3, 1.0, 0.5);
        spec.link_gains.pop();
        assert!(build_cluster(&spec).is_err());
        assert!(build_cluster(&ClusterSpec::uniform(2, 1.0, 1.5)).is_err());
        assert!(build_cluster(&ClusterSpec::uniform(0, 1.0, 0.5)).is_err());
        let mut eb = fusion_link(1.0, 0.9, 1.0, Case::Ideal).unwrap();
        eb.g_a = -1.0;
        assert!(fuse(&ClusterSpec::uniform(1, 1.0, 0.5), &ClusterSpec::uniform(1, 1.0, 0.5), &eb).is_err());
    }
}
