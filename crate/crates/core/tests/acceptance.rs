//! Acceptance run: one PASS/FAIL line per criterion. Known failures are
//! listed in `KNOWN_FAILURES`; they do not fail the run, and an unexpected
//! pass is reported as XPASS.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use nlqnd::cluster::{build_cluster, fuse, fusion_link, nullifiers, ClusterSpec};
use nlqnd::elements::OpaParams;
use nlqnd::metrics::log_negativity_closed;
use nlqnd::optimize::{
    analytic_optimum_ideal, max_loss, min_ratio_over_t, optimize, optimize_gains, threshold_eta_gp, LossBreak,
    OptimizerOptions, Problem,
};
use nlqnd::oracle::suite::{ode_points, ODE_STEPS};
use nlqnd::oracle::{mc_estimate, ode_check, random_params, Moments};
use nlqnd::protocols::{
    build, build_bm, closed_form_noise, BellMeasurement, BmParams, Case, GpParams, OfflineSqueeze, Scheme, SchemeParams,
};

/// Bell-measurement penalty: the beam-splitter readout of the same two
/// quadrature combinations adds no noise, so the +1 cannot appear.
const KNOWN_FAILURES: &[usize] = &[8];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = (usize, &'static str, Option<Duration>, fn() -> Outcome);

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn engine_agreement() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    for scheme in Scheme::ALL {
        for _ in 0..100 {
            let p = random_params(scheme, &mut rng);
            let r = build(&p).unwrap();
            let closed = closed_form_noise(&p).unwrap();
            let (cx, cp) = r.gstate_excess();
            let b = &r.budget;
            worst = worst
                .max(rel(b.xi_x, closed.xi_x))
                .max(rel(b.xi_p, closed.xi_p))
                .max(rel(cx, b.xi_x))
                .max(rel(cp, b.xi_p))
                .max(rel(cx, closed.xi_x))
                .max(rel(cp, closed.xi_p));
            draws += 1;
        }
    }
    outcome(worst < 1e-10, format!("{draws} draws, worst relative difference {worst:.2e}"))
}

fn ode_oracle() -> Outcome {
    let worst = ode_points()
        .into_iter()
        .map(|p| ode_check(p, Moments::VACUUM, ODE_STEPS).unwrap().relative_error)
        .fold(0.0, f64::max);
    outcome(worst < 1e-8, format!("20 points, worst relative error {worst:.2e}"))
}

fn ideal_optima() -> Outcome {
    let mut worst_xi: f64 = 0.0;
    let mut worst_param: f64 = 0.0;
    for g in [0.5, 1.0, 2.0] {
        for t in [0.25, 0.5, 0.9, 0.99] {
            let sb = optimize_gains(Scheme::Sb, g, t, 1.0, Case::Ideal).unwrap();
            let gp = optimize_gains(Scheme::Gp, g, t, 1.0, Case::Ideal).unwrap();
            worst_xi = worst_xi
                .max((sb.xi - 2.0 * g * (1.0 - t)).abs())
                .max((gp.xi - 2.0 * g * (1.0 - t) / (1.0 + t)).abs());
            let SchemeParams::Gp(p) = gp.best_params else { unreachable!() };
            worst_param = worst_param
                .max((p.opa2.gain - t).abs())
                .max((p.g_b - (g * (1.0 + t)).sqrt()).abs());
        }
    }
    outcome(
        worst_xi < 1e-6 && worst_param < 1e-4,
        format!("|Δξ| ≤ {worst_xi:.1e}, GP parameter error ≤ {worst_param:.1e}"),
    )
}

fn e_n(scheme: Scheme, t: f64) -> f64 {
    log_negativity_closed(1.0, optimize_gains(scheme, 1.0, t, 1.0, Case::Ideal).unwrap().xi)
}

fn factor_two() -> Outcome {
    let (t, h) = (1.0 - 1e-4, 1e-6);
    let slope = |s| (e_n(s, t + h) - e_n(s, t - h)) / (2.0 * h);
    let slope_ratio = slope(Scheme::Gp) / slope(Scheme::Sb);
    let far = 1e-3;
    let gp_sb = e_n(Scheme::Gp, far) / e_n(Scheme::Sb, far);
    let sb_law = e_n(Scheme::Sb, far) / (far / 2.0);
    outcome(
        (slope_ratio - 0.5).abs() < 0.01 && (gp_sb - 2.0).abs() < 0.1 && (sb_law - 1.0).abs() < 0.05,
        format!("slope ratio {slope_ratio:.4}, GP/SB at T=1e-3 {gp_sb:.4}, SB/(gT/(1+g)) {sb_law:.4}"),
    )
}

fn lossy_figures() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (eta, expected) in [(0.9, 0.99), (0.7, 0.973), (0.1, 0.93)] {
        let m = min_ratio_over_t(Scheme::Sb, Case::Off, 1.0, eta, 0.5, 0.9999, 41).unwrap();
        ok &= (m.ratio - expected).abs() < 0.005;
        parts.push(format!("R_min(η={eta})={:.4}", m.ratio));
    }
    let LossBreak::At { xi, transmissivity } = max_loss(Scheme::Sb, 1.0, 0.7, Case::Off).unwrap() else {
        return outcome(false, "no entanglement break found".into());
    };
    ok &= (xi - 2.0).abs() < 1e-5;
    parts.push(format!("break at T={transmissivity:.5} with |ξ−2|={:.1e}", (xi - 2.0).abs()));
    let (t, eta) = (1.0 - 1e-3, 1.0 - 1e-3);
    let off = optimize_gains(Scheme::Sb, 1.0, t, eta, Case::Off).unwrap().xi;
    let on = optimize_gains(Scheme::Sb, 1.0, t, eta, Case::On).unwrap().xi;
    let penalty = (on - off) / (2.0 * (1.0 - eta));
    ok &= (penalty - 1.0).abs() < 0.1;
    parts.push(format!("(ξ_on−ξ_off)/2g(1−η)={penalty:.4}"));
    outcome(ok, parts.join(", "))
}

fn gp_threshold() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let t = 0.2 + 0.04 * i as f64;
        match threshold_eta_gp(1.0, t) {
            Ok(th) => worst = worst.max(th.residual()),
            Err(e) => return outcome(false, format!("T={t}: {e}")),
        }
    }
    let mut worst_off: f64 = 0.0;
    for t in [0.1, 0.4, 0.81, 0.95] {
        for eta in [0.5, 0.9] {
            let xi = optimize_gains(Scheme::Gp, 1.0, t, eta, Case::Off).unwrap().xi;
            worst_off = worst_off.max((xi - (1.0 - t) / t.sqrt()).abs());
        }
    }
    outcome(
        worst < 1e-6 && worst_off < 1e-10,
        format!("root residual ≤ {worst:.1e} over 20 T, case (off) error ≤ {worst_off:.1e}"),
    )
}

fn mediator_independence() -> Outcome {
    let t = 10f64.powf(-0.1);
    let base = GpParams::matched(1.0, 1.3, OfflineSqueeze::Finite(OpaParams::ideal(1e-9)), OpaParams::new(0.8, 0.9).unwrap(), t, 0.0);
    let xis: Vec<f64> = [0.0, 1.0, 5.0, 10.0]
        .iter()
        .map(|&nbar| build(&SchemeParams::Gp(GpParams { mediator_nbar: nbar, ..base })).unwrap().budget.xi())
        .collect();
    let spread = xis.iter().cloned().fold(f64::MIN, f64::max) - xis.iter().cloned().fold(f64::MAX, f64::min);
    let opts = OptimizerOptions::default();
    let e = |g1: f64, nbar: f64| {
        optimize(&Problem::new(Scheme::Gp, 1.0, t, 1.0, Case::Ideal).with_offline_gain(g1, nbar), &opts)
            .unwrap()
            .e_n
    };
    let in_nbar = e(0.5, 0.0) > e(0.5, 1.0) && e(0.5, 1.0) > e(0.5, 5.0);
    let in_g1 = [0.0, 1.0, 5.0].iter().all(|&n| e(0.1, n) > e(0.5, n));
    let limit = optimize_gains(Scheme::Gp, 1.0, t, 1.0, Case::Ideal).unwrap().e_n;
    let gaps: Vec<f64> = [0.0, 1.0, 5.0].iter().map(|&n| (e(0.1, n) - limit).abs()).collect();
    let ordered = gaps[0] < gaps[1] && gaps[1] < gaps[2];
    outcome(
        spread < 1e-6 && in_nbar && in_g1 && ordered,
        format!("ξ spread over n̄ {spread:.1e}; gaps to G₁→0 at G₁=0.1: {:.3e}/{:.3e}/{:.3e} for n̄=0/1/5", gaps[0], gaps[1], gaps[2]),
    )
}

fn bell_penalty() -> Outcome {
    // Lossy OPAs everywhere, g_B chosen so that |g_M| = 1 and the beam
    // splitter is balanced.
    let lossy = |g, e| OpaParams::new(g, e).unwrap();
    let mut p = BmParams {
        g: 1.0,
        g_a: 1.2,
        g_b: 1.0,
        opa1: lossy(0.5, 0.9),
        opa2: lossy(2.0, 0.9),
        opa3: lossy(1.3, 0.9),
        transmissivity: 0.8,
        bell: BellMeasurement::Qnd,
    };
    p.g_b = p.g / (p.g_a * p.link_amplitude());
    let qnd = build_bm(&p).unwrap().budget;
    let bs = build_bm(&BmParams { bell: BellMeasurement::BeamSplitter, ..p }).unwrap().budget;
    let (dx, dp) = (bs.xi_x - qnd.xi_x, bs.xi_p - qnd.xi_p);
    outcome(
        (dx - 1.0).abs() < 1e-9 && (dp - 1.0).abs() < 1e-9,
        format!("g_M = {:.3}: beam-splitter minus QND Bell noise Δξ_x={dx:.3e}, Δξ_p={dp:.3e} (expected 1)", p.g_m()),
    )
}

fn cluster_fusion() -> Outcome {
    let (g, mut ok) = (1.0, true);
    let mut worst_edge: f64 = 0.0;
    let mut worst_rest: f64 = 0.0;
    let mut worst_comm: f64 = 0.0;
    for s in [0.2, 0.5, 1.0] {
        let first = ClusterSpec::uniform(3, g, s);
        let second = ClusterSpec::uniform(2, g, s);
        let alone: Vec<_> = [&first, &second]
            .iter()
            .flat_map(|c| nullifiers(&build_cluster(c).unwrap()).unwrap().nodes)
            .collect();
        for t in [0.3, 0.75, 0.99] {
            let eb = fusion_link(g, t, 1.0, Case::Ideal).unwrap();
            let r = nullifiers(&fuse(&first, &second, &eb).unwrap()).unwrap();
            let edge = r.nodes[2];
            let expected = s + 2.0 * g * (1.0 - t);
            worst_edge = worst_edge.max((edge.var_x - expected).abs()).max((edge.var_p - expected).abs());
            let rest: Vec<_> = r.nodes.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, n)| n).collect();
            for (a, b) in rest.iter().zip(&alone) {
                worst_rest = worst_rest.max((a.var_x - b.var_x).abs()).max((a.var_p - b.var_p).abs());
            }
            worst_comm = worst_comm.max(r.max_commutator);
        }
        // Verdict flip at T = S/2g.
        let verdict = |t: f64| {
            let eb = fusion_link(g, t, 1.0, Case::Ideal).unwrap();
            nullifiers(&fuse(&first, &second, &eb).unwrap()).unwrap().nodes[2].entangled
        };
        let t0 = s / (2.0 * g);
        ok &= verdict(t0 + 1e-6) && !verdict(t0 - 1e-6);
    }
    // Exactly zero for plain clusters; the fusion gains leave rounding.
    ok &= worst_edge < 1e-10 && worst_rest < 1e-12 && worst_comm < 1e-15;
    outcome(
        ok,
        format!("edge error {worst_edge:.1e}, other nodes {worst_rest:.1e}, max commutator {worst_comm:.1e}"),
    )
}

fn monte_carlo() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for scheme in Scheme::ALL {
        let (params, _) = analytic_optimum_ideal(scheme, 1.0, 0.9).unwrap();
        let params = match scheme {
            Scheme::Sb | Scheme::Gp => params,
            _ => optimize_gains(scheme, 1.0, 0.8, 0.9, Case::On).unwrap().best_params,
        };
        let r = build(&params).unwrap();
        let est = mc_estimate(&r, 1_000_000, 42).unwrap();
        let (zx, zp) = est.z_scores(&r.budget);
        let again = mc_estimate(&r, 1_000_000, 42).unwrap();
        ok &= zx.abs() < 4.0 && zp.abs() < 4.0 && again == est;
        parts.push(format!("{scheme}: z=({zx:+.2}, {zp:+.2})"));
    }
    outcome(ok, parts.join(", "))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "closed-form/engine agreement", Some(Duration::from_secs(10)), engine_agreement),
        (2, "OPA moment-ODE oracle", Some(Duration::from_secs(5)), ode_oracle),
        (3, "ideal optima", None, ideal_optima),
        (4, "factor-2 claims", None, factor_two),
        (5, "lossy-OPA figures", None, lossy_figures),
        (6, "GP efficiency threshold", None, gp_threshold),
        (7, "GP mediator independence", None, mediator_independence),
        (8, "Bell-measurement penalty", None, bell_penalty),
        (9, "cluster fusion", None, cluster_fusion),
        (10, "Monte-Carlo validation", Some(Duration::from_secs(60)), monte_carlo),
    ];
    let mut unexpected = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let mut o = run();
        let took = start.elapsed();
        if let Some(b) = budget {
            if took > b {
                o.passed = false;
                o.detail.push_str(&format!("; over time budget {b:?}"));
            }
        }
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.passed, known) {
            (true, false) => "PASS",
            (true, true) => "XPASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        if !o.passed && !known {
            unexpected += 1;
        }
        println!("{tag} criterion {id:>2} {name} [{:.2}s]: {}", took.as_secs_f64(), o.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
