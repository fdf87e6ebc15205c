use std::io::Write;

use rayon::prelude::*;

use nlqnd::cluster::{fuse, fusion_link, nullifiers, ClusterSpec};
use nlqnd::metrics::log_negativity_closed;
use nlqnd::optimize::{analytic_result, optimize, threshold_eta_gp, OptimizerOptions, Problem};
use nlqnd::oracle::{run_suite, Mutation};
use nlqnd::protocols::{build, verify_gate_shape, BellMeasurement, Case, Scheme, SchemeParams};
use nlqnd::Error;

use crate::config::{Resolved, SweepKind};
use crate::table::{param_cell, Cell, Table};
use crate::CliError;

fn loss_db(t: f64) -> f64 {
    let db = -10.0 * t.log10();
    // Keep T = 1 at +0 rather than −0.
    if db == 0.0 {
        0.0
    } else {
        db
    }
}

pub struct ProtocolRequest {
    pub scheme: Scheme,
    pub g: f64,
    pub transmissivity: f64,
    pub eta: f64,
    pub case: Case,
    pub bell: BellMeasurement,
    pub offline: Option<(f64, f64)>,
    pub params: Option<SchemeParams>,
    pub json: bool,
}

pub fn protocol(req: ProtocolRequest, out: &mut impl Write) -> Result<(), CliError> {
    let (params, note) = match req.params {
        Some(p) => (p, None),
        None => {
            let mut problem = Problem::new(req.scheme, req.g, req.transmissivity, req.eta, req.case).with_bell(req.bell);
            if let Some((g1, nbar)) = req.offline {
                problem = problem.with_offline_gain(g1, nbar);
            }
            let r = optimize(&problem, &OptimizerOptions::default())?;
            (r.best_params, r.note)
        }
    };
    let r = build(&params)?;
    let g = params.gain();
    let xi = r.budget.xi();
    let e_n = log_negativity_closed(g, xi);
    let residual = verify_gate_shape(&r);
    if req.json {
        let v = serde_json::json!({
            "params": params,
            "summary": params.summary(),
            "xi_x": r.budget.xi_x,
            "xi_p": r.budget.xi_p,
            "xi": xi,
            "E_N": e_n,
            "gate_shape_residual": residual,
            "per_source": r.budget.per_source,
            "note": note,
        });
        serde_json::to_writer_pretty(&mut *out, &v).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "scheme {}  g {g}  T {}", params.scheme(), params.transmissivity())?;
    writeln!(out, "xi_x                {:.11e}", r.budget.xi_x)?;
    writeln!(out, "xi_p                {:.11e}", r.budget.xi_p)?;
    writeln!(out, "E_N                 {e_n:.11e}")?;
    writeln!(out, "gate-shape residual {residual:.3e}")?;
    if let Some(n) = note {
        writeln!(out, "note: {n}")?;
    }
    writeln!(out, "\nparameters")?;
    for (k, v) in params.summary() {
        writeln!(out, "  {k:<8} {v:.11e}")?;
    }
    writeln!(out, "\nnoise by source        xi_x               xi_p")?;
    for (label, (x, p)) in &r.budget.per_source {
        writeln!(out, "  {label:<8} {x:>18.11e} {p:>18.11e}")?;
    }
    Ok(())
}

type Key = (String, String, i64, i64, i64, i64);

/// Sort key: scheme, case, then the numeric axes by their bit patterns
/// (all are positive, so bit order is numeric order).
fn key(scheme: &str, case: &str, a: f64, b: f64, c: f64, d: f64) -> Key {
    (scheme.to_string(), case.to_string(), a.to_bits() as i64, b.to_bits() as i64, c.to_bits() as i64, d.to_bits() as i64)
}

fn sorted(table: &mut Table, mut rows: Vec<(Key, Vec<Cell>)>) {
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    table.rows = rows.into_iter().map(|(_, r)| r).collect();
}

pub fn sweep(cfg: &Resolved) -> Result<Table, CliError> {
    match cfg.kind {
        SweepKind::Grid => sweep_grid(cfg),
        SweepKind::Threshold => sweep_threshold(cfg),
        SweepKind::Offline => sweep_offline(cfg),
    }
}

fn sweep_grid(cfg: &Resolved) -> Result<Table, CliError> {
    if cfg.case == Case::Ideal && cfg.eta.iter().any(|e| *e != 1.0) {
        return Err(CliError::Usage("case ideal takes eta = 1 only".into()));
    }
    let tasks: Vec<(Scheme, f64, f64)> = cfg
        .schemes
        .iter()
        .flat_map(|s| cfg.eta.iter().flat_map(move |e| cfg.transmissivity.iter().map(move |t| (*s, *e, *t))))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(s, eta, t)| -> Result<(Key, Vec<Cell>), CliError> {
            let r = optimize(&Problem::new(s, cfg.g, t, eta, cfg.case), &cfg.optimizer)?;
            let ideal = analytic_result(s, cfg.g, t)?.e_n;
            let ratio = (ideal > 0.0).then(|| r.e_n / ideal);
            let row = vec![
                Cell::from(s.to_string()),
                Cell::from(cfg.case.to_string()),
                cfg.g.into(),
                loss_db(t).into(),
                t.into(),
                eta.into(),
                r.xi.into(),
                r.e_n.into(),
                ratio.into(),
                param_cell(&r.best_params.summary()),
                r.evaluations.into(),
            ];
            Ok((key(&s.to_string(), &cfg.case.to_string(), eta, -t, 0.0, 0.0), row))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(vec![
        "scheme", "case", "g", "loss_dB", "T", "eta", "xi", "E_N", "ratio", "params", "evaluations",
    ]);
    sorted(&mut table, rows);
    Ok(table)
}

fn sweep_threshold(cfg: &Resolved) -> Result<Table, CliError> {
    if cfg.schemes.iter().any(|s| *s != Scheme::Gp) {
        return Err(CliError::Usage("the threshold sweep is defined for gp only (set schemes = [\"gp\"])".into()));
    }
    let rows = cfg
        .transmissivity
        .par_iter()
        .map(|&t| -> Result<(Key, Vec<Cell>), CliError> {
            let (status, th) = match threshold_eta_gp(cfg.g, t) {
                Ok(th) => ("ok", Some(th)),
                Err(Error::NoThreshold(_)) => ("none", None),
                Err(e) => return Err(e.into()),
            };
            let row = vec![
                Cell::from("gp"),
                cfg.g.into(),
                loss_db(t).into(),
                t.into(),
                th.map(|x| x.eta).into(),
                th.map(|x| x.xi_on).into(),
                th.map(|x| x.xi_off).into(),
                th.map(|x| x.residual()).into(),
                status.into(),
            ];
            Ok((key("gp", "", -t, 0.0, 0.0, 0.0), row))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(vec!["scheme", "g", "loss_dB", "T", "eta_threshold", "xi_on", "xi_off", "residual", "status"]);
    sorted(&mut table, rows);
    Ok(table)
}

fn sweep_offline(cfg: &Resolved) -> Result<Table, CliError> {
    if cfg.g1.is_empty() {
        return Err(CliError::Usage("the offline sweep needs a g1 grid".into()));
    }
    let mut tasks = Vec::new();
    for &t in &cfg.transmissivity {
        for &eta in &cfg.eta {
            for &nbar in &cfg.nbar {
                for &g1 in &cfg.g1 {
                    tasks.push((t, eta, nbar, g1));
                }
            }
        }
    }
    let rows = tasks
        .par_iter()
        .map(|&(t, eta, nbar, g1)| -> Result<(Key, Vec<Cell>), CliError> {
            let r = optimize(&Problem::new(Scheme::Gp, cfg.g, t, eta, cfg.case).with_offline_gain(g1, nbar), &cfg.optimizer)?;
            let row = vec![
                Cell::from("gp"),
                Cell::from(cfg.case.to_string()),
                cfg.g.into(),
                loss_db(t).into(),
                t.into(),
                eta.into(),
                nbar.into(),
                g1.into(),
                r.xi.into(),
                r.e_n.into(),
                param_cell(&r.best_params.summary()),
                r.evaluations.into(),
            ];
            Ok((key("gp", &cfg.case.to_string(), -t, eta, nbar, g1), row))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(vec![
        "scheme", "case", "g", "loss_dB", "T", "eta", "nbar", "G1", "xi", "E_N", "params", "evaluations",
    ]);
    sorted(&mut table, rows);
    Ok(table)
}

/// Edge-node nullifier variance of two fused clusters over `S × η × T`.
pub fn cluster(cfg: &Resolved) -> Result<Table, CliError> {
    let mut tasks = Vec::new();
    for &s in &cfg.squeezing {
        for &eta in &cfg.eta {
            for &t in &cfg.transmissivity {
                tasks.push((s, eta, t));
            }
        }
    }
    let g = cfg.g;
    let rows = tasks
        .par_iter()
        .map(|&(s, eta, t)| -> Result<(Key, Vec<Cell>), CliError> {
            let eb = fusion_link(g, t, eta, cfg.case)?;
            let spec = ClusterSpec::uniform(1, g, s);
            let r = nullifiers(&fuse(&spec, &spec, &eb)?)?;
            let edge = r.nodes[0];
            let row = vec![
                Cell::from(cfg.case.to_string()),
                s.into(),
                g.into(),
                loss_db(t).into(),
                t.into(),
                eta.into(),
                edge.var_x.into(),
                edge.var_p.into(),
                edge.threshold.into(),
                edge.entangled.into(),
            ];
            Ok((key("", &cfg.case.to_string(), s, eta, -t, 0.0), row))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(vec!["case", "S", "g", "loss_dB", "T", "eta", "var_x", "var_p", "threshold", "entangled"]);
    sorted(&mut table, rows);
    Ok(table)
}

/// Runs the invariant suite; returns whether every check passed.
pub fn validate(mutation: Mutation, out: &mut impl Write) -> Result<bool, CliError> {
    let checks = run_suite(mutation)?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        writeln!(
            out,
            "{} {:<30} observed {:.3e} limit {:.1e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.limit,
            c.detail
        )?;
    }
    Ok(ok)
}
