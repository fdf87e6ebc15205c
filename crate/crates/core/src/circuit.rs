//! Engine-agnostic description of an optical circuit, with one executor per
//! engine. Protocols and clusters are written once as a [`Circuit`] and then
//! run through [`Circuit::run_forms`] (exact Heisenberg bookkeeping) and
//! [`Circuit::run_state`] (covariance matrices). The Monte-Carlo sampler in
//! `oracle::mc` walks the same op list.

use serde::{Deserialize, Serialize};

use crate::elements::{
    beam_splitter, homodyne_feedforward, homodyne_feedforward_forms, opa_channel,
    opa_noise_variances, pure_loss, qnd_gate, FeedTarget, OpaParams,
};
use crate::error::{domain, Result};
use crate::gstate::{product_state, GaussianState};
use crate::linform::{Context, LinearForm, Quad};

/// A register mode, prepared in an uncorrelated Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDecl {
    pub label: String,
    pub x_var: f64,
    pub p_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Op {
    /// Lossy OPA; `noise` labels its squeezed-thermal noise mode.
    Opa {
        mode: usize,
        params: OpaParams,
        noise: String,
    },
    /// Pure loss; `noise` labels the vacuum mode leaking in.
    Loss {
        mode: usize,
        transmissivity: f64,
        noise: String,
    },
    Qnd {
        control: usize,
        target: usize,
        gain: f64,
    },
    BeamSplitter {
        first: usize,
        second: usize,
        tau: f64,
    },
    /// Homodyne of `measured` followed by displacements of `targets`.
    Feedforward {
        measured: usize,
        quad: Quad,
        targets: Vec<FeedTarget>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    modes: Vec<ModeDecl>,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a mode and returns its index.
    pub fn mode(&mut self, label: &str, x_var: f64, p_var: f64) -> usize {
        self.modes.push(ModeDecl {
            label: label.to_string(),
            x_var,
            p_var,
        });
        self.modes.len() - 1
    }

    pub fn vacuum(&mut self, label: &str) -> usize {
        self.mode(label, 1.0, 1.0)
    }

    pub fn modes(&self) -> &[ModeDecl] {
        &self.modes
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn mode_index(&self, label: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    pub fn opa(&mut self, mode: usize, params: OpaParams, noise: &str) -> &mut Self {
        self.ops.push(Op::Opa {
            mode,
            params,
            noise: noise.to_string(),
        });
        self
    }

    pub fn loss(&mut self, mode: usize, transmissivity: f64, noise: &str) -> &mut Self {
        self.ops.push(Op::Loss {
            mode,
            transmissivity,
            noise: noise.to_string(),
        });
        self
    }

    pub fn qnd(&mut self, control: usize, target: usize, gain: f64) -> &mut Self {
        self.ops.push(Op::Qnd {
            control,
            target,
            gain,
        });
        self
    }

    pub fn beam_splitter(&mut self, first: usize, second: usize, tau: f64) -> &mut Self {
        self.ops.push(Op::BeamSplitter { first, second, tau });
        self
    }

    pub fn feedforward(&mut self, measured: usize, quad: Quad, targets: &[(usize, Quad, f64)]) -> &mut Self {
        self.ops.push(Op::Feedforward {
            measured,
            quad,
            targets: targets
                .iter()
                .map(|&(mode, quad, gain)| FeedTarget { mode, quad, gain })
                .collect(),
        });
        self
    }

    /// Static checks: indices in range, no op touches a measured mode, no
    /// two-mode op acts on a single mode.
    pub fn validate(&self) -> Result<()> {
        let n = self.modes.len();
        let mut alive = vec![true; n];
        let check = |m: usize, alive: &[bool]| -> Result<()> {
            if m >= n {
                return domain(format!("mode index {m} out of range"));
            }
            if !alive[m] {
                return domain(format!("mode `{}` used after measurement", self.modes[m].label));
            }
            Ok(())
        };
        for op in &self.ops {
            match op {
                Op::Opa { mode, params, .. } => {
                    check(*mode, &alive)?;
                    params.validate()?;
                }
                Op::Loss {
                    mode, transmissivity, ..
                } => {
                    check(*mode, &alive)?;
                    if !(*transmissivity > 0.0 && *transmissivity <= 1.0) {
                        return domain(format!("transmissivity must lie in (0, 1], got {transmissivity}"));
                    }
                }
                Op::Qnd { control, target, .. } => {
                    check(*control, &alive)?;
                    check(*target, &alive)?;
                    if control == target {
                        return domain("QND needs two distinct modes");
                    }
                }
                Op::BeamSplitter { first, second, .. } => {
                    check(*first, &alive)?;
                    check(*second, &alive)?;
                    if first == second {
                        return domain("beam splitter needs two distinct modes");
                    }
                }
                Op::Feedforward {
                    measured, targets, ..
                } => {
                    check(*measured, &alive)?;
                    for t in targets {
                        check(t.mode, &alive)?;
                        if t.mode == *measured {
                            return domain("feed-forward target coincides with the measured mode");
                        }
                    }
                    alive[*measured] = false;
                }
            }
        }
        Ok(())
    }

    /// Heisenberg-picture execution. Every mode and every noise mode becomes
    /// an independent source; the OPA noise is only registered for `η < 1`
    /// and channel noise only for `T < 1`.
    pub fn run_forms(&self) -> Result<FormRun> {
        self.validate()?;
        let mut ctx = Context::new();
        let mut forms: Vec<Option<(LinearForm, LinearForm)>> = Vec::with_capacity(self.modes.len());
        for m in &self.modes {
            forms.push(Some(ctx.add_new(&m.label, m.x_var, m.p_var)?));
        }
        for op in &self.ops {
            match op {
                Op::Opa {
                    mode,
                    params,
                    noise,
                } => {
                    let (ax, ap) = params.amplitudes();
                    let (x, p) = forms[*mode].as_mut().expect("validated");
                    *x = x.scaled(ax);
                    *p = p.scaled(ap);
                    if !params.is_lossless() {
                        let (vx, vp) = opa_noise_variances(*params);
                        let (nx, np) = ctx.add_new(noise, vx, vp)?;
                        let w = (1.0 - params.efficiency).sqrt();
                        x.add_scaled(w, &nx);
                        p.add_scaled(w, &np);
                    }
                }
                Op::Loss {
                    mode,
                    transmissivity,
                    noise,
                } => {
                    let t = *transmissivity;
                    let (x, p) = forms[*mode].as_mut().expect("validated");
                    *x = x.scaled(t.sqrt());
                    *p = p.scaled(t.sqrt());
                    if t < 1.0 {
                        let (nx, np) = ctx.add_new(noise, 1.0, 1.0)?;
                        let w = (1.0 - t).sqrt();
                        x.add_scaled(w, &nx);
                        p.add_scaled(w, &np);
                    }
                }
                Op::Qnd {
                    control,
                    target,
                    gain,
                } => {
                    let (xc, pc) = forms[*control].clone().expect("validated");
                    let (xt, pt) = forms[*target].clone().expect("validated");
                    let mut pc2 = pc;
                    pc2.add_scaled(-gain, &pt);
                    let mut xt2 = xt;
                    xt2.add_scaled(*gain, &xc);
                    forms[*control] = Some((xc, pc2));
                    forms[*target] = Some((xt2, pt));
                }
                Op::BeamSplitter { first, second, tau } => {
                    let (xa, pa) = forms[*first].clone().expect("validated");
                    let (xb, pb) = forms[*second].clone().expect("validated");
                    let (c, s) = (tau.sqrt(), (1.0 - tau).sqrt());
                    let mix = |a: &LinearForm, b: &LinearForm, ca: f64, cb: f64| {
                        let mut out = a.scaled(ca);
                        out.add_scaled(cb, b);
                        out
                    };
                    forms[*first] = Some((mix(&xa, &xb, c, s), mix(&pa, &pb, c, s)));
                    forms[*second] = Some((mix(&xa, &xb, -s, c), mix(&pa, &pb, -s, c)));
                }
                Op::Feedforward {
                    measured,
                    quad,
                    targets,
                } => {
                    // Work on a dense copy with `None` slots filled by zeros so
                    // that the element-level routine can index by mode.
                    let mut dense: Vec<(LinearForm, LinearForm)> = forms
                        .iter()
                        .map(|f| f.clone().unwrap_or_default())
                        .collect();
                    homodyne_feedforward_forms(&mut dense, (*measured, *quad), targets)?;
                    for t in targets {
                        forms[t.mode] = Some(dense[t.mode].clone());
                    }
                    forms[*measured] = None;
                }
            }
        }
        Ok(FormRun {
            context: ctx,
            forms,
        })
    }

    /// Covariance-matrix execution: channels act through their `(X, Y)`
    /// pair, QND gates and beam splitters by congruence, feed-forward by
    /// couple-then-trace.
    pub fn run_state(&self) -> Result<StateRun> {
        self.validate()?;
        let vars: Vec<(f64, f64)> = self.modes.iter().map(|m| (m.x_var, m.p_var)).collect();
        let mut state = product_state(&vars)?;
        let mut positions: Vec<Option<usize>> = (0..self.modes.len()).map(Some).collect();
        let pos = |positions: &[Option<usize>], m: usize| positions[m].expect("validated");
        for op in &self.ops {
            state = match op {
                Op::Opa { mode, params, .. } => {
                    state.apply_channel(&opa_channel(*params)?, &[pos(&positions, *mode)])?
                }
                Op::Loss {
                    mode, transmissivity, ..
                } => state.apply_channel(&pure_loss(*transmissivity)?, &[pos(&positions, *mode)])?,
                Op::Qnd {
                    control,
                    target,
                    gain,
                } => state.apply_symplectic(
                    &qnd_gate(*gain),
                    &[pos(&positions, *control), pos(&positions, *target)],
                )?,
                Op::BeamSplitter { first, second, tau } => state.apply_symplectic(
                    &beam_splitter(*tau)?,
                    &[pos(&positions, *first), pos(&positions, *second)],
                )?,
                Op::Feedforward {
                    measured,
                    quad,
                    targets,
                } => {
                    let m = pos(&positions, *measured);
                    let mapped: Vec<FeedTarget> = targets
                        .iter()
                        .map(|t| FeedTarget {
                            mode: pos(&positions, t.mode),
                            ..*t
                        })
                        .collect();
                    let next = homodyne_feedforward(&state, (m, *quad), &mapped)?;
                    positions[*measured] = None;
                    for p in positions.iter_mut().flatten() {
                        if *p > m {
                            *p -= 1;
                        }
                    }
                    next
                }
            };
        }
        Ok(StateRun { state, positions })
    }
}

/// Result of [`Circuit::run_forms`].
#[derive(Debug, Clone)]
pub struct FormRun {
    pub context: Context,
    forms: Vec<Option<(LinearForm, LinearForm)>>,
}

impl FormRun {
    /// Output `(x, p)` forms of a surviving mode.
    pub fn mode(&self, m: usize) -> Result<&(LinearForm, LinearForm)> {
        match self.forms.get(m) {
            Some(Some(f)) => Ok(f),
            Some(None) => domain(format!("mode {m} was measured")),
            None => domain(format!("mode {m} out of range")),
        }
    }

    pub fn quad(&self, m: usize, q: Quad) -> Result<&LinearForm> {
        let (x, p) = self.mode(m)?;
        Ok(match q {
            Quad::X => x,
            Quad::P => p,
        })
    }
}

/// Result of [`Circuit::run_state`]: the surviving register and the
/// position of each circuit mode in it.
#[derive(Debug, Clone)]
pub struct StateRun {
    pub state: GaussianState,
    positions: Vec<Option<usize>>,
}

impl StateRun {
    pub fn position(&self, m: usize) -> Result<usize> {
        match self.positions.get(m) {
            Some(Some(p)) => Ok(*p),
            Some(None) => domain(format!("mode {m} was measured")),
            None => domain(format!("mode {m} out of range")),
        }
    }

    /// Reduced state of the given circuit modes, in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<GaussianState> {
        let keep = modes
            .iter()
            .map(|&m| self.position(m))
            .collect::<Result<Vec<_>>>()?;
        self.state.partial_trace(&keep)
    }
}
