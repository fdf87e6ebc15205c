//! Bounded Nelder–Mead on a box, stopping on simplex diameter.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    /// Fresh simplices built around the converged point, to recover from a
    /// simplex that collapsed onto a face of the box.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            diameter_tol: 1e-10,
            max_iterations: 20_000,
            initial_step: 0.5,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` over the box `[lo, hi]ᵈ` starting from `x0`.
pub fn minimize<F>(f: F, x0: &[f64], lo: f64, hi: f64, opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let clamp = |x: &mut Vec<f64>| x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));

    let mut best: Vec<f64> = x0.to_vec();
    clamp(&mut best);
    let mut best_f = eval(&best);
    let mut converged = x0.is_empty();
    if x0.is_empty() {
        return SimplexResult { x: best, f: best_f, evaluations, converged };
    }
    for round in 0..=opts.restarts {
        let (x, fx, ok) = run(&mut eval, &best, best_f, lo, hi, opts);
        let gained = best_f - fx;
        if fx <= best_f {
            best = x;
            best_f = fx;
        }
        converged = ok;
        if round > 0 && !(gained > 1e-15 * best_f.abs().max(1e-300)) {
            break;
        }
    }
    SimplexResult { x: best, f: best_f, evaluations, converged }
}

fn run<E>(eval: &mut E, start: &[f64], f_start: f64, lo: f64, hi: f64, opts: &SimplexOptions) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64]) -> f64,
{
    let d = start.len();
    let project = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.clamp(lo, hi)).collect() };
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), f_start)];
    for i in 0..d {
        let mut v = start.to_vec();
        // Step away from the nearer wall so the vertex stays distinct.
        v[i] += if start[i] + opts.initial_step <= hi { opts.initial_step } else { -opts.initial_step };
        let v = project(v);
        let fv = eval(&v);
        pts.push((v, fv));
    }

    for _ in 0..opts.max_iterations {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = pts[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            let (x, f) = pts.swap_remove(0);
            return (x, f, true);
        }
        let centroid: Vec<f64> = (0..d).map(|j| pts[..d].iter().map(|(v, _)| v[j]).sum::<f64>() / d as f64).collect();
        let worst = pts[d].clone();
        let along = |t: f64| -> Vec<f64> { project(centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()) };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < pts[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            pts[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[d - 1].1 {
            pts[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(0.5);
            let f = eval(&x);
            (x, f)
        } else {
            let x = along(-0.5);
            let f = eval(&x);
            (x, f)
        };
        if fc < worst.1.min(fr) {
            pts[d] = (xc, fc);
            continue;
        }
        let anchor = pts[0].0.clone();
        for (v, fv) in pts.iter_mut().skip(1) {
            *v = anchor.iter().zip(v.iter()).map(|(a, x)| a + 0.5 * (x - a)).collect();
            *fv = eval(v);
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = pts.swap_remove(0);
    (x, f, false)
}
