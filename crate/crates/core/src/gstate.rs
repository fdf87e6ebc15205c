//! Covariance-matrix engine for n-mode Gaussian states.
//!
//! Shot-noise units throughout: the vacuum covariance matrix is the
//! identity and `[x, p] = 2i`. Quadratures are interleaved as
//! `(x₁, p₁, x₂, p₂, …)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linform::Quad;

/// Tolerance of the `cm + iΩ ≥ 0` and complete-positivity eigenvalue tests.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Tolerance of `S Ω Sᵀ = Ω`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

/// Initial single-mode preparations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StateKind {
    Vacuum,
    /// Thermal state with the given mean photon number.
    Thermal(f64),
    /// Position-squeezed state `diag(S, 1/S)`.
    Squeezed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cm: DMatrix<f64>,
}

/// Mean and variance of a homodyne outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDensity {
    pub mean: f64,
    pub variance: f64,
}

/// Linear channel `cm → X cm Xᵀ + Y`, `mean → X mean` on k modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

/// `⊕ₙ [[0, 1], [-1, 0]]`.
pub fn omega(n_modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Smallest eigenvalue of the Hermitian matrix `a + i b` (`a` symmetric,
/// `b` antisymmetric) via its real embedding `[[a, -b], [b, a]]`.
pub(crate) fn min_hermitian_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((n, n), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).copy_from(&(-b));
    big.view_mut((n, 0), (n, n)).copy_from(b);
    let big = (&big + big.transpose()) * 0.5;
    SymmetricEigen::new(big).eigenvalues.min()
}

pub fn is_symplectic(s: &DMatrix<f64>) -> bool {
    if s.nrows() != s.ncols() || s.nrows() % 2 != 0 {
        return false;
    }
    let w = omega(s.nrows() / 2);
    let d = s * &w * s.transpose() - &w;
    d.amax() <= SYMPLECTIC_TOL
}

pub fn make_state(kind: StateKind, n_modes: usize) -> Result<GaussianState> {
    if n_modes == 0 {
        return domain("a state needs at least one mode");
    }
    let (vx, vp) = match kind {
        StateKind::Vacuum => (1.0, 1.0),
        StateKind::Thermal(nbar) => {
            if !(nbar >= 0.0) || !nbar.is_finite() {
                return domain(format!("thermal occupation must be >= 0, got {nbar}"));
            }
            (2.0 * nbar + 1.0, 2.0 * nbar + 1.0)
        }
        StateKind::Squeezed(s) => {
            if !(s > 0.0) || !s.is_finite() {
                return domain(format!("squeezing variance must be > 0, got {s}"));
            }
            (s, 1.0 / s)
        }
    };
    let mut cm = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        cm[(2 * k, 2 * k)] = vx;
        cm[(2 * k + 1, 2 * k + 1)] = vp;
    }
    Ok(GaussianState {
        mean: DVector::zeros(2 * n_modes),
        cm,
    })
}

/// Product state of single-mode diagonal covariance matrices.
pub fn product_state(vars: &[(f64, f64)]) -> Result<GaussianState> {
    if vars.is_empty() {
        return domain("a state needs at least one mode");
    }
    let n = vars.len();
    let mut cm = DMatrix::zeros(2 * n, 2 * n);
    for (k, &(vx, vp)) in vars.iter().enumerate() {
        if !(vx >= 0.0 && vp >= 0.0) {
            return domain(format!("mode {k}: negative variance"));
        }
        cm[(2 * k, 2 * k)] = vx;
        cm[(2 * k + 1, 2 * k + 1)] = vp;
    }
    Ok(GaussianState {
        mean: DVector::zeros(2 * n),
        cm,
    })
}

fn embedding(n_modes: usize, modes: &[usize]) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(2 * modes.len());
    for (i, &m) in modes.iter().enumerate() {
        if m >= n_modes {
            return domain(format!("mode {m} out of range (n = {n_modes})"));
        }
        if modes[..i].contains(&m) {
            return domain(format!("mode {m} listed twice"));
        }
        idx.push(2 * m);
        idx.push(2 * m + 1);
    }
    Ok(idx)
}

impl GaussianState {
    /// Builds a state from raw moments. Only shape and symmetry are
    /// checked; use [`GaussianState::is_physical`] for the uncertainty
    /// principle.
    pub fn from_parts(mean: DVector<f64>, cm: DMatrix<f64>) -> Result<Self> {
        let n = cm.nrows();
        if n == 0 || n % 2 != 0 || cm.ncols() != n || mean.len() != n {
            return domain("covariance matrix must be 2n×2n with a 2n mean");
        }
        let asym = (&cm - cm.transpose()).amax();
        if asym > SYMMETRY_TOL * (1.0 + cm.amax()) {
            return domain(format!("covariance matrix not symmetric (max deviation {asym:e})"));
        }
        let cm = (&cm + cm.transpose()) * 0.5;
        Ok(Self { mean, cm })
    }

    pub fn n_modes(&self) -> usize {
        self.cm.nrows() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cm(&self) -> &DMatrix<f64> {
        &self.cm
    }

    pub fn entry(&self, mode_a: usize, qa: Quad, mode_b: usize, qb: Quad) -> f64 {
        self.cm[(index(mode_a, qa), index(mode_b, qb))]
    }

    /// Smallest eigenvalue of `cm + iΩ`.
    pub fn physicality_margin(&self) -> f64 {
        min_hermitian_eigenvalue(&self.cm, &omega(self.n_modes()))
    }

    pub fn is_physical(&self) -> bool {
        self.physicality_margin() >= -PHYSICALITY_TOL
    }

    /// Symplectic eigenvalues in ascending order.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        symplectic_eigenvalues(&self.cm)
    }

    /// Applies a symplectic map to the listed modes.
    pub fn apply_symplectic(&self, s: &DMatrix<f64>, modes: &[usize]) -> Result<GaussianState> {
        if s.nrows() != 2 * modes.len() || s.ncols() != 2 * modes.len() {
            return domain("symplectic matrix size does not match the mode list");
        }
        if !is_symplectic(s) {
            return Err(Error::Contract("matrix is not symplectic".into()));
        }
        self.apply_linear(s, modes)
    }

    /// Applies an arbitrary linear map `r → L r` to the listed modes, with
    /// no symplecticity check. Used for feed-forward bookkeeping.
    pub(crate) fn apply_linear(&self, l: &DMatrix<f64>, modes: &[usize]) -> Result<GaussianState> {
        let full = self.embed(l, modes, true)?;
        Ok(GaussianState {
            mean: &full * &self.mean,
            cm: symmetrize(&full * &self.cm * full.transpose()),
        })
    }

    fn embed(&self, m: &DMatrix<f64>, modes: &[usize], identity_elsewhere: bool) -> Result<DMatrix<f64>> {
        let n = 2 * self.n_modes();
        let idx = embedding(self.n_modes(), modes)?;
        let mut full = if identity_elsewhere {
            DMatrix::identity(n, n)
        } else {
            DMatrix::zeros(n, n)
        };
        for &i in &idx {
            for &j in &idx {
                full[(i, j)] = 0.0;
            }
        }
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                full[(i, j)] = m[(a, b)];
            }
        }
        Ok(full)
    }

    pub fn apply_channel(&self, ch: &GaussianChannel, modes: &[usize]) -> Result<GaussianState> {
        if ch.x.nrows() != 2 * modes.len() {
            return domain("channel size does not match the mode list");
        }
        ch.check_cp()?;
        let x = self.embed(&ch.x, modes, true)?;
        let y = self.embed(&ch.y, modes, false)?;
        Ok(GaussianState {
            mean: &x * &self.mean,
            cm: symmetrize(&x * &self.cm * x.transpose() + y),
        })
    }

    /// Keeps the listed modes, in the listed order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<GaussianState> {
        if keep.is_empty() {
            return domain("partial trace must keep at least one mode");
        }
        let idx = embedding(self.n_modes(), keep)?;
        let k = idx.len();
        let cm = DMatrix::from_fn(k, k, |i, j| self.cm[(idx[i], idx[j])]);
        let mean = DVector::from_fn(k, |i, _| self.mean[idx[i]]);
        Ok(GaussianState { mean, cm })
    }

    /// Conditions on an ideal homodyne outcome of `quad` on `mode`; the
    /// measured mode is removed. A zero-variance measured quadrature leaves
    /// the rest of the state untouched (pseudo-inverse on that direction).
    pub fn homodyne_condition(
        &self,
        mode: usize,
        quad: Quad,
        outcome: f64,
    ) -> Result<(GaussianState, OutcomeDensity)> {
        if mode >= self.n_modes() {
            return domain(format!("mode {mode} out of range"));
        }
        let keep: Vec<usize> = (0..self.n_modes()).filter(|&m| m != mode).collect();
        let q = index(mode, quad);
        let density = OutcomeDensity {
            mean: self.mean[q],
            variance: self.cm[(q, q)],
        };
        if keep.is_empty() {
            return domain("cannot condition a single-mode state on its only mode");
        }
        let rest = self.partial_trace(&keep)?;
        let idx = embedding(self.n_modes(), &keep)?;
        let c = DVector::from_fn(idx.len(), |i, _| self.cm[(idx[i], q)]);
        let inv = pseudo_inverse_scalar(density.variance, self.cm.amax());
        let cm = symmetrize(&rest.cm - &c * c.transpose() * inv);
        let mean = &rest.mean + &c * ((outcome - density.mean) * inv);
        Ok((GaussianState { mean, cm }, density))
    }

    /// Displaces the listed quadratures.
    pub fn displace(&self, shifts: &[(usize, Quad, f64)]) -> Result<GaussianState> {
        let mut out = self.clone();
        for &(m, q, d) in shifts {
            if m >= self.n_modes() {
                return domain(format!("mode {m} out of range"));
            }
            out.mean[index(m, q)] += d;
        }
        Ok(out)
    }
}

pub(crate) fn index(mode: usize, q: Quad) -> usize {
    match q {
        Quad::X => 2 * mode,
        Quad::P => 2 * mode + 1,
    }
}

fn pseudo_inverse_scalar(v: f64, scale: f64) -> f64 {
    if v.abs() <= 1e-14 * scale.max(1.0) {
        0.0
    } else {
        1.0 / v
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Symplectic eigenvalues of a positive-definite covariance matrix,
/// ascending. Each appears once.
pub fn symplectic_eigenvalues(cm: &DMatrix<f64>) -> Vec<f64> {
    let n = cm.nrows() / 2;
    let eig = SymmetricEigen::new(cm.clone());
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let a = &root * omega(n) * &root;
    let ata = a.transpose() * &a;
    let mut vals: Vec<f64> = SymmetricEigen::new(symmetrize(ata))
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Doubly degenerate spectrum: keep every other value.
    vals.into_iter().step_by(2).collect()
}

impl GaussianChannel {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || n % 2 != 0 || x.ncols() != n || y.nrows() != n || y.ncols() != n {
            return domain("channel matrices must be 2k×2k");
        }
        if (&y - y.transpose()).amax() > SYMMETRY_TOL * (1.0 + y.amax()) {
            return domain("channel noise matrix Y must be symmetric");
        }
        let ch = Self { x, y };
        ch.check_cp()?;
        Ok(ch)
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            x: DMatrix::identity(2 * n_modes, 2 * n_modes),
            y: DMatrix::zeros(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.x.nrows() / 2
    }

    /// Smallest eigenvalue of `Y + iΩ − iXΩXᵀ`.
    pub fn cp_margin(&self) -> f64 {
        let w = omega(self.n_modes());
        let b = &w - &self.x * &w * self.x.transpose();
        min_hermitian_eigenvalue(&self.y, &b)
    }

    pub fn check_cp(&self) -> Result<()> {
        let m = self.cp_margin();
        if m < -PHYSICALITY_TOL {
            return Err(Error::Contract(format!(
                "channel is not completely positive (min eigenvalue {m:e})"
            )));
        }
        Ok(())
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &GaussianChannel) -> GaussianChannel {
        GaussianChannel {
            x: &other.x * &self.x,
            y: symmetrize(&other.x * &self.y * other.x.transpose() + &other.y),
        }
    }
}
