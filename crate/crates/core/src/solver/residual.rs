//! Residuals, Jacobians and the convex per-step functional of the two
//! implicit schemes. Nodes outside the active window are Dirichlet data.

use super::{ActiveWindow, SolverError};
use crate::model::{ModelSpec, TransportMap};
use crate::tridiag::Tridiagonal;

/// Which implicit discretization a residual or Jacobian refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Fully implicit: mobility and potential evaluated at the new iterate.
    Euler,
    /// Convex splitting: mobility, `(1 − 2Φ)` term and `V_e'` lagged.
    Split,
}

/// Shared data for evaluating one time step's equations on slices.
pub(crate) struct StepEquations<'a> {
    pub prev: &'a [f64],
    pub model: &'a ModelSpec,
    pub tau: f64,
    pub window: ActiveWindow,
}

impl<'a> StepEquations<'a> {
    pub fn new(prev: &'a [f64], model: &'a ModelSpec, tau: f64) -> Self {
        Self {
            prev,
            model,
            tau,
            window: ActiveWindow::of(prev),
        }
    }

    pub fn with_window(&self, window: ActiveWindow) -> Self {
        Self {
            prev: self.prev,
            model: self.model,
            tau: self.tau,
            window,
        }
    }

    fn half_kappa(&self) -> f64 {
        0.5 * self.model.kappa()
    }

    /// Interiority and strict monotonicity of `cur` on the window,
    /// including the gaps to the Dirichlet neighbours.
    pub fn check_admissible(&self, cur: &[f64]) -> Result<(), SolverError> {
        let w = self.window;
        if w.is_empty() {
            return Ok(());
        }
        for i in w.range() {
            let v = cur[i];
            if !(v > 0.0 && v < 1.0) {
                return Err(SolverError::Degenerate {
                    index: i,
                    reason: format!("value {v} left (0, 1)"),
                });
            }
        }
        for i in w.start..=w.end {
            if !(cur[i] - cur[i - 1] > 0.0) {
                return Err(SolverError::Degenerate {
                    index: i,
                    reason: format!("gap {} to the left is not positive", cur[i] - cur[i - 1]),
                });
            }
        }
        Ok(())
    }

    pub fn is_admissible(&self, cur: &[f64]) -> bool {
        self.check_admissible(cur).is_ok()
    }

    /// Residual over the window (entry `j` belongs to node `window.start + j`).
    pub fn residual(&self, scheme: Scheme, cur: &[f64], out: &mut Vec<f64>) -> Result<(), SolverError> {
        self.check_admissible(cur)?;
        out.clear();
        let hk = self.half_kappa();
        let tau = self.tau;
        let potential = self.model.potential();
        let split = self.model.split();
        for i in self.window.range() {
            let (v, p) = (cur[i], self.prev[i]);
            let r = match scheme {
                Scheme::Euler => {
                    let m = v * (1.0 - v);
                    let (spatial, _) = euler_spatial(hk, cur[i - 1], v, cur[i + 1]);
                    (v - p) / (tau * m) + spatial + potential.slope(v)
                }
                Scheme::Split => {
                    let diffusion = hk * (1.0 / (cur[i + 1] - v) - 1.0 / (v - cur[i - 1]));
                    let mp = p * (1.0 - p);
                    (v - p) / (tau * mp) + diffusion + hk * (1.0 - 2.0 * p) / mp + split.convex.slope(v)
                        - split.concave.slope(p)
                }
            };
            if !r.is_finite() {
                return Err(SolverError::NonFinite { index: i });
            }
            out.push(r);
        }
        Ok(())
    }

    /// Sup norm of `τ·max(Φ_i, 1 − Φ_i)·F_i`: the Newton displacement
    /// relative to the distance from the nearer boundary. The mobility is
    /// taken at the iterate for the Euler scheme and at `prev` for splitting.
    pub fn scaled_norm(&self, scheme: Scheme, cur: &[f64], residual: &[f64]) -> f64 {
        self.window
            .range()
            .zip(residual)
            .map(|(i, r)| {
                let x = match scheme {
                    Scheme::Euler => cur[i],
                    Scheme::Split => self.prev[i],
                };
                (self.tau * x.max(1.0 - x) * r).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn jacobian(&self, scheme: Scheme, cur: &[f64]) -> Result<Tridiagonal, SolverError> {
        self.check_admissible(cur)?;
        let w = self.window;
        let mut jac = Tridiagonal::zeros(w.len());
        let hk = self.half_kappa();
        let tau = self.tau;
        for (j, i) in w.range().enumerate() {
            let v = cur[i];
            let right = hk / (cur[i + 1] - v).powi(2);
            let left = hk / (v - cur[i - 1]).powi(2);
            jac.diag[j] = match scheme {
                Scheme::Euler => {
                    let p = self.prev[i];
                    let m = v * (1.0 - v);
                    let time = (m - (v - p) * (1.0 - 2.0 * v)) / (tau * m * m);
                    let (_, spatial) = euler_spatial(hk, cur[i - 1], v, cur[i + 1]);
                    time + spatial + self.model.potential().curvature(v)
                }
                Scheme::Split => {
                    let p = self.prev[i];
                    1.0 / (tau * p * (1.0 - p)) + self.model.split().convex.curvature(v) + right + left
                }
            };
            if j + 1 < w.len() {
                jac.upper[j] = -right;
                jac.lower[j] = -right;
            }
        }
        Ok(jac)
    }

    /// Convex functional `J_N` whose minimizer solves the split scheme;
    /// `+∞` outside the admissible set. Its gradient is `h·F_split`.
    pub fn split_objective(&self, y: &[f64], h: f64) -> f64 {
        if !self.is_admissible(y) {
            return f64::INFINITY;
        }
        let w = self.window;
        if w.is_empty() {
            return 0.0;
        }
        let hk = self.half_kappa();
        let split = self.model.split();
        let mut total = 0.0;
        for i in w.range() {
            let (v, p) = (y[i], self.prev[i]);
            let mp = p * (1.0 - p);
            total += (v - p).powi(2) / (2.0 * self.tau * mp) + hk * (1.0 - 2.0 * p) / mp * v
                + split.convex.value(v)
                - split.concave.slope(p) * v;
        }
        for i in w.start..=w.end {
            total -= hk * ((y[i] - y[i - 1]) / h).ln();
        }
        h * total
    }
}

/// Gap and entropy terms of the Euler residual at a node with neighbours
/// `l`, `r`, and their derivative in the node value. Against a boundary
/// neighbour the two singular terms cancel in closed form.
fn euler_spatial(hk: f64, l: f64, v: f64, r: f64) -> (f64, f64) {
    match (l == 0.0, r == 1.0) {
        (true, true) => (0.0, 0.0),
        (true, false) => (
            hk * (1.0 / (r - v) - 1.0 / (1.0 - v)),
            hk * (1.0 / (r - v).powi(2) - 1.0 / (1.0 - v).powi(2)),
        ),
        (false, true) => (
            hk * (1.0 / v - 1.0 / (v - l)),
            hk * (1.0 / (v - l).powi(2) - 1.0 / (v * v)),
        ),
        (false, false) => {
            let m = v * (1.0 - v);
            (
                hk * (1.0 / (r - v) - 1.0 / (v - l) + (1.0 - 2.0 * v) / m),
                hk * (1.0 / (r - v).powi(2) + 1.0 / (v - l).powi(2) - 1.0 / (v * v) - 1.0 / (1.0 - v).powi(2)),
            )
        }
    }
}

fn check_pair(prev: &TransportMap, cur: &TransportMap) -> Result<(), SolverError> {
    if prev.grid() != cur.grid() {
        return Err(SolverError::GridMismatch);
    }
    Ok(())
}

/// Residual of the fully implicit scheme over the active window of `prev`.
pub fn residual_euler(prev: &TransportMap, cur: &TransportMap, model: &ModelSpec, tau: f64) -> Result<Vec<f64>, SolverError> {
    check_pair(prev, cur)?;
    let mut out = Vec::new();
    StepEquations::new(prev.values(), model, tau).residual(Scheme::Euler, cur.values(), &mut out)?;
    Ok(out)
}

/// Residual of the convex-splitting scheme over the active window of `prev`.
pub fn residual_split(prev: &TransportMap, cur: &TransportMap, model: &ModelSpec, tau: f64) -> Result<Vec<f64>, SolverError> {
    check_pair(prev, cur)?;
    let mut out = Vec::new();
    StepEquations::new(prev.values(), model, tau).residual(Scheme::Split, cur.values(), &mut out)?;
    Ok(out)
}

/// Analytic Jacobian of the chosen residual with respect to the window values.
pub fn jacobian(
    cur: &TransportMap,
    prev: &TransportMap,
    model: &ModelSpec,
    tau: f64,
    scheme: Scheme,
) -> Result<Tridiagonal, SolverError> {
    check_pair(prev, cur)?;
    StepEquations::new(prev.values(), model, tau).jacobian(scheme, cur.values())
}

/// `J_N(y)` for one split step from `prev`.
pub fn split_functional(prev: &TransportMap, y: &TransportMap, model: &ModelSpec, tau: f64) -> Result<f64, SolverError> {
    check_pair(prev, y)?;
    Ok(StepEquations::new(prev.values(), model, tau).split_objective(y.values(), prev.grid().spacing()))
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Split => "split",
        })
    }
}
