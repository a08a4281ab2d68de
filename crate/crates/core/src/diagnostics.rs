//! Observables of a run: energy, conserved quantities, steady states,
//! distances between maps, jump locations and convergence orders.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::model::{FixationProbability, MassGrid, ModelError, ModelSpec, TransportMap};
use crate::solver::SolverState;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("maps live on different grids ({0} vs {1} intervals)")]
    GridMismatch(usize, usize),
    #[error("reference grid with {fine} intervals does not refine {coarse}")]
    NotNested { coarse: usize, fine: usize },
    #[error("parameters must halve between entries, entry {0} does not")]
    NotHalving(usize),
    #[error("need at least {needed} samples for the fit, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("steady state formula needs a neutral potential")]
    NotDiffusion,
    #[error("record rows must be strictly ordered in time (row at t = {0})")]
    Unordered(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DiagnosticsError>;

fn same_grid(a: &TransportMap, b: &TransportMap) -> Result<()> {
    let (na, nb) = (a.grid().intervals(), b.grid().intervals());
    if na == nb {
        Ok(())
    } else {
        Err(DiagnosticsError::GridMismatch(na, nb))
    }
}

/// Discrete free energy restricted to non-degenerate terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub value: f64,
    /// Zero gaps and nodes sitting at 0 or 1 that were left out.
    pub excluded: usize,
}

/// `𝓔_N(Φ) = −(κ/2) Σ h ln(gap_i / h) + (κ/2) Σ h ln(Φ_i(1 − Φ_i)) + Σ h V(Φ_i)`,
/// skipping zero gaps and nodes at the boundary.
pub fn discrete_energy(map: &TransportMap, model: &ModelSpec) -> Energy {
    let h = map.grid().spacing();
    let half_kappa = 0.5 * model.kappa();
    let phi = map.values();
    let n = phi.len() - 1;
    let mut value = 0.0;
    let mut excluded = 0;
    for w in phi.windows(2) {
        let gap = w[1] - w[0];
        if gap > 0.0 {
            value -= half_kappa * h * (gap / h).ln();
        } else {
            excluded += 1;
        }
    }
    for &v in &phi[1..n] {
        if v > 0.0 && v < 1.0 {
            value += half_kappa * h * (v * (1.0 - v)).ln();
        } else {
            excluded += 1;
        }
        value += h * model.potential().value(v);
    }
    Energy { value, excluded }
}

/// Lower bound of the restricted discrete energy of a map with `active`
/// nodes strictly inside `(0, 1)`, `M = sup |V|`:
/// `(κ/2)(active + 1) h ln h − (κ/2) active h ln 2 − M + M h`.
///
/// Pairing each active node with the gap on its side away from the nearer
/// endpoint gives ratios `gap / (Φ(1 − Φ)) ≤ 2`; the one leftover gap is at
/// most 1. With every interior node active this is
/// `(κ/2) ln h − (κ/2)(1 − h) ln 2 − M + M h`.
pub fn energy_lower_bound(model: &ModelSpec, grid: MassGrid, active: usize) -> f64 {
    let h = grid.spacing();
    let half_kappa = 0.5 * model.kappa();
    let m = model.potential().sup_value();
    let active = active as f64;
    half_kappa * (active + 1.0) * h * h.ln() - half_kappa * active * h * 2f64.ln() - m + m * h
}

/// Left side of the discrete dissipation inequality,
/// `𝓔_N(next) − 𝓔_N(prev) + (h/τ) Σ (next_i − prev_i)² / (prev_i (1 − prev_i))`,
/// which is non-positive for a splitting step.
pub fn dissipation_gap(prev: &TransportMap, next: &TransportMap, model: &ModelSpec, tau: f64) -> Result<f64> {
    same_grid(prev, next)?;
    let h = prev.grid().spacing();
    let transport: f64 = prev
        .values()
        .iter()
        .zip(next.values())
        .filter(|(p, _)| **p > 0.0 && **p < 1.0)
        .map(|(p, q)| (q - p).powi(2) / (p * (1.0 - p)))
        .sum();
    Ok(discrete_energy(next, model).value - discrete_energy(prev, model).value + h / tau * transport)
}

/// `h Σ_{i=1}^{N−1} (Φ_i + 𝓕_i)`.
pub fn conserved_quantity(state: &SolverState) -> f64 {
    state.conserved()
}

/// `∫ θ(Φ(η)) dη` by the trapezoid rule; conserved by the continuum flow.
pub fn fixation_moment(map: &TransportMap, theta: &FixationProbability) -> Result<f64> {
    let h = map.grid().spacing();
    let phi = map.values();
    let n = phi.len() - 1;
    let mut sum = 0.5 * (theta.eval(phi[0])? + theta.eval(phi[n])?);
    for &v in &phi[1..n] {
        sum += theta.eval(v)?;
    }
    Ok(h * sum)
}

/// Step map `0, …, 0, a, 1, …, 1` with `Φ_i = 0` for `i ≤ m` and
/// `Φ_{m+1} = a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMap {
    pub m: usize,
    pub a: f64,
    pub grid: MassGrid,
}

impl SteadyMap {
    pub fn value(&self, i: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&(self.m + 1)) {
            Less => 0.0,
            Equal => self.a,
            Greater => 1.0,
        }
    }

    pub fn to_map(&self) -> TransportMap {
        let values = (0..self.grid.nodes()).map(|i| self.value(i)).collect();
        TransportMap::new(self.grid, values).expect("step map is a valid transport map")
    }
}

/// Steady state of pure diffusion reached from `initial`: the step map
/// with the same `Σ Φ_i`.
pub fn steady_state_diffusion(initial: &TransportMap, model: &ModelSpec) -> Result<SteadyMap> {
    if !model.is_diffusion() {
        return Err(DiagnosticsError::NotDiffusion);
    }
    let grid = initial.grid();
    let n = grid.intervals();
    let s: f64 = initial.values().iter().sum();
    // Σ Φ* = (N − m − 1) + a
    let mut whole = s.floor();
    let mut a = s - whole;
    if whole as usize >= n {
        whole = (n - 1) as f64;
        a = 1.0;
    }
    Ok(SteadyMap {
        m: n - 1 - whole as usize,
        a,
        grid,
    })
}

/// Mass-coordinate measure of nodes clamped at 0 and at 1.
pub fn dirac_masses(map: &TransportMap, clamp_tol: f64) -> (f64, f64) {
    let h = map.grid().spacing();
    let phi = map.values();
    let interior = &phi[1..phi.len() - 1];
    let left = interior.iter().filter(|&&v| v <= clamp_tol).count();
    let right = interior.iter().filter(|&&v| v >= 1.0 - clamp_tol).count();
    (h * left as f64, h * right as f64)
}

/// `∫ (1 − Φ) dη` by the trapezoid rule; the jump location of a step map.
pub fn numerical_jump(map: &TransportMap) -> f64 {
    let h = map.grid().spacing();
    let phi = map.values();
    let n = phi.len() - 1;
    let inner: f64 = phi[1..n].iter().map(|v| 1.0 - v).sum();
    h * (inner + 0.5 * (1.0 - phi[0]) + 0.5 * (1.0 - phi[n]))
}

fn interior_sum<F: Fn(f64, f64) -> f64>(a: &TransportMap, b: &TransportMap, f: F) -> Result<f64> {
    same_grid(a, b)?;
    let n = a.grid().intervals();
    let (x, y) = (a.values(), b.values());
    Ok((1..n).map(|i| f(x[i], y[i])).sum::<f64>() * a.grid().spacing())
}

/// `√(h Σ (Φ_i − Ψ_i)²)` over interior nodes.
pub fn l2_distance(a: &TransportMap, b: &TransportMap) -> Result<f64> {
    Ok(interior_sum(a, b, |x, y| (x - y).powi(2))?.sqrt())
}

/// `|arcsin(2y − 1) − arcsin(2x − 1)|`.
pub fn shahshahani(x: f64, y: f64) -> f64 {
    ((2.0 * y - 1.0).asin() - (2.0 * x - 1.0).asin()).abs()
}

/// Wasserstein distance for the Shahshahani ground metric,
/// `√(h Σ d(Φ_i, Ψ_i)²)`.
pub fn wasserstein_distance(a: &TransportMap, b: &TransportMap) -> Result<f64> {
    Ok(interior_sum(a, b, |x, y| shahshahani(x, y).powi(2))?.sqrt())
}

/// `h Σ_{i=0}^{N} |Φ_i − Φ^ref(η_i)|`, with the reference on a grid that
/// refines the map's grid.
pub fn l1_error(map: &TransportMap, reference: &TransportMap) -> Result<f64> {
    let coarse = map.grid().intervals();
    let fine = reference.grid().intervals();
    if fine < coarse || fine % coarse != 0 {
        return Err(DiagnosticsError::NotNested { coarse, fine });
    }
    let stride = fine / coarse;
    let r = reference.values();
    let sum: f64 = map.values().iter().enumerate().map(|(i, v)| (v - r[i * stride]).abs()).sum();
    Ok(map.grid().spacing() * sum)
}

/// Experimental orders `log₂(E_k / E_{k+1})` for `(parameter, error)` pairs
/// whose parameter halves from one entry to the next.
pub fn eoc(errors: &[(f64, f64)]) -> Result<Vec<f64>> {
    errors
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (p0, e0) = w[0];
            let (p1, e1) = w[1];
            if (p1 - 0.5 * p0).abs() > 1e-9 * p0 {
                return Err(DiagnosticsError::NotHalving(k + 1));
            }
            Ok(e0.log2() - e1.log2())
        })
        .collect()
}

/// One recorded step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow {
    pub t: f64,
    pub energy: f64,
    pub conserved: f64,
    pub l2: f64,
    pub wasserstein: f64,
    pub clamp_left: usize,
    pub clamp_right: usize,
    pub newton_iters: usize,
}

pub const RECORD_HEADER: [&str; 8] = [
    "t",
    "energy",
    "conserved",
    "l2",
    "wasserstein",
    "clamp_left",
    "clamp_right",
    "newton_iters",
];

/// Time series of [`RecordRow`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    rows: Vec<RecordRow>,
}

impl RunRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: RecordRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(DiagnosticsError::Unordered(row.t));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[RecordRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Replaces the distance columns, e.g. once a proxy steady state is known.
    pub fn set_distances<F: FnMut(usize) -> (f64, f64)>(&mut self, mut f: F) {
        for (k, row) in self.rows.iter_mut().enumerate() {
            (row.l2, row.wasserstein) = f(k);
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RECORD_HEADER)?;
        for r in &self.rows {
            w.write_record([
                fmt_real(r.t),
                fmt_real(r.energy),
                fmt_real(r.conserved),
                fmt_real(r.l2),
                fmt_real(r.wasserstein),
                r.clamp_left.to_string(),
                r.clamp_right.to_string(),
                r.newton_iters.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Fixed text format for reals in every CSV output.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.15e}")
}

/// The automatic fit window ends where `l2²` first falls below this
/// fraction of its peak; later rows are dominated by the last few nodes.
pub const PLATEAU_DROP: f64 = 0.05;
pub const MIN_FIT_SAMPLES: usize = 10;

/// Negated least-squares slope of `ln(l2²)` against `t`.
///
/// With an explicit `window` the fit uses the rows inside it. Without one
/// it starts at the largest distance, which skips an initial transient,
/// and stops before the plateau (see [`PLATEAU_DROP`]).
pub fn decay_rate_fit(record: &RunRecord, window: Option<(f64, f64)>) -> Result<f64> {
    let rows: Vec<(f64, f64)> = record
        .rows()
        .iter()
        .map(|r| (r.t, r.l2 * r.l2))
        .filter(|&(_, d2)| d2 > 0.0 && d2.is_finite())
        .collect();
    let picked: Vec<(f64, f64)> = match window {
        Some((t0, t1)) => rows.into_iter().filter(|&(t, _)| t >= t0 && t <= t1).collect(),
        None => {
            let peak = rows
                .iter()
                .enumerate()
                .fold(None, |best: Option<(usize, f64)>, (k, &(_, d2))| match best {
                    Some((_, m)) if m >= d2 => best,
                    _ => Some((k, d2)),
                });
            match peak {
                Some((k, top)) => rows[k..]
                    .iter()
                    .copied()
                    .take_while(|&(_, d2)| d2 >= PLATEAU_DROP * top)
                    .collect(),
                None => Vec::new(),
            }
        }
    };
    if picked.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            found: picked.len(),
        });
    }
    let samples: Vec<(f64, f64)> = picked.into_iter().map(|(t, d2)| (t, d2.ln())).collect();
    Ok(-least_squares_slope(&samples))
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
