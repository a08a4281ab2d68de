use log::warn;

use super::{InitialDensity, MassGrid, ModelError};
use crate::quadrature::integrate_pieces;

/// Discrete pseudo-inverse CDF `Φ_0..Φ_N` on a [`MassGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    grid: MassGrid,
    values: Vec<f64>,
}

impl TransportMap {
    /// Validates endpoints (`Φ_0 = 0`, `Φ_N = 1`), range and monotonicity.
    pub fn new(grid: MassGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.nodes() {
            return Err(ModelError::InvalidMap(format!(
                "expected {} values, got {}",
                grid.nodes(),
                values.len()
            )));
        }
        if values[0] != 0.0 || values[grid.intervals()] != 1.0 {
            return Err(ModelError::InvalidMap("endpoints must be exactly 0 and 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(ModelError::InvalidMap(format!("value {} at node {i} outside [0, 1]", values[i])));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(ModelError::InvalidMap(format!("decreasing between nodes {i} and {}", i + 1)));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: MassGrid, f: F) -> Result<Self, ModelError> {
        let n = grid.intervals();
        let values = (0..=n)
            .map(|i| match i {
                0 => 0.0,
                i if i == n => 1.0,
                i => f(grid.eta(i)),
            })
            .collect();
        Self::new(grid, values)
    }

    /// The identity map `Φ_i = i h`, pushing the uniform density.
    pub fn identity(grid: MassGrid) -> Self {
        Self::from_fn(grid, |eta| eta).expect("identity map is valid")
    }

    pub fn grid(&self) -> MassGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Replaces the values without re-validation; callers guarantee the invariants.
    pub(crate) fn from_trusted(grid: MassGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.nodes());
        Self { grid, values }
    }

    /// True when values are strictly increasing wherever they lie in `(0, 1)`.
    pub fn is_strict_on_interior(&self) -> bool {
        self.values
            .windows(2)
            .all(|w| w[1] > w[0] || (w[0] == 0.0 && w[1] == 0.0) || (w[0] == 1.0 && w[1] == 1.0))
    }
}

const ROOT_TOL: f64 = 1e-13;
const MAX_ROOT_ITERS: usize = 200;

/// Finds `inf{x ∈ [lo, 1] : F(x) > target}` given `F(lo) = cdf_lo ≤ target`.
fn invert_from(
    density: &InitialDensity,
    lo: f64,
    cdf_lo: f64,
    target: f64,
) -> Result<(f64, f64), ModelError> {
    let mass = |x: f64| -> Result<f64, ModelError> {
        Ok(cdf_lo + integrate_pieces(|y| density.eval(y), density.breakpoints(), lo, x, 1e-14)?)
    };
    // invariant: F(a) <= target < F(b)
    let (mut a, mut b) = (lo, 1.0);
    let (mut fa, mut fb) = (cdf_lo, 1.0);
    let mut x = lo;
    let mut fx = cdf_lo;
    for _ in 0..MAX_ROOT_ITERS {
        let slope = density.eval(x);
        let newton = if slope > 0.0 { x + (target - fx) / slope } else { f64::NAN };
        let candidate = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        let f_candidate = mass(candidate)?;
        if f_candidate > target {
            b = candidate;
            fb = f_candidate;
        } else {
            a = candidate;
            fa = f_candidate;
        }
        x = candidate;
        fx = f_candidate;
        let resolved = (fx - target).abs() <= ROOT_TOL && density.eval(x) > 0.0;
        if resolved {
            return Ok((x, fx));
        }
        if b - a <= 4.0 * f64::EPSILON {
            return Ok((b, fb.max(fa)));
        }
    }
    Err(ModelError::RootNotFound { target })
}

/// Discretizes the pseudo-inverse CDF of `f₀` on `grid`:
/// `Φ_i = inf{x : F(x) > i h}`, with `Φ_0 = 0` and `Φ_N = 1`.
pub fn build_initial_map(density: &InitialDensity, grid: MassGrid) -> Result<TransportMap, ModelError> {
    let n = grid.intervals();
    let h = grid.spacing();
    let mut values = vec![0.0; n + 1];
    values[n] = 1.0;
    let (mut lo, mut cdf_lo) = (0.0, 0.0);
    for (i, slot) in values.iter_mut().enumerate().take(n).skip(1) {
        let (x, fx) = invert_from(density, lo, cdf_lo, i as f64 * h)?;
        *slot = x;
        lo = x;
        cdf_lo = fx;
    }
    repair_ties(&mut values, h);
    TransportMap::new(grid, values)
}

/// Separates numerically tied interior values by `1e-12 h`.
fn repair_ties(values: &mut [f64], h: f64) {
    let n = values.len() - 1;
    let mut repaired = 0;
    for i in 1..n {
        if values[i] <= values[i - 1] {
            values[i] = values[i - 1] + 1e-12 * h;
            repaired += 1;
        }
    }
    for i in (1..n).rev() {
        if values[i] >= values[i + 1] {
            values[i] = values[i + 1] - 1e-12 * h;
            repaired += 1;
        }
    }
    if repaired > 0 {
        warn!("initial map had {repaired} tied values; separated by 1e-12·h");
    }
}
