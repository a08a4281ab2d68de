use std::time::{Duration, Instant};

use super::newton::{solve_euler_step, EulerOutcome};
use super::{ActiveWindow, SolverConfig, SolverError};
use crate::model::{ModelSpec, TransportMap};

/// Snaps values within `clamp_tol` of 0 or 1 to the endpoint.
pub fn clamp_boundary(map: &TransportMap, config: &SolverConfig) -> (TransportMap, ActiveWindow) {
    let tol = config.clamp_tol;
    let values: Vec<f64> = map
        .values()
        .iter()
        .map(|&v| {
            if v < tol {
                0.0
            } else if v > 1.0 - tol {
                1.0
            } else {
                v
            }
        })
        .collect();
    let window = ActiveWindow::of(&values);
    (TransportMap::from_trusted(map.grid(), values), window)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub steps: usize,
    pub split_iterations: usize,
    pub euler_iterations: usize,
    pub damped_iterations: usize,
    pub halvings: usize,
    pub max_split_iterations: usize,
    pub max_euler_iterations: usize,
    pub elapsed: Duration,
}

/// Current map, accumulated drift and bookkeeping of a run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub map: TransportMap,
    /// `𝓕_i = τ Σ_j Φ_i^j (1 − Φ_i^j) V'(Φ_i^j)` over accepted iterates.
    pub drift: Vec<f64>,
    pub window: ActiveWindow,
    pub step: usize,
    pub time: f64,
    pub stats: SolverStats,
}

/// Everything known about one completed step. `before` is the state the
/// step started from; `after` already holds the clamped map.
pub struct StepReport<'a> {
    pub before_map: &'a TransportMap,
    pub before_conserved: f64,
    pub newton: &'a EulerOutcome,
    /// `h Σ (Φ + 𝓕)` after the drift update, before clamping.
    pub after_conserved: f64,
    pub after: &'a SolverState,
    pub window_changed: bool,
}

impl StepReport<'_> {
    pub fn conservation_drift(&self) -> f64 {
        (self.after_conserved - self.before_conserved).abs()
    }
}

impl SolverState {
    pub fn new(map: TransportMap) -> Self {
        let window = ActiveWindow::of(map.values());
        let drift = vec![0.0; map.values().len()];
        Self {
            map,
            drift,
            window,
            step: 0,
            time: 0.0,
            stats: SolverStats::default(),
        }
    }

    /// `h Σ_{i=1}^{N−1} (Φ_i + 𝓕_i)`.
    pub fn conserved(&self) -> f64 {
        conserved_sum(self.map.values(), &self.drift) * self.map.grid().spacing()
    }

    /// Advances `n_steps` time steps.
    pub fn advance(&mut self, model: &ModelSpec, config: &SolverConfig, n_steps: usize) -> Result<(), SolverError> {
        self.advance_with(model, config, n_steps, |_| {})
    }

    /// Advances `n_steps` time steps, handing a report of each to `observer`.
    pub fn advance_with<F>(
        &mut self,
        model: &ModelSpec,
        config: &SolverConfig,
        n_steps: usize,
        mut observer: F,
    ) -> Result<(), SolverError>
    where
        F: FnMut(&StepReport),
    {
        config.validate()?;
        if self.drift.len() != self.map.values().len() {
            return Err(SolverError::GridMismatch);
        }
        for _ in 0..n_steps {
            let started = Instant::now();
            let step = self.step + 1;
            let at = |e: SolverError| SolverError::AtStep {
                step,
                source: Box::new(e),
            };
            let before_conserved = self.conserved();
            let newton = solve_euler_step(&self.map, model, config).map_err(at)?;
            let accepted = newton.euler.map.values();
            let h = self.map.grid().spacing();
            let tau = config.tau;
            let potential = model.potential();
            for (d, &v) in self.drift.iter_mut().zip(accepted) {
                *d += tau * v * (1.0 - v) * potential.slope(v);
            }
            let after_conserved = conserved_sum(accepted, &self.drift) * h;
            let (clamped, window) = clamp_boundary(&newton.euler.map, config);
            let before_map = std::mem::replace(&mut self.map, clamped);
            let window_changed = window != self.window;
            self.window = window;
            self.step = step;
            self.time = step as f64 * tau;

            let s = &mut self.stats;
            s.steps += 1;
            s.split_iterations += newton.split.iterations;
            s.euler_iterations += newton.euler.iterations;
            s.damped_iterations += newton.split.damped_iterations + newton.euler.damped_iterations;
            s.halvings += newton.split.halvings + newton.euler.halvings;
            s.max_split_iterations = s.max_split_iterations.max(newton.split.iterations);
            s.max_euler_iterations = s.max_euler_iterations.max(newton.euler.iterations);
            s.elapsed += started.elapsed();

            observer(&StepReport {
                before_map: &before_map,
                before_conserved,
                newton: &newton,
                after_conserved,
                after: self,
                window_changed,
            });
        }
        Ok(())
    }
}

fn conserved_sum(values: &[f64], drift: &[f64]) -> f64 {
    let n = values.len() - 1;
    (1..n).map(|i| values[i] + drift[i]).sum()
}
