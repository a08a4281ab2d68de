use super::residual::StepEquations;
use super::{ActiveWindow, Scheme, SolverConfig, SolverError, LAMBDA_STAR};
use crate::model::{MassGrid, ModelSpec, TransportMap};
use crate::tridiag::Tridiagonal;

/// Step length for the damped Newton iteration given the Newton decrement `λ`.
///
/// The rule's `1/λ` branch exceeds one for `λ ∈ (λ', 1)`; the result is
/// capped at 1 so a damped step never overshoots the Newton step.
pub fn damping_alpha(lambda: f64, lambda_prime: f64) -> f64 {
    let alpha = if lambda > lambda_prime {
        1.0 / lambda
    } else if lambda >= LAMBDA_STAR {
        (1.0 - lambda) / (lambda * (3.0 - lambda))
    } else {
        1.0
    };
    alpha.min(1.0)
}

/// `a₀ = 4h·min(1, κ/2)³ / max(κ, M_v)²`.
pub fn self_concordance_a0(model: &ModelSpec, grid: MassGrid) -> f64 {
    let kappa = model.kappa();
    4.0 * grid.spacing() * (0.5 * kappa).min(1.0).powi(3) / kappa.max(model.concordance()).powi(2)
}

/// Result of one Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub map: TransportMap,
    pub iterations: usize,
    /// Iterations that took a step shorter than the full Newton step.
    pub damped_iterations: usize,
    pub halvings: usize,
    pub residual: f64,
    /// The solve ended at the floating-point floor above the tolerance.
    pub stagnated: bool,
}

/// The splitting pre-step and the accepted fully implicit step.
#[derive(Debug, Clone)]
pub struct EulerOutcome {
    pub split: NewtonOutcome,
    pub euler: NewtonOutcome,
}

/// Scaled residual, relative to the tolerance, below which a Euler solve
/// whose line search can no longer decrease the merit is accepted.
const STAGNATION_FACTOR: f64 = 1e3;

#[derive(Debug, Default)]
struct Counters {
    stagnated: bool,
    iterations: usize,
    damped: usize,
    halvings: usize,
    residual: f64,
}

fn axpy(y: &[f64], alpha: f64, dir: &[f64], start: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(y);
    for (j, d) in dir.iter().enumerate() {
        out[start + j] += alpha * d;
    }
}

/// Per node, one of: the scaled residual meets the tolerance; the Newton
/// update is tiny next to the node's distance from the boundary or below a
/// few ulps of the node value; or the residual is what a few ulps of the
/// node value already produce, so no representable map does better.
///
/// For the Euler scheme `h Σ τ Φ_i (1 − Φ_i) |F_i|`, which bounds the change
/// of the conserved quantity, must also stay below the tolerance: crowded
/// nodes have stiff rows where a tiny update can hide a large residual.
fn converged_nodewise(eq: &StepEquations, scheme: Scheme, y: &[f64], f: &[f64], jac: &Tridiagonal, gamma: &[f64], tol: f64) -> bool {
    let start = eq.window.start;
    if scheme == Scheme::Euler {
        let h = 1.0 / (y.len() - 1) as f64;
        let defect: f64 = f
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let v = y[start + j];
                (eq.tau * v * (1.0 - v) * r).abs()
            })
            .sum();
        if h * defect > tol {
            return false;
        }
    }
    f.iter().zip(gamma).enumerate().all(|(j, (r, g))| {
        let i = start + j;
        let v = y[i];
        let x = match scheme {
            Scheme::Euler => v,
            Scheme::Split => eq.prev[i],
        };
        (eq.tau * x.max(1.0 - x) * r).abs() < tol
            || g.abs() <= tol * v.min(1.0 - v)
            || g.abs() <= 4.0 * f64::EPSILON * v
            || r.abs() <= 8.0 * f64::EPSILON * v * jac.diag[j].abs()
    })
}

fn split_newton(eq: &StepEquations, h: f64, a0: f64, config: &SolverConfig) -> Result<(Vec<f64>, Counters), SolverError> {
    let mut y = eq.prev.to_vec();
    let mut c = Counters::default();
    if eq.window.is_empty() {
        return Ok((y, c));
    }
    let start = eq.window.start;
    let mut f = Vec::new();
    let mut trial = Vec::new();
    loop {
        eq.residual(Scheme::Split, &y, &mut f)?;
        c.residual = eq.scaled_norm(Scheme::Split, &y, &f);
        if c.residual < config.newton_abs_tol {
            return Ok((y, c));
        }
        if c.iterations == config.max_newton_iters {
            return Err(SolverError::NotConverged {
                scheme: Scheme::Split,
                iterations: c.iterations,
                residual: c.residual,
            });
        }
        c.iterations += 1;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let jac = eq.jacobian(Scheme::Split, &y)?;
        let gamma = jac.solve(&rhs)?;
        if converged_nodewise(eq, Scheme::Split, &y, &f, &jac, &gamma, config.newton_abs_tol) {
            return Ok((y, c));
        }
        let decrement: f64 = -h * f.iter().zip(&gamma).map(|(a, b)| a * b).sum::<f64>();
        let lambda = (decrement.max(0.0) / a0).sqrt();
        let mut alpha = damping_alpha(lambda, config.lambda_prime);
        let damped = alpha < 1.0;
        let current = if damped { eq.split_objective(&y, h) } else { f64::NAN };
        let mut halvings = 0;
        loop {
            axpy(&y, alpha, &gamma, start, &mut trial);
            // damped steps must also decrease J_N
            let ok = eq.is_admissible(&trial) && (!damped || eq.split_objective(&trial, h) < current);
            if ok {
                break;
            }
            if halvings == config.max_halvings {
                return Err(SolverError::MonotonicityLost {
                    scheme: Scheme::Split,
                    halvings,
                });
            }
            halvings += 1;
            alpha *= 0.5;
        }
        if damped || halvings > 0 {
            c.damped += 1;
        }
        c.halvings += halvings;
        std::mem::swap(&mut y, &mut trial);
    }
}

/// Rows of the Euler system multiplied by `τ Φ_i (1 − Φ_i)`; same roots,
/// but the entropy term loses its boundary singularity.
fn scaled_euler_system(eq: &StepEquations, y: &[f64], f: &[f64], mut jac: Tridiagonal) -> (Vec<f64>, Tridiagonal) {
    let mut g = Vec::with_capacity(f.len());
    for (j, (i, r)) in eq.window.range().zip(f).enumerate() {
        let v = y[i];
        let s = eq.tau * v * (1.0 - v);
        g.push(s * r);
        jac.diag[j] = s * jac.diag[j] + eq.tau * (1.0 - 2.0 * v) * r;
        if j + 1 < f.len() {
            jac.upper[j] *= s;
        }
        if j > 0 {
            jac.lower[j - 1] *= s;
        }
    }
    (g, jac)
}

/// `½ Σ (w_i G_i)²` for the scaled Euler residual `G = τ m F`, with the
/// weights frozen for a whole line search so the Newton direction descends.
fn weighted_merit(eq: &StepEquations, weights: &[f64], y: &[f64], f: &[f64]) -> f64 {
    eq.window
        .range()
        .zip(weights.iter().zip(f))
        .map(|(i, (w, r))| (w * eq.tau * y[i] * (1.0 - y[i]) * r).powi(2))
        .sum::<f64>()
        * 0.5
}

/// Freezes window-edge nodes that sit in the clamp zone and whose Newton
/// update `gamma` (indexed from `window.start`) still points at the
/// boundary. Their roots lie closer to the boundary than the iterate can
/// resolve; nodes that merely overshot are pulled back by their update.
fn freeze_edges(y: &mut [f64], window: &mut ActiveWindow, gamma: &[f64], tol: f64) -> bool {
    let before = *window;
    while !window.is_empty() && y[window.end - 1] > 1.0 - tol && gamma[window.end - 1 - before.start] >= 0.0 {
        window.end -= 1;
        y[window.end] = 1.0;
    }
    while !window.is_empty() && y[window.start] < tol && gamma[window.start - before.start] <= 0.0 {
        y[window.start] = 0.0;
        window.start += 1;
    }
    *window != before
}

fn euler_newton(eq: &StepEquations, guess: Vec<f64>, config: &SolverConfig) -> Result<(Vec<f64>, Counters), SolverError> {
    let mut y = guess;
    let mut c = Counters::default();
    let mut eq = eq.with_window(eq.window);
    let eq = &mut eq;
    let mut f = Vec::new();
    let mut f_trial = Vec::new();
    let mut trial = Vec::new();
    // the cap applies per unknown set; each freeze starts a smaller problem
    let mut on_window = 0;
    loop {
        if eq.window.is_empty() {
            c.residual = 0.0;
            return Ok((y, c));
        }
        let start = eq.window.start;
        eq.residual(Scheme::Euler, &y, &mut f)?;
        c.residual = eq.scaled_norm(Scheme::Euler, &y, &f);
        if c.residual < config.newton_abs_tol {
            return Ok((y, c));
        }
        if on_window == config.max_newton_iters {
            return Err(SolverError::NotConverged {
                scheme: Scheme::Euler,
                iterations: c.iterations,
                residual: c.residual,
            });
        }
        c.iterations += 1;
        on_window += 1;
        let raw = eq.jacobian(Scheme::Euler, &y)?;
        let (g, jac) = scaled_euler_system(eq, &y, &f, raw.clone());
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let gamma = jac.solve(&rhs)?;
        let mut window = eq.window;
        if freeze_edges(&mut y, &mut window, &gamma, config.clamp_tol) {
            eq.window = window;
            on_window = 0;
            continue;
        }
        if converged_nodewise(eq, Scheme::Euler, &y, &f, &raw, &gamma, config.newton_abs_tol) {
            return Ok((y, c));
        }
        // nodes already at their roundoff floor would only add noise
        let weights: Vec<f64> = eq
            .window
            .range()
            .enumerate()
            .map(|(j, i)| {
                if f[j].abs() <= 8.0 * f64::EPSILON * y[i] * raw.diag[j].abs() {
                    0.0
                } else {
                    1.0 / y[i].min(1.0 - y[i])
                }
            })
            .collect();
        let merit = weighted_merit(eq, &weights, &y, &f);
        let mut alpha = 1.0;
        let mut halvings = 0;
        loop {
            axpy(&y, alpha, &gamma, start, &mut trial);
            // Armijo test on a fixed-weight merit, which the Newton direction descends
            let ok = eq.is_admissible(&trial)
                && eq.residual(Scheme::Euler, &trial, &mut f_trial).is_ok()
                && weighted_merit(eq, &weights, &trial, &f_trial) <= (1.0 - 1e-4 * alpha) * merit;
            if ok {
                break;
            }
            if halvings == config.max_halvings {
                // no representable progress left; accept a nearly converged iterate
                if c.residual <= STAGNATION_FACTOR * config.newton_abs_tol {
                    log::debug!("euler Newton stagnated at scaled residual {:e}", c.residual);
                    c.stagnated = true;
                    return Ok((y, c));
                }
                return Err(SolverError::MonotonicityLost {
                    scheme: Scheme::Euler,
                    halvings,
                });
            }
            halvings += 1;
            alpha *= 0.5;
        }
        if halvings > 0 {
            c.damped += 1;
        }
        c.halvings += halvings;
        std::mem::swap(&mut y, &mut trial);
    }
}

fn outcome(grid: MassGrid, values: Vec<f64>, c: Counters) -> NewtonOutcome {
    NewtonOutcome {
        map: TransportMap::from_trusted(grid, values),
        iterations: c.iterations,
        damped_iterations: c.damped,
        halvings: c.halvings,
        residual: c.residual,
        stagnated: c.stagnated,
    }
}

/// One convex-splitting step from `prev` by damped Newton on `J_N`.
pub fn solve_split_step(prev: &TransportMap, model: &ModelSpec, config: &SolverConfig) -> Result<NewtonOutcome, SolverError> {
    config.validate()?;
    let grid = prev.grid();
    let eq = StepEquations::new(prev.values(), model, config.tau);
    let (values, c) = split_newton(&eq, grid.spacing(), self_concordance_a0(model, grid), config)?;
    Ok(outcome(grid, values, c))
}

/// One fully implicit step from `prev`, started from the splitting solution.
/// With `config.stepping == Scheme::Split` the splitting solution is
/// accepted as it is and `euler` repeats it.
pub fn solve_euler_step(prev: &TransportMap, model: &ModelSpec, config: &SolverConfig) -> Result<EulerOutcome, SolverError> {
    config.validate()?;
    let grid = prev.grid();
    let eq = StepEquations::new(prev.values(), model, config.tau);
    let (guess, sc) = split_newton(&eq, grid.spacing(), self_concordance_a0(model, grid), config)?;
    let split = outcome(grid, guess.clone(), sc);
    if config.stepping == Scheme::Split {
        let euler = NewtonOutcome {
            iterations: 0,
            damped_iterations: 0,
            halvings: 0,
            ..split.clone()
        };
        return Ok(EulerOutcome { split, euler });
    }
    let (values, ec) = euler_newton(&eq, guess, config)?;
    Ok(EulerOutcome {
        split,
        euler: outcome(grid, values, ec),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_initial_map, InitialDensity};

    fn map(values: &[f64]) -> TransportMap {
        let grid = MassGrid::new(values.len() - 1).unwrap();
        TransportMap::new(grid, values.to_vec()).unwrap()
    }

    #[test]
    fn damping_branches() {
        assert_eq!(damping_alpha(0.1, 0.5), 1.0);
        assert_eq!(damping_alpha(2.0, 0.5), 0.5);
        assert!((damping_alpha(0.5, 0.5) - 0.4).abs() < 1e-15);
        // 1/λ branch capped
        assert_eq!(damping_alpha(0.8, 0.5), 1.0);
    }

    #[test]
    fn concordance_constant() {
        let model = ModelSpec::diffusion(2.0).unwrap();
        let a0 = self_concordance_a0(&model, MassGrid::new(100).unwrap());
        assert!((a0 - 0.01).abs() < 1e-15);
        let model = ModelSpec::diffusion(4.0).unwrap();
        let a0 = self_concordance_a0(&model, MassGrid::new(1000).unwrap());
        assert!((a0 - 2.5e-4).abs() < 1e-18);
    }

    #[test]
    fn symmetric_two_interval_step_is_fixed() {
        let model = ModelSpec::diffusion(2.0).unwrap();
        let prev = map(&[0.0, 0.5, 1.0]);
        for tau in [1e-3, 0.1, 10.0] {
            let out = solve_euler_step(&prev, &model, &SolverConfig::new(tau)).unwrap();
            assert_eq!(out.euler.map.values(), prev.values());
            assert_eq!(out.split.iterations, 0);
        }
    }

    #[test]
    fn steady_map_is_returned_unchanged() {
        let model = ModelSpec::diffusion(2.0).unwrap();
        let prev = map(&[0.0, 0.0, 0.5, 1.0, 1.0]);
        let out = solve_euler_step(&prev, &model, &SolverConfig::new(1e-2)).unwrap();
        for (a, b) in out.euler.map.values().iter().zip(prev.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn split_step_decreases_objective_and_stays_monotone() {
        let model = ModelSpec::new(2.0, crate::model::FitnessPotential::linear_slope(-3.0, 1.0).unwrap()).unwrap();
        let grid = MassGrid::new(40).unwrap();
        let prev = build_initial_map(&InitialDensity::from_key("bimodal").unwrap(), grid).unwrap();
        let config = SolverConfig::new(0.05);
        let out = solve_split_step(&prev, &model, &config).unwrap();
        assert!(out.map.values().windows(2).all(|w| w[1] > w[0]));
        let before = super::super::split_functional(&prev, &prev, &model, config.tau).unwrap();
        let after = super::super::split_functional(&prev, &out.map, &model, config.tau).unwrap();
        assert!(after < before);
    }

    #[test]
    fn split_stepping_accepts_the_splitting_solution() {
        let model = ModelSpec::diffusion(2.0).unwrap();
        let prev = map(&[0.0, 0.1, 0.2, 0.6, 1.0]);
        let mut config = SolverConfig::new(0.05);
        config.stepping = Scheme::Split;
        let out = solve_euler_step(&prev, &model, &config).unwrap();
        assert_eq!(out.euler.map, out.split.map);
        assert_eq!(out.euler.iterations, 0);
        assert_eq!(out.split.map, solve_split_step(&prev, &model, &config).unwrap().map);
    }

    #[test]
    fn rejects_invalid_config() {
        let model = ModelSpec::diffusion(2.0).unwrap();
        let mut config = SolverConfig::new(1e-3);
        config.lambda_prime = 0.1;
        assert!(matches!(
            solve_split_step(&map(&[0.0, 0.5, 1.0]), &model, &config),
            Err(SolverError::InvalidConfig(_))
        ));
    }
}
