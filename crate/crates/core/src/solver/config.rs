use super::{Scheme, SolverError};

/// Threshold below which the damped-Newton rule takes full steps, `2 − √3`.
pub const LAMBDA_STAR: f64 = 0.267_949_192_431_122_7;

/// Time step, Newton tolerances and boundary clamping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    /// Sup-norm tolerance on the scaled residual `τ·max(Φ_i, 1 − Φ_i)·F_i`.
    pub newton_abs_tol: f64,
    pub max_newton_iters: usize,
    /// Damping threshold `λ' ∈ [2 − √3, 1)`.
    pub lambda_prime: f64,
    /// Values within this distance of 0 or 1 snap to the endpoint.
    pub clamp_tol: f64,
    /// Step halvings allowed when a Newton update would break monotonicity.
    pub max_halvings: usize,
    /// Which solution becomes the next map: the fully implicit one, refined
    /// from the splitting step, or the splitting step itself.
    pub stepping: Scheme,
}

impl SolverConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            newton_abs_tol: 1e-9,
            max_newton_iters: 100,
            lambda_prime: 0.5,
            clamp_tol: 1e-10,
            max_halvings: 30,
            stepping: Scheme::Euler,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.clamp_tol > 0.0 && self.clamp_tol <= 1e-6) {
            return bad(format!("clamp_tol must lie in (0, 1e-6], got {}", self.clamp_tol));
        }
        if !(LAMBDA_STAR..1.0).contains(&self.lambda_prime) {
            return bad(format!("lambda_prime must lie in [2 - sqrt 3, 1), got {}", self.lambda_prime));
        }
        if !(self.newton_abs_tol > 0.0) {
            return bad(format!("newton_abs_tol must be positive, got {}", self.newton_abs_tol));
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_star_value() {
        assert!((LAMBDA_STAR - (2.0 - 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(SolverConfig::new(1e-3).validate().is_ok());
        assert!(SolverConfig::new(0.0).validate().is_err());
        let mut c = SolverConfig::new(1e-3);
        c.clamp_tol = 1e-5;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(1e-3);
        c.lambda_prime = 0.2;
        assert!(c.validate().is_err());
        c.lambda_prime = 1.0;
        assert!(c.validate().is_err());
        c.lambda_prime = LAMBDA_STAR;
        assert!(c.validate().is_ok());
    }
}
