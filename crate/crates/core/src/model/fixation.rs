use super::{FitnessPotential, InitialDensity, ModelError};
use crate::quadrature::{integrate, integrate_pieces};

const THETA_TOL: f64 = 1e-12;
const JUMP_TOL: f64 = 1e-10;

/// Fixation probability `θ(x) = ∫_0^x e^{2V/κ} / ∫_0^1 e^{2V/κ}`.
#[derive(Debug, Clone)]
pub struct FixationProbability {
    potential: FitnessPotential,
    kappa: f64,
    normalizer: f64,
}

impl FixationProbability {
    pub fn new(potential: &FitnessPotential, kappa: f64) -> Result<Self, ModelError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(ModelError::InvalidKappa(kappa));
        }
        let weight = |y: f64| (2.0 / kappa * potential.value(y)).exp();
        let normalizer = integrate(weight, 0.0, 1.0, THETA_TOL)?;
        Ok(Self {
            potential: potential.clone(),
            kappa,
            normalizer,
        })
    }

    fn weight(&self, y: f64) -> f64 {
        (2.0 / self.kappa * self.potential.value(y)).exp()
    }

    pub fn eval(&self, x: f64) -> Result<f64, ModelError> {
        let x = x.clamp(0.0, 1.0);
        if x == 1.0 {
            return Ok(1.0);
        }
        let partial = integrate(|y| self.weight(y), 0.0, x, THETA_TOL * self.normalizer)?;
        Ok((partial / self.normalizer).clamp(0.0, 1.0))
    }
}

pub fn fixation_probability(potential: &FitnessPotential, kappa: f64, x: f64) -> Result<f64, ModelError> {
    FixationProbability::new(potential, kappa)?.eval(x)
}

/// Limiting jump location `η₀ = 1 − ∫ f₀ θ` of the step map `Φ∞`.
pub fn theoretical_jump(density: &InitialDensity, potential: &FitnessPotential, kappa: f64) -> Result<f64, ModelError> {
    let theta = FixationProbability::new(potential, kappa)?;
    // the integrand evaluator cannot return errors; record the first one
    let failure = std::cell::RefCell::new(None);
    let weighted = integrate_pieces(
        |x| match theta.eval(x) {
            Ok(t) => density.eval(x) * t,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        density.breakpoints(),
        0.0,
        1.0,
        JUMP_TOL,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(1.0 - weighted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_fixation_is_identity() {
        let v = FitnessPotential::neutral();
        for x in [0.0, 0.1, 0.37, 0.5, 0.99, 1.0] {
            assert!((fixation_probability(&v, 1.3, x).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_selection_closed_form() {
        // V = 2x, κ = 2: θ(1/2) = (e − 1)/(e² − 1) = 1/(e + 1)
        let v = FitnessPotential::linear_slope(0.0, 2.0).unwrap();
        let expected = 1.0 / (1f64.exp() + 1.0);
        assert!((fixation_probability(&v, 2.0, 0.5).unwrap() - expected).abs() < 1e-10);
        assert!((expected - 0.26894).abs() < 1e-5);
        assert_eq!(fixation_probability(&v, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(fixation_probability(&v, 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn fixation_is_monotone() {
        for slope in [[2.0, 0.0], [1.0, -3.0], [2.0, 4.0], [-3.0, 5.0]] {
            let v = FitnessPotential::from_slope_coefficients(&slope).unwrap();
            let theta = FixationProbability::new(&v, 2.0).unwrap();
            let mut last = 0.0;
            for i in 0..=1000 {
                let t = theta.eval(i as f64 / 1000.0).unwrap();
                assert!(t >= last - 1e-15);
                last = t;
            }
        }
    }

    #[test]
    fn rejects_non_positive_kappa() {
        let v = FitnessPotential::neutral();
        assert!(fixation_probability(&v, 0.0, 0.5).is_err());
        assert!(fixation_probability(&v, -1.0, 0.5).is_err());
    }

    #[test]
    fn neutral_jump_is_one_minus_mean() {
        let v = FitnessPotential::neutral();
        for key in ["2x", "x^2", "sine", "6x(1-x)", "bimodal", "indicator"] {
            let d = InitialDensity::from_key(key).unwrap();
            let eta = theoretical_jump(&d, &v, 2.0).unwrap();
            assert!((eta - (1.0 - d.mean().unwrap())).abs() < 1e-9, "{key}");
        }
        let d = InitialDensity::from_key("sine").unwrap();
        assert!((theoretical_jump(&d, &v, 2.0).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn table_of_jump_locations() {
        let cases = [
            ("x^2", [2.0, 0.0], 0.4065),
            ("x^2", [1.0, -3.0], 0.2054),
            ("bimodal", [2.0, 0.0], 0.7854),
            ("bimodal", [1.0, -3.0], 0.6172),
            ("indicator", [2.0, 0.0], 0.4255),
            ("indicator", [1.0, -3.0], 0.1985),
        ];
        for (key, slope, expected) in cases {
            let d = InitialDensity::from_key(key).unwrap();
            let v = FitnessPotential::from_slope_coefficients(&slope).unwrap();
            let eta = theoretical_jump(&d, &v, 2.0).unwrap();
            assert!((eta - expected).abs() < 5e-5, "{key} {slope:?}: {eta}");
        }
    }
}
