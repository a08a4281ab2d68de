use std::f64::consts::PI;
use std::fmt;

use super::ModelError;
use crate::quadrature::integrate_pieces;

pub(crate) const QUAD_TOL: f64 = 1e-12;

/// Un-normalized shape of an initial density on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityShape {
    /// `1`
    Uniform,
    /// `x^p`; `p = 1` gives `2x` and `p = 2` gives `3x²` after normalization.
    Power(f64),
    /// `x(1 − x)`, normalized to `6x(1 − x)`.
    Parabola,
    /// `1 − sin(πx)`, normalized to `π/(π − 2)·(1 − sin πx)`.
    Sine,
    /// Indicator of `[lower, 1]`.
    Indicator(f64),
    /// `max(0, x(0.5 − x), (x − 0.7)(1 − x))`.
    Bimodal,
}

impl DensityShape {
    fn raw(&self, x: f64) -> f64 {
        match *self {
            DensityShape::Uniform => 1.0,
            DensityShape::Power(p) => x.powf(p),
            DensityShape::Parabola => x * (1.0 - x),
            DensityShape::Sine => 1.0 - (PI * x).sin(),
            DensityShape::Indicator(lower) => {
                if x >= lower {
                    1.0
                } else {
                    0.0
                }
            }
            DensityShape::Bimodal => (x * (0.5 - x)).max((x - 0.7) * (1.0 - x)).max(0.0),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            DensityShape::Indicator(lower) => vec![lower],
            DensityShape::Bimodal => vec![0.5, 0.7],
            _ => Vec::new(),
        }
    }

    /// Parses keys such as `uniform`, `2x`, `x^2`, `sine`, `indicator`,
    /// `indicator(0.3)`, `power(1.5)` or `bimodal`.
    pub fn parse(key: &str) -> Result<Self, ModelError> {
        let key = key.trim().to_ascii_lowercase();
        if matches!(key.as_str(), "6x(1-x)" | "x(1-x)") {
            return Ok(DensityShape::Parabola);
        }
        let (name, arg) = match key.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| ModelError::UnknownDensity(key.clone()))?;
                let value: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| ModelError::UnknownDensity(key.clone()))?;
                (name.trim().to_string(), Some(value))
            }
            None => (key.clone(), None),
        };
        let shape = match (name.as_str(), arg) {
            ("uniform" | "1", None) => DensityShape::Uniform,
            ("linear" | "2x" | "x", None) => DensityShape::Power(1.0),
            ("quadratic" | "3x^2" | "x^2", None) => DensityShape::Power(2.0),
            ("power", Some(p)) if p >= 0.0 => DensityShape::Power(p),
            ("parabola", None) => DensityShape::Parabola,
            ("sine" | "symmetric", None) => DensityShape::Sine,
            ("indicator", None) => DensityShape::Indicator(0.5),
            ("indicator", Some(lower)) if (0.0..1.0).contains(&lower) => DensityShape::Indicator(lower),
            ("bimodal", None) => DensityShape::Bimodal,
            _ => return Err(ModelError::UnknownDensity(key)),
        };
        Ok(shape)
    }
}

impl fmt::Display for DensityShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DensityShape::Uniform => write!(f, "uniform"),
            DensityShape::Power(p) if p == 1.0 => write!(f, "2x"),
            DensityShape::Power(p) if p == 2.0 => write!(f, "x^2"),
            DensityShape::Power(p) => write!(f, "power({p})"),
            DensityShape::Parabola => write!(f, "6x(1-x)"),
            DensityShape::Sine => write!(f, "sine"),
            DensityShape::Indicator(lower) => write!(f, "indicator({lower})"),
            DensityShape::Bimodal => write!(f, "bimodal"),
        }
    }
}

/// Probability density `f₀` on `[0, 1]`, normalized so that `∫ f₀ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDensity {
    shape: DensityShape,
    scale: f64,
    breakpoints: Vec<f64>,
}

impl InitialDensity {
    pub fn new(shape: DensityShape) -> Result<Self, ModelError> {
        let breakpoints = shape.breakpoints();
        let mass = integrate_pieces(|x| shape.raw(x), &breakpoints, 0.0, 1.0, QUAD_TOL)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(ModelError::DegenerateDensity(shape.to_string()));
        }
        Ok(Self {
            shape,
            scale: 1.0 / mass,
            breakpoints,
        })
    }

    pub fn from_key(key: &str) -> Result<Self, ModelError> {
        Self::new(DensityShape::parse(key)?)
    }

    pub fn shape(&self) -> DensityShape {
        self.shape
    }

    /// Normalized density value.
    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.shape.raw(x)
    }

    /// Points where the density has a kink or jump.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `∫_a^b f₀`.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64, ModelError> {
        Ok(integrate_pieces(|x| self.eval(x), &self.breakpoints, a, b, QUAD_TOL)?)
    }

    pub fn cdf(&self, x: f64) -> Result<f64, ModelError> {
        self.mass_between(0.0, x.clamp(0.0, 1.0))
    }

    /// `∫ x f₀(x) dx`.
    pub fn mean(&self) -> Result<f64, ModelError> {
        Ok(integrate_pieces(|x| x * self.eval(x), &self.breakpoints, 0.0, 1.0, QUAD_TOL)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [&str; 7] = ["uniform", "2x", "x^2", "6x(1-x)", "sine", "indicator", "bimodal"];

    #[test]
    fn builtins_are_normalized() {
        for key in ALL {
            let d = InitialDensity::from_key(key).unwrap();
            let total = d.mass_between(0.0, 1.0).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "{key}: {total}");
        }
    }

    #[test]
    fn normalization_constants() {
        let d = InitialDensity::from_key("x^2").unwrap();
        assert!((d.eval(1.0) - 3.0).abs() < 1e-12);
        let d = InitialDensity::from_key("sine").unwrap();
        assert!((d.eval(0.0) - PI / (PI - 2.0)).abs() < 1e-12);
        let d = InitialDensity::from_key("indicator").unwrap();
        assert!((d.eval(0.75) - 2.0).abs() < 1e-12);
        assert_eq!(d.eval(0.25), 0.0);
        // ∫ raw bimodal = 0.5³/6 + 0.3³/6
        let d = InitialDensity::from_key("bimodal").unwrap();
        let raw_mass = (0.125 + 0.027) / 6.0;
        assert!((d.eval(0.25) - 0.0625 / raw_mass).abs() < 1e-9);
    }

    #[test]
    fn parse_round_trip_and_errors() {
        for key in ALL {
            let shape = DensityShape::parse(key).unwrap();
            assert_eq!(DensityShape::parse(&shape.to_string()).unwrap(), shape);
        }
        assert_eq!(DensityShape::parse("indicator(0.3)").unwrap(), DensityShape::Indicator(0.3));
        assert!(DensityShape::parse("gaussian").is_err());
        assert!(DensityShape::parse("indicator(2)").is_err());
        assert!(DensityShape::parse("power(").is_err());
    }

    #[test]
    fn mean_of_linear_density() {
        let d = InitialDensity::from_key("2x").unwrap();
        assert!((d.mean().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }
}
