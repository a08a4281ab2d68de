//! Grids, fitness potentials, initial densities and the transport map.

mod density;
mod fixation;
mod grid;
mod map;
mod potential;

use thiserror::Error;

pub use density::{DensityShape, InitialDensity};
pub use fixation::{fixation_probability, theoretical_jump, FixationProbability};
pub use grid::MassGrid;
pub use map::{build_initial_map, TransportMap};
pub use potential::{convex_split, ConvexSplit, FitnessPotential, Polynomial};

use crate::quadrature::QuadratureError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("grid needs at least 2 intervals, got {0}")]
    GridTooCoarse(usize),
    #[error("diffusion rate must be positive and finite, got {0}")]
    InvalidKappa(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("unknown density key `{0}`")]
    UnknownDensity(String),
    #[error("density `{0}` has no mass on [0, 1]")]
    DegenerateDensity(String),
    #[error("invalid transport map: {0}")]
    InvalidMap(String),
    #[error("CDF inversion did not converge for target {target}")]
    RootNotFound { target: f64 },
    #[error("concordance constant: {0}")]
    Concordance(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

const CONCORDANCE_SAMPLES: usize = 1000;

/// Diffusion rate `κ`, fitness potential and its convex split.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kappa: f64,
    potential: FitnessPotential,
    split: ConvexSplit,
    concordance: f64,
}

impl ModelSpec {
    pub fn new(kappa: f64, potential: FitnessPotential) -> Result<Self, ModelError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(ModelError::InvalidKappa(kappa));
        }
        let split = convex_split(&potential)?;
        let concordance = estimate_concordance(&split.convex)?;
        Ok(Self {
            kappa,
            potential,
            split,
            concordance,
        })
    }

    /// Pure diffusion, `V ≡ 0`.
    pub fn diffusion(kappa: f64) -> Result<Self, ModelError> {
        Self::new(kappa, FitnessPotential::neutral())
    }

    /// Replaces the estimated `M_v` after checking
    /// `|V_c'''| ≤ M_v (V_c'')^{3/2}` on sample points.
    pub fn with_concordance(mut self, mv: f64) -> Result<Self, ModelError> {
        if !(mv >= 0.0 && mv.is_finite()) {
            return Err(ModelError::Concordance(format!("M_v must be finite and non-negative, got {mv}")));
        }
        let vc = &self.split.convex;
        for i in 0..=CONCORDANCE_SAMPLES {
            let x = i as f64 / CONCORDANCE_SAMPLES as f64;
            let lhs = vc.third_derivative(x).abs();
            let rhs = mv * vc.curvature(x).max(0.0).powf(1.5);
            if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
                return Err(ModelError::Concordance(format!(
                    "M_v = {mv} violates the bound at x = {x}: |V_c'''| = {lhs}, M_v (V_c'')^1.5 = {rhs}"
                )));
            }
        }
        self.concordance = mv;
        Ok(self)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn potential(&self) -> &FitnessPotential {
        &self.potential
    }

    pub fn split(&self) -> &ConvexSplit {
        &self.split
    }

    /// `M_v`, the self-concordance constant of `V_c`.
    pub fn concordance(&self) -> f64 {
        self.concordance
    }

    pub fn is_diffusion(&self) -> bool {
        self.potential.is_neutral()
    }
}

/// `M_v = 0` when `V_c''' ≡ 0`, otherwise the sampled maximum of
/// `|V_c'''| / (V_c'')^{3/2}` over points with `V_c'' > 1e-12`.
fn estimate_concordance(convex: &FitnessPotential) -> Result<f64, ModelError> {
    if convex.has_zero_third_derivative() {
        return Ok(0.0);
    }
    let mut mv: f64 = 0.0;
    for i in 0..=CONCORDANCE_SAMPLES {
        let x = i as f64 / CONCORDANCE_SAMPLES as f64;
        let third = convex.third_derivative(x).abs();
        let curvature = convex.curvature(x);
        if curvature > 1e-12 {
            mv = mv.max(third / curvature.powf(1.5));
        } else if third > 1e-12 {
            return Err(ModelError::Concordance(format!(
                "V_c'' vanishes at x = {x} while V_c''' = {third}; no finite M_v exists"
            )));
        }
    }
    Ok(mv)
}
