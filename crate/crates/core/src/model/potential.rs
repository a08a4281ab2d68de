use super::ModelError;

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(self.coeffs.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Self::new(coeffs)
    }

    fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..len)
                .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }
}

const SAMPLES: usize = 2048;

/// Maximum of `g` on `[0, 1]`: dense sampling followed by golden-section
/// refinement around the best sample.
pub(crate) fn max_on_unit_interval<G: Fn(f64) -> f64>(g: G) -> f64 {
    let (mut best_i, mut best) = (0, g(0.0));
    for i in 1..=SAMPLES {
        let v = g(i as f64 / SAMPLES as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let step = 1.0 / SAMPLES as f64;
    let mut lo = (best_i as f64 - 1.0).max(0.0) * step;
    let mut hi = (best_i as f64 + 1.0).min(SAMPLES as f64) * step;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..60 {
        if g1 > g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        }
    }
    best.max(g1).max(g2)
}

/// Fitness potential `V` on `[0, 1]` with `V(0) = 0`, built from the
/// coefficients of its derivative `V'`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessPotential {
    value: Polynomial,
    slope: Polynomial,
    curvature: Polynomial,
    third: Polynomial,
    sup_value: f64,
    sup_slope: f64,
}

impl FitnessPotential {
    /// `slope_coeffs[k]` is the coefficient of `x^k` in `V'(x)`.
    pub fn from_slope_coefficients(slope_coeffs: &[f64]) -> Result<Self, ModelError> {
        if let Some(&c) = slope_coeffs.iter().find(|c| !c.is_finite()) {
            return Err(ModelError::InvalidPotential(format!(
                "non-finite coefficient {c} gives unbounded derivatives"
            )));
        }
        Ok(Self::from_value(Polynomial::new(slope_coeffs.to_vec()).antiderivative()))
    }

    /// `V'(x) = alpha * x + beta`.
    pub fn linear_slope(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        Self::from_slope_coefficients(&[beta, alpha])
    }

    pub fn neutral() -> Self {
        Self::from_value(Polynomial::zero())
    }

    fn from_value(value: Polynomial) -> Self {
        let slope = value.derivative();
        let curvature = slope.derivative();
        let third = curvature.derivative();
        let sup_value = max_on_unit_interval(|x| value.eval(x).abs());
        let sup_slope = max_on_unit_interval(|x| slope.eval(x).abs());
        Self {
            value,
            slope,
            curvature,
            third,
            sup_value,
            sup_slope,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value.eval(x)
    }

    /// `V'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        self.slope.eval(x)
    }

    /// `V''(x)`.
    pub fn curvature(&self, x: f64) -> f64 {
        self.curvature.eval(x)
    }

    /// `V'''(x)`.
    pub fn third_derivative(&self, x: f64) -> f64 {
        self.third.eval(x)
    }

    pub fn value_polynomial(&self) -> &Polynomial {
        &self.value
    }

    pub fn slope_polynomial(&self) -> &Polynomial {
        &self.slope
    }

    /// `M = sup |V|` on `[0, 1]`.
    pub fn sup_value(&self) -> f64 {
        self.sup_value
    }

    /// `M₁ = sup |V'|` on `[0, 1]`.
    pub fn sup_slope(&self) -> f64 {
        self.sup_slope
    }

    /// True for the pure diffusion case `V' ≡ 0`.
    pub fn is_neutral(&self) -> bool {
        self.slope.is_zero()
    }

    pub fn has_zero_third_derivative(&self) -> bool {
        self.third.is_zero()
    }

    fn add_quadratic(&self, c: f64) -> Self {
        Self::from_value(self.value.add(&Polynomial::new(vec![0.0, 0.0, 0.5 * c])))
    }
}

/// `V = V_c − V_e` with both parts convex on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSplit {
    pub convex: FitnessPotential,
    pub concave: FitnessPotential,
}

/// Splits `V` as `V_c = V + c x²/2`, `V_e = c x²/2` with
/// `c = max(0, −min V'')`; linear terms stay in `V_c`.
///
/// When `V''' ≢ 0` the shift is raised by one so that `V_c'' ≥ 1` and
/// `|V_c'''| ≤ M_v (V_c'')^{3/2}` holds with a finite `M_v`.
pub fn convex_split(potential: &FitnessPotential) -> Result<ConvexSplit, ModelError> {
    let min_curvature = -max_on_unit_interval(|x| -potential.curvature(x));
    if !min_curvature.is_finite() {
        return Err(ModelError::InvalidPotential(
            "second derivative is unbounded on [0, 1]".into(),
        ));
    }
    let mut c = (-min_curvature).max(0.0);
    if !potential.has_zero_third_derivative() {
        c += 1.0;
    }
    if c == 0.0 {
        return Ok(ConvexSplit {
            convex: potential.clone(),
            concave: FitnessPotential::neutral(),
        });
    }
    Ok(ConvexSplit {
        convex: potential.add_quadratic(c),
        concave: FitnessPotential::neutral().add_quadratic(c),
    })
}
