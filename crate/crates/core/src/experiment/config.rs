use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{FitnessPotential, ModelError, ModelSpec};
use crate::solver::{Scheme, SolverConfig};

/// Parse or validation failure; `line` is 1-based, 0 for whole-file problems.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", if *.line > 0 { format!("line {}: ", .line) } else { String::new() })]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self::at(0, message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    EocSpace,
    EocTime,
    JumpTable,
    Decay,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "run" => Ok(Mode::Run),
            "eoc-space" => Ok(Mode::EocSpace),
            "eoc-time" => Ok(Mode::EocTime),
            "jump-table" => Ok(Mode::JumpTable),
            "decay" => Ok(Mode::Decay),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Run => "run",
            Mode::EocSpace => "eoc-space",
            Mode::EocTime => "eoc-time",
            Mode::JumpTable => "jump-table",
            Mode::Decay => "decay",
        })
    }
}

/// One row of a jump table: density key and `V'(x) = αx + β`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpCase {
    pub density: String,
    pub alpha: f64,
    pub beta: f64,
}

impl JumpCase {
    pub fn new(density: &str, alpha: f64, beta: f64) -> Self {
        Self {
            density: density.to_string(),
            alpha,
            beta,
        }
    }

    /// `V'` written as `αx+β`, e.g. `2` or `-3x+1`.
    pub fn potential_label(&self) -> String {
        slope_label(&[self.beta, self.alpha])
    }
}

fn slope_label(coeffs: &[f64]) -> String {
    let mut terms = Vec::new();
    for (k, &c) in coeffs.iter().enumerate().rev() {
        if c == 0.0 {
            continue;
        }
        let coef = if k > 0 && c == 1.0 {
            String::new()
        } else if k > 0 && c == -1.0 {
            "-".to_string()
        } else {
            format!("{c}")
        };
        let term = match k {
            0 => coef,
            1 => format!("{coef}x"),
            _ => format!("{coef}x^{k}"),
        };
        terms.push(term);
    }
    if terms.is_empty() {
        return "0".into();
    }
    terms.join("+").replace("+-", "-")
}

pub const DEFAULT_SPACE_LEVELS: [usize; 5] = [50, 100, 200, 400, 800];
pub const DEFAULT_TIME_LEVELS: [f64; 5] = [0.016, 0.008, 0.004, 0.002, 0.001];

pub fn default_jump_cases() -> Vec<JumpCase> {
    let mut cases = Vec::new();
    for density in ["x^2", "bimodal", "indicator"] {
        cases.push(JumpCase::new(density, 0.0, 2.0));
        cases.push(JumpCase::new(density, -3.0, 1.0));
    }
    cases
}

/// Everything needed to run one CLI verb.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub density: String,
    /// Coefficients of `V'` in ascending powers.
    pub slope: Vec<f64>,
    pub kappa: f64,
    pub n: usize,
    pub tau: f64,
    pub t_final: f64,
    pub output_dir: PathBuf,
    /// Record every `stride`-th step (plus the initial state).
    pub stride: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub lambda_prime: f64,
    pub clamp_tol: f64,
    pub concordance: Option<f64>,
    pub space_levels: Vec<usize>,
    pub time_levels: Vec<f64>,
    pub reference_n: usize,
    pub reference_tau: f64,
    pub jump_cases: Vec<JumpCase>,
    /// Time interval for the decay fit; the plateau cut applies when unset.
    pub fit_window: Option<(f64, f64)>,
    /// Stepping scheme; `split` accepts the convex-splitting step alone.
    pub scheme: Scheme,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Run,
            density: "uniform".into(),
            slope: Vec::new(),
            kappa: 2.0,
            n: 999,
            tau: 1e-3,
            t_final: 15.0,
            output_dir: PathBuf::from("."),
            stride: 1,
            newton_tol: 1e-9,
            max_newton_iters: 100,
            lambda_prime: 0.5,
            clamp_tol: 1e-10,
            concordance: None,
            space_levels: DEFAULT_SPACE_LEVELS.to_vec(),
            time_levels: DEFAULT_TIME_LEVELS.to_vec(),
            reference_n: 1600,
            reference_tau: 5e-4,
            jump_cases: default_jump_cases(),
            fit_window: None,
            scheme: Scheme::Euler,
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::at(line, format!("`{key}` expects a number, got `{value}`")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|item| parse_num(line, key, item.trim()))
        .collect()
}

fn parse_jump_cases(line: usize, value: &str) -> Result<Vec<JumpCase>, ConfigError> {
    value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            match parts.as_slice() {
                [density, alpha, beta] => Ok(JumpCase::new(
                    density,
                    parse_num(line, "cases", alpha)?,
                    parse_num(line, "cases", beta)?,
                )),
                _ => Err(ConfigError::at(
                    line,
                    format!("`cases` entries look like density:alpha:beta, got `{}`", item.trim()),
                )),
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut seen = std::collections::HashSet::new();
        let (mut alpha, mut beta) = (None, None);
        let mut coefficients = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
            }
            match key {
                "mode" => config.mode = value.parse().map_err(|e: String| ConfigError::at(line, e))?,
                "density" => config.density = value.to_string(),
                "alpha" => alpha = Some(parse_num(line, key, value)?),
                "beta" => beta = Some(parse_num(line, key, value)?),
                "potential" => coefficients = Some(parse_list(line, key, value)?),
                "kappa" => config.kappa = parse_num(line, key, value)?,
                "n" => config.n = parse_num(line, key, value)?,
                "tau" => config.tau = parse_num(line, key, value)?,
                "t_final" => config.t_final = parse_num(line, key, value)?,
                "output_dir" => config.output_dir = PathBuf::from(value),
                "stride" => config.stride = parse_num(line, key, value)?,
                "newton_tol" => config.newton_tol = parse_num(line, key, value)?,
                "max_newton_iters" => config.max_newton_iters = parse_num(line, key, value)?,
                "lambda_prime" => config.lambda_prime = parse_num(line, key, value)?,
                "clamp_tol" => config.clamp_tol = parse_num(line, key, value)?,
                "concordance" => config.concordance = Some(parse_num(line, key, value)?),
                "space_levels" => config.space_levels = parse_list(line, key, value)?,
                "time_levels" => config.time_levels = parse_list(line, key, value)?,
                "reference_n" => config.reference_n = parse_num(line, key, value)?,
                "reference_tau" => config.reference_tau = parse_num(line, key, value)?,
                "cases" => config.jump_cases = parse_jump_cases(line, value)?,
                "fit_window" => match parse_list::<f64>(line, key, value)?.as_slice() {
                    &[t0, t1] if t0 < t1 => config.fit_window = Some((t0, t1)),
                    _ => return Err(ConfigError::at(line, "`fit_window` expects two increasing times")),
                },
                "scheme" => {
                    config.scheme = match value {
                        "euler" => Scheme::Euler,
                        "split" => Scheme::Split,
                        _ => return Err(ConfigError::at(line, format!("`scheme` is `euler` or `split`, got `{value}`"))),
                    }
                }
                other => return Err(ConfigError::at(line, format!("unknown key `{other}`"))),
            }
        }
        if coefficients.is_some() && (alpha.is_some() || beta.is_some()) {
            return Err(ConfigError::global("give either `potential` or `alpha`/`beta`, not both"));
        }
        config.slope = match coefficients {
            Some(c) => c,
            None => vec![beta.unwrap_or(0.0), alpha.unwrap_or(0.0)],
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks ranges and that the final time is a whole number of steps.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::global(m));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.stride == 0 {
            return fail("stride must be at least 1".into());
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return fail(format!("t_final must be non-negative, got {}", self.t_final));
        }
        let taus: Vec<f64> = match self.mode {
            Mode::EocTime => self.time_levels.iter().copied().chain([self.reference_tau]).collect(),
            Mode::EocSpace => vec![self.tau, self.reference_tau],
            _ => vec![self.tau],
        };
        for tau in taus {
            if !(tau > 0.0 && tau.is_finite()) {
                return fail(format!("time steps must be positive, got {tau}"));
            }
            steps_for(self.t_final, tau)?;
        }
        if matches!(self.mode, Mode::EocSpace | Mode::EocTime) && self.reference_n < 2 {
            return fail(format!("reference_n must be at least 2, got {}", self.reference_n));
        }
        if self.mode == Mode::EocSpace {
            if self.space_levels.is_empty() {
                return fail("space_levels is empty".into());
            }
            if let Some(&bad) = self
                .space_levels
                .iter()
                .find(|&&n| n < 2 || n > self.reference_n || self.reference_n % n != 0)
            {
                return fail(format!("level n = {bad} does not divide reference_n = {}", self.reference_n));
            }
        }
        if self.mode == Mode::EocTime && self.time_levels.is_empty() {
            return fail("time_levels is empty".into());
        }
        if self.mode == Mode::JumpTable && self.jump_cases.is_empty() {
            return fail("cases is empty".into());
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<FitnessPotential, ModelError> {
        FitnessPotential::from_slope_coefficients(&self.slope)
    }

    pub fn potential_label(&self) -> String {
        slope_label(&self.slope)
    }

    pub fn model(&self) -> Result<ModelSpec, ModelError> {
        self.model_for(self.potential()?)
    }

    pub fn model_for(&self, potential: FitnessPotential) -> Result<ModelSpec, ModelError> {
        let model = ModelSpec::new(self.kappa, potential)?;
        match self.concordance {
            Some(mv) => model.with_concordance(mv),
            None => Ok(model),
        }
    }

    pub fn solver(&self, tau: f64) -> SolverConfig {
        SolverConfig {
            tau,
            newton_abs_tol: self.newton_tol,
            max_newton_iters: self.max_newton_iters,
            lambda_prime: self.lambda_prime,
            clamp_tol: self.clamp_tol,
            stepping: self.scheme,
            ..SolverConfig::new(tau)
        }
    }

    pub fn steps(&self) -> usize {
        steps_for(self.t_final, self.tau).expect("validated config")
    }
}

/// Number of steps of size `tau` reaching `t_final`, which must be a whole
/// multiple of `tau` to within 1e-12.
pub fn steps_for(t_final: f64, tau: f64) -> Result<usize, ConfigError> {
    let steps = (t_final / tau).round();
    if (steps * tau - t_final).abs() > 1e-12 {
        return Err(ConfigError::global(format!(
            "t_final = {t_final} is not a multiple of tau = {tau}"
        )));
    }
    Ok(steps as usize)
}
