//! Experiment drivers behind the command-line verbs: single runs, decay
//! traces, convergence studies and jump-location tables.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{
    default_jump_cases, steps_for, ConfigError, ExperimentConfig, JumpCase, Mode, DEFAULT_SPACE_LEVELS,
    DEFAULT_TIME_LEVELS,
};

use crate::diagnostics::{
    self, decay_rate_fit, dirac_masses, discrete_energy, dissipation_gap, energy_lower_bound, fmt_real, l1_error,
    l2_distance, numerical_jump, steady_state_diffusion, wasserstein_distance, DiagnosticsError, RecordRow, RunRecord,
};
use crate::model::{build_initial_map, theoretical_jump, FitnessPotential, InitialDensity, MassGrid, ModelError, ModelSpec, TransportMap};
use crate::solver::{SolverConfig, SolverError, SolverState};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Worst values of the per-step checks seen during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunChecks {
    /// Largest `|Δ h Σ (Φ + 𝓕)|` over one step, before clamping.
    pub max_conservation_drift: f64,
    /// `|Σ Δ|` of the same per-step changes over the whole run.
    pub net_conservation_drift: f64,
    /// Largest dissipation-inequality left side of a splitting step that
    /// clamped nothing new; `-inf` when there was none.
    pub max_dissipation_gap: f64,
    pub dissipation_steps: usize,
    /// Largest rise of the restricted energy over a step that clamped
    /// nothing new; `-inf` when there was none.
    pub max_energy_increase: f64,
    pub dirac_monotone: bool,
    /// Iterates whose restricted energy fell below its lower bound.
    pub energy_bound_violations: usize,
    pub stagnated_steps: usize,
}

impl Default for RunChecks {
    fn default() -> Self {
        Self {
            max_conservation_drift: 0.0,
            net_conservation_drift: 0.0,
            max_dissipation_gap: f64::NEG_INFINITY,
            dissipation_steps: 0,
            max_energy_increase: f64::NEG_INFINITY,
            dirac_monotone: true,
            energy_bound_violations: 0,
            stagnated_steps: 0,
        }
    }
}

/// Outcome of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub initial: TransportMap,
    pub state: SolverState,
    pub record: RunRecord,
    pub checks: RunChecks,
}

fn record_row(state: &SolverState, model: &ModelSpec, reference: Option<&TransportMap>, newton_iters: usize) -> RecordRow {
    let (l2, wasserstein) = match reference {
        Some(r) => (
            l2_distance(&state.map, r).unwrap_or(f64::NAN),
            wasserstein_distance(&state.map, r).unwrap_or(f64::NAN),
        ),
        None => (f64::NAN, f64::NAN),
    };
    let (clamp_left, clamp_right) = state.window.clamped_counts(state.map.grid().intervals());
    RecordRow {
        t: state.time,
        energy: discrete_energy(&state.map, model).value,
        conserved: state.conserved(),
        l2,
        wasserstein,
        clamp_left,
        clamp_right,
        newton_iters,
    }
}

/// Runs `steps` time steps from `initial`, recording every `stride`-th step
/// (and the first and last) and checking conservation, dissipation and
/// monotonicity of the Dirac masses along the way. Distances in the record
/// are taken to `reference` when given and are NaN otherwise.
pub fn simulate(
    initial: TransportMap,
    model: &ModelSpec,
    solver: &SolverConfig,
    steps: usize,
    stride: usize,
    reference: Option<&TransportMap>,
) -> Result<Simulation> {
    let grid = initial.grid();
    let mut state = SolverState::new(initial.clone());
    let mut record = RunRecord::new();
    let mut checks = RunChecks::default();
    let mut net = 0.0;
    let stride = stride.max(1);
    record.push(record_row(&state, model, reference, 0))?;
    let check_bound = |map: &TransportMap, active: usize| discrete_energy(map, model).value < energy_lower_bound(model, grid, active);
    if check_bound(&state.map, state.window.len()) {
        checks.energy_bound_violations += 1;
    }
    let mut pending = None;
    state.advance_with(model, solver, steps, |r| {
        let drift = r.after_conserved - r.before_conserved;
        net += drift;
        checks.max_conservation_drift = checks.max_conservation_drift.max(drift.abs());
        if !r.window_changed {
            if let Ok(gap) = dissipation_gap(r.before_map, &r.newton.split.map, model, solver.tau) {
                checks.max_dissipation_gap = checks.max_dissipation_gap.max(gap);
                checks.dissipation_steps += 1;
            }
        }
        let after = r.after;
        if !r.window_changed {
            let rise = discrete_energy(&after.map, model).value - discrete_energy(r.before_map, model).value;
            checks.max_energy_increase = checks.max_energy_increase.max(rise);
        }
        let (a0, b0) = dirac_masses(r.before_map, solver.clamp_tol);
        let (a1, b1) = dirac_masses(&after.map, solver.clamp_tol);
        if a1 < a0 || b1 < b0 {
            checks.dirac_monotone = false;
        }
        if check_bound(&after.map, after.window.len()) {
            checks.energy_bound_violations += 1;
        }
        if r.newton.euler.stagnated {
            checks.stagnated_steps += 1;
        }
        if after.step % stride == 0 || after.step == steps {
            let iters = r.newton.split.iterations + r.newton.euler.iterations;
            if let Err(e) = record.push(record_row(after, model, reference, iters)) {
                pending.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = pending {
        return Err(e.into());
    }
    checks.net_conservation_drift = net.abs();
    Ok(Simulation {
        initial,
        state,
        record,
        checks,
    })
}

fn initial_map(density: &str, n: usize) -> Result<TransportMap> {
    let density = InitialDensity::from_key(density)?;
    Ok(build_initial_map(&density, MassGrid::new(n)?)?)
}

/// The `run` verb: one simulation to `t_final`. Distances are measured to
/// the analytic steady state for pure diffusion and left empty otherwise.
pub fn run(config: &ExperimentConfig) -> Result<Simulation> {
    config.validate()?;
    let model = config.model()?;
    let initial = initial_map(&config.density, config.n)?;
    let reference = if model.is_diffusion() {
        Some(steady_state_diffusion(&initial, &model)?.to_map())
    } else {
        None
    };
    simulate(
        initial,
        &model,
        &config.solver(config.tau),
        config.steps(),
        config.stride,
        reference.as_ref(),
    )
}

/// Result of the `decay` verb.
#[derive(Debug)]
pub struct DecayResult {
    pub simulation: Simulation,
    pub reference: TransportMap,
    /// Negated slope of `ln ‖Φ − Φ*‖²` against time, or why no fit was possible.
    pub rate: std::result::Result<f64, DiagnosticsError>,
}

/// The `decay` verb: distances to the steady state, which is the analytic
/// step map for pure diffusion and otherwise the end of a run twice as
/// long, and the fitted exponential rate.
pub fn decay(config: &ExperimentConfig) -> Result<DecayResult> {
    config.validate()?;
    let model = config.model()?;
    let initial = initial_map(&config.density, config.n)?;
    let solver = config.solver(config.tau);
    let steps = config.steps();
    let reference = if model.is_diffusion() {
        steady_state_diffusion(&initial, &model)?.to_map()
    } else {
        let mut proxy = SolverState::new(initial.clone());
        proxy.advance(&model, &solver, 2 * steps)?;
        proxy.map
    };
    let simulation = simulate(initial, &model, &solver, steps, config.stride, Some(&reference))?;
    let rate = decay_rate_fit(&simulation.record, config.fit_window);
    Ok(DecayResult {
        simulation,
        reference,
        rate,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EocRow {
    /// `h` or `τ` of the level.
    pub parameter: f64,
    pub error: f64,
    /// Order against the previous row.
    pub eoc: Option<f64>,
}

fn final_map(density: &str, n: usize, model: &ModelSpec, solver: &SolverConfig, t_final: f64) -> Result<TransportMap> {
    let mut state = SolverState::new(initial_map(density, n)?);
    state.advance(model, solver, steps_for(t_final, solver.tau)?)?;
    Ok(state.map)
}

fn eoc_rows(levels: Vec<(f64, TransportMap)>, reference: &TransportMap) -> Result<Vec<EocRow>> {
    let errors = levels
        .iter()
        .map(|(p, map)| Ok((*p, l1_error(map, reference)?)))
        .collect::<Result<Vec<_>>>()?;
    let orders = diagnostics::eoc(&errors)?;
    Ok(errors
        .iter()
        .enumerate()
        .map(|(k, &(parameter, error))| EocRow {
            parameter,
            error,
            eoc: k.checked_sub(1).map(|j| orders[j]),
        })
        .collect())
}

/// The `eoc-space` verb: `L¹` errors at `t_final` on each grid of
/// `space_levels` against a run on `reference_n`, all with `reference_tau`.
pub fn eoc_space(config: &ExperimentConfig) -> Result<Vec<EocRow>> {
    let mut config = config.clone();
    config.mode = Mode::EocSpace;
    config.validate()?;
    let model = config.model()?;
    let solver = config.solver(config.reference_tau);
    let mut sizes = config.space_levels.clone();
    sizes.push(config.reference_n);
    let mut maps = sizes
        .par_iter()
        .map(|&n| final_map(&config.density, n, &model, &solver, config.t_final))
        .collect::<Result<Vec<_>>>()?;
    let reference = maps.pop().expect("reference run");
    let levels = config
        .space_levels
        .iter()
        .zip(maps)
        .map(|(&n, map)| (1.0 / n as f64, map))
        .collect();
    eoc_rows(levels, &reference)
}

/// The `eoc-time` verb: `L¹` errors at `t_final` for each step size of
/// `time_levels` against `reference_tau`, all on `reference_n`.
pub fn eoc_time(config: &ExperimentConfig) -> Result<Vec<EocRow>> {
    let mut config = config.clone();
    config.mode = Mode::EocTime;
    config.validate()?;
    let model = config.model()?;
    let mut taus = config.time_levels.clone();
    taus.push(config.reference_tau);
    let mut maps = taus
        .par_iter()
        .map(|&tau| final_map(&config.density, config.reference_n, &model, &config.solver(tau), config.t_final))
        .collect::<Result<Vec<_>>>()?;
    let reference = maps.pop().expect("reference run");
    let levels = config.time_levels.iter().copied().zip(maps).collect();
    eoc_rows(levels, &reference)
}

/// One row of a jump-location table.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRow {
    pub case: JumpCase,
    pub theoretical: f64,
    pub numerical: f64,
    pub error: f64,
    pub final_map: TransportMap,
    pub checks: RunChecks,
}

/// The `jump-table` verb: theoretical and computed jump locations at
/// `t_final` for every case.
pub fn jump_table(config: &ExperimentConfig) -> Result<Vec<JumpRow>> {
    config.validate()?;
    let solver = config.solver(config.tau);
    let steps = config.steps();
    config
        .jump_cases
        .par_iter()
        .map(|case| {
            let potential = FitnessPotential::linear_slope(case.alpha, case.beta)?;
            let density = InitialDensity::from_key(&case.density)?;
            let theoretical = theoretical_jump(&density, &potential, config.kappa)?;
            let model = config.model_for(potential)?;
            let initial = build_initial_map(&density, MassGrid::new(config.n)?)?;
            let sim = simulate(initial, &model, &solver, steps, steps.max(1), None)?;
            let numerical = numerical_jump(&sim.state.map);
            Ok(JumpRow {
                case: case.clone(),
                theoretical,
                numerical,
                error: (numerical - theoretical).abs(),
                final_map: sim.state.map,
                checks: sim.checks,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Diagnostics(e.into())
}

/// Writes `i, eta, phi` rows.
pub fn write_map(path: &Path, map: &TransportMap) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["i", "eta", "phi"]).map_err(csv_err)?;
    let grid = map.grid();
    for (i, &v) in map.values().iter().enumerate() {
        w.write_record([i.to_string(), fmt_real(grid.eta(i)), fmt_real(v)])
            .map_err(csv_err)?;
    }
    finish(path, w)
}

pub fn write_eoc(path: &Path, parameter: &str, rows: &[EocRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([parameter, "error", "eoc"]).map_err(csv_err)?;
    for r in rows {
        let eoc = r.eoc.map(fmt_real).unwrap_or_default();
        w.write_record([fmt_real(r.parameter), fmt_real(r.error), eoc])
            .map_err(csv_err)?;
    }
    finish(path, w)
}

pub fn write_jump_table(path: &Path, rows: &[JumpRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["density", "potential", "theoretical", "numerical", "error"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.case.density.clone(),
            r.case.potential_label(),
            fmt_real(r.theoretical),
            fmt_real(r.numerical),
            fmt_real(r.error),
        ])
        .map_err(csv_err)?;
    }
    finish(path, w)
}

fn write_record(path: &Path, record: &RunRecord) -> Result<()> {
    record.write_csv(create(path)?)?;
    Ok(())
}

/// Files written and one-line findings of a finished experiment.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Runs the configured mode and writes its CSV files into `output_dir`.
/// Nothing is written unless every simulation of the mode succeeded.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let dir = &config.output_dir;
    let mut report = Report::default();
    let mut out = |name: &str| {
        let path = dir.join(name);
        report.files.push(path.clone());
        path
    };
    let mut summary = Vec::new();
    match config.mode {
        Mode::Run => {
            let sim = run(config)?;
            make_dir(dir)?;
            write_record(&out("record.csv"), &sim.record)?;
            write_map(&out("final_map.csv"), &sim.state.map)?;
            summary.push(format!("steps: {}", sim.state.step));
            summary.push(format!("jump location: {:.6}", numerical_jump(&sim.state.map)));
            summary.push(format!("intermediate nodes: {}", sim.state.window.len()));
            summary.push(format!("max conservation drift per step: {:.3e}", sim.checks.max_conservation_drift));
        }
        Mode::Decay => {
            let d = decay(config)?;
            make_dir(dir)?;
            write_record(&out("decay.csv"), &d.simulation.record)?;
            write_map(&out("steady_map.csv"), &d.reference)?;
            summary.push(match &d.rate {
                Ok(rate) => format!("decay rate of squared L2 distance: {rate:.6}"),
                Err(e) => format!("no decay rate: {e}"),
            });
        }
        Mode::EocSpace => {
            let rows = eoc_space(config)?;
            make_dir(dir)?;
            write_eoc(&out("eoc_space.csv"), "h", &rows)?;
            summary.extend(rows.iter().map(|r| format!("h = {:.6}: error {:.4e}, eoc {}", r.parameter, r.error, fmt_eoc(r))));
        }
        Mode::EocTime => {
            let rows = eoc_time(config)?;
            make_dir(dir)?;
            write_eoc(&out("eoc_time.csv"), "tau", &rows)?;
            summary.extend(rows.iter().map(|r| format!("tau = {}: error {:.4e}, eoc {}", r.parameter, r.error, fmt_eoc(r))));
        }
        Mode::JumpTable => {
            let rows = jump_table(config)?;
            make_dir(dir)?;
            write_jump_table(&out("jump_table.csv"), &rows)?;
            summary.extend(rows.iter().map(|r| {
                format!(
                    "{}, V' = {}: theoretical {:.4}, numerical {:.4}, error {:.4}",
                    r.case.density,
                    r.case.potential_label(),
                    r.theoretical,
                    r.numerical,
                    r.error
                )
            }));
        }
    }
    report.summary = summary;
    Ok(report)
}

fn fmt_eoc(r: &EocRow) -> String {
    r.eoc.map(|e| format!("{e:.3}")).unwrap_or_else(|| "-".into())
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
