//! The subcommands. Each one resolves the config, does its work, writes its
//! outputs and a manifest into the output directory and returns the paths
//! written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use flexhose::control::GainSchedule;
use flexhose::flatness::residual;
use flexhose::linearization::{linearize, Layout, LinearizedSystem};
use flexhose::sim::{self, lqr_schedule, Controller, Reference, Scenario};
use flexhose::SystemParams;

use crate::config::{Config, ControllerKind, Mode, Overrides};
use crate::output::{self, RunManifest};
use crate::CliError;

/// A loaded config with overrides applied.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config_path: PathBuf,
    pub config: Config,
}

impl Invocation {
    pub fn load(config_path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = Config::load(config_path)?;
        config.apply(overrides);
        Ok(Self { config_path: config_path.to_path_buf(), config })
    }

    fn invalid(&self, message: impl Into<String>) -> CliError {
        CliError::Config { path: self.config_path.clone(), message: message.into() }
    }

    fn params(&self) -> Result<SystemParams, CliError> {
        self.config.params(&self.config_path)
    }

    fn reference(&self, params: &SystemParams) -> Result<Reference, CliError> {
        self.config.reference(params, &self.config_path)
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.config.output.dir.clone();
        output::ensure_dir(&dir)?;
        Ok(dir)
    }

    fn finish(&self, command: &str, outputs: Vec<PathBuf>, started: Instant) -> RunManifest {
        let mut m = RunManifest::new(command, &self.config_path, &self.config);
        m.outputs = outputs;
        m.wall_seconds = started.elapsed().as_secs_f64();
        m
    }
}

/// Riccati synthesis from the config weights and grid.
pub fn synthesize(inv: &Invocation, params: &SystemParams, reference: &Reference) -> Result<GainSchedule, CliError> {
    let c = &inv.config.controller;
    Ok(lqr_schedule(params, reference, &c.weights, inv.config.horizon(), c.grid_dt, c.substeps)?)
}

fn load_schedule(inv: &Invocation, params: &SystemParams, path: &Path) -> Result<GainSchedule, CliError> {
    let s = GainSchedule::read_csv(path)?;
    let expected = (params.input_dim(), params.error_dim());
    if s.k[0].shape() != expected {
        return Err(inv.invalid(format!(
            "gain file {} holds {:?} gains, this system needs {:?}",
            path.display(),
            s.k[0].shape(),
            expected
        )));
    }
    Ok(s)
}

pub fn controller(inv: &Invocation, params: &SystemParams, reference: &Reference) -> Result<Controller, CliError> {
    let c = &inv.config.controller;
    Ok(match c.kind {
        ControllerKind::Zero => Controller::Zero,
        ControllerKind::OpenLoop => Controller::OpenLoop,
        ControllerKind::Feedforward => Controller::Feedforward(c.feedforward),
        ControllerKind::Lqr => {
            if inv.config.tethered() {
                return Err(inv.invalid("the lqr controller is not available in tethered mode"));
            }
            match &c.gain_file {
                Some(path) => Controller::Lqr(load_schedule(inv, params, path)?),
                None => Controller::Lqr(synthesize(inv, params, reference)?),
            }
        }
    })
}

pub fn scenario(inv: &Invocation) -> Result<Scenario, CliError> {
    let cfg = &inv.config;
    if !(cfg.output.log_rate > 0.0) {
        return Err(inv.invalid(format!("[output] log_rate must be positive, got {}", cfg.output.log_rate)));
    }
    let params = inv.params()?;
    let reference = inv.reference(&params)?;
    let controller = controller(inv, &params, &reference)?;
    let sc = Scenario {
        params,
        reference,
        controller,
        initial_error: cfg.scenario.initial_error,
        dt: cfg.scenario.dt,
        duration: cfg.scenario.duration,
        log_interval: cfg.log_interval(),
        seed: cfg.scenario.seed,
        tethered: cfg.tethered(),
    };
    sc.check()?;
    Ok(sc)
}

/// Runs the scenario and writes `log.csv`. A divergent run still writes its
/// log and manifest before reporting [`CliError::Diverged`].
pub fn simulate(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let sc = scenario(inv)?;
    let outcome = sim::run(&sc)?;
    let dir = inv.out_dir()?;
    let log = dir.join("log.csv");
    output::write_csv(&log, &output::log_header(&sc.params), outcome.records.iter().map(output::log_row))?;
    let mut m = inv.finish("simulate", vec![log], started);
    m.diverged = Some(outcome.diverged);
    let manifest = m.write(&dir)?;
    if outcome.diverged {
        return Err(CliError::Diverged { t: outcome.t_end });
    }
    let mut out = m.outputs;
    out.push(manifest);
    Ok(out)
}

fn grid(t1: f64, dt: f64) -> Result<Vec<f64>, String> {
    if !(dt > 0.0 && dt.is_finite()) || !(t1 >= 0.0 && t1.is_finite()) {
        return Err(format!("bad sample grid [0, {t1}] step {dt}"));
    }
    let steps = (t1 / dt).round() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

/// Samples the reference on `[0, duration]` every `plan_dt` and writes
/// `plan.csv`.
pub fn plan(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let cfg = &inv.config;
    if cfg.scenario.mode == Mode::Freefall {
        return Err(inv.invalid("plan needs a setpoint, trajectory or tethered scenario"));
    }
    let params = inv.params()?;
    let reference = inv.reference(&params)?;
    let times = grid(cfg.scenario.duration, cfg.output.plan_dt).map_err(|e| inv.invalid(e))?;
    let mut rows = Vec::with_capacity(times.len());
    for t in times {
        let p = reference.at(t)?;
        let r = residual(&params, &p)?;
        rows.push(output::plan_row(&p, r));
    }
    let dir = inv.out_dir()?;
    let path = dir.join("plan.csv");
    output::write_csv(&path, &output::plan_header(&params), rows)?;
    write_manifest(inv, "plan", vec![path], started, &dir)
}

/// Linear models sampled every `linearize_dt`, written as `linearization.csv`.
pub fn linearize_cmd(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let cfg = &inv.config;
    let params = inv.params()?;
    let reference = inv.reference(&params)?;
    let times = grid(cfg.scenario.duration, cfg.output.linearize_dt).map_err(|e| inv.invalid(e))?;
    let points = times.iter().map(|&t| reference.at(t)).collect::<Result<Vec<_>, _>>()?;
    let models = points.iter().map(|p| linearize(&params, p)).collect::<Result<Vec<_>, _>>()?;
    let sys = LinearizedSystem { times, models, points };
    let dir = inv.out_dir()?;
    let path = dir.join("linearization.csv");
    output::write_csv(&path, &output::LINEARIZATION_HEADER, output::linearization_rows(&params, &sys))?;
    log::info!("error state dimension {}", Layout::new(&params).dim());
    write_manifest(inv, "linearize", vec![path], started, &dir)
}

/// Writes the gain schedule to `gain_file`, or `gains.csv` in the output
/// directory.
pub fn lqr_synth(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let params = inv.params()?;
    if inv.config.tethered() {
        return Err(inv.invalid("the lqr controller is not available in tethered mode"));
    }
    let reference = inv.reference(&params)?;
    let schedule = synthesize(inv, &params, &reference)?;
    let dir = inv.out_dir()?;
    let path = inv.config.controller.gain_file.clone().unwrap_or_else(|| dir.join("gains.csv"));
    schedule.write_csv(&path)?;
    log::info!(
        "P(0) min eigenvalue {:e}, symmetry defect {:e}",
        schedule.min_eigenvalue(),
        schedule.max_symmetry_defect
    );
    write_manifest(inv, "lqr-synth", vec![path], started, &dir)
}

/// Wall time per link count on the fixed benchmark hose; writes
/// `benchmark.csv`.
pub fn benchmark(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let cfg = &inv.config;
    if cfg.output.benchmark_links.is_empty() {
        return Err(inv.invalid("[output] benchmark_links is empty"));
    }
    let rows = sim::benchmark(
        &cfg.output.benchmark_links,
        cfg.output.benchmark_duration,
        cfg.scenario.dt,
        cfg.scenario.seed,
    )?;
    let dir = inv.out_dir()?;
    let path = dir.join("benchmark.csv");
    output::write_csv(&path, &output::BENCHMARK_HEADER, rows.iter().map(output::benchmark_row))?;
    write_manifest(inv, "benchmark", vec![path], started, &dir)
}

fn write_manifest(
    inv: &Invocation,
    command: &str,
    outputs: Vec<PathBuf>,
    started: Instant,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let m = inv.finish(command, outputs, started);
    let manifest = m.write(dir)?;
    let mut out = m.outputs;
    out.push(manifest);
    Ok(out)
}
