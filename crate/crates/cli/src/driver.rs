//! `run` and `resume`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use specpart::partition_opt::{
    initial_state, random_init, refine, run, Control, OptState, StopReason,
};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::{write_energy_trace, RunReport, Timing};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "energy.csv";
pub const CONFIG_FILE: &str = "config.toml";

/// Command-line values that take precedence over the configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, mut config: RunConfig) -> CliResult<RunConfig> {
        if let Some(s) = self.seed {
            config.optimization.seed = s;
        }
        if let Some(m) = self.max_iter {
            config.optimization.max_iter = m;
        }
        if let Some(o) = &self.output {
            config.output.directory = o.clone();
        }
        config.into_effective()
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub report: RunReport,
}

/// Asked after every iteration whether to stop; a stop writes a checkpoint
/// and returns [`CliError::Interrupted`].
pub type StopCheck<'a> = &'a dyn Fn(&OptState) -> bool;

pub fn run_config(path: &Path, overrides: &Overrides, stop: StopCheck) -> CliResult<RunOutcome> {
    let config = overrides.apply(RunConfig::load(path)?)?;
    execute(config, None, stop)
}

pub fn resume(path: &Path, overrides: &Overrides, stop: StopCheck) -> CliResult<RunOutcome> {
    let ckpt = Checkpoint::load(path)?;
    let mut config = overrides.apply(ckpt.config.clone())?;
    // The output directory defaults to the one holding the checkpoint.
    if overrides.output.is_none() {
        if let Some(dir) = path.parent() {
            config.output.directory = dir.to_path_buf();
        }
    }
    execute(config, Some(ckpt), stop)
}

struct Progress<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    level_energies: Vec<f64>,
    elapsed0: f64,
    clock: Instant,
}

impl Progress<'_> {
    fn checkpoint(&self, state: &OptState) -> CliResult<PathBuf> {
        let path = self.dir.join(CHECKPOINT_FILE);
        Checkpoint {
            config: self.config.clone(),
            level_energies: self.level_energies.clone(),
            elapsed: self.elapsed0 + self.clock.elapsed().as_secs_f64(),
            state: state.clone(),
        }
        .save(&path)?;
        Ok(path)
    }
}

/// Runs (or continues) every continuation level and writes the artifacts.
pub fn execute(config: RunConfig, resume_from: Option<Checkpoint>, stop: StopCheck) -> CliResult<RunOutcome> {
    let start = Instant::now();
    let dir = config.output.directory.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    std::fs::write(dir.join(CONFIG_FILE), config.to_toml()).map_err(|e| CliError::io(&dir, e))?;
    let settings = config.settings();
    let levels = config.level_count();

    let (mut problem, mut state, level_energies, elapsed0) = match resume_from {
        Some(c) => (config.problem(c.state.level)?, c.state, c.level_energies, c.elapsed),
        None => {
            let problem = config.problem(0)?;
            let init = random_init(
                config.optimization.cells,
                &problem,
                settings.mode.is_multiphase(),
                config.optimization.seed,
            )?;
            let state = initial_state(&problem, init, &settings, 0)?;
            (problem, state, Vec::new(), 0.0)
        }
    };
    let mut progress = Progress {
        config: &config,
        dir: &dir,
        level_energies,
        elapsed0,
        clock: start,
    };
    let setup = start.elapsed().as_secs_f64();

    let interval = config.output.checkpoint_interval;
    let mut stop_reason = StopReason::MaxIterations;
    loop {
        // A checkpoint taken after a level finished already carries its energy.
        if progress.level_energies.len() <= state.level {
            let mut failure = None;
            let mut observer = |s: &OptState| {
                if stop(s) {
                    return Control::Stop;
                }
                if interval > 0 && s.iteration % interval == 0 {
                    if let Err(e) = progress.checkpoint(s) {
                        failure = Some(e);
                        return Control::Stop;
                    }
                }
                Control::Continue
            };
            stop_reason = run(&problem, &settings, &mut state, &mut observer)?;
            if let Some(e) = failure {
                return Err(e);
            }
            if stop_reason == StopReason::Interrupted {
                return Err(CliError::Interrupted(progress.checkpoint(&state)?));
            }
            progress.level_energies.push(state.energy());
        }
        if state.level + 1 >= levels {
            break;
        }
        let next = config.problem(state.level + 1)?;
        let dens = refine(
            &state.densities,
            problem.as_grid().expect("continuation runs on grids"),
            next.as_grid().expect("continuation runs on grids"),
        )?;
        let mut fresh = initial_state(&next, dens, &settings, state.level + 1)?;
        fresh.history = std::mem::take(&mut state.history);
        fresh.reinitialized.splice(0..0, state.reinitialized.drain(..));
        state = fresh;
        problem = next;
    }
    let optimization = start.elapsed().as_secs_f64() - setup;

    let out_start = Instant::now();
    progress.checkpoint(&state)?;
    write_energy_trace(&state.history, &dir.join(TRACE_FILE))?;
    let mut timing = Timing {
        setup,
        optimization,
        output: 0.0,
        total: 0.0,
    };
    timing.output = out_start.elapsed().as_secs_f64();
    timing.total = elapsed0 + start.elapsed().as_secs_f64();
    let report = RunReport::build(&config, &problem, &state, &progress.level_energies, stop_reason, timing);
    report.save(&dir.join(REPORT_FILE))?;
    Ok(RunOutcome {
        directory: dir,
        report,
    })
}
