//! Reading a finished (or checkpointed) run directory.

use std::path::{Path, PathBuf};

use specpart::partition_opt::{OptState, Problem};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::driver::CHECKPOINT_FILE;
use crate::error::{CliError, CliResult};

pub struct RunDir {
    pub path: PathBuf,
    pub config: RunConfig,
    pub problem: Problem,
    pub state: OptState,
}

impl RunDir {
    pub fn open(path: &Path) -> CliResult<Self> {
        let file = path.join(CHECKPOINT_FILE);
        if !file.is_file() {
            return Err(CliError::RunDir {
                path: path.to_path_buf(),
                message: format!("no {CHECKPOINT_FILE} found"),
            });
        }
        let ckpt = Checkpoint::load(&file)?;
        let problem = ckpt.config.problem(ckpt.state.level)?;
        if problem.node_count() != ckpt.state.densities.node_count() {
            return Err(CliError::RunDir {
                path: path.to_path_buf(),
                message: "checkpoint does not match the discretization of its configuration".into(),
            });
        }
        Ok(RunDir {
            path: path.to_path_buf(),
            config: ckpt.config,
            problem,
            state: ckpt.state,
        })
    }
}
