//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specpart::eigensolve::{EigOptions, PreconditionerKind};
use specpart::grid::{build_grid, BoundaryMode, DomainShape, DomainSpec, Grid};
use specpart::partition_opt::{Mode, OptSettings, Problem, VanishPolicy, DEFAULT_PENALTY, SURFACE_PENALTY};
use specpart::surface_fem::{generate_sphere, generate_torus, load_mesh, TriMesh};

use crate::error::{CliError, CliResult};

/// Where the densities live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    /// A box, optionally masked by a shape.
    Grid {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default)]
        shape: DomainShape,
    },
    Sphere { subdivisions: u32 },
    Torus {
        major: f64,
        minor: f64,
        nu: usize,
        nv: usize,
    },
    /// OFF or OBJ file; relative paths are taken from the config's directory.
    Mesh { path: PathBuf },
}

impl DomainConfig {
    pub fn is_grid(&self) -> bool {
        matches!(self, DomainConfig::Grid { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes along the first axis at the final level.
    pub resolution: usize,
    pub boundary: BoundaryMode,
    /// Resolutions of the earlier continuation levels, coarsest first.
    pub continuation: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            boundary: BoundaryMode::Dirichlet,
            continuation: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    pub cells: usize,
    /// 1e4 on grids and 1e3 on surfaces when absent.
    pub penalty: Option<f64>,
    /// Neighbor order; 6 on grids and 5 on surfaces when absent.
    pub order: Option<usize>,
    pub threshold: f64,
    /// `1/penalty` when absent.
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub step_growth: f64,
    /// Iteration cap per continuation level.
    pub max_iter: usize,
    pub seed: u64,
    pub mode: Mode,
    pub vanish_policy: VanishPolicy,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        let s = OptSettings::default();
        Self {
            cells: 2,
            penalty: None,
            order: None,
            threshold: s.threshold,
            initial_step: None,
            min_step: s.min_step,
            step_growth: s.step_growth,
            max_iter: s.max_iter,
            seed: 0,
            mode: Mode::Partition,
            vanish_policy: VanishPolicy::Abort,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigensolverConfig {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl Default for EigensolverConfig {
    fn default() -> Self {
        let e = EigOptions::default();
        Self {
            tol: e.tol,
            max_iter: e.max_iter,
            preconditioner: e.preconditioner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Iterations between checkpoints; 0 disables periodic checkpoints.
    pub checkpoint_interval: usize,
    /// Run the classification after optimizing.
    pub classify: bool,
    /// Write plot data after optimizing.
    pub export: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            checkpoint_interval: 25,
            classify: true,
            export: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    pub level: f64,
    pub signature_len: usize,
    pub epsilon: f64,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        Self {
            level: specpart::classify::DEFAULT_LEVEL,
            signature_len: specpart::classify::DEFAULT_SIGNATURE_LEN,
            epsilon: specpart::classify::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub optimization: OptimizationConfig,
    #[serde(default)]
    pub eigensolver: EigensolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub classification: ClassificationConfig,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, resolves relative mesh paths against the file's directory,
    /// fills defaults and validates.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let DomainConfig::Mesh { path: mesh } = &mut cfg.domain {
            if mesh.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh = dir.join(&*mesh);
                }
            }
        }
        cfg.into_effective()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Fills every optional field with its resolved value and validates.
    pub fn into_effective(mut self) -> CliResult<Self> {
        let o = &mut self.optimization;
        if o.order.is_none() {
            o.order = Some(if self.domain.is_grid() { 6 } else { 5 });
        }
        let penalty = *o.penalty.get_or_insert(if self.domain.is_grid() {
            DEFAULT_PENALTY
        } else {
            SURFACE_PENALTY
        });
        if o.initial_step.is_none() && penalty > 0.0 {
            o.initial_step = Some(1.0 / penalty);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> CliResult<()> {
        let o = &self.optimization;
        if o.cells == 0 {
            return Err(invalid("optimization.cells", "must be at least 1"));
        }
        if o.penalty.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return Err(invalid("optimization.penalty", "must be positive"));
        }
        if o.order == Some(0) {
            return Err(invalid("optimization.order", "must be at least 1"));
        }
        if !(o.threshold >= 0.0 && o.threshold < 1.0) {
            return Err(invalid("optimization.threshold", "must lie in [0, 1)"));
        }
        if o.initial_step.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return Err(invalid("optimization.initial_step", "must be positive"));
        }
        if !(o.min_step > 0.0) {
            return Err(invalid("optimization.min_step", "must be positive"));
        }
        if !(o.step_growth >= 1.0 && o.step_growth.is_finite()) {
            return Err(invalid("optimization.step_growth", "must be at least 1"));
        }
        if let Mode::Multiphase { area_weight } = o.mode {
            if !(area_weight >= 0.0 && area_weight.is_finite()) {
                return Err(invalid("optimization.mode.area_weight", "must be non-negative"));
            }
        }
        let e = &self.eigensolver;
        if !(e.tol > 0.0 && e.tol < 1.0) {
            return Err(invalid("eigensolver.tol", "must lie in (0, 1)"));
        }
        if e.max_iter == Some(0) {
            return Err(invalid("eigensolver.max_iter", "must be at least 1"));
        }
        let c = &self.classification;
        if !(c.level > 0.0 && c.level < 1.0) {
            return Err(invalid("classification.level", "must lie in (0, 1)"));
        }
        if c.signature_len < 2 {
            return Err(invalid("classification.signature_len", "must be at least 2"));
        }
        if !(c.epsilon > 0.0) {
            return Err(invalid("classification.epsilon", "must be positive"));
        }
        match &self.domain {
            DomainConfig::Grid { lower, upper, .. } => {
                if !(lower.len() == 2 || lower.len() == 3) || upper.len() != lower.len() {
                    return Err(invalid("domain", "lower and upper must both have 2 or 3 coordinates"));
                }
                let g = &self.grid;
                if g.resolution < 3 {
                    return Err(invalid("grid.resolution", "must be at least 3"));
                }
                let mut prev = 0;
                for &r in g.continuation.iter().chain(std::iter::once(&g.resolution)) {
                    if r < 3 || r <= prev {
                        return Err(invalid(
                            "grid.continuation",
                            "levels must be at least 3 and strictly increasing up to grid.resolution",
                        ));
                    }
                    prev = r;
                }
            }
            DomainConfig::Sphere { subdivisions } => {
                if *subdivisions > 8 {
                    return Err(invalid("domain.subdivisions", "at most 8 is supported"));
                }
            }
            DomainConfig::Torus { major, minor, nu, nv } => {
                if !(major > minor && *minor > 0.0) {
                    return Err(invalid("domain", "torus radii must satisfy major > minor > 0"));
                }
                if *nu < 3 || *nv < 3 {
                    return Err(invalid("domain", "torus needs nu, nv ≥ 3"));
                }
            }
            DomainConfig::Mesh { .. } => {}
        }
        Ok(())
    }

    /// Grid resolutions of all levels, coarsest first; empty for surfaces.
    pub fn levels(&self) -> Vec<usize> {
        if !self.domain.is_grid() {
            return Vec::new();
        }
        let mut l = self.grid.continuation.clone();
        l.push(self.grid.resolution);
        l
    }

    pub fn level_count(&self) -> usize {
        self.levels().len().max(1)
    }

    pub fn settings(&self) -> OptSettings {
        let o = &self.optimization;
        OptSettings {
            penalty: o.penalty.unwrap_or(if self.domain.is_grid() { DEFAULT_PENALTY } else { SURFACE_PENALTY }),
            order: o.order.unwrap_or(if self.domain.is_grid() { 6 } else { 5 }),
            threshold: o.threshold,
            initial_step: o.initial_step,
            min_step: o.min_step,
            step_growth: o.step_growth,
            max_iter: o.max_iter,
            mode: o.mode,
            vanish_policy: o.vanish_policy,
            eig: EigOptions {
                tol: self.eigensolver.tol,
                max_iter: self.eigensolver.max_iter,
                preconditioner: self.eigensolver.preconditioner,
                ..EigOptions::default()
            },
        }
    }

    pub fn grid_at(&self, level: usize) -> CliResult<Grid> {
        let DomainConfig::Grid { lower, upper, shape } = &self.domain else {
            return Err(CliError::Config("domain is not a grid".into()));
        };
        let res = *self
            .levels()
            .get(level)
            .ok_or_else(|| CliError::Config(format!("no continuation level {level}")))?;
        let spec = DomainSpec {
            lower: lower.clone(),
            upper: upper.clone(),
            shape: shape.clone(),
        };
        build_grid(&spec, res, self.grid.boundary).map_err(|e| CliError::Config(format!("domain: {e}")))
    }

    pub fn mesh(&self) -> CliResult<TriMesh> {
        let mesh = match &self.domain {
            DomainConfig::Sphere { subdivisions } => Ok(generate_sphere(*subdivisions)),
            DomainConfig::Torus { major, minor, nu, nv } => generate_torus(*major, *minor, *nu, *nv),
            DomainConfig::Mesh { path } => load_mesh(path),
            DomainConfig::Grid { .. } => return Err(CliError::Config("domain is not a surface".into())),
        };
        mesh.map_err(|e| CliError::Config(format!("domain: {e}")))
    }

    /// Discretized problem at continuation `level`.
    pub fn problem(&self, level: usize) -> CliResult<Problem> {
        if self.domain.is_grid() {
            Ok(Problem::grid(self.grid_at(level)?))
        } else {
            Problem::surface(self.mesh()?).map_err(|e| CliError::Config(format!("domain: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
kind = "grid"
lower = [0.0, 0.0]
upper = [1.0, 1.0]

[grid]
resolution = 64

[optimization]
cells = 2
seed = 1
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap().into_effective().unwrap();
        assert_eq!(c.optimization.order, Some(6));
        assert_eq!(c.optimization.penalty, Some(1e4));
        assert_eq!(c.optimization.initial_step, Some(1e-4));
        assert_eq!(c.levels(), vec![64]);
        assert_eq!(c.output.checkpoint_interval, 25);
    }

    #[test]
    fn effective_config_round_trips() {
        let c = RunConfig::parse(MINIMAL).unwrap().into_effective().unwrap();
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn zero_cells_names_the_field() {
        let text = MINIMAL.replace("cells = 2", "cells = 0");
        let e = RunConfig::parse(&text).unwrap().into_effective().unwrap_err();
        assert!(e.to_string().contains("optimization.cells"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::parse(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
        assert!(RunConfig::parse("[domain]\nkind = \"cylinder\"\n").is_err());
    }

    #[test]
    fn continuation_must_increase() {
        let text = MINIMAL.replace("resolution = 64", "resolution = 64\ncontinuation = [32, 16]");
        assert!(RunConfig::parse(&text).unwrap().into_effective().is_err());
        let text = MINIMAL.replace("resolution = 64", "resolution = 64\ncontinuation = [16, 32]");
        let c = RunConfig::parse(&text).unwrap().into_effective().unwrap();
        assert_eq!(c.levels(), vec![16, 32, 64]);
        assert_eq!(c.grid_at(0).unwrap().shape()[0], 16);
    }

    #[test]
    fn multiphase_and_surfaces() {
        let text = r#"
[domain]
kind = "sphere"
subdivisions = 2

[optimization]
cells = 3
mode = { type = "multiphase", area_weight = 10.0 }
"#;
        let c = RunConfig::parse(text).unwrap().into_effective().unwrap();
        assert_eq!(c.optimization.order, Some(5));
        assert_eq!(c.optimization.penalty, Some(1e3));
        assert_eq!(c.optimization.initial_step, Some(1e-3));
        assert!(c.levels().is_empty());
        assert_eq!(c.problem(0).unwrap().node_count(), 162);
        assert!(c.settings().mode.is_multiphase());
    }
}
