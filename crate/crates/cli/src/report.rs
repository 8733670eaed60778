//! Run report (JSON) and energy trace (CSV).

use std::path::Path;

use serde::{Deserialize, Serialize};
use specpart::partition_opt::{
    cell_areas, equivalent_radii, IterationRecord, OptState, Problem, StopReason,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub setup: f64,
    pub optimization: f64,
    pub output: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSummary {
    /// Smallest restricted problem over all iterations.
    pub min: usize,
    /// Mean over iterations of the per-iteration mean size.
    pub mean: f64,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// `grid` or `surface`.
    pub kind: String,
    pub dim: usize,
    pub nodes: usize,
    pub in_domain: usize,
    /// Grid spacing; absent on surfaces.
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub discretization: Discretization,
    pub cells: usize,
    /// Number of optimization variables, `cells × in-domain nodes`.
    pub degrees_of_freedom: usize,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub level_energies: Vec<f64>,
    pub energy: f64,
    pub eigenvalues: Vec<f64>,
    pub cell_areas: Vec<f64>,
    pub equivalent_radii: Vec<f64>,
    pub restricted: RestrictedSummary,
    pub constraint_defect: f64,
    /// Share of in-domain nodes where the largest phase exceeds 0.99.
    pub binarized_fraction: f64,
    pub reinitialized_cells: Vec<usize>,
    pub timing: Timing,
    pub history: Vec<IterationRecord>,
}

impl RunReport {
    pub fn build(
        config: &RunConfig,
        problem: &Problem,
        state: &OptState,
        level_energies: &[f64],
        stop_reason: StopReason,
        timing: Timing,
    ) -> Self {
        let d = &state.densities;
        let discretization = match problem.as_grid() {
            Some(g) => Discretization {
                kind: "grid".into(),
                dim: g.dim(),
                nodes: g.node_count(),
                in_domain: g.in_domain_count(),
                spacing: Some(g.spacing()),
            },
            None => Discretization {
                kind: "surface".into(),
                dim: 2,
                nodes: problem.node_count(),
                in_domain: problem.in_domain_count(),
                spacing: None,
            },
        };
        let h = &state.history;
        let restricted = if h.is_empty() {
            let (min, mean, max) = state.eval.restricted_stats();
            RestrictedSummary { min, mean, max }
        } else {
            RestrictedSummary {
                min: h.iter().map(|r| r.restricted_min).min().unwrap_or(0),
                mean: h.iter().map(|r| r.restricted_mean).sum::<f64>() / h.len() as f64,
                max: h.iter().map(|r| r.restricted_max).max().unwrap_or(0),
            }
        };
        RunReport {
            config: config.clone(),
            cells: d.cell_count(),
            degrees_of_freedom: d.cell_count() * discretization.in_domain,
            discretization,
            stop_reason,
            iterations: h.len(),
            accepted_steps: h.iter().filter(|r| r.accepted).count(),
            level_energies: level_energies.to_vec(),
            energy: state.energy(),
            eigenvalues: state.eval.eigenvalues(),
            cell_areas: cell_areas(problem, d),
            equivalent_radii: equivalent_radii(problem, d),
            restricted,
            constraint_defect: d.constraint_defect(problem.mask()),
            binarized_fraction: d.binarized_fraction(problem.mask(), 0.99),
            reinitialized_cells: state.reinitialized.clone(),
            timing,
            history: state.history.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::RunDir {
            path: path.to_path_buf(),
            message: format!("unreadable report: {e}"),
        })
    }
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    level: usize,
    step: f64,
    accepted: bool,
    energy: f64,
    candidate_energy: f64,
    restricted_min: usize,
    restricted_mean: f64,
    restricted_max: usize,
    degenerate_nodes: usize,
}

/// One row per iteration; `energy` is the energy after the step was
/// accepted or rejected.
pub fn write_energy_trace(history: &[IterationRecord], path: &Path) -> CliResult<()> {
    let err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for (i, r) in history.iter().enumerate() {
        w.serialize(TraceRow {
            iteration: i + 1,
            level: r.level,
            step: r.step,
            accepted: r.accepted,
            energy: r.energy,
            candidate_energy: r.candidate_energy,
            restricted_min: r.restricted_min,
            restricted_mean: r.restricted_mean,
            restricted_max: r.restricted_max,
            degenerate_nodes: r.degenerate_nodes,
        })
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
