//! Projected gradient descent on `Σ λ₁(C, φ_i)` over density tuples.
//!
//! Each iteration solves the cell eigenproblems on their computational
//! neighborhoods (in parallel), moves every density along `C u_i²`, projects
//! back onto the constraint and keeps the candidate only if the energy
//! strictly decreases. Rejected steps halve the step size.

mod refine;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use refine::refine;

use crate::adjacency::Adjacency;
use crate::eigensolve::{penalized_eigenvalue, EigOptions, PenaltyOperator};
use crate::error::{Error, Result};
use crate::grid::{adjacency as grid_adjacency, assemble_laplacian, Grid};
use crate::neighborhood::{computational_neighborhood, DEFAULT_ORDER, DEFAULT_THRESHOLD};
use crate::sparse::SparseOperator;
use crate::surface_fem::{assemble_mass_stiffness, vertex_moments, TriMesh, DEFAULT_HOPS};

pub const DEFAULT_PENALTY: f64 = 1e4;
/// On the meshes used here (edge length around 0.04 to 0.08) a penalty of
/// 1e4 lets an eigenfunction decay within a single edge, which freezes the
/// cell interfaces as soon as the densities become binary.
pub const SURFACE_PENALTY: f64 = 1e3;

/// First zero of the Bessel function `J₀`.
pub const BESSEL_J01: f64 = 2.404_825_557_695_773;

/// Where the densities live.
#[derive(Debug, Clone)]
pub enum Discretization {
    Grid(Grid),
    Surface(TriMesh),
}

/// Operators and weights shared by all cells.
#[derive(Debug, Clone)]
pub struct Problem {
    discretization: Discretization,
    stiffness: SparseOperator,
    mass: Option<SparseOperator>,
    mask: Vec<bool>,
    weights: Vec<f64>,
    adjacency: Adjacency,
}

impl Problem {
    pub fn grid(grid: Grid) -> Self {
        let stiffness = assemble_laplacian(&grid);
        let adjacency = grid_adjacency(&grid);
        let w = grid.node_weight();
        let mask = grid.mask().to_vec();
        let weights = mask.iter().map(|&m| if m { w } else { 0.0 }).collect();
        Self {
            discretization: Discretization::Grid(grid),
            stiffness,
            mass: None,
            mask,
            weights,
            adjacency,
        }
    }

    pub fn surface(mesh: TriMesh) -> Result<Self> {
        let fem = assemble_mass_stiffness(&mesh)?;
        let weights = fem.lumped_mass();
        let adjacency = mesh.vertex_adjacency();
        Ok(Self {
            mask: vec![true; mesh.vertex_count()],
            discretization: Discretization::Surface(mesh),
            stiffness: fem.stiffness,
            mass: Some(fem.mass),
            weights,
            adjacency,
        })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.discretization
    }

    pub fn as_grid(&self) -> Option<&Grid> {
        match &self.discretization {
            Discretization::Grid(g) => Some(g),
            Discretization::Surface(_) => None,
        }
    }

    pub fn as_mesh(&self) -> Option<&TriMesh> {
        match &self.discretization {
            Discretization::Surface(m) => Some(m),
            Discretization::Grid(_) => None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn in_domain_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Quadrature weight per node: `h^dim` (zero off-domain) on grids, lumped
    /// mass on surfaces.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn mass(&self) -> Option<&SparseOperator> {
        self.mass.as_ref()
    }

    pub fn penalty_operator(&self) -> PenaltyOperator<'_> {
        match (&self.discretization, &self.mass) {
            (Discretization::Grid(g), _) => {
                PenaltyOperator::grid(&self.stiffness, &self.mask, g.node_weight())
            }
            (Discretization::Surface(mesh), Some(m)) => {
                PenaltyOperator::surface(&self.stiffness, m, mesh)
            }
            (Discretization::Surface(_), None) => unreachable!("surface problems carry a mass matrix"),
        }
    }

    /// Default neighbor order: 6 grid hops, 5 mesh edges.
    /// Penalization constant used when none is configured.
    pub fn default_penalty(&self) -> f64 {
        match self.discretization {
            Discretization::Grid(_) => DEFAULT_PENALTY,
            Discretization::Surface(_) => SURFACE_PENALTY,
        }
    }

    pub fn default_order(&self) -> usize {
        match self.discretization {
            Discretization::Grid(_) => DEFAULT_ORDER,
            Discretization::Surface(_) => DEFAULT_HOPS,
        }
    }
}

/// `n` densities over a common node set, stored cell-major, plus the void
/// phase in multiphase mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySet {
    n: usize,
    nodes: usize,
    values: Vec<f64>,
    void: Option<Vec<f64>>,
}

impl DensitySet {
    pub fn new(n: usize, nodes: usize, values: Vec<f64>, void: Option<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("cell count must be at least 1".into()));
        }
        if values.len() != n * nodes || void.as_ref().is_some_and(|v| v.len() != nodes) {
            return Err(Error::InvalidArgument(format!(
                "density array of length {} does not match {n} cells × {nodes} nodes",
                values.len()
            )));
        }
        Ok(Self {
            n,
            nodes,
            values,
            void,
        })
    }

    /// Builds from one vector per cell.
    pub fn from_cells(cells: Vec<Vec<f64>>, void: Option<Vec<f64>>) -> Result<Self> {
        let n = cells.len();
        let nodes = cells.first().map_or(0, Vec::len);
        if cells.iter().any(|c| c.len() != nodes) {
            return Err(Error::InvalidArgument("cells have different lengths".into()));
        }
        Self::new(n, nodes, cells.concat(), void)
    }

    pub fn cell_count(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.values[i * self.nodes..(i + 1) * self.nodes]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.nodes..(i + 1) * self.nodes]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.nodes.max(1)).take(self.n)
    }

    /// All cell values, cell-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn void(&self) -> Option<&[f64]> {
        self.void.as_deref()
    }

    pub fn is_multiphase(&self) -> bool {
        self.void.is_some()
    }

    /// `max |Σ φ − 1|` over in-domain nodes, the void phase included.
    pub fn constraint_defect(&self, mask: &[bool]) -> f64 {
        (0..self.nodes)
            .filter(|&x| mask[x])
            .map(|x| {
                let s: f64 = (0..self.n).map(|i| self.values[i * self.nodes + x]).sum::<f64>()
                    + self.void.as_ref().map_or(0.0, |v| v[x]);
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Argmax cell per node, lowest index on ties; `None` off-domain or
    /// where the void phase dominates.
    pub fn labels(&self, mask: &[bool]) -> Vec<Option<usize>> {
        (0..self.nodes)
            .map(|x| {
                if !mask[x] {
                    return None;
                }
                let mut best = 0;
                for i in 1..self.n {
                    if self.values[i * self.nodes + x] > self.values[best * self.nodes + x] {
                        best = i;
                    }
                }
                match &self.void {
                    Some(v) if v[x] > self.values[best * self.nodes + x] => None,
                    _ => Some(best),
                }
            })
            .collect()
    }

    /// Fraction of in-domain nodes where some cell exceeds `level`.
    pub fn binarized_fraction(&self, mask: &[bool], level: f64) -> f64 {
        let inside: Vec<usize> = (0..self.nodes).filter(|&x| mask[x]).collect();
        let hit = inside
            .iter()
            .filter(|&&x| (0..self.n).any(|i| self.values[i * self.nodes + x] > level))
            .count();
        hit as f64 / inside.len().max(1) as f64
    }
}

/// `φ_i ↦ |φ_i| / Σ_j |φ_j|` at every in-domain node (void phase included);
/// off-domain nodes are set to zero. Nodes where every phase is zero get
/// `1/n` and are counted in the returned event total.
pub fn project_to_partition(densities: &DensitySet, mask: &[bool]) -> (DensitySet, usize) {
    let mut out = densities.clone();
    let degenerate = project_in_place(&mut out, mask);
    (out, degenerate)
}

fn project_in_place(d: &mut DensitySet, mask: &[bool]) -> usize {
    let (n, nodes) = (d.n, d.nodes);
    let phases = n + usize::from(d.void.is_some());
    let mut degenerate = 0;
    for x in 0..nodes {
        if !mask[x] {
            for i in 0..n {
                d.values[i * nodes + x] = 0.0;
            }
            if let Some(v) = d.void.as_mut() {
                v[x] = 0.0;
            }
            continue;
        }
        let mut s: f64 = (0..n).map(|i| d.values[i * nodes + x].abs()).sum();
        if let Some(v) = &d.void {
            s += v[x].abs();
        }
        if !(s > 0.0) || !s.is_finite() {
            degenerate += 1;
            let u = 1.0 / phases as f64;
            for i in 0..n {
                d.values[i * nodes + x] = u;
            }
            if let Some(v) = d.void.as_mut() {
                v[x] = u;
            }
            continue;
        }
        for i in 0..n {
            let p = &mut d.values[i * nodes + x];
            *p = p.abs() / s;
        }
        if let Some(v) = d.void.as_mut() {
            v[x] = v[x].abs() / s;
        }
    }
    degenerate
}

/// I.i.d. uniform values on every phase, masked and projected.
pub fn random_init(n: usize, problem: &Problem, multiphase: bool, seed: u64) -> Result<DensitySet> {
    if n == 0 {
        return Err(Error::InvalidArgument("cell count must be at least 1".into()));
    }
    let nodes = problem.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * nodes).map(|_| rng.gen::<f64>()).collect();
    let void = multiphase.then(|| (0..nodes).map(|_| rng.gen::<f64>()).collect());
    let mut d = DensitySet::new(n, nodes, values, void)?;
    project_in_place(&mut d, problem.mask());
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Mode {
    /// `Σ φ_i = 1`.
    #[default]
    Partition,
    /// `Σ φ_i + φ₀ = 1` with energy `Σ λ₁(φ_i) + area_weight·Σ |ω_i|`.
    Multiphase { area_weight: f64 },
}

impl Mode {
    pub fn is_multiphase(&self) -> bool {
        matches!(self, Mode::Multiphase { .. })
    }

    fn area_weight(&self) -> f64 {
        match *self {
            Mode::Partition => 0.0,
            Mode::Multiphase { area_weight } => area_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VanishPolicy {
    #[default]
    Abort,
    /// Reseed the cell around the least-claimed node.
    Reinitialize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptSettings {
    /// Penalization constant `C`.
    pub penalty: f64,
    /// Neighbor order (grid hops or mesh edges).
    pub order: usize,
    pub threshold: f64,
    /// Initial step; `None` means `1/C`.
    pub initial_step: Option<f64>,
    pub min_step: f64,
    /// Factor applied to the step after an accepted iteration.
    pub step_growth: f64,
    pub max_iter: usize,
    pub mode: Mode,
    pub vanish_policy: VanishPolicy,
    pub eig: EigOptions,
}

impl Default for OptSettings {
    fn default() -> Self {
        Self {
            penalty: DEFAULT_PENALTY,
            order: DEFAULT_ORDER,
            threshold: DEFAULT_THRESHOLD,
            initial_step: None,
            min_step: 1e-6,
            step_growth: 1.2,
            max_iter: 1000,
            mode: Mode::Partition,
            vanish_policy: VanishPolicy::Abort,
            eig: EigOptions::default(),
        }
    }
}

impl OptSettings {
    pub fn step0(&self) -> f64 {
        self.initial_step.unwrap_or(1.0 / self.penalty)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad("penalty must be positive");
        }
        if self.order == 0 {
            return bad("neighbor order must be at least 1");
        }
        if !(self.threshold >= 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in [0, 1)");
        }
        if !(self.step0() > 0.0 && self.min_step > 0.0) {
            return bad("step sizes must be positive");
        }
        if !(self.step_growth >= 1.0 && self.step_growth.is_finite()) {
            return bad("step growth must be at least 1");
        }
        if let Mode::Multiphase { area_weight } = self.mode {
            if !(area_weight >= 0.0 && area_weight.is_finite()) {
                return bad("area weight must be non-negative");
            }
        }
        Ok(())
    }
}

/// Eigenpair of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEval {
    pub eigenvalue: f64,
    /// Zero-extended to all nodes.
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
    /// `|R|`, the size of the restricted problem.
    pub restricted_size: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub cells: Vec<CellEval>,
    /// `Σ_i |ω_i|`, the weighted cell areas (multiphase mode).
    pub area: f64,
}

impl Evaluation {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.eigenvalue).collect()
    }

    /// Minimum, mean and maximum restricted problem size.
    pub fn restricted_stats(&self) -> (usize, f64, usize) {
        let sizes = self.cells.iter().map(|c| c.restricted_size);
        let min = sizes.clone().min().unwrap_or(0);
        let max = sizes.clone().max().unwrap_or(0);
        let mean = sizes.sum::<usize>() as f64 / self.cells.len().max(1) as f64;
        (min, mean, max)
    }
}

fn solve_cell(
    problem: &Problem,
    phi: &[f64],
    settings: &OptSettings,
    warm: Option<&[f64]>,
    cell: usize,
) -> Result<CellEval> {
    let nb = computational_neighborhood(phi, &problem.adjacency, settings.order, settings.threshold)
        .map_err(|e| match e {
            Error::CellVanished { threshold } => Error::EmptyCell { cell, threshold },
            other => other,
        })?;
    let op = problem.penalty_operator();
    let r = penalized_eigenvalue(&op, phi, settings.penalty, &nb, warm, &settings.eig)?;
    Ok(CellEval {
        eigenvalue: r.eigenvalue,
        eigenvector: r.eigenvector,
        restricted_size: nb.len(),
        iterations: r.iterations,
    })
}

/// Solves every cell problem (in parallel) and sums the energy. `warm`
/// supplies starting vectors from a previous evaluation.
pub fn evaluate(
    problem: &Problem,
    densities: &DensitySet,
    settings: &OptSettings,
    warm: Option<&Evaluation>,
) -> Result<Evaluation> {
    if densities.node_count() != problem.node_count() {
        return Err(Error::InvalidArgument(format!(
            "densities have {} nodes, problem has {}",
            densities.node_count(),
            problem.node_count()
        )));
    }
    let cells: Vec<CellEval> = (0..densities.cell_count())
        .into_par_iter()
        .map(|i| {
            let w = warm.and_then(|w| w.cells.get(i)).map(|c| c.eigenvector.as_slice());
            solve_cell(problem, densities.cell(i), settings, w, i)
        })
        .collect::<Result<_>>()?;
    let area: f64 = densities
        .cells()
        .map(|c| c.iter().zip(&problem.weights).map(|(p, w)| p * w).sum::<f64>())
        .sum();
    let energy = cells.iter().map(|c| c.eigenvalue).sum::<f64>() + settings.mode.area_weight() * area;
    Ok(Evaluation {
        energy,
        cells,
        area,
    })
}

/// `C u_k²` on grids, `C ∫ψ_k u² / m_k` on surfaces (`ψ_k` the hat function
/// of vertex `k`, `m_k` its lumped mass): minus the L² gradient of `λ₁` with
/// respect to `φ`.
fn descent_direction(problem: &Problem, cell: &CellEval, c: f64) -> Vec<f64> {
    let u = &cell.eigenvector;
    match &problem.discretization {
        Discretization::Grid(_) => u.iter().map(|x| c * x * x).collect(),
        Discretization::Surface(mesh) => vertex_moments(mesh, u)
            .iter()
            .zip(&problem.weights)
            .map(|(q, w)| c * q / w)
            .collect(),
    }
}

/// Energy and per-cell L² gradients (`−C u_i²` on grids, plus the constant
/// area weight in multiphase mode).
pub fn energy_and_gradients(
    problem: &Problem,
    densities: &DensitySet,
    settings: &OptSettings,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let eval = evaluate(problem, densities, settings, None)?;
    let aw = settings.mode.area_weight();
    let grads = eval
        .cells
        .iter()
        .map(|cell| {
            descent_direction(problem, cell, settings.penalty)
                .into_iter()
                .zip(&problem.mask)
                .map(|(d, &m)| if m { aw - d } else { 0.0 })
                .collect()
        })
        .collect();
    Ok((eval.energy, grads))
}

/// `φ_i ← φ_i + α C u_i²`, then projection. In multiphase mode the area
/// term moves the void phase, `φ₀ ← φ₀ + α·area_weight`, which differs from
/// subtracting it from every cell only by a multiple of the constraint
/// normal.
pub fn descent_step(
    problem: &Problem,
    densities: &DensitySet,
    eval: &Evaluation,
    step: f64,
    settings: &OptSettings,
) -> (DensitySet, usize) {
    let mut next = densities.clone();
    let dirs: Vec<Vec<f64>> = eval
        .cells
        .par_iter()
        .map(|cell| descent_direction(problem, cell, settings.penalty))
        .collect();
    for (i, d) in dirs.iter().enumerate() {
        for (p, g) in next.cell_mut(i).iter_mut().zip(d) {
            *p += step * g;
        }
    }
    if let Some(v) = next.void.as_mut() {
        let push = step * settings.mode.area_weight();
        v.iter_mut().for_each(|p| *p += push);
    }
    let degenerate = project_in_place(&mut next, problem.mask());
    (next, degenerate)
}

/// Gives cell `i` a fresh blob around the in-domain node least claimed by
/// the other cells.
pub fn reinitialize_cell(problem: &Problem, densities: &mut DensitySet, cell: usize, hops: usize) {
    let nodes = densities.node_count();
    let claim = |x: usize| {
        (0..densities.cell_count())
            .filter(|&j| j != cell)
            .map(|j| densities.values[j * nodes + x])
            .fold(0.0, f64::max)
    };
    let Some(seed) = (0..nodes)
        .filter(|&x| problem.mask[x])
        .min_by(|&a, &b| claim(a).total_cmp(&claim(b)))
    else {
        return;
    };
    let mut phi = vec![0.0; nodes];
    phi[seed] = 1.0;
    if let Ok(nb) = computational_neighborhood(&phi, &problem.adjacency, hops.max(1), 0.5) {
        for &x in nb.nodes() {
            densities.values[cell * nodes + x] += 1.0;
        }
    }
    project_in_place(densities, problem.mask());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepTooSmall,
    MaxIterations,
    Interrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub level: usize,
    pub step: f64,
    pub accepted: bool,
    /// Energy of the state after this iteration.
    pub energy: f64,
    pub candidate_energy: f64,
    pub eigenvalues: Vec<f64>,
    pub restricted_min: usize,
    pub restricted_mean: f64,
    pub restricted_max: usize,
    pub degenerate_nodes: usize,
}

/// Optimizer state; everything needed to continue a run exactly.
#[derive(Debug, Clone)]
pub struct OptState {
    pub densities: DensitySet,
    pub eval: Evaluation,
    pub step: f64,
    /// Iterations done at the current level.
    pub iteration: usize,
    pub level: usize,
    pub history: Vec<IterationRecord>,
    pub reinitialized: Vec<usize>,
}

impl OptState {
    pub fn energy(&self) -> f64 {
        self.eval.energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

fn evaluate_with_policy(
    problem: &Problem,
    densities: &mut DensitySet,
    settings: &OptSettings,
    warm: Option<&Evaluation>,
    reinitialized: &mut Vec<usize>,
) -> Result<Evaluation> {
    let mut attempts = 0;
    loop {
        match evaluate(problem, densities, settings, warm) {
            Err(Error::EmptyCell { cell, .. })
                if settings.vanish_policy == VanishPolicy::Reinitialize
                    && attempts < densities.cell_count() =>
            {
                reinitialize_cell(problem, densities, cell, 2);
                reinitialized.push(cell);
                attempts += 1;
            }
            other => return other,
        }
    }
}

/// Evaluates `densities` and wraps them in a fresh state at `level`.
pub fn initial_state(
    problem: &Problem,
    mut densities: DensitySet,
    settings: &OptSettings,
    level: usize,
) -> Result<OptState> {
    settings.validate()?;
    if densities.is_multiphase() != settings.mode.is_multiphase() {
        return Err(Error::InvalidArgument(
            "void phase present iff the mode is multiphase".into(),
        ));
    }
    let mut reinitialized = Vec::new();
    let eval = evaluate_with_policy(problem, &mut densities, settings, None, &mut reinitialized)?;
    Ok(OptState {
        densities,
        eval,
        step: settings.step0(),
        iteration: 0,
        level,
        history: Vec::new(),
        reinitialized,
    })
}

/// Runs descent iterations on `state` until the step falls below
/// `min_step`, `max_iter` iterations have been done at this level, or
/// `observer` asks to stop. The observer sees the state after every
/// iteration.
pub fn run(
    problem: &Problem,
    settings: &OptSettings,
    state: &mut OptState,
    observer: &mut dyn FnMut(&OptState) -> Control,
) -> Result<StopReason> {
    settings.validate()?;
    loop {
        if state.step < settings.min_step {
            return Ok(StopReason::StepTooSmall);
        }
        if state.iteration >= settings.max_iter {
            return Ok(StopReason::MaxIterations);
        }
        let (mut candidate, degenerate) =
            descent_step(problem, &state.densities, &state.eval, state.step, settings);
        let mut reinit = Vec::new();
        let cand = evaluate_with_policy(problem, &mut candidate, settings, Some(&state.eval), &mut reinit)?;
        let accepted = cand.energy < state.eval.energy;
        let used = state.step;
        if accepted {
            state.densities = candidate;
            state.eval = cand.clone();
            state.reinitialized.extend(reinit);
            state.step *= settings.step_growth;
        } else {
            state.step *= 0.5;
        }
        state.iteration += 1;
        let (rmin, rmean, rmax) = cand.restricted_stats();
        state.history.push(IterationRecord {
            iteration: state.iteration,
            level: state.level,
            step: used,
            accepted,
            energy: state.eval.energy,
            candidate_energy: cand.energy,
            eigenvalues: state.eval.eigenvalues(),
            restricted_min: rmin,
            restricted_mean: rmean,
            restricted_max: rmax,
            degenerate_nodes: degenerate,
        });
        if observer(state) == Control::Stop {
            return Ok(StopReason::Interrupted);
        }
    }
}

/// Random start, then [`run`] to completion.
pub fn optimize(problem: &Problem, n: usize, settings: &OptSettings, seed: u64) -> Result<OptState> {
    let init = random_init(n, problem, settings.mode.is_multiphase(), seed)?;
    let mut state = initial_state(problem, init, settings, 0)?;
    run(problem, settings, &mut state, &mut |_| Control::Continue)?;
    Ok(state)
}

/// Multiphase optimization; the energy carries `area_weight·Σ|ω_i|`.
pub fn circle_packing_mode(
    problem: &Problem,
    n: usize,
    area_weight: f64,
    settings: &OptSettings,
    seed: u64,
) -> Result<OptState> {
    if !(area_weight > 0.0) {
        return Err(Error::InvalidArgument("area weight must be positive".into()));
    }
    let settings = OptSettings {
        mode: Mode::Multiphase { area_weight },
        ..settings.clone()
    };
    optimize(problem, n, &settings, seed)
}

/// Weighted area (length, volume) of each cell, `Σ_x w_x φ_i(x)`.
pub fn cell_areas(problem: &Problem, densities: &DensitySet) -> Vec<f64> {
    densities
        .cells()
        .map(|c| c.iter().zip(problem.weights()).map(|(p, w)| p * w).sum())
        .collect()
}

/// Radius of the disk with each cell's area.
pub fn equivalent_radii(problem: &Problem, densities: &DensitySet) -> Vec<f64> {
    cell_areas(problem, densities)
        .into_iter()
        .map(|a| (a / std::f64::consts::PI).sqrt())
        .collect()
}

/// Radius `(j₀,₁² / (α π))^{1/4}` of the disk minimizing `λ₁(ω) + α|ω|`.
pub fn packing_radius(area_weight: f64) -> f64 {
    (BESSEL_J01 * BESSEL_J01 / (area_weight * std::f64::consts::PI)).powf(0.25)
}

/// Result of a multigrid continuation.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub problem: Problem,
    pub state: OptState,
    /// Final energy at each level.
    pub level_energies: Vec<f64>,
}

/// Optimizes on each grid of `grids` in turn, refining the densities
/// between levels and restarting the step at `1/C`.
pub fn optimize_continuation(
    grids: Vec<Grid>,
    n: usize,
    settings: &OptSettings,
    seed: u64,
) -> Result<Continuation> {
    let mut grids = grids.into_iter();
    let first = grids
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty continuation schedule".into()))?;
    let mut problem = Problem::grid(first);
    let mut state = optimize(&problem, n, settings, seed)?;
    let mut level_energies = vec![state.energy()];
    for (level, grid) in grids.enumerate() {
        let coarse = problem.as_grid().expect("grid problem");
        let dens = refine(&state.densities, coarse, &grid)?;
        problem = Problem::grid(grid);
        let mut next = initial_state(&problem, dens, settings, level + 1)?;
        let mut history = std::mem::take(&mut state.history);
        run(&problem, settings, &mut next, &mut |_| Control::Continue)?;
        history.append(&mut next.history);
        next.history = history;
        state = next;
        level_energies.push(state.energy());
    }
    Ok(Continuation {
        problem,
        state,
        level_energies,
    })
}
