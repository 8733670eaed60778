//! `classify`: neighbor counts for every run, plus spectral signatures of
//! the extracted cell surfaces for 3D grids.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specpart::classify::{
    cell_volume, classify_cells, count_cell_neighbors, extract_isosurface, scale_invariant_eigenvalue,
    spectral_signature, SpectralSignature,
};
use specpart::surface_fem::write_obj;

use crate::error::{CliError, CliResult};
use crate::rundir::RunDir;

pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const CELL_MESH_DIR: &str = "cells";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSummary {
    pub level: f64,
    pub neighbor_counts: Vec<usize>,
    /// `(neighbor count, number of cells)` pairs.
    pub histogram: Vec<(usize, usize)>,
    pub edges: Vec<(usize, usize)>,
    pub empty_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellShape {
    pub cell: usize,
    pub eigenvalue: f64,
    pub mesh: Option<PathBuf>,
    pub vertices: usize,
    pub triangles: usize,
    pub euler_characteristic: i64,
    pub volume: Option<f64>,
    /// `λ₁ · Vol^{2/3}`.
    pub scale_invariant: Option<f64>,
    pub signature: Option<Vec<f64>>,
    pub class: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub signature_len: usize,
    pub epsilon: f64,
    pub class_count: usize,
    pub class_sizes: Vec<usize>,
    /// Cells that received a signature, in the order of `distances`.
    pub classified_cells: Vec<usize>,
    pub distances: Vec<Vec<f64>>,
    pub cells: Vec<CellShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub neighbors: NeighborSummary,
    pub spectral: Option<SpectralSummary>,
}

pub fn classify_run(dir: &Path) -> CliResult<ClassificationReport> {
    let run = RunDir::open(dir)?;
    let report = classify_loaded(&run)?;
    let path = dir.join(CLASSIFICATION_FILE);
    let text = serde_json::to_string_pretty(&report).expect("classification serializes");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

pub fn classify_loaded(run: &RunDir) -> CliResult<ClassificationReport> {
    let c = &run.config.classification;
    let dens = &run.state.densities;
    let graph = count_cell_neighbors(dens, run.problem.adjacency(), c.level)?;
    let neighbors = NeighborSummary {
        level: c.level,
        neighbor_counts: graph.neighbor_counts(),
        histogram: graph.histogram(),
        edges: graph.edges.iter().copied().collect(),
        empty_cells: graph.empty.clone(),
    };
    let spectral = match run.problem.as_grid() {
        Some(g) if g.dim() == 3 => Some(spectral_summary(run, g)?),
        _ => None,
    };
    Ok(ClassificationReport { neighbors, spectral })
}

fn spectral_summary(run: &RunDir, grid: &specpart::grid::Grid) -> CliResult<SpectralSummary> {
    let c = &run.config.classification;
    let mesh_dir = run.path.join(CELL_MESH_DIR);
    std::fs::create_dir_all(&mesh_dir).map_err(|e| CliError::io(&mesh_dir, e))?;
    let mut cells = Vec::new();
    let mut signatures: Vec<SpectralSignature> = Vec::new();
    let mut classified = Vec::new();
    for (i, phi) in run.state.densities.cells().enumerate() {
        let eigenvalue = run.state.eval.cells[i].eigenvalue;
        let mut shape = CellShape {
            cell: i,
            eigenvalue,
            mesh: None,
            vertices: 0,
            triangles: 0,
            euler_characteristic: 0,
            volume: None,
            scale_invariant: None,
            signature: None,
            class: None,
            error: None,
        };
        match extract_isosurface(grid, phi, c.level) {
            Err(e) => shape.error = Some(e.to_string()),
            Ok(mesh) => {
                let rel = PathBuf::from(CELL_MESH_DIR).join(format!("cell_{i:04}.obj"));
                let path = run.path.join(&rel);
                let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
                write_obj(&mesh, BufWriter::new(f)).map_err(|e| CliError::io(&path, e))?;
                shape.mesh = Some(rel);
                shape.vertices = mesh.vertex_count();
                shape.triangles = mesh.triangle_count();
                shape.euler_characteristic = mesh.euler_characteristic();
                let analysis = cell_volume(&mesh).and_then(|v| {
                    let s = scale_invariant_eigenvalue(eigenvalue, v)?;
                    let sig = spectral_signature(&mesh, c.signature_len)?;
                    Ok((v, s, sig))
                });
                match analysis {
                    Ok((v, s, sig)) => {
                        shape.volume = Some(v);
                        shape.scale_invariant = Some(s);
                        shape.signature = Some(sig.values.clone());
                        signatures.push(sig);
                        classified.push(i);
                    }
                    Err(e) => shape.error = Some(e.to_string()),
                }
            }
        }
        cells.push(shape);
    }
    let (class_count, class_sizes, distances) = if signatures.is_empty() {
        (0, Vec::new(), Vec::new())
    } else {
        let part = classify_cells(&signatures, c.epsilon)?;
        for (&cell, &class) in classified.iter().zip(&part.classes) {
            cells[cell].class = Some(class);
        }
        (part.class_count(), part.class_sizes(), part.distances)
    };
    Ok(SpectralSummary {
        signature_len: c.signature_len,
        epsilon: c.epsilon,
        class_count,
        class_sizes,
        classified_cells: classified,
        distances,
        cells,
    })
}
