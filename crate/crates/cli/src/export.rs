//! `export`: plot-ready data and MatrixMarket operators.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use specpart::classify::extract_isosurface;
use specpart::grid::Grid;
use specpart::surface_fem::{write_obj, write_ply};

use crate::error::{CliError, CliResult};
use crate::rundir::RunDir;

pub const EXPORT_DIR: &str = "export";

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Writes the export files for the run in `dir` and returns their paths.
pub fn export_run(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let run = RunDir::open(dir)?;
    export_loaded(&run)
}

pub fn export_loaded(run: &RunDir) -> CliResult<Vec<PathBuf>> {
    let out = run.path.join(EXPORT_DIR);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut written = Vec::new();
    let dens = &run.state.densities;
    let labels = dens.labels(run.problem.mask());

    match (run.problem.as_grid(), run.problem.as_mesh()) {
        (Some(g), _) if g.dim() == 2 => {
            let p = out.join("labels.csv");
            write_grid_labels(g, &labels, &p)?;
            written.push(p);
            let p = out.join("boundaries.csv");
            write_boundaries(g, &labels, &p)?;
            written.push(p);
        }
        (Some(g), _) => {
            let level = run.config.classification.level;
            for (i, phi) in dens.cells().enumerate() {
                // Vanished cells have no surface to write.
                let Ok(mesh) = extract_isosurface(g, phi, level) else { continue };
                let p = out.join(format!("cell_{i:04}.obj"));
                write_obj(&mesh, create(&p)?).map_err(|e| CliError::io(&p, e))?;
                written.push(p);
            }
        }
        (None, Some(mesh)) => {
            let void = dens.cell_count();
            let l: Vec<usize> = labels.iter().map(|l| l.unwrap_or(void)).collect();
            let p = out.join("labels.ply");
            write_ply(mesh, Some(&l), create(&p)?).map_err(|e| CliError::io(&p, e))?;
            written.push(p);
        }
        (None, None) => unreachable!("a problem is either a grid or a surface"),
    }

    let p = out.join("stiffness.mtx");
    run.problem
        .stiffness()
        .write_matrix_market(create(&p)?)
        .map_err(|e| CliError::io(&p, e))?;
    written.push(p);
    if let Some(m) = run.problem.mass() {
        let p = out.join("mass.mtx");
        m.write_matrix_market(create(&p)?).map_err(|e| CliError::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

/// `x,y,label` for every in-domain node; the label is empty where the void
/// phase dominates.
fn write_grid_labels(g: &Grid, labels: &[Option<usize>], path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "x,y,label").map_err(io)?;
    for (i, l) in labels.iter().enumerate() {
        if !g.mask()[i] {
            continue;
        }
        let [x, y, _] = g.position(i);
        match l {
            Some(l) => writeln!(w, "{x},{y},{l}"),
            None => writeln!(w, "{x},{y},"),
        }
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Dual-grid segments separating neighboring nodes with different labels,
/// one `x0,y0,x1,y1,a,b` row each. Pairs across a periodic seam are left
/// out so that plots show no lines along the box edge.
fn write_boundaries(g: &Grid, labels: &[Option<usize>], path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "x0,y0,x1,y1,a,b").map_err(io)?;
    let shape = g.shape();
    let half = 0.5 * g.spacing();
    let name = |l: Option<usize>| l.map(|v| v.to_string()).unwrap_or_default();
    for i in 0..g.node_count() {
        if !g.mask()[i] {
            continue;
        }
        let c = g.coords(i);
        for axis in 0..2 {
            if c[axis] + 1 >= shape[axis] {
                continue;
            }
            let mut d = c;
            d[axis] += 1;
            let j = g.index(d);
            if !g.mask()[j] || labels[i] == labels[j] {
                continue;
            }
            let [x, y, _] = g.position(i);
            let (x0, y0, x1, y1) = if axis == 0 {
                (x + half, y - half, x + half, y + half)
            } else {
                (x - half, y + half, x + half, y + half)
            };
            writeln!(w, "{x0},{y0},{x1},{y1},{},{}", name(labels[i]), name(labels[j])).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
