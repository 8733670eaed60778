use super::{project_in_place, DensitySet};
use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Grid};

/// Multilinear interpolation of `values` (on `grid`) at physical point `p`.
/// Dirichlet grids clamp to the outermost node layer; periodic grids wrap.
fn interpolate(grid: &Grid, values: &[f64], p: [f64; 3]) -> f64 {
    let dim = grid.dim();
    let shape = grid.shape();
    let origin = grid.origin();
    let h = grid.spacing();
    let mut base = [0usize; 3];
    let mut next = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let n = shape[a];
        let t = (p[a] - origin[a]) / h;
        match grid.boundary_mode() {
            BoundaryMode::Dirichlet => {
                let t = t.clamp(0.0, (n - 1) as f64);
                let i = (t.floor() as usize).min(n - 2);
                base[a] = i;
                next[a] = i + 1;
                frac[a] = t - i as f64;
            }
            BoundaryMode::Periodic => {
                let t = t.rem_euclid(n as f64);
                let i = (t.floor() as usize).min(n - 1);
                base[a] = i;
                next[a] = (i + 1) % n;
                frac[a] = t - i as f64;
            }
        }
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut c = [0usize; 3];
        let mut w = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                c[a] = next[a];
                w *= frac[a];
            } else {
                c[a] = base[a];
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            acc += w * values[grid.index(c)];
        }
    }
    acc
}

/// Interpolates every phase from `coarse` onto `fine` (same box and
/// boundary mode, finer spacing), zeroes off-domain nodes and projects.
pub fn refine(densities: &DensitySet, coarse: &Grid, fine: &Grid) -> Result<DensitySet> {
    if coarse.dim() != fine.dim()
        || coarse.boundary_mode() != fine.boundary_mode()
        || coarse.lower() != fine.lower()
        || coarse.upper() != fine.upper()
    {
        return Err(Error::IncompatibleGrids(
            "grids must share dimension, bounding box and boundary mode".into(),
        ));
    }
    if !(fine.spacing() < coarse.spacing()) {
        return Err(Error::IncompatibleGrids(format!(
            "fine spacing {} is not below coarse spacing {}",
            fine.spacing(),
            coarse.spacing()
        )));
    }
    if densities.node_count() != coarse.node_count() {
        return Err(Error::IncompatibleGrids(
            "densities do not live on the coarse grid".into(),
        ));
    }
    let nodes = fine.node_count();
    let positions: Vec<[f64; 3]> = (0..nodes).map(|x| fine.position(x)).collect();
    let lift = |values: &[f64]| -> Vec<f64> {
        positions
            .iter()
            .zip(fine.mask())
            .map(|(&p, &m)| if m { interpolate(coarse, values, p) } else { 0.0 })
            .collect()
    };
    let values: Vec<f64> = densities.cells().flat_map(lift).collect();
    let void = densities.void().map(lift);
    let mut out = DensitySet::new(densities.cell_count(), nodes, values, void)?;
    project_in_place(&mut out, fine.mask());
    Ok(out)
}
