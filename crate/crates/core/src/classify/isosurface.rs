//! Level-set triangulation by marching tetrahedra.
//!
//! Each lattice cube is split into the six tetrahedra of its Kuhn
//! decomposition (all sharing the main diagonal), which is conforming across
//! cubes, so the output is watertight without ambiguous cases. Crossing
//! points are linear interpolants along lattice edges, welded per edge.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Grid};
use crate::surface_fem::TriMesh;

/// Interpolation parameters are kept this far from the edge endpoints so
/// that welded vertices of different edges never coincide.
const T_MARGIN: f64 = 1e-3;

/// Scalar samples on a box-shaped node lattice with explicit positions.
struct Lattice {
    shape: [usize; 3],
    values: Vec<f64>,
    /// Padding nodes on the Dirichlet box boundary. Crossings towards them
    /// are placed on the node itself, so cells touching the box are closed
    /// by faces lying on the boundary.
    pinned: Vec<bool>,
    origin: [f64; 3],
    h: f64,
}

impl Lattice {
    fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.shape[0] * (c[1] + self.shape[1] * c[2])
    }

    fn position(&self, c: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + c[a] as f64 * self.h)
    }
}

/// Dirichlet grids get a pinned padding layer on the box boundary, where the
/// Dirichlet condition sits; periodic grids are rolled
/// so that each axis starts at a plane lying entirely at or below `level`,
/// and that plane is repeated at the end.
fn lattice(grid: &Grid, density: &[f64], level: f64) -> Result<Lattice> {
    let shape = grid.shape();
    let h = grid.spacing();
    let origin = grid.origin();
    let value = |c: [usize; 3]| {
        let i = grid.index(c);
        if grid.mask()[i] {
            density[i]
        } else {
            0.0
        }
    };
    match grid.boundary_mode() {
        BoundaryMode::Dirichlet => {
            let ls = [shape[0] + 2, shape[1] + 2, shape[2] + 2];
            let len = ls[0] * ls[1] * ls[2];
            let mut values = vec![0.0; len];
            let mut pinned = vec![true; len];
            for k in 0..shape[2] {
                for j in 0..shape[1] {
                    for i in 0..shape[0] {
                        let at = (i + 1) + ls[0] * ((j + 1) + ls[1] * (k + 1));
                        values[at] = value([i, j, k]);
                        pinned[at] = false;
                    }
                }
            }
            Ok(Lattice {
                shape: ls,
                values,
                pinned,
                origin: std::array::from_fn(|a| origin[a] - h),
                h,
            })
        }
        BoundaryMode::Periodic => {
            let mut shift = [0usize; 3];
            for a in 0..3 {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                shift[a] = (0..shape[a])
                    .find(|&p| {
                        (0..shape[b]).all(|q| {
                            (0..shape[c]).all(|r| {
                                let mut cc = [0; 3];
                                cc[a] = p;
                                cc[b] = q;
                                cc[c] = r;
                                value(cc) <= level
                            })
                        })
                    })
                    .ok_or_else(|| {
                        Error::Isosurface(format!(
                            "level set wraps around the periodic box along axis {a}"
                        ))
                    })?;
            }
            let ls = [shape[0] + 1, shape[1] + 1, shape[2] + 1];
            let mut values = vec![0.0; ls[0] * ls[1] * ls[2]];
            for k in 0..ls[2] {
                for j in 0..ls[1] {
                    for i in 0..ls[0] {
                        let src = [
                            (i + shift[0]) % shape[0],
                            (j + shift[1]) % shape[1],
                            (k + shift[2]) % shape[2],
                        ];
                        values[i + ls[0] * (j + ls[1] * k)] = value(src);
                    }
                }
            }
            Ok(Lattice {
                shape: ls,
                pinned: vec![false; values.len()],
                values,
                origin: std::array::from_fn(|a| origin[a] + shift[a] as f64 * h),
                h,
            })
        }
    }
}

/// The six Kuhn tetrahedra of the unit cube, as corner offsets.
fn kuhn_tetrahedra() -> [[[usize; 3]; 4]; 6] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS.map(|p| {
        let mut out = [[0usize; 3]; 4];
        for s in 1..4 {
            out[s] = out[s - 1];
            out[s][p[s - 1]] = 1;
        }
        out
    })
}

struct Builder<'a> {
    lat: &'a Lattice,
    level: f64,
    vertices: Vec<[f64; 3]>,
    welded: HashMap<(usize, usize), usize>,
    triangles: Vec<[usize; 3]>,
}

impl Builder<'_> {
    fn crossing(&mut self, a: [usize; 3], b: [usize; 3]) -> usize {
        let (ia, ib) = (self.lat.index(a), self.lat.index(b));
        let pin = [ia, ib].into_iter().find(|&i| self.lat.pinned[i]);
        let key = match pin {
            Some(p) => (p, p),
            None => (ia.min(ib), ia.max(ib)),
        };
        if let Some(&v) = self.welded.get(&key) {
            return v;
        }
        let (fa, fb) = (self.lat.values[ia], self.lat.values[ib]);
        let t = match pin {
            Some(p) if p == ia => 0.0,
            Some(_) => 1.0,
            None => ((self.level - fa) / (fb - fa)).clamp(T_MARGIN, 1.0 - T_MARGIN),
        };
        let (pa, pb) = (self.lat.position(a), self.lat.position(b));
        self.vertices
            .push(std::array::from_fn(|k| pa[k] + t * (pb[k] - pa[k])));
        let v = self.vertices.len() - 1;
        self.welded.insert(key, v);
        v
    }

    /// Adds `tri`, flipped if needed so its normal points from `inside`
    /// towards `outside`.
    fn push(&mut self, mut tri: [usize; 3], inside: [f64; 3], outside: [f64; 3]) {
        // Collapsed by pinning.
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return;
        }
        let [p, q, r] = tri.map(|i| self.vertices[i]);
        let e1: [f64; 3] = std::array::from_fn(|k| q[k] - p[k]);
        let e2: [f64; 3] = std::array::from_fn(|k| r[k] - p[k]);
        let n = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        let d: f64 = (0..3).map(|k| n[k] * (outside[k] - inside[k])).sum();
        if d < 0.0 {
            tri.swap(1, 2);
        }
        self.triangles.push(tri);
    }

    fn tetrahedron(&mut self, corners: [[usize; 3]; 4]) {
        let inside: Vec<usize> = (0..4)
            .filter(|&i| self.lat.values[self.lat.index(corners[i])] > self.level)
            .collect();
        let outside: Vec<usize> = (0..4).filter(|i| !inside.contains(i)).collect();
        let centroid = |idx: &[usize], lat: &Lattice| -> [f64; 3] {
            let mut c = [0.0; 3];
            for &i in idx {
                let p = lat.position(corners[i]);
                for k in 0..3 {
                    c[k] += p[k] / idx.len() as f64;
                }
            }
            c
        };
        match inside.len() {
            1 | 3 => {
                let (lone, rest) = if inside.len() == 1 {
                    (inside[0], &outside)
                } else {
                    (outside[0], &inside)
                };
                let tri = [
                    self.crossing(corners[lone], corners[rest[0]]),
                    self.crossing(corners[lone], corners[rest[1]]),
                    self.crossing(corners[lone], corners[rest[2]]),
                ];
                let (ci, co) = (centroid(&inside, self.lat), centroid(&outside, self.lat));
                self.push(tri, ci, co);
            }
            2 => {
                let (a, b, c, d) = (inside[0], inside[1], outside[0], outside[1]);
                let ac = self.crossing(corners[a], corners[c]);
                let ad = self.crossing(corners[a], corners[d]);
                let bd = self.crossing(corners[b], corners[d]);
                let bc = self.crossing(corners[b], corners[c]);
                let (ci, co) = (centroid(&inside, self.lat), centroid(&outside, self.lat));
                self.push([ac, ad, bd], ci, co);
                self.push([ac, bd, bc], ci, co);
            }
            _ => {}
        }
    }
}

/// Closed, outward-oriented triangulation of `{φ = level}` for a density on
/// a 3D grid (`{φ > level}` is the inside).
pub fn extract_isosurface(grid: &Grid, density: &[f64], level: f64) -> Result<TriMesh> {
    if grid.dim() != 3 {
        return Err(Error::Isosurface("isosurfaces need a 3D grid".into()));
    }
    if density.len() != grid.node_count() {
        return Err(Error::Isosurface("density length does not match the grid".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Isosurface(format!("level {level} must lie strictly between 0 and 1")));
    }
    if !density
        .iter()
        .zip(grid.mask())
        .any(|(&v, &m)| m && v > level)
    {
        return Err(Error::Isosurface(format!("level set {{φ > {level}}} is empty")));
    }
    let lat = lattice(grid, density, level)?;
    let tets = kuhn_tetrahedra();
    let mut b = Builder {
        lat: &lat,
        level,
        vertices: Vec::new(),
        welded: HashMap::new(),
        triangles: Vec::new(),
    };
    let s = lat.shape;
    for k in 0..s[2] - 1 {
        for j in 0..s[1] - 1 {
            for i in 0..s[0] - 1 {
                let base = [i, j, k];
                let vals: Vec<bool> = (0..8)
                    .map(|m| {
                        let c = [i + (m & 1), j + (m >> 1 & 1), k + (m >> 2 & 1)];
                        lat.values[lat.index(c)] > level
                    })
                    .collect();
                if vals.iter().all(|&v| v) || vals.iter().all(|&v| !v) {
                    continue;
                }
                for t in &tets {
                    b.tetrahedron(t.map(|o| [base[0] + o[0], base[1] + o[1], base[2] + o[2]]));
                }
            }
        }
    }
    TriMesh::new(b.vertices, b.triangles)
        .map_err(|e| Error::Isosurface(format!("extracted mesh is invalid: {e}")))
}
