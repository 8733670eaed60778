//! P1 finite elements on triangulated surfaces.
//!
//! The surface cell eigenproblem is `K u + C·S(φ) u = λ M u` with `K` the
//! cotangent stiffness matrix, `M` the consistent mass matrix and
//! `S(φ) = ½(D M + M D)`, `D = diag(1 − φ)`.

mod generate;
mod io;

use std::collections::HashMap;

pub use generate::{generate_box, generate_sphere, generate_torus};
pub use io::{load_mesh, parse_obj, parse_off, write_obj, write_ply, MeshFormat};

use crate::adjacency::Adjacency;
use crate::error::{Error, Result};
use crate::neighborhood::{computational_neighborhood, Neighborhood, DEFAULT_THRESHOLD};
use crate::sparse::SparseOperator;

/// Default hop count for surface computational neighborhoods.
pub const DEFAULT_HOPS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

impl TriMesh {
    /// Validates indices and rejects degenerate triangles
    /// (area ≤ 1e-14·bbox²).
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let mesh = Self {
            vertices,
            triangles,
        };
        let nv = mesh.vertices.len();
        let diag2 = {
            let (lo, hi) = mesh.bounding_box();
            let d = sub(hi, lo);
            dot3(d, d)
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references vertex {bad} of {nv}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            if !(mesh.triangle_area(t) > 1e-14 * diag2) {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    fn corners(&self, t: usize) -> [[f64; 3]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized normal `(b − a) × (c − a)`, of length twice the area.
    pub fn triangle_normal(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        cross(sub(b, a), sub(c, a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * norm3(self.triangle_normal(t))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed volume `∮ x·n / 3`; positive for outward orientation.
    pub fn enclosed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                dot3(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Undirected edges with their triangle counts, sorted.
    pub fn edges(&self) -> Vec<((usize, usize), usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut out: Vec<_> = count.into_iter().collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edges().iter().all(|&(_, c)| c == 2)
    }

    /// Closed, with each directed edge used once (consistent orientation).
    pub fn is_oriented_closed(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u8> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Error unless the mesh is a closed manifold surface.
    pub fn require_closed(&self) -> Result<()> {
        match self.edges().iter().find(|&&(_, c)| c != 2) {
            None => Ok(()),
            Some(&((a, b), c)) => Err(Error::InvalidMesh(format!(
                "edge ({a}, {b}) is shared by {c} triangles"
            ))),
        }
    }

    /// Vertices sharing an edge.
    pub fn vertex_adjacency(&self) -> Adjacency {
        let mut lists = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        Adjacency::from_lists(lists)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] * s, v[1] * s, v[2] * s])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn translated(&self, d: [f64; 3]) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + d[0], v[1] + d[1], v[2] + d[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Image under a 3×3 matrix (rows), e.g. a rotation.
    pub fn transformed(&self, m: [[f64; 3]; 3]) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|&v| [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Reverses every triangle.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }
}

/// Mass and stiffness matrices of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FemPair {
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
}

impl FemPair {
    /// Row sums of the mass matrix.
    pub fn lumped_mass(&self) -> Vec<f64> {
        self.mass.row_sums()
    }
}

/// Consistent P1 mass matrix and cotangent stiffness matrix.
pub fn assemble_mass_stiffness(mesh: &TriMesh) -> Result<FemPair> {
    let nv = mesh.vertex_count();
    let mut mt = Vec::with_capacity(9 * mesh.triangle_count());
    let mut kt = Vec::with_capacity(9 * mesh.triangle_count());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.corners(t);
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
        }
        // Edge opposite to each corner.
        let e = [sub(p[2], p[1]), sub(p[0], p[2]), sub(p[1], p[0])];
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mt.push((tri[i], tri[j], m));
                kt.push((tri[i], tri[j], dot3(e[i], e[j]) / (4.0 * area)));
            }
        }
    }
    Ok(FemPair {
        mass: SparseOperator::from_triplets(nv, mt)?,
        stiffness: SparseOperator::from_triplets(nv, kt)?,
    })
}

/// Mass matrix weighted by the P1 function `w`, `∫ w φ_i φ_j`, restricted
/// to the vertices `nodes` (sorted) and numbered by position in `nodes`.
/// Positive semidefinite whenever `w ≥ 0`; `w ≡ 1` gives the consistent mass.
pub fn weighted_mass(mesh: &TriMesh, w: &[f64], nodes: &[usize]) -> Result<SparseOperator> {
    assert_eq!(w.len(), mesh.vertex_count());
    let mut local = vec![usize::MAX; mesh.vertex_count()];
    for (l, &g) in nodes.iter().enumerate() {
        *local.get_mut(g).ok_or(Error::IndexOutOfRange {
            index: g,
            order: mesh.vertex_count(),
        })? = l;
    }
    let mut t = Vec::new();
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let l = tri.map(|v| local[v]);
        if l.iter().all(|&x| x == usize::MAX) {
            continue;
        }
        let a = mesh.triangle_area(k);
        let wt = tri.map(|v| w[v]);
        let sum: f64 = wt.iter().sum();
        for i in 0..3 {
            if l[i] == usize::MAX {
                continue;
            }
            for j in 0..3 {
                if l[j] == usize::MAX {
                    continue;
                }
                // ∫λ_i³ = A/10, ∫λ_i²λ_j = A/30, ∫λ_iλ_jλ_k = A/60.
                let v = if i == j {
                    a / 10.0 * wt[i] + a / 30.0 * (sum - wt[i])
                } else {
                    a / 30.0 * (wt[i] + wt[j]) + a / 60.0 * (sum - wt[i] - wt[j])
                };
                t.push((l[i], l[j], v));
            }
        }
    }
    SparseOperator::from_triplets(nodes.len(), t)
}

/// `∫ φ_k u²` for every vertex `k`, where `u` is the P1 function with
/// nodal values `u`. Sums to `uᵀ M u`.
pub fn vertex_moments(mesh: &TriMesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.vertex_count()];
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let x = tri.map(|v| u[v]);
        if x.iter().all(|&v| v == 0.0) {
            continue;
        }
        let a = mesh.triangle_area(k);
        for (i, &v) in tri.iter().enumerate() {
            let xi = x[i];
            let (xj, xk) = (x[(i + 1) % 3], x[(i + 2) % 3]);
            out[v] += a / 10.0 * xi * xi
                + a / 30.0 * (xj * xj + xk * xk)
                + a / 15.0 * xi * (xj + xk)
                + a / 30.0 * xj * xk;
        }
    }
    out
}

/// Vertices within `hops` edges of `{φ > threshold}`.
pub fn surface_neighborhood(
    density: &[f64],
    adjacency: &Adjacency,
    hops: usize,
    threshold: f64,
) -> Result<Neighborhood> {
    computational_neighborhood(density, adjacency, hops, threshold)
}

/// [`surface_neighborhood`] with the default hop count and threshold.
pub fn default_surface_neighborhood(density: &[f64], adjacency: &Adjacency) -> Result<Neighborhood> {
    surface_neighborhood(density, adjacency, DEFAULT_HOPS, DEFAULT_THRESHOLD)
}
