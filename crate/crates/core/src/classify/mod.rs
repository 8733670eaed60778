//! Cell classification: neighbor counts from the partition graph, and
//! Laplace–Beltrami spectral signatures of extracted cell surfaces.

mod isosurface;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use isosurface::extract_isosurface;

use crate::adjacency::Adjacency;
use crate::eigensolve::{smallest_eigenpairs, EigOptions};
use crate::error::{Error, Result};
use crate::partition_opt::DensitySet;
use crate::surface_fem::{assemble_mass_stiffness, TriMesh};

/// Default level set for cell membership.
pub const DEFAULT_LEVEL: f64 = 0.5;
/// Default number of eigenvalues per signature.
pub const DEFAULT_SIGNATURE_LEN: usize = 10;
/// Default similarity threshold.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Which cells touch which.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellAdjacencyGraph {
    pub cells: usize,
    /// Pairs `(i, j)` with `i < j`.
    pub edges: BTreeSet<(usize, usize)>,
    /// Cells with no node above the level.
    pub empty: Vec<usize>,
}

impl CellAdjacencyGraph {
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn neighbor_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.cells];
        for &(a, b) in &self.edges {
            c[a] += 1;
            c[b] += 1;
        }
        c
    }

    /// Number of cells with each neighbor count, as `(count, cells)` pairs.
    pub fn histogram(&self) -> Vec<(usize, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for (i, c) in self.neighbor_counts().into_iter().enumerate() {
            if !self.empty.contains(&i) {
                *h.entry(c).or_insert(0) += 1;
            }
        }
        h.into_iter().collect()
    }
}

/// Cells `i` and `j` are adjacent iff a node with `φ_i > level` is an
/// order-1 neighbor of a node with `φ_j > level`.
pub fn count_cell_neighbors(
    densities: &DensitySet,
    adjacency: &Adjacency,
    level: f64,
) -> Result<CellAdjacencyGraph> {
    let n = densities.cell_count();
    let nodes = densities.node_count();
    if adjacency.node_count() != nodes {
        return Err(Error::InvalidArgument(
            "adjacency and densities disagree on node count".into(),
        ));
    }
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut empty = Vec::new();
    for (i, cell) in densities.cells().enumerate() {
        let mut any = false;
        for (x, &p) in cell.iter().enumerate() {
            if p > level {
                owners[x].push(i);
                any = true;
            }
        }
        if !any {
            empty.push(i);
        }
    }
    let mut edges = BTreeSet::new();
    for x in 0..nodes {
        for &i in &owners[x] {
            for &y in adjacency.neighbors(x) {
                for &j in &owners[y] {
                    if i != j {
                        edges.insert((i.min(j), i.max(j)));
                    }
                }
            }
        }
    }
    Ok(CellAdjacencyGraph {
        cells: n,
        edges,
        empty,
    })
}

/// Unit-norm vector of the `k` smallest Laplace–Beltrami eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSignature {
    pub values: Vec<f64>,
}

impl SpectralSignature {
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("signature has zero norm".into()));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// The `k` smallest eigenvalues of `(K, M)` on a closed mesh, normalized.
pub fn spectral_signature(mesh: &TriMesh, k: usize) -> Result<SpectralSignature> {
    if k < 2 {
        return Err(Error::InvalidArgument("signature needs at least 2 eigenvalues".into()));
    }
    mesh.require_closed()?;
    if k > mesh.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "{k} eigenvalues requested from a mesh with {} vertices",
            mesh.vertex_count()
        )));
    }
    let fem = assemble_mass_stiffness(mesh)?;
    let opts = EigOptions {
        guard_vectors: 3,
        ..EigOptions::default()
    };
    let pairs = smallest_eigenpairs(&fem.stiffness, Some(&fem.mass), k, None, &opts)?;
    let mut values: Vec<f64> = pairs.iter().map(|p| p.eigenvalue).collect();
    values.sort_by(f64::total_cmp);
    SpectralSignature::from_eigenvalues(values)
}

/// Similarity classes and the pairwise signature distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPartition {
    /// Class label per cell; labels are numbered by first occurrence.
    pub classes: Vec<usize>,
    pub distances: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl ClassPartition {
    pub fn class_count(&self) -> usize {
        self.classes.iter().max().map_or(0, |m| m + 1)
    }

    /// Class sizes, largest first.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.class_count()];
        for &c in &self.classes {
            s[c] += 1;
        }
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Classes are the connected components of `{(i, j) : ‖v_i − v_j‖ < ε}`.
pub fn classify_cells(signatures: &[SpectralSignature], epsilon: f64) -> Result<ClassPartition> {
    let n = signatures.len();
    if let Some(k) = signatures.first().map(SpectralSignature::len) {
        if signatures.iter().any(|s| s.len() != k) {
            return Err(Error::InvalidArgument("signatures have different lengths".into()));
        }
    }
    let mut distances = vec![vec![0.0; n]; n];
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = signatures[i].distance(&signatures[j]);
            distances[i][j] = d;
            distances[j][i] = d;
            if d < epsilon {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let classes = (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            label[r]
        })
        .collect();
    Ok(ClassPartition {
        classes,
        distances,
        epsilon,
    })
}

/// `λ₁ · Vol^{2/3}`.
pub fn scale_invariant_eigenvalue(lambda: f64, volume: f64) -> Result<f64> {
    if !(lambda > 0.0 && volume > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue and volume must be positive, got {lambda} and {volume}"
        )));
    }
    Ok(lambda * volume.powf(2.0 / 3.0))
}

/// Volume enclosed by a closed, outward-oriented cell surface.
pub fn cell_volume(mesh: &TriMesh) -> Result<f64> {
    mesh.require_closed()?;
    Ok(mesh.enclosed_volume())
}
