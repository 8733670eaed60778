//! Neighbors up to order `p` and per-cell computational neighborhoods.
//!
//! A cell's eigenproblem is solved only on the nodes within `p` adjacency hops
//! of its support `{φ > threshold}`. Nodes just outside the support stay in
//! the problem so that the penalization recovers the Dirichlet condition.

use std::collections::VecDeque;

use crate::adjacency::Adjacency;
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Support threshold for the computational neighborhood.
pub const DEFAULT_THRESHOLD: f64 = 0.01;
/// Default neighbor order on grids.
pub const DEFAULT_ORDER: usize = 6;

/// For every node, the nodes at hop distance `1..=order` (self excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    order: usize,
    offsets: Vec<usize>,
    nodes: Vec<usize>,
}

impl Reachability {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sorted reachable set of node `i`.
    pub fn reachable(&self, i: usize) -> &[usize] {
        &self.nodes[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Materializes the order-`p` reachability relation by `p` rounds of
/// frontier expansion from every node.
pub fn neighbors_up_to_order(adjacency: &Adjacency, p: usize) -> Result<Reachability> {
    if p == 0 {
        return Err(Error::InvalidArgument("neighbor order must be at least 1".into()));
    }
    let n = adjacency.node_count();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut nodes = Vec::new();
    let mut stamp = vec![usize::MAX; n];
    let mut frontier = Vec::new();
    let mut next = Vec::new();
    for s in 0..n {
        stamp[s] = s;
        frontier.clear();
        frontier.push(s);
        let start = nodes.len();
        for _ in 0..p {
            next.clear();
            for &v in &frontier {
                for &w in adjacency.neighbors(v) {
                    if stamp[w] != s {
                        stamp[w] = s;
                        next.push(w);
                        nodes.push(w);
                    }
                }
            }
            std::mem::swap(&mut frontier, &mut next);
            if frontier.is_empty() {
                break;
            }
        }
        nodes[start..].sort_unstable();
        offsets.push(nodes.len());
    }
    Ok(Reachability {
        order: p,
        offsets,
        nodes,
    })
}

/// Sorted global node list of a cell's computational neighborhood. The local
/// index of a node is its position in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    nodes: Vec<usize>,
    total: usize,
}

impl Neighborhood {
    /// Neighborhood covering all `total` nodes.
    pub fn full(total: usize) -> Self {
        Self {
            nodes: (0..total).collect(),
            total,
        }
    }

    /// From an arbitrary node list (sorted and deduplicated here).
    pub fn from_nodes(mut nodes: Vec<usize>, total: usize) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::EmptyNeighborhood);
        }
        if let Some(&last) = nodes.last() {
            if last >= total {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    order: total,
                });
            }
        }
        Ok(Self { nodes, total })
    }

    /// Built from a materialized reachability relation.
    pub fn from_reachability(density: &[f64], reach: &Reachability, threshold: f64) -> Result<Self> {
        let mut nodes = Vec::new();
        for (i, &phi) in density.iter().enumerate() {
            if phi > threshold {
                nodes.push(i);
                nodes.extend_from_slice(reach.reachable(i));
            }
        }
        if nodes.is_empty() {
            return Err(Error::CellVanished { threshold });
        }
        Self::from_nodes(nodes, density.len())
    }

    /// Local → global map.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node count of the ambient grid or mesh.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Global → local map.
    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.nodes.binary_search(&global).ok()
    }

    pub fn contains(&self, global: usize) -> bool {
        self.local_index(global).is_some()
    }

    /// Values of a global field at the neighborhood nodes.
    pub fn restrict(&self, field: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&g| field[g]).collect()
    }

    /// Zero extension of a local field to the ambient node set.
    pub fn extend(&self, local: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (&g, &v) in self.nodes.iter().zip(local) {
            out[g] = v;
        }
        out
    }
}

/// Nodes within `order` hops of `{density > threshold}`, by multi-source
/// breadth-first search.
pub fn computational_neighborhood(
    density: &[f64],
    adjacency: &Adjacency,
    order: usize,
    threshold: f64,
) -> Result<Neighborhood> {
    let n = adjacency.node_count();
    if density.len() != n {
        return Err(Error::InvalidArgument(format!(
            "density has {} values for {} nodes",
            density.len(),
            n
        )));
    }
    let mut depth = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for (i, &phi) in density.iter().enumerate() {
        if phi > threshold {
            depth[i] = 0;
            queue.push_back(i);
        }
    }
    if queue.is_empty() {
        return Err(Error::CellVanished { threshold });
    }
    let order = order as u32;
    while let Some(v) = queue.pop_front() {
        let d = depth[v];
        if d >= order {
            continue;
        }
        for &w in adjacency.neighbors(v) {
            if depth[w] == u32::MAX {
                depth[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    let nodes = (0..n).filter(|&i| depth[i] != u32::MAX).collect();
    Ok(Neighborhood { nodes, total: n })
}

/// Principal submatrix of `op` on the neighborhood, in local numbering.
pub fn restrict_operator(op: &SparseOperator, neighborhood: &Neighborhood) -> Result<SparseOperator> {
    if op.order() != neighborhood.total() {
        return Err(Error::InvalidArgument(format!(
            "operator of order {} does not match neighborhood over {} nodes",
            op.order(),
            neighborhood.total()
        )));
    }
    op.principal_submatrix(neighborhood.nodes())
}
