use crate::sparse::SparseOperator;

/// Order-1 neighbor lists, stored contiguously. Used for grid nodes and mesh
/// vertices alike.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Adjacency {
    /// `i ~ j` iff `op[i][j] != 0` and `i != j`.
    pub fn from_operator(op: &SparseOperator) -> Self {
        let mut offsets = Vec::with_capacity(op.order() + 1);
        offsets.push(0);
        let mut neighbors = Vec::with_capacity(op.nnz());
        for i in 0..op.order() {
            let (cols, vals) = op.row(i);
            neighbors.extend(
                cols.iter()
                    .zip(vals)
                    .filter(|&(&j, &v)| j != i && v != 0.0)
                    .map(|(&j, _)| j),
            );
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    /// Builds from per-node lists; lists are sorted and deduplicated.
    pub fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for (i, mut l) in lists.into_iter().enumerate() {
            l.sort_unstable();
            l.dedup();
            neighbors.extend(l.into_iter().filter(|&j| j != i));
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.node_count()).all(|i| self.neighbors(i).iter().all(|&j| self.contains(j, i)))
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}
