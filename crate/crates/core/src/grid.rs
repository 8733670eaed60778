//! Structured finite-difference grids on rectangular boxes in 2D and 3D,
//! optional general-domain masks, and the discrete Laplacian.
//!
//! Nodes are numbered lexicographically with `x` fastest. In Dirichlet mode
//! only interior points of the bounding box are nodes (the boundary value 0
//! is implicit); in periodic mode the box is a torus.

use serde::{Deserialize, Serialize};

use crate::adjacency::Adjacency;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    #[default]
    Dirichlet,
    Periodic,
}

/// Shape of the domain `D` inside its bounding box `D′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainShape {
    /// `D = D′`.
    #[default]
    Box,
    /// Disk in 2D, ball in 3D.
    Disk { center: Vec<f64>, radius: f64 },
    Triangle { vertices: [[f64; 2]; 3] },
    Polygon { vertices: Vec<[f64; 2]> },
    Tetrahedron { vertices: [[f64; 3]; 4] },
    /// `D = {f < 0}`.
    Implicit { expression: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub shape: DomainShape,
}

impl DomainSpec {
    pub fn unit_square() -> Self {
        Self::bounding_box(&[0.0, 0.0], &[1.0, 1.0])
    }

    pub fn unit_cube() -> Self {
        Self::bounding_box(&[0.0; 3], &[1.0; 3])
    }

    pub fn bounding_box(lower: &[f64], upper: &[f64]) -> Self {
        Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            shape: DomainShape::Box,
        }
    }

    pub fn with_shape(mut self, shape: DomainShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(dim == 2 || dim == 3) || self.upper.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "bounding box must be 2D or 3D with matching corners, got {} and {} coordinates",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for k in 0..dim {
            if !(self.lower[k].is_finite() && self.upper[k].is_finite())
                || self.upper[k] <= self.lower[k]
            {
                return Err(Error::InvalidGrid(format!("empty extent along axis {k}")));
            }
        }
        match &self.shape {
            DomainShape::Disk { center, radius } => {
                if center.len() != dim || !(*radius > 0.0) {
                    return Err(Error::InvalidGrid(
                        "disk needs a center of the grid dimension and a positive radius".into(),
                    ));
                }
            }
            DomainShape::Triangle { .. } | DomainShape::Polygon { .. } if dim != 2 => {
                return Err(Error::InvalidGrid("polygonal domains are 2D only".into()));
            }
            DomainShape::Polygon { vertices } if vertices.len() < 3 => {
                return Err(Error::InvalidGrid("polygon needs at least 3 vertices".into()));
            }
            DomainShape::Tetrahedron { .. } if dim != 3 => {
                return Err(Error::InvalidGrid("tetrahedral domains are 3D only".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Membership predicate for points of the bounding box.
    pub fn membership(&self) -> Result<Box<dyn Fn(&[f64; 3]) -> bool + Send + Sync>> {
        self.validate()?;
        let dim = self.dim();
        Ok(match self.shape.clone() {
            DomainShape::Box => Box::new(|_| true),
            DomainShape::Disk { center, radius } => Box::new(move |p| {
                (0..dim).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>() < radius * radius
            }),
            DomainShape::Triangle { vertices } => {
                Box::new(move |p| point_in_polygon(&vertices, [p[0], p[1]]))
            }
            DomainShape::Polygon { vertices } => {
                Box::new(move |p| point_in_polygon(&vertices, [p[0], p[1]]))
            }
            DomainShape::Tetrahedron { vertices } => {
                Box::new(move |p| point_in_tetrahedron(&vertices, p))
            }
            DomainShape::Implicit { expression } => {
                let f = Expr::parse(&expression)?;
                Box::new(move |p| f.eval(p) < 0.0)
            }
        })
    }
}

fn point_in_polygon(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn point_in_tetrahedron(v: &[[f64; 3]; 4], p: &[f64; 3]) -> bool {
    let sub = |a: &[f64; 3], b: &[f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let det = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
    };
    let orient = |a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], d: &[f64; 3]| {
        det(sub(b, a), sub(c, a), sub(d, a))
    };
    let total = orient(&v[0], &v[1], &v[2], &v[3]);
    let parts = [
        orient(p, &v[1], &v[2], &v[3]),
        orient(&v[0], p, &v[2], &v[3]),
        orient(&v[0], &v[1], p, &v[3]),
        orient(&v[0], &v[1], &v[2], p),
    ];
    parts.iter().all(|&s| s * total > 0.0)
}

/// Structured grid with uniform spacing `h` on every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    shape: [usize; 3],
    h: f64,
    origin: [f64; 3],
    lower: [f64; 3],
    upper: [f64; 3],
    boundary: BoundaryMode,
    mask: Vec<bool>,
}

/// Builds the grid of `domain`'s bounding box with `resolution` nodes along
/// the first axis; the other axes take whatever node count keeps the spacing
/// uniform, which must come out integral.
pub fn build_grid(domain: &DomainSpec, resolution: usize, boundary: BoundaryMode) -> Result<Grid> {
    let inside = domain.membership()?;
    if resolution < 3 {
        return Err(Error::InvalidGrid(format!(
            "resolution must be at least 3 per axis, got {resolution}"
        )));
    }
    let dim = domain.dim();
    let len0 = domain.upper[0] - domain.lower[0];
    let intervals0 = match boundary {
        BoundaryMode::Dirichlet => resolution + 1,
        BoundaryMode::Periodic => resolution,
    };
    let h = len0 / intervals0 as f64;
    let mut shape = [1usize; 3];
    let mut lower = [0.0; 3];
    let mut upper = [0.0; 3];
    let mut origin = [0.0; 3];
    for k in 0..dim {
        let len = domain.upper[k] - domain.lower[k];
        let ratio = len / h;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "axis {k} extent {len} is not a multiple of the spacing {h}; non-uniform spacing is not supported"
            )));
        }
        let intervals = intervals as usize;
        shape[k] = match boundary {
            BoundaryMode::Dirichlet => intervals.saturating_sub(1),
            BoundaryMode::Periodic => intervals,
        };
        if shape[k] < 3 {
            return Err(Error::InvalidGrid(format!(
                "axis {k} would have {} nodes; at least 3 are required",
                shape[k]
            )));
        }
        lower[k] = domain.lower[k];
        upper[k] = domain.upper[k];
        origin[k] = match boundary {
            BoundaryMode::Dirichlet => lower[k] + h,
            BoundaryMode::Periodic => lower[k],
        };
    }
    let mut grid = Grid {
        dim,
        shape,
        h,
        origin,
        lower,
        upper,
        boundary,
        mask: Vec::new(),
    };
    grid.mask = (0..grid.node_count())
        .map(|i| inside(&grid.position(i)))
        .collect();
    if !grid.mask.iter().any(|&m| m) {
        return Err(Error::EmptyDomain);
    }
    Ok(grid)
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis; the third entry is 1 in 2D.
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 3] {
        self.upper
    }

    /// Coordinates of node `(0, 0, 0)`.
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn in_domain_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Quadrature weight of one node, `h^dim`.
    pub fn node_weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.shape[0] * (c[1] + self.shape[1] * c[2])
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.shape[0];
        let rest = idx / self.shape[0];
        [i, rest % self.shape[1], rest / self.shape[1]]
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = self.origin[k] + c[k] as f64 * self.h;
        }
        p
    }

    /// Order-1 neighbors of `idx` along each axis, with periodic wrap when
    /// enabled. Nodes outside the box (Dirichlet) are omitted.
    pub fn stencil_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(idx);
        (0..self.dim).flat_map(move |k| {
            let n = self.shape[k];
            let down = if c[k] > 0 {
                Some(c[k] - 1)
            } else if self.boundary == BoundaryMode::Periodic {
                Some(n - 1)
            } else {
                None
            };
            let up = if c[k] + 1 < n {
                Some(c[k] + 1)
            } else if self.boundary == BoundaryMode::Periodic {
                Some(0)
            } else {
                None
            };
            [down, up].into_iter().flatten().map(move |v| {
                let mut cc = c;
                cc[k] = v;
                self.index(cc)
            })
        })
    }

    /// Grid with identical geometry and a different mask.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.node_count() {
            return Err(Error::InvalidGrid("mask length does not match node count".into()));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { mask, ..self.clone() })
    }
}

/// Standard `(2·dim)/h²` diagonal, `−1/h²` off-diagonal stencil.
pub fn assemble_laplacian(grid: &Grid) -> SparseOperator {
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let diag = 2.0 * grid.dim as f64 * inv_h2;
    let n = grid.node_count();
    let mut triplets = Vec::with_capacity(n * (2 * grid.dim + 1));
    for i in 0..n {
        triplets.push((i, i, diag));
        for j in grid.stencil_neighbors(i) {
            triplets.push((i, j, -inv_h2));
        }
    }
    SparseOperator::from_triplets(n, triplets).expect("stencil indices are in range")
}

/// Node adjacency read off the Laplacian's off-diagonal pattern.
pub fn adjacency(grid: &Grid) -> Adjacency {
    Adjacency::from_operator(&assemble_laplacian(grid))
}
