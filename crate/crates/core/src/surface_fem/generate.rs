use std::collections::HashMap;
use std::f64::consts::PI;

use super::{cross, dot3, sub, TriMesh};
use crate::error::{Error, Result};

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot3(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Flips triangles whose normal points against `outward(centroid)`.
fn orient(vertices: &[[f64; 3]], triangles: &mut [[usize; 3]], outward: impl Fn([f64; 3]) -> [f64; 3]) {
    for tri in triangles.iter_mut() {
        let [a, b, c] = tri.map(|i| vertices[i]);
        let n = cross(sub(b, a), sub(c, a));
        let g = [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ];
        if dot3(n, outward(g)) < 0.0 {
            tri.swap(1, 2);
        }
    }
}

/// Icosahedron subdivided `subdivisions` times, projected onto the unit
/// sphere: `10·4^s + 2` vertices, `20·4^s` outward-oriented triangles.
pub fn generate_sphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize)
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let mut mid = |i: usize, j: usize| {
                *midpoint.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    let (p, q) = (vertices[i], vertices[j]);
                    vertices.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                    vertices.len() - 1
                })
            };
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    orient(&vertices, &mut triangles, |g| g);
    TriMesh {
        vertices,
        triangles,
    }
}

/// Parametric torus with major radius `major`, minor radius `minor`, `nu`
/// segments around the axis and `nv` around the tube.
pub fn generate_torus(major: f64, minor: f64, nu: usize, nv: usize) -> Result<TriMesh> {
    if !(major > minor && minor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "torus radii must satisfy R > r > 0, got R={major}, r={minor}"
        )));
    }
    if nu < 3 || nv < 3 {
        return Err(Error::InvalidArgument("torus needs at least 3 segments per direction".into()));
    }
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let w = major + minor * v.cos();
            vertices.push([w * u.cos(), w * u.sin(), minor * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Surface of the box `[lower, upper]` with `divisions[a]` segments along
/// axis `a`, outward oriented.
pub fn generate_box(lower: [f64; 3], upper: [f64; 3], divisions: [usize; 3]) -> Result<TriMesh> {
    if (0..3).any(|a| !(upper[a] > lower[a]) || divisions[a] == 0) {
        return Err(Error::InvalidArgument("box needs positive extent and divisions".into()));
    }
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vertex = |l: [usize; 3]| {
        *index.entry(l).or_insert_with(|| {
            vertices.push(std::array::from_fn(|a| {
                lower[a] + (upper[a] - lower[a]) * l[a] as f64 / divisions[a] as f64
            }));
            vertices.len() - 1
        })
    };
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for side in [0, divisions[a]] {
            for p in 0..divisions[b] {
                for q in 0..divisions[c] {
                    let at = |dp: usize, dq: usize| {
                        let mut l = [0; 3];
                        l[a] = side;
                        l[b] = p + dp;
                        l[c] = q + dq;
                        l
                    };
                    let v00 = vertex(at(0, 0));
                    let v10 = vertex(at(1, 0));
                    let v11 = vertex(at(1, 1));
                    let v01 = vertex(at(0, 1));
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                }
            }
        }
    }
    let centre: [f64; 3] = std::array::from_fn(|a| 0.5 * (lower[a] + upper[a]));
    orient(&vertices, &mut triangles, |g| {
        // Outward direction of the face containing g.
        let mut best = (0, 0.0);
        for a in 0..3 {
            let r = (g[a] - centre[a]) / (upper[a] - lower[a]);
            if r.abs() > f64::abs(best.1) {
                best = (a, r);
            }
        }
        let mut n = [0.0; 3];
        n[best.0] = best.1.signum();
        n
    });
    TriMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_counts() {
        for s in 0..5u32 {
            let m = generate_sphere(s);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.triangle_count(), 20 * 4usize.pow(s));
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.is_oriented_closed());
            assert!(m.enclosed_volume() > 0.0);
        }
        assert_eq!(generate_sphere(5).vertex_count(), 10242);
    }

    #[test]
    fn box_surface() {
        let b = generate_box([0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [2, 3, 4]).unwrap();
        assert!(b.is_oriented_closed());
        assert_eq!(b.euler_characteristic(), 2);
        assert!((b.area() - 22.0).abs() < 1e-12);
        assert!((b.enclosed_volume() - 6.0).abs() < 1e-12);
    }
}
