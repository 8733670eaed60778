use std::io::Write;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::MeshParse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing coordinate"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate {tok:?}")));
    }
    Ok(v)
}

fn finish(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>, lines: &[usize]) -> Result<TriMesh> {
    let nv = vertices.len();
    for (tri, &line) in triangles.iter().zip(lines) {
        if let Some(&bad) = tri.iter().find(|&&i| i >= nv) {
            return Err(parse_err(line, format!("vertex index {bad} out of range ({nv} vertices)")));
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Parses an OFF file (triangles only).
pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut tokens = text.lines().enumerate().flat_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        l.split_whitespace().map(move |t| (i + 1, t))
    })
    .peekable();
    let (line, head) = tokens.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut first_count = None;
    if let Some(rest) = head.strip_prefix("OFF") {
        if !rest.is_empty() {
            first_count = Some((line, rest));
        }
    } else {
        return Err(parse_err(line, "missing OFF header"));
    }
    let mut count = |what: &str| -> Result<usize> {
        let (line, tok) = match first_count.take() {
            Some(t) => t,
            None => tokens
                .next()
                .ok_or_else(|| parse_err(line, format!("missing {what} count")))?,
        };
        tok.parse()
            .map_err(|_| parse_err(line, format!("bad {what} count {tok:?}")))
    };
    let nv = count("vertex")?;
    let nf = count("face")?;
    let _ne = count("edge")?;
    let mut vertices = Vec::with_capacity(nv.min(1 << 20));
    let mut last = line;
    for _ in 0..nv {
        let mut v = [0.0; 3];
        for x in v.iter_mut() {
            let (l, tok) = tokens.next().ok_or_else(|| parse_err(last, "truncated vertex list"))?;
            last = l;
            *x = parse_f64(Some(tok), l)?;
        }
        vertices.push(v);
    }
    let mut triangles = Vec::with_capacity(nf.min(1 << 20));
    let mut lines = Vec::with_capacity(nf.min(1 << 20));
    for _ in 0..nf {
        let (l, tok) = tokens.next().ok_or_else(|| parse_err(last, "truncated face list"))?;
        last = l;
        let k: usize = tok
            .parse()
            .map_err(|_| parse_err(l, format!("bad face size {tok:?}")))?;
        if k != 3 {
            return Err(parse_err(l, format!("face with {k} vertices: triangles only")));
        }
        let mut tri = [0usize; 3];
        for x in tri.iter_mut() {
            let (l2, tok) = tokens.next().ok_or_else(|| parse_err(l, "truncated face"))?;
            if l2 != l {
                return Err(parse_err(l, "truncated face"));
            }
            *x = tok
                .parse()
                .map_err(|_| parse_err(l, format!("bad vertex index {tok:?}")))?;
        }
        triangles.push(tri);
        lines.push(l);
        // Trailing per-face colour values are skipped.
        while tokens.peek().is_some_and(|&(l2, _)| l2 == l) {
            tokens.next();
        }
    }
    finish(vertices, triangles, &lines)
}

/// Parses the `v` and `f` records of an OBJ file (triangles only).
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("");
        let mut it = l.split_whitespace();
        match it.next() {
            Some("v") => {
                let x = parse_f64(it.next(), line)?;
                let y = parse_f64(it.next(), line)?;
                let z = parse_f64(it.next(), line)?;
                vertices.push([x, y, z]);
            }
            Some("f") => {
                let refs: Vec<&str> = it.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        line,
                        format!("face with {} vertices: triangles only", refs.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (x, r) in tri.iter_mut().zip(&refs) {
                    let head = r.split('/').next().unwrap_or("");
                    let k: i64 = head
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad vertex reference {r:?}")))?;
                    let n = vertices.len() as i64;
                    let idx = if k > 0 { k - 1 } else { n + k };
                    if k == 0 || idx < 0 || idx >= n {
                        return Err(parse_err(line, format!("vertex index {k} out of range")));
                    }
                    *x = idx as usize;
                }
                triangles.push(tri);
                lines.push(line);
            }
            _ => {}
        }
    }
    finish(vertices, triangles, &lines)
}

/// Reads an OFF or OBJ file, chosen by extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path).ok_or_else(|| {
        Error::InvalidArgument(format!("unknown mesh format for {}", path.display()))
    })?;
    let text = std::fs::read_to_string(path)?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

pub fn write_obj<W: Write>(mesh: &TriMesh, mut w: W) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// ASCII PLY, with an optional integer `label` property per vertex.
pub fn write_ply<W: Write>(mesh: &TriMesh, labels: Option<&[usize]>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if labels.is_some() {
        writeln!(w, "property int label")?;
    }
    writeln!(w, "element face {}", mesh.triangle_count())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        write!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        if let Some(l) = labels {
            write!(w, " {}", l.get(i).copied().unwrap_or(0))?;
        }
        writeln!(w)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_fem::generate_sphere;

    const TET_OFF: &str = "OFF\n# tetrahedron\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3 255 0 0\n";

    #[test]
    fn off_tetrahedron() {
        let m = parse_off(TET_OFF).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert!(m.is_oriented_closed());
        assert!((m.enclosed_volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn off_counts_on_header_line() {
        let m = parse_off("OFF 3 1 0\n0 0 0 1 0 0 0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.triangle_count(), 1);
    }

    #[test]
    fn off_errors() {
        assert!(matches!(
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"),
            Err(Error::MeshParse { line: 6, .. })
        ));
        let quad = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap_err();
        assert!(quad.to_string().contains("triangles only"));
        assert!(parse_off("PLY\n").is_err());
        assert!(parse_off("OFF\n3 1 0\n0 0\n").is_err());
    }

    #[test]
    fn obj_round_trip() {
        let s = generate_sphere(2);
        let mut buf = Vec::new();
        write_obj(&s, &mut buf).unwrap();
        let back = parse_obj(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.triangles(), s.triangles());
        assert_eq!(back.vertices(), s.vertices());
    }

    #[test]
    fn obj_variants() {
        let m = parse_obj("o t\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        let e = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(e.to_string().contains("triangles only"));
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n"),
            Err(Error::MeshParse { line: 3, .. })
        ));
    }

    #[test]
    fn ply_header() {
        let s = generate_sphere(0);
        let mut buf = Vec::new();
        write_ply(&s, Some(&[1; 12]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("element vertex 12\n"));
        assert!(text.contains("property int label\n"));
        assert_eq!(text.lines().count(), 10 + 12 + 20);
    }
}
