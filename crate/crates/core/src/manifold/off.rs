//! ASCII OFF reader/writer.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::TriMesh;
use super::ManifoldError;

fn parse_err(line: usize, message: impl Into<String>) -> ManifoldError {
    ManifoldError::Parse { line, message: message.into() }
}

struct Tokens<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    pending: Option<(usize, &'a str)>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ManifoldError> {
        let tok = self.pending.take().or_else(|| self.inner.next());
        match tok {
            Some((l, t)) => {
                self.last_line = l;
                Ok((l, t))
            }
            None => Err(parse_err(self.last_line, format!("unexpected end of file while reading {what}"))),
        }
    }

    fn usize(&mut self, what: &str) -> Result<(usize, usize), ManifoldError> {
        let (l, t) = self.next(what)?;
        t.parse::<usize>().map(|v| (l, v)).map_err(|_| parse_err(l, format!("invalid {what} '{t}'")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, ManifoldError> {
        let (l, t) = self.next(what)?;
        t.parse::<f64>().map_err(|_| parse_err(l, format!("invalid {what} '{t}'")))
    }
}

/// Parses OFF text. Polygonal faces are fan-triangulated; vertex order is preserved.
pub fn parse_off(text: &str) -> Result<TriMesh, ManifoldError> {
    let inner = text.lines().enumerate().flat_map(|(i, l)| {
        let content = l.split('#').next().unwrap_or("");
        content.split_whitespace().map(move |t| (i + 1, t))
    });
    let mut tokens = Tokens { inner: Box::new(inner), pending: None, last_line: 1 };

    let (line, head) = tokens.next("header")?;
    if head != "OFF" {
        match head.strip_prefix("OFF") {
            Some(rest) if !rest.is_empty() => tokens.pending = Some((line, rest)),
            _ => return Err(parse_err(line, format!("expected OFF header, found '{head}'"))),
        }
    }
    let (_, nv) = tokens.usize("vertex count")?;
    let (_, nf) = tokens.usize("face count")?;
    let _ = tokens.usize("edge count")?;

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            *c = tokens.f64("vertex coordinate")?;
        }
        positions.push(p);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, k) = tokens.usize("face vertex count")?;
        if k < 3 {
            return Err(parse_err(l, format!("face with {k} vertices")));
        }
        let mut face = Vec::with_capacity(k);
        for _ in 0..k {
            let (l2, idx) = tokens.usize("face index")?;
            if idx >= nv {
                return Err(parse_err(l2, format!("face references vertex {idx}, but only {nv} vertices exist")));
            }
            face.push(idx);
        }
        for j in 1..k - 1 {
            triangles.push([face[0], face[j], face[j + 1]]);
        }
    }
    TriMesh::new(positions, triangles, None)
}

pub fn load_mesh(path: &Path) -> Result<TriMesh, ManifoldError> {
    let text = std::fs::read_to_string(path).map_err(|e| ManifoldError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_off(&text)
}

/// Serializes a mesh as OFF. Coordinates use the shortest round-trip decimal form.
pub fn write_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF").unwrap();
    writeln!(s, "{} {} 0", mesh.num_vertices(), mesh.num_triangles()).unwrap();
    for p in mesh.positions() {
        writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const OCTAHEDRON: &str = "OFF
# unit-radius octahedron
6 8 12
1 0 0
-1 0 0
0 1 0
0 -1 0
0 0 1
0 0 -1
3 0 2 4
3 2 1 4
3 1 3 4
3 3 0 4
3 2 0 5
3 1 2 5
3 3 1 5
3 0 3 5
";

    #[test]
    fn octahedron_area() {
        let m = parse_off(OCTAHEDRON).unwrap();
        assert_eq!(m.num_vertices(), 6);
        assert_eq!(m.num_triangles(), 8);
        // 8 equilateral triangles with side sqrt(2)
        let expected = 8.0 * (3f64.sqrt() / 4.0) * 2.0;
        assert!((m.total_area() - expected).abs() < 1e-12);
        assert!((expected - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.positions()[3], [0.0, -1.0, 0.0]);
    }

    #[test]
    fn open_tetrahedron_is_rejected() {
        let text = "OFF\n4 3 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 1 2 3\n";
        let err = parse_off(text).unwrap_err();
        assert!(matches!(err, ManifoldError::NotClosed { .. }), "{err}");
        assert!(err.to_string().contains("non-closed mesh"));
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        match parse_off(text) {
            Err(ManifoldError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_coordinate_is_parse_error() {
        let text = "OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n";
        assert!(matches!(parse_off(text), Err(ManifoldError::Parse { line: 4, .. })));
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        // vertex 4 moved onto the midpoint of edge 0-2
        let text = OCTAHEDRON.replace("0 0 1\n0 0 -1", "0.5 0.5 0\n0 0 -1");
        assert!(matches!(parse_off(&text), Err(ManifoldError::Degenerate { .. })));
    }

    #[test]
    fn write_then_parse_is_bit_exact() {
        let m = crate::manifold::make_sphere(1.0, 2);
        let text = write_off(&m);
        let back = parse_off(&text).unwrap();
        assert_eq!(back.positions(), m.positions());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(write_off(&back), text);
    }
}
