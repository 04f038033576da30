//! Closed-manifold backends: triangle meshes and closed-form manifolds.

mod analytic;
mod geodesic;
mod laplacian;
mod mesh;
mod off;

use std::fmt::Write as _;

use thiserror::Error;

pub use analytic::{grid_sample, make_analytic, AnalyticKind, AnalyticManifold, Mode, ModeShape, ModeValues, Trig};
pub use geodesic::{fast_marching, graph_distances, GeodesicMethod};
pub use laplacian::{assemble_laplacian, AspectWarning, OperatorPair, ASPECT_LIMIT};
pub use mesh::{make_flat_torus, make_sphere, TriMesh, DEGENERATE_AREA};
pub use off::{load_mesh, parse_off, write_off};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("non-closed mesh: edge {edge:?} has no opposite half-edge")]
    NotClosed { edge: (usize, usize) },
    #[error("inconsistent orientation: directed edge {edge:?} appears twice")]
    Orientation { edge: (usize, usize) },
    #[error("degenerate triangle {triangle} (area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("triangle {triangle} references vertex {index}, mesh has {vertices} vertices")]
    IndexOutOfRange { triangle: usize, index: usize, vertices: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

/// A point of a manifold: a mesh vertex or analytic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Vertex(usize),
    Coords(Vec<f64>),
}

/// Quadrature sample of a manifold: points with weights summing to the volume.
#[derive(Debug, Clone)]
pub struct ManifoldSample {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Manifold {
    Mesh(TriMesh),
    Analytic(AnalyticManifold),
}

impl From<TriMesh> for Manifold {
    fn from(m: TriMesh) -> Self {
        Manifold::Mesh(m)
    }
}

impl From<AnalyticManifold> for Manifold {
    fn from(m: AnalyticManifold) -> Self {
        Manifold::Analytic(m)
    }
}

impl Manifold {
    pub fn dimension(&self) -> usize {
        match self {
            Manifold::Mesh(_) => 2,
            Manifold::Analytic(a) => a.dimension(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Manifold::Mesh(m) => m.total_area(),
            Manifold::Analytic(a) => a.volume(),
        }
    }

    /// Exact diameter for analytic backends; a double-sweep graph estimate on meshes.
    pub fn diameter(&self) -> f64 {
        match self {
            Manifold::Mesh(m) => {
                let d0 = graph_distances(m, 0);
                let far = argmax(&d0);
                graph_distances(m, far).into_iter().fold(0.0, f64::max)
            }
            Manifold::Analytic(a) => a.diameter(),
        }
    }

    /// Known injectivity radius (analytic backends only).
    pub fn injectivity_radius(&self) -> Option<f64> {
        match self {
            Manifold::Mesh(_) => None,
            Manifold::Analytic(a) => Some(a.injectivity_radius()),
        }
    }

    pub fn as_mesh(&self) -> Option<&TriMesh> {
        match self {
            Manifold::Mesh(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_analytic(&self) -> Option<&AnalyticManifold> {
        match self {
            Manifold::Analytic(a) => Some(a),
            _ => None,
        }
    }

    pub fn validate_point(&self, p: &Point) -> Result<(), ManifoldError> {
        match (self, p) {
            (Manifold::Mesh(m), Point::Vertex(v)) if *v < m.num_vertices() => Ok(()),
            (Manifold::Analytic(a), Point::Coords(c)) if c.len() == a.ambient_dimension() && c.iter().all(|x| x.is_finite()) => Ok(()),
            _ => Err(ManifoldError::InvalidPoint(format!("{p:?}"))),
        }
    }

    /// Mesh: all vertices with lumped masses. Analytic: `AnalyticManifold::sample(resolution)`.
    pub fn sample(&self, resolution: usize) -> ManifoldSample {
        match self {
            Manifold::Mesh(m) => ManifoldSample {
                points: (0..m.num_vertices()).map(Point::Vertex).collect(),
                weights: m.mass().to_vec(),
            },
            Manifold::Analytic(a) => {
                let (pts, weights) = a.sample(resolution);
                ManifoldSample { points: pts.into_iter().map(Point::Coords).collect(), weights }
            }
        }
    }

    /// Geodesic distances from `source` to every target point.
    pub fn distances_from(&self, source: &Point, targets: &[Point]) -> Vec<f64> {
        self.distances_from_with(source, targets, GeodesicMethod::Graph)
    }

    pub fn distances_from_with(&self, source: &Point, targets: &[Point], method: GeodesicMethod) -> Vec<f64> {
        match (self, source) {
            (Manifold::Mesh(m), Point::Vertex(s)) => {
                let field = match method {
                    GeodesicMethod::Graph => graph_distances(m, *s),
                    GeodesicMethod::FastMarching => fast_marching(m, *s, None),
                };
                targets
                    .iter()
                    .map(|t| match t {
                        Point::Vertex(v) => field[*v],
                        _ => panic!("coordinate point on a mesh"),
                    })
                    .collect()
            }
            (Manifold::Analytic(a), Point::Coords(x)) => targets
                .iter()
                .map(|t| match t {
                    Point::Coords(y) => a.distance(x, y),
                    _ => panic!("vertex point on an analytic manifold"),
                })
                .collect(),
            _ => panic!("point kind does not match manifold backend"),
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        match (self, p, q) {
            (Manifold::Analytic(a), Point::Coords(x), Point::Coords(y)) => a.distance(x, y),
            _ => self.distances_from(p, std::slice::from_ref(q))[0],
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Distance field from `source` over the manifold's default sample
/// (all vertices on a mesh, `resolution` grid on analytic backends).
pub fn geodesic_distance(manifold: &Manifold, source: &Point, resolution: usize) -> Result<Vec<f64>, ManifoldError> {
    manifold.validate_point(source)?;
    let sample = manifold.sample(resolution);
    Ok(manifold.distances_from(source, &sample.points))
}

/// CSV `vertex,distance`, one row per entry.
pub fn distance_csv(field: &[f64]) -> String {
    let mut s = String::from("vertex,distance\n");
    for (i, d) in field.iter().enumerate() {
        writeln!(s, "{i},{d:?}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_antipodal_distance() {
        let m: Manifold = make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap().into();
        let p = Point::Coords(vec![0.0]);
        assert_eq!(m.distance(&p, &Point::Coords(vec![PI])), PI);
        assert_eq!(m.distance(&p, &p), 0.0);
    }

    #[test]
    fn icosphere_antipodal_distance() {
        let mesh = make_sphere(1.0, 4);
        // icosphere vertices come in antipodal pairs
        let p0 = mesh.position(0);
        let anti = (0..mesh.num_vertices()).find(|&v| (mesh.position(v) + p0).norm() < 1e-12).unwrap();
        let m: Manifold = mesh.into();
        let d = m.distance(&Point::Vertex(0), &Point::Vertex(anti));
        assert!((d / PI - 1.0).abs() < 0.01, "{d}");
        assert_eq!(m.distance(&Point::Vertex(3), &Point::Vertex(3)), 0.0);
    }

    #[test]
    fn geodesic_field_and_csv() {
        let m: Manifold = make_sphere(1.0, 1).into();
        let f = geodesic_distance(&m, &Point::Vertex(0), 0).unwrap();
        assert_eq!(f.len(), 42);
        assert_eq!(f[0], 0.0);
        assert!(f.iter().all(|&d| d >= 0.0));
        let csv = distance_csv(&f);
        assert!(csv.starts_with("vertex,distance\n0,0.0\n"));
        assert_eq!(csv.lines().count(), 43);
        assert!(geodesic_distance(&m, &Point::Vertex(42), 0).is_err());
    }

    #[test]
    fn mesh_diameter_estimate() {
        let m: Manifold = make_sphere(1.0, 3).into();
        let d = m.diameter();
        assert!(d >= PI * 0.99 && d <= PI * 1.1, "{d}");
    }
}
