//! Cotangent Laplace–Beltrami discretization.

use super::mesh::TriMesh;
use crate::linalg::CsrMatrix;

/// Aspect ratio (1 for an equilateral triangle) above which a warning is emitted.
pub const ASPECT_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectWarning {
    pub triangle: usize,
    pub aspect: f64,
}

/// Discrete `-Δ`: symmetric PSD cotangent stiffness and diagonal lumped mass.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    pub warnings: Vec<AspectWarning>,
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Applies `M^{-1} S`, the pointwise discrete `-Δ`.
    pub fn laplacian_of(&self, f: &[f64]) -> Vec<f64> {
        let mut y = self.stiffness.mul_vec(f);
        for (yi, m) in y.iter_mut().zip(&self.mass) {
            *yi /= m;
        }
        y
    }
}

fn cot(u: &nalgebra::Vector3<f64>, v: &nalgebra::Vector3<f64>) -> f64 {
    u.dot(v) / u.cross(v).norm()
}

/// Cotangent stiffness `S_ij = -(cot α_ij + cot β_ij)/2`, `S_ii = -Σ_j S_ij`,
/// with barycentric lumped mass.
pub fn assemble_laplacian(mesh: &TriMesh) -> OperatorPair {
    let n = mesh.num_vertices();
    let mut trips = Vec::with_capacity(mesh.num_triangles() * 9);
    let mut warnings = Vec::new();
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        let lmax2 = [(a, b), (b, c), (c, a)].iter().map(|&(i, j)| mesh.edge_vector(i, j).norm_squared()).fold(0.0, f64::max);
        let aspect = 3f64.sqrt() * lmax2 / (4.0 * area);
        if aspect > ASPECT_LIMIT {
            warnings.push(AspectWarning { triangle: t, aspect });
        }
        for &(i, j, k) in &[(a, b, c), (b, c, a), (c, a, b)] {
            let w = 0.5 * cot(&mesh.edge_vector(k, i), &mesh.edge_vector(k, j));
            trips.push((i, j, -w));
            trips.push((j, i, -w));
            trips.push((i, i, w));
            trips.push((j, j, w));
        }
    }
    OperatorPair { stiffness: CsrMatrix::from_triplets(n, n, &trips), mass: mesh.mass().to_vec(), warnings }
}
