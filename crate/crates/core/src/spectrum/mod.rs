//! Laplace–Beltrami spectra and the spectral bounds built on them.

mod bounds;
mod solver;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Vector3;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::manifold::{assemble_laplacian, Manifold, Mode, ModeValues, Point};

pub use bounds::{
    default_faber_krahn, default_gradient_constant, default_trace_constant, eigen_growth_check, eigenfunction_sup_bounds,
    growth_lower_bound, growth_threshold, truncation_index, unit_ball_volume, GeometryBounds, GrowthReport, GrowthRow,
    GrowthStatus, SupBounds, SupRow, Truncation,
};
pub use solver::{dense_generalized, smallest_eigenpairs, EigenResult, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("eigensolver did not converge: {requested} pairs, worst residual {worst_residual:e} after {restarts} restarts")]
    NotConverged { requested: usize, worst_residual: f64, restarts: usize },
    #[error("requested {count} eigenpairs, allowed range is 1..{max}")]
    InvalidCount { count: usize, max: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("harmonic radius r_h is not set in the geometry bounds")]
    MissingHarmonicRadius,
    #[error("invalid geometry bounds: {0}")]
    InvalidBounds(String),
    #[error("tail bound {tail:e} with all {available} eigenpairs still exceeds the tolerance")]
    TailTooLarge { available: usize, tail: f64 },
}

#[derive(Debug, Clone)]
enum Basis {
    Mesh(Vec<Vec<f64>>),
    Analytic(Vec<Mode>),
}

/// Ascending eigenvalues of `-Δ` with `L²`-orthonormal eigenfunctions.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    basis: Basis,
    manifold: Arc<Manifold>,
    residuals: Vec<f64>,
}

/// First entry with magnitude above `1e-12·max` made positive.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Computes the first `count` eigenpairs. Meshes are solved numerically,
/// analytic backends use their closed-form modes.
pub fn compute_spectrum(manifold: Arc<Manifold>, count: usize, opts: &SolverOptions) -> Result<Spectrum, SpectrumError> {
    match manifold.as_ref() {
        Manifold::Mesh(mesh) => {
            let nv = mesh.num_vertices();
            if count == 0 || count >= nv {
                return Err(SpectrumError::InvalidCount { count, max: nv });
            }
            let ops = assemble_laplacian(mesh);
            let r = smallest_eigenpairs(&ops.stiffness, &ops.mass, count, opts)?;
            let mut pairs: Vec<(f64, Vec<f64>, f64)> = r
                .values
                .into_iter()
                .zip(r.vectors)
                .zip(r.residuals)
                .map(|((l, mut v), res)| {
                    fix_sign(&mut v);
                    (l, v, res)
                })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            // lexicographic order inside clusters of equal eigenvalues
            let mut start = 0;
            while start < pairs.len() {
                let mut end = start + 1;
                while end < pairs.len() && pairs[end].0 - pairs[start].0 <= 1e-9 * pairs[start].0.abs().max(1e-300) {
                    end += 1;
                }
                let mut vals: Vec<f64> = pairs[start..end].iter().map(|p| p.0).collect();
                vals.sort_by(|a, b| a.total_cmp(b));
                pairs[start..end].sort_by(|a, b| lex_cmp(&a.1, &b.1));
                // values stay sorted; each moves by less than the cluster width
                for (p, v) in pairs[start..end].iter_mut().zip(vals) {
                    p.0 = v;
                }
                start = end;
            }
            let eigenvalues = pairs.iter().map(|p| p.0).collect();
            let residuals = pairs.iter().map(|p| p.2).collect();
            let vectors = pairs.into_iter().map(|p| p.1).collect();
            Ok(Spectrum { eigenvalues, basis: Basis::Mesh(vectors), manifold, residuals })
        }
        Manifold::Analytic(a) => {
            if count == 0 {
                return Err(SpectrumError::InvalidCount { count, max: usize::MAX });
            }
            let modes = a.modes(count);
            Ok(Spectrum {
                eigenvalues: modes.iter().map(|m| m.eigenvalue).collect(),
                residuals: vec![0.0; count],
                basis: Basis::Analytic(modes),
                manifold,
            })
        }
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    pub fn dimension(&self) -> usize {
        self.manifold.dimension()
    }

    pub fn volume(&self) -> f64 {
        self.manifold.volume()
    }

    /// Vertex values of eigenfunction `k` (mesh backends).
    pub fn eigenvector(&self, k: usize) -> Option<&[f64]> {
        match &self.basis {
            Basis::Mesh(v) => v.get(k).map(|x| x.as_slice()),
            Basis::Analytic(_) => None,
        }
    }

    /// Closed-form modes (analytic backends).
    pub fn modes(&self) -> Option<&[Mode]> {
        match &self.basis {
            Basis::Analytic(m) => Some(m),
            Basis::Mesh(_) => None,
        }
    }

    /// The first `count` eigenpairs.
    pub fn truncated(&self, count: usize) -> Spectrum {
        let count = count.min(self.len());
        Spectrum {
            eigenvalues: self.eigenvalues[..count].to_vec(),
            basis: match &self.basis {
                Basis::Mesh(v) => Basis::Mesh(v[..count].to_vec()),
                Basis::Analytic(m) => Basis::Analytic(m[..count].to_vec()),
            },
            manifold: self.manifold.clone(),
            residuals: self.residuals[..count].to_vec(),
        }
    }

    /// Copy with eigenvalue `k` replaced (eigenfunctions unchanged).
    pub fn with_eigenvalue(&self, k: usize, value: f64) -> Spectrum {
        let mut s = self.clone();
        s.eigenvalues[k] = value;
        s
    }

    /// Orthonormal tangent frame at `p` as ambient vectors.
    pub fn tangent_frame(&self, p: &Point) -> Vec<Vec<f64>> {
        match (self.manifold.as_ref(), p) {
            (Manifold::Mesh(m), Point::Vertex(v)) => m.tangent_frame(*v).iter().map(|e| vec![e.x, e.y, e.z]).collect(),
            (Manifold::Analytic(a), Point::Coords(x)) => a.tangent_frame(x),
            _ => panic!("point kind does not match manifold backend"),
        }
    }

    /// Values of `φ_0 … φ_{count-1}` at `p`.
    pub fn values(&self, p: &Point, count: usize) -> Vec<f64> {
        match (&self.basis, p) {
            (Basis::Mesh(v), Point::Vertex(i)) => v[..count].iter().map(|f| f[*i]).collect(),
            _ => self.evaluate(p, count).values,
        }
    }

    /// Values and tangent-frame gradients of `φ_0 … φ_{count-1}` at `p`.
    /// Mesh gradients are area-weighted averages of the triangle gradients,
    /// projected to the vertex tangent plane.
    pub fn evaluate(&self, p: &Point, count: usize) -> ModeValues {
        let count = count.min(self.len());
        match (self.manifold.as_ref(), &self.basis, p) {
            (Manifold::Mesh(mesh), Basis::Mesh(vecs), Point::Vertex(v)) => {
                let [e1, e2] = mesh.tangent_frame(*v);
                let mut grads = vec![Vector3::zeros(); count];
                let mut w = 0.0;
                for &t in mesh.vertex_triangles(*v) {
                    let a = mesh.triangle_area(t);
                    w += a;
                    for (g, f) in grads.iter_mut().zip(vecs) {
                        *g += mesh.triangle_gradient(t, f) * a;
                    }
                }
                ModeValues {
                    values: vecs[..count].iter().map(|f| f[*v]).collect(),
                    gradients: grads.iter().map(|g| vec![g.dot(&e1) / w, g.dot(&e2) / w]).collect(),
                }
            }
            (Manifold::Analytic(a), Basis::Analytic(modes), Point::Coords(x)) => a.eval_modes(&modes[..count], x),
            _ => panic!("point kind does not match manifold backend"),
        }
    }

    /// CSV `k,lambda`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("k,lambda\n");
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(s, "{k},{l:?}").unwrap();
        }
        s
    }

    /// CSV `vertex,value` of eigenfunction `k` over `points`.
    pub fn eigenfunction_csv(&self, k: usize, points: &[Point]) -> String {
        let mut s = String::from("vertex,value\n");
        for (i, p) in points.iter().enumerate() {
            let v = self.values(p, k + 1)[k];
            writeln!(s, "{i},{v:?}").unwrap();
        }
        s
    }
}
