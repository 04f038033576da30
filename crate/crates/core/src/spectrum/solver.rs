//! Generalized symmetric eigensolver `S φ = λ M φ` for the smallest eigenpairs.
//!
//! Works on `A = M^{-1/2} S M^{-1/2}`. Each restart builds a block Krylov
//! space of the shift-inverted operator `(A + σI)^{-1}` from the current
//! block and performs Rayleigh–Ritz with `A`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SpectrumError;
use crate::linalg::{dot, CsrMatrix, EnvelopeCholesky};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual tolerance on `‖Sφ − λMφ‖` for `‖φ‖_M = 1`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov steps per restart (block powers of the inverted operator).
    pub krylov_steps: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_restarts: 300, krylov_steps: 3, seed: 0x5eed }
    }
}

/// Eigenpairs with mass-orthonormal vectors `vectors[k][i]`.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub restarts: usize,
}

struct Problem<'a> {
    stiffness: &'a CsrMatrix,
    sqrt_m: Vec<f64>,
}

impl Problem<'_> {
    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(&self.sqrt_m).map(|(a, s)| a / s).collect();
        let mut z = self.stiffness.mul_vec(&y);
        for (zi, s) in z.iter_mut().zip(&self.sqrt_m) {
            *zi /= s;
        }
        z
    }

    /// `‖M^{1/2}(Ax − θx)‖ = ‖Sφ − θMφ‖` with `φ = M^{-1/2}x`.
    fn residual(&self, x: &[f64], theta: f64) -> f64 {
        let ax = self.apply_a(x);
        ax.iter()
            .zip(x)
            .zip(&self.sqrt_m)
            .map(|((a, b), s)| (s * (a - theta * b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Orthonormalizes `v` against `basis` (two Gram–Schmidt passes).
/// Returns `None` when `v` is numerically inside the span.
fn orthonormalize(basis: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n0 = dot(&v, &v).sqrt();
    if n0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
    let nv = dot(&v, &v).sqrt();
    if nv < 1e-10 * n0 {
        return None;
    }
    for vi in &mut v {
        *vi /= nv;
    }
    Some(v)
}

fn dense_a(stiffness: &CsrMatrix, mass: &[f64]) -> DMatrix<f64> {
    let n = mass.len();
    let mut a = stiffness.to_dense();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] /= (mass[i] * mass[j]).sqrt();
        }
    }
    a
}

/// Dense reference solver (all eigenpairs, ascending).
pub fn dense_generalized(stiffness: &CsrMatrix, mass: &[f64]) -> EigenResult {
    let a = dense_a(stiffness, mass);
    let eig = SymmetricEigen::new(a);
    let mut idx: Vec<usize> = (0..mass.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().zip(mass).map(|(x, m)| x / m.sqrt()).collect())
        .collect();
    let prob = Problem { stiffness, sqrt_m: mass.iter().map(|m| m.sqrt()).collect() };
    let residuals = idx
        .iter()
        .map(|&i| {
            let x: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            prob.residual(&x, eig.eigenvalues[i])
        })
        .collect();
    EigenResult { values, vectors, residuals, restarts: 0 }
}

/// Smallest `count` eigenpairs of `S φ = λ M φ` (`S` symmetric PSD, `M` positive diagonal).
pub fn smallest_eigenpairs(
    stiffness: &CsrMatrix,
    mass: &[f64],
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenResult, SpectrumError> {
    let n = mass.len();
    let block = count + (count / 2).max(8);
    let steps = opts.krylov_steps.max(2);
    if block * steps >= n {
        let mut r = dense_generalized(stiffness, mass);
        r.values.truncate(count);
        r.vectors.truncate(count);
        r.residuals.truncate(count);
        return Ok(r);
    }
    let prob = Problem { stiffness, sqrt_m: mass.iter().map(|m| m.sqrt()).collect() };
    let trace: f64 = (0..n).map(|i| stiffness.get(i, i) / mass[i]).sum();
    let sigma = 1e-4 * trace / n as f64;
    let shifted = stiffness.add_diagonal(sigma, mass);
    let chol = EnvelopeCholesky::factor(&shifted)?;
    let apply_inv = |x: &[f64]| -> Vec<f64> {
        let b: Vec<f64> = x.iter().zip(&prob.sqrt_m).map(|(a, s)| a * s).collect();
        let mut y = chol.solve(&b);
        // one step of iterative refinement removes the conditioning error
        // that otherwise floors the residual near the tolerance
        let r: Vec<f64> = b.iter().zip(shifted.mul_vec(&y)).map(|(bi, ai)| bi - ai).collect();
        for (yi, ci) in y.iter_mut().zip(chol.solve(&r)) {
            *yi += ci;
        }
        for (yi, s) in y.iter_mut().zip(&prob.sqrt_m) {
            *yi *= s;
        }
        y
    };

    // deterministic start: the constant mode, then seeded random columns
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(block);
    if let Some(v) = orthonormalize(&x, prob.sqrt_m.clone()) {
        x.push(v);
    }
    while x.len() < block {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(v) = orthonormalize(&x, v) {
            x.push(v);
        }
    }

    let mut worst = f64::INFINITY;
    for restart in 0..opts.max_restarts {
        let mut basis = x.clone();
        let mut last = x.clone();
        for step in 1..steps {
            let mut next = Vec::with_capacity(last.len());
            for v in &last {
                // first expansion uses the preconditioned residual, which spans the
                // same direction as Op·x but without cancellation near convergence
                let src = if step == 1 {
                    let av = prob.apply_a(v);
                    let th = dot(v, &av);
                    av.iter().zip(v).map(|(a, b)| a - th * b).collect::<Vec<f64>>()
                } else {
                    v.clone()
                };
                if let Some(w) = orthonormalize(&basis, apply_inv(&src)) {
                    basis.push(w.clone());
                    next.push(w);
                }
            }
            if next.is_empty() {
                break;
            }
            last = next;
        }
        // Rayleigh–Ritz with the inverted operator: its wanted eigenvalues are
        // the largest, so the small projected problem resolves them to full precision
        let ov: Vec<Vec<f64>> = basis.iter().map(|v| apply_inv(v)).collect();
        let m = basis.len();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dot(&basis[i], &ov[j]) + dot(&basis[j], &ov[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let keep = block.min(m);
        let mut ritz: Vec<Vec<f64>> = Vec::with_capacity(keep);
        for &c in idx.iter().take(keep) {
            let mut v = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let y = eig.eigenvectors[(j, c)];
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += y * bi;
                }
            }
            let nv = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= nv);
            ritz.push(v);
        }
        // second projection with A itself on the retained block
        let ar: Vec<Vec<f64>> = ritz.iter().map(|v| prob.apply_a(v)).collect();
        let mut g = DMatrix::zeros(keep, keep);
        for i in 0..keep {
            for j in i..keep {
                let v = 0.5 * (dot(&ritz[i], &ar[j]) + dot(&ritz[j], &ar[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eg = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..keep).collect();
        order.sort_by(|&i, &j| eg.eigenvalues[i].total_cmp(&eg.eigenvalues[j]));
        let ritz: Vec<Vec<f64>> = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (j, b) in ritz.iter().enumerate() {
                    let y = eg.eigenvectors[(j, c)];
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi += y * bi;
                    }
                }
                v
            })
            .collect();
        let thetas: Vec<f64> = ritz.iter().map(|v| dot(v, &prob.apply_a(v)) / dot(v, v)).collect();
        let residuals: Vec<f64> = (0..count).map(|k| prob.residual(&ritz[k], thetas[k])).collect();
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol {
            let vectors: Vec<Vec<f64>> = ritz
                .iter()
                .take(count)
                .map(|v| v.iter().zip(&prob.sqrt_m).map(|(a, s)| a / s).collect())
                .collect();
            // Rayleigh quotients of the final vectors
            let values = vectors
                .iter()
                .map(|phi| {
                    let s = stiffness.mul_vec(phi);
                    dot(phi, &s) / phi.iter().zip(mass).map(|(p, m)| p * p * m).sum::<f64>()
                })
                .collect();
            return Ok(EigenResult { values, vectors, residuals, restarts: restart + 1 });
        }
        x = ritz;
    }
    Err(SpectrumError::NotConverged { requested: count, worst_residual: worst, restarts: opts.max_restarts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{assemble_laplacian, make_flat_torus, make_sphere};

    #[test]
    fn krylov_matches_dense_on_small_sphere() {
        let mesh = make_sphere(1.0, 2);
        let ops = assemble_laplacian(&mesh);
        let dense = dense_generalized(&ops.stiffness, &ops.mass);
        let it = smallest_eigenpairs(&ops.stiffness, &ops.mass, 12, &SolverOptions::default()).unwrap();
        for k in 0..12 {
            assert!((it.values[k] - dense.values[k]).abs() < 1e-9 * (1.0 + dense.values[k]), "{k}");
            assert!(it.residuals[k] <= 1e-10);
        }
    }

    #[test]
    fn torus_grid_eigenvalues_near_lattice() {
        let mesh = make_flat_torus([1.0, 1.0], 24, 24).unwrap();
        let ops = assemble_laplacian(&mesh);
        let r = smallest_eigenpairs(&ops.stiffness, &ops.mass, 9, &SolverOptions::default()).map_err(|e| e.to_string()).unwrap();
        let l1 = (2.0 * std::f64::consts::PI).powi(2);
        let expected = [0.0, l1, l1, l1, l1, 2.0 * l1, 2.0 * l1, 2.0 * l1, 2.0 * l1];
        assert!(r.values[0].abs() < 1e-8 * r.values[1]);
        for k in 1..9 {
            assert!((r.values[k] / expected[k] - 1.0).abs() < 0.02, "{k}: {}", r.values[k]);
        }
    }

    #[test]
    fn dense_fallback_for_tiny_problems() {
        let mesh = make_sphere(1.0, 0);
        let ops = assemble_laplacian(&mesh);
        let r = smallest_eigenpairs(&ops.stiffness, &ops.mass, 4, &SolverOptions::default()).unwrap();
        assert_eq!(r.values.len(), 4);
        assert!(r.values[0].abs() < 1e-12);
    }
}
