//! Fundamental solutions on a Euclidean chart: the Euclidean kernel, the
//! frozen-coefficient kernel, finite-difference solves, the truncated
//! parametrix and closeness estimates between them.

mod closeness;
mod fd;
mod parametrix;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use thiserror::Error;

pub use closeness::{
    closeness_report, decay_constant, decay_violations, ellipticity_sweep, grid_convergence, log_log_slope, ClosenessReport, ConvergenceStudy, Region, SweepStudy,
};
pub use fd::{solve_fd_kernel, Grid, GridKernel, GridParams};
pub use parametrix::{parametrix_kernel, ParametrixOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("dimension {0} not supported (grids need n = 1 or 2)")]
    Dimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coefficient matrix singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("ellipticity violated at {point:?}: eigenvalues {lo}..{hi} outside [1/Q, Q] with Q = {q}")]
    Ellipticity { point: Vec<f64>, lo: f64, hi: f64, q: f64 },
    #[error("Hölder seminorm {seminorm} exceeds Q - 1 = {bound}")]
    Holder { seminorm: f64, bound: f64 },
    #[error("instability at step {step}: |u| = {value:e} exceeds 10x running max {running_max:e}")]
    Unstable { step: usize, value: f64, running_max: f64 },
    #[error("quadrature budget exceeded: {needed} kernel evaluations > {budget}")]
    Budget { needed: u64, budget: u64 },
    #[error("kernels do not share a grid and time levels")]
    GridMismatch,
}

/// Coefficient field `a^{ij}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// Row-major `n×n` symmetric matrix.
    Constant(Vec<f64>),
    /// `(1 + amplitude·exp(-|x - center|²/(2 width²)))·I`.
    Bump { amplitude: f64, width: f64, center: Vec<f64> },
}

impl Coefficients {
    pub fn identity(n: usize) -> Self {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        Coefficients::Constant(m)
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        match Self::identity(n) {
            Coefficients::Constant(m) => Coefficients::Constant(m.into_iter().map(|v| v * c).collect()),
            _ => unreachable!(),
        }
    }

    /// `a^{ij}(x)` as a row-major matrix.
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Coefficients::Constant(m) => m.clone(),
            Coefficients::Bump { amplitude, width, center } => {
                let n = x.len();
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let s = 1.0 + amplitude * (-r2 / (2.0 * width * width)).exp();
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    m[i * n + i] = s;
                }
                m
            }
        }
    }
}

/// Coefficients on a ball `B_R` with declared ellipticity `Q` and Hölder exponent `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub n: usize,
    pub coefficients: Coefficients,
    pub radius: f64,
    pub q: f64,
    pub alpha: f64,
    /// Measured `C^α` seminorm of `a` on the probe grid.
    pub holder: f64,
}

/// Probe points per axis used to verify the invariants.
const PROBE: usize = 41;

fn probe_points(n: usize, radius: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..PROBE).map(|i| -radius + 2.0 * radius * i as f64 / (PROBE - 1) as f64).collect();
    match n {
        1 => axis.iter().map(|&x| vec![x]).collect(),
        _ => axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y])).filter(|p| p.iter().map(|v| v * v).sum::<f64>() <= radius * radius + 1e-12).collect(),
    }
}

/// Eigenvalues of a symmetric row-major matrix, ascending.
fn sym_eigenvalues(m: &[f64], n: usize) -> Vec<f64> {
    let mut e: Vec<f64> = DMatrix::from_row_slice(n, n, m).symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

impl ChartSpec {
    /// Validates `Q^{-1} I ≤ a ≤ Q I` and `[a]_α ≤ Q - 1` (within 1e-8) on a probe grid of `B_R`.
    pub fn new(n: usize, coefficients: Coefficients, radius: f64, q: f64, alpha: f64) -> Result<Self, ChartError> {
        if !(1..=2).contains(&n) {
            return Err(ChartError::Dimension(n));
        }
        if !(radius > 0.0 && q >= 1.0 && alpha > 0.0 && alpha < 1.0) {
            return Err(ChartError::InvalidParameter(format!("radius {radius}, Q {q}, alpha {alpha}")));
        }
        let pts = probe_points(n, radius);
        let mats: Vec<Vec<f64>> = pts.iter().map(|p| coefficients.at(p)).collect();
        for (p, m) in pts.iter().zip(&mats) {
            if m.len() != n * n {
                return Err(ChartError::InvalidParameter(format!("coefficient matrix has {} entries, need {}", m.len(), n * n)));
            }
            let e = sym_eigenvalues(m, n);
            let (lo, hi) = (e[0], e[n - 1]);
            if lo < 1.0 / q - 1e-12 || hi > q + 1e-12 {
                return Err(ChartError::Ellipticity { point: p.clone(), lo, hi, q });
            }
        }
        let mut holder: f64 = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let r: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let diff: Vec<f64> = mats[i].iter().zip(&mats[j]).map(|(a, b)| a - b).collect();
                let e = sym_eigenvalues(&diff, n);
                let op = e[0].abs().max(e[n - 1].abs());
                holder = holder.max(op / r.powf(alpha));
            }
        }
        if holder > q - 1.0 + 1e-8 {
            return Err(ChartError::Holder { seminorm: holder, bound: q - 1.0 });
        }
        Ok(Self { n, coefficients, radius, q, alpha, holder })
    }

    /// `a = (1 + ε·bump)·I` centred at the origin with `Q = 1 + ε`.
    pub fn bump(n: usize, epsilon: f64, width: f64, radius: f64, alpha: f64) -> Result<Self, ChartError> {
        let c = Coefficients::Bump { amplitude: epsilon, width, center: vec![0.0; n] };
        Self::new(n, c, radius, 1.0 + epsilon, alpha)
    }

    /// `a^{ij}(x)`.
    pub fn a(&self, x: &[f64]) -> Vec<f64> {
        self.coefficients.at(x)
    }

    /// `a_{ij}(y)`, the matrix inverse of `a^{ij}(y)`, and its determinant.
    pub fn lower(&self, y: &[f64]) -> Result<(Vec<f64>, f64), ChartError> {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.a(y));
        let inv = m.try_inverse().ok_or_else(|| ChartError::Singular(y.to_vec()))?;
        let det = inv.determinant();
        if !(det > 0.0) {
            return Err(ChartError::Singular(y.to_vec()));
        }
        Ok((inv.transpose().as_slice().to_vec(), det))
    }
}

/// `(4πt)^{-n/2}·exp(-|x - y|²/4t)`.
pub fn gamma_e(x: &[f64], t: f64, y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (4.0 * PI * t).powf(-n / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// `∇_x Γ_E = -(x - y)/(2t)·Γ_E`.
pub fn gamma_e_gradient(x: &[f64], t: f64, y: &[f64]) -> Vec<f64> {
    let g = gamma_e(x, t, y);
    x.iter().zip(y).map(|(a, b)| -(a - b) / (2.0 * t) * g).collect()
}

/// Frozen kernel with precomputed `a_{ij}(y)` and `det a_{ij}(y)`.
pub(crate) fn z_with(lower: &[f64], det: f64, x: &[f64], t: f64, y: &[f64]) -> f64 {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += lower[i * n + j] * d[i] * d[j];
        }
    }
    det.sqrt() / ((2.0 * PI.sqrt()).powi(n as i32) * t.powf(n as f64 / 2.0)) * (-q / (4.0 * t)).exp()
}

/// `Z(x,t;y) = √det(a_{ij}(y)) / ((2√π)^n t^{n/2}) · exp(-a_{ij}(y)(x-y)^i(x-y)^j / 4t)`.
pub fn frozen_kernel_z(x: &[f64], t: f64, y: &[f64], spec: &ChartSpec) -> Result<f64, ChartError> {
    let (lower, det) = spec.lower(y)?;
    Ok(z_with(&lower, det, x, t, y))
}

/// `∂_j Z = -(1/2t)·a_{ij}(y)(x - y)^i·Z`.
pub fn frozen_kernel_z_gradient(x: &[f64], t: f64, y: &[f64], spec: &ChartSpec) -> Result<Vec<f64>, ChartError> {
    let (lower, det) = spec.lower(y)?;
    let n = x.len();
    let z = z_with(&lower, det, x, t, y);
    Ok((0..n).map(|j| -(0..n).map(|i| lower[i * n + j] * (x[i] - y[i])).sum::<f64>() / (2.0 * t) * z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn euclidean_kernel_values() {
        assert!((gamma_e(&[0.3], 0.7, &[0.3]) - (4.0 * PI * 0.7f64).powf(-0.5)).abs() < 1e-15);
        assert!((gamma_e(&[0.0, 0.0], 0.7, &[0.0, 0.0]) - 1.0 / (4.0 * PI * 0.7)).abs() < 1e-15);
        let v = gamma_e(&[2.0], 1.0, &[0.0]);
        assert!((v - 0.103776874355148).abs() < 1e-14, "{v}");
        let q = integrate(|x| gamma_e(&[x], 0.3, &[0.1]), -20.0, 20.0, 1e-13, 1e-15);
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frozen_kernel_reduces_to_euclidean() {
        let spec = ChartSpec::new(2, Coefficients::identity(2), 3.0, 1.0, 0.5).unwrap();
        for (x, t) in [([0.3, -0.2], 0.1), ([1.0, 2.0], 2.0)] {
            let z = frozen_kernel_z(&x, t, &[0.1, 0.1], &spec).unwrap();
            assert!((z - gamma_e(&x, t, &[0.1, 0.1])).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_coefficient_rescales_time() {
        let c: f64 = 1.3;
        let spec = ChartSpec::new(1, Coefficients::scalar(1, c), 2.0, c, 0.5).unwrap();
        let (x, t, y) = (0.7, 0.4, -0.1);
        let z = frozen_kernel_z(&[x], t, &[y], &spec).unwrap();
        let want = c.powf(-0.5) * (4.0 * PI * t).powf(-0.5) * (-(x - y) * (x - y) / (4.0 * c * t)).exp();
        assert!((z - want).abs() < 1e-15);
        let q = integrate(|x| frozen_kernel_z(&[x], t, &[y], &spec).unwrap(), -30.0, 30.0, 1e-13, 1e-15);
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frozen_kernel_integrates_to_one_in_2d() {
        let spec = ChartSpec::new(2, Coefficients::Constant(vec![1.2, 0.3, 0.3, 0.9]), 1.0, 1.6, 0.5).unwrap();
        let t = 0.2;
        let inner = |x: f64| integrate(|y| frozen_kernel_z(&[x, y], t, &[0.0, 0.0], &spec).unwrap(), -8.0, 8.0, 1e-12, 1e-16).value;
        let q = integrate(inner, -8.0, 8.0, 1e-11, 1e-14);
        assert!((q.value - 1.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn z_gradient_matches_finite_differences() {
        let spec = ChartSpec::new(2, Coefficients::Constant(vec![1.2, 0.3, 0.3, 0.9]), 1.0, 1.6, 0.5).unwrap();
        let (x, t, y) = ([0.4, -0.3], 0.3, [0.1, 0.05]);
        let g = frozen_kernel_z_gradient(&x, t, &y, &spec).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut a = x;
            let mut b = x;
            a[j] += h;
            b[j] -= h;
            let fd = (frozen_kernel_z(&a, t, &y, &spec).unwrap() - frozen_kernel_z(&b, t, &y, &spec).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8);
        }
        let ge = gamma_e_gradient(&[0.5], 0.2, &[0.0]);
        assert!(ge[0] < 0.0);
    }

    #[test]
    fn invariants_are_checked() {
        let bump = ChartSpec::bump(1, 0.05, 1.0, 3.0, 0.5).unwrap();
        assert!(bump.holder <= 0.05 + 1e-8 && bump.holder > 0.0);
        assert!(matches!(ChartSpec::new(1, Coefficients::scalar(1, 2.0), 1.0, 1.5, 0.5), Err(ChartError::Ellipticity { .. })));
        // a narrow bump is too rough for Q - 1 = ε
        assert!(matches!(ChartSpec::bump(1, 0.05, 0.05, 3.0, 0.5), Err(ChartError::Holder { .. })));
        assert!(matches!(ChartSpec::new(3, Coefficients::identity(3), 1.0, 1.0, 0.5), Err(ChartError::Dimension(3))));
        let bump2 = ChartSpec::bump(2, 0.04, 1.0, 2.0, 0.5).unwrap();
        assert!(bump2.holder <= 0.04 + 1e-8);
    }
}
