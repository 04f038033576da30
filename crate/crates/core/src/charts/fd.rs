//! Finite-difference fundamental solutions of `u_t = a^{ij}(x) ∂_i∂_j u` on a box.

use std::fmt::Write as _;

use crate::linalg::{BandLu, CsrMatrix};

use super::{ChartError, ChartSpec};

/// Box `[-half_width, half_width]^n` with uniform spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub half_width: f64,
    pub spacing: f64,
}

/// Uniform node grid; boundary nodes carry the Dirichlet value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub lo: f64,
    pub h: f64,
    /// Nodes per axis, boundary included.
    pub m: usize,
}

impl Grid {
    pub fn new(n: usize, params: GridParams) -> Result<Self, ChartError> {
        let GridParams { half_width, spacing } = params;
        if !(half_width > 0.0 && spacing > 0.0 && spacing < half_width) {
            return Err(ChartError::InvalidParameter(format!("grid half width {half_width}, spacing {spacing}")));
        }
        let cells = (2.0 * half_width / spacing).round() as usize;
        Ok(Self { n, lo: -half_width, h: 2.0 * half_width / cells as f64, m: cells + 1 })
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis indices of node `k` (axis 0 varies fastest).
    pub fn index(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        let mut r = k;
        for _ in 0..self.n {
            out.push(r % self.m);
            r /= self.m;
        }
        out
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.index(k).iter().map(|&i| self.lo + i as f64 * self.h).collect()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.index(k).iter().any(|&i| i == 0 || i == self.m - 1)
    }

    /// Node nearest to `y`.
    pub fn nearest(&self, y: &[f64]) -> usize {
        let idx: Vec<usize> = y.iter().map(|&v| (((v - self.lo) / self.h).round().max(0.0) as usize).min(self.m - 1)).collect();
        self.node(&idx)
    }

    /// Cell volume `h^n`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.n as i32)
    }
}

/// Kernel values `Γ(x, t_k; y)` on a grid for a fixed source.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    pub grid: Grid,
    pub source: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[k][node]` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl GridKernel {
    /// Samples `f(x, t)` at every node and time.
    pub fn from_fn(grid: &Grid, source: &[f64], times: &[f64], f: impl Fn(&[f64], f64) -> f64) -> Self {
        let coords: Vec<Vec<f64>> = (0..grid.len()).map(|k| grid.coords(k)).collect();
        let values = times.iter().map(|&t| coords.iter().map(|x| f(x, t)).collect()).collect();
        Self { grid: grid.clone(), source: source.to_vec(), times: times.to_vec(), values }
    }

    /// `Σ u·h^n` at time level `k`.
    pub fn mass(&self, k: usize) -> f64 {
        self.values[k].iter().sum::<f64>() * self.grid.cell()
    }

    /// The time level closest to `t`, if it is within `1e-9·t`.
    pub fn level(&self, t: f64) -> Option<usize> {
        let (k, dt) = self.times.iter().enumerate().map(|(k, &s)| (k, (s - t).abs())).min_by(|a, b| a.1.total_cmp(&b.1))?;
        (dt <= 1e-9 * t.abs().max(1e-300)).then_some(k)
    }

    /// The kernel restricted to the single time level nearest `t`.
    pub fn at_time(&self, t: f64) -> Option<GridKernel> {
        let k = self.level(t)?;
        Some(Self { grid: self.grid.clone(), source: self.source.clone(), times: vec![self.times[k]], values: vec![self.values[k].clone()] })
    }

    /// Central-difference gradient at an interior node of level `k`.
    pub fn gradient(&self, k: usize, node: usize) -> Option<Vec<f64>> {
        let idx = self.grid.index(node);
        if idx.iter().any(|&i| i == 0 || i + 1 == self.grid.m) {
            return None;
        }
        let u = &self.values[k];
        Some(
            (0..self.grid.n)
                .map(|a| {
                    let mut p = idx.clone();
                    let mut q = idx.clone();
                    p[a] += 1;
                    q[a] -= 1;
                    (u[self.grid.node(&p)] - u[self.grid.node(&q)]) / (2.0 * self.grid.h)
                })
                .collect(),
        )
    }

    /// CSV `x[,y],t,value`.
    pub fn csv(&self) -> String {
        let mut s = String::from(if self.grid.n == 1 { "x,t,value\n" } else { "x,y,t,value\n" });
        for (t, vals) in self.times.iter().zip(&self.values) {
            for (k, v) in vals.iter().enumerate() {
                for c in self.grid.coords(k) {
                    write!(s, "{c:?},").unwrap();
                }
                writeln!(s, "{t:?},{v:?}").unwrap();
            }
        }
        s
    }
}

/// Sparse operator `A u = a^{ij} ∂_i∂_j u` on interior nodes (centred second
/// differences; the mixed term uses the four-corner stencil).
fn operator(spec: &ChartSpec, grid: &Grid, interior: &[usize], slot: &[Option<usize>]) -> CsrMatrix {
    let h2 = grid.h * grid.h;
    let mut trip = Vec::new();
    for (row, &k) in interior.iter().enumerate() {
        let x = grid.coords(k);
        let a = spec.a(&x);
        let idx = grid.index(k);
        let n = grid.n;
        let mut push = |offsets: &[(usize, isize)], w: f64| {
            let mut j = idx.clone();
            for &(axis, o) in offsets {
                j[axis] = (j[axis] as isize + o) as usize;
            }
            if let Some(col) = slot[grid.node(&j)] {
                trip.push((row, col, w));
            }
        };
        for i in 0..n {
            let aii = a[i * n + i] / h2;
            push(&[(i, 1)], aii);
            push(&[(i, -1)], aii);
            push(&[], -2.0 * aii);
            for j in (i + 1)..n {
                // a^{ij} + a^{ji} = 2a^{ij} times the mixed difference /(4h²)
                let w = 2.0 * a[i * n + j] / (4.0 * h2);
                push(&[(i, 1), (j, 1)], w);
                push(&[(i, -1), (j, -1)], w);
                push(&[(i, 1), (j, -1)], -w);
                push(&[(i, -1), (j, 1)], -w);
            }
        }
    }
    CsrMatrix::from_triplets(interior.len(), interior.len(), &trip)
}

/// Fundamental solution from a discrete delta (mass `1/h^n` at the node nearest
/// `y`), evolved to `t_max` in `steps` equal steps with Dirichlet zero on the box.
/// Crank–Nicolson, started by four implicit-Euler half steps to damp the delta.
pub fn solve_fd_kernel(spec: &ChartSpec, params: GridParams, y: &[f64], t_max: f64, steps: usize) -> Result<GridKernel, ChartError> {
    if y.len() != spec.n {
        return Err(ChartError::InvalidParameter(format!("source has {} coordinates, need {}", y.len(), spec.n)));
    }
    if !(t_max > 0.0) || steps < 2 {
        return Err(ChartError::InvalidParameter(format!("t_max {t_max}, steps {steps}")));
    }
    let grid = Grid::new(spec.n, params)?;
    let interior: Vec<usize> = (0..grid.len()).filter(|&k| !grid.is_boundary(k)).collect();
    let mut slot = vec![None; grid.len()];
    for (i, &k) in interior.iter().enumerate() {
        slot[k] = Some(i);
    }
    let src = grid.nearest(y);
    let src_slot = slot[src].ok_or_else(|| ChartError::InvalidParameter(format!("source {y:?} is on the boundary")))?;
    let a = operator(spec, &grid, &interior, &slot);
    let dt = t_max / steps as f64;
    let ones = vec![1.0; interior.len()];
    // I - (dt/2)A serves both the Euler half step and the implicit CN half
    let lhs = BandLu::factor(&a.scaled(-dt / 2.0).add_diagonal(1.0, &ones)).map_err(|e| ChartError::InvalidParameter(e.to_string()))?;
    let mut u = vec![0.0; interior.len()];
    u[src_slot] = 1.0 / grid.cell();
    let mut running_max = u[src_slot];
    let mut times = Vec::with_capacity(steps);
    let mut values = Vec::with_capacity(steps);
    let mut au = vec![0.0; interior.len()];
    for step in 1..=steps {
        if step <= 2 {
            u = lhs.solve(&u);
            u = lhs.solve(&u);
        } else {
            a.mul_vec_into(&u, &mut au);
            let rhs: Vec<f64> = u.iter().zip(&au).map(|(v, w)| v + dt / 2.0 * w).collect();
            u = lhs.solve(&rhs);
        }
        let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !peak.is_finite() || peak > 10.0 * running_max {
            return Err(ChartError::Unstable { step, value: peak, running_max });
        }
        running_max = running_max.max(peak);
        let mut full = vec![0.0; grid.len()];
        for (i, &k) in interior.iter().enumerate() {
            full[k] = u[i];
        }
        times.push(step as f64 * dt);
        values.push(full);
    }
    Ok(GridKernel { grid, source: y.to_vec(), times, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{gamma_e, Coefficients};

    fn sup_err_at(k: &GridKernel, level: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..k.grid.len()).map(|n| (k.values[level][n] - f(&k.grid.coords(n))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid::new(2, GridParams { half_width: 1.0, spacing: 0.25 }).unwrap();
        assert_eq!(g.m, 9);
        for k in [0, 10, 40, 80] {
            assert_eq!(g.node(&g.index(k)), k);
        }
        assert_eq!(g.coords(g.nearest(&[0.0, 0.0])), vec![0.0, 0.0]);
        assert!(g.is_boundary(0) && !g.is_boundary(40));
    }

    #[test]
    fn identity_converges_at_second_order() {
        let spec = ChartSpec::new(1, Coefficients::identity(1), 6.0, 1.0, 0.5).unwrap();
        let t = 0.25;
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let k = solve_fd_kernel(&spec, GridParams { half_width: 6.0, spacing: h }, &[0.0], t, 1024).unwrap();
            let last = k.times.len() - 1;
            assert!((k.times[last] - t).abs() < 1e-15);
            errs.push(sup_err_at(&k, last, |x| gamma_e(x, t, &[0.0])));
            assert!((k.mass(last) - 1.0).abs() < 1e-6);
        }
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((3.0..=5.0).contains(&r), "{errs:?}");
        }
    }

    #[test]
    fn scalar_coefficient_matches_rescaled_gaussian() {
        let c = 1.2;
        let spec = ChartSpec::new(1, Coefficients::scalar(1, c), 6.0, c, 0.5).unwrap();
        let t = 0.25;
        let k = solve_fd_kernel(&spec, GridParams { half_width: 6.0, spacing: 0.05 }, &[0.0], t, 1024).unwrap();
        let last = k.times.len() - 1;
        let err = sup_err_at(&k, last, |x| gamma_e(x, c * t, &[0.0]));
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn anisotropic_2d_matches_frozen_kernel() {
        let spec = ChartSpec::new(2, Coefficients::Constant(vec![1.1, 0.2, 0.2, 0.9]), 3.0, 1.3, 0.5).unwrap();
        let t = 0.2;
        let k = solve_fd_kernel(&spec, GridParams { half_width: 4.5, spacing: 0.1 }, &[0.0, 0.0], t, 256).unwrap();
        let last = k.times.len() - 1;
        let err = sup_err_at(&k, last, |x| crate::charts::frozen_kernel_z(x, t, &[0.0, 0.0], &spec).unwrap());
        let peak = crate::charts::frozen_kernel_z(&[0.0, 0.0], t, &[0.0, 0.0], &spec).unwrap();
        assert!(err < 0.02 * peak, "{err} vs {peak}");
        assert!((k.mass(last) - 1.0).abs() < 1e-6);
        assert!(k.values[last].iter().all(|&v| v >= -1e-8));
    }

    #[test]
    fn csv_and_levels() {
        let spec = ChartSpec::new(1, Coefficients::identity(1), 2.0, 1.0, 0.5).unwrap();
        let k = solve_fd_kernel(&spec, GridParams { half_width: 2.0, spacing: 0.5 }, &[0.0], 1.0, 4).unwrap();
        assert_eq!(k.level(0.5), Some(1));
        assert_eq!(k.level(0.6), None);
        let csv = k.csv();
        assert!(csv.starts_with("x,t,value\n"));
        assert_eq!(csv.lines().count(), 1 + 4 * 9);
        assert!(k.at_time(1.0).unwrap().times == vec![1.0]);
    }
}
