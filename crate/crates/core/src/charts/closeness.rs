//! Sup-norm comparisons of grid kernels and the scaling studies built on them.

use std::fmt::Write as _;

use super::fd::{Grid, GridKernel, GridParams};
use super::{frozen_kernel_z, gamma_e, solve_fd_kernel, ChartError, ChartSpec};

/// Space-time region `{|x| ≤ radius, t_min ≤ t ≤ t_max}` minus the parabolic
/// neighbourhood `{|x - y| < exclude_radius, t < exclude_time}` of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub radius: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub exclude_radius: f64,
    pub exclude_time: f64,
}

impl Region {
    pub fn new(radius: f64, t_min: f64, t_max: f64) -> Self {
        Self { radius, t_min, t_max, exclude_radius: 0.5, exclude_time: 0.25 }
    }

    /// The same window with nothing excluded.
    pub fn including_source(self) -> Self {
        Self { exclude_radius: 0.0, exclude_time: 0.0, ..self }
    }

    pub fn contains(&self, x: &[f64], t: f64, y: &[f64]) -> bool {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let near = d < self.exclude_radius && t < self.exclude_time;
        r <= self.radius + 1e-12 && t >= self.t_min - 1e-12 && t <= self.t_max + 1e-12 && !near
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosenessReport {
    pub sup_value: f64,
    pub sup_gradient: f64,
    /// `(x, t)` attaining each sup.
    pub argmax_value: (Vec<f64>, f64),
    pub argmax_gradient: (Vec<f64>, f64),
    pub points: usize,
}

impl ClosenessReport {
    pub fn summary(&self) -> String {
        format!(
            "sup_value={:e}\nsup_gradient={:e}\nargmax_value_x={:?}\nargmax_value_t={}\nargmax_gradient_x={:?}\nargmax_gradient_t={}\npoints={}\n",
            self.sup_value, self.sup_gradient, self.argmax_value.0, self.argmax_value.1, self.argmax_gradient.0, self.argmax_gradient.1, self.points
        )
    }
}

/// `sup |A - B|` and `sup |∇A - ∇B|` (central differences, Euclidean norm) over
/// the grid points and shared time levels inside `region`.
pub fn closeness_report(a: &GridKernel, b: &GridKernel, region: &Region) -> Result<ClosenessReport, ChartError> {
    if a.grid != b.grid || a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-12 * s.abs().max(1.0)) {
        return Err(ChartError::GridMismatch);
    }
    let mut rep = ClosenessReport { sup_value: 0.0, sup_gradient: 0.0, argmax_value: (vec![], 0.0), argmax_gradient: (vec![], 0.0), points: 0 };
    for (k, &t) in a.times.iter().enumerate() {
        for node in 0..a.grid.len() {
            let x = a.grid.coords(node);
            if !region.contains(&x, t, &a.source) {
                continue;
            }
            rep.points += 1;
            let dv = (a.values[k][node] - b.values[k][node]).abs();
            if dv > rep.sup_value {
                rep.sup_value = dv;
                rep.argmax_value = (x.clone(), t);
            }
            if let (Some(ga), Some(gb)) = (a.gradient(k, node), b.gradient(k, node)) {
                let dg = ga.iter().zip(&gb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                if dg > rep.sup_gradient {
                    rep.sup_gradient = dg;
                    rep.argmax_gradient = (x, t);
                }
            }
        }
    }
    Ok(rep)
}

/// `C_d = sup Γ(x,t;y)·t^{n/2}·exp(|x - y|²/8t)` over all grid values.
pub fn decay_constant(kernel: &GridKernel) -> f64 {
    let n = kernel.grid.n as f64;
    let mut c: f64 = 0.0;
    for (k, &t) in kernel.times.iter().enumerate() {
        for (node, &v) in kernel.values[k].iter().enumerate() {
            let x = kernel.grid.coords(node);
            let r2: f64 = x.iter().zip(&kernel.source).map(|(a, b)| (a - b) * (a - b)).sum();
            c = c.max(v * t.powf(n / 2.0) * (r2 / (8.0 * t)).exp());
        }
    }
    c
}

/// Grid values with `|x - y|² > 16 t·log(1/tol)` that exceed `tol·t^{-n/2}·C_d`.
pub fn decay_violations(kernel: &GridKernel, c_d: f64, tol: f64) -> usize {
    let n = kernel.grid.n as f64;
    let mut bad = 0;
    for (k, &t) in kernel.times.iter().enumerate() {
        for (node, &v) in kernel.values[k].iter().enumerate() {
            let x = kernel.grid.coords(node);
            let r2: f64 = x.iter().zip(&kernel.source).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2 > 16.0 * t * (1.0 / tol).ln() && v.abs() > tol * t.powf(-n / 2.0) * c_d {
                bad += 1;
            }
        }
    }
    bad
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub spacings: Vec<f64>,
    /// `sup |Γ_fd - Z|` at the final time over the whole grid.
    pub errors: Vec<f64>,
    /// `errors[i] / errors[i + 1]`.
    pub ratios: Vec<f64>,
    pub masses: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (i, (h, e)) in self.spacings.iter().zip(&self.errors).enumerate() {
            writeln!(s, "h_{i}={h}\nerror_{i}={e:e}\nmass_{i}={}", self.masses[i]).unwrap();
        }
        for (i, r) in self.ratios.iter().enumerate() {
            writeln!(s, "ratio_{i}={r}").unwrap();
        }
        s
    }
}

/// FD kernels of a constant-coefficient `spec` at each spacing compared with the
/// exact frozen kernel at time `t`. `steps` is the time-step count per solve.
pub fn grid_convergence(spec: &ChartSpec, half_width: f64, spacings: &[f64], y: &[f64], t: f64, steps: usize) -> Result<ConvergenceStudy, ChartError> {
    let mut errors = Vec::new();
    let mut masses = Vec::new();
    for &h in spacings {
        let k = solve_fd_kernel(spec, GridParams { half_width, spacing: h }, y, t, steps)?;
        let last = k.times.len() - 1;
        let err = (0..k.grid.len())
            .map(|node| Ok((k.values[last][node] - frozen_kernel_z(&k.grid.coords(node), t, y, spec)?).abs()))
            .collect::<Result<Vec<f64>, ChartError>>()?
            .into_iter()
            .fold(0.0, f64::max);
        errors.push(err);
        masses.push(k.mass(last));
    }
    let ratios = errors.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ConvergenceStudy { spacings: spacings.to_vec(), errors, ratios, masses })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepStudy {
    pub epsilons: Vec<f64>,
    pub reports: Vec<ClosenessReport>,
    pub slope_value: f64,
    pub slope_gradient: f64,
    /// Successive `sup_value` ratios.
    pub ratios: Vec<f64>,
}

impl SweepStudy {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (i, (e, r)) in self.epsilons.iter().zip(&self.reports).enumerate() {
            writeln!(s, "q_minus_1_{i}={e}\nsup_value_{i}={:e}\nsup_gradient_{i}={:e}", r.sup_value, r.sup_gradient).unwrap();
        }
        for (i, r) in self.ratios.iter().enumerate() {
            writeln!(s, "ratio_{i}={r}").unwrap();
        }
        writeln!(s, "slope_value={}\nslope_gradient={}", self.slope_value, self.slope_gradient).unwrap();
        s
    }
}

/// Bump coefficients `a = (1 + ε·bump)I` with `Q - 1 = ε` for each ε: FD kernel
/// against `Γ_E` over `region`, with log-log slopes of the sups against ε.
pub fn ellipticity_sweep(
    n: usize,
    epsilons: &[f64],
    width: f64,
    alpha: f64,
    params: GridParams,
    y: &[f64],
    region: &Region,
    steps: usize,
) -> Result<SweepStudy, ChartError> {
    if epsilons.len() < 2 || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(ChartError::InvalidParameter(format!("ellipticity levels {epsilons:?}")));
    }
    let mut reports = Vec::new();
    for &eps in epsilons {
        let spec = ChartSpec::bump(n, eps, width, region.radius, alpha)?;
        let fd = solve_fd_kernel(&spec, params, y, region.t_max, steps)?;
        let grid: &Grid = &fd.grid;
        let euclid = GridKernel::from_fn(grid, y, &fd.times, |x, t| gamma_e(x, t, y));
        reports.push(closeness_report(&fd, &euclid, region)?);
    }
    let sv: Vec<f64> = reports.iter().map(|r| r.sup_value).collect();
    let sg: Vec<f64> = reports.iter().map(|r| r.sup_gradient).collect();
    Ok(SweepStudy {
        epsilons: epsilons.to_vec(),
        slope_value: log_log_slope(epsilons, &sv),
        slope_gradient: log_log_slope(epsilons, &sg),
        ratios: sv.windows(2).map(|w| w[1] / w[0]).collect(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{frozen_kernel_z_gradient, gamma_e_gradient, parametrix_kernel, Coefficients, ParametrixOptions};

    fn euclid(grid: &Grid, times: &[f64]) -> GridKernel {
        GridKernel::from_fn(grid, &[0.0], times, |x, t| gamma_e(x, t, &[0.0]))
    }

    #[test]
    fn identical_kernels_are_zero_apart() {
        let grid = Grid::new(1, GridParams { half_width: 3.0, spacing: 0.1 }).unwrap();
        let a = euclid(&grid, &[0.3, 0.6]);
        let r = closeness_report(&a, &a.clone(), &Region::new(3.0, 0.0, 1.0)).unwrap();
        assert_eq!((r.sup_value, r.sup_gradient), (0.0, 0.0));
        assert!(r.points > 0);
        let spec = ChartSpec::new(1, Coefficients::identity(1), 3.0, 1.0, 0.5).unwrap();
        let z = GridKernel::from_fn(&grid, &[0.0], &[0.3, 0.6], |x, t| frozen_kernel_z(x, t, &[0.0], &spec).unwrap());
        let r = closeness_report(&a, &z, &Region::new(3.0, 0.0, 1.0)).unwrap();
        assert_eq!((r.sup_value, r.sup_gradient), (0.0, 0.0));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = Grid::new(1, GridParams { half_width: 3.0, spacing: 0.1 }).unwrap();
        let g2 = Grid::new(1, GridParams { half_width: 3.0, spacing: 0.2 }).unwrap();
        let err = closeness_report(&euclid(&g1, &[0.3]), &euclid(&g2, &[0.3]), &Region::new(3.0, 0.0, 1.0));
        assert_eq!(err.unwrap_err(), ChartError::GridMismatch);
    }

    #[test]
    fn region_excludes_parabolic_neighbourhood() {
        let r = Region::new(2.0, 0.0, 1.0);
        assert!(!r.contains(&[0.2], 0.1, &[0.0]));
        assert!(r.contains(&[0.2], 0.3, &[0.0]));
        assert!(r.contains(&[0.6], 0.1, &[0.0]));
        assert!(!r.contains(&[2.5], 0.5, &[0.0]));
        assert!(r.including_source().contains(&[0.2], 0.1, &[0.0]));
    }

    #[test]
    fn central_differences_track_exact_gradient() {
        let grid = Grid::new(1, GridParams { half_width: 3.0, spacing: 0.01 }).unwrap();
        let k = euclid(&grid, &[0.5]);
        let node = grid.nearest(&[0.7]);
        let g = k.gradient(0, node).unwrap()[0];
        let exact = gamma_e_gradient(&grid.coords(node), 0.5, &[0.0])[0];
        assert!((g - exact).abs() < 1e-4 * exact.abs());
        let spec = ChartSpec::new(1, Coefficients::identity(1), 3.0, 1.0, 0.5).unwrap();
        let gz = frozen_kernel_z_gradient(&grid.coords(node), 0.5, &[0.0], &spec).unwrap()[0];
        assert!((gz - exact).abs() < 1e-15);
    }

    #[test]
    fn decay_constant_of_gaussian() {
        // Γ_E t^{1/2} e^{r²/8t} = (4π)^{-1/2} e^{-r²/8t}, maximal at r = 0
        let grid = Grid::new(1, GridParams { half_width: 4.0, spacing: 0.05 }).unwrap();
        let k = euclid(&grid, &[0.1, 0.5, 1.0]);
        let c = decay_constant(&k);
        assert!((c - (4.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-12);
        assert_eq!(decay_violations(&k, c, 1e-3), 0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.02, 0.04, 0.08];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((log_log_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn convergence_study_reports_second_order() {
        let spec = ChartSpec::new(1, Coefficients::scalar(1, 0.8), 5.0, 1.25, 0.5).unwrap();
        let s = grid_convergence(&spec, 5.0, &[0.1, 0.05, 0.025], &[0.0], 0.25, 512).unwrap();
        assert!(s.ratios.iter().all(|r| (3.0..=5.0).contains(r)), "{:?}", s.ratios);
        assert!(s.masses.iter().all(|m| (m - 1.0).abs() < 1e-6));
        assert!(s.summary().contains("ratio_1="));
    }

    #[test]
    fn sweep_is_linear_in_ellipticity() {
        let p = GridParams { half_width: 6.0, spacing: 0.025 };
        let region = Region::new(3.0, 0.0, 1.0);
        let s = ellipticity_sweep(1, &[0.02, 0.04, 0.08], 1.0, 0.5, p, &[0.0], &region, 512).unwrap();
        assert!((0.7..=1.3).contains(&s.slope_value), "{}", s.summary());
        assert!(s.ratios.iter().all(|r| (1.5..=2.5).contains(r)), "{}", s.summary());
    }

    #[test]
    fn excluded_region_keeps_gradient_bounded() {
        let spec = ChartSpec::bump(1, 0.05, 1.0, 3.0, 0.5).unwrap();
        let p = GridParams { half_width: 6.0, spacing: 0.0125 };
        let fd = solve_fd_kernel(&spec, p, &[0.0], 1.0, 1024).unwrap();
        let e = GridKernel::from_fn(&fd.grid, &[0.0], &fd.times, |x, t| gamma_e(x, t, &[0.0]));
        let outside = closeness_report(&fd, &e, &Region::new(3.0, 0.0, 1.0)).unwrap();
        let inside = closeness_report(&fd, &e, &Region::new(3.0, 0.0, 1.0).including_source()).unwrap();
        assert!(inside.sup_gradient > 5.0 * outside.sup_gradient, "{} vs {}", inside.sup_gradient, outside.sup_gradient);
    }

    #[test]
    fn parametrix_is_a_second_solution_with_the_same_closeness() {
        let spec = ChartSpec::bump(1, 0.05, 1.0, 3.0, 0.5).unwrap();
        let p = GridParams { half_width: 4.0, spacing: 0.05 };
        let times = [0.3, 0.5];
        let par = parametrix_kernel(&spec, p, &[0.0], &times, ParametrixOptions::default()).unwrap();
        let e = GridKernel::from_fn(&par.grid, &[0.0], &times, |x, t| gamma_e(x, t, &[0.0]));
        let r = closeness_report(&par, &e, &Region::new(3.0, 0.0, 1.0)).unwrap();
        assert!(r.sup_value > 0.0 && r.sup_value < spec.q - 1.0);
        assert!(r.sup_gradient < spec.q - 1.0);
    }
}
