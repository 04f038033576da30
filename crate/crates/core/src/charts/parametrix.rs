//! Truncated parametrix `Γ ≈ Z + ∫∫ Z·Φ` with `Φ = Σ_{i ≤ depth} Φ_i`.

use crate::parallel::par_map;

use super::fd::{Grid, GridKernel, GridParams};
use super::{z_with, ChartError, ChartSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametrixOptions {
    /// Number of iterated kernels kept; 0 returns `Z`.
    pub depth: usize,
    /// Midpoint-rule steps on `[0, t]`.
    pub time_steps: usize,
    /// Maximum number of kernel evaluations per output time.
    pub budget: u64,
}

impl Default for ParametrixOptions {
    fn default() -> Self {
        Self { depth: 1, time_steps: 64, budget: 2_000_000_000 }
    }
}

/// Frozen data at one grid node.
struct Frozen {
    x: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    det: f64,
}

/// `L Z(x, s; η) = (a^{ij}(η) - a^{ij}(x))·∂_i∂_j Z(x, s; η)` for `L = ∂_t - a^{ij}(x)∂_i∂_j`.
fn lz(at_x: &Frozen, at_eta: &Frozen, s: f64) -> f64 {
    let n = at_x.x.len();
    let d: Vec<f64> = at_x.x.iter().zip(&at_eta.x).map(|(a, b)| a - b).collect();
    let ad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| at_eta.lower[i * n + j] * d[j]).sum()).collect();
    let z = z_with(&at_eta.lower, at_eta.det, &at_x.x, s, &at_eta.x);
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let diff = at_eta.upper[i * n + j] - at_x.upper[i * n + j];
            if diff != 0.0 {
                acc += diff * (ad[i] * ad[j] / (4.0 * s * s) - at_eta.lower[i * n + j] / (2.0 * s));
            }
        }
    }
    acc * z
}

fn evaluations(nodes: u64, m: u64, depth: usize) -> u64 {
    if depth == 0 {
        return nodes;
    }
    let phi1 = m * nodes;
    let iterated = (depth as u64 - 1) * (m * (m - 1) / 2) * nodes * nodes;
    phi1 + iterated + m * nodes * nodes
}

/// The parametrix on the grid of `params` at each time in `times`, source `y`.
/// Time integrals use the midpoint rule with `time_steps` cells; space integrals are
/// grid-cell sums over the box. The diagonal cell of each iterated time integral is
/// dropped, which is where the midpoint rule has no sample.
pub fn parametrix_kernel(spec: &ChartSpec, params: GridParams, y: &[f64], times: &[f64], opts: ParametrixOptions) -> Result<GridKernel, ChartError> {
    if y.len() != spec.n {
        return Err(ChartError::InvalidParameter(format!("source has {} coordinates, need {}", y.len(), spec.n)));
    }
    if times.iter().any(|&t| !(t > 0.0)) || opts.time_steps == 0 {
        return Err(ChartError::InvalidParameter(format!("times {times:?}, time steps {}", opts.time_steps)));
    }
    let grid = Grid::new(spec.n, params)?;
    let nodes = grid.len();
    let needed = evaluations(nodes as u64, opts.time_steps as u64, opts.depth);
    if needed > opts.budget {
        return Err(ChartError::Budget { needed, budget: opts.budget });
    }
    let (ly, dy) = spec.lower(y)?;
    let frozen_y = Frozen { x: y.to_vec(), upper: spec.a(y), lower: ly.clone(), det: dy };
    let frozen: Vec<Frozen> = (0..nodes)
        .map(|k| {
            let x = grid.coords(k);
            let (lower, det) = spec.lower(&x)?;
            Ok(Frozen { upper: spec.a(&x), x, lower, det })
        })
        .collect::<Result<_, ChartError>>()?;
    let cell = grid.cell();
    let m = opts.time_steps;
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let z0: Vec<f64> = frozen.iter().map(|f| z_with(&ly, dy, &f.x, t, y)).collect();
        if opts.depth == 0 {
            values.push(z0);
            continue;
        }
        let tau = t / m as f64;
        let s: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) * tau).collect();
        // phi[k][node] = Φ(η_node, s_k; y)
        let mut term: Vec<Vec<f64>> = s.iter().map(|&sk| frozen.iter().map(|f| -lz(f, &frozen_y, sk)).collect()).collect();
        let mut phi = term.clone();
        for _ in 1..opts.depth {
            // Φ_{i+1}(η, s_k) = -Σ_{j<k} τ Σ_ξ h^n LZ(η, s_k - s_j; ξ)·Φ_i(ξ, s_j)
            let prev = &term;
            let next: Vec<Vec<f64>> = (0..m)
                .map(|k| {
                    par_map(nodes, |e| {
                        let mut acc = 0.0;
                        for j in 0..k {
                            let ds = s[k] - s[j];
                            for (xi, f) in frozen.iter().enumerate() {
                                let p = prev[j][xi];
                                if p != 0.0 {
                                    acc += lz(&frozen[e], f, ds) * p;
                                }
                            }
                        }
                        -acc * tau * cell
                    })
                })
                .collect();
            for (row, add) in phi.iter_mut().zip(&next) {
                row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
            }
            term = next;
        }
        let out = par_map(nodes, |xk| {
            let x = &frozen[xk].x;
            let mut acc = 0.0;
            for (k, &sk) in s.iter().enumerate() {
                let dt = t - sk;
                for (e, f) in frozen.iter().enumerate() {
                    let p = phi[k][e];
                    if p != 0.0 {
                        acc += z_with(&f.lower, f.det, x, dt, &f.x) * p;
                    }
                }
            }
            z0[xk] + acc * tau * cell
        });
        values.push(out);
    }
    Ok(GridKernel { grid, source: y.to_vec(), times: times.to_vec(), values })
}
