//! Distance-function and harmonic coordinates on a mesh ball `B_r(p)`.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector3};

use crate::linalg::{CsrMatrix, EnvelopeCholesky};
use crate::manifold::{fast_marching, graph_distances, GeodesicMethod, TriMesh};

use super::{coordinate_condition, coth, model_volumes, FForm, RadiusError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    /// Known injectivity radius `ι` of the mesh surface.
    pub iota: f64,
    /// Curvature scale with `Ric ≥ -(n-1)Λ²`.
    pub lambda: f64,
    pub method: GeodesicMethod,
    /// Largest angle (degrees) between a frame direction and the realized one.
    pub max_angle_deg: f64,
    /// Multiplicative slack on the Laplacian-of-distance bound.
    pub laplacian_slack: f64,
}

impl ExperimentOptions {
    pub fn new(iota: f64, lambda: f64) -> Self {
        Self { iota, lambda, method: GeodesicMethod::FastMarching, max_angle_deg: 10.0, laplacian_slack: 0.2 }
    }
}

/// Frame points `p_i` at distance `≈ ι/4` from `p` opposite the tangent frame
/// `e_i`, so that `∇ρ_i(p) ≈ e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateFrame {
    pub base: usize,
    pub points: Vec<usize>,
    /// `cos` of the angle between `-e_i` and the realized direction to `p_i`.
    pub alignment: Vec<f64>,
}

/// Distances from `source`; fast marching stops past `cutoff`, so only values
/// below it are meaningful.
fn field(mesh: &TriMesh, source: usize, method: GeodesicMethod, cutoff: f64) -> Vec<f64> {
    match method {
        GeodesicMethod::Graph => graph_distances(mesh, source),
        GeodesicMethod::FastMarching => fast_marching(mesh, source, Some(cutoff)),
    }
}

fn cot(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    u.dot(v) / u.cross(v).norm()
}

/// Off-diagonal cotangent weights `w_vu = (cot α + cot β)/2` of vertex `v`, so that
/// the discrete `-Δf(v) = Σ_u w_vu (f(v) - f(u)) / m_v`.
fn cot_row(mesh: &TriMesh, v: usize) -> Vec<(usize, f64)> {
    let mut row: Vec<(usize, f64)> = Vec::new();
    for &t in mesh.vertex_triangles(v) {
        let tri = mesh.triangles()[t];
        let k = tri.iter().position(|&x| x == v).expect("incident triangle");
        let (u, w) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
        for (a, opp) in [(u, w), (w, u)] {
            let c = 0.5 * cot(&mesh.edge_vector(opp, v), &mesh.edge_vector(opp, a));
            match row.iter_mut().find(|e| e.0 == a) {
                Some(e) => e.1 += c,
                None => row.push((a, c)),
            }
        }
    }
    row
}

fn neg_laplacian_at(mesh: &TriMesh, row: &[(usize, f64)], v: usize, f: &[f64]) -> f64 {
    row.iter().map(|&(u, w)| w * (f[v] - f[u])).sum::<f64>() / mesh.mass()[v]
}

fn frame(mesh: &TriMesh, base: usize, from_base: &[f64], opts: &ExperimentOptions) -> Result<CoordinateFrame, RadiusError> {
    let target = opts.iota / 4.0;
    let band = 1.5 * mesh.mean_edge_length();
    let normal = mesh.vertex_normal(base);
    let e = mesh.tangent_frame(base);
    let p = mesh.position(base);
    let cos_max = opts.max_angle_deg.to_radians().cos();
    let mut points = Vec::new();
    let mut alignment = Vec::new();
    for (axis, ei) in e.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (v, &d) in from_base.iter().enumerate() {
            if (d - target).abs() > band {
                continue;
            }
            let mut dir: Vector3<f64> = mesh.displacement(&p, &mesh.position(v));
            dir -= normal * normal.dot(&dir);
            let Some(unit) = dir.try_normalize(1e-300) else { continue };
            let c = -unit.dot(ei);
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((v, c));
            }
        }
        match best {
            Some((v, c)) if c >= cos_max => {
                points.push(v);
                alignment.push(c);
            }
            Some((_, c)) => {
                return Err(RadiusError::FrameUnrealizable { axis, reason: format!("best direction is {:.1} degrees off", c.acos().to_degrees()) })
            }
            None => return Err(RadiusError::FrameUnrealizable { axis, reason: format!("no vertex at distance {target} within {band}") }),
        }
    }
    Ok(CoordinateFrame { base, points, alignment })
}

fn gram(a: &[Vector3<f64>]) -> Matrix2<f64> {
    Matrix2::new(a[0].dot(&a[0]), a[0].dot(&a[1]), a[1].dot(&a[0]), a[1].dot(&a[1]))
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
fn eig2(m: &Matrix2<f64>) -> (f64, f64) {
    let tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let d = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    (tr - d, tr + d)
}

fn op_norm(m: &Matrix2<f64>) -> f64 {
    eig2(&(m.transpose() * m)).1.sqrt()
}

/// `r^α` times the `C^α` seminorm of a per-triangle matrix field, using chord
/// distances between centroids.
fn holder_seminorm(mesh: &TriMesh, tris: &[usize], fields: &[Matrix2<f64>], alpha: f64, r: f64) -> f64 {
    let cents: Vec<Vector3<f64>> = tris.iter().map(|&t| mesh.triangle_centroid(t)).collect();
    let mut best: f64 = 0.0;
    for a in 0..tris.len() {
        for b in (a + 1)..tris.len() {
            let d = mesh.displacement(&cents[a], &cents[b]).norm();
            if d > 0.0 {
                best = best.max(op_norm(&(fields[a] - fields[b])) / d.powf(alpha));
            }
        }
    }
    best * r.powf(alpha)
}

#[derive(Debug, Clone)]
pub struct DistanceReport {
    pub r: f64,
    pub frame: CoordinateFrame,
    /// Vertices with `d(p, v) < r`.
    pub interior: Vec<usize>,
    /// Neighbours of `interior` outside it.
    pub ring: Vec<usize>,
    /// Triangles with all corners in `interior ∪ ring`.
    pub triangles: Vec<usize>,
    pub from_base: Vec<f64>,
    /// `ρ_i = d(·, p_i)` over all vertices.
    pub rho: Vec<Vec<f64>>,
    /// `g(∇ρ_i, ∇ρ_j)` per ball triangle.
    pub gram: Vec<Matrix2<f64>>,
    pub gram_at_base: Matrix2<f64>,
    pub eig_min: f64,
    pub eig_max: f64,
    /// `r^{1/2}[g^{ij}]_{C^{1/2}}` over the ball.
    pub holder_half: f64,
    /// `C(n, Λr, Λι)(Λr)^{1/2}` for comparison.
    pub holder_bound: f64,
    pub laplacian_checked: usize,
    pub laplacian_violations: usize,
}

impl DistanceReport {
    pub fn summary(&self) -> String {
        let g = &self.gram_at_base;
        let mut s = String::new();
        writeln!(s, "base={}\nr={}\nframe_points={:?}\nframe_alignment={:?}", self.frame.base, self.r, self.frame.points, self.frame.alignment).unwrap();
        writeln!(s, "ball_vertices={}\nball_triangles={}", self.interior.len(), self.triangles.len()).unwrap();
        writeln!(s, "gram_at_base=[{},{};{},{}]", g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]).unwrap();
        writeln!(s, "gram_eig_min={}\ngram_eig_max={}", self.eig_min, self.eig_max).unwrap();
        writeln!(s, "holder_half={}\nholder_bound={}", self.holder_half, self.holder_bound).unwrap();
        writeln!(s, "laplacian_checked={}\nlaplacian_violations={}", self.laplacian_checked, self.laplacian_violations).unwrap();
        s
    }

    /// CSV `vertex,distance,rho_1,rho_2` over the ball interior.
    pub fn csv(&self) -> String {
        let mut s = String::from("vertex,distance,rho_1,rho_2\n");
        for &v in &self.interior {
            writeln!(s, "{v},{:?},{:?},{:?}", self.from_base[v], self.rho[0][v], self.rho[1][v]).unwrap();
        }
        s
    }
}

/// Incident triangle gradients of `f` at `v` turn by more than 60 degrees.
fn is_ridge(mesh: &TriMesh, f: &[f64], v: usize) -> bool {
    let units: Vec<Vector3<f64>> = mesh.vertex_triangles(v).iter().filter_map(|&t| mesh.triangle_gradient(t, f).try_normalize(1e-300)).collect();
    units.iter().any(|a| units.iter().any(|b| a.dot(b) < 0.5))
}

/// Some vertex within two edges of `v` is a ridge vertex of `f`.
fn near_ridge(mesh: &TriMesh, f: &[f64], v: usize) -> bool {
    let mut hood = vec![v];
    for _ in 0..2 {
        let next: Vec<usize> = hood.iter().flat_map(|&w| mesh.neighbors(w).iter().copied()).collect();
        hood.extend(next);
        hood.sort_unstable();
        hood.dedup();
    }
    hood.iter().any(|&w| is_ridge(mesh, f, w))
}

/// Distance coordinates `ρ_i = d(·, p_i)` on `B_r(base)` and their gram field.
pub fn distance_coordinates_experiment(mesh: &TriMesh, base: usize, r: f64, opts: &ExperimentOptions) -> Result<DistanceReport, RadiusError> {
    if base >= mesh.num_vertices() || !(r > 0.0) || !(opts.iota > 0.0) || !(opts.lambda > 0.0) {
        return Err(RadiusError::InvalidParameter(format!("base {base}, r {r}, iota {}, Lambda {}", opts.iota, opts.lambda)));
    }
    // far enough for the frame band and for three rings beyond the closed ball
    let edge = mesh.max_edge_length();
    let reach = opts.iota / 4.0 + r + 2.0 * mesh.mean_edge_length() + 6.0 * edge;
    let from_base = field(mesh, base, opts.method, reach);
    let frame = frame(mesh, base, &from_base, opts)?;
    let rho: Vec<Vec<f64>> = frame.points.iter().map(|&q| field(mesh, q, opts.method, reach)).collect();
    let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| from_base[v] < r).collect();
    let mut in_ball = vec![false; mesh.num_vertices()];
    interior.iter().for_each(|&v| in_ball[v] = true);
    let mut ring: Vec<usize> = interior.iter().flat_map(|&v| mesh.neighbors(v).iter().copied()).filter(|&w| !in_ball[w]).collect();
    ring.sort_unstable();
    ring.dedup();
    let mut closed = in_ball.clone();
    ring.iter().for_each(|&v| closed[v] = true);
    let triangles: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| mesh.triangles()[t].iter().all(|&v| closed[v])).collect();
    if triangles.is_empty() {
        return Err(RadiusError::InvalidParameter(format!("ball of radius {r} contains no triangle")));
    }
    let gram_field: Vec<Matrix2<f64>> = triangles.iter().map(|&t| gram(&[mesh.triangle_gradient(t, &rho[0]), mesh.triangle_gradient(t, &rho[1])])).collect();
    let (mut eig_min, mut eig_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in &gram_field {
        let (lo, hi) = eig2(g);
        eig_min = eig_min.min(lo);
        eig_max = eig_max.max(hi);
    }
    let gb: Vec<[f64; 2]> = rho.iter().map(|f| mesh.vertex_gradient(base, f)).collect();
    let gram_at_base = Matrix2::new(
        gb[0][0] * gb[0][0] + gb[0][1] * gb[0][1],
        gb[0][0] * gb[1][0] + gb[0][1] * gb[1][1],
        gb[0][0] * gb[1][0] + gb[0][1] * gb[1][1],
        gb[1][0] * gb[1][0] + gb[1][1] * gb[1][1],
    );
    // Laplacian comparison |Δρ_i| ≤ (n-1)Λ coth(Λρ_i) off the ridge zones
    let rows: Vec<Vec<(usize, f64)>> = interior.iter().map(|&v| cot_row(mesh, v)).collect();
    let mut checked = 0;
    let mut violations = 0;
    for f in &rho {
        for (&v, row) in interior.iter().zip(&rows) {
            if near_ridge(mesh, f, v) {
                continue;
            }
            checked += 1;
            let bound = opts.lambda * coth(opts.lambda * f[v]) * (1.0 + opts.laplacian_slack);
            if neg_laplacian_at(mesh, row, v, f).abs() > bound {
                violations += 1;
            }
        }
    }
    Ok(DistanceReport {
        r,
        holder_half: holder_seminorm(mesh, &triangles, &gram_field, 0.5, r),
        holder_bound: coordinate_condition(2, opts.lambda, opts.iota, r, FForm::Exact),
        frame,
        interior,
        ring,
        triangles,
        from_base,
        rho,
        gram: gram_field,
        gram_at_base,
        eig_min,
        eig_max,
        laplacian_checked: checked,
        laplacian_violations: violations,
    })
}

#[derive(Debug, Clone)]
pub struct HarmonicReport {
    /// `b_i` over all vertices (equal to `ρ_i` outside the ball interior).
    pub b: Vec<Vec<f64>>,
    /// `max_i sup |b_i - ρ_i| / r` over the ball interior.
    pub sup_deviation: f64,
    pub max_principle_checked: usize,
    pub max_principle_violations: usize,
    pub eig_min: f64,
    pub eig_max: f64,
    /// `(α, r^α[g(∇b_i, ∇b_j)]_{C^α})`.
    pub holder: Vec<(f64, f64)>,
    /// `sup ‖∂b/∂ρ - I‖` over ball triangles.
    pub jacobian_deviation: f64,
    /// `gram(∇b)` range lies inside the `gram(∇ρ)` range widened by the Jacobian deviation.
    pub consistent: bool,
}

impl HarmonicReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "sup_deviation_over_r={}", self.sup_deviation).unwrap();
        writeln!(s, "max_principle_checked={}\nmax_principle_violations={}", self.max_principle_checked, self.max_principle_violations).unwrap();
        writeln!(s, "gram_eig_min={}\ngram_eig_max={}", self.eig_min, self.eig_max).unwrap();
        for (a, h) in &self.holder {
            writeln!(s, "holder_{}={h}", format!("{a}").replace('.', "_")).unwrap();
        }
        writeln!(s, "jacobian_deviation={}\nconsistent={}", self.jacobian_deviation, self.consistent).unwrap();
        s
    }
}

/// Harmonic coordinates: discrete `Δb_i = 0` on the ball interior with `b_i = ρ_i`
/// on the boundary ring, using the cotangent Laplacian.
pub fn harmonic_coordinates_experiment(mesh: &TriMesh, dist: &DistanceReport) -> Result<HarmonicReport, RadiusError> {
    let nv = mesh.num_vertices();
    let mut slot = vec![usize::MAX; nv];
    dist.interior.iter().enumerate().for_each(|(i, &v)| slot[v] = i);
    let rows: Vec<Vec<(usize, f64)>> = dist.interior.iter().map(|&v| cot_row(mesh, v)).collect();
    let mut trip = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for &(u, w) in row {
            trip.push((i, i, w));
            if slot[u] != usize::MAX {
                trip.push((i, slot[u], -w));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(rows.len(), rows.len(), &trip);
    let chol = EnvelopeCholesky::factor(&stiffness).map_err(|e| RadiusError::Singular(e.to_string()))?;
    let mut b = Vec::new();
    let mut sup_dev: f64 = 0.0;
    let mut checked = 0;
    let mut violations = 0;
    for rho in &dist.rho {
        // ring neighbours move to the right-hand side
        let rhs: Vec<f64> = rows.iter().map(|row| row.iter().filter(|e| slot[e.0] == usize::MAX).map(|&(u, w)| w * rho[u]).sum()).collect();
        let sol = chol.solve(&rhs);
        let mut bi = rho.clone();
        for (i, &v) in dist.interior.iter().enumerate() {
            bi[v] = sol[i];
            sup_dev = sup_dev.max((sol[i] - rho[v]).abs() / dist.r);
        }
        let lo = dist.ring.iter().map(|&v| rho[v]).fold(f64::INFINITY, f64::min);
        let hi = dist.ring.iter().map(|&v| rho[v]).fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-12 * hi.abs().max(1.0);
        for &x in &sol {
            checked += 1;
            if x < lo - slack || x > hi + slack {
                violations += 1;
            }
        }
        b.push(bi);
    }
    let grads = |f: &[f64], t: usize| mesh.triangle_gradient(t, f);
    let mut gram_b = Vec::with_capacity(dist.triangles.len());
    let mut jac_dev: f64 = 0.0;
    for &t in &dist.triangles {
        let gb = [grads(&b[0], t), grads(&b[1], t)];
        let gr = [grads(&dist.rho[0], t), grads(&dist.rho[1], t)];
        gram_b.push(gram(&gb));
        // ∇b_i = J_ij ∇ρ_j, solved in the triangle plane
        let grr = gram(&gr);
        let cross = Matrix2::new(gb[0].dot(&gr[0]), gb[0].dot(&gr[1]), gb[1].dot(&gr[0]), gb[1].dot(&gr[1]));
        let inv = grr.try_inverse().ok_or_else(|| RadiusError::Singular(format!("distance gradients degenerate on triangle {t}")))?;
        jac_dev = jac_dev.max(op_norm(&(cross * inv - Matrix2::identity())));
    }
    let (mut eig_min, mut eig_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in &gram_b {
        let (lo, hi) = eig2(g);
        eig_min = eig_min.min(lo);
        eig_max = eig_max.max(hi);
    }
    let tol = 1e-9;
    let consistent = eig_min >= dist.eig_min * (1.0 - jac_dev).max(0.0).powi(2) - tol && eig_max <= dist.eig_max * (1.0 + jac_dev).powi(2) + tol;
    let holder = [0.5, 0.9].iter().map(|&a| (a, holder_seminorm(mesh, &dist.triangles, &gram_b, a, dist.r))).collect();
    Ok(HarmonicReport {
        b,
        sup_deviation: sup_dev,
        max_principle_checked: checked,
        max_principle_violations: violations,
        eig_min,
        eig_max,
        holder,
        jacobian_deviation: jac_dev,
        consistent,
    })
}

/// `Vol(B_r(p)) / Vol_Λ(B_r)` for each radius, where the mesh ball volume counts
/// each triangle's area by the fraction of its corners inside the ball.
pub fn volume_ratio_profile(mesh: &TriMesh, base: usize, radii: &[f64], lambda: f64, method: GeodesicMethod) -> Vec<f64> {
    let reach = radii.iter().copied().fold(0.0, f64::max) + 2.0 * mesh.max_edge_length();
    let d = field(mesh, base, method, reach);
    radii
        .iter()
        .map(|&r| {
            let vol: f64 = (0..mesh.num_triangles())
                .map(|t| mesh.triangle_area(t) * mesh.triangles()[t].iter().filter(|&&v| d[v] < r).count() as f64 / 3.0)
                .sum();
            vol / model_volumes(2, lambda, r).0
        })
        .collect()
}
