use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::Vector3;

use super::ManifoldError;

/// Relative area threshold below which a triangle is rejected:
/// `area < DEGENERATE_AREA * diag²`.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Closed, oriented triangle mesh with lumped (barycentric) vertex masses.
///
/// A mesh may be periodic in `x` and `y` (a flat torus built from a grid);
/// every geometric quantity is then computed from minimum-image edge vectors.
#[derive(Debug)]
pub struct TriMesh {
    positions: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    periods: Option<[f64; 2]>,
    mass: Vec<f64>,
    adj_ptr: Vec<usize>,
    adj: Vec<usize>,
    vt_ptr: Vec<usize>,
    vt: Vec<usize>,
    shortcuts: OnceLock<Vec<Vec<(usize, f64)>>>,
}

impl Clone for TriMesh {
    fn clone(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            triangles: self.triangles.clone(),
            periods: self.periods,
            mass: self.mass.clone(),
            adj_ptr: self.adj_ptr.clone(),
            adj: self.adj.clone(),
            vt_ptr: self.vt_ptr.clone(),
            vt: self.vt.clone(),
            shortcuts: OnceLock::new(),
        }
    }
}

fn csr_from_lists(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> (Vec<usize>, Vec<usize>) {
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in pairs {
        lists[a].push(b);
    }
    let mut ptr = Vec::with_capacity(n + 1);
    let mut idx = Vec::new();
    ptr.push(0);
    for mut l in lists {
        l.sort_unstable();
        l.dedup();
        idx.extend(l);
        ptr.push(idx.len());
    }
    (ptr, idx)
}

impl TriMesh {
    /// Validates and builds a mesh. Fails on out-of-range indices, boundary
    /// edges, inconsistent orientation, and (near) zero-area triangles.
    pub fn new(
        positions: Vec<[f64; 3]>,
        triangles: Vec<[usize; 3]>,
        periods: Option<[f64; 2]>,
    ) -> Result<Self, ManifoldError> {
        let nv = positions.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(ManifoldError::IndexOutOfRange { triangle: t, index: v, vertices: nv });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(ManifoldError::Degenerate { triangle: t, area: 0.0 });
            }
        }
        if triangles.is_empty() {
            return Err(ManifoldError::NotClosed { edge: (0, 0) });
        }

        let mut directed: Vec<(usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for tri in &triangles {
            for k in 0..3 {
                directed.push((tri[k], tri[(k + 1) % 3]));
            }
        }
        directed.sort_unstable();
        for w in directed.windows(2) {
            if w[0] == w[1] {
                return Err(ManifoldError::Orientation { edge: w[0] });
            }
        }
        for &(a, b) in &directed {
            if directed.binary_search(&(b, a)).is_err() {
                return Err(ManifoldError::NotClosed { edge: (a, b) });
            }
        }

        let (adj_ptr, adj) = csr_from_lists(nv, directed.iter().copied());
        let (vt_ptr, vt) = csr_from_lists(
            nv,
            triangles.iter().enumerate().flat_map(|(t, tri)| tri.iter().map(move |&v| (v, t))),
        );

        let mut mesh = Self {
            positions,
            triangles,
            periods,
            mass: Vec::new(),
            adj_ptr,
            adj,
            vt_ptr,
            vt,
            shortcuts: OnceLock::new(),
        };
        let diag = mesh.bbox_diagonal();
        let mut mass = vec![0.0; nv];
        for t in 0..mesh.triangles.len() {
            let area = mesh.triangle_area(t);
            if !(area >= DEGENERATE_AREA * diag * diag) {
                return Err(ManifoldError::Degenerate { triangle: t, area });
            }
            for &v in &mesh.triangles[t] {
                mass[v] += area / 3.0;
            }
        }
        mesh.mass = mass;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> Vector3<f64> {
        Vector3::from(self.positions[v])
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn periods(&self) -> Option<[f64; 2]> {
        self.periods
    }

    /// Lumped barycentric mass per vertex.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_area(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vt[self.vt_ptr[v]..self.vt_ptr[v + 1]]
    }

    /// Vector from vertex `a` to vertex `b`, minimum image for periodic meshes.
    pub fn edge_vector(&self, a: usize, b: usize) -> Vector3<f64> {
        let mut d = self.position(b) - self.position(a);
        if let Some(p) = self.periods {
            for k in 0..2 {
                d[k] -= p[k] * (d[k] / p[k]).round();
            }
        }
        d
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        self.edge_vector(a, b).norm()
    }

    /// Unnormalized triangle normal (twice the area in magnitude).
    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        self.edge_vector(a, b).cross(&self.edge_vector(a, c))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.triangle_normal(t).norm()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        if let Some(p) = self.periods {
            return (p[0] * p[0] + p[1] * p[1]).sqrt();
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.positions {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in 0..self.num_vertices() {
            for &w in self.neighbors(v) {
                sum += self.edge_length(v, w);
                count += 1;
            }
        }
        sum / count as f64
    }

    pub fn max_edge_length(&self) -> f64 {
        (0..self.num_vertices())
            .flat_map(|v| self.neighbors(v).iter().map(move |&w| (v, w)))
            .map(|(v, w)| self.edge_length(v, w))
            .fold(0.0, f64::max)
    }

    /// Area-weighted vertex normal (unit).
    pub fn vertex_normal(&self, v: usize) -> Vector3<f64> {
        let n: Vector3<f64> = self.vertex_triangles(v).iter().map(|&t| self.triangle_normal(t)).sum();
        n.normalize()
    }

    /// Orthonormal tangent frame `(e1, e2)` of the least-squares plane at `v`.
    pub fn tangent_frame(&self, v: usize) -> [Vector3<f64>; 2] {
        tangent_frame_for_normal(&self.vertex_normal(v))
    }

    /// Constant gradient (ambient 3-vector) of the piecewise-linear
    /// interpolant of `field` on triangle `t`.
    pub fn triangle_gradient(&self, t: usize, field: &[f64]) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let xb = self.edge_vector(a, b);
        let xc = self.edge_vector(a, c);
        let n = xb.cross(&xc);
        let area2 = n.norm();
        let nh = n / area2;
        // edges opposite each vertex, counter-clockwise
        let e_a = xc - xb;
        let e_b = -xc;
        let e_c = xb;
        let s = e_a * field[a] + e_b * field[b] + e_c * field[c];
        nh.cross(&s) / area2
    }

    /// Area-averaged triangle gradients at `v`, expressed in `tangent_frame(v)`.
    pub fn vertex_gradient(&self, v: usize, field: &[f64]) -> [f64; 2] {
        let mut g = Vector3::zeros();
        let mut w = 0.0;
        for &t in self.vertex_triangles(v) {
            let a = self.triangle_area(t);
            g += self.triangle_gradient(t, field) * a;
            w += a;
        }
        g /= w;
        let [e1, e2] = self.tangent_frame(v);
        [g.dot(&e1), g.dot(&e2)]
    }

    pub fn triangle_centroid(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        self.position(a) + (self.edge_vector(a, b) + self.edge_vector(a, c)) / 3.0
    }

    /// Minimum-image displacement between two arbitrary points.
    pub fn displacement(&self, from: &Vector3<f64>, to: &Vector3<f64>) -> Vector3<f64> {
        let mut d = to - from;
        if let Some(p) = self.periods {
            for k in 0..2 {
                d[k] -= p[k] * (d[k] / p[k]).round();
            }
        }
        d
    }

    /// Two-ring "unfolding" shortcuts: for each pair of triangles sharing an
    /// edge, the opposite vertices are joined when the straight segment of the
    /// unfolded pair crosses the shared edge.
    pub fn unfolding_shortcuts(&self) -> &[Vec<(usize, f64)>] {
        self.shortcuts.get_or_init(|| self.build_shortcuts())
    }

    fn build_shortcuts(&self) -> Vec<Vec<(usize, f64)>> {
        let mut opposite: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len());
        for tri in &self.triangles {
            for k in 0..3 {
                opposite.insert((tri[k], tri[(k + 1) % 3]), tri[(k + 2) % 3]);
            }
        }
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vertices()];
        for (&(a, b), &v) in &opposite {
            if a > b {
                continue;
            }
            let w = opposite[&(b, a)];
            if v == w || self.neighbors(v).binary_search(&w).is_ok() {
                continue;
            }
            // planar frame: a at origin, b on +x, v above
            let ab = self.edge_vector(a, b);
            let c = ab.norm();
            let ex = ab / c;
            let av = self.edge_vector(a, v);
            let aw = self.edge_vector(a, w);
            let vx = av.dot(&ex);
            let vy = (av - ex * vx).norm();
            let wx = aw.dot(&ex);
            let wy = -(aw - ex * wx).norm();
            // crossing of segment v-w' with the x axis
            let s = vy / (vy - wy);
            let xc = vx + s * (wx - vx);
            if xc > 0.0 && xc < c {
                let d = ((vx - wx).powi(2) + (vy - wy).powi(2)).sqrt();
                out[v].push((w, d));
                out[w].push((v, d));
            }
        }
        for l in &mut out {
            l.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.partial_cmp(&y.1).unwrap()));
            l.dedup_by_key(|e| e.0);
        }
        out
    }
}

pub(crate) fn tangent_frame_for_normal(n: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let axis = (0..3)
        .min_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap().then(i.cmp(&j)))
        .unwrap();
    let mut a = Vector3::zeros();
    a[axis] = 1.0;
    let e1 = (a - n * n.dot(&a)).normalize();
    let e2 = n.cross(&e1);
    [e1, e2]
}

/// Icosphere of the given radius: icosahedron refined `subdivisions` times by
/// edge midpoints, every vertex projected to the sphere. `10·4^s + 2` vertices.
pub fn make_sphere(radius: f64, subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::from(*p).normalize())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for &[a, b, c] in &tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let positions = verts.iter().map(|v| [v.x * radius, v.y * radius, v.z * radius]).collect();
    TriMesh::new(positions, tris, None).expect("icosphere is a valid closed mesh")
}

/// Flat torus `[0,a) × [0,b)` as a periodic right-triangle grid with
/// `nx × ny` cells (each split along the same diagonal).
pub fn make_flat_torus(periods: [f64; 2], nx: usize, ny: usize) -> Result<TriMesh, ManifoldError> {
    if periods.iter().any(|&p| !(p > 0.0)) {
        return Err(ManifoldError::NonPositiveParameter { name: "period", value: periods[0].min(periods[1]) });
    }
    if nx < 3 || ny < 3 {
        return Err(ManifoldError::NonPositiveParameter { name: "grid cells (need >= 3)", value: nx.min(ny) as f64 });
    }
    let id = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            positions.push([periods[0] * i as f64 / nx as f64, periods[1] * j as f64 / ny as f64, 0.0]);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = id(i, j);
            let v10 = id(i + 1, j);
            let v11 = id(i + 1, j + 1);
            let v01 = id(i, j + 1);
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }
    TriMesh::new(positions, tris, Some(periods))
}
