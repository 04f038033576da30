//! Mesh geodesic distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeodesicMethod {
    /// Dijkstra on edges plus two-ring unfolding shortcuts.
    #[default]
    Graph,
    /// Label-correcting fast marching with planar virtual-source updates.
    FastMarching,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on distance, ties by vertex index
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Dijkstra distances over mesh edges augmented with unfolding shortcuts.
pub fn graph_distances(mesh: &TriMesh, source: usize) -> Vec<f64> {
    let n = mesh.num_vertices();
    let shortcuts = mesh.unfolding_shortcuts();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        let edges = mesh.neighbors(v).iter().map(|&w| (w, mesh.edge_length(v, w)));
        for (w, len) in edges.chain(shortcuts[v].iter().copied()) {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

/// Distance at `c` from the planar unfolding of triangle `(a, b, c)` with
/// known distances at `a` and `b`: the virtual point source consistent with
/// both values is reconstructed on the far side of `ab`; when the straight
/// ray to `c` misses the edge, the edge paths are used instead.
fn triangle_update(lab: f64, lac: f64, lbc: f64, da: f64, db: f64) -> f64 {
    let fallback = (da + lac).min(db + lbc);
    // c in the upper half-plane, a at the origin, b at (lab, 0)
    let cx = (lac * lac - lbc * lbc + lab * lab) / (2.0 * lab);
    let cy2 = lac * lac - cx * cx;
    if cy2 <= 0.0 {
        return fallback;
    }
    let cy = cy2.sqrt();
    let sx = (da * da - db * db + lab * lab) / (2.0 * lab);
    let sy2 = da * da - sx * sx;
    if sy2 < 0.0 {
        return fallback;
    }
    let sy = -sy2.sqrt();
    let s = -sy / (cy - sy);
    let xcross = sx + s * (cx - sx);
    if (0.0..=lab).contains(&xcross) {
        ((cx - sx).powi(2) + (cy - sy).powi(2)).sqrt().min(fallback)
    } else {
        fallback
    }
}

/// Fast-marching distances; exact on flat meshes. Propagation stops past
/// `cutoff` (those vertices keep `f64::INFINITY` or an upper bound).
pub fn fast_marching(mesh: &TriMesh, source: usize, cutoff: Option<f64>) -> Vec<f64> {
    let n = mesh.num_vertices();
    let limit = cutoff.unwrap_or(f64::INFINITY);
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    let tris = mesh.triangles();
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] || d > limit {
            continue;
        }
        for &t in mesh.vertex_triangles(v) {
            let tri = tris[t];
            for k in 0..3 {
                let c = tri[k];
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                if c == v {
                    continue;
                }
                let lac = mesh.edge_length(a, c);
                let lbc = mesh.edge_length(b, c);
                let mut nd = (dist[a] + lac).min(dist[b] + lbc);
                if dist[a].is_finite() && dist[b].is_finite() {
                    nd = nd.min(triangle_update(mesh.edge_length(a, b), lac, lbc, dist[a], dist[b]));
                }
                // relative slack keeps round-off from re-queueing forever
                if nd < dist[c] * (1.0 - 1e-14) {
                    dist[c] = nd;
                    heap.push(Entry(nd, c));
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_flat_torus, make_sphere};

    fn torus_exact(mesh: &TriMesh, s: usize, v: usize) -> f64 {
        let d = mesh.displacement(&mesh.position(s), &mesh.position(v));
        d.norm()
    }

    #[test]
    fn fast_marching_exact_on_flat_torus() {
        let mesh = make_flat_torus([1.0, 1.0], 40, 40).unwrap();
        let d = fast_marching(&mesh, 0, Some(0.3));
        for v in 0..mesh.num_vertices() {
            let e = torus_exact(&mesh, 0, v);
            if e < 0.25 {
                assert!((d[v] - e).abs() < 1e-12, "vertex {v}: {} vs {e}", d[v]);
            }
        }
    }

    #[test]
    fn graph_overestimates_moderately() {
        let mesh = make_flat_torus([1.0, 1.0], 30, 30).unwrap();
        let d = graph_distances(&mesh, 0);
        for v in 1..mesh.num_vertices() {
            let e = torus_exact(&mesh, 0, v);
            assert!(d[v] >= e * (1.0 - 1e-12));
            assert!(d[v] <= e * 1.1, "{} vs {e}", d[v]);
        }
    }

    #[test]
    fn icosphere_ratio_band() {
        let mesh = make_sphere(1.0, 3);
        for s in [0, 17, 401] {
            let d = graph_distances(&mesh, s);
            let p = mesh.position(s);
            for v in 0..mesh.num_vertices() {
                if v == s {
                    assert_eq!(d[v], 0.0);
                    continue;
                }
                let q = mesh.position(v);
                let gc = p.cross(&q).norm().atan2(p.dot(&q));
                let r = d[v] / gc;
                // chords are shorter than arcs, so slightly below 1 is possible
                assert!(r > 1.0 - 1e-2 && r <= 1.1, "{s}->{v}: {r}");
            }
        }
    }

    #[test]
    fn triangle_inequality_on_sphere() {
        let mesh = make_sphere(1.0, 2);
        let d0 = fast_marching(&mesh, 0, None);
        let d5 = fast_marching(&mesh, 5, None);
        for v in 0..mesh.num_vertices() {
            assert!(d0[v] <= d0[5] + d5[v] + 1e-2);
        }
        assert!(d0.iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}
