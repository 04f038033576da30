//! δ-nets by farthest-point sampling and their Voronoi cell weights.

use crate::manifold::{AnalyticManifold, Manifold, ManifoldSample, Point};
use crate::parallel::par_map;

use super::EmbedError;

/// Sample points `q_i` whose δ-balls cover the manifold, with cell measures `|A_i|`.
#[derive(Debug, Clone)]
pub struct Net {
    pub points: Vec<Point>,
    pub delta: f64,
    /// Largest distance from a verification sample point to its nearest net point.
    pub covering_radius: f64,
    /// Largest distance from a sample point to the centre of its cell.
    pub cell_radius: f64,
    pub weights: Vec<f64>,
}

impl Net {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sample spacing: mean edge length on meshes, `(Vol/M)^{1/n}` on analytic samples.
pub fn sample_spacing(manifold: &Manifold, sample: &ManifoldSample) -> f64 {
    match manifold {
        Manifold::Mesh(m) => m.mean_edge_length(),
        Manifold::Analytic(a) => (a.volume() / sample.points.len() as f64).powf(1.0 / a.dimension() as f64),
    }
}

fn circle_length(manifold: &Manifold) -> Option<f64> {
    match manifold.as_analytic() {
        Some(AnalyticManifold::Circle { length }) => Some(*length),
        _ => None,
    }
}

/// Farthest-point net seeded at vertex 0 (mesh) or the first sample point
/// (analytic; angle 0 on the circle). Points are added while the covering
/// radius is `≥ delta`; a single point is returned when `delta ≥ diameter`.
/// On the circle the farthest point is taken in closed form (midpoint of the
/// first longest gap); elsewhere candidates are the points of `manifold.sample(resolution)`.
pub fn build_net(manifold: &Manifold, delta: f64, resolution: usize) -> Result<Net, EmbedError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(EmbedError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let sample = manifold.sample(resolution);
    let spacing = sample_spacing(manifold, &sample);
    if delta < spacing {
        return Err(EmbedError::NetTooFine { delta, spacing });
    }
    let single = delta >= manifold.diameter();
    let points = match circle_length(manifold) {
        Some(len) => circle_fps(len, delta, single),
        None => sample_fps(manifold, &sample, delta, single),
    };
    let mut net = Net { points, delta, covering_radius: 0.0, cell_radius: 0.0, weights: Vec::new() };
    let cells = assign_cells(manifold, &net.points, &sample);
    net.covering_radius = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    net.cell_radius = net.covering_radius;
    net.weights = voronoi_weights(manifold, &net, resolution);
    Ok(net)
}

fn circle_fps(len: f64, delta: f64, single: bool) -> Vec<Point> {
    let mut angles = vec![0.0];
    if single {
        return vec![Point::Coords(angles)];
    }
    // `sorted` holds the net angles in increasing order
    let mut sorted = vec![0.0];
    loop {
        let (mut best, mut gap) = (0, 0.0);
        for i in 0..sorted.len() {
            let next = if i + 1 < sorted.len() { sorted[i + 1] } else { sorted[0] + len };
            let g = next - sorted[i];
            if g > gap {
                best = i;
                gap = g;
            }
        }
        if gap / 2.0 < delta {
            break;
        }
        let a = sorted[best] + gap / 2.0;
        angles.push(a);
        sorted.insert(best + 1, a);
    }
    angles.into_iter().map(|a| Point::Coords(vec![a])).collect()
}

fn sample_fps(manifold: &Manifold, sample: &ManifoldSample, delta: f64, single: bool) -> Vec<Point> {
    let mut chosen = vec![0usize];
    if single {
        return vec![sample.points[0].clone()];
    }
    let mut mind = manifold.distances_from(&sample.points[0], &sample.points);
    loop {
        let far = argmax(&mind);
        if mind[far] < delta {
            break;
        }
        chosen.push(far);
        let d = manifold.distances_from(&sample.points[far], &sample.points);
        for (m, x) in mind.iter_mut().zip(d) {
            *m = m.min(x);
        }
    }
    chosen.into_iter().map(|i| sample.points[i].clone()).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Nearest net point (ties to the lowest index) and its distance, per sample point.
fn assign_cells(manifold: &Manifold, net: &[Point], sample: &ManifoldSample) -> Vec<(usize, f64)> {
    let fields = par_map(net.len(), |i| manifold.distances_from(&net[i], &sample.points));
    (0..sample.points.len())
        .map(|s| {
            let mut best = (0, fields[0][s]);
            for (i, f) in fields.iter().enumerate().skip(1) {
                if f[s] < best.1 {
                    best = (i, f[s]);
                }
            }
            best
        })
        .collect()
}

/// Cell measures `|A_i|`: sample weights summed over Voronoi cells (ties to the
/// lowest net index). On the circle the cells are exact arcs between midpoints.
pub fn voronoi_weights(manifold: &Manifold, net: &Net, resolution: usize) -> Vec<f64> {
    if let Some(len) = circle_length(manifold) {
        return circle_cells(len, &net.points);
    }
    let sample = manifold.sample(resolution);
    let mut w = vec![0.0; net.len()];
    for ((i, _), m) in assign_cells(manifold, &net.points, &sample).into_iter().zip(&sample.weights) {
        w[i] += m;
    }
    w
}

fn circle_cells(len: f64, net: &[Point]) -> Vec<f64> {
    let angle = |p: &Point| match p {
        Point::Coords(c) => c[0].rem_euclid(len),
        Point::Vertex(_) => panic!("vertex point on an analytic manifold"),
    };
    let mut order: Vec<usize> = (0..net.len()).collect();
    order.sort_by(|&a, &b| angle(&net[a]).total_cmp(&angle(&net[b])));
    let m = order.len();
    let mut w = vec![0.0; net.len()];
    if m == 1 {
        w[0] = len;
        return w;
    }
    for k in 0..m {
        let a = angle(&net[order[k]]);
        let prev = angle(&net[order[(k + m - 1) % m]]);
        let next = angle(&net[order[(k + 1) % m]]);
        let gp = (a - prev).rem_euclid(len);
        let gn = (next - a).rem_euclid(len);
        w[order[k]] = (gp + gn) / 2.0;
    }
    w
}

/// Largest distance from any sample point to its nearest net point.
pub fn covering_radius(manifold: &Manifold, net: &[Point], sample: &ManifoldSample) -> f64 {
    assign_cells(manifold, net, sample).iter().map(|c| c.1).fold(0.0, f64::max)
}

/// Net points repeated `N_i = ⌈|A_i|/λ⌉` times; each copy carries weight `λ`.
#[derive(Debug, Clone)]
pub struct ReplicatedNet {
    pub points: Vec<Point>,
    pub counts: Vec<usize>,
    pub lambda: f64,
}

impl ReplicatedNet {
    /// The replicated point list, `q_i` repeated `counts[i]` times in net order.
    pub fn expanded(&self) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.counts)
            .flat_map(|(p, &c)| std::iter::repeat(p.clone()).take(c))
            .collect()
    }
}

pub fn replicate_net(net: &Net, lambda: f64) -> Result<ReplicatedNet, EmbedError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(EmbedError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(ReplicatedNet { points: net.points.clone(), counts: replication_counts(&net.weights, lambda), lambda })
}

/// `⌈w/λ⌉`; quotients within `1e-12` relative of an integer count as that
/// integer, so round-off in `w` cannot add a copy.
pub fn replication_counts(weights: &[f64], lambda: f64) -> Vec<usize> {
    weights
        .iter()
        .map(|w| {
            let r = w / lambda;
            let k = r.round();
            if (r - k).abs() <= 1e-12 * r.max(1.0) {
                k as usize
            } else {
                r.ceil() as usize
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_analytic, make_sphere, AnalyticKind};
    use std::f64::consts::PI;

    fn circle() -> Manifold {
        make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap().into()
    }

    fn angle(p: &Point) -> f64 {
        match p {
            Point::Coords(c) => c[0],
            _ => unreachable!(),
        }
    }

    #[test]
    fn huge_delta_gives_single_point() {
        let net = build_net(&circle(), PI, 64).unwrap();
        assert_eq!(net.len(), 1);
        assert!((net.weights[0] - 2.0 * PI).abs() < 1e-12);
        let s: Manifold = make_sphere(1.0, 2).into();
        let net = build_net(&s, 4.0, 0).unwrap();
        assert_eq!(net.len(), 1);
        assert!((net.weights[0] - s.volume()).abs() < 1e-10 * s.volume());
    }

    #[test]
    fn circle_net_is_equispaced() {
        let net = build_net(&circle(), PI / 4.0, 64).unwrap();
        assert_eq!(net.len(), 8);
        let mut a: Vec<f64> = net.points.iter().map(angle).collect();
        a.sort_by(f64::total_cmp);
        for k in 0..8 {
            let next = if k + 1 < 8 { a[k + 1] } else { a[0] + 2.0 * PI };
            assert!((next - a[k] - 2.0 * PI / 8.0).abs() < 1e-9);
        }
        for w in &net.weights {
            assert!((w - 2.0 * PI / 8.0).abs() < 1e-12);
        }
        assert!(net.covering_radius < PI / 4.0);
    }

    #[test]
    fn icosphere_net_covers() {
        let m: Manifold = make_sphere(1.0, 4).into();
        let net = build_net(&m, 0.5, 0).unwrap();
        let sample = m.sample(0);
        assert_eq!(sample.points.len(), 2562);
        let r = covering_radius(&m, &net.points, &sample);
        assert!(r < 0.5, "{r}");
        let total: f64 = net.weights.iter().sum();
        assert!((total - m.volume()).abs() < 1e-10 * m.volume());
        assert!(net.weights.iter().all(|&w| w >= 0.0));
        assert!(net.cell_radius <= net.delta);
    }

    #[test]
    fn torus_net_weights_partition() {
        let m: Manifold = make_analytic(AnalyticKind::FlatTorus, &[2.0 * PI, PI]).unwrap().into();
        let net = build_net(&m, 0.7, 8).unwrap();
        let total: f64 = net.weights.iter().sum();
        assert!((total / m.volume() - 1.0).abs() < 1e-12);
        assert!(net.covering_radius < 0.7);
    }

    #[test]
    fn too_fine_is_rejected() {
        let m: Manifold = make_sphere(1.0, 2).into();
        assert!(matches!(build_net(&m, 0.01, 0), Err(EmbedError::NetTooFine { .. })));
        assert!(build_net(&circle(), 0.0, 16).is_err());
    }

    #[test]
    fn replication_counts_are_ceilings() {
        assert_eq!(replication_counts(&[2.5, 1.1], 1.0), vec![3, 2]);
        let net = build_net(&circle(), PI / 4.0, 64).unwrap();
        let r = replicate_net(&net, 10.0).unwrap();
        assert!(r.counts.iter().all(|&c| c == 1));
        let lambda = (2.0 * PI / 8.0) / 4.0;
        let r = replicate_net(&net, lambda).unwrap();
        assert!(r.counts.iter().all(|&c| c == 4));
        assert_eq!(r.expanded().len(), 32);
        for (w, c) in net.weights.iter().zip(&r.counts) {
            assert!((lambda * *c as f64 - w).abs() < lambda);
        }
    }
}
