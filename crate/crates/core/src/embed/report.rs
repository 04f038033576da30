//! Difference-quotient dilatation, injectivity margins and t-scans.

use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::heat::HeatEvaluator;
use crate::manifold::{fast_marching, graph_distances, GeodesicMethod, Manifold, Point};
use crate::parallel::par_map;

use super::{EmbedError, EmbeddingMap, TargetMap, TargetNorm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub d: f64,
}

/// Index pairs into a point list with their geodesic distances.
#[derive(Debug, Clone)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
    /// `h_near` for near sets, `h_far` for far sets, 0 for explicit lists.
    pub threshold: f64,
}

/// Distances from `points[i]` to every point (mesh fields may stop at `cutoff`).
fn distance_row(manifold: &Manifold, points: &[Point], i: usize, method: GeodesicMethod, cutoff: Option<f64>) -> Vec<f64> {
    match (manifold, &points[i]) {
        (Manifold::Mesh(m), Point::Vertex(s)) => {
            let field = match method {
                GeodesicMethod::Graph => graph_distances(m, *s),
                GeodesicMethod::FastMarching => fast_marching(m, *s, cutoff),
            };
            points
                .iter()
                .map(|p| match p {
                    Point::Vertex(v) => field[*v],
                    _ => panic!("coordinate point on a mesh"),
                })
                .collect()
        }
        _ => manifold.distances_from(&points[i], points),
    }
}

impl PairSet {
    /// All pairs `i < j` with `0 < d ≤ h_near`.
    pub fn near(manifold: &Manifold, points: &[Point], h_near: f64, method: GeodesicMethod) -> Self {
        let cutoff = Some(h_near * 1.5);
        let rows = par_map(points.len(), |i| {
            let d = distance_row(manifold, points, i, method, cutoff);
            ((i + 1)..points.len()).filter(|&j| d[j] > 0.0 && d[j] <= h_near).map(|j| Pair { i, j, d: d[j] }).collect::<Vec<_>>()
        });
        Self { pairs: rows.into_iter().flatten().collect(), threshold: h_near }
    }

    /// Pairs with `d ≥ h_far`. With `max_sources` below the point count only a
    /// seeded random subset of sources is used, paired with every target.
    pub fn far(manifold: &Manifold, points: &[Point], h_far: f64, method: GeodesicMethod, max_sources: usize, seed: u64) -> Self {
        let sources: Vec<usize> = if max_sources >= points.len() {
            (0..points.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = sample_indices(&mut rng, points.len(), max_sources).into_vec();
            s.sort_unstable();
            s
        };
        let all = sources.len() == points.len();
        let rows = par_map(sources.len(), |k| {
            let i = sources[k];
            let d = distance_row(manifold, points, i, method, None);
            let start = if all { i + 1 } else { 0 };
            (start..points.len()).filter(|&j| j != i && d[j] >= h_far).map(|j| Pair { i, j, d: d[j] }).collect::<Vec<_>>()
        });
        Self { pairs: rows.into_iter().flatten().collect(), threshold: h_far }
    }

    /// Explicit index pairs.
    pub fn from_pairs(manifold: &Manifold, points: &[Point], pairs: &[(usize, usize)]) -> Self {
        let pairs = pairs.iter().map(|&(i, j)| Pair { i, j, d: manifold.distance(&points[i], &points[j]) }).collect();
        Self { pairs, threshold: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRatio {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub ratio: f64,
}

/// Ratios `‖f(x) − f(y)‖ / d(x,y)` over near pairs.
#[derive(Debug, Clone)]
pub struct DilatationReport {
    pub ratios: Vec<PairRatio>,
    pub h_near: f64,
    pub min: f64,
    pub max: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl DilatationReport {
    /// Fraction of ratios in `[lo, hi]`.
    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        self.ratios.iter().filter(|r| r.ratio >= lo && r.ratio <= hi).count() as f64 / self.ratios.len() as f64
    }

    /// `max(|min − 1|, |max − 1|)`.
    pub fn deviation(&self) -> f64 {
        (self.min - 1.0).abs().max((self.max - 1.0).abs())
    }

    /// CSV `i,j,d,ratio`.
    pub fn csv(&self) -> String {
        let mut s = String::from("i,j,d,ratio\n");
        for r in &self.ratios {
            writeln!(s, "{},{},{:?},{:?}", r.i, r.j, r.d, r.ratio).unwrap();
        }
        s
    }
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

/// Dilatation statistics from precomputed images.
pub fn dilatation_of(images: &[Vec<f64>], norm: TargetNorm, near: &PairSet) -> Result<DilatationReport, EmbedError> {
    if near.is_empty() {
        return Err(EmbedError::NoPairs { threshold: near.threshold });
    }
    let ratios: Vec<PairRatio> = near
        .pairs
        .iter()
        .map(|p| PairRatio { i: p.i, j: p.j, d: p.d, ratio: norm.distance(&images[p.i], &images[p.j]) / p.d })
        .collect();
    let mut sorted: Vec<f64> = ratios.iter().map(|r| r.ratio).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(DilatationReport {
        h_near: near.threshold,
        min: sorted[0],
        max: *sorted.last().unwrap(),
        q05: quantile(&sorted, 0.05),
        median: quantile(&sorted, 0.5),
        q95: quantile(&sorted, 0.95),
        ratios,
    })
}

pub fn dilatation_report(map: &dyn TargetMap, points: &[Point], near: &PairSet) -> Result<DilatationReport, EmbedError> {
    let images = par_map(points.len(), |i| map.image(&points[i]));
    dilatation_of(&images, map.norm(), near)
}

/// `min ‖f(x) − f(y)‖` over far pairs; positive certifies injectivity at sample resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectivityReport {
    pub margin: f64,
    /// The minimizing pair.
    pub pair: (usize, usize),
    pub h_far: f64,
    pub pairs: usize,
}

pub fn injectivity_of(images: &[Vec<f64>], norm: TargetNorm, far: &PairSet) -> Result<InjectivityReport, EmbedError> {
    let mut best: Option<(f64, (usize, usize))> = None;
    for p in &far.pairs {
        let m = norm.distance(&images[p.i], &images[p.j]);
        if best.is_none_or(|(b, _)| m < b) {
            best = Some((m, (p.i, p.j)));
        }
    }
    let (margin, pair) = best.ok_or(EmbedError::NoPairs { threshold: far.threshold })?;
    Ok(InjectivityReport { margin, pair, h_far: far.threshold, pairs: far.len() })
}

pub fn injectivity_report(map: &dyn TargetMap, points: &[Point], far: &PairSet) -> Result<InjectivityReport, EmbedError> {
    let images = par_map(points.len(), |i| map.image(&points[i]));
    injectivity_of(&images, map.norm(), far)
}

/// Dilatation and injectivity of one map with its parameters.
#[derive(Debug, Clone)]
pub struct EmbeddingReport {
    pub map: &'static str,
    pub t: f64,
    pub delta: Option<f64>,
    pub n: usize,
    pub n0: usize,
    pub dilatation: DilatationReport,
    pub injectivity: Option<InjectivityReport>,
}

impl EmbeddingReport {
    pub fn build(map: &EmbeddingMap, points: &[Point], near: &PairSet, far: Option<&PairSet>) -> Result<Self, EmbedError> {
        let images = map.images(points);
        let dilatation = dilatation_of(&images, map.norm(), near)?;
        let injectivity = far.map(|f| injectivity_of(&images, map.norm(), f)).transpose()?;
        Ok(Self {
            map: map.kind().as_str(),
            t: map.t(),
            delta: map.delta(),
            n: map.truncation(),
            n0: map.net_size(),
            dilatation,
            injectivity,
        })
    }

    /// `key=value` lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "map={}", self.map).unwrap();
        writeln!(s, "t={:?}", self.t).unwrap();
        if let Some(d) = self.delta {
            writeln!(s, "delta={d:?}").unwrap();
        }
        writeln!(s, "n={}", self.n).unwrap();
        writeln!(s, "n_0={}", self.n0).unwrap();
        let d = &self.dilatation;
        writeln!(s, "h_near={:?}", d.h_near).unwrap();
        writeln!(s, "near_pairs={}", d.ratios.len()).unwrap();
        writeln!(s, "dil_min={:?}", d.min).unwrap();
        writeln!(s, "dil_max={:?}", d.max).unwrap();
        writeln!(s, "dil_q05={:?}", d.q05).unwrap();
        writeln!(s, "dil_median={:?}", d.median).unwrap();
        writeln!(s, "dil_q95={:?}", d.q95).unwrap();
        if let Some(inj) = &self.injectivity {
            writeln!(s, "h_far={:?}", inj.h_far).unwrap();
            writeln!(s, "far_pairs={}", inj.pairs).unwrap();
            writeln!(s, "inj_margin={:?}", inj.margin).unwrap();
        }
        s
    }
}

/// `t_max·2^{-j}` for `j = 0..count`.
pub fn t_grid(t_max: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| t_max * 0.5f64.powi(j as i32)).collect()
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub rows: Vec<EmbeddingReport>,
    /// Row with the smallest dilatation deviation from 1.
    pub best: usize,
    /// True when the deviation has an interior minimum along the grid, i.e.
    /// it degrades again on both sides of the best t.
    pub non_monotone: bool,
}

impl ScanReport {
    pub fn best(&self) -> &EmbeddingReport {
        &self.rows[self.best]
    }

    /// CSV `t,dil_min,dil_max,deviation,inj_margin`.
    pub fn csv(&self) -> String {
        let mut s = String::from("t,dil_min,dil_max,deviation,inj_margin\n");
        for r in &self.rows {
            let inj = r.injectivity.map_or(String::from("nan"), |i| format!("{:?}", i.margin));
            writeln!(s, "{:?},{:?},{:?},{:?},{inj}", r.t, r.dilatation.min, r.dilatation.max, r.dilatation.deviation()).unwrap();
        }
        s
    }
}

/// Builds one map per `t` and reports each; the best row minimizes the deviation.
pub fn scan_t<F>(ts: &[f64], build: F, points: &[Point], near: &PairSet, far: Option<&PairSet>) -> Result<ScanReport, EmbedError>
where
    F: Fn(f64) -> Result<EmbeddingMap, EmbedError>,
{
    if ts.is_empty() {
        return Err(EmbedError::InvalidParameter("empty t grid".into()));
    }
    let rows = ts.iter().map(|&t| EmbeddingReport::build(&build(t)?, points, near, far)).collect::<Result<Vec<_>, _>>()?;
    let dev: Vec<f64> = rows.iter().map(|r| r.dilatation.deviation()).collect();
    let mut best = 0;
    for (i, &d) in dev.iter().enumerate() {
        if d < dev[best] {
            best = i;
        }
    }
    let non_monotone = best > 0 && best + 1 < dev.len();
    Ok(ScanReport { rows, best, non_monotone })
}

/// `|d𝓗_p(v)|` for the map `p ↦ K(p,t;·)` into `L²`, maximized over the tangent frame.
#[derive(Debug, Clone)]
pub struct ContinuousDilatation {
    pub value: f64,
    pub per_direction: Vec<f64>,
}

/// `sqrt((2t)^{(n+2)/2}·2(4π)^{n/2}·∫(v·∇_p K(p,t;x))² dx)` by quadrature over
/// `manifold.sample(resolution)` (lumped vertex masses on meshes).
pub fn continuous_dilatation(ev: &HeatEvaluator, p: &Point, t: f64, resolution: usize) -> Result<ContinuousDilatation, EmbedError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(EmbedError::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let n = ev.dimension() as f64;
    let manifold = ev.spectrum().manifold();
    let sample = manifold.sample(resolution);
    let w = ev.weights(t);
    let at_p = ev.modal(p);
    let dirs = at_p.gradients.first().map_or(0, |g| g.len());
    // coefficients c_a[k] = w_k ∂_a φ_k(p)
    let coeffs: Vec<Vec<f64>> = (0..dirs).map(|a| (0..w.len()).map(|k| w[k] * at_p.gradients[k][a]).collect()).collect();
    let partial = par_map(sample.points.len(), |s| {
        let phi = ev.modal_values(&sample.points[s]);
        coeffs.iter().map(|c| c.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>().powi(2) * sample.weights[s]).collect::<Vec<f64>>()
    });
    let c2 = (2.0 * t).powf((n + 2.0) / 2.0) * 2.0 * (4.0 * std::f64::consts::PI).powf(n / 2.0);
    let per_direction: Vec<f64> = (0..dirs).map(|a| (c2 * partial.iter().map(|v| v[a]).sum::<f64>()).sqrt()).collect();
    let value = per_direction.iter().cloned().fold(0.0, f64::max);
    Ok(ContinuousDilatation { value, per_direction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{build_net, replicate_net, scale_h};
    use crate::manifold::{grid_sample, make_analytic, make_flat_torus, make_sphere, AnalyticKind};
    use crate::spectrum::{compute_spectrum, SolverOptions};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn circle() -> Arc<Manifold> {
        Arc::new(make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap().into())
    }

    fn circle_points(m: usize) -> Vec<Point> {
        grid_sample(&[2.0 * PI], &[m]).0.into_iter().map(Point::Coords).collect()
    }

    fn circle_ev(count: usize) -> HeatEvaluator {
        HeatEvaluator::full(Arc::new(compute_spectrum(circle(), count, &SolverOptions::default()).unwrap()))
    }

    /// Arc-length coordinate under the max norm: an isometry on short arcs.
    struct ArcLength;

    impl TargetMap for ArcLength {
        fn image(&self, p: &Point) -> Vec<f64> {
            match p {
                Point::Coords(c) => vec![c[0]],
                _ => unreachable!(),
            }
        }
        fn norm(&self) -> TargetNorm {
            TargetNorm::Max
        }
    }

    #[test]
    fn identity_stub_has_unit_ratios() {
        let m = circle();
        let pts = circle_points(256);
        let near = PairSet::near(&m, &pts, 0.1, GeodesicMethod::Graph);
        // drop the pairs straddling the seam, where arc length jumps by 2π
        let inner = PairSet { pairs: near.pairs.iter().filter(|p| p.j - p.i < 128).copied().collect(), threshold: near.threshold };
        let r = dilatation_report(&ArcLength, &pts, &inner).unwrap();
        assert!((r.min - 1.0).abs() < 1e-12 && (r.max - 1.0).abs() < 1e-12);
        assert!(r.deviation() < 1e-12);
    }

    #[test]
    fn kuratowski_bounds() {
        let m = circle();
        let delta = 0.05;
        let net = build_net(&m, delta, 64).unwrap();
        let k = EmbeddingMap::kuratowski(m.clone(), &net);
        let pts = circle_points(512);
        let h_near = 0.3;
        let near = PairSet::near(&m, &pts, h_near, GeodesicMethod::Graph);
        let far = PairSet::far(&m, &pts, 0.5, GeodesicMethod::Graph, 64, 7);
        let rep = EmbeddingReport::build(&k, &pts, &near, Some(&far)).unwrap();
        assert!(rep.dilatation.max <= 1.0 + 1e-12);
        assert!(rep.dilatation.max >= 1.0 - 2.0 * delta / h_near);
        assert!(rep.injectivity.unwrap().margin >= 0.5 - 2.0 * delta);
        for line in rep.summary().lines() {
            let (k, v) = line.split_once('=').unwrap();
            assert!(!k.is_empty() && !v.contains('='));
        }
    }

    #[test]
    fn kuratowski_on_mesh_obeys_triangle_inequality() {
        let m: Arc<Manifold> = Arc::new(make_sphere(1.0, 3).into());
        let net = build_net(&m, 0.3, 0).unwrap();
        let k = EmbeddingMap::kuratowski(m.clone(), &net);
        let pts: Vec<Point> = (0..642).map(Point::Vertex).collect();
        let near = PairSet::near(&m, &pts, 0.4, GeodesicMethod::Graph);
        let r = dilatation_report(&k, &pts, &near).unwrap();
        assert!(r.max <= 1.0 + 1e-12, "{}", r.max);
    }

    #[test]
    fn no_near_pairs_is_an_error() {
        let m = circle();
        let pts = circle_points(8);
        let near = PairSet::near(&m, &pts, 0.1, GeodesicMethod::Graph);
        assert!(matches!(dilatation_report(&ArcLength, &pts, &near), Err(EmbedError::NoPairs { .. })));
    }

    #[test]
    fn permuting_the_net_changes_nothing() {
        let ev = circle_ev(81);
        let m = ev.spectrum().manifold().clone();
        let mut net = build_net(&m, 0.2, 64).unwrap();
        let pts = circle_points(400);
        let near = PairSet::near(&m, &pts, 0.05, GeodesicMethod::Graph);
        let a = dilatation_report(&EmbeddingMap::g(&ev, &net, 0.1).unwrap(), &pts, &near).unwrap();
        net.points.reverse();
        net.weights.reverse();
        let b = dilatation_report(&EmbeddingMap::g(&ev, &net, 0.1).unwrap(), &pts, &near).unwrap();
        let c = dilatation_report(&EmbeddingMap::h(&ev, &net, 0.1).unwrap(), &pts, &near).unwrap();
        net.points.reverse();
        net.weights.reverse();
        let d = dilatation_report(&EmbeddingMap::h(&ev, &net, 0.1).unwrap(), &pts, &near).unwrap();
        assert_eq!(a.ratios, b.ratios);
        for (x, y) in c.ratios.iter().zip(&d.ratios) {
            assert!((x.ratio - y.ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_dilatation_on_circle() {
        let ev = circle_ev(401);
        let t = 0.01;
        for x in [0.0, 1.3, 4.0] {
            let c = continuous_dilatation(&ev, &Point::Coords(vec![x]), t, 64).unwrap();
            assert!((0.95..=1.05).contains(&c.value), "{}", c.value);
            // in coefficient space the integral is Σ_k w_k² |∇φ_k(p)|²
            let w = ev.weights(t);
            let mv = ev.modal(&Point::Coords(vec![x]));
            let exact: f64 = (0..w.len()).map(|k| (w[k] * mv.gradients[k][0]).powi(2)).sum();
            let c2 = (2.0 * t).powf(1.5) * 2.0 * (4.0 * PI).sqrt();
            assert!(((c2 * exact).sqrt() - c.value).abs() < 1e-10);
        }
        let far = continuous_dilatation(&ev, &Point::Coords(vec![0.5]), 50.0, 16).unwrap();
        assert!(far.value < 1e-6);
    }

    #[test]
    fn fine_h_net_matches_continuous_dilatation() {
        let ev = circle_ev(201);
        let m = ev.spectrum().manifold().clone();
        let t = 0.05;
        let p = 1.0;
        let cont = continuous_dilatation(&ev, &Point::Coords(vec![p]), t, 64).unwrap().value;
        let mut prev = f64::INFINITY;
        for delta in [0.2, 0.1, 0.05] {
            let net = build_net(&m, delta, 256).unwrap();
            let h = EmbeddingMap::h(&ev, &net, t).unwrap();
            let step = 1e-5;
            let a = h.image(&Point::Coords(vec![p - step]));
            let b = h.image(&Point::Coords(vec![p + step]));
            let quotient = TargetNorm::Euclidean.distance(&a, &b) / (2.0 * step);
            let err = (quotient - cont).abs();
            assert!(err < 3.0 * delta, "delta {delta}: {quotient} vs {cont}");
            assert!(err <= prev * 1.01 + 1e-9);
            prev = err;
        }
    }

    #[test]
    fn replication_converges_as_lambda_halves() {
        let ev = circle_ev(121);
        let m = ev.spectrum().manifold().clone();
        let net = build_net(&m, 0.3, 64).unwrap();
        let t = 0.1;
        let h = EmbeddingMap::h(&ev, &net, t).unwrap();
        let x = Point::Coords(vec![0.3]);
        let y = Point::Coords(vec![2.1]);
        let target = TargetNorm::Euclidean.distance(&h.image(&x), &h.image(&y));
        let sup = h.image(&x).iter().chain(&h.image(&y)).map(|v| v.abs()).fold(0.0, f64::max) / net.weights.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
        let mut lambda = 0.05;
        let mut prev = f64::INFINITY;
        for _ in 0..5 {
            let rep = replicate_net(&net, lambda).unwrap();
            let hr = EmbeddingMap::h_replicated(&ev, &rep, t).unwrap();
            let d = TargetNorm::Euclidean.distance(&hr.image(&x), &hr.image(&y));
            let err = (d * d - target * target).abs();
            assert!(err <= lambda * net.len() as f64 * 4.0 * sup * sup + 1e-14, "{err}");
            assert!(err <= prev + 1e-14);
            prev = err;
            lambda /= 2.0;
        }
        let _ = scale_h(1, t);
    }

    #[test]
    fn scan_reports_every_t() {
        let ev = circle_ev(201);
        let m = ev.spectrum().manifold().clone();
        let net = build_net(&m, 0.05, 64).unwrap();
        let pts = circle_points(1024);
        let near = PairSet::near(&m, &pts, 0.02, GeodesicMethod::Graph);
        let ts = t_grid(0.8, 6);
        assert_eq!(ts, vec![0.8, 0.4, 0.2, 0.1, 0.05, 0.025]);
        let scan = scan_t(&ts, |t| EmbeddingMap::g(&ev, &net, t), &pts, &near, None).unwrap();
        assert_eq!(scan.rows.len(), 6);
        let best = scan.best().dilatation.deviation();
        assert!(scan.rows.iter().all(|r| r.dilatation.deviation() >= best));
        assert!(scan.csv().starts_with("t,dil_min,dil_max,deviation,inj_margin\n"));
    }

    #[test]
    fn torus_mesh_near_pairs_use_fast_marching() {
        let m: Manifold = make_flat_torus([1.0, 1.0], 20, 20).unwrap().into();
        let pts: Vec<Point> = (0..400).map(Point::Vertex).collect();
        let near = PairSet::near(&m, &pts, 0.12, GeodesicMethod::FastMarching);
        assert!(!near.is_empty());
        assert!(near.pairs.iter().all(|p| p.d <= 0.12 && p.i < p.j));
    }
}
