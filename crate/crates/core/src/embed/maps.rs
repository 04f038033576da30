//! The heat-kernel maps G, H, the eigenmap F and the Kuratowski baseline.

use std::f64::consts::{E, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::heat::{kernel_from, HeatEvaluator};
use crate::manifold::{Manifold, Point};
use crate::parallel::par_map;

use super::{EmbedError, Net, ReplicatedNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    G,
    H,
    F,
    Kuratowski,
}

impl MapKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapKind::G => "G",
            MapKind::H => "H",
            MapKind::F => "F",
            MapKind::Kuratowski => "Kuratowski",
        }
    }
}

impl std::str::FromStr for MapKind {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "G" | "g" => Ok(MapKind::G),
            "H" | "h" => Ok(MapKind::H),
            "F" | "f" => Ok(MapKind::F),
            "K" | "kuratowski" | "Kuratowski" => Ok(MapKind::Kuratowski),
            _ => Err(EmbedError::InvalidParameter(format!("unknown map kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetNorm {
    Max,
    Euclidean,
}

impl TargetNorm {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            TargetNorm::Max => diffs.fold(0.0, f64::max),
            TargetNorm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }
}

/// Anything that sends manifold points into a normed space.
pub trait TargetMap: Sync {
    fn image(&self, p: &Point) -> Vec<f64>;
    fn norm(&self) -> TargetNorm;
}

/// `(2t)^{(n+1)/2}·(2π)^{n/2}·e^{1/2}`.
pub fn scale_g(n: usize, t: f64) -> f64 {
    let n = n as f64;
    (2.0 * t).powf((n + 1.0) / 2.0) * (2.0 * PI).powf(n / 2.0) * E.sqrt()
}

/// `(2t)^{(n+2)/4} / V_e` with `V_e = 1/(√2·(4π)^{n/4})`.
pub fn scale_h(n: usize, t: f64) -> f64 {
    let n = n as f64;
    let v_e = 1.0 / (2f64.sqrt() * (4.0 * PI).powf(n / 4.0));
    (2.0 * t).powf((n + 2.0) / 4.0) / v_e
}

/// `(2t)^{(n+2)/4}·√2·(4π)^{n/4}`.
pub fn scale_f(n: usize, t: f64) -> f64 {
    let n = n as f64;
    (2.0 * t).powf((n + 2.0) / 4.0) * 2f64.sqrt() * (4.0 * PI).powf(n / 4.0)
}

/// A scaled map into `(R^m, |·|_∞)` or `(R^m, |·|_2)`.
///
/// G: `scale·K_N(p,t;q_i)`; H: `scale·|A_i|^{1/2} K_N(p,t;q_i)`;
/// F: `scale·e^{-λ_k t} φ_k(p)` for `k = 1..=N`; Kuratowski: `d(p,q_i)`.
#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    kind: MapKind,
    norm: TargetNorm,
    t: f64,
    scale: f64,
    manifold: Arc<Manifold>,
    evaluator: Option<HeatEvaluator>,
    net: Vec<Point>,
    /// Per-component multipliers (`|A_i|^{1/2}` for H, 1 otherwise).
    multipliers: Vec<f64>,
    /// Modal values `φ_k(q_i)` at the net points.
    net_modal: Vec<Vec<f64>>,
    delta: Option<f64>,
}

fn check_t(t: f64) -> Result<(), EmbedError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(EmbedError::InvalidParameter(format!("t must be positive, got {t}")))
    }
}

impl EmbeddingMap {
    fn heat_map(kind: MapKind, ev: &HeatEvaluator, net: Vec<Point>, multipliers: Vec<f64>, t: f64, delta: Option<f64>) -> Result<Self, EmbedError> {
        check_t(t)?;
        let n = ev.dimension();
        let (norm, scale) = match kind {
            MapKind::G => (TargetNorm::Max, scale_g(n, t)),
            _ => (TargetNorm::Euclidean, scale_h(n, t)),
        };
        let net_modal = net.iter().map(|q| ev.modal_values(q)).collect();
        Ok(Self {
            kind,
            norm,
            t,
            scale,
            manifold: ev.spectrum().manifold().clone(),
            evaluator: Some(ev.clone()),
            net,
            multipliers,
            net_modal,
            delta,
        })
    }

    /// Max-norm map G over the net points.
    pub fn g(ev: &HeatEvaluator, net: &Net, t: f64) -> Result<Self, EmbedError> {
        Self::heat_map(MapKind::G, ev, net.points.clone(), vec![1.0; net.len()], t, Some(net.delta))
    }

    /// Weighted Euclidean map H with the net's cell weights.
    pub fn h(ev: &HeatEvaluator, net: &Net, t: f64) -> Result<Self, EmbedError> {
        let m = net.weights.iter().map(|w| w.sqrt()).collect();
        Self::heat_map(MapKind::H, ev, net.points.clone(), m, t, Some(net.delta))
    }

    /// H over a replicated net: every copy carries weight `λ`.
    pub fn h_replicated(ev: &HeatEvaluator, rep: &ReplicatedNet, t: f64) -> Result<Self, EmbedError> {
        let pts = rep.expanded();
        let m = vec![rep.lambda.sqrt(); pts.len()];
        Self::heat_map(MapKind::H, ev, pts, m, t, None)
    }

    /// Eigenmap over `φ_1 … φ_N` where `N = ev.truncation()`.
    pub fn f(ev: &HeatEvaluator, t: f64) -> Result<Self, EmbedError> {
        check_t(t)?;
        Ok(Self {
            kind: MapKind::F,
            norm: TargetNorm::Euclidean,
            t,
            scale: scale_f(ev.dimension(), t),
            manifold: ev.spectrum().manifold().clone(),
            evaluator: Some(ev.clone()),
            net: Vec::new(),
            multipliers: Vec::new(),
            net_modal: Vec::new(),
            delta: None,
        })
    }

    /// Unscaled distance functions to the net points, under the max norm.
    pub fn kuratowski(manifold: Arc<Manifold>, net: &Net) -> Self {
        Self {
            kind: MapKind::Kuratowski,
            norm: TargetNorm::Max,
            t: 0.0,
            scale: 1.0,
            manifold,
            evaluator: None,
            net: net.points.clone(),
            multipliers: vec![1.0; net.len()],
            net_modal: Vec::new(),
            delta: Some(net.delta),
        }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// Truncation index of the underlying kernel or eigenmap (0 for Kuratowski).
    pub fn truncation(&self) -> usize {
        self.evaluator.as_ref().map_or(0, |e| e.truncation())
    }

    /// Number of net points (0 for F).
    pub fn net_size(&self) -> usize {
        self.net.len()
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    /// Images of `points`, computed in parallel.
    pub fn images(&self, points: &[Point]) -> Vec<Vec<f64>> {
        match self.kind {
            MapKind::Kuratowski => {
                // one distance field per net point covers every target
                let cols = par_map(self.net.len(), |i| self.manifold.distances_from(&self.net[i], points));
                (0..points.len()).map(|j| cols.iter().map(|c| c[j]).collect()).collect()
            }
            _ => par_map(points.len(), |j| self.image(&points[j])),
        }
    }

    /// CSV `point,coord_1,...,coord_m`.
    pub fn csv(&self, points: &[Point]) -> String {
        let images = self.images(points);
        let m = images.first().map_or(0, |v| v.len());
        let mut s = String::from("point");
        for c in 1..=m {
            write!(s, ",coord_{c}").unwrap();
        }
        s.push('\n');
        for (i, v) in images.iter().enumerate() {
            write!(s, "{i}").unwrap();
            for x in v {
                write!(s, ",{x:?}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

impl TargetMap for EmbeddingMap {
    fn image(&self, p: &Point) -> Vec<f64> {
        match self.kind {
            MapKind::Kuratowski => self.manifold.distances_from(p, &self.net),
            MapKind::F => {
                let ev = self.evaluator.as_ref().unwrap();
                let w = ev.weights(self.t);
                let a = ev.modal_values(p);
                (1..w.len()).map(|k| self.scale * (w[k] * a[k])).collect()
            }
            MapKind::G | MapKind::H => {
                let ev = self.evaluator.as_ref().unwrap();
                let w = ev.weights(self.t);
                let a = ev.modal_values(p);
                self.net_modal
                    .iter()
                    .zip(&self.multipliers)
                    .map(|(b, m)| self.scale * m * kernel_from(&w, &a, b))
                    .collect()
            }
        }
    }

    fn norm(&self) -> TargetNorm {
        self.norm
    }
}

/// Evaluates `map` at `p`.
pub fn evaluate_map(map: &EmbeddingMap, p: &Point) -> Vec<f64> {
    map.image(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{build_net, replicate_net};
    use crate::manifold::{make_analytic, AnalyticKind};
    use crate::spectrum::{compute_spectrum, SolverOptions};

    fn circle_ev(count: usize) -> HeatEvaluator {
        let m: Manifold = make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap().into();
        HeatEvaluator::full(Arc::new(compute_spectrum(Arc::new(m), count, &SolverOptions::default()).unwrap()))
    }

    #[test]
    fn scale_factors() {
        let t: f64 = 0.3;
        assert!((scale_g(1, t) - 2.0 * t * (2.0 * PI).sqrt() * E.sqrt()).abs() < 1e-14);
        assert!((scale_h(2, t) - 2.0 * t * 2f64.sqrt() * (4.0 * PI).sqrt()).abs() < 1e-13);
        assert!((scale_f(2, t) - scale_h(2, t)).abs() < 1e-13);
    }

    #[test]
    fn sphere_eigenmap_is_round() {
        let m: Manifold = make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap().into();
        let s = Arc::new(compute_spectrum(Arc::new(m), 4, &SolverOptions::default()).unwrap());
        let ev = HeatEvaluator::new(s, 3);
        let t = 0.2;
        let f = EmbeddingMap::f(&ev, t).unwrap();
        let radius = scale_f(2, t) * (-2.0 * t).exp() * (3.0 / (4.0 * PI)).sqrt();
        for p in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.48, 0.6, 0.64]] {
            let y = f.image(&Point::Coords(p.to_vec()));
            assert_eq!(y.len(), 3);
            let r = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((r / radius - 1.0).abs() < 1e-12);
            // proportional to the Cartesian coordinates (in the y, z, x order of the first band)
            let c = [p[1], p[2], p[0]];
            for k in 0..3 {
                assert!((y[k] - radius * c[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_g_is_positive_diagonal() {
        let ev = circle_ev(41);
        let m = ev.spectrum().manifold().clone();
        let net = build_net(&m, PI, 64).unwrap();
        let t = 0.1;
        let g = EmbeddingMap::g(&ev, &net, t).unwrap();
        let p = net.points[0].clone();
        let y = evaluate_map(&g, &p);
        assert_eq!(y.len(), 1);
        assert!(y[0] > 0.0);
        assert!((y[0] - scale_g(1, t) * ev.kernel(&p, t, &p)).abs() < 1e-14);
    }

    #[test]
    fn kuratowski_antipodal_net() {
        let m: Arc<Manifold> = Arc::new(make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap().into());
        let net = build_net(&m, PI / 2.0 + 1e-9, 64).unwrap();
        assert_eq!(net.len(), 2);
        let k = EmbeddingMap::kuratowski(m, &net);
        assert_eq!(evaluate_map(&k, &net.points[0]), vec![0.0, PI]);
        assert_eq!(k.images(&[net.points[0].clone()]), vec![vec![0.0, PI]]);
    }

    #[test]
    fn uniform_replication_matches_scaled_g() {
        let ev = circle_ev(61);
        let m = ev.spectrum().manifold().clone();
        let net = build_net(&m, PI / 4.0, 64).unwrap();
        let lambda = (2.0 * PI / 8.0) / 4.0;
        let rep = replicate_net(&net, lambda).unwrap();
        assert!(rep.counts.iter().all(|&c| c == 4));
        let t = 0.2;
        let h = EmbeddingMap::h_replicated(&ev, &rep, t).unwrap();
        let g = EmbeddingMap::g(&ev, &net, t).unwrap();
        let p = Point::Coords(vec![0.37]);
        let yh = h.image(&p);
        let yg = g.image(&p);
        let factor = scale_h(1, t) * lambda.sqrt() / scale_g(1, t);
        for (i, v) in yg.iter().enumerate() {
            for c in 0..4 {
                assert!((yh[4 * i + c] - factor * v).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let ev = circle_ev(9);
        let f = EmbeddingMap::f(&ev, 0.5).unwrap();
        let csv = f.csv(&[Point::Coords(vec![0.0]), Point::Coords(vec![1.0])]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("point,coord_1,coord_2,"));
        assert_eq!(lines[0].split(',').count(), 9);
    }
}
