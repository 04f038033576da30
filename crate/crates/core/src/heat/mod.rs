//! Truncated heat kernels, their gradients, decay bounds and Varadhan's limit.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::manifold::{ModeValues, Point};
use crate::spectrum::{eigenfunction_sup_bounds, truncation_index, GeometryBounds, Spectrum, SpectrumError, SupBounds};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatError {
    #[error("truncation N = {have} is below the {needed} terms needed for tail {eps:e} at t = {t}")]
    InsufficientTruncation { needed: usize, have: usize, eps: f64, t: f64 },
    #[error("pair ({0}, {1}) has zero distance")]
    ZeroDistance(usize, usize),
    #[error("fewer than two usable times for pair ({0}, {1})")]
    TooFewTimes(usize, usize),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// `K_N(p,t;q) = Σ_{k ≤ N} e^{-λ_k t} φ_k(p) φ_k(q)`.
#[derive(Debug, Clone)]
pub struct HeatEvaluator {
    spectrum: Arc<Spectrum>,
    n: usize,
}

impl HeatEvaluator {
    /// Panics unless `n < spectrum.len()`.
    pub fn new(spectrum: Arc<Spectrum>, n: usize) -> Self {
        assert!(n < spectrum.len(), "truncation index {n} needs {} eigenpairs, have {}", n + 1, spectrum.len());
        Self { spectrum, n }
    }

    /// Uses every computed eigenpair.
    pub fn full(spectrum: Arc<Spectrum>) -> Self {
        let n = spectrum.len() - 1;
        Self { spectrum, n }
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn dimension(&self) -> usize {
        self.spectrum.dimension()
    }

    /// `e^{-λ_k t}` for `k ≤ N`.
    pub fn weights(&self, t: f64) -> Vec<f64> {
        self.spectrum.eigenvalues()[..=self.n].iter().map(|l| (-l * t).exp()).collect()
    }

    /// Eigenfunction values and gradients at `p` for `k ≤ N`.
    pub fn modal(&self, p: &Point) -> ModeValues {
        self.spectrum.evaluate(p, self.n + 1)
    }

    pub fn modal_values(&self, p: &Point) -> Vec<f64> {
        self.spectrum.values(p, self.n + 1)
    }

    pub fn kernel(&self, p: &Point, t: f64, q: &Point) -> f64 {
        kernel_from(&self.weights(t), &self.modal_values(p), &self.modal_values(q))
    }

    /// Kernel value and `Σ_k |e^{-λ_k t} φ_k(p) φ_k(q)|` (cancellation scale).
    pub fn kernel_with_scale(&self, p: &Point, t: f64, q: &Point) -> (f64, f64) {
        let w = self.weights(t);
        let a = self.modal_values(p);
        let b = self.modal_values(q);
        let mut s = 0.0;
        let mut abs = 0.0;
        for k in 0..w.len() {
            let term = w[k] * (a[k] * b[k]);
            s += term;
            abs += term.abs();
        }
        (s, abs)
    }

    /// Gradient in `p` (tangent-frame components at `p`).
    pub fn gradient(&self, p: &Point, t: f64, q: &Point) -> Vec<f64> {
        gradient_from(&self.weights(t), &self.modal(p), &self.modal_values(q))
    }
}

/// `Σ_k w_k a_k b_k`, summed in index order.
pub fn kernel_from(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..weights.len() {
        s += weights[k] * (a[k] * b[k]);
    }
    s
}

pub fn gradient_from(weights: &[f64], at_p: &ModeValues, at_q: &[f64]) -> Vec<f64> {
    let dim = at_p.gradients.first().map_or(0, |g| g.len());
    let mut g = vec![0.0; dim];
    for k in 0..weights.len() {
        let c = weights[k] * at_q[k];
        for (gi, dk) in g.iter_mut().zip(&at_p.gradients[k]) {
            *gi += c * dk;
        }
    }
    g
}

pub fn heat_kernel(ev: &HeatEvaluator, p: &Point, t: f64, q: &Point) -> f64 {
    assert!(t > 0.0, "t must be positive");
    ev.kernel(p, t, q)
}

pub fn heat_gradient(ev: &HeatEvaluator, p: &Point, t: f64, q: &Point) -> Vec<f64> {
    assert!(t > 0.0, "t must be positive");
    ev.gradient(p, t, q)
}

/// `C(n)(1 + d²/t)^{n/2} / (a(n)·min(t, r_h²))^{n/2} · e^{-d²/4t}`.
pub fn value_bound(bounds: &GeometryBounds, r_h: f64, d: f64, t: f64) -> f64 {
    let n = bounds.n as f64;
    bounds.c_n * (1.0 + d * d / t).powf(n / 2.0) / (bounds.a_n * t.min(r_h * r_h)).powf(n / 2.0) * (-d * d / (4.0 * t)).exp()
}

/// `D(n) / t^{(n+1)/2} · e^{-d²/8t}`.
pub fn gradient_bound(bounds: &GeometryBounds, d: f64, t: f64) -> f64 {
    let n = bounds.n as f64;
    bounds.d_n / t.powf((n + 1.0) / 2.0) * (-d * d / (8.0 * t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Pass,
    Fail,
    /// The bound's hypothesis (here `t ≤ 2 r_h²`) does not hold.
    OutsideRange,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Pass => "pass",
            Flag::Fail => "fail",
            Flag::OutsideRange => "outside theorem range",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub p: usize,
    pub q: usize,
    pub d: f64,
    pub t: f64,
    pub value: f64,
    /// Truncation tail plus summation round-off attached to `value`.
    pub error: f64,
    pub bound: f64,
    pub flag: Flag,
    pub grad: f64,
    pub grad_error: f64,
    pub grad_bound: f64,
    pub grad_flag: Flag,
}

/// Flags one `(d, t)` sample. A value passes when it is within its error bar of the bound.
#[allow(clippy::too_many_arguments)]
pub fn decay_row(
    bounds: &GeometryBounds,
    r_h: f64,
    (p, q): (usize, usize),
    d: f64,
    t: f64,
    (value, error): (f64, f64),
    (grad, grad_error): (f64, f64),
) -> DecayRow {
    let bound = value_bound(bounds, r_h, d, t);
    let grad_bound = gradient_bound(bounds, d, t);
    let flag = if value.abs() - error <= bound { Flag::Pass } else { Flag::Fail };
    let grad_flag = if t > 2.0 * r_h * r_h {
        Flag::OutsideRange
    } else if grad - grad_error <= grad_bound {
        Flag::Pass
    } else {
        Flag::Fail
    };
    DecayRow { p, q, d, t, value, error, bound, flag, grad, grad_error, grad_bound, grad_flag }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.flag != Flag::Fail && r.grad_flag != Flag::Fail)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("p,q,t,value,bound,flag,error,grad,grad_error,grad_bound,grad_flag\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{:?},{:e},{:e},{},{:e},{:e},{:e},{:e},{}",
                r.p,
                r.q,
                r.t,
                r.value,
                r.bound,
                r.flag.as_str(),
                r.error,
                r.grad,
                r.grad_error,
                r.grad_bound,
                r.grad_flag.as_str()
            )
            .unwrap();
        }
        s
    }
}

/// Tail bound of the omitted modes at time `t`, or the full tail when the
/// truncation is already at its maximum.
fn tail_error(ev: &HeatEvaluator, t: f64, bounds: &GeometryBounds, sup: &SupBounds) -> f64 {
    let s = ev.spectrum();
    let c2 = sup.constant().powi(2);
    let n = bounds.n as f64;
    let ev_lambdas = s.eigenvalues();
    let mut tail: f64 = ev_lambdas[ev.truncation() + 1..]
        .iter()
        .map(|&l| (-l * t).exp() * l.powf(n / 2.0).max(l.powf((n + 1.0) / 2.0)))
        .sum::<f64>()
        * c2;
    // modes beyond the computed spectrum
    if let Ok(tr) = truncation_index(s, t, f64::MAX, bounds, sup) {
        tail += tr.unresolved_tail;
    }
    tail
}

/// Evaluates the value and gradient bounds on every `(pair, t)`.
pub fn decay_check(
    ev: &HeatEvaluator,
    bounds: &GeometryBounds,
    points: &[Point],
    pairs: &[(usize, usize)],
    ts: &[f64],
) -> Result<DecayReport, HeatError> {
    let r_h = bounds.require_r_h()?;
    let manifold = ev.spectrum().manifold().clone();
    let modal: Vec<ModeValues> = points.iter().map(|p| ev.modal(p)).collect();
    let sup = eigenfunction_sup_bounds(ev.spectrum());
    // per-mode amplitudes for the round-off scale; the constant mode is exact
    let mut amp = vec![(1.0 / ev.spectrum().volume().sqrt(), 0.0)];
    amp.extend(sup.rows.iter().map(|r| (r.sup, r.grad_sup)));
    amp.resize(ev.truncation() + 1, *amp.last().unwrap());
    let mut rows = Vec::new();
    for &t in ts {
        let w = ev.weights(t);
        let tail = tail_error(ev, t, bounds, &sup);
        let roundoff = 4.0 * f64::EPSILON * w.len() as f64;
        let scale: f64 = w.iter().zip(&amp).map(|(wk, (s, _))| wk * s * s).sum();
        let gscale: f64 = w.iter().zip(&amp).map(|(wk, (s, g))| wk * s * g).sum();
        for &(i, j) in pairs {
            let d = manifold.distance(&points[i], &points[j]);
            let value = kernel_from(&w, &modal[i].values, &modal[j].values);
            let g = gradient_from(&w, &modal[i], &modal[j].values);
            let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            rows.push(decay_row(
                bounds,
                r_h,
                (i, j),
                d,
                t,
                (value, tail + roundoff * scale),
                (gnorm, tail + roundoff * gscale),
            ));
        }
    }
    Ok(DecayReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaradhanRow {
    pub p: usize,
    pub q: usize,
    pub d: f64,
    pub d_squared: f64,
    pub extrapolated: f64,
    /// Relative to `d²`; absolute when `d = 0`.
    pub rel_error: f64,
    pub used_t: Vec<f64>,
    pub dropped_t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaradhanReport {
    pub rows: Vec<VaradhanRow>,
    pub warnings: Vec<String>,
}

impl VaradhanReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("p,q,d,d_squared,extrapolated,rel_error\n");
        for r in &self.rows {
            writeln!(s, "{},{},{:?},{:?},{:?},{:e}", r.p, r.q, r.d, r.d_squared, r.extrapolated, r.rel_error).unwrap();
        }
        s
    }
}

/// Kernel values below this fraction of `Σ|terms|` are dominated by cancellation.
pub const CANCELLATION_FLOOR: f64 = 1e-12;

/// Intercept of the least-squares line through `(x_i, y_i)`.
fn linear_intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    my - sxy / sxx * mx
}

/// Fits `-4t·log K(p,t;q) - 2n·t·log(4πt)` linearly in `t` over the three
/// smallest usable times and reports the `t → 0` intercept against `d(p,q)²`.
/// Times where the kernel falls under the cancellation floor are dropped.
pub fn varadhan_check(
    ev: &HeatEvaluator,
    bounds: &GeometryBounds,
    points: &[Point],
    pairs: &[(usize, usize)],
    ts: &[f64],
) -> Result<VaradhanReport, HeatError> {
    let spectrum = ev.spectrum();
    let tmin = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup = eigenfunction_sup_bounds(spectrum);
    let need = truncation_index(spectrum, tmin, 1e-12, bounds, &sup)?;
    if need.n0 > ev.truncation() {
        return Err(HeatError::InsufficientTruncation { needed: need.n0, have: ev.truncation(), eps: 1e-12, t: tmin });
    }
    let n = ev.dimension() as f64;
    let manifold = spectrum.manifold().clone();
    let mut sorted = ts.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &(i, j) in pairs {
        let d = manifold.distance(&points[i], &points[j]);
        let mut used = Vec::new();
        let mut ys = Vec::new();
        let mut dropped = Vec::new();
        for &t in &sorted {
            if used.len() == 3 {
                break;
            }
            let (k, scale) = ev.kernel_with_scale(&points[i], t, &points[j]);
            if !(k > CANCELLATION_FLOOR * scale) {
                warnings.push(format!("pair ({i},{j}): kernel {k:e} at t = {t} under the cancellation floor, dropped"));
                dropped.push(t);
                continue;
            }
            used.push(t);
            ys.push(-4.0 * t * k.ln() - 2.0 * n * t * (4.0 * std::f64::consts::PI * t).ln());
        }
        if used.len() < 2 {
            return Err(HeatError::TooFewTimes(i, j));
        }
        let extrapolated = linear_intercept(&used, &ys);
        let d2 = d * d;
        let rel_error = if d2 > 0.0 { (extrapolated - d2).abs() / d2 } else { extrapolated.abs() };
        rows.push(VaradhanRow { p: i, q: j, d, d_squared: d2, extrapolated, rel_error, used_t: used, dropped_t: dropped });
    }
    Ok(VaradhanReport { rows, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceReport {
    pub t: f64,
    pub value: f64,
    /// `Vol·C(n) / (a(n)·min(t, r_h²))^{n/2}`.
    pub bound: f64,
    pub within: bool,
}

/// `Σ_k e^{-λ_k t}` over the computed spectrum, compared with the trace bound.
pub fn heat_trace(spectrum: &Spectrum, t: f64, bounds: &GeometryBounds) -> Result<TraceReport, HeatError> {
    assert!(t > 0.0, "t must be positive");
    let r_h = bounds.require_r_h()?;
    let value: f64 = spectrum.eigenvalues().iter().map(|l| (-l * t).exp()).sum();
    let n = bounds.n as f64;
    let bound = bounds.volume * bounds.c_n / (bounds.a_n * t.min(r_h * r_h)).powf(n / 2.0);
    Ok(TraceReport { t, value, bound, within: value <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_analytic, make_sphere, AnalyticKind, Manifold};
    use crate::spectrum::{compute_spectrum, SolverOptions};
    use std::f64::consts::PI;

    fn circle(count: usize) -> Arc<Spectrum> {
        let m = Arc::new(Manifold::from(make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap()));
        Arc::new(compute_spectrum(m, count, &SolverOptions::default()).unwrap())
    }

    fn at(x: f64) -> Point {
        Point::Coords(vec![x])
    }

    /// Method-of-images sum for the circle of length `2π`.
    fn images(d: f64, t: f64) -> f64 {
        (-50..=50).map(|m| (-(d + 2.0 * PI * m as f64).powi(2) / (4.0 * t)).exp()).sum::<f64>() / (4.0 * PI * t).sqrt()
    }

    #[test]
    fn constant_mode_only() {
        let ev = HeatEvaluator::new(circle(5), 0);
        for t in [0.01, 1.0, 10.0] {
            assert!((ev.kernel(&at(0.3), t, &at(2.0)) - 1.0 / (2.0 * PI)).abs() < 1e-15);
            assert_eq!(ev.gradient(&at(0.3), t, &at(2.0)), vec![0.0]);
        }
    }

    #[test]
    fn diagonal_series_value() {
        let ev = HeatEvaluator::new(circle(101), 100);
        let v = heat_kernel(&ev, &at(1.0), 1.0, &at(1.0));
        let series = (1.0 + 2.0 * (1..60).map(|k| (-(k * k) as f64).exp()).sum::<f64>()) / (2.0 * PI);
        assert!((v - series).abs() < 1e-14);
        assert!((v - 0.28212397).abs() < 1e-8);
        assert!((v - images(0.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_long_time_limit() {
        let ev = HeatEvaluator::new(circle(41), 40);
        let (p, q) = (at(0.2), at(4.1));
        assert_eq!(ev.kernel(&p, 0.3, &q), ev.kernel(&q, 0.3, &p));
        let t = 30.0;
        let err = (ev.kernel(&p, t, &q) - 1.0 / (2.0 * PI)).abs();
        assert!(err <= (-t).exp() * 40.0 / PI);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ev = HeatEvaluator::new(circle(401), 400);
        let q = at(0.0);
        for theta in [0.3, 1.0, 2.5] {
            let g = heat_gradient(&ev, &at(theta), 0.1, &q)[0];
            let h = 1e-4;
            let fd = (ev.kernel(&at(theta + h), 0.1, &q) - ev.kernel(&at(theta - h), 0.1, &q)) / (2.0 * h);
            assert!((g - fd).abs() < 1e-6, "{g} vs {fd}");
        }
        assert!(ev.gradient(&q, 0.1, &q)[0].abs() < 1e-10);
    }

    #[test]
    fn gradient_zero_on_diagonal_sphere() {
        let m = Arc::new(Manifold::from(make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap()));
        let s = Arc::new(compute_spectrum(m, 64, &SolverOptions::default()).unwrap());
        let ev = HeatEvaluator::full(s);
        let p = Point::Coords(vec![0.36, 0.48, 0.8]);
        assert!(ev.gradient(&p, 0.05, &p).iter().all(|g| g.abs() < 1e-10));
    }

    #[test]
    fn integrates_to_one() {
        let s = circle(61);
        let ev = HeatEvaluator::full(s.clone());
        let sample = s.manifold().sample(64);
        for t in [0.05, 0.5] {
            let total: f64 = sample.points.iter().zip(&sample.weights).map(|(q, w)| w * ev.kernel(&at(0.7), t, q)).sum();
            assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn semigroup_by_quadrature() {
        let s = circle(21);
        let ev = HeatEvaluator::full(s.clone());
        let sample = s.manifold().sample(40);
        let (p, q) = (at(0.4), at(2.9));
        let composed: f64 = sample
            .points
            .iter()
            .zip(&sample.weights)
            .map(|(x, w)| w * ev.kernel(&p, 0.2, x) * ev.kernel(x, 0.3, &q))
            .sum();
        assert!((composed - ev.kernel(&p, 0.5, &q)).abs() < 1e-6);
    }

    #[test]
    fn decay_bounds_hold_on_circle() {
        let s = circle(1001);
        let ev = HeatEvaluator::full(s.clone());
        let bounds = GeometryBounds::for_manifold(s.manifold());
        let points = vec![at(0.0), at(0.5), at(PI)];
        let ts = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
        let r = decay_check(&ev, &bounds, &points, &[(0, 1), (0, 2)], &ts).unwrap();
        assert!(r.passed(), "{}", r.csv());
        assert!(r.csv().starts_with("p,q,t,value,bound,flag"));
    }

    #[test]
    fn decay_bound_at_zero_distance() {
        let b = GeometryBounds::new(2, 0.0, 1.0, 4.0 * PI).unwrap();
        let v = value_bound(&b, 0.5, 0.0, 0.1);
        assert!((v - b.c_n / (b.a_n * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn inflated_value_fails() {
        let b = GeometryBounds::new(1, 0.0, PI, 2.0 * PI).unwrap().with_r_h(PI);
        let k = images(1.0, 0.1);
        assert_eq!(decay_row(&b, PI, (0, 1), 1.0, 0.1, (k, 0.0), (0.0, 0.0)).flag, Flag::Pass);
        assert_eq!(decay_row(&b, PI, (0, 1), 1.0, 0.1, (k * 1e6, 0.0), (0.0, 0.0)).flag, Flag::Fail);
        assert_eq!(decay_row(&b, 0.1, (0, 1), 1.0, 0.1, (k, 0.0), (0.0, 0.0)).grad_flag, Flag::OutsideRange);
    }

    #[test]
    fn varadhan_on_circle() {
        let s = circle(1001);
        let ev = HeatEvaluator::full(s.clone());
        let b = GeometryBounds::for_manifold(s.manifold());
        let points = vec![at(0.0), at(1.0), at(PI)];
        let r = varadhan_check(&ev, &b, &points, &[(0, 1), (1, 1)], &[0.05, 0.02, 0.01]).unwrap();
        assert!(r.rows[0].rel_error < 0.05);
        assert!(r.rows[1].extrapolated.abs() < 1e-3);
        assert!(r.warnings.is_empty());
        // the antipodal kernel is below the cancellation floor for small t
        let ts = [0.4, 0.3, 0.2, 0.15, 0.1, 0.05, 0.02, 0.01];
        let r = varadhan_check(&ev, &b, &points, &[(0, 2)], &ts).unwrap();
        assert!(r.rows[0].rel_error < 0.05, "{:?}", r.rows[0]);
        assert_eq!(r.rows[0].dropped_t, vec![0.01, 0.02, 0.05]);
        assert_eq!(r.warnings.len(), 3);
    }

    #[test]
    fn varadhan_requires_truncation() {
        let s = circle(30);
        let ev = HeatEvaluator::full(s.clone());
        let b = GeometryBounds::for_manifold(s.manifold());
        assert!(varadhan_check(&ev, &b, &[at(0.0), at(1.0)], &[(0, 1)], &[0.05, 0.02, 0.01]).is_err());
    }

    #[test]
    fn trace_values() {
        let s = circle(201);
        let b = GeometryBounds::for_manifold(s.manifold());
        let r = heat_trace(&s, 1.0, &b).unwrap();
        assert!((r.value - 1.7726372).abs() < 1e-6);
        assert!(r.within);
        assert!((heat_trace(&s, 50.0, &b).unwrap().value - 1.0).abs() < 1e-20);
        let mut prev = f64::INFINITY;
        for t in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let v = heat_trace(&s, t, &b).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn mesh_gradient_is_small_on_diagonal() {
        let m = Arc::new(Manifold::from(make_sphere(1.0, 3)));
        let s = Arc::new(compute_spectrum(m, 16, &SolverOptions::default()).unwrap());
        let ev = HeatEvaluator::full(s);
        let p = Point::Vertex(7);
        let g = ev.gradient(&p, 0.2, &p);
        let scale = ev.kernel(&p, 0.2, &p);
        assert!(g.iter().map(|x| x.abs()).fold(0.0, f64::max) < 0.05 * scale);
    }
}
