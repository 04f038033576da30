//! Geometry constants, eigenvalue growth, eigenfunction sup norms and the
//! truncation index of the heat series.

use std::f64::consts::{E, PI};

use super::{Spectrum, SpectrumError};
use crate::manifold::{make_sphere, Manifold, ModeShape, Point};

/// `Γ(n/2 + 1)` for integer `n`.
fn gamma_half_plus_one(n: usize) -> f64 {
    let mut g = if n % 2 == 0 { 1.0 } else { PI.sqrt() / 2.0 };
    let mut x = if n % 2 == 0 { 1.0 } else { 1.5 };
    while x < n as f64 / 2.0 + 1.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the Euclidean unit `n`-ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half_plus_one(n)
}

/// `a(n) = n·ω_n^{2/n}`.
pub fn default_faber_krahn(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n).powf(2.0 / n as f64)
}

/// `C(n) = 2^n`.
pub fn default_trace_constant(n: usize) -> f64 {
    2f64.powi(n as i32)
}

/// `D(n) = 2^n`.
pub fn default_gradient_constant(n: usize) -> f64 {
    2f64.powi(n as i32)
}

/// Geometric constants used by the spectral and heat-kernel bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBounds {
    pub n: usize,
    /// Ricci lower-bound parameter.
    pub kappa: f64,
    pub iota: f64,
    pub volume: f64,
    pub a_n: f64,
    pub c_n: f64,
    pub d_n: f64,
    pub r_h: Option<f64>,
}

impl GeometryBounds {
    pub fn new(n: usize, kappa: f64, iota: f64, volume: f64) -> Result<Self, SpectrumError> {
        let b = Self {
            n,
            kappa,
            iota,
            volume,
            a_n: default_faber_krahn(n.max(1)),
            c_n: default_trace_constant(n),
            d_n: default_gradient_constant(n),
            r_h: None,
        };
        b.validate()?;
        Ok(b)
    }

    /// Dimension and volume of `m`; ι and r_h set to the known injectivity
    /// radius for analytic backends, the diameter/2 proxy for meshes.
    pub fn for_manifold(m: &Manifold) -> Self {
        let iota = m.injectivity_radius().unwrap_or_else(|| m.diameter() / 2.0);
        let mut b = Self::new(m.dimension(), 0.0, iota, m.volume()).expect("manifold quantities are positive");
        b.r_h = Some(iota);
        b
    }

    pub fn with_r_h(mut self, r_h: f64) -> Self {
        self.r_h = Some(r_h);
        self
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let bad = |s: &str| Err(SpectrumError::InvalidBounds(s.to_string()));
        if self.n < 1 {
            return bad("n must be >= 1");
        }
        for (name, v) in [("iota", self.iota), ("volume", self.volume), ("a(n)", self.a_n), ("C(n)", self.c_n), ("D(n)", self.d_n)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(r) = self.r_h {
            if !(r > 0.0) {
                return bad(&format!("r_h must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn require_r_h(&self) -> Result<f64, SpectrumError> {
        self.r_h.ok_or(SpectrumError::MissingHarmonicRadius)
    }
}

/// Smallest admissible index: `k ≥ C(n)·Vol·e^{n/2} / (a(n)^{n/2} r_h^n)`.
pub fn growth_threshold(bounds: &GeometryBounds) -> Result<f64, SpectrumError> {
    let r_h = bounds.require_r_h()?;
    let n = bounds.n as f64;
    Ok(bounds.c_n * bounds.volume * (n / 2.0).exp() / (bounds.a_n.powf(n / 2.0) * r_h.powf(n)))
}

/// `(n/2e)·a(n)·(k/(C(n)·Vol))^{2/n}`.
pub fn growth_lower_bound(bounds: &GeometryBounds, k: usize) -> f64 {
    let n = bounds.n as f64;
    n / (2.0 * E) * bounds.a_n * (k as f64 / (bounds.c_n * bounds.volume)).powf(2.0 / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub k: usize,
    pub lambda: f64,
    pub bound: f64,
    pub status: GrowthStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub threshold: f64,
    pub rows: Vec<GrowthRow>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != GrowthStatus::Fail)
    }
}

pub fn eigen_growth_check(spectrum: &Spectrum, bounds: &GeometryBounds) -> Result<GrowthReport, SpectrumError> {
    let threshold = growth_threshold(bounds)?;
    let rows = spectrum
        .eigenvalues()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &lambda)| {
            let bound = growth_lower_bound(bounds, k);
            let status = if (k as f64) < threshold {
                GrowthStatus::NotApplicable
            } else if lambda >= bound {
                GrowthStatus::Pass
            } else {
                GrowthStatus::Fail
            };
            GrowthRow { k, lambda, bound, status }
        })
        .collect();
    Ok(GrowthReport { threshold, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupRow {
    pub k: usize,
    pub lambda: f64,
    pub sup: f64,
    pub grad_sup: f64,
    /// `‖φ_k‖_∞ / λ_k^{n/4}`.
    pub value_ratio: f64,
    /// `‖∇φ_k‖_∞ / λ_k^{(n+2)/4}`.
    pub grad_ratio: f64,
}

/// Empirical sup-norm constants over `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupBounds {
    pub rows: Vec<SupRow>,
    pub value_constant: f64,
    pub gradient_constant: f64,
}

impl SupBounds {
    /// The single constant used by the truncation tail bound.
    pub fn constant(&self) -> f64 {
        self.value_constant.max(self.gradient_constant)
    }
}

/// Sup norms of each eigenfunction and its gradient. Flat Fourier modes use
/// the closed form; sphere harmonics are sampled on a fine icosphere; mesh
/// eigenfunctions use vertex values and triangle gradients.
pub fn eigenfunction_sup_bounds(spectrum: &Spectrum) -> SupBounds {
    let n = spectrum.dimension() as f64;
    let count = spectrum.len();
    let mut sups = vec![0.0f64; count];
    let mut gsups = vec![0.0f64; count];
    match spectrum.manifold().as_ref() {
        Manifold::Mesh(mesh) => {
            for k in 0..count {
                let f = spectrum.eigenvector(k).unwrap();
                sups[k] = f.iter().fold(0.0, |m, x| m.max(x.abs()));
                gsups[k] = (0..mesh.num_triangles()).map(|t| mesh.triangle_gradient(t, f).norm()).fold(0.0, f64::max);
            }
        }
        Manifold::Analytic(a) => {
            let modes = spectrum.modes().unwrap();
            if let Some(ModeShape::Harmonic { .. }) = modes.first().map(|m| &m.shape) {
                let radius = a.diameter() / PI;
                let sample = make_sphere(radius, 5);
                for p in sample.positions() {
                    let v = spectrum.evaluate(&Point::Coords(p.to_vec()), count);
                    for k in 0..count {
                        sups[k] = sups[k].max(v.values[k].abs());
                        let g = v.gradients[k].iter().map(|x| x * x).sum::<f64>().sqrt();
                        gsups[k] = gsups[k].max(g);
                    }
                }
            } else {
                let periods: Vec<f64> = match a {
                    crate::manifold::AnalyticManifold::Circle { length } => vec![*length],
                    crate::manifold::AnalyticManifold::FlatTorus { periods } => periods.clone(),
                    _ => unreachable!(),
                };
                for (k, m) in modes.iter().enumerate() {
                    let ModeShape::Fourier(spec) = &m.shape else { unreachable!() };
                    let mut amp = 1.0;
                    let mut wmax = 0.0f64;
                    for (&(kj, _), &aj) in spec.iter().zip(&periods) {
                        amp *= if kj == 0 { 1.0 / aj.sqrt() } else { (2.0 / aj).sqrt() };
                        wmax = wmax.max(2.0 * PI * kj as f64 / aj);
                    }
                    sups[k] = amp;
                    // |∇φ|² is multilinear in the squared sines; its maximum sits at a cube corner
                    gsups[k] = amp * wmax;
                }
            }
        }
    }
    let mut rows = Vec::new();
    for k in 1..count {
        let lambda = spectrum.eigenvalues()[k];
        if lambda <= 0.0 {
            continue;
        }
        rows.push(SupRow {
            k,
            lambda,
            sup: sups[k],
            grad_sup: gsups[k],
            value_ratio: sups[k] / lambda.powf(n / 4.0),
            grad_ratio: gsups[k] / lambda.powf((n + 2.0) / 4.0),
        });
    }
    let value_constant = rows.iter().map(|r| r.value_ratio).fold(0.0, f64::max);
    let gradient_constant = rows.iter().map(|r| r.grad_ratio).fold(0.0, f64::max);
    SupBounds { rows, value_constant, gradient_constant }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub n0: usize,
    /// Tail bound at `n0`.
    pub tail: f64,
    pub constant: f64,
    /// Tail contribution of the modes beyond the computed ones.
    pub unresolved_tail: f64,
}

fn tail_term(lambda: f64, t: f64, n: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    (-lambda * t).exp() * lambda.powf(n / 2.0).max(lambda.powf((n + 1.0) / 2.0))
}

/// `Σ_{k ≥ K} term(λ̂_k)` with `λ̂_k = max(λ_{K-1}, growth bound)`; the growth
/// bound is only used from the admissible index on.
fn unresolved_sum(spectrum: &Spectrum, t: f64, bounds: &GeometryBounds, threshold: f64) -> f64 {
    let n = bounds.n as f64;
    let kcount = spectrum.len();
    let last = *spectrum.eigenvalues().last().unwrap();
    let k_star = (threshold.ceil().max(0.0) as usize).max(kcount);
    let plateau = (k_star - kcount) as f64 * tail_term(last, t, n);
    let mut sum = plateau;
    let mut k = k_star;
    let peak = (n + 1.0) / (2.0 * t);
    loop {
        let lam = last.max(growth_lower_bound(bounds, k));
        let term = tail_term(lam, t, n);
        sum += term;
        k += 1;
        if lam > 2.0 * peak && term <= 1e-18 * sum.max(1e-300) {
            break;
        }
        if term == 0.0 && lam > peak {
            break;
        }
        if k - k_star > 50_000_000 {
            break;
        }
    }
    sum
}

/// Smallest `N` whose tail bound `C²·Σ_{k>N} e^{-λ̂_k t}·max(λ̂_k^{n/2}, λ̂_k^{(n+1)/2})`
/// is below `eps`; computed eigenvalues are used where available.
pub fn truncation_index(
    spectrum: &Spectrum,
    t: f64,
    eps: f64,
    bounds: &GeometryBounds,
    sup: &SupBounds,
) -> Result<Truncation, SpectrumError> {
    assert!(t > 0.0 && eps > 0.0, "t and eps must be positive");
    let threshold = growth_threshold(bounds)?;
    let n = bounds.n as f64;
    let c2 = sup.constant().powi(2);
    let unresolved = c2 * unresolved_sum(spectrum, t, bounds, threshold);
    let ev = spectrum.eigenvalues();
    let kcount = ev.len();
    // tails[N] = bound on Σ_{k>N}
    let mut tails = vec![0.0; kcount];
    let mut acc = unresolved;
    for nn in (0..kcount).rev() {
        tails[nn] = acc;
        acc += c2 * tail_term(ev[nn], t, n);
    }
    match tails.iter().position(|&x| x < eps) {
        Some(n0) => Ok(Truncation { n0, tail: tails[n0], constant: sup.constant(), unresolved_tail: unresolved }),
        None => Err(SpectrumError::TailTooLarge { available: kcount, tail: tails[kcount - 1] }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_analytic, AnalyticKind};
    use crate::spectrum::{compute_spectrum, SolverOptions};
    use std::sync::Arc;

    fn circle(count: usize) -> Spectrum {
        let m = Arc::new(Manifold::from(make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap()));
        compute_spectrum(m, count, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        assert!((default_faber_krahn(2) - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn circle_growth_custom_constants() {
        let s = circle(60);
        let mut b = GeometryBounds::new(1, 0.0, PI, 2.0 * PI).unwrap().with_r_h(1.0);
        b.a_n = PI * PI;
        b.c_n = 1.0;
        let r = eigen_growth_check(&s, &b).unwrap();
        assert!(r.passed());
        assert!(r.rows.iter().any(|row| row.status == GrowthStatus::Pass));
        assert_eq!(r.rows[0].status, GrowthStatus::NotApplicable);
        for row in &r.rows {
            let k = row.k as f64;
            assert!((row.bound - PI * PI / (2.0 * E) * (k / (2.0 * PI)).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn zeroed_eigenvalue_fails() {
        let s = circle(20).with_eigenvalue(5, 0.0);
        let mut b = GeometryBounds::new(1, 0.0, PI, 2.0 * PI).unwrap().with_r_h(1.0);
        b.a_n = PI * PI;
        b.c_n = 1.0;
        let r = eigen_growth_check(&s, &b).unwrap();
        assert_eq!(r.rows[4].k, 5);
        assert_eq!(r.rows[4].status, GrowthStatus::Fail);
        assert!(!r.passed());
    }

    #[test]
    fn missing_r_h() {
        let s = circle(5);
        let b = GeometryBounds::new(1, 0.0, PI, 2.0 * PI).unwrap();
        assert_eq!(eigen_growth_check(&s, &b), Err(SpectrumError::MissingHarmonicRadius));
    }

    #[test]
    fn analytic_backends_pass_with_defaults() {
        for (kind, params) in [
            (AnalyticKind::Circle, vec![2.0 * PI]),
            (AnalyticKind::Sphere, vec![1.0]),
            (AnalyticKind::FlatTorus, vec![2.0 * PI, 0.2 * PI]),
        ] {
            let m = Arc::new(Manifold::from(make_analytic(kind, &params).unwrap()));
            let b = GeometryBounds::for_manifold(&m);
            let s = compute_spectrum(m, 100, &SolverOptions::default()).unwrap();
            assert!(eigen_growth_check(&s, &b).unwrap().passed(), "{kind:?}");
        }
    }

    #[test]
    fn circle_sup_ratios() {
        let s = circle(21);
        let sup = eigenfunction_sup_bounds(&s);
        assert_eq!(sup.rows[0].k, 1);
        assert!((sup.value_constant - 1.0 / PI.sqrt()).abs() < 1e-12);
        for w in sup.rows.windows(2) {
            assert!(w[1].value_ratio <= w[0].value_ratio + 1e-15);
        }
        for r in &sup.rows {
            assert!((r.value_ratio - r.lambda.powf(-0.25) / PI.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_sup_ratios_bounded() {
        let m = Arc::new(Manifold::from(make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap()));
        let s = compute_spectrum(m, 17, &SolverOptions::default()).unwrap();
        let sup = eigenfunction_sup_bounds(&s);
        let first = sup.rows[0].value_ratio;
        assert!(sup.value_constant.is_finite() && sup.value_constant <= 2.0 * first);
        // first band: sup |Y_1^m| = sqrt(3/4π)
        assert!((sup.rows[0].sup - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn truncation_basic() {
        let s = circle(400);
        let b = GeometryBounds::for_manifold(s.manifold());
        let sup = eigenfunction_sup_bounds(&s);
        assert_eq!(truncation_index(&s, 0.5, 1e6, &b, &sup).unwrap().n0, 0);
        let n1 = truncation_index(&s, 0.5, 1e-6, &b, &sup).unwrap().n0;
        let n2 = truncation_index(&s, 1.0, 1e-6, &b, &sup).unwrap().n0;
        assert!(n2 <= n1);
        let small = circle(5);
        let sup5 = eigenfunction_sup_bounds(&small);
        assert!(matches!(truncation_index(&small, 0.01, 1e-12, &b, &sup5), Err(SpectrumError::TailTooLarge { available: 5, .. })));
    }
}
