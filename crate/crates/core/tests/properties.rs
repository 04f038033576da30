//! Property tests over the public API.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use proptest::prelude::*;

use spectral_embed::charts::log_log_slope;
use spectral_embed::embed::build_net;
use spectral_embed::heat::HeatEvaluator;
use spectral_embed::manifold::{make_analytic, AnalyticKind, Manifold, Point};
use spectral_embed::radius::{coordinate_condition, holder_constant_c, segment_constant, solid_angle, FForm};
use spectral_embed::spectrum::{compute_spectrum, eigenfunction_sup_bounds, truncation_index, GeometryBounds, SolverOptions, Spectrum};

fn circle_spectrum() -> Arc<Spectrum> {
    static S: OnceLock<Arc<Spectrum>> = OnceLock::new();
    S.get_or_init(|| {
        let m: Arc<Manifold> = Arc::new(make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap().into());
        Arc::new(compute_spectrum(m, 201, &SolverOptions::default()).unwrap())
    })
    .clone()
}

/// Method-of-images heat kernel on the circle of length `2π`.
fn images(x: f64, t: f64) -> f64 {
    (-20..=20).map(|m| (-(x + 2.0 * PI * m as f64).powi(2) / (4.0 * t)).exp()).sum::<f64>() / (4.0 * PI * t).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_index_is_antitone(t in 0.05f64..2.0, dt in 0.0f64..1.0, e in -10.0f64..-2.0, de in 0.0f64..3.0) {
        let s = circle_spectrum();
        let bounds = GeometryBounds::for_manifold(s.manifold());
        let sup = eigenfunction_sup_bounds(&s);
        let n = |t: f64, eps: f64| truncation_index(&s, t, eps, &bounds, &sup).unwrap().n0;
        let eps = 10f64.powf(e);
        prop_assert!(n(t + dt, eps) <= n(t, eps));
        prop_assert!(n(t, eps * 10f64.powf(de)) <= n(t, eps));
    }

    #[test]
    fn circle_kernel_matches_images(x in 0.0f64..(2.0 * PI), y in 0.0f64..(2.0 * PI), t in 0.05f64..1.0) {
        let ev = HeatEvaluator::full(circle_spectrum());
        let (p, q) = (Point::Coords(vec![x]), Point::Coords(vec![y]));
        let k = ev.kernel(&p, t, &q);
        assert_relative_eq!(k, images(x - y, t), epsilon = 1e-10, max_relative = 1e-9);
        assert_relative_eq!(k, ev.kernel(&q, t, &p), epsilon = 1e-14);
    }

    #[test]
    fn net_covers_within_delta(delta in 0.1f64..1.5) {
        let m: Manifold = make_analytic(AnalyticKind::FlatTorus, &[2.0 * PI, PI]).unwrap().into();
        let net = build_net(&m, delta, 12).unwrap();
        prop_assert!(net.covering_radius < delta);
        prop_assert!(net.weights.iter().all(|w| *w > 0.0));
        assert_relative_eq!(net.weights.iter().sum::<f64>(), 2.0 * PI * PI, max_relative = 1e-9);
    }

    #[test]
    fn coordinate_condition_increases_in_r(n in 2usize..5, r in 1e-9f64..1e-2, k in 1.01f64..10.0) {
        let a = coordinate_condition(n, 1.0, 1.0, r, FForm::Exact);
        let b = coordinate_condition(n, 1.0, 1.0, r * k, FForm::Exact);
        prop_assert!(b > a);
    }

    #[test]
    fn explicit_form_dominates_exact(n in 2usize..5, lr in 1e-6f64..0.3, li in 0.5f64..5.0) {
        let exact = holder_constant_c(n, lr, li, FForm::Exact);
        let explicit = holder_constant_c(n, lr, li, FForm::Explicit);
        prop_assert!(explicit >= exact * (1.0 - 1e-12), "{explicit} < {exact}");
    }

    #[test]
    fn segment_constant_grows_with_radius(n in 1usize..8, s in 0.0f64..5.0) {
        prop_assert!(segment_constant(n, s + 0.1) >= segment_constant(n, s));
    }

    #[test]
    fn power_law_slope_is_exact(p in -3.0f64..3.0, c in 0.1f64..10.0) {
        let x = [0.01f64, 0.02, 0.05, 0.1];
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
        assert_relative_eq!(log_log_slope(&x, &y), p, epsilon = 1e-10);
    }
}

#[test]
fn solid_angles_match_gamma_formula() {
    // |S^{n-1}| = 2π^{n/2}/Γ(n/2) with Γ(1/2) = √π
    let gamma_half = |n: usize| -> f64 {
        let mut g = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
        let mut a = if n % 2 == 0 { 1.0 } else { 0.5 };
        while a < n as f64 / 2.0 {
            g *= a;
            a += 1.0;
        }
        g
    };
    for n in 1..=10 {
        assert_relative_eq!(solid_angle(n), 2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n), max_relative = 1e-14);
    }
}
