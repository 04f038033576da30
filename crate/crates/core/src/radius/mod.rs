//! Model-space volumes, the explicit harmonic-radius constants, and coordinate
//! experiments on meshes.
//!
//! Constants take dimensionless products (`Λr`, `Λι`), which makes them exactly
//! invariant under `(Λ, r) → (Λ/k, kr)` whenever the products round identically.

mod experiment;

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::quadrature::integrate;

pub use experiment::{
    distance_coordinates_experiment, harmonic_coordinates_experiment, volume_ratio_profile, CoordinateFrame, DistanceReport, ExperimentOptions,
    HarmonicReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadiusError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frame point {axis} not realizable: {reason}")]
    FrameUnrealizable { axis: usize, reason: String },
    #[error("Dirichlet system singular: {0}")]
    Singular(String),
}

/// Area of the unit sphere `S^{n-1}`: `Ω_1 = 2`, `Ω_2 = 2π`, `Ω_{n+2} = 2π Ω_n / n`.
pub fn solid_angle(n: usize) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    let mut om = if n % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        om *= 2.0 * PI / k as f64;
        k += 2;
    }
    om
}

/// `∫_0^x sinh^{n-1}(u) du` with relative error below 1e-12.
pub fn sinh_moment(n: usize, x: f64) -> f64 {
    if n == 1 {
        return x;
    }
    integrate(|u| u.sinh().powi(n as i32 - 1), 0.0, x, 1e-13, 0.0).value
}

/// `(Vol_Λ(B_r), Vol_Λ(∂B_r))` in the simply connected space of curvature `-Λ²`.
pub fn model_volumes(n: usize, lambda: f64, r: f64) -> (f64, f64) {
    let scale = lambda.powi(n as i32 - 1);
    let om = solid_angle(n);
    let lr = lambda * r;
    (om * sinh_moment(n, lr) / (scale * lambda), om * lr.sinh().powi(n as i32 - 1) / scale)
}

/// `Vol_Λ(B_{k r}) / Vol_Λ(B_r)` as a function of `Λr`.
pub fn volume_ratio(n: usize, lr: f64, k: f64) -> f64 {
    sinh_moment(n, k * lr) / sinh_moment(n, lr)
}

/// `c(n, Λs) = 2^{n-1} cosh^{n-1}(Λs/2)`.
pub fn segment_constant(n: usize, ls: f64) -> f64 {
    (2.0 * (ls / 2.0).cosh()).powi(n as i32 - 1)
}

/// Which form of the Hessian-average bound `F` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FForm {
    /// With the true ratio `r·Vol_Λ(∂B_r)/Vol_Λ(B_r)`.
    #[default]
    Exact,
    /// With that ratio replaced by `2^{n-1} cosh^{n-1}(Λr/2)`.
    Explicit,
}

/// `F(n, Λr, κ)` where `κ` bounds `coth(Λρ)` on the ball.
pub fn hessian_bound_f(n: usize, lr: f64, coth_bound: f64, form: FForm) -> f64 {
    let m = (n - 1) as f64;
    let boundary_ratio = match form {
        FForm::Exact if n == 1 => 1.0,
        FForm::Exact => lr * lr.sinh().powi(n as i32 - 1) / sinh_moment(n, lr),
        FForm::Explicit => segment_constant(n, lr),
    };
    m * lr + m * m * lr * coth_bound * coth_bound + boundary_ratio * m * coth_bound
}

/// `coth(x)`, equal to 1 at `x = ∞`.
pub fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// `C(n, Λr, Λι) = 6 (12 · Vol_Λ(B_{4r})/Vol_Λ(B_r) · c(n, 3Λr) · F(n, 3Λr, coth(Λι/16)))^{1/2}`.
pub fn holder_constant_c(n: usize, lr: f64, li: f64, form: FForm) -> f64 {
    6.0 * (12.0 * volume_ratio(n, lr, 4.0) * segment_constant(n, 3.0 * lr) * hessian_bound_f(n, 3.0 * lr, coth(li / 16.0), form)).sqrt()
}

/// Right-hand side `θ` of a coordinate condition `C·(Λr)^{1/2} < θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `1/(2n)`: distance coordinates.
    Distance,
    /// `1/(4n)`: the precondition of the harmonic-coordinate construction.
    HarmonicPre,
    /// `1/n`: the harmonic-coordinate conclusion.
    Harmonic,
    Custom(f64),
}

impl Threshold {
    pub fn value(self, n: usize) -> f64 {
        match self {
            Threshold::Distance => 1.0 / (2 * n) as f64,
            Threshold::HarmonicPre => 1.0 / (4 * n) as f64,
            Threshold::Harmonic => 1.0 / n as f64,
            Threshold::Custom(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// `r* = ι/64`.
    Cap,
    /// `r*` is the root of `C·(Λr)^{1/2} = θ`.
    Condition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateRadius {
    pub r: f64,
    pub binding: Binding,
    /// `C·(Λr)^{1/2}` at `r`.
    pub condition: f64,
    pub threshold: f64,
}

/// `C·(Λr)^{1/2}`, increasing in `r`.
pub fn coordinate_condition(n: usize, lambda: f64, iota: f64, r: f64, form: FForm) -> f64 {
    holder_constant_c(n, lambda * r, lambda * iota, form) * (lambda * r).sqrt()
}

/// Largest `r ≤ ι/64` with `C(n, Λr, Λι)(Λr)^{1/2} < θ`, by bisection to 1e-12 relative.
pub fn coordinate_radius(n: usize, lambda: f64, iota: f64, threshold: Threshold, form: FForm) -> Result<CoordinateRadius, RadiusError> {
    let theta = threshold.value(n);
    if n == 0 || !(lambda > 0.0) || !(iota > 0.0) || !(theta > 0.0) {
        return Err(RadiusError::InvalidParameter(format!("n {n}, Lambda {lambda}, iota {iota}, threshold {theta}")));
    }
    let g = |r: f64| coordinate_condition(n, lambda, iota, r, form);
    let cap = iota / 64.0;
    if cap.is_finite() && g(cap) < theta {
        return Ok(CoordinateRadius { r: cap, binding: Binding::Cap, condition: g(cap), threshold: theta });
    }
    let mut hi = if cap.is_finite() { cap } else { 1.0 / lambda };
    while g(hi) < theta {
        hi *= 2.0;
    }
    let mut lo = hi;
    while g(lo) >= theta {
        lo /= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CoordinateRadius { r: lo, binding: Binding::Condition, condition: g(lo), threshold: theta })
}

/// `L_R(r) = ∫_r^R ∫_s^R sinh^{n-1}(Λτ)/sinh^{n-1}(Λs) dτ ds` by nested adaptive
/// quadrature. Infinite at `r = 0` for `n ≥ 2`.
pub fn abresch_gromoll_l(n: usize, lambda: f64, big_r: f64, r: f64) -> Result<f64, RadiusError> {
    if !(lambda > 0.0) || !(0.0 <= r && r <= big_r) {
        return Err(RadiusError::InvalidParameter(format!("Lambda {lambda}, R {big_r}, r {r}")));
    }
    if r == big_r {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(integrate(|s| big_r - s, r, big_r, 1e-12, 0.0).value);
    }
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    let p = n as i32 - 1;
    let outer = integrate(
        |s| {
            let ss = (lambda * s).sinh();
            integrate(|tau| ((lambda * tau).sinh() / ss).powi(p), s, big_r, 1e-12, 0.0).value
        },
        r,
        big_r,
        1e-10,
        0.0,
    );
    Ok(outer.value)
}

/// One row of the constants sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsRow {
    pub n: usize,
    pub lambda: f64,
    pub iota: f64,
    pub r: f64,
    pub ball_volume: f64,
    pub sphere_volume: f64,
    pub volume_ratio: f64,
    pub c: f64,
    pub f: f64,
    pub f_explicit: f64,
    pub holder: f64,
    pub cond_dist: bool,
    pub cond_harm: bool,
}

impl ConstantsRow {
    /// `c` and `F` are evaluated at `3Λr`, as they enter `C`.
    pub fn new(n: usize, lambda: f64, iota: f64, r: f64) -> Self {
        let lr = lambda * r;
        let (ball_volume, sphere_volume) = model_volumes(n, lambda, r);
        let kappa = coth(lambda * iota / 16.0);
        let holder = holder_constant_c(n, lr, lambda * iota, FForm::Exact);
        let cond = holder * lr.sqrt();
        let below_cap = r < iota / 64.0;
        Self {
            n,
            lambda,
            iota,
            r,
            ball_volume,
            sphere_volume,
            volume_ratio: volume_ratio(n, lr, 4.0),
            c: segment_constant(n, 3.0 * lr),
            f: hessian_bound_f(n, 3.0 * lr, kappa, FForm::Exact),
            f_explicit: hessian_bound_f(n, 3.0 * lr, kappa, FForm::Explicit),
            holder,
            cond_dist: below_cap && cond < Threshold::Distance.value(n),
            cond_harm: below_cap && cond < Threshold::HarmonicPre.value(n),
        }
    }
}

/// CSV `n,Lambda,iota,r,volratio,c,F,C,cond_dist,cond_harm` over the product of the inputs.
pub fn constants_csv(ns: &[usize], lambdas: &[f64], iotas: &[f64], radii: &[f64]) -> String {
    let mut s = String::from("n,Lambda,iota,r,volratio,c,F,C,cond_dist,cond_harm\n");
    for &n in ns {
        for &l in lambdas {
            for &i in iotas {
                for &r in radii {
                    let row = ConstantsRow::new(n, l, i, r);
                    writeln!(
                        s,
                        "{n},{l:?},{i:?},{r:?},{:?},{:?},{:?},{:?},{},{}",
                        row.volume_ratio, row.c, row.f, row.holder, row.cond_dist, row.cond_harm
                    )
                    .unwrap();
                }
            }
        }
    }
    s
}
