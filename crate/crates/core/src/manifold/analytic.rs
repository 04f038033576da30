//! Closed-form manifolds: circle, round sphere, flat torus.
//!
//! Points are coordinate vectors: arc length `[s]` on the circle,
//! `[x_1, …, x_n]` on the torus, Cartesian `[x, y, z]` on the sphere.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::Vector3;

use super::mesh::{make_sphere, tangent_frame_for_normal};
use super::ManifoldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticKind {
    Circle,
    Sphere,
    FlatTorus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticManifold {
    Circle { length: f64 },
    Sphere { radius: f64 },
    FlatTorus { periods: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeShape {
    /// Product over coordinates of `1`, `cos(2πk x/a)` or `sin(2πk x/a)`;
    /// `k = 0` always carries `Trig::Cos` (the constant factor).
    Fourier(Vec<(u32, Trig)>),
    /// Real spherical harmonic; `m < 0` selects the sine-type function.
    Harmonic { l: u32, m: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: f64,
    pub shape: ModeShape,
}

/// Values and tangent-frame gradients of a list of modes at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
}

/// Builds an analytic manifold. Circle takes `[L]`, sphere `[R]`, torus the periods.
pub fn make_analytic(kind: AnalyticKind, params: &[f64]) -> Result<AnalyticManifold, ManifoldError> {
    if params.is_empty() {
        return Err(ManifoldError::NonPositiveParameter { name: "parameter list", value: 0.0 });
    }
    for &p in params {
        if !(p > 0.0) || !p.is_finite() {
            return Err(ManifoldError::NonPositiveParameter { name: "period/radius", value: p });
        }
    }
    Ok(match kind {
        AnalyticKind::Circle => AnalyticManifold::Circle { length: params[0] },
        AnalyticKind::Sphere => AnalyticManifold::Sphere { radius: params[0] },
        AnalyticKind::FlatTorus => AnalyticManifold::FlatTorus { periods: params.to_vec() },
    })
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

impl AnalyticManifold {
    pub fn kind(&self) -> AnalyticKind {
        match self {
            Self::Circle { .. } => AnalyticKind::Circle,
            Self::Sphere { .. } => AnalyticKind::Sphere,
            Self::FlatTorus { .. } => AnalyticKind::FlatTorus,
        }
    }

    fn periods(&self) -> Option<Vec<f64>> {
        match self {
            Self::Circle { length } => Some(vec![*length]),
            Self::FlatTorus { periods } => Some(periods.clone()),
            Self::Sphere { .. } => None,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Circle { .. } => 1,
            Self::Sphere { .. } => 2,
            Self::FlatTorus { periods } => periods.len(),
        }
    }

    /// Number of coordinates of a point.
    pub fn ambient_dimension(&self) -> usize {
        match self {
            Self::Sphere { .. } => 3,
            _ => self.dimension(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Self::Circle { length } => *length,
            Self::Sphere { radius } => 4.0 * PI * radius * radius,
            Self::FlatTorus { periods } => periods.iter().product(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Self::Circle { length } => length / 2.0,
            Self::Sphere { radius } => PI * radius,
            Self::FlatTorus { periods } => periods.iter().map(|p| (p / 2.0).powi(2)).sum::<f64>().sqrt(),
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Self::Circle { length } => length / 2.0,
            Self::Sphere { radius } => PI * radius,
            Self::FlatTorus { periods } => periods.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0,
        }
    }

    /// Canonical representative of a point (wrapped into the fundamental
    /// domain, or projected onto the sphere).
    pub fn normalize_point(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Sphere { radius } => {
                let v = Vector3::new(x[0], x[1], x[2]).normalize() * *radius;
                vec![v.x, v.y, v.z]
            }
            _ => {
                let p = self.periods().unwrap();
                x.iter().zip(&p).map(|(&xi, &pi)| wrap(xi, pi)).collect()
            }
        }
    }

    /// Exact geodesic distance.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::Sphere { radius } => {
                let u = Vector3::new(x[0], x[1], x[2]).normalize();
                let w = Vector3::new(y[0], y[1], y[2]).normalize();
                radius * u.cross(&w).norm().atan2(u.dot(&w))
            }
            _ => {
                let p = self.periods().unwrap();
                x.iter()
                    .zip(y)
                    .zip(&p)
                    .map(|((&a, &b), &per)| {
                        let d = (a - b).rem_euclid(per);
                        d.min(per - d).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }

    /// Orthonormal tangent basis at `x`, as ambient coordinate vectors.
    pub fn tangent_frame(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Self::Sphere { .. } => {
                let u = Vector3::new(x[0], x[1], x[2]).normalize();
                tangent_frame_for_normal(&u).iter().map(|e| vec![e.x, e.y, e.z]).collect()
            }
            _ => {
                let n = self.dimension();
                (0..n)
                    .map(|j| {
                        let mut e = vec![0.0; n];
                        e[j] = 1.0;
                        e
                    })
                    .collect()
            }
        }
    }

    /// Exponential map: follows the geodesic from `x` with initial velocity
    /// given by tangent-frame components `v` for unit time.
    pub fn exp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Self::Sphere { radius } => {
                let frame = self.tangent_frame(x);
                let mut w = Vector3::zeros();
                for (c, e) in v.iter().zip(&frame) {
                    w += Vector3::new(e[0], e[1], e[2]) * *c;
                }
                let len = w.norm();
                let u = Vector3::new(x[0], x[1], x[2]).normalize();
                if len == 0.0 {
                    return self.normalize_point(x);
                }
                let theta = len / radius;
                let out = (u * theta.cos() + (w / len) * theta.sin()) * *radius;
                vec![out.x, out.y, out.z]
            }
            _ => {
                let moved: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
                self.normalize_point(&moved)
            }
        }
    }

    /// The first `count` eigenmodes of `-Δ` in ascending order; ties follow
    /// a fixed lattice / (l, m) order.
    pub fn modes(&self, count: usize) -> Vec<Mode> {
        match self {
            Self::Sphere { radius } => {
                let mut out = Vec::with_capacity(count);
                let mut l = 0u32;
                while out.len() < count {
                    let lambda = (l * (l + 1)) as f64 / (radius * radius);
                    for m in -(l as i32)..=(l as i32) {
                        if out.len() == count {
                            break;
                        }
                        out.push(Mode { eigenvalue: lambda, shape: ModeShape::Harmonic { l, m } });
                    }
                    l += 1;
                }
                out
            }
            _ => fourier_modes(&self.periods().unwrap(), count),
        }
    }

    /// Values and gradients (tangent-frame components) of `modes` at `x`.
    pub fn eval_modes(&self, modes: &[Mode], x: &[f64]) -> ModeValues {
        match self {
            Self::Sphere { radius } => eval_harmonics(*radius, modes, x, &self.tangent_frame(x)),
            _ => eval_fourier(&self.periods().unwrap(), modes, x),
        }
    }

    /// Quasi-uniform quadrature sample: points and weights summing to the volume.
    /// `resolution` is points per unit length for the circle/torus and the
    /// icosphere subdivision level for the sphere.
    pub fn sample(&self, resolution: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        match self {
            Self::Sphere { radius } => {
                let mesh = make_sphere(*radius, resolution as u32);
                let total = mesh.total_area();
                let scale = self.volume() / total;
                let pts = mesh.positions().iter().map(|p| p.to_vec()).collect();
                let w = mesh.mass().iter().map(|m| m * scale).collect();
                (pts, w)
            }
            _ => {
                let periods = self.periods().unwrap();
                let counts: Vec<usize> = periods.iter().map(|p| ((p * resolution as f64).ceil() as usize).max(1)).collect();
                grid_sample(&periods, &counts)
            }
        }
    }
}

/// Uniform periodic grid with `counts[j]` points along coordinate `j`.
pub fn grid_sample(periods: &[f64], counts: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let total: usize = counts.iter().product();
    let vol: f64 = periods.iter().product();
    let w = vol / total as f64;
    let mut pts = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        pts.push(idx.iter().zip(periods).zip(counts).map(|((&i, &p), &c)| p * i as f64 / c as f64).collect());
        for j in 0..idx.len() {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    (pts, vec![w; total])
}

fn fourier_modes(periods: &[f64], count: usize) -> Vec<Mode> {
    let n = periods.len();
    let base = periods.iter().map(|a| (2.0 * PI / a).powi(2)).fold(f64::INFINITY, f64::min);
    let mut cut = base * (count as f64).max(1.0);
    loop {
        let maxk: Vec<u32> = periods.iter().map(|a| ((cut.sqrt() * a / (2.0 * PI)).floor()) as u32).collect();
        let mut modes: Vec<(f64, Vec<u32>, Vec<Trig>)> = Vec::new();
        let mut k = vec![0u32; n];
        loop {
            let lambda: f64 = k.iter().zip(periods).map(|(&kj, a)| (2.0 * PI * kj as f64 / a).powi(2)).sum();
            if lambda <= cut {
                let nz: Vec<usize> = (0..n).filter(|&j| k[j] > 0).collect();
                for pattern in 0..(1u32 << nz.len()) {
                    let mut trig = vec![Trig::Cos; n];
                    for (b, &j) in nz.iter().enumerate() {
                        if pattern >> (nz.len() - 1 - b) & 1 == 1 {
                            trig[j] = Trig::Sin;
                        }
                    }
                    modes.push((lambda, k.clone(), trig));
                }
            }
            let mut j = 0;
            loop {
                if j == n {
                    break;
                }
                k[j] += 1;
                if k[j] <= maxk[j] {
                    break;
                }
                k[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
        if modes.len() >= count {
            modes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
            return modes
                .into_iter()
                .take(count)
                .map(|(lambda, k, trig)| Mode { eigenvalue: lambda, shape: ModeShape::Fourier(k.into_iter().zip(trig).collect()) })
                .collect();
        }
        cut *= 2.0;
    }
}

fn eval_fourier(periods: &[f64], modes: &[Mode], x: &[f64]) -> ModeValues {
    let n = periods.len();
    let mut values = Vec::with_capacity(modes.len());
    let mut gradients = Vec::with_capacity(modes.len());
    let mut f = vec![0.0; n];
    let mut df = vec![0.0; n];
    for mode in modes {
        let ModeShape::Fourier(spec) = &mode.shape else {
            panic!("spherical harmonic mode on a flat manifold");
        };
        for j in 0..n {
            let (k, trig) = spec[j];
            let a = periods[j];
            if k == 0 {
                f[j] = 1.0 / a.sqrt();
                df[j] = 0.0;
            } else {
                let w = 2.0 * PI * k as f64 / a;
                let c = (2.0 / a).sqrt();
                let (s, co) = (w * x[j]).sin_cos();
                match trig {
                    Trig::Cos => {
                        f[j] = c * co;
                        df[j] = -c * w * s;
                    }
                    Trig::Sin => {
                        f[j] = c * s;
                        df[j] = c * w * co;
                    }
                }
            }
        }
        values.push(f.iter().product());
        let g = (0..n)
            .map(|j| (0..n).map(|i| if i == j { df[i] } else { f[i] }).product())
            .collect();
        gradients.push(g);
    }
    ModeValues { values, gradients }
}

/// Scalar with three first-order partial derivatives.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 3],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: [0.0; 3] }
    }
    fn var(v: f64, k: usize) -> Self {
        let mut d = [0.0; 3];
        d[k] = 1.0;
        Self { v, d }
    }
    fn scale(self, s: f64) -> Self {
        Self { v: self.v * s, d: [self.d[0] * s, self.d[1] * s, self.d[2] * s] }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]] }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]] }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
                self.d[2] * o.v + self.v * o.d[2],
            ],
        }
    }
}

/// Real orthonormal spherical harmonics written as polynomials in `(x, y, z)`:
/// `Q̄_l^m(z) · Re/Im (x + iy)^m`, which stays smooth at the poles and gives
/// the ambient gradient by forward differentiation.
fn eval_harmonics(radius: f64, modes: &[Mode], x: &[f64], frame: &[Vec<f64>]) -> ModeValues {
    let u = Vector3::new(x[0], x[1], x[2]).normalize();
    let lmax = modes
        .iter()
        .map(|m| match m.shape {
            ModeShape::Harmonic { l, .. } => l as usize,
            _ => panic!("Fourier mode on the sphere"),
        })
        .max()
        .unwrap_or(0);
    let (dx, dy, dz) = (Dual::var(u.x, 0), Dual::var(u.y, 1), Dual::var(u.z, 2));
    // table[l][m] for m >= 0 holds cosine type, table_s[l][m] sine type
    let mut cos_t = vec![vec![Dual::constant(0.0); lmax + 1]; lmax + 1];
    let mut sin_t = cos_t.clone();
    let mut qmm = (1.0 / (4.0 * PI)).sqrt();
    let mut re = Dual::constant(1.0);
    let mut im = Dual::constant(0.0);
    for m in 0..=lmax {
        if m > 0 {
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            let nre = re * dx - im * dy;
            let nim = re * dy + im * dx;
            re = nre;
            im = nim;
        }
        let mut q_prev2 = Dual::constant(0.0);
        let mut q_prev = Dual::constant(qmm);
        let sq2 = if m == 0 { 1.0 } else { 2f64.sqrt() };
        for l in m..=lmax {
            let q = if l == m {
                q_prev
            } else if l == m + 1 {
                dz * q_prev.scale(((2 * m + 3) as f64).sqrt())
            } else {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                (dz * q_prev - q_prev2.scale(b)).scale(a)
            };
            if l > m {
                q_prev2 = q_prev;
                q_prev = q;
            }
            cos_t[l][m] = (q * re).scale(sq2);
            sin_t[l][m] = (q * im).scale(sq2);
        }
    }
    let e: Vec<Vector3<f64>> = frame.iter().map(|f| Vector3::new(f[0], f[1], f[2])).collect();
    let mut values = Vec::with_capacity(modes.len());
    let mut gradients = Vec::with_capacity(modes.len());
    for mode in modes {
        let ModeShape::Harmonic { l, m } = mode.shape else { unreachable!() };
        let d = if m >= 0 { cos_t[l as usize][m as usize] } else { sin_t[l as usize][(-m) as usize] };
        let g = Vector3::from(d.d);
        // tangential part of the ambient gradient; 1/R for arc length, 1/R for L² normalization
        values.push(d.v / radius);
        gradients.push(e.iter().map(|ei| g.dot(ei) / (radius * radius)).collect());
    }
    ModeValues { values, gradients }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_spectrum() {
        let c = make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap();
        let ev: Vec<f64> = c.modes(5).iter().map(|m| m.eigenvalue).collect();
        for (a, b) in ev.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((c.volume() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn thin_torus_spectrum() {
        let t = make_analytic(AnalyticKind::FlatTorus, &[2.0 * PI, 2.0 * PI * 0.1]).unwrap();
        let modes = t.modes(40);
        assert!((modes[1].eigenvalue - 1.0).abs() < 1e-12);
        let fiber = modes
            .iter()
            .find(|m| matches!(&m.shape, ModeShape::Fourier(s) if s[0].0 == 0 && s[1].0 == 1))
            .unwrap();
        assert!((fiber.eigenvalue - 100.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_multiplicities() {
        let s = make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap();
        let modes = s.modes(25);
        for l in 0..5u32 {
            let n = modes.iter().filter(|m| (m.eigenvalue - (l * (l + 1)) as f64).abs() < 1e-12).count();
            assert_eq!(n, (2 * l + 1) as usize);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(make_analytic(AnalyticKind::Sphere, &[0.0]).is_err());
        assert!(make_analytic(AnalyticKind::FlatTorus, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn distances() {
        let c = make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap();
        assert!((c.distance(&[0.0], &[PI]) - PI).abs() < 1e-15);
        assert!((c.distance(&[0.1], &[2.0 * PI - 0.1]) - 0.2).abs() < 1e-12);
        assert_eq!(c.distance(&[1.3], &[1.3]), 0.0);
        let s = make_analytic(AnalyticKind::Sphere, &[2.0]).unwrap();
        assert!((s.distance(&[0.0, 0.0, 2.0], &[0.0, 0.0, -2.0]) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn first_sphere_band_is_linear() {
        let s = make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap();
        let modes = s.modes(4);
        let p = Vector3::new(0.3, -0.5, 0.8).normalize();
        let v = s.eval_modes(&modes, &[p.x, p.y, p.z]);
        let c = (3.0 / (4.0 * PI)).sqrt();
        // m = -1 → y, m = 0 → z, m = 1 → x
        assert!((v.values[1] - c * p.y).abs() < 1e-14);
        assert!((v.values[2] - c * p.z).abs() < 1e-14);
        assert!((v.values[3] - c * p.x).abs() < 1e-14);
    }

    fn fd_check(m: &AnalyticManifold, count: usize, x: &[f64]) {
        let modes = m.modes(count);
        let base = m.eval_modes(&modes, x);
        let h = 1e-5;
        for dir in 0..m.dimension() {
            let mut v = vec![0.0; m.dimension()];
            v[dir] = h;
            let fwd = m.eval_modes(&modes, &m.exp(x, &v));
            v[dir] = -h;
            let bwd = m.eval_modes(&modes, &m.exp(x, &v));
            for k in 0..count {
                let fd = (fwd.values[k] - bwd.values[k]) / (2.0 * h);
                let g = base.gradients[k][dir];
                assert!((fd - g).abs() < 1e-6 * (1.0 + g.abs()), "mode {k} dir {dir}: fd {fd} vs {g}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let s = make_analytic(AnalyticKind::Sphere, &[1.5]).unwrap();
        fd_check(&s, 49, &[0.2, 0.9, -0.4]);
        // exactly at a pole
        fd_check(&s, 49, &[0.0, 0.0, 1.5]);
        let t = make_analytic(AnalyticKind::FlatTorus, &[2.0, 3.0]).unwrap();
        fd_check(&t, 30, &[0.4, 2.2]);
    }

    #[test]
    fn sample_weights_sum_to_volume() {
        for m in [
            make_analytic(AnalyticKind::Circle, &[2.0 * PI]).unwrap(),
            make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap(),
            make_analytic(AnalyticKind::FlatTorus, &[1.0, 0.5]).unwrap(),
        ] {
            let (_, w) = m.sample(3);
            assert!((w.iter().sum::<f64>() / m.volume() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modes_are_orthonormal_under_quadrature() {
        let s = make_analytic(AnalyticKind::Sphere, &[1.0]).unwrap();
        let modes = s.modes(9);
        let (pts, w) = s.sample(5);
        let vals: Vec<Vec<f64>> = pts.iter().map(|p| s.eval_modes(&modes, p).values).collect();
        for i in 0..9 {
            for j in 0..9 {
                let ip: f64 = vals.iter().zip(&w).map(|(v, w)| w * v[i] * v[j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 5e-3, "({i},{j}) = {ip}");
            }
        }
    }
}
