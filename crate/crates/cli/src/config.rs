//! Flat `key = value` run configuration with dotted section keys and `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Circle,
    Sphere,
    FlatTorus,
    Icosphere,
    TorusMesh,
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapChoice {
    G,
    H,
    F,
    Kuratowski,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicChoice {
    Graph,
    FastMarching,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdChoice {
    Distance,
    HarmonicPre,
    Harmonic,
    Custom(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormChoice {
    Exact,
    Explicit,
}

/// Parsing and printing of enumerated values; `parse(print(v)) == v`.
trait Token: Sized {
    fn print(&self) -> String;
    fn parse(s: &str) -> Option<Self>;
}

macro_rules! token_enum {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl Token for $ty {
            fn print(&self) -> String {
                match self { $($variant => $name.to_string()),+ }
            }
            fn parse(s: &str) -> Option<Self> {
                match s { $($name => Some($variant),)+ _ => None }
            }
        }
    };
}

token_enum!(ManifoldKind,
    ManifoldKind::Circle => "circle",
    ManifoldKind::Sphere => "sphere",
    ManifoldKind::FlatTorus => "flat_torus",
    ManifoldKind::Icosphere => "icosphere",
    ManifoldKind::TorusMesh => "torus_mesh",
    ManifoldKind::Mesh => "mesh",
);
token_enum!(MapChoice, MapChoice::G => "G", MapChoice::H => "H", MapChoice::F => "F", MapChoice::Kuratowski => "K");
token_enum!(GeodesicChoice, GeodesicChoice::Graph => "graph", GeodesicChoice::FastMarching => "fmm");
token_enum!(FormChoice, FormChoice::Exact => "exact", FormChoice::Explicit => "explicit");

impl Token for ThresholdChoice {
    fn print(&self) -> String {
        match self {
            Self::Distance => "distance".into(),
            Self::HarmonicPre => "harmonic_pre".into(),
            Self::Harmonic => "harmonic".into(),
            Self::Custom(v) => format!("{v:?}"),
        }
    }
    fn parse(s: &str) -> Option<Self> {
        match s {
            "distance" => Some(Self::Distance),
            "harmonic_pre" => Some(Self::HarmonicPre),
            "harmonic" => Some(Self::Harmonic),
            _ => s.parse::<f64>().ok().filter(|v| *v > 0.0).map(Self::Custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldConfig {
    pub kind: ManifoldKind,
    /// Circle `[L]`, sphere and icosphere `[R]`, torus kinds the periods.
    pub params: Vec<f64>,
    pub subdivisions: u32,
    /// Cells per period for `torus_mesh`.
    pub cells: Vec<usize>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub count: usize,
    pub tol: f64,
    pub solver_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub map: MapChoice,
    pub t: f64,
    pub t_max: f64,
    pub t_count: usize,
    pub delta: f64,
    /// Truncation index; the whole computed spectrum when unset.
    pub n: Option<usize>,
    /// Replication weight for the H map; plain Voronoi weights when unset.
    pub lambda: Option<f64>,
    /// Points per unit length on periodic kinds, subdivisions on the analytic sphere.
    pub resolution: usize,
    /// Near-pair threshold; four sample spacings when unset.
    pub h_near: Option<f64>,
    pub h_far: f64,
    pub far_sources: usize,
    pub geodesic: GeodesicChoice,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundsConfig {
    pub kappa: Option<f64>,
    pub iota: Option<f64>,
    pub volume: Option<f64>,
    pub a_n: Option<f64>,
    pub c_n: Option<f64>,
    pub r_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub times: Vec<f64>,
    pub eps: f64,
    /// Explicit points (coordinates, or one vertex index on meshes); the first
    /// is paired with every other one.
    pub points: Vec<Vec<f64>>,
    /// Random points drawn with the run seed when `points` is empty.
    pub sample_points: usize,
    pub varadhan_tol: f64,
    pub isometry_tol: f64,
    pub gap: f64,
    pub collapse_tol: f64,
    pub lift_min: f64,
    pub fiber_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartsConfig {
    pub n: usize,
    pub epsilons: Vec<f64>,
    pub width: f64,
    pub alpha: f64,
    pub half_width: f64,
    pub spacing: f64,
    pub region_radius: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub convergence_spacings: Vec<f64>,
    pub convergence_t: f64,
    pub ratio_range: Vec<f64>,
    pub slope_range: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsConfig {
    pub n: Vec<usize>,
    pub lambda: Vec<f64>,
    pub iota: Vec<f64>,
    pub r: Vec<f64>,
    pub threshold: ThresholdChoice,
    pub form: FormChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub manifold: ManifoldConfig,
    pub spectrum: SpectrumConfig,
    pub embed: EmbedConfig,
    pub bounds: BoundsConfig,
    pub verify: VerifyConfig,
    pub charts: ChartsConfig,
    pub constants: ConstantsConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            manifold: ManifoldConfig {
                kind: ManifoldKind::Circle,
                params: vec![2.0 * std::f64::consts::PI],
                subdivisions: 4,
                cells: vec![64, 64],
                path: None,
            },
            spectrum: SpectrumConfig { count: 65, tol: 1e-10, solver_seed: 0x5eed },
            embed: EmbedConfig {
                map: MapChoice::H,
                t: 0.1,
                t_max: 0.8,
                t_count: 10,
                delta: 0.05,
                n: None,
                lambda: None,
                resolution: 64,
                h_near: None,
                h_far: 0.5,
                far_sources: 256,
                geodesic: GeodesicChoice::Graph,
            },
            bounds: BoundsConfig::default(),
            verify: VerifyConfig {
                times: vec![0.4, 0.3, 0.2, 0.15, 0.1, 0.05, 0.02, 0.01],
                eps: 1e-6,
                points: Vec::new(),
                sample_points: 4,
                varadhan_tol: 0.05,
                isometry_tol: 0.15,
                gap: 100.0,
                collapse_tol: 1e-8,
                lift_min: 1e-3,
                fiber_grid: vec![64, 8],
            },
            charts: ChartsConfig {
                n: 1,
                epsilons: vec![0.02, 0.04, 0.08],
                width: 1.0,
                alpha: 0.5,
                half_width: 6.0,
                spacing: 0.0125,
                region_radius: 3.0,
                t_min: 0.0,
                t_max: 1.0,
                steps: 1024,
                convergence_spacings: vec![0.1, 0.05, 0.025],
                convergence_t: 0.25,
                ratio_range: vec![3.0, 5.0],
                slope_range: vec![0.7, 1.3],
            },
            constants: ConstantsConfig {
                n: vec![2, 3],
                lambda: vec![1.0],
                iota: vec![1.0],
                r: vec![1e-9, 1e-6, 1e-3],
                threshold: ThresholdChoice::Distance,
                form: FormChoice::Exact,
            },
            output_dir: PathBuf::from("out"),
        }
    }
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| float(*x)).collect::<Vec<_>>().join(", ")
}

fn ints(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_scalar<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse::<T>().map_err(|_| format!("cannot parse {s:?}"))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_scalar(x.trim())).collect()
}

fn parse_token<T: Token>(s: &str) -> Result<T, String> {
    T::parse(s).ok_or_else(|| format!("unknown value {s:?}"))
}

fn parse_points(s: &str) -> Result<Vec<Vec<f64>>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|p| parse_list(p.trim())).collect()
}

fn print_points(p: &[Vec<f64>]) -> String {
    p.iter().map(|x| floats(x)).collect::<Vec<_>>().join("; ")
}

impl RunConfig {
    /// `(key, value)` pairs in file order. Unset optional keys are omitted and
    /// keys that the manifold kind ignores are still written, so every field round-trips.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut e: Vec<(&'static str, String)> = Vec::new();
        let m = &self.manifold;
        e.push(("run.seed", self.seed.to_string()));
        e.push(("manifold.kind", m.kind.print()));
        e.push(("manifold.params", floats(&m.params)));
        e.push(("manifold.subdivisions", m.subdivisions.to_string()));
        e.push(("manifold.cells", ints(&m.cells)));
        if let Some(p) = &m.path {
            e.push(("manifold.path", p.display().to_string()));
        }
        let s = &self.spectrum;
        e.push(("spectrum.count", s.count.to_string()));
        e.push(("spectrum.tol", float(s.tol)));
        e.push(("spectrum.solver_seed", s.solver_seed.to_string()));
        let em = &self.embed;
        e.push(("embed.map", em.map.print()));
        e.push(("embed.t", float(em.t)));
        e.push(("embed.t_max", float(em.t_max)));
        e.push(("embed.t_count", em.t_count.to_string()));
        e.push(("embed.delta", float(em.delta)));
        if let Some(n) = em.n {
            e.push(("embed.n", n.to_string()));
        }
        if let Some(l) = em.lambda {
            e.push(("embed.lambda", float(l)));
        }
        e.push(("embed.resolution", em.resolution.to_string()));
        if let Some(h) = em.h_near {
            e.push(("embed.h_near", float(h)));
        }
        e.push(("embed.h_far", float(em.h_far)));
        e.push(("embed.far_sources", em.far_sources.to_string()));
        e.push(("embed.geodesic", em.geodesic.print()));
        let b = &self.bounds;
        for (k, v) in [
            ("bounds.kappa", b.kappa),
            ("bounds.iota", b.iota),
            ("bounds.volume", b.volume),
            ("bounds.a_n", b.a_n),
            ("bounds.c_n", b.c_n),
            ("bounds.r_h", b.r_h),
        ] {
            if let Some(v) = v {
                e.push((k, float(v)));
            }
        }
        let v = &self.verify;
        e.push(("verify.times", floats(&v.times)));
        e.push(("verify.eps", float(v.eps)));
        if !v.points.is_empty() {
            e.push(("verify.points", print_points(&v.points)));
        }
        e.push(("verify.sample_points", v.sample_points.to_string()));
        e.push(("verify.varadhan_tol", float(v.varadhan_tol)));
        e.push(("verify.isometry_tol", float(v.isometry_tol)));
        e.push(("verify.gap", float(v.gap)));
        e.push(("verify.collapse_tol", float(v.collapse_tol)));
        e.push(("verify.lift_min", float(v.lift_min)));
        e.push(("verify.fiber_grid", ints(&v.fiber_grid)));
        let c = &self.charts;
        e.push(("charts.n", c.n.to_string()));
        e.push(("charts.epsilons", floats(&c.epsilons)));
        e.push(("charts.width", float(c.width)));
        e.push(("charts.alpha", float(c.alpha)));
        e.push(("charts.half_width", float(c.half_width)));
        e.push(("charts.spacing", float(c.spacing)));
        e.push(("charts.region_radius", float(c.region_radius)));
        e.push(("charts.t_min", float(c.t_min)));
        e.push(("charts.t_max", float(c.t_max)));
        e.push(("charts.steps", c.steps.to_string()));
        e.push(("charts.convergence_spacings", floats(&c.convergence_spacings)));
        e.push(("charts.convergence_t", float(c.convergence_t)));
        e.push(("charts.ratio_range", floats(&c.ratio_range)));
        e.push(("charts.slope_range", floats(&c.slope_range)));
        let k = &self.constants;
        e.push(("constants.n", ints(&k.n)));
        e.push(("constants.lambda", floats(&k.lambda)));
        e.push(("constants.iota", floats(&k.iota)));
        e.push(("constants.r", floats(&k.r)));
        e.push(("constants.threshold", k.threshold.print()));
        e.push(("constants.form", k.form.print()));
        e.push(("output.dir", self.output_dir.display().to_string()));
        e
    }

    /// The config file text; `parse(&to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "run.seed" => self.seed = parse_scalar(v)?,
            "manifold.kind" => self.manifold.kind = parse_token(v)?,
            "manifold.params" => self.manifold.params = parse_list(v)?,
            "manifold.subdivisions" => self.manifold.subdivisions = parse_scalar(v)?,
            "manifold.cells" => self.manifold.cells = parse_list(v)?,
            "manifold.path" => self.manifold.path = Some(PathBuf::from(v)),
            "spectrum.count" => self.spectrum.count = parse_scalar(v)?,
            "spectrum.tol" => self.spectrum.tol = parse_scalar(v)?,
            "spectrum.solver_seed" => self.spectrum.solver_seed = parse_scalar(v)?,
            "embed.map" => self.embed.map = parse_token(v)?,
            "embed.t" => self.embed.t = parse_scalar(v)?,
            "embed.t_max" => self.embed.t_max = parse_scalar(v)?,
            "embed.t_count" => self.embed.t_count = parse_scalar(v)?,
            "embed.delta" => self.embed.delta = parse_scalar(v)?,
            "embed.n" => self.embed.n = Some(parse_scalar(v)?),
            "embed.lambda" => self.embed.lambda = Some(parse_scalar(v)?),
            "embed.resolution" => self.embed.resolution = parse_scalar(v)?,
            "embed.h_near" => self.embed.h_near = Some(parse_scalar(v)?),
            "embed.h_far" => self.embed.h_far = parse_scalar(v)?,
            "embed.far_sources" => self.embed.far_sources = parse_scalar(v)?,
            "embed.geodesic" => self.embed.geodesic = parse_token(v)?,
            "bounds.kappa" => self.bounds.kappa = Some(parse_scalar(v)?),
            "bounds.iota" => self.bounds.iota = Some(parse_scalar(v)?),
            "bounds.volume" => self.bounds.volume = Some(parse_scalar(v)?),
            "bounds.a_n" => self.bounds.a_n = Some(parse_scalar(v)?),
            "bounds.c_n" => self.bounds.c_n = Some(parse_scalar(v)?),
            "bounds.r_h" => self.bounds.r_h = Some(parse_scalar(v)?),
            "verify.times" => self.verify.times = parse_list(v)?,
            "verify.eps" => self.verify.eps = parse_scalar(v)?,
            "verify.points" => self.verify.points = parse_points(v)?,
            "verify.sample_points" => self.verify.sample_points = parse_scalar(v)?,
            "verify.varadhan_tol" => self.verify.varadhan_tol = parse_scalar(v)?,
            "verify.isometry_tol" => self.verify.isometry_tol = parse_scalar(v)?,
            "verify.gap" => self.verify.gap = parse_scalar(v)?,
            "verify.collapse_tol" => self.verify.collapse_tol = parse_scalar(v)?,
            "verify.lift_min" => self.verify.lift_min = parse_scalar(v)?,
            "verify.fiber_grid" => self.verify.fiber_grid = parse_list(v)?,
            "charts.n" => self.charts.n = parse_scalar(v)?,
            "charts.epsilons" => self.charts.epsilons = parse_list(v)?,
            "charts.width" => self.charts.width = parse_scalar(v)?,
            "charts.alpha" => self.charts.alpha = parse_scalar(v)?,
            "charts.half_width" => self.charts.half_width = parse_scalar(v)?,
            "charts.spacing" => self.charts.spacing = parse_scalar(v)?,
            "charts.region_radius" => self.charts.region_radius = parse_scalar(v)?,
            "charts.t_min" => self.charts.t_min = parse_scalar(v)?,
            "charts.t_max" => self.charts.t_max = parse_scalar(v)?,
            "charts.steps" => self.charts.steps = parse_scalar(v)?,
            "charts.convergence_spacings" => self.charts.convergence_spacings = parse_list(v)?,
            "charts.convergence_t" => self.charts.convergence_t = parse_scalar(v)?,
            "charts.ratio_range" => self.charts.ratio_range = range(parse_list(v)?)?,
            "charts.slope_range" => self.charts.slope_range = range(parse_list(v)?)?,
            "constants.n" => self.constants.n = parse_list(v)?,
            "constants.lambda" => self.constants.lambda = parse_list(v)?,
            "constants.iota" => self.constants.iota = parse_list(v)?,
            "constants.r" => self.constants.r = parse_list(v)?,
            "constants.threshold" => self.constants.threshold = parse_token(v)?,
            "constants.form" => self.constants.form = parse_token(v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses config text over the defaults. Repeated keys are rejected, and
    /// values may not contain `=` so that every entry fits a summary line.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ConfigError { line, message };
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.contains('=') {
                return Err(err(format!("value for {key} contains '='")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key}")));
            }
            cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        Ok(cfg)
    }
}

fn range(v: Vec<f64>) -> Result<Vec<f64>, String> {
    if v.len() != 2 || v[0] > v[1] {
        return Err(format!("expected `lo, hi`, got {v:?}"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn optional_keys_round_trip() {
        let mut c = RunConfig::default();
        c.manifold.kind = ManifoldKind::Mesh;
        c.manifold.path = Some(PathBuf::from("data/bunny.off"));
        c.embed.n = Some(40);
        c.embed.lambda = Some(0.25);
        c.embed.h_near = Some(0.1);
        c.bounds.r_h = Some(0.3);
        c.bounds.kappa = Some(1.0);
        c.verify.points = vec![vec![0.0, 0.1], vec![1.0 / 3.0, 0.5]];
        c.constants.threshold = ThresholdChoice::Custom(1e6);
        c.seed = u64::MAX;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse("# header\n\nembed.map = G  # max norm\nembed.t=0.25\n").unwrap();
        assert_eq!(c.embed.map, MapChoice::G);
        assert_eq!(c.embed.t, 0.25);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = RunConfig::parse("embed.t = 0.1\n\nembed.delta = abc\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(RunConfig::parse("a\n").unwrap_err().line, 1);
        assert_eq!(RunConfig::parse("x.y = 1\n").unwrap_err().line, 1);
        assert_eq!(RunConfig::parse("embed.t = 1\nembed.t = 2\n").unwrap_err().line, 2);
        assert_eq!(RunConfig::parse("embed.map = Q\n").unwrap_err().line, 1);
        assert_eq!(RunConfig::parse("charts.slope_range = 2, 1\n").unwrap_err().line, 1);
    }

    #[test]
    fn entries_fit_summary_lines() {
        let c = RunConfig::default();
        for (k, v) in c.entries() {
            assert!(!v.is_empty() && !v.contains('='), "{k}");
        }
    }
}
