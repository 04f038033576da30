//! Subcommand runners. Each returns a `Report`; nothing here touches the filesystem
//! except loading an input mesh.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spectral_embed::charts::{ellipticity_sweep, grid_convergence, ChartSpec, Coefficients, GridParams, Region};
use spectral_embed::embed::{
    build_net, injectivity_of, replicate_net, sample_spacing, scan_t, t_grid, EmbeddingMap, EmbeddingReport, PairSet, TargetNorm,
};
use spectral_embed::heat::{decay_check, varadhan_check, HeatEvaluator};
use spectral_embed::manifold::{
    grid_sample, load_mesh, make_analytic, make_flat_torus, make_sphere, AnalyticKind, AnalyticManifold, GeodesicMethod, Manifold, Point,
};
use spectral_embed::radius::{constants_csv, coordinate_radius, FForm, Threshold};
use spectral_embed::spectrum::{
    compute_spectrum, eigen_growth_check, eigenfunction_sup_bounds, truncation_index, GeometryBounds, GrowthStatus, SolverOptions, Spectrum,
};

use crate::config::{FormChoice, GeodesicChoice, ManifoldKind, MapChoice, RunConfig, ThresholdChoice};
use crate::report::Report;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Varadhan,
    Isometry,
    Injectivity,
    Truncation,
    Counterexample,
    Decay,
    Growth,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Varadhan => "varadhan",
            Self::Isometry => "isometry",
            Self::Injectivity => "injectivity",
            Self::Truncation => "truncation",
            Self::Counterexample => "counterexample",
            Self::Decay => "decay",
            Self::Growth => "growth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Embed { scan: bool },
    Verify { target: Target, scan: bool },
    Constants,
    Charts,
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match cmd {
        Command::Spectrum => spectrum(cfg),
        Command::Embed { scan } => embed(cfg, scan),
        Command::Verify { target, scan } => match target {
            Target::Varadhan => varadhan(cfg),
            Target::Isometry | Target::Injectivity => embed_check(cfg, target, scan),
            Target::Truncation => truncation(cfg),
            Target::Counterexample => counterexample(cfg),
            Target::Decay => decay(cfg),
            Target::Growth => growth(cfg),
        },
        Command::Constants => constants(cfg),
        Command::Charts => charts(cfg),
    }
}

pub fn build_manifold(cfg: &RunConfig) -> Result<Arc<Manifold>, CliError> {
    let m = &cfg.manifold;
    let first = |name: &str| m.params.first().copied().ok_or_else(|| CliError::Usage(format!("manifold.params needs a {name}")));
    let manifold: Manifold = match m.kind {
        ManifoldKind::Circle => make_analytic(AnalyticKind::Circle, &m.params).map_err(compute)?.into(),
        ManifoldKind::Sphere => make_analytic(AnalyticKind::Sphere, &m.params).map_err(compute)?.into(),
        ManifoldKind::FlatTorus => make_analytic(AnalyticKind::FlatTorus, &m.params).map_err(compute)?.into(),
        ManifoldKind::Icosphere => make_sphere(first("radius")?, m.subdivisions).into(),
        ManifoldKind::TorusMesh => {
            if m.params.len() != 2 || m.cells.len() != 2 {
                return Err(CliError::Usage("torus_mesh needs two periods and two cell counts".into()));
            }
            make_flat_torus([m.params[0], m.params[1]], m.cells[0], m.cells[1]).map_err(compute)?.into()
        }
        ManifoldKind::Mesh => {
            let path = m.path.as_ref().ok_or_else(|| CliError::Usage("manifold.kind = mesh needs manifold.path".into()))?;
            if !path.exists() {
                return Err(CliError::MissingInput(path.clone()));
            }
            load_mesh(path).map_err(compute)?.into()
        }
    };
    Ok(Arc::new(manifold))
}

fn build_spectrum(cfg: &RunConfig, m: Arc<Manifold>) -> Result<Arc<Spectrum>, CliError> {
    let opts = SolverOptions { tol: cfg.spectrum.tol, seed: cfg.spectrum.solver_seed, ..SolverOptions::default() };
    Ok(Arc::new(compute_spectrum(m, cfg.spectrum.count, &opts).map_err(compute)?))
}

/// Manifold defaults with the configured overrides applied.
pub fn build_bounds(cfg: &RunConfig, m: &Manifold) -> Result<GeometryBounds, CliError> {
    let base = GeometryBounds::for_manifold(m);
    let b = &cfg.bounds;
    let mut out = GeometryBounds::new(base.n, b.kappa.unwrap_or(base.kappa), b.iota.unwrap_or(base.iota), b.volume.unwrap_or(base.volume))
        .map_err(|e| CliError::Usage(format!("bounds: {e}")))?;
    out.a_n = b.a_n.unwrap_or(base.a_n);
    out.c_n = b.c_n.unwrap_or(base.c_n);
    out.r_h = b.r_h.or(base.r_h);
    Ok(out)
}

fn geodesic(cfg: &RunConfig) -> GeodesicMethod {
    match cfg.embed.geodesic {
        GeodesicChoice::Graph => GeodesicMethod::Graph,
        GeodesicChoice::FastMarching => GeodesicMethod::FastMarching,
    }
}

fn evaluator(cfg: &RunConfig, s: Arc<Spectrum>) -> HeatEvaluator {
    match cfg.embed.n {
        Some(n) => HeatEvaluator::new(s, n),
        None => HeatEvaluator::full(s),
    }
}

fn manifold_summary(r: &mut Report, m: &Manifold) {
    r.push("dimension", m.dimension());
    r.push("volume", format!("{:?}", m.volume()));
    if let Some(mesh) = m.as_mesh() {
        r.push("vertices", mesh.num_vertices());
    }
}

fn spectrum(cfg: &RunConfig) -> Result<Report, CliError> {
    let m = build_manifold(cfg)?;
    let s = build_spectrum(cfg, m.clone())?;
    let mut r = Report::new("spectrum");
    manifold_summary(&mut r, &m);
    r.push("eigenvalues", s.len());
    let ev = s.eigenvalues();
    if ev.len() > 1 {
        r.push("lambda_1", format!("{:?}", ev[1]));
    }
    r.push("lambda_max", format!("{:?}", ev[ev.len() - 1]));
    r.file("eigenvalues.csv", s.eigenvalues_csv());
    let points = m.sample(cfg.embed.resolution).points;
    for k in 1..s.len().min(4) {
        r.file(format!("eigenfunction_{k}.csv"), s.eigenfunction_csv(k, &points));
    }
    Ok(r)
}

/// Net, verification points and pair sets shared by the embedding commands.
struct EmbedSetting {
    ev: HeatEvaluator,
    net: Option<spectral_embed::embed::Net>,
    points: Vec<Point>,
    near: PairSet,
    far: PairSet,
}

fn embed_setting(cfg: &RunConfig) -> Result<EmbedSetting, CliError> {
    let e = &cfg.embed;
    let m = build_manifold(cfg)?;
    let s = build_spectrum(cfg, m.clone())?;
    let ev = evaluator(cfg, s);
    let net = match e.map {
        MapChoice::F => None,
        _ => Some(build_net(&m, e.delta, e.resolution).map_err(compute)?),
    };
    let sample = m.sample(e.resolution);
    let h_near = e.h_near.unwrap_or(4.0 * sample_spacing(&m, &sample));
    let points = sample.points;
    let near = PairSet::near(&m, &points, h_near, geodesic(cfg));
    let far = PairSet::far(&m, &points, e.h_far, geodesic(cfg), e.far_sources, cfg.seed);
    Ok(EmbedSetting { ev, net, points, near, far })
}

/// One report for `embed.t`, or the best row of the `t` scan.
fn embedding(cfg: &RunConfig, setting: &EmbedSetting, scan: bool, r: &mut Report) -> Result<EmbeddingReport, CliError> {
    let e = &cfg.embed;
    let ev = &setting.ev;
    let net = setting.net.as_ref();
    let replicated = match (e.map, e.lambda) {
        (MapChoice::H, Some(l)) => Some(replicate_net(net.unwrap(), l).map_err(compute)?),
        _ => None,
    };
    let build = |t: f64| match e.map {
        MapChoice::G => EmbeddingMap::g(ev, net.unwrap(), t),
        MapChoice::H => match &replicated {
            Some(rep) => EmbeddingMap::h_replicated(ev, rep, t),
            None => EmbeddingMap::h(ev, net.unwrap(), t),
        },
        MapChoice::F => EmbeddingMap::f(ev, t),
        MapChoice::Kuratowski => Ok(EmbeddingMap::kuratowski(ev.spectrum().manifold().clone(), net.unwrap())),
    };
    if let Some(net) = net {
        r.push("net_size", net.len());
        r.push("covering_radius", format!("{:?}", net.covering_radius));
    }
    r.push("sample_points", setting.points.len());
    let best = if scan {
        let ts = t_grid(e.t_max, e.t_count);
        let report = scan_t(&ts, build, &setting.points, &setting.near, Some(&setting.far)).map_err(compute)?;
        r.push("scan_rows", report.rows.len());
        r.push("non_monotone_scan", report.non_monotone);
        r.file("scan.csv", report.csv());
        report.rows[report.best].clone()
    } else {
        EmbeddingReport::build(&build(e.t).map_err(compute)?, &setting.points, &setting.near, Some(&setting.far)).map_err(compute)?
    };
    r.push_block(&best.summary());
    r.file("dilatation.csv", best.dilatation.csv());
    if !scan {
        r.file("images.csv", build(e.t).map_err(compute)?.csv(&setting.points));
    }
    Ok(best)
}

fn embed(cfg: &RunConfig, scan: bool) -> Result<Report, CliError> {
    let setting = embed_setting(cfg)?;
    let mut r = Report::new("embed");
    embedding(cfg, &setting, scan, &mut r)?;
    Ok(r)
}

fn embed_check(cfg: &RunConfig, target: Target, scan: bool) -> Result<Report, CliError> {
    let setting = embed_setting(cfg)?;
    let mut r = Report::new(format!("verify/{}", target.as_str()));
    let best = embedding(cfg, &setting, scan, &mut r)?;
    r.passed = match target {
        Target::Isometry => {
            let tol = cfg.verify.isometry_tol;
            r.push("isometry_tol", format!("{tol:?}"));
            best.dilatation.min >= 1.0 - tol && best.dilatation.max <= 1.0 + tol
        }
        _ => best.injectivity.is_some_and(|i| i.pairs > 0 && i.margin > 0.0),
    };
    Ok(r)
}

/// Explicit `verify.points`, or `verify.sample_points` seeded draws from the sample.
fn verify_points(cfg: &RunConfig, m: &Manifold) -> Result<Vec<Point>, CliError> {
    let v = &cfg.verify;
    let points: Vec<Point> = if v.points.is_empty() {
        let all = m.sample(cfg.embed.resolution).points;
        let k = v.sample_points.min(all.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idx = sample(&mut rng, all.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i].clone()).collect()
    } else if m.as_mesh().is_some() {
        v.points
            .iter()
            .map(|p| match p.as_slice() {
                [x] if *x >= 0.0 && x.fract() == 0.0 => Ok(Point::Vertex(*x as usize)),
                _ => Err(CliError::Usage(format!("mesh points are vertex indices, got {p:?}"))),
            })
            .collect::<Result<_, _>>()?
    } else {
        v.points.iter().map(|p| Point::Coords(p.clone())).collect()
    };
    for p in &points {
        m.validate_point(p).map_err(|e| CliError::Usage(format!("verify.points: {e}")))?;
    }
    if points.len() < 2 {
        return Err(CliError::Usage("verification needs at least two points".into()));
    }
    Ok(points)
}

fn first_pairs(count: usize) -> Vec<(usize, usize)> {
    (1..count).map(|j| (0, j)).collect()
}

fn varadhan(cfg: &RunConfig) -> Result<Report, CliError> {
    let m = build_manifold(cfg)?;
    let s = build_spectrum(cfg, m.clone())?;
    let bounds = build_bounds(cfg, &m)?;
    let points = verify_points(cfg, &m)?;
    let rep = varadhan_check(&HeatEvaluator::full(s), &bounds, &points, &first_pairs(points.len()), &cfg.verify.times).map_err(compute)?;
    let mut r = Report::new("verify/varadhan");
    let worst = rep.rows.iter().map(|row| row.rel_error).fold(0.0, f64::max);
    r.push("pairs", rep.rows.len());
    r.push("max_rel_error", format!("{worst:?}"));
    r.push("tolerance", format!("{:?}", cfg.verify.varadhan_tol));
    r.push("warnings", rep.warnings.len());
    r.file("varadhan.csv", rep.csv());
    r.passed = !rep.rows.is_empty() && worst < cfg.verify.varadhan_tol;
    Ok(r)
}

fn decay(cfg: &RunConfig) -> Result<Report, CliError> {
    let m = build_manifold(cfg)?;
    let s = build_spectrum(cfg, m.clone())?;
    let bounds = build_bounds(cfg, &m)?;
    let points = verify_points(cfg, &m)?;
    let rep = decay_check(&evaluator(cfg, s), &bounds, &points, &first_pairs(points.len()), &cfg.verify.times).map_err(compute)?;
    let mut r = Report::new("verify/decay");
    r.push("rows", rep.rows.len());
    r.file("decay.csv", rep.csv());
    r.passed = rep.passed();
    Ok(r)
}

fn growth(cfg: &RunConfig) -> Result<Report, CliError> {
    let m = build_manifold(cfg)?;
    let s = build_spectrum(cfg, m.clone())?;
    let bounds = build_bounds(cfg, &m)?;
    let rep = eigen_growth_check(&s, &bounds).map_err(compute)?;
    let mut csv = String::from("k,lambda,bound,status\n");
    for row in &rep.rows {
        let status = match row.status {
            GrowthStatus::Pass => "pass",
            GrowthStatus::Fail => "fail",
            GrowthStatus::NotApplicable => "not_applicable",
        };
        writeln!(csv, "{},{:?},{:?},{status}", row.k, row.lambda, row.bound).unwrap();
    }
    let mut r = Report::new("verify/growth");
    r.push("threshold", format!("{:?}", rep.threshold));
    r.push("checked", rep.rows.iter().filter(|x| x.status != GrowthStatus::NotApplicable).count());
    r.push("failures", rep.rows.iter().filter(|x| x.status == GrowthStatus::Fail).count());
    r.file("growth.csv", csv);
    r.passed = rep.passed();
    Ok(r)
}

/// `sup |K_{n0} − K_full|` and the gradient analogue over sample pairs at `embed.t`.
fn truncation(cfg: &RunConfig) -> Result<Report, CliError> {
    let m = build_manifold(cfg)?;
    let s = build_spectrum(cfg, m.clone())?;
    let bounds = build_bounds(cfg, &m)?;
    let (t, eps) = (cfg.embed.t, cfg.verify.eps);
    if !(t > 0.0 && eps > 0.0) {
        return Err(CliError::Usage(format!("embed.t {t} and verify.eps {eps} must be positive")));
    }
    let sup = eigenfunction_sup_bounds(&s);
    let tr = truncation_index(&s, t, eps, &bounds, &sup).map_err(compute)?;
    if tr.n0 + 1 >= s.len() {
        return Err(CliError::Usage(format!("truncation index {} needs spectrum.count above {}", tr.n0, tr.n0 + 1)));
    }
    let all = m.sample(cfg.embed.resolution).points;
    // at most 256 evenly strided points keep the pair sweep quadratic but small
    let stride = all.len().div_ceil(256).max(1);
    let points: Vec<Point> = all.into_iter().step_by(stride).collect();
    let vals: Vec<_> = points.iter().map(|p| s.evaluate(p, s.len())).collect();
    let w: Vec<f64> = s.eigenvalues().iter().map(|l| (-l * t).exp()).collect();
    let (mut value, mut gradient) = (0.0f64, 0.0f64);
    for a in &vals {
        for b in &vals {
            let mut d = 0.0;
            let mut g = vec![0.0; a.gradients.first().map_or(0, |x| x.len())];
            for k in tr.n0 + 1..s.len() {
                d += w[k] * a.values[k] * b.values[k];
                for (gi, ai) in g.iter_mut().zip(&a.gradients[k]) {
                    *gi += w[k] * ai * b.values[k];
                }
            }
            value = value.max(d.abs());
            gradient = gradient.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }
    let mut r = Report::new("verify/truncation");
    r.push("t", format!("{t:?}"));
    r.push("eps", format!("{eps:?}"));
    r.push("n0", tr.n0);
    r.push("tail_bound", format!("{:?}", tr.tail));
    r.push("points", points.len());
    r.push("sup_value_tail", format!("{value:?}"));
    r.push("sup_gradient_tail", format!("{gradient:?}"));
    r.passed = value < eps && gradient < eps;
    Ok(r)
}

/// Eigenmap margins over pairs half a fiber apart on a flat 2-torus, with the
/// modes strictly below `verify.gap` and then with the band at the gap added.
fn counterexample(cfg: &RunConfig) -> Result<Report, CliError> {
    let m = build_manifold(cfg)?;
    let periods = match m.as_analytic() {
        Some(AnalyticManifold::FlatTorus { periods }) if periods.len() == 2 => periods.clone(),
        _ => return Err(CliError::Usage("counterexample needs manifold.kind = flat_torus with two periods".into())),
    };
    let grid = &cfg.verify.fiber_grid;
    if grid.len() != 2 || grid[0] == 0 || grid[1] < 2 || grid[1] % 2 != 0 {
        return Err(CliError::Usage(format!("verify.fiber_grid must be `nx, ny` with ny even, got {grid:?}")));
    }
    let s = build_spectrum(cfg, m.clone())?;
    let gap = cfg.verify.gap;
    let ev = s.eigenvalues();
    let below = ev.iter().filter(|&&l| l < gap - 1e-9).count() - 1;
    let with_band = ev.iter().filter(|&&l| l < gap + 1e-9).count() - 1;
    if with_band == below || ev[ev.len() - 1] <= gap + 1e-9 {
        return Err(CliError::Usage(format!("spectrum.count {} does not reach past the band at {gap:?}", ev.len())));
    }
    let (nx, ny) = (grid[0], grid[1]);
    let points: Vec<Point> = grid_sample(&periods, &[nx, ny]).0.into_iter().map(Point::Coords).collect();
    // grid index = ix + nx·iy; partners half a fiber apart
    let pairs: Vec<(usize, usize)> = (0..nx * ny / 2).map(|i| (i, i + nx * ny / 2)).collect();
    let fiber = PairSet::from_pairs(&m, &points, &pairs);
    let separation = fiber.pairs.iter().map(|p| p.d).fold(f64::INFINITY, f64::min);
    let t = cfg.embed.t;
    let margin = |n: usize| -> Result<f64, CliError> {
        let f = EmbeddingMap::f(&HeatEvaluator::new(s.clone(), n), t).map_err(compute)?;
        Ok(injectivity_of(&f.images(&points), TargetNorm::Euclidean, &fiber).map_err(compute)?.margin)
    };
    let (collapsed, lifted) = (margin(below)?, margin(with_band)?);
    let mut r = Report::new("verify/counterexample");
    r.push("t", format!("{t:?}"));
    r.push("gap", format!("{gap:?}"));
    r.push("n_below_gap", below);
    r.push("margin_below_gap", format!("{collapsed:?}"));
    r.push("n_with_band", with_band);
    r.push("margin_with_band", format!("{lifted:?}"));
    r.push("fiber_pairs", fiber.pairs.len());
    r.push("separation", format!("{separation:?}"));
    r.passed = collapsed <= cfg.verify.collapse_tol && lifted > cfg.verify.lift_min;
    Ok(r)
}

fn constants(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.constants;
    if c.n.is_empty() || c.lambda.is_empty() || c.iota.is_empty() || c.r.is_empty() {
        return Err(CliError::Usage("constants.n, lambda, iota and r must be non-empty".into()));
    }
    let threshold = match c.threshold {
        ThresholdChoice::Distance => Threshold::Distance,
        ThresholdChoice::HarmonicPre => Threshold::HarmonicPre,
        ThresholdChoice::Harmonic => Threshold::Harmonic,
        ThresholdChoice::Custom(v) => Threshold::Custom(v),
    };
    let form = match c.form {
        FormChoice::Exact => FForm::Exact,
        FormChoice::Explicit => FForm::Explicit,
    };
    let mut r = Report::new("constants");
    let mut csv = String::from("n,Lambda,iota,threshold,r,binding,condition\n");
    let mut i = 0;
    for &n in &c.n {
        for &l in &c.lambda {
            for &io in &c.iota {
                let res = coordinate_radius(n, l, io, threshold, form).map_err(|e| CliError::Usage(e.to_string()))?;
                let binding = format!("{:?}", res.binding).to_lowercase();
                writeln!(csv, "{n},{l:?},{io:?},{:?},{:?},{binding},{:?}", res.threshold, res.r, res.condition).unwrap();
                r.push(format!("r_star_{i}"), format!("{:?}", res.r));
                i += 1;
            }
        }
    }
    r.push("rows", c.n.len() * c.lambda.len() * c.iota.len() * c.r.len());
    r.file("constants.csv", constants_csv(&c.n, &c.lambda, &c.iota, &c.r));
    r.file("radius.csv", csv);
    Ok(r)
}

fn charts(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.charts;
    let y = vec![0.0; c.n];
    let spec = ChartSpec::new(c.n, Coefficients::identity(c.n), c.half_width, 1.0, c.alpha).map_err(compute)?;
    let conv = grid_convergence(&spec, c.half_width, &c.convergence_spacings, &y, c.convergence_t, c.steps).map_err(compute)?;
    let params = GridParams { half_width: c.half_width, spacing: c.spacing };
    let region = Region::new(c.region_radius, c.t_min, c.t_max);
    let sweep = ellipticity_sweep(c.n, &c.epsilons, c.width, c.alpha, params, &y, &region, c.steps).map_err(compute)?;
    let mut r = Report::new("charts");
    r.push_block(&conv.summary());
    r.push_block(&sweep.summary());
    let mut conv_csv = String::from("h,error,mass\n");
    for i in 0..conv.spacings.len() {
        writeln!(conv_csv, "{:?},{:?},{:?}", conv.spacings[i], conv.errors[i], conv.masses[i]).unwrap();
    }
    let mut sweep_csv = String::from("q_minus_1,sup_value,sup_gradient\n");
    for (e, rep) in sweep.epsilons.iter().zip(&sweep.reports) {
        writeln!(sweep_csv, "{e:?},{:?},{:?}", rep.sup_value, rep.sup_gradient).unwrap();
    }
    r.file("convergence.csv", conv_csv);
    r.file("sweep.csv", sweep_csv);
    let within = |x: f64, range: &[f64]| x >= range[0] && x <= range[1];
    r.passed = conv.ratios.iter().all(|&x| within(x, &c.ratio_range)) && within(sweep.slope_value, &c.slope_range);
    Ok(r)
}
