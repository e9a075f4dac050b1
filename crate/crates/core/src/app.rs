//! Command line front end: run configuration, the commands and their
//! output files.
//!
//! Every file a command writes starts with a comment line carrying the hash
//! of the parsed configuration, and is written to a temporary sibling and
//! renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conjugate::{conjugate_surface, gradient_frame, psi_field, reflect_and_glue, write_surface, write_surface_index, SurfaceMesh};
use crate::domain::{triangulate, write_mesh, CutDomain, DomainMesh, MeshOptions};
use crate::error::{Error, Result};
use crate::geom::V2;
use crate::period::{
    degree, find_zero, symmetric_zero, unit_star, write_atomic, PeriodCache, PeriodMap, PeriodOptions,
    PeriodSample,
};
use crate::polygon::{FluxPolygon, StarSpec};
use crate::solver::{continuation_solve, BoundaryData, Level, SolutionField, SolveOptions};
use crate::validate::{closure_check, end_flux, jenkins_check, psi_invariants, total_curvature, Check};

/// Environment variable naming the root of the `Per` sample cache.
pub const CACHE_ENV: &str = "RNOID_CACHE";

/// Commented template listing every key with its default.
pub const TEMPLATE: &str = include_str!("../configs/template.toml");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub polygon: PolygonConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub period: PeriodConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonConfig {
    /// Edge vectors `[[x, y], ...]`; the polygon starts at the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[f64; 2]>>,
    /// Star polygon `[r, q]`, rescaled to unit edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star: Option<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub m: f64,
    /// Strip length; 0 means 8 times the longest edge.
    pub l: f64,
    pub h: f64,
    /// Continuation levels before the final `(m, l, h)` one.
    pub schedule: Vec<[f64; 3]>,
    pub tol: f64,
    pub max_iters: usize,
    pub grading: f64,
    pub vertex_slope: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m: 10.0,
            l: 0.0,
            h: 0.1,
            schedule: Vec::new(),
            tol: 1e-10,
            max_iters: 50,
            grading: 4.0,
            vertex_slope: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodConfig {
    /// Puncture for `mesh`, `solve` and `build-surface`; the centroid if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub puncture: Option<[f64; 2]>,
    /// Inset of the degree loop; 0 means 0.05 times the diameter.
    pub delta: f64,
    pub samples: usize,
    pub refine: usize,
    pub budget: usize,
    pub tol: f64,
    pub min_cell: f64,
    /// Points per side of the `per-field` grid.
    pub grid: usize,
    pub weld_tol: f64,
}

impl Default for PeriodConfig {
    fn default() -> Self {
        PeriodConfig {
            puncture: None,
            delta: 0.0,
            samples: 48,
            refine: 3,
            budget: 400,
            tol: 1e-3,
            min_cell: 0.05,
            grid: 8,
            weld_tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub psi_tol: f64,
    /// Patch side for total curvature; 0 means 0.4 times the shortest edge.
    pub curvature_patch: f64,
    pub flux_tol: f64,
    pub flux_angle_deg: f64,
    pub curvature_tol: f64,
    pub closure_tol: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            psi_tol: 5e-3,
            curvature_patch: 0.0,
            flux_tol: 0.025,
            flux_angle_deg: 2.0,
            curvature_tol: 0.05,
            closure_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub cache: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), cache: true }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::ConfigError(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn check(&self) -> Result<()> {
        match (&self.polygon.edges, &self.polygon.star) {
            (Some(_), Some(_)) => return Err(config_err("polygon: give either edges or star, not both")),
            (None, None) => return Err(config_err("polygon: edges or star required")),
            _ => {}
        }
        let s = &self.solver;
        let v = &self.validate;
        let p = &self.period;
        let positive = [
            ("solver.m", s.m),
            ("solver.h", s.h),
            ("solver.tol", s.tol),
            ("solver.grading", s.grading),
            ("solver.vertex_slope", s.vertex_slope),
            ("period.tol", p.tol),
            ("period.min_cell", p.min_cell),
            ("period.weld_tol", p.weld_tol),
            ("validate.psi_tol", v.psi_tol),
            ("validate.flux_tol", v.flux_tol),
            ("validate.flux_angle_deg", v.flux_angle_deg),
            ("validate.curvature_tol", v.curvature_tol),
            ("validate.closure_tol", v.closure_tol),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(config_err(format!("{name} must be positive, got {x}")));
            }
        }
        for (name, x) in [("solver.l", s.l), ("period.delta", p.delta), ("validate.curvature_patch", v.curvature_patch)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(config_err(format!("{name} must be nonnegative, got {x}")));
            }
        }
        if s.max_iters == 0 || p.samples == 0 || p.grid == 0 {
            return Err(config_err("iteration and sample counts must be positive"));
        }
        // levels must refine monotonically: M and L grow, h shrinks
        let mut levels: Vec<[f64; 3]> = s.schedule.clone();
        levels.push([s.m, s.l, s.h]);
        for w in levels.windows(2) {
            let (a, b) = (w[0], w[1]);
            let l_ok = a[1] == 0.0 && b[1] == 0.0 || a[1] <= b[1] || b[1] == 0.0;
            if !(a[0] <= b[0] && l_ok && a[2] >= b[2]) {
                return Err(config_err(format!("schedule not monotone between {a:?} and {b:?}")));
            }
        }
        if levels.iter().any(|l| !(l[0] > 0.0 && l[1] >= 0.0 && l[2] > 0.0)) {
            return Err(config_err("schedule entries need m > 0, l >= 0, h > 0"));
        }
        Ok(())
    }

    /// Hex digest of the canonical form of the configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = toml::to_string(self).unwrap_or_default();
        Sha256::digest(canon.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn star_spec(&self) -> Result<Option<StarSpec>> {
        self.polygon.star.map(|[r, q]| StarSpec::new(r, q)).transpose()
    }

    pub fn polygon(&self) -> Result<FluxPolygon> {
        if let Some(spec) = self.star_spec()? {
            return Ok(unit_star(spec));
        }
        let edges: Vec<V2> = self.polygon.edges.as_ref().unwrap().iter().map(|e| V2::new(e[0], e[1])).collect();
        FluxPolygon::from_edge_vectors(&edges)
    }

    fn strip_length(&self, poly: &FluxPolygon, l: f64) -> f64 {
        if l > 0.0 {
            l
        } else {
            8.0 * poly.max_edge()
        }
    }

    pub fn levels(&self, poly: &FluxPolygon) -> Vec<Level> {
        let s = &self.solver;
        s.schedule
            .iter()
            .chain(std::iter::once(&[s.m, s.l, s.h]))
            .map(|l| Level { m: l[0], l: self.strip_length(poly, l[1]), h: l[2] })
            .collect()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.solver.tol, max_iters: self.solver.max_iters, ..SolveOptions::default() }
    }

    pub fn period_options(&self, poly: &FluxPolygon) -> PeriodOptions {
        let p = &self.period;
        PeriodOptions {
            levels: self.levels(poly),
            grading: self.solver.grading,
            vertex_slope: self.solver.vertex_slope,
            solve: self.solve_options(),
            tol: p.tol,
            budget: p.budget,
            min_cell: p.min_cell,
            weld_tol: p.weld_tol,
        }
    }

    pub fn delta(&self, poly: &FluxPolygon) -> f64 {
        if self.period.delta > 0.0 {
            self.period.delta
        } else {
            0.05 * poly.diameter()
        }
    }

    pub fn puncture(&self, poly: &FluxPolygon) -> V2 {
        self.period.puncture.map_or(poly.centroid(), |a| V2::new(a[0], a[1]))
    }

    pub fn curvature_patch(&self, poly: &FluxPolygon) -> f64 {
        if self.validate.curvature_patch > 0.0 {
            self.validate.curvature_patch
        } else {
            0.4 * poly.min_edge()
        }
    }
}

/// Where and how a command runs.
#[derive(Clone, Debug)]
pub struct Context {
    pub out: PathBuf,
    pub jobs: usize,
    pub cache_root: Option<PathBuf>,
}

impl Context {
    /// Output directory from the flag or the config; cache root from the
    /// environment or `<out>/cache`.
    pub fn new(cfg: &RunConfig, out: Option<PathBuf>, jobs: usize) -> Self {
        let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        let cache_root = cfg.output.cache.then(|| {
            std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| out.join("cache"))
        });
        Context { out, jobs, cache_root }
    }
}

/// A command's output files and console summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer<'a> {
    ctx: &'a Context,
    hash: String,
    command: &'static str,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn header(&self) -> String {
        format!("rnoid {} config {}", self.command, self.hash)
    }

    /// Write `body` after the header comment, using `mark` as the comment
    /// prefix.
    fn put(&mut self, name: &str, mark: &str, body: &str) -> Result<()> {
        fs::create_dir_all(&self.ctx.out)?;
        let path = self.ctx.out.join(name);
        let text = format!("{mark} {}\n{body}", self.header());
        write_atomic(&path, text.as_bytes())?;
        self.files.push(path);
        Ok(())
    }

    fn done(self, summary: String) -> Outcome {
        Outcome { files: self.files, summary }
    }
}

fn writer<'a>(cfg: &RunConfig, ctx: &'a Context, command: &'static str) -> Writer<'a> {
    Writer { ctx, hash: cfg.hash(), command, files: Vec::new() }
}

/// Domain of the run: the symmetric sector for star polygons, else the
/// polygon punctured at the configured point.
fn domain(cfg: &RunConfig, poly: &FluxPolygon, l: f64) -> Result<CutDomain> {
    match cfg.star_spec()? {
        Some(spec) => {
            let scale = poly.edge(0).norm() / FluxPolygon::star(spec).edge(0).norm();
            CutDomain::star_scaled(spec, scale, l)
        }
        None => CutDomain::new(poly, cfg.puncture(poly), l),
    }
}

fn mesh_options(cfg: &RunConfig, h: f64) -> MeshOptions {
    let mut mo = MeshOptions::new(h);
    mo.grading = cfg.solver.grading;
    mo.vertex_slope = cfg.solver.vertex_slope;
    mo
}

fn solve_case(cfg: &RunConfig, poly: &FluxPolygon) -> Result<(DomainMesh, SolutionField, Vec<crate::solver::ScheduleRow>)> {
    let levels = cfg.levels(poly);
    let last = *levels.last().unwrap();
    let rebuild = |l: f64| domain(cfg, poly, l);
    continuation_solve(&rebuild, &levels, &mesh_options(cfg, last.h), &BoundaryData::new(last.m), &cfg.solve_options(), None)
}

pub fn write_field(field: &SolutionField) -> String {
    let mut s = format!("c {:?} M {:?} L {:?} h {:?}\n", field.c, field.m, field.l, field.h);
    for (k, u) in field.u.iter().enumerate() {
        let _ = writeln!(s, "{k} {u:?}");
    }
    s
}

pub fn cmd_mesh(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let last = *cfg.levels(&poly).last().unwrap();
    let mesh = triangulate(&domain(cfg, &poly, last.l)?, &mesh_options(cfg, last.h))?;
    let mut w = writer(cfg, ctx, "mesh");
    w.put("mesh.txt", "#", &write_mesh(&mesh, ""))?;
    let summary = format!(
        "nodes {} triangles {} euler {} min_angle_deg {:.3}",
        mesh.num_nodes(),
        mesh.tris.len(),
        mesh.euler_characteristic(),
        mesh.min_angle_deg()
    );
    Ok(w.done(summary))
}

pub fn cmd_solve(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let (mesh, field, rows) = solve_case(cfg, &poly)?;
    let mut w = writer(cfg, ctx, "solve");
    w.put("field.txt", "#", &write_field(&field))?;
    let mut sched = String::from("m,l,h,nodes,newton_iters,c,dc\n");
    for r in &rows {
        let dc = r.dc.map_or(String::new(), |d| format!("{d:?}"));
        let _ = writeln!(sched, "{:?},{:?},{:?},{},{},{:?},{dc}", r.level.m, r.level.l, r.level.h, r.nodes, r.newton_iters, r.c);
    }
    w.put("schedule.csv", "#", &sched)?;
    let summary = format!(
        "nodes {} c {:.9e} residual {:.3e} newton_iters {} area {:.9e}",
        mesh.num_nodes(),
        field.c,
        field.residual_norm,
        field.newton_iters,
        field.area
    );
    Ok(w.done(summary))
}

fn period_map<'a>(
    poly: &'a FluxPolygon,
    opts: &'a PeriodOptions,
    cache: &'a PeriodCache,
    ctx: &Context,
) -> PeriodMap<'a> {
    PeriodMap { poly, opts, cache, jobs: ctx.jobs }
}

fn open_cache(ctx: &Context) -> Result<PeriodCache> {
    match &ctx.cache_root {
        Some(dir) => PeriodCache::on_disk(dir),
        None => Ok(PeriodCache::in_memory()),
    }
}

fn sample_csv(samples: &[PeriodSample]) -> String {
    let mut s = String::from("Ax,Ay,rawX,rawY,renX,renY,third,newton_iters\n");
    for p in samples {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            p.a.x, p.a.y, p.raw.x, p.raw.y, p.renormalized.x, p.renormalized.y, p.third, p.newton_iters
        );
    }
    s
}

/// Grid points at least the loop inset away from the boundary.
pub fn field_grid(poly: &FluxPolygon, n: usize, inset: f64) -> Vec<V2> {
    let (lo, hi) = poly.bbox();
    let mut pts = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let a = V2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            let (inside, dist) = poly.contains(a);
            if inside && dist >= inset {
                pts.push(a);
            }
        }
    }
    pts
}

pub fn cmd_per_field(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let opts = cfg.period_options(&poly);
    let cache = open_cache(ctx)?;
    let map = period_map(&poly, &opts, &cache, ctx);
    let pts = field_grid(&poly, cfg.period.grid, cfg.delta(&poly));
    let samples = map.samples(&pts)?;
    let mut w = writer(cfg, ctx, "per-field");
    w.put("per_field.csv", "#", &sample_csv(&samples))?;
    Ok(w.done(format!("samples {}", samples.len())))
}

pub fn cmd_degree(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let opts = cfg.period_options(&poly);
    let cache = open_cache(ctx)?;
    let map = period_map(&poly, &opts, &cache, ctx);
    let rep = degree(&map, cfg.delta(&poly), cfg.period.samples, cfg.period.refine)?;
    let mut body = String::from("s,Ax,Ay,rawX,rawY,renX,renY,third,newton_iters\n");
    for (s, p) in rep.params.iter().zip(&rep.samples) {
        let row = sample_csv(std::slice::from_ref(p));
        let _ = writeln!(body, "{s:?},{}", row.lines().nth(1).unwrap_or(""));
    }
    let mut w = writer(cfg, ctx, "degree");
    w.put("degree.csv", "#", &format!("# winding {}\n{body}", rep.winding))?;
    let mut summary = format!("{}\n", rep.winding);
    summary.push_str(&body);
    Ok(w.done(summary.trim_end().to_string()))
}

pub fn cmd_find_zero(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let opts = cfg.period_options(&poly);
    let cache = open_cache(ctx)?;
    let map = period_map(&poly, &opts, &cache, ctx);
    let z = find_zero(&map, cfg.delta(&poly))?;
    let mut body = format!(
        "a {:?} {:?}\nraw {:?} {:?}\nnorm {:?}\nthird {:?}\nc {:?}\nroot_winding {}\ncells {}\nevaluations {}\npolish_steps {}\n",
        z.a.x,
        z.a.y,
        z.sample.raw.x,
        z.sample.raw.y,
        z.sample.raw.norm(),
        z.sample.third,
        z.sample.c,
        z.search.root_winding,
        z.search.cells.len(),
        z.evaluations,
        z.polish_steps
    );
    for (t, wnd) in &z.search.cells {
        let wnd = wnd.map_or("?".to_string(), |v| v.to_string());
        let _ = writeln!(body, "cell {:?} {:?} {:?} {:?} {:?} {:?} {wnd}", t[0].x, t[0].y, t[1].x, t[1].y, t[2].x, t[2].y);
    }
    let mut w = writer(cfg, ctx, "find-zero");
    w.put("zero.txt", "#", &body)?;
    Ok(w.done(format!("A* {:.9} {:.9} |Per| {:.3e}", z.a.x, z.a.y, z.sample.raw.norm())))
}

fn check_line(c: &Check) -> String {
    format!("{} {:?} {:?} {}", c.name, c.value, c.bound, if c.pass { "PASS" } else { "FAIL" })
}

/// Checks of a doubled surface: fluxes, balance, curvature.
pub fn surface_checks(cfg: &RunConfig, poly: &FluxPolygon, surface: &SurfaceMesh) -> Result<Vec<Check>> {
    let v = &cfg.validate;
    let mut out = Vec::new();
    let mut sum = V2::ZERO;
    let (mut worst_norm, mut worst_angle, mut worst_vertical): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for e in 0..surface.ends.len() {
        let f = end_flux(surface, e)?;
        let target = poly.edge(surface.ends[e].edge) * 2.0;
        sum += f.horizontal;
        worst_norm = worst_norm.max((f.horizontal.norm() - target.norm()).abs() / target.norm());
        let ang = crate::geom::wrap_angle(f.horizontal.angle() - target.angle()).abs().to_degrees();
        worst_angle = worst_angle.max(ang);
        worst_vertical = worst_vertical.max(f.vertical.abs());
    }
    let scale = 2.0 * poly.max_edge();
    out.push(Check { name: "flux_norm_rel", value: worst_norm, bound: v.flux_tol, pass: worst_norm <= v.flux_tol });
    out.push(Check {
        name: "flux_angle_deg",
        value: worst_angle,
        bound: v.flux_angle_deg,
        pass: worst_angle <= v.flux_angle_deg,
    });
    let bal = sum.norm() / scale;
    out.push(Check { name: "flux_balance_rel", value: bal, bound: 0.01, pass: bal <= 0.01 });
    out.push(Check { name: "flux_vertical", value: worst_vertical, bound: 0.02, pass: worst_vertical <= 0.02 });
    let c = total_curvature(surface, cfg.curvature_patch(poly))?;
    let expect = 4.0 * std::f64::consts::PI * poly.r() as f64;
    let rel = (c.total - expect).abs() / expect;
    out.push(Check { name: "total_curvature_rel", value: rel, bound: v.curvature_tol, pass: rel <= v.curvature_tol });
    let chi_ok = c.euler == -(poly.r() as i64);
    out.push(Check { name: "euler_characteristic", value: c.euler as f64, bound: -(poly.r() as f64), pass: chi_ok });
    Ok(out)
}

pub fn cmd_build_surface(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let (mesh, field, _) = solve_case(cfg, &poly)?;
    let frame = gradient_frame(&mesh, &field)?;
    let psi = psi_field(&mesh, &frame, None)?;
    let half = conjugate_surface(&mesh, &frame, &psi, None)?;
    let mut w = writer(cfg, ctx, "build-surface");
    w.put("half_surface.txt", "#", &write_surface(&half, ""))?;
    w.put("half_surface.idx", "#", &write_surface_index(&half, ""))?;
    let gap = closure_check(&half);
    let mut report = vec![Check {
        name: "closure_gap",
        value: gap,
        bound: cfg.validate.closure_tol,
        pass: gap <= cfg.validate.closure_tol,
    }];
    let glued = reflect_and_glue(&half, cfg.period.weld_tol);
    if let Ok(surface) = &glued {
        w.put("surface.txt", "#", &write_surface(surface, ""))?;
        w.put("surface.idx", "#", &write_surface_index(surface, ""))?;
        report.extend(surface_checks(cfg, &poly, surface)?);
    }
    let text: String = report.iter().map(|c| check_line(c) + "\n").collect();
    w.put("validate.txt", "#", &text)?;
    let status = match glued {
        Ok(_) => "closed".to_string(),
        Err(e) => format!("open ({})", e.kind()),
    };
    let fails = report.iter().filter(|c| !c.pass).count();
    Ok(w.done(format!("surface {status} gap {gap:.3e} checks {} failed {fails}", report.len())))
}

pub fn cmd_star(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let spec = cfg.star_spec()?.ok_or_else(|| config_err("star command needs polygon.star"))?;
    let poly = cfg.polygon()?;
    let opts = cfg.period_options(&poly);
    let z = symmetric_zero(spec, &opts)?;
    let mut w = writer(cfg, ctx, "star");
    w.put("surface.txt", "#", &write_surface(&z.surface, ""))?;
    w.put("surface.idx", "#", &write_surface_index(&z.surface, ""))?;
    let mut report = vec![Check {
        name: "period_norm",
        value: z.sample.raw.norm(),
        bound: 1e-6 * poly.diameter(),
        pass: z.sample.raw.norm() <= 1e-6 * poly.diameter(),
    }];
    let frame = gradient_frame(&z.mesh, &z.field)?;
    let gap = closure_check(&conjugate_surface(&z.mesh, &frame, &z.psi, None)?);
    report.push(Check { name: "closure_gap", value: gap, bound: cfg.validate.closure_tol, pass: gap <= cfg.validate.closure_tol });
    report.extend(surface_checks(cfg, &poly, &z.surface)?);
    let text: String = report.iter().map(|c| check_line(c) + "\n").collect();
    w.put("validate.txt", "#", &text)?;
    let fails = report.iter().filter(|c| !c.pass).count();
    Ok(w.done(format!(
        "star ({}, {}) |Per| {:.3e} c {:.6e} checks {} failed {fails}",
        spec.r(),
        spec.q(),
        z.sample.raw.norm(),
        z.sample.c,
        report.len()
    )))
}

/// Report on the configured case: strip bounds and the invariants of the
/// third coordinate; for star polygons also the surface checks.
pub fn cmd_validate(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let poly = cfg.polygon()?;
    let (mesh, field, _) = solve_case(cfg, &poly)?;
    let frame = gradient_frame(&mesh, &field)?;
    let psi = psi_field(&mesh, &frame, None)?;
    let mut report = Vec::new();
    for st in mesh.domain.strips() {
        let j = jenkins_check(&mesh, &field, st.index)?;
        report.push(Check { name: "jenkins_p_margin", value: j.p_margin, bound: 0.0, pass: j.p_margin >= 0.0 });
        report.push(Check { name: "jenkins_q_margin", value: j.q_margin, bound: 0.0, pass: j.q_margin >= 0.0 });
    }
    report.extend(psi_invariants(&mesh, &psi, cfg.validate.psi_tol));
    let c_ok = field.c < 0.0 && field.c.abs() > 1e-4;
    report.push(Check { name: "jump_negative", value: field.c, bound: -1e-4, pass: c_ok });
    let half = conjugate_surface(&mesh, &frame, &psi, None)?;
    let gap = closure_check(&half);
    report.push(Check { name: "closure_gap", value: gap, bound: cfg.validate.closure_tol, pass: gap <= cfg.validate.closure_tol });
    if let Some(spec) = cfg.star_spec()? {
        let z = symmetric_zero(spec, &cfg.period_options(&poly))?;
        report.extend(surface_checks(cfg, &poly, &z.surface)?);
    }
    let text: String = report.iter().map(|c| check_line(c) + "\n").collect();
    let mut w = writer(cfg, ctx, "validate");
    w.put("validate.txt", "#", &text)?;
    let fails = report.iter().filter(|c| !c.pass).count();
    Ok(w.done(format!("checks {} failed {fails}\n{}", report.len(), text.trim_end())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Solve,
    PerField,
    Degree,
    FindZero,
    BuildSurface,
    Star,
    Validate,
}

pub fn run(command: Command, cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    match command {
        Command::Mesh => cmd_mesh(cfg, ctx),
        Command::Solve => cmd_solve(cfg, ctx),
        Command::PerField => cmd_per_field(cfg, ctx),
        Command::Degree => cmd_degree(cfg, ctx),
        Command::FindZero => cmd_find_zero(cfg, ctx),
        Command::BuildSurface => cmd_build_surface(cfg, ctx),
        Command::Star => cmd_star(cfg, ctx),
        Command::Validate => cmd_validate(cfg, ctx),
    }
}

/// Single-line error report: the error kind, then the message.
pub fn error_line(e: &Error) -> String {
    format!("error {}: {}", e.kind(), e.to_string().replace('\n', " "))
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigError(_) => 2,
        _ => 1,
    }
}
