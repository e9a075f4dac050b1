//! Period map over puncture positions.
//!
//! `Per(A)` is the horizontal period of the conjugate surface built on the
//! domain punctured at `A`. Near an edge it tends to the outward normal of
//! that edge; near a vertex its limit is read off the chord of the convex
//! curve conjugate to the vertical line over the vertex in the unpunctured
//! solution. The winding of `Per` along an inset loop is the degree, and a
//! nonzero degree drives the zero search.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::conjugate::{
    conjugate_surface, gradient_frame, line_integral, period_vector, psi_field, reflect_and_glue, Form, PsiField,
    SurfaceMesh,
};
use crate::domain::{genus0_domain, move_puncture, triangulate, CutDomain, DomainMesh, MeshOptions, Tag};
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, V2};
use crate::polygon::{FluxPolygon, StarSpec};
use crate::solver::{continuation_solve, solve_from, BoundaryData, Level, SolutionField, SolveOptions};

/// Settings of one `Per` evaluation and of the searches built on it.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodOptions {
    /// Continuation schedule; the period is read on the last level.
    pub levels: Vec<Level>,
    pub grading: f64,
    pub vertex_slope: f64,
    pub solve: SolveOptions,
    /// Zero acceptance on `|raw|`, relative to the polygon diameter.
    pub tol: f64,
    /// Largest number of distinct `Per` evaluations in a zero search.
    pub budget: usize,
    /// Subdivision stops below this cell diameter, relative to the polygon.
    pub min_cell: f64,
    /// Weld tolerance when the half surface is doubled.
    pub weld_tol: f64,
}

impl PeriodOptions {
    /// Single level `M = 10`, `h = 0.1`, strips of 8 times the longest edge.
    pub fn for_polygon(poly: &FluxPolygon) -> Self {
        PeriodOptions {
            levels: vec![Level { m: 10.0, l: 8.0 * poly.max_edge(), h: 0.1 }],
            grading: 4.0,
            vertex_slope: 0.25,
            solve: SolveOptions::default(),
            tol: 1e-3,
            budget: 400,
            min_cell: 0.05,
            weld_tol: 1e-2,
        }
    }

    pub fn last(&self) -> Result<Level> {
        self.levels.last().copied().ok_or_else(|| Error::ConfigError("empty level schedule".into()))
    }

    pub fn mesh_options(&self, h: f64) -> MeshOptions {
        let mut mo = MeshOptions::new(h);
        mo.grading = self.grading;
        mo.vertex_slope = self.vertex_slope;
        mo
    }

    /// Text identifying everything a sample depends on.
    fn sample_key(&self) -> String {
        format!("{:?}|{:?}|{:?}|{:?}", self.levels, self.grading, self.vertex_slope, self.solve)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodSample {
    pub a: V2,
    pub raw: V2,
    pub renormalized: V2,
    pub third: f64,
    pub c: f64,
    pub newton_iters: usize,
}

/// `v` if it lies in the unit disk, else `v / |v|`.
pub fn renormalize(v: V2) -> V2 {
    let n = v.norm();
    if n <= 1.0 {
        v
    } else {
        v * (1.0 / n)
    }
}

fn sample_of(a: V2, mesh: &DomainMesh, field: &SolutionField) -> Result<(PeriodSample, PsiField)> {
    let frame = gradient_frame(mesh, field)?;
    let psi = psi_field(mesh, &frame, None)?;
    let pv = period_vector(mesh, &frame, &psi)?;
    let s = PeriodSample {
        a,
        raw: pv.horizontal,
        renormalized: renormalize(pv.horizontal),
        third: pv.third,
        c: field.c,
        newton_iters: field.newton_iters,
    };
    Ok((s, psi))
}

/// Full pipeline at one puncture: domain, mesh, continuation, period.
pub fn per_solve(a: V2, poly: &FluxPolygon, opts: &PeriodOptions) -> Result<(DomainMesh, SolutionField, PeriodSample)> {
    let last = opts.last()?;
    let rebuild = |l: f64| CutDomain::new(poly, a, l);
    let probe = |m: &DomainMesh, f: &SolutionField| -> Result<f64> { Ok(sample_of(a, m, f)?.0.raw.norm()) };
    let probe: Option<&dyn Fn(&DomainMesh, &SolutionField) -> Result<f64>> =
        if opts.levels.len() > 1 { Some(&probe) } else { None };
    let (mesh, field, _) = continuation_solve(
        &rebuild,
        &opts.levels,
        &opts.mesh_options(last.h),
        &BoundaryData::new(last.m),
        &opts.solve,
        probe,
    )?;
    let (s, _) = sample_of(a, &mesh, &field)?;
    Ok((mesh, field, s))
}

pub fn per(a: V2, poly: &FluxPolygon, opts: &PeriodOptions) -> Result<PeriodSample> {
    Ok(per_solve(a, poly, opts)?.2)
}

/// Puncture snapped to the 1e-9 grid used by the cache.
pub fn quantize(a: V2) -> V2 {
    V2::new((a.x * 1e9).round() / 1e9, (a.y * 1e9).round() / 1e9)
}

/// Memo of `Per` samples, optionally backed by one file per sample.
#[derive(Debug, Default)]
pub struct PeriodCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, PeriodSample>>,
}

impl PeriodCache {
    pub fn in_memory() -> Self {
        PeriodCache::default()
    }

    pub fn on_disk(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(PeriodCache { dir: Some(dir.to_path_buf()), mem: Mutex::default() })
    }

    pub fn key(poly: &FluxPolygon, a: V2, opts: &PeriodOptions) -> String {
        use sha2::{Digest, Sha256};
        let q = quantize(a);
        let mut h = Sha256::new();
        h.update(poly.fingerprint().to_le_bytes());
        h.update(((q.x * 1e9).round() as i64).to_le_bytes());
        h.update(((q.y * 1e9).round() as i64).to_le_bytes());
        h.update(opts.sample_key().as_bytes());
        h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.mem.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn load(&self, key: &str) -> Option<PeriodSample> {
        let text = fs::read_to_string(self.dir.as_ref()?.join(format!("{key}.per"))).ok()?;
        let tok: Vec<&str> = text.split_whitespace().collect();
        if tok.len() != 9 {
            return None;
        }
        let v: Vec<f64> = tok[..8].iter().map(|t| t.parse().ok()).collect::<Option<_>>()?;
        Some(PeriodSample {
            a: V2::new(v[0], v[1]),
            raw: V2::new(v[2], v[3]),
            renormalized: V2::new(v[4], v[5]),
            third: v[6],
            c: v[7],
            newton_iters: tok[8].parse().ok()?,
        })
    }

    fn store(&self, key: &str, s: &PeriodSample) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let text = format!(
            "{:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {}\n",
            s.a.x, s.a.y, s.raw.x, s.raw.y, s.renormalized.x, s.renormalized.y, s.third, s.c, s.newton_iters
        );
        write_atomic(&dir.join(format!("{key}.per")), text.as_bytes())
    }

    pub fn get_or_compute(&self, key: &str, f: impl FnOnce() -> Result<PeriodSample>) -> Result<PeriodSample> {
        if let Some(s) = self.mem.lock().unwrap().get(key) {
            return Ok(*s);
        }
        if let Some(s) = self.load(key) {
            self.mem.lock().unwrap().insert(key.to_string(), s);
            return Ok(s);
        }
        let s = f()?;
        self.store(key, &s)?;
        self.mem.lock().unwrap().insert(key.to_string(), s);
        Ok(s)
    }
}

/// Write to a temporary sibling, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `Per` over one polygon with shared options and cache.
pub struct PeriodMap<'a> {
    pub poly: &'a FluxPolygon,
    pub opts: &'a PeriodOptions,
    pub cache: &'a PeriodCache,
    /// Worker threads for batches; 0 uses the global pool.
    pub jobs: usize,
}

impl PeriodMap<'_> {
    pub fn sample(&self, a: V2) -> Result<PeriodSample> {
        let a = quantize(a);
        let key = PeriodCache::key(self.poly, a, self.opts);
        self.cache.get_or_compute(&key, || per(a, self.poly, self.opts))
    }

    /// Samples in input order; evaluation runs on the worker pool.
    pub fn samples(&self, pts: &[V2]) -> Result<Vec<PeriodSample>> {
        let run = || pts.par_iter().map(|&a| self.sample(a)).collect::<Vec<_>>();
        let out = if self.jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build()
                .map_err(|e| Error::ConfigError(format!("worker pool: {e}")))?
                .install(run)
        } else {
            run()
        };
        out.into_iter().collect()
    }
}

/// Limit of `Per` at an interior point of edge `i`: its outward normal.
pub fn edge_limit(poly: &FluxPolygon, i: usize, t: f64) -> V2 {
    debug_assert!(t > 0.0 && t < 1.0);
    poly.outward_normal(i % poly.r())
}

/// Unit vector along edge `i` out of `P_i`; the local frame at the vertex
/// is this vector and its left normal, so the other edge leaves at the
/// interior angle.
pub fn vertex_frame(poly: &FluxPolygon, i: usize) -> V2 {
    poly.edge(i % poly.r()).unit()
}

pub fn local_to_global(poly: &FluxPolygon, i: usize, v: V2) -> V2 {
    let e = vertex_frame(poly, i);
    e * v.x + e.perp() * v.y
}

pub fn global_to_local(poly: &FluxPolygon, i: usize, v: V2) -> V2 {
    let e = vertex_frame(poly, i);
    V2::new(v.dot(e), v.dot(e.perp()))
}

/// Convex polyline parametrized by the direction angle of its
/// counterclockwise tangent.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalCurve {
    /// Increasing knot angles, one per point.
    pub beta: Vec<f64>,
    pub points: Vec<V2>,
}

impl NormalCurve {
    pub fn range(&self) -> (f64, f64) {
        (self.beta[0], *self.beta.last().unwrap())
    }

    pub fn turning(&self) -> f64 {
        let (a, b) = self.range();
        b - a
    }

    /// Point with tangent angle `beta`, clamped to the ends.
    pub fn at(&self, beta: f64) -> V2 {
        let n = self.beta.len();
        if beta <= self.beta[0] {
            return self.points[0];
        }
        if beta >= self.beta[n - 1] {
            return self.points[n - 1];
        }
        let k = self.beta.partition_point(|&b| b <= beta) - 1;
        let s = (beta - self.beta[k]) / (self.beta[k + 1] - self.beta[k]);
        self.points[k].lerp(self.points[k + 1], s)
    }
}

/// Parametrize a strictly convex polyline by its tangent angle. The curve
/// is reoriented to turn counterclockwise; interior points get the mean
/// angle of their two segments, the end points the angle of their segment.
pub fn normal_parametrize(curve: &[V2]) -> Result<NormalCurve> {
    if curve.len() < 3 {
        return Err(Error::NotStrictlyConvex(format!("{} points", curve.len())));
    }
    let seg_angles = |pts: &[V2]| -> Result<Vec<f64>> {
        pts.windows(2)
            .enumerate()
            .map(|(k, w)| {
                let d = w[1] - w[0];
                if d.norm() == 0.0 {
                    Err(Error::NotStrictlyConvex(format!("segment {k} has zero length")))
                } else {
                    Ok(d.angle())
                }
            })
            .collect()
    };
    let mut pts = curve.to_vec();
    let mut ang = seg_angles(&pts)?;
    let total: f64 = ang.windows(2).map(|w| wrap_angle(w[1] - w[0])).sum();
    if total < 0.0 {
        pts.reverse();
        ang = seg_angles(&pts)?;
    }
    let mut t = vec![ang[0]];
    for w in ang.windows(2) {
        let turn = wrap_angle(w[1] - w[0]);
        if turn <= 0.0 {
            return Err(Error::NotStrictlyConvex(format!("turning {turn:e} after segment {}", t.len() - 1)));
        }
        t.push(t.last().unwrap() + turn);
    }
    let mut beta = Vec::with_capacity(pts.len());
    beta.push(t[0]);
    for k in 1..pts.len() - 1 {
        beta.push(0.5 * (t[k - 1] + t[k]));
    }
    beta.push(*t.last().unwrap());
    Ok(NormalCurve { beta, points: pts })
}

/// Drop the points where a polyline turns against its overall sense, so
/// that discretization wiggles do not break strict convexity.
pub fn convex_part(mut pts: Vec<V2>) -> Vec<V2> {
    let total: f64 = pts.windows(3).map(|w| (w[1] - w[0]).cross(w[2] - w[1])).sum();
    if total < 0.0 {
        pts.reverse();
    }
    let mut out: Vec<V2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_some_and(|q| q.dist(p) == 0.0) {
            continue;
        }
        while out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            if (b - a).cross(p - b) > 0.0 {
                break;
            }
            out.pop();
        }
        out.push(p);
    }
    out
}

/// Conjugate curve of the vertical line over a vertex, in the vertex frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexCurve {
    pub vertex: usize,
    pub alpha: f64,
    pub curve: NormalCurve,
}

/// Integrate the horizontal conjugate forms along every vertex arc of the
/// unpunctured solution.
pub fn vertex_curves(poly: &FluxPolygon, opts: &PeriodOptions) -> Result<Vec<VertexCurve>> {
    let last = opts.last()?;
    let mesh = genus0_domain(poly, last.l, &opts.mesh_options(last.h))?;
    let field = solve_from(&mesh, &BoundaryData::new(last.m), &opts.solve, None)?;
    let frame = gradient_frame(&mesh, &field)?;
    let alphas = poly.interior_angles();
    (0..poly.r())
        .map(|i| {
            let chain = mesh.chain(Tag::VertexArc(i));
            if chain.len() < 4 {
                return Err(Error::CurveExtractionFailed(format!("vertex {i}: arc has {} nodes", chain.len())));
            }
            let mut pts = vec![V2::ZERO];
            for w in chain.windows(2) {
                let d = V2::new(
                    line_integral(&mesh, &frame, Form::X1, w)?,
                    line_integral(&mesh, &frame, Form::X2, w)?,
                );
                pts.push(*pts.last().unwrap() + global_to_local(poly, i, d));
            }
            let mut curve = normal_parametrize(&convex_part(pts))
                .map_err(|e| Error::CurveExtractionFailed(format!("vertex {i}: {e}")))?;
            // the ends are long straight rays whose directions are known
            // exactly; the coarse end chords only approximate them
            let n = curve.beta.len();
            curve.beta[0] = curve.beta[0].min(-FRAC_PI_2);
            curve.beta[n - 1] = curve.beta[n - 1].max(alphas[i] + FRAC_PI_2);
            Ok(VertexCurve { vertex: i, alpha: alphas[i], curve })
        })
        .collect()
}

/// Limit of `Per` when the puncture tends to the vertex along the direction
/// at angle `theta` in `[0, alpha]` from the edge out of it, in the vertex
/// frame. The ends are exact; inside it is the chord
/// `gamma(theta + pi/2) - gamma(theta - pi/2)` of the vertex curve,
/// renormalized.
pub fn vertex_limit(curve: &VertexCurve, theta: f64) -> V2 {
    let alpha = curve.alpha;
    let theta = theta.clamp(0.0, alpha);
    if theta == 0.0 {
        return V2::new(0.0, -1.0);
    }
    if theta == alpha {
        return V2::new(-alpha.sin(), alpha.cos());
    }
    let g = &curve.curve;
    renormalize(g.at(theta + FRAC_PI_2) - g.at(theta - FRAC_PI_2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum LoopPiece {
    Line(V2, V2),
    Arc { center: V2, radius: f64, start: f64, sweep: f64 },
}

impl LoopPiece {
    fn at(&self, s: f64) -> V2 {
        match *self {
            LoopPiece::Line(a, b) => a.lerp(b, s),
            LoopPiece::Arc { center, radius, start, sweep } => center + V2::polar(radius, start + sweep * s),
        }
    }

    fn length(&self) -> f64 {
        match *self {
            LoopPiece::Line(a, b) => a.dist(b),
            LoopPiece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }
}

/// Counterclockwise loop inside the polygon: runs parallel to the edges at
/// distance `delta`, joined by arcs around the vertices covering the middle
/// half of each interior angle.
#[derive(Clone, Debug, PartialEq)]
pub struct InsetLoop {
    pieces: Vec<LoopPiece>,
    /// Cumulative parameter at the start of each piece, ending at 1.
    breaks: Vec<f64>,
    /// Arc radius around each vertex.
    pub radii: Vec<f64>,
}

impl InsetLoop {
    pub fn new(poly: &FluxPolygon, delta: f64) -> Result<Self> {
        let r = poly.r();
        let alphas = poly.interior_angles();
        let radii: Vec<f64> = alphas.iter().map(|a| delta / (0.25 * a).sin()).collect();
        let mut limit = (0.25 * poly.inradius()).min(0.25 * poly.min_edge());
        for i in 0..r {
            let j = (i + 1) % r;
            let need = (0.25 * alphas[i]).cos() / (0.25 * alphas[i]).sin()
                + (0.25 * alphas[j]).cos() / (0.25 * alphas[j]).sin();
            limit = limit.min(0.9 * poly.edge(i).norm() / need);
        }
        if !(delta > 0.0 && delta < limit) {
            return Err(Error::InsetTooLarge { delta, limit });
        }
        let mut pieces = Vec::new();
        let mut weights = Vec::new();
        let mut run_total = 0.0;
        for i in 0..r {
            let j = (i + 1) % r;
            let ei = vertex_frame(poly, i);
            let ej = vertex_frame(poly, j);
            let from = poly.vertex(i) + local_to_global(poly, i, V2::polar(radii[i], 0.25 * alphas[i]));
            let to = poly.vertex(j) + local_to_global(poly, j, V2::polar(radii[j], 0.75 * alphas[j]));
            let run = LoopPiece::Line(from, to);
            run_total += run.length();
            pieces.push(run);
            weights.push(run.length());
            // around P_j the loop turns from the edge into P_j to the edge out of it
            let arc = LoopPiece::Arc {
                center: poly.vertex(j),
                radius: radii[j],
                start: ej.angle() + 0.75 * alphas[j],
                sweep: -0.5 * alphas[j],
            };
            debug_assert!(arc.at(0.0).dist(to) < 1e-9 * (1.0 + radii[j]) || ei == ej);
            pieces.push(arc);
            weights.push(f64::NAN);
        }
        // the arcs together get as many samples as the runs
        for w in weights.iter_mut().filter(|w| w.is_nan()) {
            *w = run_total / r as f64;
        }
        let total: f64 = weights.iter().sum();
        let mut breaks = vec![0.0];
        for w in &weights {
            breaks.push(breaks.last().unwrap() + w / total);
        }
        *breaks.last_mut().unwrap() = 1.0;
        Ok(InsetLoop { pieces, breaks, radii })
    }

    /// Point at loop parameter `s` (taken modulo 1).
    pub fn at(&self, s: f64) -> V2 {
        let s = s.rem_euclid(1.0);
        let k = (self.breaks.partition_point(|&b| b <= s) - 1).min(self.pieces.len() - 1);
        let local = (s - self.breaks[k]) / (self.breaks[k + 1] - self.breaks[k]);
        self.pieces[k].at(local)
    }

    /// Middle point of the arc around each vertex.
    pub fn corners(&self) -> Vec<V2> {
        self.pieces.iter().filter(|p| matches!(p, LoopPiece::Arc { .. })).map(|p| p.at(0.5)).collect()
    }
}

/// `n` punctures along the inset loop, counterclockwise.
pub fn boundary_loop(poly: &FluxPolygon, delta: f64, n: usize) -> Result<Vec<V2>> {
    let need = 8 * poly.r();
    if n < need {
        return Err(Error::TooFewSamples { got: n, need });
    }
    let lp = InsetLoop::new(poly, delta)?;
    Ok((0..n).map(|k| lp.at(k as f64 / n as f64)).collect())
}

/// Turns of a closed sequence of vectors around the origin.
pub fn winding_number(samples: &[V2]) -> Result<i64> {
    if let Some(k) = samples.iter().position(|v| v.norm() < 1e-6) {
        return Err(Error::ZeroOnLoop(k));
    }
    let mut total = 0.0;
    for k in 0..samples.len() {
        let d = wrap_angle(samples[(k + 1) % samples.len()].angle() - samples[k].angle());
        if d.abs() >= FRAC_PI_2 {
            return Err(Error::Undersampled(d));
        }
        total += d;
    }
    Ok((total / TAU).round() as i64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeReport {
    pub winding: i64,
    pub delta: f64,
    /// Loop parameter of each sample.
    pub params: Vec<f64>,
    pub samples: Vec<PeriodSample>,
}

/// Winding of `Per` along the inset loop with `n` samples. Where two
/// neighbours are a quarter turn or more apart the loop is bisected, at
/// most `refine` times.
pub fn degree(map: &PeriodMap, delta: f64, n: usize, refine: usize) -> Result<DegreeReport> {
    boundary_loop(map.poly, delta, n)?;
    let lp = InsetLoop::new(map.poly, delta)?;
    let mut params: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    let mut samples = map.samples(&params.iter().map(|&s| lp.at(s)).collect::<Vec<_>>())?;
    for _ in 0..=refine {
        let vals: Vec<V2> = samples.iter().map(|s| s.renormalized).collect();
        match winding_number(&vals) {
            Ok(w) => return Ok(DegreeReport { winding: w, delta, params, samples }),
            Err(Error::Undersampled(_)) => {}
            Err(e) => return Err(e),
        }
        let m = params.len();
        let mut new_params = Vec::new();
        let mut insert_at = Vec::new();
        for k in 0..m {
            let d = wrap_angle(vals[(k + 1) % m].angle() - vals[k].angle());
            if d.abs() >= FRAC_PI_2 {
                let next = if k + 1 == m { 1.0 } else { params[k + 1] };
                new_params.push(0.5 * (params[k] + next));
                insert_at.push(k);
            }
        }
        let new_samples = map.samples(&new_params.iter().map(|&s| lp.at(s)).collect::<Vec<_>>())?;
        for (j, &k) in insert_at.iter().enumerate().rev() {
            params.insert(k + 1, new_params[j]);
            samples.insert(k + 1, new_samples[j]);
        }
    }
    let vals: Vec<V2> = samples.iter().map(|s| s.renormalized).collect();
    Err(winding_number(&vals).err().unwrap_or(Error::Undersampled(PI)))
}

/// Angle swept by `f` along the segment `[a, b]`, bisected until
/// neighbouring values are less than `max_gap` apart.
fn segment_turn(f: &dyn Fn(V2) -> Result<V2>, a: V2, b: V2, max_gap: f64, depth: usize) -> Result<f64> {
    let (fa, fb) = (f(a)?, f(b)?);
    if fa.norm() < 1e-12 || fb.norm() < 1e-12 {
        return Err(Error::ZeroOnLoop(0));
    }
    let d = wrap_angle(fb.angle() - fa.angle());
    if d.abs() < max_gap {
        return Ok(d);
    }
    if depth == 0 {
        return Err(Error::Undersampled(d));
    }
    let m = a.lerp(b, 0.5);
    Ok(segment_turn(f, a, m, max_gap, depth - 1)? + segment_turn(f, m, b, max_gap, depth - 1)?)
}

/// Winding of `f` along the boundary of a counterclockwise triangle.
pub fn triangle_winding(f: &dyn Fn(V2) -> Result<V2>, t: [V2; 3]) -> Result<i64> {
    let mut total = 0.0;
    for k in 0..3 {
        total += segment_turn(f, t[k], t[(k + 1) % 3], 0.375 * PI, 6)?;
    }
    Ok((total / TAU).round() as i64)
}

/// Outcome of the winding-guided subdivision.
#[derive(Clone, Debug, PartialEq)]
pub struct Subdivision {
    /// Cells visited with their winding, `None` where a value was too close
    /// to zero to resolve it.
    pub cells: Vec<([V2; 3], Option<i64>)>,
    pub root_winding: i64,
    /// Smallest cell known to hold a zero.
    pub cell: Option<[V2; 3]>,
}

fn cell_size(t: &[V2; 3]) -> f64 {
    (0..3).map(|k| t[k].dist(t[(k + 1) % 3])).fold(0.0, f64::max)
}

/// Split each root triangle into four, depth first, following cells whose
/// boundary winding is nonzero, until one is smaller than `min_size`. A
/// cell whose winding cannot be resolved has a zero near its boundary and
/// ends the search as well. `spent` is polled to enforce a budget.
pub fn subdivide(
    f: &dyn Fn(V2) -> Result<V2>,
    roots: &[[V2; 3]],
    min_size: f64,
    spent: &dyn Fn() -> bool,
) -> Result<Subdivision> {
    let mut out = Subdivision { cells: Vec::new(), root_winding: 0, cell: None };
    let mut stack = Vec::new();
    let classify = |t: [V2; 3], out: &mut Subdivision| -> Result<Option<i64>> {
        let w = match triangle_winding(f, t) {
            Ok(w) => Some(w),
            Err(Error::Undersampled(_) | Error::ZeroOnLoop(_)) => None,
            Err(e) => return Err(e),
        };
        out.cells.push((t, w));
        Ok(w)
    };
    for &t in roots {
        match classify(t, &mut out)? {
            None => {
                out.cell = Some(t);
                return Ok(out);
            }
            Some(w) => {
                out.root_winding += w;
                if w != 0 {
                    stack.push(t);
                }
            }
        }
    }
    stack.reverse();
    while let Some(t) = stack.pop() {
        if cell_size(&t) <= min_size {
            out.cell = Some(t);
            return Ok(out);
        }
        if spent() {
            return Ok(out);
        }
        let m = [t[0].lerp(t[1], 0.5), t[1].lerp(t[2], 0.5), t[2].lerp(t[0], 0.5)];
        let kids = [[t[0], m[0], m[2]], [m[0], t[1], m[1]], [m[2], m[1], t[2]], [m[1], m[2], m[0]]];
        let mut next = Vec::new();
        for k in kids {
            match classify(k, &mut out)? {
                None => {
                    out.cell = Some(k);
                    return Ok(out);
                }
                Some(0) => {}
                Some(_) => next.push(k),
            }
        }
        // depth first, first child on top
        stack.extend(next.into_iter().rev());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroReport {
    pub a: V2,
    pub sample: PeriodSample,
    pub search: Subdivision,
    /// Distinct punctures sampled during the subdivision.
    pub evaluations: usize,
    pub polish_steps: usize,
}

/// Zero of `Per`: subdivide a fan of triangles inside the inset loop,
/// following cells with nonzero winding, then polish with Broyden steps on
/// a mesh whose puncture moves with the iterate.
pub fn find_zero(map: &PeriodMap, delta: f64) -> Result<ZeroReport> {
    let poly = map.poly;
    let diam = poly.diameter();
    let corners = InsetLoop::new(poly, delta)?.corners();
    let center = poly.centroid();
    let r = poly.r();
    let seen = Mutex::new(Vec::<PeriodSample>::new());
    let f = |a: V2| -> Result<V2> {
        let s = map.sample(a)?;
        seen.lock().unwrap().push(s);
        Ok(s.raw)
    };
    let at_center = map.sample(center)?;
    let roots: Vec<[V2; 3]> = (0..r).map(|i| [center, corners[i], corners[(i + 1) % r]]).collect();
    let search = if at_center.raw.norm() <= map.opts.tol * diam {
        Subdivision { cells: Vec::new(), root_winding: 0, cell: Some([center; 3]) }
    } else {
        subdivide(&f, &roots, map.opts.min_cell * diam, &|| map.cache.len() > map.opts.budget)?
    };
    let mut seen = seen.into_inner().unwrap();
    seen.push(at_center);
    let best = seen.iter().min_by(|a, b| a.raw.norm().total_cmp(&b.raw.norm())).copied().unwrap();
    if search.cell.is_none() {
        return Err(Error::NoZeroFound(best.raw.norm()));
    }
    let start = if best.raw.norm() <= map.opts.tol * diam {
        best.a
    } else {
        // smallest value on the final cell, its centroid included
        let t = search.cell.unwrap();
        let mut cands = t.to_vec();
        cands.push((t[0] + t[1] + t[2]) * (1.0 / 3.0));
        let vals = map.samples(&cands)?;
        vals.iter().min_by(|a, b| a.raw.norm().total_cmp(&b.raw.norm())).unwrap().a
    };
    let (a, sample, steps, _) = polish(poly, map.opts, start)?;
    Ok(ZeroReport { a, sample, search, evaluations: map.cache.len(), polish_steps: steps })
}

/// Broyden iteration for `Per(a) = 0` from `start`. The mesh is built once
/// and its puncture is moved with the iterate so that `Per` is smooth in
/// `a`; it is rebuilt if the iterate wanders too far.
pub fn polish(poly: &FluxPolygon, opts: &PeriodOptions, start: V2) -> Result<(V2, PeriodSample, usize, usize)> {
    let last = opts.last()?;
    let diam = poly.diameter();
    let target = opts.tol * diam;
    let bc = BoundaryData::new(last.m);
    let mo = opts.mesh_options(last.h);
    let mut reference = triangulate(&CutDomain::new(poly, start, last.l)?, &mo)?;
    let mut anchor = start;
    let mut warm: Option<SolutionField> = None;
    let mut evals = 0;
    let mut eval = |reference: &DomainMesh, a: V2, warm: &mut Option<SolutionField>| -> Result<PeriodSample> {
        let mesh = move_puncture(reference, a)?;
        let field = solve_from(&mesh, &bc, &opts.solve, warm.as_ref())?;
        let (s, _) = sample_of(a, &mesh, &field)?;
        *warm = Some(field);
        evals += 1;
        Ok(s)
    };
    let jacobian = |reference: &DomainMesh,
                    a: V2,
                    f: V2,
                    warm: &mut Option<SolutionField>,
                    eval: &mut dyn FnMut(&DomainMesh, V2, &mut Option<SolutionField>) -> Result<PeriodSample>|
     -> Result<[V2; 2]> {
        let step = 2e-3 * diam;
        let fx = eval(reference, a + V2::new(step, 0.0), warm)?.raw;
        let fy = eval(reference, a + V2::new(0.0, step), warm)?.raw;
        Ok([(fx - f) * (1.0 / step), (fy - f) * (1.0 / step)])
    };
    let mut a = start;
    let mut s = eval(&reference, a, &mut warm)?;
    let mut j = jacobian(&reference, a, s.raw, &mut warm, &mut eval)?;
    let mut steps = 0;
    while s.raw.norm() > target {
        if steps >= 30 {
            return Err(Error::NoZeroFound(s.raw.norm()));
        }
        steps += 1;
        // columns of j are dPer/dx and dPer/dy
        let det = j[0].cross(j[1]);
        if det.abs() < 1e-14 {
            return Err(Error::NoZeroFound(s.raw.norm()));
        }
        let f = s.raw;
        let mut da = V2::new(f.cross(j[1]), j[0].cross(f)) * (-1.0 / det);
        let cap = 0.1 * diam;
        if da.norm() > cap {
            da = da * (cap / da.norm());
        }
        let mut next = a + da;
        let margin = 0.02 * diam;
        while poly.contains(next).1 < margin || !poly.contains(next).0 {
            da = da * 0.5;
            next = a + da;
            if da.norm() < 1e-12 {
                return Err(Error::NoZeroFound(s.raw.norm()));
            }
        }
        if next.dist(anchor) > 0.1 * diam {
            reference = triangulate(&CutDomain::new(poly, next, last.l)?, &mo)?;
            anchor = next;
            warm = None;
            a = next;
            s = eval(&reference, a, &mut warm)?;
            j = jacobian(&reference, a, s.raw, &mut warm, &mut eval)?;
            continue;
        }
        let sn = eval(&reference, next, &mut warm)?;
        let df = sn.raw - f;
        // rank-one update so that j da = df
        let jd = j[0] * da.x + j[1] * da.y;
        let k = (df - jd) * (1.0 / da.norm2());
        j = [j[0] + k * da.x, j[1] + k * da.y];
        a = next;
        s = sn;
    }
    Ok((a, s, steps, evals))
}

#[derive(Clone, Debug)]
pub struct SymmetricZero {
    pub spec: StarSpec,
    pub a: V2,
    pub sample: PeriodSample,
    pub mesh: DomainMesh,
    pub field: SolutionField,
    pub psi: PsiField,
    /// Doubled surface, all rotated copies welded.
    pub surface: SurfaceMesh,
}

/// The star polygon with unit edges, centered at the rotation center.
pub fn unit_star(spec: StarSpec) -> FluxPolygon {
    let p = FluxPolygon::star(spec);
    let e = p.edge(0).norm();
    p.scaled(1.0 / e)
}

/// Zero of the period at the rotation center of a star polygon: solve on
/// the fundamental sector and build the surface from its rotated copies.
pub fn symmetric_zero(spec: StarSpec, opts: &PeriodOptions) -> Result<SymmetricZero> {
    let last = opts.last()?;
    let poly = unit_star(spec);
    let scale = poly.edge(0).norm() / FluxPolygon::star(spec).edge(0).norm();
    let domain = CutDomain::star_scaled(spec, scale, last.l)?;
    let mesh = triangulate(&domain, &opts.mesh_options(last.h))?;
    let field = solve_from(&mesh, &BoundaryData::new(last.m), &opts.solve, None)?;
    let (sample, psi) = sample_of(V2::ZERO, &mesh, &field)?;
    let tol = opts.tol * poly.diameter();
    if sample.raw.norm() > tol {
        return Err(Error::SymmetryViolation(format!("period {:e} above {tol:e}", sample.raw.norm())));
    }
    let frame = gradient_frame(&mesh, &field)?;
    let half = conjugate_surface(&mesh, &frame, &psi, Some(tol))?;
    let surface = reflect_and_glue(&half, opts.weld_tol)?;
    Ok(SymmetricZero { spec, a: V2::ZERO, sample, mesh, field, psi, surface })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> FluxPolygon {
        let s = 3f64.sqrt() / 2.0;
        FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)]).unwrap()
    }

    fn square() -> FluxPolygon {
        FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(0.0, 1.0), V2::new(-1.0, 0.0), V2::new(0.0, -1.0)])
            .unwrap()
    }

    #[test]
    fn renormalization_clamps_to_the_unit_disk() {
        assert_eq!(renormalize(V2::new(0.3, -0.4)), V2::new(0.3, -0.4));
        let v = renormalize(V2::new(3.0, 4.0));
        assert!((v - V2::new(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn edge_limits_are_outward_normals() {
        let sq = square();
        assert_eq!(edge_limit(&sq, 0, 0.5), V2::new(0.0, -1.0));
        assert_eq!(edge_limit(&sq, 0, 0.25), V2::new(0.0, -1.0));
        let t = tri();
        let expect = t.edge(2).rotate(-FRAC_PI_2) * (1.0 / t.edge(2).norm());
        assert!((edge_limit(&t, 2, 0.5) - expect).norm() < 1e-15);
    }

    #[test]
    fn normal_parametrization_of_a_circle() {
        let c = V2::new(0.5, -1.0);
        let pts: Vec<V2> = (0..=64).map(|k| c + V2::polar(2.0, FRAC_PI_2 * k as f64 / 64.0)).collect();
        let g = normal_parametrize(&pts).unwrap();
        assert!((g.turning() - FRAC_PI_2).abs() < 0.03);
        for k in 1..20 {
            let b = FRAC_PI_2 + FRAC_PI_2 * k as f64 / 20.0;
            let exact = c + V2::new(b.sin(), -b.cos()) * 2.0;
            assert!(g.at(b).dist(exact) < 2e-3, "{b}");
        }
        // reversed input, same parametrization
        let rev: Vec<V2> = pts.iter().rev().copied().collect();
        assert_eq!(normal_parametrize(&rev).unwrap(), g);
        let line: Vec<V2> = (0..5).map(|k| V2::new(k as f64, 0.0)).collect();
        assert!(matches!(normal_parametrize(&line), Err(Error::NotStrictlyConvex(_))));
    }

    #[test]
    fn winding_of_synthetic_fields() {
        let circle: Vec<V2> = (0..16).map(|k| V2::polar(0.3, TAU * k as f64 / 16.0)).collect();
        assert_eq!(winding_number(&vec![V2::new(1.0, 0.0); 16]).unwrap(), 0);
        let a0 = V2::new(0.2, 0.1);
        let pts: Vec<V2> = circle.iter().map(|&p| p + a0).collect();
        assert_eq!(winding_number(&pts.iter().map(|&p| p - a0).collect::<Vec<_>>()).unwrap(), 1);
        let conj: Vec<V2> = circle.iter().map(|p| V2::new(p.x, -p.y)).collect();
        assert_eq!(winding_number(&conj).unwrap(), -1);
        let square: Vec<V2> = (0..16).map(|k| V2::polar(1.0, 2.0 * TAU * k as f64 / 16.0)).collect();
        assert_eq!(winding_number(&square).unwrap(), 2);
        let coarse: Vec<V2> = (0..3).map(|k| V2::polar(1.0, TAU * k as f64 / 3.0)).collect();
        assert!(matches!(winding_number(&coarse), Err(Error::Undersampled(_))));
        let mut zero = circle.clone();
        zero[5] = V2::ZERO;
        assert!(matches!(winding_number(&zero), Err(Error::ZeroOnLoop(5))));
    }

    #[test]
    fn inset_loop_geometry() {
        for poly in [tri(), square()] {
            let pts = boundary_loop(&poly, 0.05, 8 * poly.r() * 2).unwrap();
            let mut area = 0.0;
            for k in 0..pts.len() {
                let (inside, dist) = poly.contains(pts[k]);
                assert!(inside && dist > 0.02, "{:?}", pts[k]);
                area += pts[k].cross(pts[(k + 1) % pts.len()]);
                // consecutive samples stay close
                assert!(pts[k].dist(pts[(k + 1) % pts.len()]) < 0.3);
            }
            assert!(area > 0.0);
            let lp = InsetLoop::new(&poly, 0.05).unwrap();
            for s in 0..200 {
                let (a, b) = (lp.at(s as f64 / 200.0), lp.at((s as f64 + 1e-6) / 200.0));
                assert!(a.dist(b) < 1e-6);
            }
        }
        assert!(matches!(boundary_loop(&tri(), 0.05, 3), Err(Error::TooFewSamples { .. })));
        assert!(matches!(boundary_loop(&tri(), 0.3, 48), Err(Error::InsetTooLarge { .. })));
    }

    #[test]
    fn cache_keys_and_files() {
        let t = tri();
        let opts = PeriodOptions::for_polygon(&t);
        let a = V2::new(0.5, 0.3);
        assert_eq!(PeriodCache::key(&t, a, &opts), PeriodCache::key(&t, a + V2::new(1e-11, 0.0), &opts));
        assert_ne!(PeriodCache::key(&t, a, &opts), PeriodCache::key(&t, a + V2::new(1e-8, 0.0), &opts));
        let mut o2 = opts.clone();
        o2.levels[0].h = 0.2;
        assert_ne!(PeriodCache::key(&t, a, &opts), PeriodCache::key(&t, a, &o2));
        let dir = tempfile::tempdir().unwrap();
        let s = PeriodSample {
            a,
            raw: V2::new(0.1, -2.0 / 3.0),
            renormalized: V2::new(0.1, -2.0 / 3.0),
            third: 1e-17,
            c: -0.7,
            newton_iters: 12,
        };
        let c1 = PeriodCache::on_disk(dir.path()).unwrap();
        assert_eq!(c1.get_or_compute("k", || Ok(s)).unwrap(), s);
        let c2 = PeriodCache::on_disk(dir.path()).unwrap();
        assert_eq!(c2.get_or_compute("k", || Err(Error::NoZeroFound(0.0))).unwrap(), s);
    }

    #[test]
    fn per_near_an_edge_and_at_the_barycenter() {
        let t = tri();
        let mut opts = PeriodOptions::for_polygon(&t);
        opts.levels[0].h = 0.15;
        let near = per(V2::new(0.5, 0.05), &t, &opts).unwrap();
        assert!((near.renormalized - edge_limit(&t, 0, 0.5)).norm() < 0.15, "{near:?}");
        let center = per(t.centroid(), &t, &opts).unwrap();
        assert!(center.raw.norm() < 0.05, "{center:?}");
        assert!(center.third.abs() < 1e-8);
        assert!(center.c < 0.0);
        assert_eq!(per(t.centroid(), &t, &opts).unwrap(), center);
    }

    #[test]
    fn vertex_curves_of_the_triangle() {
        let t = tri();
        let mut opts = PeriodOptions::for_polygon(&t);
        opts.levels[0].h = 0.15;
        let curves = vertex_curves(&t, &opts).unwrap();
        let alpha = PI / 3.0;
        for vc in &curves {
            let (lo, hi) = vc.curve.range();
            assert!((lo + FRAC_PI_2).abs() < 0.1 && (hi - alpha - FRAC_PI_2).abs() < 0.1, "{lo} {hi}");
            assert!(vc.curve.beta.windows(2).all(|w| w[1] > w[0]));
            // most of the turning is resolved by the arc nodes themselves
            let inner = vc.curve.beta[vc.curve.beta.len() - 2] - vc.curve.beta[1];
            assert!(inner > 0.6 * (alpha + PI), "{inner}");
            assert_eq!(vertex_limit(vc, 0.0), V2::new(0.0, -1.0));
            assert!(vertex_limit(vc, vc.alpha).dist(V2::new(-alpha.sin(), alpha.cos())) < 1e-12);
            let mut prev = None;
            for k in 1..20 {
                let th = alpha * k as f64 / 20.0;
                let v = vertex_limit(vc, th);
                // never points against the direction of approach
                assert!(v.dot(V2::polar(1.0, th)) >= -1e-9, "{th} {v:?}");
                if let Some(p) = prev {
                    assert!(wrap_angle(v.angle() - V2::angle(p)) >= -1e-9);
                }
                prev = Some(v);
            }
        }
    }
}
