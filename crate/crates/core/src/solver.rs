//! Minimal surface equation on a triangulated period domain.
//!
//! The discrete problem is the minimization of the graph area
//! `A(u) = sum_T |T| sqrt(1 + |grad u_T|^2)` over continuous piecewise-linear
//! `u` with Dirichlet values on the strips. Its Euler-Lagrange equations are
//! the weak form of `div(grad u / W) = 0`. Across the cut, minus-side nodes
//! carry `u = u(plus partner) + c`; with `c` free its optimality condition is
//! zero total conormal flux through the cut. Natural conditions hold on the
//! puncture hole and the vertex arcs.
//!
//! The area is convex, so Newton with an Armijo line search on the area
//! converges from the harmonic start; the Hessian is assembled into a fixed
//! sparse pattern and factored by sparse Cholesky.

use rayon::prelude::*;

use crate::domain::{CutDomain, DomainMesh, MeshOptions, Tag};
use crate::error::{Error, Result};
use crate::geom::V2;
use crate::sparse::SpdPattern;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CapProfile {
    /// Linear from `+M` at the plus side to `-M` at the minus side.
    Linear,
    /// `L tan(pi (1/2 - t))` clipped to `[-M, M]`, the helicoidal strip
    /// profile at height `L`.
    Helicoidal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpMode {
    /// `c` is an unknown closed by zero conormal flux through the cut.
    Unknown,
    Prescribed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryData {
    pub m: f64,
    pub cap: CapProfile,
    pub jump: JumpMode,
}

impl BoundaryData {
    pub fn new(m: f64) -> Self {
        BoundaryData { m, cap: CapProfile::Linear, jump: JumpMode::Unknown }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Bound on the scaled weak residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial blend between the Newton Hessian (0) and the area majorizer
    /// (1); adapted after every step.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iters: 50, damping: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionField {
    /// Nodal values, minus-side cut nodes included.
    pub u: Vec<f64>,
    /// `u(minus) - u(plus)` across the cut; zero without a cut.
    pub c: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub m: f64,
    pub l: f64,
    pub h: f64,
    pub area: f64,
}

/// Generic discrete problem: fixed values, cut pairs and the jump mode.
#[derive(Clone, Debug)]
pub struct Problem {
    pub nodes: Vec<V2>,
    pub tris: Vec<[usize; 3]>,
    pub fixed: Vec<Option<f64>>,
    /// `(plus, minus)` pairs with `u(minus) = u(plus) + c`.
    pub pairs: Vec<(usize, usize)>,
    pub jump: JumpMode,
}

/// Dirichlet value of a node on a strip side or cap, if any.
pub fn strip_value(domain: &CutDomain, tags: &[Tag], x: V2, bc: &BoundaryData) -> Option<f64> {
    let m = bc.m;
    let mut val = None;
    for t in tags {
        match *t {
            Tag::StripPlus(_) => return Some(m),
            Tag::StripMinus(_) => return Some(-m),
            Tag::StripCap(i) => {
                let strip = domain.strips().into_iter().find(|s| s.index == i).unwrap();
                let tt = (strip.local(x).0 / strip.width).clamp(0.0, 1.0);
                val = Some(match bc.cap {
                    CapProfile::Linear => m * (1.0 - 2.0 * tt),
                    CapProfile::Helicoidal => {
                        (strip.length * (std::f64::consts::PI * (0.5 - tt)).tan()).clamp(-m, m)
                    }
                });
            }
            _ => {}
        }
    }
    val
}

impl Problem {
    pub fn from_domain(mesh: &DomainMesh, bc: &BoundaryData) -> Self {
        let tags = mesh.node_tags();
        let fixed = (0..mesh.num_nodes())
            .map(|n| strip_value(&mesh.domain, &tags[n], mesh.nodes[n], bc))
            .collect();
        Problem {
            nodes: mesh.nodes.clone(),
            tris: mesh.tris.clone(),
            fixed,
            pairs: mesh.pairing.clone(),
            jump: bc.jump,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum NodeDof {
    Fixed(f64),
    /// Free dof index, and whether the node sits on the minus side.
    Free(usize, bool),
}

/// Which second-order model of the energy to assemble.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Model {
    /// Dirichlet energy.
    Harmonic,
    /// True Hessian of the area with its rank-one part scaled by `1 - mu`.
    /// `mu = 0` is Newton, `mu = 1` the quadratic majorizer with weights `1/W`.
    Blend(f64),
}

/// Per-element geometry, dof map and the Hessian pattern.
struct Disc {
    grads: Vec<[V2; 3]>,
    areas: Vec<f64>,
    dofs: Vec<NodeDof>,
    c_index: Option<usize>,
    c_fixed: f64,
    /// Per element, `(local a, local b, slot)` with slot in `pattern` and a
    /// kind flag: 0 plain, 1 column is c, 2 both c.
    elem_slots: Vec<Vec<(u8, u8, u8, usize)>>,
    pattern: SpdPattern,
    scale: Vec<f64>,
}

fn element_gradients(p: [V2; 3]) -> ([V2; 3], f64) {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let mut g = [V2::ZERO; 3];
    for k in 0..3 {
        let e = p[(k + 2) % 3] - p[(k + 1) % 3];
        // gradient of the hat function of vertex k
        g[k] = V2::new(-e.y, e.x) * (1.0 / area2);
    }
    (g, 0.5 * area2)
}

impl Disc {
    fn new(p: &Problem) -> Result<Self> {
        let n = p.nodes.len();
        if p.fixed.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.fixed.len() });
        }
        if p.tris.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut geo = Vec::with_capacity(p.tris.len());
        for t in &p.tris {
            if t.iter().any(|&k| k >= n) {
                return Err(Error::DimensionMismatch { expected: n, got: *t.iter().max().unwrap() + 1 });
            }
            geo.push(element_gradients([p.nodes[t[0]], p.nodes[t[1]], p.nodes[t[2]]]));
        }
        let mut partner = vec![usize::MAX; n];
        for &(a, b) in &p.pairs {
            partner[b] = a;
        }
        let mut dofs = vec![NodeDof::Fixed(0.0); n];
        let mut n_free = 0;
        for k in 0..n {
            if partner[k] != usize::MAX {
                continue;
            }
            dofs[k] = match p.fixed[k] {
                Some(v) => NodeDof::Fixed(v),
                None => {
                    n_free += 1;
                    NodeDof::Free(n_free - 1, false)
                }
            };
        }
        for k in 0..n {
            if partner[k] != usize::MAX {
                dofs[k] = match dofs[partner[k]] {
                    NodeDof::Free(d, _) => NodeDof::Free(d, true),
                    NodeDof::Fixed(v) => match p.jump {
                        JumpMode::Prescribed(c) => NodeDof::Fixed(v + c),
                        JumpMode::Unknown => {
                            return Err(Error::DimensionMismatch { expected: 0, got: 1 });
                        }
                    },
                };
            }
        }
        let (c_index, c_fixed) = match p.jump {
            JumpMode::Unknown if !p.pairs.is_empty() => (Some(n_free), 0.0),
            JumpMode::Prescribed(c) => (None, c),
            _ => (None, 0.0),
        };
        let dim = n_free + c_index.is_some() as usize;
        let mut entries = Vec::new();
        let mut elem_slots = Vec::with_capacity(p.tris.len());
        for t in &p.tris {
            let mut slots = Vec::new();
            for a in 0..3 {
                for b in 0..3 {
                    let (da, sa) = match dofs[t[a]] {
                        NodeDof::Free(d, s) => (d, s),
                        _ => continue,
                    };
                    let (db, sb) = match dofs[t[b]] {
                        NodeDof::Free(d, s) => (d, s),
                        _ => continue,
                    };
                    if da <= db {
                        slots.push((a as u8, b as u8, 0u8, entries.len()));
                        entries.push((da, db));
                    }
                    if let Some(ci) = c_index {
                        if sb {
                            slots.push((a as u8, b as u8, 1, entries.len()));
                            entries.push((da, ci));
                        }
                        if sa && sb {
                            slots.push((a as u8, b as u8, 2, entries.len()));
                            entries.push((ci, ci));
                        }
                    }
                }
            }
            elem_slots.push(slots);
        }
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let pattern = SpdPattern::new(dim, entries)?;
        let mut scale = vec![0.0; dim];
        for (e, t) in p.tris.iter().enumerate() {
            for &k in t {
                if let NodeDof::Free(d, s) = dofs[k] {
                    scale[d] += geo[e].1;
                    if let (true, Some(ci)) = (s, c_index) {
                        scale[ci] += geo[e].1;
                    }
                }
            }
        }
        for s in &mut scale {
            *s = s.sqrt().max(f64::MIN_POSITIVE);
        }
        Ok(Disc {
            grads: geo.iter().map(|g| g.0).collect(),
            areas: geo.iter().map(|g| g.1).collect(),
            dofs,

            c_index,
            c_fixed,
            elem_slots,
            pattern,
            scale,
        })
    }

    fn dim(&self) -> usize {
        self.pattern.dim()
    }

    fn nodal(&self, z: &[f64]) -> Vec<f64> {
        let c = self.c_index.map_or(self.c_fixed, |ci| z[ci]);
        self.dofs
            .iter()
            .map(|d| match *d {
                NodeDof::Fixed(v) => v,
                NodeDof::Free(i, s) => z[i] + if s { c } else { 0.0 },
            })
            .collect()
    }

    fn jump(&self, z: &[f64]) -> f64 {
        self.c_index.map_or(self.c_fixed, |ci| z[ci])
    }

    fn elem_grad(&self, tris: &[[usize; 3]], u: &[f64], e: usize) -> V2 {
        let t = tris[e];
        let g = &self.grads[e];
        g[0] * u[t[0]] + g[1] * u[t[1]] + g[2] * u[t[2]]
    }

    /// Area (or Dirichlet energy when `harmonic`).
    fn energy(&self, tris: &[[usize; 3]], u: &[f64], harmonic: bool) -> f64 {
        let per: Vec<f64> = (0..tris.len())
            .into_par_iter()
            .map(|e| {
                let g = self.elem_grad(tris, u, e);
                if harmonic {
                    0.5 * self.areas[e] * g.norm2()
                } else {
                    self.areas[e] * (1.0 + g.norm2()).sqrt()
                }
            })
            .collect();
        per.iter().sum()
    }

    /// Gradient in dof space.
    fn gradient(&self, tris: &[[usize; 3]], u: &[f64], harmonic: bool) -> Vec<f64> {
        let per: Vec<[f64; 3]> = (0..tris.len())
            .into_par_iter()
            .map(|e| {
                let g = self.elem_grad(tris, u, e);
                let w = if harmonic { 1.0 } else { (1.0 + g.norm2()).sqrt() };
                let mut r = [0.0; 3];
                for k in 0..3 {
                    r[k] = self.areas[e] * g.dot(self.grads[e][k]) / w;
                }
                r
            })
            .collect();
        let mut out = vec![0.0; self.dim()];
        for (e, t) in tris.iter().enumerate() {
            for k in 0..3 {
                if let NodeDof::Free(d, s) = self.dofs[t[k]] {
                    out[d] += per[e][k];
                    if let (true, Some(ci)) = (s, self.c_index) {
                        out[ci] += per[e][k];
                    }
                }
            }
        }
        out
    }

    fn hessian(&self, tris: &[[usize; 3]], u: &[f64], model: Model) -> Vec<f64> {
        let per: Vec<Vec<(usize, f64)>> = (0..tris.len())
            .into_par_iter()
            .map(|e| {
                let g = self.elem_grad(tris, u, e);
                let w = (1.0 + g.norm2()).sqrt();
                let (iw, iw3) = match model {
                    Model::Harmonic => (1.0, 0.0),
                    Model::Blend(mu) => (1.0 / w, (1.0 - mu) / (w * w * w)),
                };
                let gr = &self.grads[e];
                self.elem_slots[e]
                    .iter()
                    .map(|&(a, b, _, slot)| {
                        let (ga, gb) = (gr[a as usize], gr[b as usize]);
                        (slot, self.areas[e] * (ga.dot(gb) * iw - ga.dot(g) * gb.dot(g) * iw3))
                    })
                    .collect()
            })
            .collect();
        let mut vals = vec![0.0; self.pattern.len()];
        for list in per {
            for (slot, v) in list {
                vals[slot] += v;
            }
        }
        vals
    }

    fn scaled_norm(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.scale).map(|(r, s)| (r / s).abs()).fold(0.0, f64::max)
    }

    fn dofs_from_nodal(&self, u: &[f64], c: f64) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        for (k, d) in self.dofs.iter().enumerate() {
            if let NodeDof::Free(i, false) = *d {
                z[i] = u[k];
            }
        }
        if let Some(ci) = self.c_index {
            z[ci] = c;
        }
        z
    }
}

/// Outcome of a Newton solve on a generic problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Solved {
    pub u: Vec<f64>,
    pub c: f64,
    pub iters: usize,
    pub residual: f64,
    pub area: f64,
}

/// Harmonic function with the same boundary data and cut structure.
pub fn harmonic_start(p: &Problem) -> Result<Solved> {
    let disc = Disc::new(p)?;
    let z0 = vec![0.0; disc.dim()];
    let u0 = disc.nodal(&z0);
    let g = disc.gradient(&p.tris, &u0, true);
    let h = disc.hessian(&p.tris, &u0, Model::Harmonic);
    let f = disc.pattern.factor(&h)?;
    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
    let z = f.solve(&neg);
    let u = disc.nodal(&z);
    Ok(Solved { c: disc.jump(&z), area: disc.energy(&p.tris, &u, false), u, iters: 1, residual: 0.0 })
}

/// Amplitude of the boundary data up to which a harmonic start is reliable.
const HOMOTOPY_BASE: f64 = 8.0;

/// Minimize the discrete area. With a `start` (nodal values and jump) a
/// single damped Newton run is made. Otherwise the boundary data is scaled
/// down to amplitude `HOMOTOPY_BASE`, solved from the harmonic start, and
/// doubled stage by stage, each stage warm-started from the rescaled
/// previous solution. `iters` counts Newton steps over all stages.
pub fn solve_problem(p: &Problem, opts: &SolveOptions, start: Option<(&[f64], f64)>) -> Result<Solved> {
    if start.is_some() {
        return newton(p, opts, start);
    }
    let mut amp = p.fixed.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if let JumpMode::Prescribed(c) = p.jump {
        amp = amp.max(c.abs());
    }
    let mut t = 1.0;
    let mut ts = vec![1.0];
    while amp * t > HOMOTOPY_BASE {
        t *= 0.5;
        ts.push(t);
    }
    ts.reverse();
    let mut prev: Option<(Solved, f64)> = None;
    let mut total = 0;
    for &t in &ts {
        let mut q = p.clone();
        for v in q.fixed.iter_mut().flatten() {
            *v *= t;
        }
        if let JumpMode::Prescribed(c) = q.jump {
            q.jump = JumpMode::Prescribed(c * t);
        }
        let last = t == 1.0;
        let stage_opts = SolveOptions { tol: if last { opts.tol } else { opts.tol.max(1e-6) }, ..*opts };
        let s = match &prev {
            None => newton(&q, &stage_opts, None),
            Some((s, tp)) => {
                let r = t / tp;
                let u: Vec<f64> = s.u.iter().map(|v| v * r).collect();
                newton(&q, &stage_opts, Some((&u, s.c * r)))
            }
        };
        let s = s.map_err(|e| match e {
            Error::NoConvergence { iters, residual } => Error::NoConvergence { iters: total + iters, residual },
            e => e,
        })?;
        total += s.iters;
        prev = Some((s, t));
    }
    let (mut s, _) = prev.unwrap();
    s.iters = total;
    Ok(s)
}

/// Damped Newton on the discrete area, from `start` or the harmonic start.
fn newton(p: &Problem, opts: &SolveOptions, start: Option<(&[f64], f64)>) -> Result<Solved> {
    let disc = Disc::new(p)?;
    let mut z = match start {
        Some((u, c)) => {
            if u.len() != p.nodes.len() {
                return Err(Error::DimensionMismatch { expected: p.nodes.len(), got: u.len() });
            }
            disc.dofs_from_nodal(u, c)
        }
        None => {
            let hs = harmonic_start(p)?;
            disc.dofs_from_nodal(&hs.u, hs.c)
        }
    };
    let mut u = disc.nodal(&z);
    let mut area = disc.energy(&p.tris, &u, false);
    let mut g = disc.gradient(&p.tris, &u, false);
    let mut res = disc.scaled_norm(&g);
    let mut iters = 0;
    let mut mu = opts.damping.clamp(0.0, 1.0);
    while res > opts.tol {
        if iters >= opts.max_iters {
            return Err(Error::NoConvergence { iters, residual: res });
        }
        iters += 1;
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut step = None;
        // the blend parameter acts like a trust region: the majorizer step
        // (mu = 1) always decreases the area, Newton (mu = 0) converges fast
        for _ in 0..12 {
            let f = disc.pattern.factor(&disc.hessian(&p.tris, &u, Model::Blend(mu)))?;
            let dz = f.solve(&neg);
            let slope: f64 = g.iter().zip(&dz).map(|(a, b)| a * b).sum();
            let zt: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
            let ut = disc.nodal(&zt);
            let at = disc.energy(&p.tris, &ut, false);
            // actual over predicted decrease of the blended quadratic model
            let rho = (area - at) / (-0.5 * slope);
            let decrease_ok = rho >= 2e-4;
            // at roundoff level the area cannot resolve the decrease; fall
            // back to the residual
            let roundoff = slope.abs() <= 1e-13 * area.abs();
            if decrease_ok || roundoff {
                let gt = disc.gradient(&p.tris, &ut, false);
                if decrease_ok || disc.scaled_norm(&gt) < res {
                    let (mut zt, mut ut, mut at, mut gt) = (zt, ut, at, gt);
                    if rho < 0.5 && decrease_ok {
                        // the model is pessimistic along this direction; extend
                        let mut alpha = 1.0;
                        loop {
                            alpha *= 2.0;
                            let z2: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + alpha * b).collect();
                            let u2 = disc.nodal(&z2);
                            let a2 = disc.energy(&p.tris, &u2, false);
                            if a2 >= at || alpha > 64.0 {
                                break;
                            }
                            (zt, ut, at) = (z2, u2, a2);
                        }
                        gt = disc.gradient(&p.tris, &ut, false);
                    }
                    step = Some((zt, ut, at, gt));
                    if rho > 0.75 || roundoff {
                        mu = if mu < 1e-3 { 0.0 } else { mu * 0.25 };
                    } else if rho < 0.25 {
                        mu = (mu * 4.0).clamp(1e-2, 1.0);
                    } else {
                        mu = if mu < 1e-3 { 0.0 } else { mu * 0.5 };
                    }
                    break;
                }
            }
            if mu >= 1.0 {
                break;
            }
            mu = (mu * 4.0).max(1e-2).min(1.0);
        }
        let Some((zt, ut, at, gt)) = step else {
            return Err(Error::NoConvergence { iters, residual: res });
        };
        z = zt;
        u = ut;
        area = at;
        g = gt;
        res = disc.scaled_norm(&g);
    }
    Ok(Solved { c: disc.jump(&z), u, iters, residual: res, area })
}

/// Solve the capped problem on a period domain.
pub fn solve(mesh: &DomainMesh, bc: &BoundaryData, opts: &SolveOptions) -> Result<SolutionField> {
    solve_from(mesh, bc, opts, None)
}

/// Solve, warm-started from a field on the same mesh.
pub fn solve_from(
    mesh: &DomainMesh,
    bc: &BoundaryData,
    opts: &SolveOptions,
    start: Option<&SolutionField>,
) -> Result<SolutionField> {
    if mesh.tris.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let p = Problem::from_domain(mesh, bc);
    let s = solve_problem(&p, opts, start.map(|f| (f.u.as_slice(), f.c)))?;
    if matches!(bc.jump, JumpMode::Unknown) && !mesh.pairing.is_empty() && s.c.abs() < 1e-8 {
        return Err(Error::JumpDegenerate(s.c));
    }
    Ok(SolutionField {
        u: s.u,
        c: if mesh.pairing.is_empty() { 0.0 } else { s.c },
        residual_norm: s.residual,
        newton_iters: s.iters,
        m: bc.m,
        l: mesh.domain.length,
        h: mesh.h,
        area: s.area,
    })
}

/// Weak residual `sum_T |T| grad u . grad phi_k / W` at every node.
pub fn weak_residual(nodes: &[V2], tris: &[[usize; 3]], u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != nodes.len() {
        return Err(Error::DimensionMismatch { expected: nodes.len(), got: u.len() });
    }
    let mut r = vec![0.0; nodes.len()];
    for t in tris {
        let (g, area) = element_gradients([nodes[t[0]], nodes[t[1]], nodes[t[2]]]);
        let gu = g[0] * u[t[0]] + g[1] * u[t[1]] + g[2] * u[t[2]];
        let w = (1.0 + gu.norm2()).sqrt();
        for k in 0..3 {
            r[t[k]] += area * gu.dot(g[k]) / w;
        }
    }
    Ok(r)
}

/// Residual of the discrete equation on a period mesh: cut pairs are summed
/// (both nodes report the total), Dirichlet nodes report zero.
pub fn mse_residual(mesh: &DomainMesh, field: &SolutionField) -> Result<Vec<f64>> {
    let mut r = weak_residual(&mesh.nodes, &mesh.tris, &field.u)?;
    for &(a, b) in &mesh.pairing {
        let s = r[a] + r[b];
        r[a] = s;
        r[b] = s;
    }
    let tags = mesh.node_tags();
    for (k, t) in tags.iter().enumerate() {
        if t.iter().any(|t| matches!(t, Tag::StripPlus(_) | Tag::StripMinus(_) | Tag::StripCap(_))) {
            r[k] = 0.0;
        }
    }
    Ok(r)
}

/// One level of a continuation schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub m: f64,
    pub l: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleRow {
    pub level: Level,
    pub c: f64,
    pub nodes: usize,
    pub newton_iters: usize,
    /// Optional scalar supplied by the caller (e.g. a period norm).
    pub probe: Option<f64>,
    pub dc: Option<f64>,
    pub dprobe: Option<f64>,
}

/// Solve along a schedule, warm-starting whenever the mesh is unchanged.
/// `rebuild` maps a strip length to the domain; `probe` may measure each
/// field. Fails with `NonCauchy` when successive differences of `c` (or of
/// the probe) stop decreasing.
pub fn continuation_solve(
    rebuild: &dyn Fn(f64) -> Result<CutDomain>,
    schedule: &[Level],
    mesh_opts: &MeshOptions,
    bc: &BoundaryData,
    opts: &SolveOptions,
    probe: Option<&dyn Fn(&DomainMesh, &SolutionField) -> Result<f64>>,
) -> Result<(DomainMesh, SolutionField, Vec<ScheduleRow>)> {
    if schedule.is_empty() {
        return Err(Error::NonCauchy("empty schedule".into()));
    }
    let mut rows: Vec<ScheduleRow> = Vec::new();
    let mut last: Option<(DomainMesh, SolutionField)> = None;
    for level in schedule {
        let same = last.as_ref().is_some_and(|(m, _)| m.h == level.h && m.domain.length == level.l);
        let mesh = if same {
            last.as_ref().unwrap().0.clone()
        } else {
            let mut mo = mesh_opts.clone();
            mo.h = level.h;
            crate::domain::triangulate(&rebuild(level.l)?, &mo)?
        };
        let bcl = BoundaryData { m: level.m, ..*bc };
        let start = if same { last.as_ref().map(|(_, f)| f) } else { None };
        let field = solve_from(&mesh, &bcl, opts, start)?;
        let pv = match probe {
            Some(f) => Some(f(&mesh, &field)?),
            None => None,
        };
        let prev = rows.last();
        let row = ScheduleRow {
            level: *level,
            c: field.c,
            nodes: mesh.num_nodes(),
            newton_iters: field.newton_iters,
            probe: pv,
            dc: prev.map(|r| (field.c - r.c).abs()),
            dprobe: match (prev.and_then(|r| r.probe), pv) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            },
        };
        rows.push(row);
        last = Some((mesh, field));
    }
    for w in rows.windows(2) {
        if let (Some(a), Some(b)) = (w[0].dc, w[1].dc) {
            if b >= a {
                return Err(Error::NonCauchy(format!("|dc| {b:e} after {a:e}")));
            }
        }
        if let (Some(a), Some(b)) = (w[0].dprobe, w[1].dprobe) {
            if b >= a {
                return Err(Error::NonCauchy(format!("|dprobe| {b:e} after {a:e}")));
            }
        }
    }
    let (mesh, field) = last.unwrap();
    Ok((mesh, field, rows))
}

/// Structured mesh of the annular sector `rho0 <= rho <= rho1`,
/// `theta0 <= theta <= theta1` with `nr x nt` cells. `warp` in `[0, 1)`
/// moves the grid lines by a smooth periodic perturbation; at zero the mesh
/// is invariant under the screw motion of the helicoid.
#[derive(Clone, Debug)]
pub struct SectorMesh {
    pub nodes: Vec<V2>,
    pub tris: Vec<[usize; 3]>,
    pub polar: Vec<(f64, f64)>,
    /// Nodes on the outer boundary of the sector.
    pub boundary: Vec<bool>,
    /// With a closed annulus, the `theta0` column paired to the `theta1` column.
    pub pairs: Vec<(usize, usize)>,
}

pub fn annular_sector(
    rho0: f64,
    rho1: f64,
    theta0: f64,
    theta1: f64,
    nr: usize,
    nt: usize,
    warp: f64,
) -> SectorMesh {
    let tau = 2.0 * std::f64::consts::PI;
    let bend = |s: f64| s + warp * (tau * s).sin() / tau;
    let mut nodes = Vec::new();
    let mut polar = Vec::new();
    let mut boundary = Vec::new();
    let id = |i: usize, j: usize| j * (nr + 1) + i;
    for j in 0..=nt {
        let th = theta0 + (theta1 - theta0) * bend(j as f64 / nt as f64);
        for i in 0..=nr {
            let rho = rho0 + (rho1 - rho0) * bend(i as f64 / nr as f64);
            nodes.push(V2::polar(rho, th));
            polar.push((rho, th));
            boundary.push(i == 0 || i == nr || j == 0 || j == nt);
        }
    }
    let mut tris = Vec::new();
    for j in 0..nt {
        for i in 0..nr {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // alternate diagonals to avoid a directional bias
            if (i + j) % 2 == 0 {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    let pairs = (0..=nr).map(|i| (id(i, 0), id(i, nt))).collect();
    SectorMesh { nodes, tris, polar, boundary, pairs }
}

/// The half helicoid `u = theta`, an exact solution of the minimal surface
/// equation away from the axis.
pub fn helicoid_field(mesh: &SectorMesh) -> Vec<f64> {
    mesh.polar.iter().map(|&(_, th)| th).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{triangulate, CutDomain, MeshOptions};
    use crate::polygon::FluxPolygon;
    use std::f64::consts::PI;

    fn tri() -> FluxPolygon {
        let s = 3f64.sqrt() / 2.0;
        FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)]).unwrap()
    }

    fn square_mesh(n: usize) -> (Vec<V2>, Vec<[usize; 3]>, Vec<bool>) {
        let mut nodes = Vec::new();
        let mut bnd = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                nodes.push(V2::new(i as f64 / n as f64, j as f64 / n as f64));
                bnd.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut tris = Vec::new();
        for j in 0..n {
            for i in 0..n {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        (nodes, tris, bnd)
    }

    #[test]
    fn planes_have_zero_residual() {
        let (nodes, tris, bnd) = square_mesh(8);
        for (a, b, d) in [(0.0, 0.0, 0.0), (1.5, -0.3, 2.0)] {
            let u: Vec<f64> = nodes.iter().map(|p| a * p.x + b * p.y + d).collect();
            let r = weak_residual(&nodes, &tris, &u).unwrap();
            for (k, v) in r.iter().enumerate() {
                if !bnd[k] {
                    assert!(v.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn parabola_residual_sign() {
        // div(grad u / W) for u = x^2 is 2 / (1 + 4x^2)^(3/2) > 0; the weak
        // residual is minus its integral against the hat function
        let n = 16;
        let (nodes, tris, bnd) = square_mesh(n);
        let u: Vec<f64> = nodes.iter().map(|p| p.x * p.x).collect();
        let r = weak_residual(&nodes, &tris, &u).unwrap();
        let hh = 1.0 / n as f64;
        for (k, v) in r.iter().enumerate() {
            if bnd[k] {
                continue;
            }
            let x = nodes[k].x;
            let strong = 2.0 / (1.0 + 4.0 * x * x).powf(1.5);
            assert!(*v < 0.0);
            assert!((v / (hh * hh) + strong).abs() < 0.05 * strong, "x={x}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let d = CutDomain::new(&tri(), V2::new(0.5, 0.3), 8.0).unwrap();
        let m = triangulate(&d, &MeshOptions::new(0.4)).unwrap();
        let f = SolutionField { u: vec![0.0; 3], c: 0.0, residual_norm: 0.0, newton_iters: 0, m: 1.0, l: 8.0, h: 0.4, area: 0.0 };
        assert!(matches!(mse_residual(&m, &f), Err(Error::DimensionMismatch { .. })));
        let p = Problem { nodes: vec![], tris: vec![], fixed: vec![], pairs: vec![], jump: JumpMode::Unknown };
        assert!(matches!(solve_problem(&p, &SolveOptions::default(), None), Err(Error::DimensionMismatch { .. })));
    }

    fn helicoid_problem(sm: &SectorMesh) -> Problem {
        let exact = helicoid_field(sm);
        Problem {
            nodes: sm.nodes.clone(),
            tris: sm.tris.clone(),
            fixed: (0..sm.nodes.len()).map(|k| sm.boundary[k].then_some(exact[k])).collect(),
            pairs: vec![],
            jump: JumpMode::Unknown,
        }
    }

    #[test]
    fn helicoid_is_discretely_exact_on_polar_mesh() {
        let sm = annular_sector(0.2, 1.0, 0.0, PI, 16, 32, 0.0);
        let r = weak_residual(&sm.nodes, &sm.tris, &helicoid_field(&sm)).unwrap();
        for k in 0..sm.nodes.len() {
            if !sm.boundary[k] {
                assert!(r[k].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn helicoid_dirichlet_solve_recovers_theta() {
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let sm = annular_sector(0.2, 1.0, 0.0, PI, n, 2 * n, 0.6);
            let s = solve_problem(&helicoid_problem(&sm), &SolveOptions::default(), None).unwrap();
            let exact = helicoid_field(&sm);
            let e = s.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 1.8, "order {order}, errors {errs:?}");
    }

    #[test]
    fn helicoid_two_sheets_with_prescribed_jump() {
        let sm = annular_sector(0.2, 1.0, 0.0, 2.0 * PI, 16, 64, 0.6);
        let exact = helicoid_field(&sm);
        let mut p = helicoid_problem(&sm);
        p.pairs = sm.pairs.clone();
        p.jump = JumpMode::Prescribed(2.0 * PI);
        let s = solve_problem(&p, &SolveOptions::default(), None).unwrap();
        for &(a, b) in &sm.pairs {
            // against the orientation, from the minus to the plus side, the jump is -2 pi
            assert!((s.u[a] - s.u[b] + 2.0 * PI).abs() < 1e-12);
        }
        let e = s.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(e < 5e-3, "error {e}");
    }

    #[test]
    fn translation_shifts_u_and_keeps_c() {
        let d = CutDomain::new(&tri(), V2::new(0.5, 0.3), 8.0).unwrap();
        let m = triangulate(&d, &MeshOptions::new(0.4)).unwrap();
        let bc = BoundaryData::new(6.0);
        let p = Problem::from_domain(&m, &bc);
        let a = solve_problem(&p, &SolveOptions::default(), None).unwrap();
        let mut q = p.clone();
        for v in q.fixed.iter_mut().flatten() {
            *v += 3.0;
        }
        let b = solve_problem(&q, &SolveOptions::default(), None).unwrap();
        assert!((a.c - b.c).abs() < 1e-8);
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((y - x - 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn triangle_jump_is_negative() {
        let d = CutDomain::new(&tri(), V2::new(0.5, 3f64.sqrt() / 6.0), 8.0).unwrap();
        let m = triangulate(&d, &MeshOptions::new(0.2)).unwrap();
        let f = solve(&m, &BoundaryData::new(10.0), &SolveOptions::default()).unwrap();
        assert!(f.c < -1e-4, "c = {}", f.c);
        assert!(f.residual_norm <= 1e-10);
        for &(a, b) in &m.pairing {
            assert!((f.u[b] - f.u[a] - f.c).abs() < 1e-10);
        }
        let r = mse_residual(&m, &f).unwrap();
        let tags = m.node_tags();
        // discrete maximum principle: interior values stay within the data
        for (k, t) in tags.iter().enumerate() {
            if t.is_empty() {
                assert!(f.u[k].abs() <= 10.0);
            }
        }
        assert!(r.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn genus0_solve_has_no_jump() {
        let m = crate::domain::genus0_domain(&tri(), 8.0, &MeshOptions::new(0.3)).unwrap();
        let f = solve(&m, &BoundaryData::new(8.0), &SolveOptions::default()).unwrap();
        assert_eq!(f.c, 0.0);
        assert!(f.residual_norm <= 1e-10);
    }
}
