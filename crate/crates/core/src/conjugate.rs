//! Conjugate surface of a solved graph.
//!
//! With `p, q` the elementwise gradient of `u` and `W = sqrt(1 + p^2 + q^2)`,
//! the conjugate coordinates have differentials
//!
//! ```text
//! dX1* = (qp/W) dx + ((1+q^2)/W) dy
//! dX2* = -((1+p^2)/W) dx - (pq/W) dy
//! dX3* = (p dy - q dx)/W = dPsi
//! ```
//!
//! `dX3*` is the rotated conormal field; on a discrete solution it is exactly
//! the gradient of a Crouzeix-Raviart function (continuous at edge
//! midpoints), which gives `Psi` up to the solver residual. The horizontal
//! forms are only closed in the limit; their potentials are least-squares
//! fits with an unknown translation `tau` across the cut, which is the
//! horizontal period.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::domain::{DomainMesh, Strip, Tag, Topology};
use crate::error::{Error, Result};
use crate::geom::V2;
use crate::solver::SolutionField;
use crate::sparse::SpdPattern;

/// Elementwise gradient data of a piecewise-linear field.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientFrame {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    X1,
    X2,
    X3,
}

impl Form {
    /// `1, 2, 3` for `X1*, X2*, X3*`.
    pub fn from_index(i: usize) -> Result<Form> {
        match i {
            1 => Ok(Form::X1),
            2 => Ok(Form::X2),
            3 => Ok(Form::X3),
            _ => Err(Error::UnknownForm(i)),
        }
    }
}

fn hat_gradients(p: [V2; 3]) -> ([V2; 3], f64) {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let mut g = [V2::ZERO; 3];
    for k in 0..3 {
        let e = p[(k + 2) % 3] - p[(k + 1) % 3];
        g[k] = V2::new(-e.y, e.x) * (1.0 / area2);
    }
    (g, 0.5 * area2)
}

pub fn frame_from_parts(nodes: &[V2], tris: &[[usize; 3]], u: &[f64]) -> Result<GradientFrame> {
    if u.len() != nodes.len() {
        return Err(Error::DimensionMismatch { expected: nodes.len(), got: u.len() });
    }
    let mut f = GradientFrame { p: Vec::with_capacity(tris.len()), q: Vec::new(), w: Vec::new() };
    for t in tris {
        let (g, _) = hat_gradients([nodes[t[0]], nodes[t[1]], nodes[t[2]]]);
        let d = g[0] * u[t[0]] + g[1] * u[t[1]] + g[2] * u[t[2]];
        f.p.push(d.x);
        f.q.push(d.y);
        f.w.push((1.0 + d.norm2()).sqrt());
    }
    Ok(f)
}

pub fn gradient_frame(mesh: &DomainMesh, field: &SolutionField) -> Result<GradientFrame> {
    frame_from_parts(&mesh.nodes, &mesh.tris, &field.u)
}

/// Coefficients `(a, b)` of `a dx + b dy` on every element.
pub fn one_form(frame: &GradientFrame, form: Form) -> Vec<V2> {
    (0..frame.p.len())
        .map(|t| {
            let (p, q, w) = (frame.p[t], frame.q[t], frame.w[t]);
            match form {
                Form::X1 => V2::new(q * p / w, (1.0 + q * q) / w),
                Form::X2 => V2::new(-(1.0 + p * p) / w, -p * q / w),
                Form::X3 => V2::new(-q / w, p / w),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsiField {
    /// Nodal values: the mean over incident elements of the elementwise
    /// affine pieces, with minus-side cut nodes copied from their partners.
    pub values: Vec<f64>,
    pub base: usize,
    /// Largest mismatch at an edge midpoint not used by the spanning tree.
    pub loop_defect: f64,
    /// Mean mismatch across paired cut edges: the third period.
    pub third_period: f64,
    /// Value of each elementwise affine piece at the element's vertices.
    pub corner: Vec<[f64; 3]>,
}

/// Default basepoint: the hole node on the plus side of the cut, or the
/// first node of the arc at `P_1` without a puncture.
pub fn default_base(mesh: &DomainMesh) -> Result<usize> {
    let tags = mesh.node_tags();
    let cut = mesh.chain(Tag::CutPlus);
    if let Some(&n) = cut.iter().find(|&&n| tags[n].contains(&Tag::Puncture)) {
        return Ok(n);
    }
    if let Some(&n) = mesh.chain(Tag::Puncture).first() {
        return Ok(n);
    }
    mesh.chain(Tag::VertexArc(0)).first().copied().ok_or_else(|| Error::NoLoop("no basepoint".into()))
}

fn paired_edges(mesh: &DomainMesh) -> Vec<((usize, usize), (usize, usize))> {
    let partner: HashMap<usize, usize> = mesh.pairing.iter().copied().collect();
    let minus_edges: HashSet<(usize, usize)> = mesh
        .boundary
        .iter()
        .filter(|e| e.tag == Tag::CutMinus)
        .map(|e| (e.a.min(e.b), e.a.max(e.b)))
        .collect();
    let mut out = Vec::new();
    for e in mesh.boundary.iter().filter(|e| e.tag == Tag::CutPlus) {
        if let (Some(&ma), Some(&mb)) = (partner.get(&e.a), partner.get(&e.b)) {
            if minus_edges.contains(&(ma.min(mb), ma.max(mb))) {
                out.push(((e.a, e.b), (ma, mb)));
            }
        }
    }
    out
}

/// Integrate `dX3*` on the triangle adjacency graph, breadth-first from the
/// element holding the basepoint.
pub fn psi_field(mesh: &DomainMesh, frame: &GradientFrame, base: Option<usize>) -> Result<PsiField> {
    let nt = mesh.tris.len();
    if frame.p.len() != nt {
        return Err(Error::DimensionMismatch { expected: nt, got: frame.p.len() });
    }
    let base = match base {
        Some(b) => b,
        None => default_base(mesh)?,
    };
    let grad = one_form(frame, Form::X3);
    let nb = mesh.tri_neighbors();
    let node_tris = mesh.node_triangles();
    let start = *node_tris.get(base).and_then(|v| v.first()).ok_or(Error::NotSimplyConnected)?;
    // value of the affine piece at each element's first vertex
    let mut origin = vec![f64::NAN; nt];
    let mut tree_edge = vec![[false; 3]; nt];
    let at = |t: usize, origin: &[f64], x: V2| origin[t] + grad[t].dot(x - mesh.nodes[mesh.tris[t][0]]);
    origin[start] = 0.0;
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        let tri = mesh.tris[t];
        for k in 0..3 {
            if let Some(s) = nb[t][k] {
                if origin[s].is_nan() {
                    let mid = (mesh.nodes[tri[k]] + mesh.nodes[tri[(k + 1) % 3]]) * 0.5;
                    let v = at(t, &origin, mid);
                    origin[s] = v - grad[s].dot(mid - mesh.nodes[mesh.tris[s][0]]);
                    tree_edge[t][k] = true;
                    let back = (0..3).find(|&j| nb[s][j] == Some(t)).unwrap();
                    tree_edge[s][back] = true;
                    queue.push_back(s);
                }
            }
        }
    }
    if origin.iter().any(|v| v.is_nan()) {
        return Err(Error::NotSimplyConnected);
    }
    let mut loop_defect: f64 = 0.0;
    for t in 0..nt {
        let tri = mesh.tris[t];
        for k in 0..3 {
            if let Some(s) = nb[t][k] {
                if !tree_edge[t][k] && s > t {
                    let mid = (mesh.nodes[tri[k]] + mesh.nodes[tri[(k + 1) % 3]]) * 0.5;
                    loop_defect = loop_defect.max((at(t, &origin, mid) - at(s, &origin, mid)).abs());
                }
            }
        }
    }
    let corner: Vec<[f64; 3]> = (0..nt)
        .map(|t| {
            let tri = mesh.tris[t];
            [0, 1, 2].map(|k| at(t, &origin, mesh.nodes[tri[k]]))
        })
        .collect();
    let mut values = vec![0.0; mesh.num_nodes()];
    for (n, ts) in node_tris.iter().enumerate() {
        if ts.is_empty() {
            continue;
        }
        let s: f64 = ts
            .iter()
            .map(|&t| corner[t][mesh.tris[t].iter().position(|&m| m == n).unwrap()])
            .sum();
        values[n] = s / ts.len() as f64;
    }
    // jump across the cut, measured at paired edge midpoints
    let edge_owner: HashMap<(usize, usize), usize> = mesh
        .tris
        .iter()
        .enumerate()
        .flat_map(|(t, tri)| (0..3).map(move |k| ((tri[k], tri[(k + 1) % 3]), t)))
        .collect();
    let mut jumps = Vec::new();
    for ((a, b), (ma, mb)) in paired_edges(mesh) {
        let tp = edge_owner.get(&(a, b)).or_else(|| edge_owner.get(&(b, a)));
        let tm = edge_owner.get(&(ma, mb)).or_else(|| edge_owner.get(&(mb, ma)));
        if let (Some(&tp), Some(&tm)) = (tp, tm) {
            let vp = at(tp, &origin, (mesh.nodes[a] + mesh.nodes[b]) * 0.5);
            let vm = at(tm, &origin, (mesh.nodes[ma] + mesh.nodes[mb]) * 0.5);
            jumps.push(vm - vp);
        }
    }
    let third_period = if jumps.is_empty() { 0.0 } else { jumps.iter().sum::<f64>() / jumps.len() as f64 };
    for &(a, b) in &mesh.pairing {
        values[b] = values[a];
    }
    let shift = values[base];
    for v in &mut values {
        *v -= shift;
    }
    let corner = corner.into_iter().map(|c| c.map(|v| v - shift)).collect();
    Ok(PsiField { values, base, loop_defect, third_period, corner })
}

/// Integral of a form along a chain of mesh edges; each edge uses the mean
/// of the forms on its incident elements.
pub fn line_integral(mesh: &DomainMesh, frame: &GradientFrame, form: Form, path: &[usize]) -> Result<f64> {
    let omega = one_form(frame, form);
    let mut owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            owner.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let mut sum = 0.0;
    for w in path.windows(2) {
        let key = (w[0].min(w[1]), w[0].max(w[1]));
        let ts = owner.get(&key).ok_or_else(|| Error::PathNotInMesh(format!("edge {}-{}", w[0], w[1])))?;
        let mut mean = V2::ZERO;
        for &t in ts {
            mean += omega[t];
        }
        mean = mean * (1.0 / ts.len() as f64);
        sum += mean.dot(mesh.nodes[w[1]] - mesh.nodes[w[0]]);
    }
    Ok(sum)
}

/// Counterclockwise chain of edges around the puncture at graph distance
/// `ring` from the hole, from the plus side of the cut to the minus side.
pub fn puncture_loop(mesh: &DomainMesh, ring: usize) -> Result<Vec<usize>> {
    let tags = mesh.node_tags();
    let n = mesh.num_nodes();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for k in 0..n {
        if tags[k].contains(&Tag::Puncture) {
            dist[k] = 0;
            queue.push_back(k);
        }
    }
    if queue.is_empty() {
        return Err(Error::NoLoop("mesh has no puncture".into()));
    }
    let mut adj = vec![Vec::new(); n];
    for tri in &mesh.tris {
        for k in 0..3 {
            adj[tri[k]].push(tri[(k + 1) % 3]);
            adj[tri[(k + 1) % 3]].push(tri[k]);
        }
    }
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if dist[b] == usize::MAX {
                dist[b] = dist[a] + 1;
                queue.push_back(b);
            }
        }
    }
    let inside: Vec<bool> = mesh.tris.iter().map(|t| t.iter().all(|&k| dist[k] <= ring)).collect();
    let nb = mesh.tri_neighbors();
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut heads = HashSet::new();
    for (t, tri) in mesh.tris.iter().enumerate() {
        if !inside[t] {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            match nb[t][k] {
                Some(s) if !inside[s] => {
                    next.insert(a, b);
                    heads.insert(b);
                }
                None => {
                    let on_hole_or_cut = [a, b].iter().all(|&m| {
                        tags[m].iter().any(|t| matches!(t, Tag::Puncture | Tag::CutPlus | Tag::CutMinus))
                    });
                    if !on_hole_or_cut {
                        return Err(Error::NoLoop(format!("ring {ring} reaches the boundary")));
                    }
                }
                _ => {}
            }
        }
    }
    let start = next
        .keys()
        .copied()
        .filter(|a| !heads.contains(a))
        .min()
        .ok_or_else(|| Error::NoLoop("ring does not meet the cut".into()))?;
    let mut path = vec![start];
    let mut cur = start;
    while let Some(&b) = next.get(&cur) {
        path.push(b);
        cur = b;
        if path.len() > n {
            return Err(Error::NoLoop("ring is not a simple chain".into()));
        }
    }
    if !tags[start].contains(&Tag::CutPlus) || !tags[cur].contains(&Tag::CutMinus) {
        return Err(Error::NoLoop("ring does not run from the plus to the minus side of the cut".into()));
    }
    Ok(path)
}

/// Least-squares potential of the two horizontal forms with minus-side
/// values `Q X(plus) + tau`, `Q` the pair rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalPotential {
    pub x: Vec<V2>,
    /// Translation across the cut; zero without a cut.
    pub tau: V2,
    pub rotation: f64,
}

pub fn horizontal_potential(mesh: &DomainMesh, frame: &GradientFrame, base: usize) -> Result<HorizontalPotential> {
    let n = mesh.num_nodes();
    let w1 = one_form(frame, Form::X1);
    let w2 = one_form(frame, Form::X2);
    let mut partner = vec![usize::MAX; n];
    for &(a, b) in &mesh.pairing {
        partner[b] = a;
    }
    let mut dof = vec![usize::MAX; n];
    let mut nd = 0;
    for k in 0..n {
        if partner[k] == usize::MAX && k != base {
            dof[k] = nd;
            nd += 1;
        }
    }
    let has_tau = !mesh.pairing.is_empty();
    let tau0 = nd;
    let dim = 2 * nd + if has_tau { 2 } else { 0 };
    let (s, c) = mesh.pair_rotation.sin_cos();
    // each nodal component as a list of (unknown, coefficient)
    let terms = |k: usize, comp: usize| -> Vec<(usize, f64)> {
        if partner[k] == usize::MAX {
            if dof[k] == usize::MAX {
                return Vec::new();
            }
            return vec![(2 * dof[k] + comp, 1.0)];
        }
        let pk = partner[k];
        let mut out = Vec::with_capacity(3);
        if dof[pk] != usize::MAX {
            let row = if comp == 0 { [c, -s] } else { [s, c] };
            for j in 0..2 {
                if row[j] != 0.0 {
                    out.push((2 * dof[pk] + j, row[j]));
                }
            }
        }
        out.push((2 * tau0 + comp, 1.0));
        out
    };
    let mut entries = Vec::new();
    let mut values = Vec::new();
    let mut rhs = vec![0.0; dim];
    for (t, tri) in mesh.tris.iter().enumerate() {
        let (g, area) = hat_gradients([mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]]);
        for comp in 0..2 {
            let omega = if comp == 0 { w1[t] } else { w2[t] };
            let mut lin: Vec<(usize, V2)> = Vec::new();
            for k in 0..3 {
                for (j, coef) in terms(tri[k], comp) {
                    lin.push((j, g[k] * coef));
                }
            }
            for &(i, gi) in &lin {
                rhs[i] += area * gi.dot(omega);
                for &(j, gj) in &lin {
                    if i <= j {
                        entries.push((i, j));
                        values.push(area * gi.dot(gj));
                    }
                }
            }
        }
    }
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    // duplicates (i, i) from the same pair of terms appear once per ordered
    // pair with i <= j, so off-diagonal entries are counted once
    let pattern = SpdPattern::new(dim, entries)?;
    let sol = pattern.factor(&values)?.solve(&rhs);
    let tau = if has_tau { V2::new(sol[2 * tau0], sol[2 * tau0 + 1]) } else { V2::ZERO };
    let mut x = vec![V2::ZERO; n];
    for k in 0..n {
        if dof[k] != usize::MAX {
            x[k] = V2::new(sol[2 * dof[k]], sol[2 * dof[k] + 1]);
        }
    }
    for k in 0..n {
        if partner[k] != usize::MAX {
            x[k] = x[partner[k]].rotate(mesh.pair_rotation) + tau;
        }
    }
    Ok(HorizontalPotential { x, tau, rotation: mesh.pair_rotation })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodVector {
    /// Horizontal period of a loop once around the puncture.
    pub horizontal: V2,
    pub third: f64,
    /// Translation across the cut of the horizontal potential.
    pub tau: V2,
    /// Loop integral of the horizontal forms along a mesh ring, when the
    /// domain has a plain cut.
    pub ring: Option<V2>,
}

/// Period of the conjugate forms around the puncture. On a sector of a
/// star domain the loop is composed of the rotated copies of the sector.
pub fn period_vector(mesh: &DomainMesh, frame: &GradientFrame, psi: &PsiField) -> Result<PeriodVector> {
    if mesh.pairing.is_empty() {
        return Err(Error::NoLoop("domain has no cut".into()));
    }
    let hp = horizontal_potential(mesh, frame, psi.base)?;
    period_from_potential(mesh, frame, psi, &hp)
}

pub fn period_from_potential(
    mesh: &DomainMesh,
    frame: &GradientFrame,
    psi: &PsiField,
    hp: &HorizontalPotential,
) -> Result<PeriodVector> {
    match &mesh.domain.topology {
        Topology::Sector { spec } => {
            let mut acc = V2::ZERO;
            let mut third = 0.0;
            for k in 0..spec.r() {
                acc += hp.tau.rotate(hp.rotation * k as f64);
                third += psi.third_period;
            }
            Ok(PeriodVector { horizontal: acc, third, tau: hp.tau, ring: None })
        }
        _ => {
            let ring = puncture_loop(mesh, 3)
                .and_then(|path| {
                    Ok(V2::new(
                        line_integral(mesh, frame, Form::X1, &path)?,
                        line_integral(mesh, frame, Form::X2, &path)?,
                    ))
                })
                .ok();
            Ok(PeriodVector { horizontal: hp.tau, third: psi.third_period, tau: hp.tau, ring })
        }
    }
}

/// End of a surface: strip in developed coordinates and its annulus nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EndInfo {
    pub edge: usize,
    pub strip: Strip,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    pub pos: Vec<[f64; 3]>,
    pub tris: Vec<[usize; 3]>,
    /// Pre-image of each vertex in the developed plane.
    pub uv: Vec<V2>,
    /// 0 on the original sheet, 1 on the mirror image.
    pub sheet: Vec<u8>,
    pub ends: Vec<EndInfo>,
    /// Vertices on the planar symmetry curves `z = 0`.
    pub symmetry: Vec<usize>,
    /// Unwelded `(plus, minus)` vertex pairs of the cut.
    pub cut: Vec<(usize, usize)>,
    pub reflected: bool,
}

fn end_nodes(strip: &Strip, uv: &[V2]) -> Vec<usize> {
    (0..uv.len())
        .filter(|&k| {
            let (s, t) = strip.local(uv[k]);
            let eps = 1e-9 * strip.length;
            s >= -eps && s <= strip.width + eps && t >= 0.5 * strip.length - eps && t <= strip.length + eps
        })
        .collect()
}

/// Immersed half surface `(X1*, X2*, Psi)`; sector domains are completed by
/// their rotated copies. Fails with `PeriodNotClosed` when the horizontal
/// period exceeds `tol`, unless `tol` is `None`.
pub fn conjugate_surface(
    mesh: &DomainMesh,
    frame: &GradientFrame,
    psi: &PsiField,
    tol: Option<f64>,
) -> Result<SurfaceMesh> {
    let hp = horizontal_potential(mesh, frame, psi.base)?;
    if !mesh.pairing.is_empty() {
        let per = period_from_potential(mesh, frame, psi, &hp)?;
        if let Some(tol) = tol {
            if per.horizontal.norm() > tol {
                return Err(Error::PeriodNotClosed(per.horizontal.norm()));
            }
        }
    }
    let tags = mesh.node_tags();
    let is_sym =
        |k: usize| tags[k].iter().any(|t| matches!(t, Tag::Puncture | Tag::VertexArc(_)));
    let copies = match &mesh.domain.topology {
        Topology::Sector { spec } => spec.r(),
        _ => 1,
    };
    let n = mesh.num_nodes();
    let mut s = SurfaceMesh {
        pos: Vec::with_capacity(n * copies),
        tris: Vec::with_capacity(mesh.tris.len() * copies),
        uv: Vec::with_capacity(n * copies),
        sheet: Vec::new(),
        ends: Vec::new(),
        symmetry: Vec::new(),
        cut: Vec::new(),
        reflected: false,
    };
    let mut shift = V2::ZERO;
    let strips = mesh.domain.strips();
    for k in 0..copies {
        let ang = hp.rotation * k as f64;
        let off = s.pos.len();
        for m in 0..n {
            let x = hp.x[m].rotate(ang) + shift;
            s.pos.push([x.x, x.y, psi.values[m]]);
            s.uv.push(mesh.nodes[m].rotate(ang));
            s.sheet.push(0);
            if is_sym(m) {
                s.symmetry.push(off + m);
            }
        }
        for t in &mesh.tris {
            s.tris.push([t[0] + off, t[1] + off, t[2] + off]);
        }
        for st in &strips {
            let strip = Strip {
                foot: st.foot.rotate(ang),
                dir: st.dir.rotate(ang),
                normal: st.normal.rotate(ang),
                ..*st
            };
            let nodes = end_nodes(&strip, &s.uv[off..]).into_iter().map(|m| m + off).collect();
            s.ends.push(EndInfo { edge: (st.index + k) % mesh.domain.polygon.r(), strip, nodes });
        }
        shift += hp.tau.rotate(ang);
    }
    for k in 0..copies {
        for &(a, b) in &mesh.pairing {
            // minus side of copy k meets the plus side of copy k + 1
            let (pa, pb) = if copies == 1 { (a, b) } else { (((k + 1) % copies) * n + a, k * n + b) };
            s.cut.push((pa, pb));
        }
    }
    Ok(s)
}

/// Largest distance between corresponding points of two curves.
pub fn curve_gap(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

/// Largest distance between the two sides of the cut of a half surface.
pub fn cut_gap(surface: &SurfaceMesh) -> f64 {
    let a: Vec<[f64; 3]> = surface.cut.iter().map(|&(p, _)| surface.pos[p]).collect();
    let b: Vec<[f64; 3]> = surface.cut.iter().map(|&(_, m)| surface.pos[m]).collect();
    curve_gap(&a, &b)
}

pub fn mirror(p: [f64; 3]) -> [f64; 3] {
    [p[0], p[1], -p[2]]
}

/// Double the half surface by the reflection in `z = 0`, welding the copies
/// along the symmetry curves and the two sides of the cut. Fails with
/// `WeldGap` when a welded pair is further apart than `tol`.
pub fn reflect_and_glue(half: &SurfaceMesh, tol: f64) -> Result<SurfaceMesh> {
    if half.reflected {
        return Err(Error::WeldGap(f64::NAN));
    }
    let n = half.pos.len();
    let sym_gap = half.symmetry.iter().map(|&k| half.pos[k][2].abs()).fold(0.0, f64::max);
    if sym_gap > tol {
        return Err(Error::WeldGap(sym_gap));
    }
    let gap = cut_gap(half);
    if gap > tol {
        return Err(Error::WeldGap(gap));
    }
    // union-find over the doubled vertex set
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], mut k: usize) -> usize {
        while p[k] != k {
            p[k] = p[p[k]];
            k = p[k];
        }
        k
    }
    let union = |p: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            p[hi] = lo;
        }
    };
    for &k in &half.symmetry {
        union(&mut parent, k, n + k);
    }
    for &(a, b) in &half.cut {
        union(&mut parent, a, b);
        union(&mut parent, n + a, n + b);
    }
    let mut index = vec![usize::MAX; 2 * n];
    let mut out = SurfaceMesh {
        pos: Vec::new(),
        tris: Vec::new(),
        uv: Vec::new(),
        sheet: Vec::new(),
        ends: Vec::new(),
        symmetry: Vec::new(),
        cut: Vec::new(),
        reflected: true,
    };
    let sym: HashSet<usize> = half.symmetry.iter().copied().collect();
    for k in 0..2 * n {
        let r = find(&mut parent, k);
        if index[r] == usize::MAX {
            index[r] = out.pos.len();
            let src = r % n;
            let mut p = if r < n { half.pos[src] } else { mirror(half.pos[src]) };
            if sym.contains(&src) {
                p[2] = 0.0;
                out.symmetry.push(out.pos.len());
            }
            out.pos.push(p);
            out.uv.push(half.uv[src]);
            out.sheet.push((r >= n) as u8);
        }
        index[k] = index[r];
    }
    for t in &half.tris {
        out.tris.push([index[t[0]], index[t[1]], index[t[2]]]);
    }
    for t in &half.tris {
        // the mirror reverses orientation
        out.tris.push([index[n + t[0]], index[n + t[2]], index[n + t[1]]]);
    }
    for e in &half.ends {
        let mut nodes: Vec<usize> = e.nodes.iter().flat_map(|&k| [index[k], index[n + k]]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        out.ends.push(EndInfo { nodes, ..e.clone() });
    }
    Ok(out)
}

/// Plain-text export: `v x y z` and 1-based `f i j k` lines.
pub fn write_surface(surface: &SurfaceMesh, header: &str) -> String {
    let mut s = String::new();
    for line in header.lines() {
        s.push_str(&format!("# {line}\n"));
    }
    for p in &surface.pos {
        s.push_str(&format!("v {:.17e} {:.17e} {:.17e}\n", p[0], p[1], p[2]));
    }
    for t in &surface.tris {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s
}

/// Sidecar index: symmetry-curve vertices and end annuli, 0-based.
pub fn write_surface_index(surface: &SurfaceMesh, header: &str) -> String {
    let mut s = String::new();
    for line in header.lines() {
        s.push_str(&format!("# {line}\n"));
    }
    let join = |v: &[usize]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
    s.push_str(&format!("symmetry {}\n", join(&surface.symmetry)));
    for e in &surface.ends {
        s.push_str(&format!("end {} {}\n", e.edge + 1, join(&e.nodes)));
    }
    s
}

pub fn surface_area(surface: &SurfaceMesh) -> f64 {
    surface.tris.iter().map(|t| tri_area3(t.map(|k| surface.pos[k]))).sum()
}

pub fn tri_area3([a, b, c]: [[f64; 3]; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
}
