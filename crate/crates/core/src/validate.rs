//! Checks of solutions and surfaces against the structural facts they must
//! satisfy: end fluxes, total curvature, strip gradient bounds, the
//! invariants of the third conjugate coordinate and closure of the cut.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::{PI, TAU};

use crate::conjugate::{cut_gap, tri_area3, PsiField, SurfaceMesh};
use crate::domain::{DomainMesh, Tag};
use crate::error::{Error, Result};
use crate::geom::V2;
use crate::solver::SolutionField;

type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: P3, b: P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: P3, s: f64) -> P3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flux {
    pub horizontal: V2,
    pub vertical: f64,
    /// Root mean square deviation of the horizontal part over the sections.
    pub spread: f64,
    pub sections: usize,
}

/// Cross-sections averaged by `end_flux`.
pub const FLUX_SECTIONS: usize = 128;

/// Flux of end `end`: the conormal pointing out of the end, integrated over
/// every sheet crossing a cross-section of its strip, averaged over
/// sections evenly spread through the outer half of the strip. Single
/// sections are noisy where the strip sides make the surface elements long
/// and thin.
pub fn end_flux(surface: &SurfaceMesh, end: usize) -> Result<Flux> {
    let info = surface.ends.get(end).ok_or(Error::MissingEndMetadata(end))?;
    let len = info.strip.length;
    let n = FLUX_SECTIONS;
    let mut sum = [0.0; 3];
    let mut sq = 0.0;
    for k in 0..n {
        let f = end_flux_at(surface, end, len * (0.5 + 0.5 * (k as f64 + 0.5) / n as f64))?;
        sum = add(sum, f);
        sq += f[0] * f[0] + f[1] * f[1];
    }
    let m = scale(sum, 1.0 / n as f64);
    let spread = (sq / n as f64 - m[0] * m[0] - m[1] * m[1]).max(0.0).sqrt();
    Ok(Flux { horizontal: V2::new(m[0], m[1]), vertical: m[2], spread, sections: n })
}

/// Flux through the cross-section at `depth` above the edge.
pub fn end_flux_at(surface: &SurfaceMesh, end: usize, depth: f64) -> Result<[f64; 3]> {
    let info = surface.ends.get(end).ok_or(Error::MissingEndMetadata(end))?;
    let strip = info.strip;
    if info.nodes.is_empty() {
        return Err(Error::MissingEndMetadata(end));
    }
    let mut total = [0.0; 3];
    for tri in &surface.tris {
        let uv = tri.map(|k| strip.local(surface.uv[k]));
        if uv.iter().all(|&(s, _)| s < -1e-9 || s > strip.width + 1e-9) {
            continue;
        }
        let t = uv.map(|(_, t)| t - depth);
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo < 0.0 && hi >= 0.0) {
            continue;
        }
        let x = tri.map(|k| surface.pos[k]);
        // crossing points of the level t = depth on the triangle edges
        let mut cuts = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            if (t[a] < 0.0) != (t[b] < 0.0) {
                let s = t[a] / (t[a] - t[b]);
                cuts.push(add(x[a], scale(sub(x[b], x[a]), s)));
            }
        }
        if cuts.len() != 2 {
            continue;
        }
        let seg = sub(cuts[1], cuts[0]);
        let len = norm(seg);
        if len == 0.0 {
            continue;
        }
        // 3D gradient of the depth over the triangle, made orthogonal to
        // the section; it points into the end
        let e1 = sub(x[1], x[0]);
        let e2 = sub(x[2], x[0]);
        let n = cross(e1, e2);
        let nn = dot(n, n);
        if nn == 0.0 {
            continue;
        }
        let grad = scale(
            add(scale(cross(n, e2), -(t[1] - t[0])), scale(cross(n, e1), t[2] - t[0])),
            1.0 / nn,
        );
        let unit = scale(seg, 1.0 / len);
        let nu = sub(grad, scale(unit, dot(grad, unit)));
        let m = norm(nu);
        if m == 0.0 {
            continue;
        }
        total = sub(total, scale(nu, len / m));
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvature {
    /// Sum of the angle defects over interior vertices.
    pub interior: f64,
    /// Sum of their magnitudes.
    pub interior_abs: f64,
    /// Sum over patches of the magnitude of the summed defects.
    pub patch_abs: f64,
    /// Sum of `pi - angle` over boundary vertices.
    pub boundary_turning: f64,
    /// Curvature of the ends beyond the truncation.
    pub tails: f64,
    pub euler: i64,
    pub boundary_loops: usize,
    /// `patch_abs + tails`.
    pub total: f64,
}

/// Vertex angle sums and the boundary vertex set.
fn angle_sums(surface: &SurfaceMesh) -> (Vec<f64>, Vec<bool>, usize) {
    let n = surface.pos.len();
    let mut angle = vec![0.0; n];
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &surface.tris {
        for k in 0..3 {
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let u = sub(surface.pos[b], surface.pos[a]);
            let v = sub(surface.pos[c], surface.pos[a]);
            angle[a] += norm(cross(u, v)).atan2(dot(u, v));
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut on_boundary = vec![false; n];
    let mut bnd_edges = 0;
    for (&(a, b), &c) in &edges {
        if c == 1 {
            on_boundary[a] = true;
            on_boundary[b] = true;
            bnd_edges += 1;
        }
    }
    (angle, on_boundary, bnd_edges)
}

fn count_loops(surface: &SurfaceMesh) -> (usize, i64) {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &surface.tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let used: HashSet<usize> = surface.tris.iter().flatten().copied().collect();
    let euler = used.len() as i64 - edges.len() as i64 + surface.tris.len() as i64;
    // components of the boundary graph
    let mut parent: HashMap<usize, usize> = HashMap::new();
    fn find(p: &mut HashMap<usize, usize>, k: usize) -> usize {
        let mut r = k;
        while let Some(&q) = p.get(&r) {
            if q == r {
                break;
            }
            r = q;
        }
        p.insert(k, r);
        r
    }
    for (&(a, b), &c) in &edges {
        if c == 1 {
            parent.entry(a).or_insert(a);
            parent.entry(b).or_insert(b);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra.max(rb), ra.min(rb));
            }
        }
    }
    let keys: Vec<usize> = parent.keys().copied().collect();
    let mut roots = HashSet::new();
    for k in keys {
        roots.insert(find(&mut parent, k));
    }
    (roots.len(), euler)
}

/// Total absolute curvature of a doubled surface. Interior angle defects
/// are summed over square patches of side `patch` in the parameter plane,
/// one set per sheet, and the magnitudes of the patch sums are added; with
/// `patch = 0` every vertex is its own patch. Patches average out the
/// alternating defects of a crumpled discretization, which per vertex sums
/// count many times over. Each end adds the curvature beyond the
/// truncation, `2 pi` less the turning of its boundary loop.
pub fn total_curvature(surface: &SurfaceMesh, patch: f64) -> Result<Curvature> {
    if !surface.reflected && !surface.ends.is_empty() {
        return Err(Error::OpenSurface);
    }
    let (angle, on_boundary, _) = angle_sums(surface);
    let mut used = vec![false; surface.pos.len()];
    for &k in surface.tris.iter().flatten() {
        used[k] = true;
    }
    let (mut interior, mut interior_abs, mut boundary_turning) = (0.0, 0.0, 0.0);
    let mut patches: BTreeMap<(u8, i64, i64), f64> = BTreeMap::new();
    for k in (0..used.len()).filter(|&k| used[k]) {
        if on_boundary[k] {
            boundary_turning += PI - angle[k];
            continue;
        }
        let d = TAU - angle[k];
        interior += d;
        interior_abs += d.abs();
        let key = if patch > 0.0 {
            let uv = surface.uv[k];
            (surface.sheet[k], (uv.x / patch).floor() as i64, (uv.y / patch).floor() as i64)
        } else {
            (0, k as i64, 0)
        };
        *patches.entry(key).or_default() += d;
    }
    let patch_abs = patches.values().map(|v| v.abs()).sum();
    let (boundary_loops, euler) = count_loops(surface);
    let tails = if surface.ends.is_empty() { 0.0 } else { TAU * surface.ends.len() as f64 - boundary_turning };
    Ok(Curvature {
        interior,
        interior_abs,
        patch_abs,
        boundary_turning,
        tails,
        euler,
        boundary_loops,
        total: patch_abs + tails,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JenkinsReport {
    pub strip: usize,
    pub width: f64,
    pub checked: usize,
    /// Smallest `|p|/W - (1 - a^2/y^2 - eps)` over checked elements.
    pub p_margin: f64,
    /// Smallest `sqrt(2) a/y + eps - |q|/W` over checked elements.
    pub q_margin: f64,
    pub pass: bool,
}

pub const JENKINS_EPS: f64 = 0.02;

/// Gradient bounds deep in strip `strip`: with `y` the height above the
/// edge and `a` the width, every element with `y >= 4a` must have the
/// gradient nearly across the strip.
pub fn jenkins_check(mesh: &DomainMesh, field: &SolutionField, strip: usize) -> Result<JenkinsReport> {
    let st = *mesh
        .domain
        .strips()
        .iter()
        .find(|s| s.index == strip)
        .ok_or_else(|| Error::ConfigError(format!("no strip {}", strip + 1)))?;
    let a = st.width;
    let mut rep =
        JenkinsReport { strip, width: a, checked: 0, p_margin: f64::INFINITY, q_margin: f64::INFINITY, pass: true };
    for (t, tri) in mesh.tris.iter().enumerate() {
        let pts = tri.map(|k| mesh.nodes[k]);
        let c = (pts[0] + pts[1] + pts[2]) * (1.0 / 3.0);
        if !st.contains(c) {
            continue;
        }
        let y = st.local(c).1;
        if y < 4.0 * a {
            continue;
        }
        let g = mesh.tri_gradient(t, &field.u);
        let w = (1.0 + g.norm2()).sqrt();
        let p = g.dot(st.dir).abs() / w;
        let q = g.dot(st.normal).abs() / w;
        rep.checked += 1;
        rep.p_margin = rep.p_margin.min(p - (1.0 - a * a / (y * y) - JENKINS_EPS));
        rep.q_margin = rep.q_margin.min(2f64.sqrt() * a / y + JENKINS_EPS - q);
    }
    rep.pass = rep.p_margin >= 0.0 && rep.q_margin >= 0.0;
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Check { name, value, bound, pass: value <= bound }
    }
}

/// Largest gap between the values of `psi` along the two sides of each
/// strip, compared at equal heights.
fn strip_side_gap(mesh: &DomainMesh, psi: &[f64]) -> f64 {
    let r = mesh.domain.polygon.r();
    let mut worst: f64 = 0.0;
    for st in mesh.domain.strips() {
        let side = |tag: Tag| -> Vec<(f64, f64)> {
            let mut v: Vec<(f64, f64)> = mesh.chain(tag).iter().map(|&k| (st.local(mesh.nodes[k]).1, psi[k])).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        let plus = side(Tag::StripPlus(st.index));
        let minus = side(Tag::StripMinus((st.index + 1) % r));
        if plus.len() < 2 || minus.len() < 2 {
            continue;
        }
        for &(t, v) in &plus {
            if t < minus[0].0 || t > minus[minus.len() - 1].0 {
                continue;
            }
            let j = minus.partition_point(|m| m.0 <= t).clamp(1, minus.len() - 1);
            let (a, b) = (minus[j - 1], minus[j]);
            let s = if b.0 > a.0 { (t - a.0) / (b.0 - a.0) } else { 0.0 };
            worst = worst.max((v - (a.1 + s * (b.1 - a.1))).abs());
        }
    }
    worst
}

/// Invariants of the third conjugate coordinate: zero at the basepoint and
/// on the symmetry arcs, nonnegative, 1-Lipschitz along mesh edges, equal
/// on the two sides of each strip.
pub fn psi_invariants(mesh: &DomainMesh, psi: &PsiField, tol: f64) -> Vec<Check> {
    let v = &psi.values;
    let mut out = vec![Check::at_most("psi_base", v[psi.base].abs(), 0.0)];
    let on = |tag: Tag| mesh.chain(tag).iter().map(|&k| v[k].abs()).fold(0.0, f64::max);
    let vertex = mesh.domain.vertex_indices().into_iter().map(|i| on(Tag::VertexArc(i))).fold(0.0, f64::max);
    out.push(Check::at_most("psi_vertices", vertex, tol));
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(Check::at_most("psi_min", -min, tol));
    let mut lip: f64 = 0.0;
    for t in &mesh.tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            lip = lip.max((v[a] - v[b]).abs() / mesh.nodes[a].dist(mesh.nodes[b]));
        }
    }
    out.push(Check::at_most("psi_lipschitz", lip, 1.0 + tol));
    out.push(Check::at_most("psi_strip_sides", strip_side_gap(mesh, v), tol));
    out
}

/// Largest distance between the two sides of the cut of a half surface;
/// zero once the cut is welded.
pub fn closure_check(surface: &SurfaceMesh) -> f64 {
    cut_gap(surface)
}

/// Total area of a surface.
pub fn area(surface: &SurfaceMesh) -> f64 {
    surface.tris.iter().map(|t| tri_area3(t.map(|k| surface.pos[k]))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{frame_from_parts, gradient_frame, psi_field, EndInfo};
    use crate::domain::{triangulate, CutDomain, MeshOptions, Strip};
    use crate::polygon::FluxPolygon;
    use crate::solver::{solve, BoundaryData, SolveOptions};

    /// Grid surface over `[0, w] x [0, l]` with `n x m` cells.
    fn grid(w: f64, l: f64, n: usize, m: usize, f: impl Fn(f64, f64) -> P3) -> SurfaceMesh {
        let mut s = SurfaceMesh {
            pos: Vec::new(),
            tris: Vec::new(),
            uv: Vec::new(),
            sheet: Vec::new(),
            ends: Vec::new(),
            symmetry: Vec::new(),
            cut: Vec::new(),
            reflected: false,
        };
        for j in 0..=m {
            for i in 0..=n {
                let uv = V2::new(w * i as f64 / n as f64, l * j as f64 / m as f64);
                s.pos.push(f(uv.x, uv.y));
                s.uv.push(uv);
                s.sheet.push(0);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        for j in 0..m {
            for i in 0..n {
                s.tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                s.tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        s
    }

    fn with_end(mut s: SurfaceMesh, w: f64, l: f64) -> SurfaceMesh {
        let strip = Strip { index: 0, foot: V2::ZERO, dir: V2::new(1.0, 0.0), normal: V2::new(0.0, 1.0), width: w, length: l };
        let nodes = (0..s.pos.len()).filter(|&k| s.uv[k].y >= 0.5 * l).collect();
        s.ends.push(EndInfo { edge: 0, strip, nodes });
        s.reflected = true;
        s
    }

    fn catenoid(a: f64, n: usize, m: usize) -> SurfaceMesh {
        grid(TAU, 2.0 * a, n, m, |th, t| {
            let z = t - a;
            [z.cosh() * th.cos(), z.cosh() * th.sin(), z]
        })
    }

    #[test]
    fn flat_strip_flux_and_curvature() {
        let s = with_end(grid(1.5, 4.0, 6, 16, |x, y| [x, y, 0.0]), 1.5, 4.0);
        let f = end_flux(&s, 0).unwrap();
        assert!((f.horizontal - V2::new(0.0, -1.5)).norm() < 1e-12, "{f:?}");
        assert!(f.vertical.abs() < 1e-12 && f.spread < 1e-12);
        let c = total_curvature(&s, 0.0).unwrap();
        assert!(c.interior_abs < 1e-12 && c.patch_abs < 1e-12);
        // the boundary of a flat square turns once, so nothing is missing
        assert!((c.boundary_turning - TAU).abs() < 1e-12 && c.tails.abs() < 1e-12);
        assert_eq!((c.euler, c.boundary_loops), (1, 1));
        assert!(matches!(end_flux(&s, 1), Err(Error::MissingEndMetadata(1))));
        let mut open = s.clone();
        open.reflected = false;
        assert!(matches!(total_curvature(&open, 0.0), Err(Error::OpenSurface)));
    }

    #[test]
    fn catenoid_flux_is_vertical() {
        let (a, l) = (1.0, 2.0);
        let s = with_end(catenoid(a, 256, 64), TAU, l);
        let f = end_flux(&s, 0).unwrap();
        assert!(f.horizontal.norm() < 1e-9, "{f:?}");
        assert!((f.vertical + TAU).abs() < 2e-3, "{f:?}");
    }

    #[test]
    fn catenoid_band_curvature() {
        // the Gauss image of |z| <= a is the zone |n_z| <= tanh a
        let a: f64 = 1.0;
        let s = catenoid(a, 256, 128);
        let exact = 2.0 * TAU * a.tanh();
        let c = total_curvature(&s, 0.0).unwrap();
        assert!(((-c.interior) - exact).abs() < 0.01 * exact, "{c:?} {exact}");
        assert!((c.patch_abs - exact).abs() < 0.01 * exact);
        let coarse = total_curvature(&s, 0.3).unwrap();
        assert!((coarse.patch_abs - c.patch_abs).abs() < 1e-9);
    }

    #[test]
    fn closed_octahedron_defects_sum_to_four_pi() {
        let pos = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
        let tris = vec![[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]];
        let s = SurfaceMesh {
            uv: vec![V2::ZERO; 6],
            sheet: vec![0; 6],
            pos,
            tris,
            ends: Vec::new(),
            symmetry: Vec::new(),
            cut: Vec::new(),
            reflected: false,
        };
        let c = total_curvature(&s, 0.0).unwrap();
        assert!((c.interior - 2.0 * TAU).abs() < 1e-12);
        assert_eq!((c.euler, c.boundary_loops), (2, 0));
    }

    #[test]
    fn closure_of_a_translated_curve() {
        let mut s = grid(1.0, 1.0, 4, 4, |x, y| [x, y, 0.0]);
        let left: Vec<usize> = (0..5).map(|j| j * 5).collect();
        let right: Vec<usize> = (0..5).map(|j| j * 5 + 4).collect();
        s.cut = left.iter().zip(&right).map(|(&a, &b)| (a, b)).collect();
        for &k in &right {
            s.pos[k] = add(s.pos[k - 4], [0.2, 0.0, 0.0]);
        }
        assert!((closure_check(&s) - 0.2).abs() < 1e-15);
    }

    fn triangle_solve(h: f64) -> (DomainMesh, SolutionField) {
        let s = 3f64.sqrt() / 2.0;
        let p = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)]).unwrap();
        let mesh = triangulate(&CutDomain::new(&p, p.centroid(), 8.0).unwrap(), &MeshOptions::new(h)).unwrap();
        let field = solve(&mesh, &BoundaryData::new(10.0), &SolveOptions::default()).unwrap();
        (mesh, field)
    }

    #[test]
    fn triangle_solve_checks() {
        let (mesh, field) = triangle_solve(0.1);
        for i in 0..3 {
            let j = jenkins_check(&mesh, &field, i).unwrap();
            assert!(j.checked > 50 && j.pass, "{j:?}");
        }
        let frame = gradient_frame(&mesh, &field).unwrap();
        let psi = psi_field(&mesh, &frame, None).unwrap();
        let checks = psi_invariants(&mesh, &psi, 1e-2);
        for c in &checks {
            // nodal values near the vertices overshoot slope 1 by a few percent
            let ok = if c.name == "psi_lipschitz" { c.value < 1.06 } else { c.pass };
            assert!(ok, "{c:?}");
        }
        // one corrupted value breaks the Lipschitz bound
        let mut bad = psi.clone();
        let k = mesh.tris[mesh.tris.len() / 2][0];
        bad.values[k] += 1.0;
        let lip = psi_invariants(&mesh, &bad, 1e-2).into_iter().find(|c| c.name == "psi_lipschitz").unwrap();
        assert!(!lip.pass && lip.value > 2.0);
        // a flat field has a flat conjugate
        let zero = frame_from_parts(&mesh.nodes, &mesh.tris, &vec![0.0; mesh.num_nodes()]).unwrap();
        let flat = psi_field(&mesh, &zero, None).unwrap();
        assert!(flat.values.iter().all(|v| *v == 0.0));
        assert!(psi_invariants(&mesh, &flat, 1e-2).iter().all(|c| c.pass));
    }
}
