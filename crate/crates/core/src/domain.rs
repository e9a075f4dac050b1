//! One period of the multi-domain: the polygon disk with a half-strip glued
//! to each edge, punctured at `A` and slit from `A` to `P_1`, or the
//! fundamental sector of a star polygon. Triangulated with a graded
//! constrained Delaunay mesh.
//!
//! The puncture and the polygon vertices are not mesh nodes. Each is cut out
//! by a small circular arc carrying a natural boundary condition: over those
//! points the limit graph contains a vertical line, and the conjugate of a
//! vertical line is a planar symmetry curve. Meshing the arcs keeps that
//! curve visible in the discrete conjugate surface.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::error::{Error, Result};
use crate::geom::{seg_dist, V2};
use crate::polygon::{FluxPolygon, StarSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    /// Side of strip `i` at `P_i`, value `+inf`.
    StripPlus(usize),
    /// Side of strip `i-1` at `P_i`, value `-inf`.
    StripMinus(usize),
    StripCap(usize),
    CutPlus,
    CutMinus,
    Puncture,
    VertexArc(usize),
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::StripPlus(i) => write!(f, "STRIP_PLUS:{}", i + 1),
            Tag::StripMinus(i) => write!(f, "STRIP_MINUS:{}", i + 1),
            Tag::StripCap(i) => write!(f, "STRIP_CAP:{}", i + 1),
            Tag::CutPlus => write!(f, "CUT_PLUS"),
            Tag::CutMinus => write!(f, "CUT_MINUS"),
            Tag::Puncture => write!(f, "PUNCTURE"),
            Tag::VertexArc(i) => write!(f, "VERTEX_ARC:{}", i + 1),
        }
    }
}

impl std::str::FromStr for Tag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Tag> {
        let bad = || Error::MeshFailure(format!("unknown tag {s}"));
        let idx = |t: &str| -> Result<usize> {
            let i: usize = t.parse().map_err(|_| bad())?;
            i.checked_sub(1).ok_or_else(bad)
        };
        match s.split_once(':') {
            None => match s {
                "CUT_PLUS" => Ok(Tag::CutPlus),
                "CUT_MINUS" => Ok(Tag::CutMinus),
                "PUNCTURE" => Ok(Tag::Puncture),
                _ => Err(bad()),
            },
            Some(("STRIP_PLUS", i)) => Ok(Tag::StripPlus(idx(i)?)),
            Some(("STRIP_MINUS", i)) => Ok(Tag::StripMinus(idx(i)?)),
            Some(("STRIP_CAP", i)) => Ok(Tag::StripCap(idx(i)?)),
            Some(("VERTEX_ARC", i)) => Ok(Tag::VertexArc(idx(i)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    /// Disk plus strips, no puncture.
    Genus0,
    /// Punctured at `a`, slit along `[a, P_1]`.
    Cut { a: V2 },
    /// Fundamental sector `O P_1 P_2` of a star polygon plus one strip; the
    /// rays `[O, P_1]` and `[O, P_2]` are identified by the rotation.
    Sector { spec: StarSpec },
}

/// Half-strip glued along edge `index`, from `foot = P_i` in direction `dir`,
/// extending along `normal` up to `length`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strip {
    pub index: usize,
    pub foot: V2,
    pub dir: V2,
    pub normal: V2,
    pub width: f64,
    pub length: f64,
}

impl Strip {
    /// Local coordinates: position across the strip and height above the edge.
    pub fn local(&self, p: V2) -> (f64, f64) {
        let d = p - self.foot;
        (d.dot(self.dir), d.dot(self.normal))
    }

    pub fn contains(&self, p: V2) -> bool {
        let (s, t) = self.local(p);
        s > 0.0 && s < self.width && t > 0.0 && t < self.length
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutDomain {
    pub polygon: FluxPolygon,
    pub topology: Topology,
    pub length: f64,
}

impl CutDomain {
    /// Punctured domain slit from `a` to `P_1`.
    pub fn new(polygon: &FluxPolygon, a: V2, length: f64) -> Result<Self> {
        polygon.require_convex()?;
        check_length(polygon, length)?;
        let (inside, dist) = polygon.contains(a);
        let min = 1e-3 * polygon.diameter();
        if !inside || dist < min {
            return Err(Error::PunctureTooClose { dist, min });
        }
        let p1 = polygon.vertex(0);
        let r = polygon.r();
        // the slit may only touch the boundary at P_1
        for i in 1..r - 1 {
            if segments_cross(a, p1, polygon.vertex(i), polygon.vertex(i + 1)) {
                return Err(Error::CutCrossesBoundary);
            }
        }
        Ok(CutDomain { polygon: polygon.clone(), topology: Topology::Cut { a }, length })
    }

    pub fn genus0(polygon: &FluxPolygon, length: f64) -> Result<Self> {
        polygon.require_convex()?;
        check_length(polygon, length)?;
        Ok(CutDomain { polygon: polygon.clone(), topology: Topology::Genus0, length })
    }

    /// Fundamental sector of the star polygon centered at the origin.
    pub fn star(spec: StarSpec, length: f64) -> Result<Self> {
        let polygon = FluxPolygon::star(spec);
        check_length(&polygon, length)?;
        Ok(CutDomain { polygon, topology: Topology::Sector { spec }, length })
    }

    /// Star sector built on a rescaled star polygon.
    pub fn star_scaled(spec: StarSpec, scale: f64, length: f64) -> Result<Self> {
        let polygon = FluxPolygon::star(spec).scaled(scale);
        check_length(&polygon, length)?;
        Ok(CutDomain { polygon, topology: Topology::Sector { spec }, length })
    }

    pub fn puncture(&self) -> Option<V2> {
        match &self.topology {
            Topology::Genus0 => None,
            Topology::Cut { a } => Some(*a),
            Topology::Sector { .. } => Some(V2::ZERO),
        }
    }

    /// Total angle around the puncture: `2 q pi`.
    pub fn cone_angle(&self) -> f64 {
        match &self.topology {
            Topology::Sector { spec } => 2.0 * PI * spec.q() as f64,
            _ => 2.0 * PI,
        }
    }

    /// Angle of the sector, `2 q pi / r`, or the full turn.
    pub fn sector_angle(&self) -> f64 {
        match &self.topology {
            Topology::Sector { spec } => spec.step_angle(),
            _ => 2.0 * PI,
        }
    }

    /// Strips present in this domain (one for a sector).
    pub fn strips(&self) -> Vec<Strip> {
        let p = &self.polygon;
        let n = match self.topology {
            Topology::Sector { .. } => 1,
            _ => p.r(),
        };
        (0..n)
            .map(|i| Strip {
                index: i,
                foot: p.vertex(i),
                dir: p.edge(i).unit(),
                normal: p.outward_normal(i),
                width: p.edge(i).norm(),
                length: self.length,
            })
            .collect()
    }

    /// Polygon vertices bordering this domain (two for a sector).
    pub fn vertex_indices(&self) -> Vec<usize> {
        match self.topology {
            Topology::Sector { .. } => vec![0, 1],
            _ => (0..self.polygon.r()).collect(),
        }
    }

    /// Inside the disk part (or the sector triangle), ignoring strips and arcs.
    pub fn in_core(&self, x: V2) -> bool {
        match self.topology {
            Topology::Sector { .. } => {
                let (o, a, b) = (V2::ZERO, self.polygon.vertex(0), self.polygon.vertex(1));
                (a - o).cross(x - o) > 0.0 && (b - a).cross(x - a) > 0.0 && (o - b).cross(x - b) > 0.0
            }
            _ => self.polygon.contains(x).0,
        }
    }
}

fn check_length(polygon: &FluxPolygon, length: f64) -> Result<()> {
    let min = 8.0 * polygon.max_edge();
    if !(length >= min * (1.0 - 1e-12)) {
        return Err(Error::MeshFailure(format!("strip length {length} below 8 x max edge = {min}")));
    }
    Ok(())
}

fn segments_cross(a: V2, b: V2, c: V2, d: V2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshOptions {
    /// Target edge length away from singular features.
    pub h: f64,
    /// Refinement factor near the puncture, the vertices and the cut.
    pub grading: f64,
    /// Radius of the hole around the puncture; default `h / (2 grading)`.
    pub hole_radius: Option<f64>,
    /// Radius of the arcs around the polygon vertices; default `h / (2 grading)`.
    pub arc_radius: Option<f64>,
    pub min_angle_deg: f64,
    /// Growth rate of the element size with distance from a polygon vertex,
    /// i.e. the angular resolution around it in radians.
    pub vertex_slope: f64,
}

impl MeshOptions {
    pub fn new(h: f64) -> Self {
        MeshOptions { h, grading: 4.0, hole_radius: None, arc_radius: None, min_angle_deg: 20.0, vertex_slope: 0.25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// Oriented with the domain on the left.
    pub a: usize,
    pub b: usize,
    pub tag: Tag,
}

/// Triangulated period domain.
#[derive(Clone, Debug)]
pub struct DomainMesh {
    pub domain: CutDomain,
    pub nodes: Vec<V2>,
    /// Counterclockwise triangles.
    pub tris: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// `(plus, minus)` node pairs across the cut, ordered from the puncture
    /// outward. For a sector the minus node is the plus node rotated by
    /// `pair_rotation` about the origin.
    pub pairing: Vec<(usize, usize)>,
    pub pair_rotation: f64,
    pub h: f64,
    pub grading: f64,
    pub hole_radius: f64,
    pub arc_radius: f64,
}

impl DomainMesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Boundary tags touching each node.
    pub fn node_tags(&self) -> Vec<Vec<Tag>> {
        let mut tags = vec![Vec::new(); self.nodes.len()];
        for e in &self.boundary {
            for n in [e.a, e.b] {
                if !tags[n].contains(&e.tag) {
                    tags[n].push(e.tag);
                }
            }
        }
        for t in &mut tags {
            t.sort();
        }
        tags
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tris[t];
        0.5 * (self.nodes[b] - self.nodes[a]).cross(self.nodes[c] - self.nodes[a])
    }

    /// Gradient on triangle `t` of the piecewise linear nodal function `u`.
    pub fn tri_gradient(&self, t: usize, u: &[f64]) -> V2 {
        let [a, b, c] = self.tris[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let area2 = (pb - pa).cross(pc - pa);
        let (e1, e2) = (pb - pa, pc - pa);
        let (d1, d2) = (u[b] - u[a], u[c] - u[a]);
        // solve g.e1 = d1, g.e2 = d2
        V2::new(d1 * e2.y - d2 * e1.y, d2 * e1.x - d1 * e2.x) * (1.0 / area2)
    }

    pub fn area(&self) -> f64 {
        (0..self.tris.len()).map(|t| self.tri_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut m = f64::INFINITY;
        for tri in &self.tris {
            for k in 0..3 {
                let p = self.nodes[tri[k]];
                let a = self.nodes[tri[(k + 1) % 3]] - p;
                let b = self.nodes[tri[(k + 2) % 3]] - p;
                m = m.min(a.cross(b).atan2(a.dot(b)).abs());
            }
        }
        m.to_degrees()
    }

    /// `V - E + F` of the triangle complex.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for t in &self.tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.nodes.len() as i64 - edges.len() as i64 + self.tris.len() as i64
    }

    /// Boundary node chain carrying `tag`, in boundary order.
    pub fn chain(&self, tag: Tag) -> Vec<usize> {
        let edges: Vec<&BoundaryEdge> = self.boundary.iter().filter(|e| e.tag == tag).collect();
        if edges.is_empty() {
            return Vec::new();
        }
        let next: HashMap<usize, usize> = edges.iter().map(|e| (e.a, e.b)).collect();
        let heads: std::collections::HashSet<usize> = edges.iter().map(|e| e.b).collect();
        let start = edges.iter().map(|e| e.a).find(|a| !heads.contains(a)).unwrap_or(edges[0].a);
        let mut out = vec![start];
        let mut cur = start;
        while let Some(&n) = next.get(&cur) {
            if n == start {
                break;
            }
            out.push(n);
            cur = n;
        }
        out
    }

    /// Triangles incident to each node.
    pub fn node_triangles(&self) -> Vec<Vec<usize>> {
        let mut nt = vec![Vec::new(); self.nodes.len()];
        for (t, tri) in self.tris.iter().enumerate() {
            for &n in tri {
                nt[n].push(t);
            }
        }
        nt
    }

    /// Neighbouring triangle across each edge `(tri[k], tri[k+1])`, if any.
    pub fn tri_neighbors(&self) -> Vec<[Option<usize>; 3]> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.tris.len());
        for (t, tri) in self.tris.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        self.tris
            .iter()
            .map(|tri| {
                let mut nb = [None; 3];
                for k in 0..3 {
                    nb[k] = owner.get(&(tri[(k + 1) % 3], tri[k])).copied();
                }
                nb
            })
            .collect()
    }
}

/// Piece of boundary curve.
#[derive(Clone, Copy, Debug)]
enum Shape {
    Line(V2, V2),
    /// Arc of `center + radius (cos t, sin t)`, `t` from `start` by `sweep`.
    Arc { center: V2, radius: f64, start: f64, sweep: f64 },
}

impl Shape {
    fn at(&self, t: f64) -> V2 {
        match *self {
            Shape::Line(a, b) => a.lerp(b, t),
            Shape::Arc { center, radius, start, sweep } => center + V2::polar(radius, start + sweep * t),
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Shape::Line(a, b) => a.dist(b),
            Shape::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn min_pieces(&self) -> usize {
        match *self {
            Shape::Line(..) => 1,
            Shape::Arc { sweep, .. } => (sweep.abs() / (PI / 12.0)).ceil().max(2.0) as usize,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    shape: Shape,
    tag: Tag,
}

/// Local target edge length.
struct Sizer {
    h: f64,
    fine: f64,
    slope: f64,
    points: Vec<V2>,
    segments: Vec<(V2, V2)>,
    /// Center, radius, edge length on the circle and growth rate.
    circles: Vec<(V2, f64, f64, f64)>,
}

impl Sizer {
    fn at(&self, x: V2) -> f64 {
        let zone = 2.0 * self.h;
        let mut s = self.h;
        for &p in &self.points {
            s = s.min(self.fine + self.slope * (x.dist(p) - zone).max(0.0));
        }
        for &(a, b) in &self.segments {
            s = s.min(self.fine + self.slope * (seg_dist(x, a, b) - zone).max(0.0));
        }
        for &(c, r, sc, slope) in &self.circles {
            s = s.min(sc + slope * (x.dist(c) - r).max(0.0));
        }
        s
    }
}

/// Points along a piece, start included and end excluded, spaced by the sizer.
fn discretize(shape: &Shape, sizer: &Sizer) -> Vec<V2> {
    let len = shape.length();
    let k = ((len / (0.1 * sizer.fine)).ceil() as usize).clamp(64, 200_000);
    let mut cum = vec![0.0; k + 1];
    let mut prev = 1.0 / sizer.at(shape.at(0.0));
    for j in 1..=k {
        let f = 1.0 / sizer.at(shape.at(j as f64 / k as f64));
        cum[j] = cum[j - 1] + 0.5 * (prev + f) * len / k as f64;
        prev = f;
    }
    let n = (cum[k].round() as usize).max(shape.min_pieces());
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for m in 0..n {
        let target = cum[k] * m as f64 / n as f64;
        while j + 1 < k && cum[j + 1] < target {
            j += 1;
        }
        let span = cum[j + 1] - cum[j];
        let frac = if span > 0.0 { (target - cum[j]) / span } else { 0.0 };
        out.push(shape.at((j as f64 + frac) / k as f64));
    }
    out
}

/// Uniform bucket grid over boundary segments for distance queries.
struct SegmentIndex {
    lo: V2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    segs: Vec<(V2, V2)>,
}

impl SegmentIndex {
    fn new(segs: Vec<(V2, V2)>, cell: f64) -> Self {
        let mut lo = V2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = V2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(a, b) in &segs {
            for p in [a, b] {
                lo = V2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = V2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, &(a, b)) in segs.iter().enumerate() {
            let (i0, j0) = Self::cell_of(lo, cell, nx, ny, V2::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = Self::cell_of(lo, cell, nx, ny, V2::new(a.x.max(b.x), a.y.max(b.y)));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[j * nx + i].push(k);
                }
            }
        }
        SegmentIndex { lo, cell, nx, ny, buckets, segs }
    }

    fn cell_of(lo: V2, cell: f64, nx: usize, ny: usize, p: V2) -> (usize, usize) {
        let i = ((p.x - lo.x) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((p.y - lo.y) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    /// Distance to the nearest segment, exact when below `cap`.
    fn dist(&self, p: V2, cap: f64) -> f64 {
        let r = (cap / self.cell).ceil() as i64 + 1;
        let ci = ((p.x - self.lo.x) / self.cell).floor() as i64;
        let cj = ((p.y - self.lo.y) / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        for i in (ci - r).max(0)..=(ci + r).min(self.nx as i64 - 1) {
            for j in (cj - r).max(0)..=(cj + r).min(self.ny as i64 - 1) {
                for &k in &self.buckets[j as usize * self.nx + i as usize] {
                    let (a, b) = self.segs[k];
                    best = best.min(seg_dist(p, a, b));
                }
            }
        }
        best.min(cap)
    }
}

/// Boundary description before meshing: closed loops, plus the slit for a
/// punctured domain.
struct Outline {
    points: Vec<V2>,
    segments: Vec<([usize; 2], Tag)>,
    /// Slit node indices from the puncture outward.
    slit: Vec<usize>,
    /// Plus and minus ray node indices of a sector, from the puncture outward.
    rays: Option<(Vec<usize>, Vec<usize>)>,
}

impl Outline {
    fn push_loop(&mut self, pieces: &[(Vec<V2>, Tag)]) -> Vec<usize> {
        let start = self.points.len();
        let mut tags = Vec::new();
        for (pts, tag) in pieces {
            for &p in pts {
                self.points.push(p);
                tags.push(*tag);
            }
        }
        let n = self.points.len() - start;
        for k in 0..n {
            self.segments.push(([start + k, start + (k + 1) % n], tags[k]));
        }
        (start..start + n).collect()
    }
}

struct Layout {
    pieces: Vec<Piece>,
    hole: Vec<Piece>,
    slit: Option<Piece>,
    hole_radius: f64,
    arc_radius: f64,
    sizer: Sizer,
}

fn layout(domain: &CutDomain, opts: &MeshOptions) -> Result<Layout> {
    let h = opts.h;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::MeshFailure(format!("mesh size h = {h} must be positive")));
    }
    if !(opts.grading >= 1.0) {
        return Err(Error::MeshFailure(format!("grading {} must be at least 1", opts.grading)));
    }
    let poly = &domain.polygon;
    let fine = h / opts.grading;
    let arc_radius = opts.arc_radius.unwrap_or(0.5 * fine);
    if arc_radius >= 0.25 * poly.min_edge() {
        return Err(Error::MeshFailure(format!("vertex arc radius {arc_radius} too large")));
    }
    let strips = domain.strips();
    let l = domain.length;
    let mut pieces = Vec::new();
    let arc = |center: V2, from: V2, to: V2, tag: Tag| {
        // clockwise sweep around the center, in (0, 2 pi)
        let mut sweep = to.angle() - from.angle();
        while sweep >= 0.0 {
            sweep -= 2.0 * PI;
        }
        while sweep <= -2.0 * PI {
            sweep += 2.0 * PI;
        }
        Piece { shape: Shape::Arc { center, radius: arc_radius, start: from.angle(), sweep }, tag }
    };
    let strip_pieces = |s: &Strip, out: &mut Vec<Piece>| {
        let i = s.index;
        let far_a = s.foot + s.normal * l;
        let foot_b = s.foot + s.dir * s.width;
        let far_b = foot_b + s.normal * l;
        out.push(Piece { shape: Shape::Line(s.foot + s.normal * arc_radius, far_a), tag: Tag::StripPlus(i) });
        out.push(Piece { shape: Shape::Line(far_a, far_b), tag: Tag::StripCap(i) });
        out.push(Piece {
            shape: Shape::Line(far_b, foot_b + s.normal * arc_radius),
            tag: Tag::StripMinus((i + 1) % poly.r()),
        });
    };
    let mut hole = Vec::new();
    let mut slit = None;
    let mut hole_radius = 0.0;
    let mut points = Vec::new();
    let mut segments = Vec::new();
    let mut circles = Vec::new();
    if !(opts.vertex_slope > 0.0) {
        return Err(Error::MeshFailure(format!("vertex slope {} must be positive", opts.vertex_slope)));
    }
    let vslope = opts.vertex_slope.min(0.25);
    let arc_size = arc_radius * vslope.min(PI / 12.0);
    match &domain.topology {
        Topology::Genus0 | Topology::Cut { .. } => {
            let r = poly.r();
            let a = domain.puncture();
            let u = a.map(|a| (poly.vertex(0) - a).unit());
            for i in 0..r {
                let p = poly.vertex(i);
                let n_prev = poly.outward_normal((i + r - 1) % r);
                let n_cur = poly.outward_normal(i);
                match (i, u) {
                    (0, Some(u)) => {
                        // split the arc where the slit arrives
                        pieces.push(arc(p, n_prev, -u, Tag::VertexArc(0)));
                        pieces.push(arc(p, -u, n_cur, Tag::VertexArc(0)));
                    }
                    _ => pieces.push(arc(p, n_prev, n_cur, Tag::VertexArc(i))),
                }
                strip_pieces(&strips[i], &mut pieces);
                points.push(p);
                circles.push((p, arc_radius, arc_size, vslope));
            }
            if let (Some(a), Some(u)) = (a, u) {
                let (_, dist) = poly.contains(a);
                let gap = dist.min((0..r).map(|i| poly.vertex(i).dist(a) - arc_radius).fold(f64::INFINITY, f64::min));
                if gap < fine {
                    return Err(Error::PunctureTooClose { dist: gap, min: fine });
                }
                hole_radius = opts.hole_radius.unwrap_or(0.5 * fine).min(gap / 6.0);
                let near = (gap / 3.0).min(fine);
                hole.push(Piece {
                    shape: Shape::Arc { center: a, radius: hole_radius, start: u.angle(), sweep: -2.0 * PI },
                    tag: Tag::Puncture,
                });
                slit = Some(Piece {
                    shape: Shape::Line(a + u * hole_radius, poly.vertex(0) - u * arc_radius),
                    tag: Tag::CutPlus,
                });
                points.push(a);
                segments.push((a, poly.vertex(0)));
                circles.push((a, hole_radius, hole_radius * PI / 8.0, 0.25));
                circles.push((a, 2.0 * h, near, 0.25));
            }
        }
        Topology::Sector { spec } => {
            let p1 = poly.vertex(0);
            let p2 = poly.vertex(1);
            let u0 = p1.unit();
            let u1 = p2.unit();
            let n = poly.outward_normal(0);
            let gap = p1.norm() - arc_radius;
            hole_radius = opts.hole_radius.unwrap_or(0.5 * fine).min(gap / 6.0);
            let step = spec.step_angle();
            pieces.push(Piece { shape: Shape::Line(u0 * hole_radius, p1 - u0 * arc_radius), tag: Tag::CutPlus });
            pieces.push(arc(p1, -u0, n, Tag::VertexArc(0)));
            strip_pieces(&strips[0], &mut pieces);
            pieces.push(arc(p2, n, -u1, Tag::VertexArc(1)));
            pieces.push(Piece { shape: Shape::Line(p2 - u1 * arc_radius, u1 * hole_radius), tag: Tag::CutMinus });
            pieces.push(Piece {
                shape: Shape::Arc { center: V2::ZERO, radius: hole_radius, start: step, sweep: -step },
                tag: Tag::Puncture,
            });
            points.extend([V2::ZERO, p1, p2]);
            segments.push((V2::ZERO, p1));
            segments.push((V2::ZERO, p2));
            circles.push((V2::ZERO, hole_radius, hole_radius * PI / 8.0, 0.25));
            circles.push((p1, arc_radius, arc_size, vslope));
            circles.push((p2, arc_radius, arc_size, vslope));
        }
    }
    let sizer = Sizer { h, fine, slope: 0.25, points, segments, circles };
    Ok(Layout { pieces, hole, slit, hole_radius, arc_radius, sizer })
}

fn build_outline(domain: &CutDomain, lay: &Layout) -> Outline {
    let mut out = Outline { points: Vec::new(), segments: Vec::new(), slit: Vec::new(), rays: None };
    let mut disc: Vec<(Vec<V2>, Tag)> = Vec::new();
    let mut ray_plus_len = 0;
    for piece in &lay.pieces {
        let pts = match (piece.tag, &domain.topology) {
            (Tag::CutMinus, Topology::Sector { spec }) => {
                // image of the plus ray under the rotation, traversed inward,
                // without the hole point that starts the next piece
                let mut full = disc[0].0.clone();
                full.push(disc[1].0[0]);
                let mut inward: Vec<V2> = full.iter().rev().map(|p| p.rotate(spec.step_angle())).collect();
                inward.pop();
                inward
            }
            _ => discretize(&piece.shape, &lay.sizer),
        };
        if piece.tag == Tag::CutPlus {
            ray_plus_len = pts.len();
        }
        disc.push((pts, piece.tag));
    }
    let outer = out.push_loop(&disc);
    if let Topology::Sector { spec } = &domain.topology {
        // the plus ray starts the loop; its end is the first point of the next piece
        let plus: Vec<usize> = (0..=ray_plus_len).map(|k| outer[k]).collect();
        let mut offset = 0;
        let mut minus_start = 0;
        for (pts, tag) in &disc {
            if *tag == Tag::CutMinus {
                minus_start = offset;
            }
            offset += pts.len();
        }
        let mlen = disc.iter().find(|d| d.1 == Tag::CutMinus).unwrap().0.len();
        // minus ray from the arc end inward, then the first point of the hole arc
        let mut minus: Vec<usize> = (minus_start..minus_start + mlen).map(|k| outer[k]).collect();
        minus.push(outer[(minus_start + mlen) % outer.len()]);
        minus.reverse();
        debug_assert_eq!(plus.len(), minus.len());
        let rot = spec.step_angle();
        for (&p, &m) in plus.iter().zip(minus.iter()) {
            debug_assert!((out.points[p].rotate(rot) - out.points[m]).norm() < 1e-12);
        }
        out.rays = Some((plus, minus));
    }
    if !lay.hole.is_empty() {
        let hole: Vec<(Vec<V2>, Tag)> =
            lay.hole.iter().map(|p| (discretize(&p.shape, &lay.sizer), p.tag)).collect();
        let hole_idx = out.push_loop(&hole);
        let slit = lay.slit.expect("punctured domain has a slit");
        let mut pts = discretize(&slit.shape, &lay.sizer);
        pts.remove(0);
        // the slit joins the first hole point to the arc point split at -u
        let arc_point = match slit.shape {
            Shape::Line(_, b) => b,
            _ => unreachable!(),
        };
        let end = *outer
            .iter()
            .min_by(|&&x, &&y| out.points[x].dist(arc_point).total_cmp(&out.points[y].dist(arc_point)))
            .unwrap();
        let mut chain = vec![hole_idx[0]];
        for p in pts {
            chain.push(out.points.len());
            out.points.push(p);
        }
        chain.push(end);
        for w in chain.windows(2) {
            out.segments.push(([w[0], w[1]], Tag::CutPlus));
        }
        out.slit = chain;
    }
    out
}

/// Region test used for seed placement (holes and arcs by their circles).
fn in_region(domain: &CutDomain, lay: &Layout, x: V2) -> bool {
    let core_or_strip = domain.in_core(x) || domain.strips().iter().any(|s| s.contains(x));
    if !core_or_strip {
        return false;
    }
    if let Some(a) = domain.puncture() {
        if x.dist(a) <= lay.hole_radius {
            return false;
        }
    }
    domain.vertex_indices().iter().all(|&i| x.dist(domain.polygon.vertex(i)) > lay.arc_radius)
}

fn seeds(domain: &CutDomain, lay: &Layout, index: &SegmentIndex) -> Vec<V2> {
    let mut lo = V2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = V2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(a, b) in &index.segs {
        for p in [a, b] {
            lo = V2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = V2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    let size = (hi.x - lo.x).max(hi.y - lo.y);
    let mut out = Vec::new();
    let mut stack = vec![(lo, size)];
    while let Some((corner, sz)) = stack.pop() {
        let c = corner + V2::new(0.5 * sz, 0.5 * sz);
        let s = lay.sizer.at(c);
        let inside = in_region(domain, lay, c);
        let diag = sz * std::f64::consts::SQRT_2;
        if !inside && index.dist(c, diag) >= diag {
            continue;
        }
        if sz > s {
            let half = 0.5 * sz;
            // fixed child order keeps the seed list deterministic
            for (dx, dy) in [(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)] {
                stack.push((corner + V2::new(dx, dy), half));
            }
            continue;
        }
        if inside && index.dist(c, s) >= 0.6 * s {
            out.push(c);
        }
    }
    out
}

/// Mesh a cut domain, a sector or a genus-0 domain.
pub fn triangulate(domain: &CutDomain, opts: &MeshOptions) -> Result<DomainMesh> {
    let lay = layout(domain, opts)?;
    let outline = build_outline(domain, &lay);
    let segs: Vec<(V2, V2)> =
        outline.segments.iter().map(|(s, _)| (outline.points[s[0]], outline.points[s[1]])).collect();
    let index = SegmentIndex::new(segs, opts.h);
    let seed_pts = seeds(domain, &lay, &index);

    let mut verts: Vec<Point2<f64>> = outline.points.iter().map(|p| Point2::new(p.x, p.y)).collect();
    verts.extend(seed_pts.iter().map(|p| Point2::new(p.x, p.y)));
    let n_input = verts.len();
    let edges: Vec<[usize; 2]> = outline.segments.iter().map(|(s, _)| *s).collect();
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(verts, edges)
            .map_err(|e| Error::MeshFailure(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != n_input {
        return Err(Error::MeshFailure("coincident input points".into()));
    }
    let min_area = (0.05 * lay.arc_radius.min(if lay.hole_radius > 0.0 { lay.hole_radius } else { f64::INFINITY })).powi(2);
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(30.0))
        .keep_constraint_edges()
        .exclude_outer_faces(false)
        .with_min_required_area(min_area)
        .with_max_additional_vertices(4 * n_input + 1000);
    cdt.refine(params);

    // flood fill from a face deep inside strip 1 without crossing constraints
    let s0 = domain.strips()[0];
    let probe = s0.foot + s0.dir * (0.5 * s0.width) + s0.normal * (0.5 * s0.length);
    let start = match cdt.locate(Point2::new(probe.x, probe.y)) {
        spade::PositionInTriangulation::OnFace(f) => f,
        _ => cdt
            .inner_faces()
            .find(|f| {
                let c = f.center();
                in_region(domain, &lay, V2::new(c.x, c.y))
            })
            .map(|f| f.fix())
            .ok_or_else(|| Error::MeshFailure("no interior face".into()))?,
    };
    let mut keep = vec![false; cdt.num_all_faces()];
    let mut queue = VecDeque::from([start]);
    keep[start.index()] = true;
    while let Some(f) = queue.pop_front() {
        for e in cdt.face(f).adjacent_edges() {
            if cdt.is_constraint_edge(e.as_undirected().fix()) {
                continue;
            }
            if let Some(nb) = e.rev().face().as_inner() {
                if !keep[nb.fix().index()] {
                    keep[nb.fix().index()] = true;
                    queue.push_back(nb.fix());
                }
            }
        }
    }

    let mut node_of: HashMap<FixedVertexHandle, usize> = HashMap::new();
    let mut handles: Vec<FixedVertexHandle> = Vec::new();
    let mut tris_h: Vec<[FixedVertexHandle; 3]> = Vec::new();
    for f in cdt.inner_faces() {
        if keep[f.fix().index()] {
            let vs = f.vertices();
            tris_h.push([vs[0].fix(), vs[1].fix(), vs[2].fix()]);
            for v in vs {
                handles.push(v.fix());
            }
        }
    }
    handles.sort_by_key(|h| h.index());
    handles.dedup();
    let mut nodes: Vec<V2> = Vec::with_capacity(handles.len());
    for (k, h) in handles.iter().enumerate() {
        node_of.insert(*h, k);
        let p = cdt.vertex(*h).position();
        nodes.push(V2::new(p.x, p.y));
    }
    let input_node = |i: usize| node_of.get(&FixedVertexHandle::from_index(i)).copied();
    let mut tris: Vec<[usize; 3]> = tris_h.iter().map(|t| [node_of[&t[0]], node_of[&t[1]], node_of[&t[2]]]).collect();

    let pinned: Vec<bool> = handles.iter().map(|h| h.index() < outline.points.len()).collect();
    smooth(&mut nodes, &tris, &pinned, 4);

    let mut seg_tag: HashMap<(usize, usize), Tag> = HashMap::new();
    for (s, tag) in &outline.segments {
        let (a, b) = match (input_node(s[0]), input_node(s[1])) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::MeshFailure("boundary point missing from mesh".into())),
        };
        seg_tag.insert((a.min(b), a.max(b)), *tag);
    }

    let mut pairing = Vec::new();
    let mut pair_rotation = 0.0;
    let mut origin: Vec<usize> = (0..nodes.len()).collect();
    if !outline.slit.is_empty() {
        let chain: Vec<usize> = outline.slit.iter().map(|&i| input_node(i).unwrap()).collect();
        let u = (nodes[*chain.last().unwrap()] - nodes[chain[0]]).unit();
        let mut is_slit_edge = std::collections::HashSet::new();
        for w in chain.windows(2) {
            is_slit_edge.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
        let node_tris = {
            let mut nt = vec![Vec::new(); nodes.len()];
            for (t, tri) in tris.iter().enumerate() {
                for &n in tri {
                    nt[n].push(t);
                }
            }
            nt
        };
        let mut renames: Vec<(usize, Vec<usize>)> = Vec::new();
        for &k in &chain {
            let fan = &node_tris[k];
            let other = |t: usize| -> [usize; 2] {
                let tri = tris[t];
                let p = tri.iter().position(|&n| n == k).unwrap();
                [tri[(p + 1) % 3], tri[(p + 2) % 3]]
            };
            // group the fan by adjacency through non-slit edges at k
            let mut group = vec![usize::MAX; fan.len()];
            let mut g = 0;
            for s in 0..fan.len() {
                if group[s] != usize::MAX {
                    continue;
                }
                group[s] = g;
                let mut stack = vec![s];
                while let Some(x) = stack.pop() {
                    for y in 0..fan.len() {
                        if group[y] != usize::MAX {
                            continue;
                        }
                        let shared = other(fan[x]).iter().find(|j| other(fan[y]).contains(j)).copied();
                        if let Some(j) = shared {
                            if !is_slit_edge.contains(&(k.min(j), k.max(j))) {
                                group[y] = g;
                                stack.push(y);
                            }
                        }
                    }
                }
                g += 1;
            }
            if g != 2 {
                return Err(Error::MeshFailure(format!("slit node fan splits into {g} parts")));
            }
            // the minus side lies to the right of the slit direction
            let mut minus_group = None;
            for (s, &t) in fan.iter().enumerate() {
                let tri = tris[t];
                let c = (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) * (1.0 / 3.0);
                let touches_slit = other(t).iter().any(|&j| is_slit_edge.contains(&(k.min(j), k.max(j))));
                if touches_slit {
                    let side = u.cross(c - nodes[k]);
                    if side < 0.0 {
                        minus_group = Some(group[s]);
                    }
                }
            }
            let mg = minus_group.ok_or_else(|| Error::MeshFailure("cannot orient slit".into()))?;
            let minus_tris: Vec<usize> = fan.iter().zip(&group).filter(|(_, &gr)| gr == mg).map(|(&t, _)| t).collect();
            renames.push((k, minus_tris));
        }
        for (k, minus_tris) in renames {
            let dup = nodes.len();
            nodes.push(nodes[k]);
            origin.push(k);
            for t in minus_tris {
                for n in tris[t].iter_mut() {
                    if *n == k {
                        *n = dup;
                    }
                }
            }
            pairing.push((k, dup));
        }
    } else if let Some((plus, minus)) = &outline.rays {
        for (&p, &m) in plus.iter().zip(minus) {
            pairing.push((input_node(p).unwrap(), input_node(m).unwrap()));
        }
        pair_rotation = domain.sector_angle();
    }

    // boundary edges: directed edges without a twin
    let mut directed: HashMap<(usize, usize), ()> = HashMap::new();
    for t in &tris {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]), ());
        }
    }
    let is_dup: Vec<bool> = (0..nodes.len()).map(|n| origin[n] != n).collect();
    let mut boundary = Vec::new();
    for t in &tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if directed.contains_key(&(b, a)) {
                continue;
            }
            let (oa, ob) = (origin[a], origin[b]);
            let tag = *seg_tag
                .get(&(oa.min(ob), oa.max(ob)))
                .ok_or_else(|| Error::MeshFailure(format!("untagged boundary edge at {:?}", nodes[a])))?;
            let tag = match tag {
                Tag::CutPlus if matches!(domain.topology, Topology::Cut { .. }) && is_dup[a] && is_dup[b] => {
                    Tag::CutMinus
                }
                t => t,
            };
            boundary.push(BoundaryEdge { a, b, tag });
        }
    }
    boundary.sort_by_key(|e| (e.tag, e.a, e.b));

    let mesh = DomainMesh {
        domain: domain.clone(),
        nodes,
        tris,
        boundary,
        pairing,
        pair_rotation,
        h: opts.h,
        grading: opts.grading,
        hole_radius: lay.hole_radius,
        arc_radius: lay.arc_radius,
    };
    let angle = mesh.min_angle_deg();
    if angle < opts.min_angle_deg {
        return Err(Error::MeshFailure(format!("minimum angle {angle:.2} deg below {}", opts.min_angle_deg)));
    }
    if mesh.euler_characteristic() != 1 {
        return Err(Error::NotSimplyConnected);
    }
    Ok(mesh)
}

fn min_angle_at(nodes: &[V2], tri: &[usize; 3]) -> f64 {
    let mut m = f64::INFINITY;
    for k in 0..3 {
        let p = nodes[tri[k]];
        let a = nodes[tri[(k + 1) % 3]] - p;
        let b = nodes[tri[(k + 2) % 3]] - p;
        let ang = a.cross(b).atan2(a.dot(b));
        // inverted triangles count as the worst possible
        m = m.min(if ang <= 0.0 { -1.0 } else { ang });
    }
    m
}

/// Move interior nodes toward the mean of their neighbours when that raises
/// the smallest angle of the surrounding triangles.
fn smooth(nodes: &mut [V2], tris: &[[usize; 3]], pinned: &[bool], sweeps: usize) {
    let n = nodes.len();
    let mut node_tris = vec![Vec::new(); n];
    let mut directed = std::collections::HashSet::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            node_tris[tri[k]].push(t);
            directed.insert((tri[k], tri[(k + 1) % 3]));
        }
    }
    let mut on_boundary = vec![false; n];
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) {
            on_boundary[a] = true;
            on_boundary[b] = true;
        }
    }
    for _ in 0..sweeps {
        for v in 0..n {
            if pinned[v] || on_boundary[v] || node_tris[v].is_empty() {
                continue;
            }
            let mut sum = V2::ZERO;
            let mut cnt = 0.0;
            for &t in &node_tris[v] {
                for &w in &tris[t] {
                    if w != v {
                        sum += nodes[w];
                        cnt += 1.0;
                    }
                }
            }
            let old = nodes[v];
            let before = node_tris[v].iter().map(|&t| min_angle_at(nodes, &tris[t])).fold(f64::INFINITY, f64::min);
            nodes[v] = sum * (1.0 / cnt);
            let after = node_tris[v].iter().map(|&t| min_angle_at(nodes, &tris[t])).fold(f64::INFINITY, f64::min);
            if after <= before {
                nodes[v] = old;
            }
        }
    }
}

/// Same mesh with the puncture moved to `a`. Every core triangle `A P_i
/// P_(i+1)` of the fan is mapped affinely onto `a P_i P_(i+1)`, so the slit
/// stays straight, the strips do not move and the connectivity is kept.
pub fn move_puncture(mesh: &DomainMesh, a: V2) -> Result<DomainMesh> {
    let Topology::Cut { a: a0 } = mesh.domain.topology else {
        return Err(Error::MeshFailure("only a slit domain has a movable puncture".into()));
    };
    let domain = CutDomain::new(&mesh.domain.polygon, a, mesh.domain.length)?;
    let poly = &mesh.domain.polygon;
    let r = poly.r();
    let mut out = mesh.clone();
    for (k, x) in out.nodes.iter_mut().enumerate() {
        let p = mesh.nodes[k];
        let mut best = (f64::NEG_INFINITY, V2::ZERO);
        for i in 0..r {
            let (pi, pj) = (poly.vertex(i), poly.vertex((i + 1) % r));
            let det = (pi - a0).cross(pj - a0);
            let l1 = (p - a0).cross(pj - a0) / det;
            let l2 = (pi - a0).cross(p - a0) / det;
            let l0 = 1.0 - l1 - l2;
            let worst = l0.min(l1).min(l2);
            if worst > best.0 {
                best = (worst, a * l0 + pi * l1 + pj * l2);
            }
        }
        // strip nodes and arc nodes outside the polygon stay put
        if best.0 >= -1e-12 {
            *x = best.1;
        }
    }
    out.domain = domain;
    if let Some(t) = (0..out.tris.len()).find(|&t| out.tri_area(t) <= 0.0) {
        return Err(Error::MeshFailure(format!("triangle {t} inverted by moving the puncture")));
    }
    Ok(out)
}

/// Mesh of the unpunctured domain: disk plus strips.
pub fn genus0_domain(polygon: &FluxPolygon, length: f64, opts: &MeshOptions) -> Result<DomainMesh> {
    triangulate(&CutDomain::genus0(polygon, length)?, opts)
}

/// Plain-text dump: `n x y`, `t i j k`, `b i j TAG`, `p i j` (cut pairs).
pub fn write_mesh(mesh: &DomainMesh, header: &str) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for p in &mesh.nodes {
        let _ = writeln!(s, "n {:.17e} {:.17e}", p.x, p.y);
    }
    for t in &mesh.tris {
        let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
    }
    for e in &mesh.boundary {
        let _ = writeln!(s, "b {} {} {}", e.a, e.b, e.tag);
    }
    for (p, m) in &mesh.pairing {
        let _ = writeln!(s, "p {p} {m}");
    }
    s
}

/// Records read back from a mesh dump.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshRecords {
    pub nodes: Vec<V2>,
    pub tris: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub pairing: Vec<(usize, usize)>,
}

pub fn read_mesh(text: &str) -> Result<MeshRecords> {
    let mut rec = MeshRecords::default();
    let bad = |l: &str| Error::MeshFailure(format!("bad mesh record: {l}"));
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |k: usize| -> Result<usize> { f.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line)) };
        let real = |k: usize| -> Result<f64> { f.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line)) };
        match f[0] {
            "n" => rec.nodes.push(V2::new(real(1)?, real(2)?)),
            "t" => rec.tris.push([num(1)?, num(2)?, num(3)?]),
            "b" => rec.boundary.push(BoundaryEdge {
                a: num(1)?,
                b: num(2)?,
                tag: f.get(3).ok_or_else(|| bad(line))?.parse()?,
            }),
            "p" => rec.pairing.push((num(1)?, num(2)?)),
            _ => return Err(bad(line)),
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> FluxPolygon {
        let s = 3f64.sqrt() / 2.0;
        FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)]).unwrap()
    }

    fn barycenter() -> V2 {
        V2::new(0.5, 3f64.sqrt() / 6.0)
    }

    #[test]
    fn tag_names_round_trip() {
        for t in [Tag::StripPlus(0), Tag::StripMinus(2), Tag::StripCap(1), Tag::CutPlus, Tag::CutMinus, Tag::Puncture, Tag::VertexArc(3)] {
            assert_eq!(t.to_string().parse::<Tag>().unwrap(), t);
        }
    }

    #[test]
    fn moved_puncture_keeps_the_slit_straight() {
        let d = CutDomain::new(&tri(), barycenter(), 8.0).unwrap();
        let m = triangulate(&d, &MeshOptions::new(0.2)).unwrap();
        let a = barycenter() + V2::new(0.03, -0.02);
        let moved = move_puncture(&m, a).unwrap();
        assert_eq!(moved.domain.puncture(), Some(a));
        let p1 = tri().vertex(0);
        for &(p, q) in &moved.pairing {
            assert!(moved.nodes[p].dist(moved.nodes[q]) <= 1e-12);
            assert!((moved.nodes[p] - a).cross(p1 - a).abs() < 1e-12);
        }
        for (k, x) in m.nodes.iter().enumerate() {
            if !tri().contains(*x).0 {
                assert_eq!(moved.nodes[k], *x);
            }
        }
        let back = move_puncture(&moved, barycenter()).unwrap();
        for (x, y) in back.nodes.iter().zip(&m.nodes) {
            assert!(x.dist(*y) < 1e-12);
        }
        assert!(matches!(move_puncture(&m, V2::new(0.5, -0.1)), Err(Error::PunctureTooClose { .. })));
    }

    #[test]
    fn puncture_on_boundary_rejected() {
        let e = CutDomain::new(&tri(), V2::new(0.5, 0.0), 8.0);
        assert!(matches!(e, Err(Error::PunctureTooClose { .. })));
    }

    #[test]
    fn zero_mesh_size_rejected() {
        let d = CutDomain::new(&tri(), barycenter(), 8.0).unwrap();
        assert!(matches!(triangulate(&d, &MeshOptions::new(0.0)), Err(Error::MeshFailure(_))));
    }

    #[test]
    fn cut_mesh_contract() {
        let d = CutDomain::new(&tri(), barycenter(), 8.0).unwrap();
        let m = triangulate(&d, &MeshOptions::new(0.2)).unwrap();
        assert!(m.min_angle_deg() >= 20.0);
        assert_eq!(m.euler_characteristic(), 1);
        assert!(!m.pairing.is_empty());
        for &(p, q) in &m.pairing {
            assert!(m.nodes[p].dist(m.nodes[q]) <= 1e-12);
            assert_ne!(p, q);
        }
        for t in 0..m.tris.len() {
            assert!(m.tri_area(t) > 0.0);
        }
        let tags = m.node_tags();
        for i in 0..3 {
            for tag in [Tag::StripPlus(i), Tag::StripMinus(i), Tag::StripCap(i), Tag::VertexArc(i)] {
                assert!(!m.chain(tag).is_empty(), "{tag}");
            }
        }
        assert_eq!(m.chain(Tag::CutPlus).len(), m.pairing.len());
        assert_eq!(m.chain(Tag::CutMinus).len(), m.pairing.len());
        // strip side chains lie on the lines through the vertex along the normal
        for i in 0..3 {
            let n_plus = tri().outward_normal(i);
            let n_minus = tri().outward_normal((i + 2) % 3);
            let p = tri().vertex(i);
            for n in m.chain(Tag::StripPlus(i)) {
                assert!((m.nodes[n] - p).cross(n_plus).abs() < 1e-9);
            }
            for n in m.chain(Tag::StripMinus(i)) {
                assert!((m.nodes[n] - p).cross(n_minus).abs() < 1e-9);
            }
        }
        assert!(tags.iter().all(|t| t.len() <= 2));
        // area: disk + strips - hole - arcs (polygonal approximations)
        let want = 3f64.sqrt() / 4.0 + 3.0 * 8.0;
        assert!((m.area() - want).abs() < 0.01);
    }

    #[test]
    fn refinement_sweep_increases_nodes() {
        let d = CutDomain::new(&tri(), barycenter(), 8.0).unwrap();
        let mut prev = 0;
        for h in [0.2, 0.1, 0.05] {
            let m = triangulate(&d, &MeshOptions::new(h)).unwrap();
            assert!(m.num_nodes() > prev);
            assert!(m.min_angle_deg() >= 20.0, "h={h}: {}", m.min_angle_deg());
            prev = m.num_nodes();
        }
    }

    #[test]
    fn genus0_has_no_cut() {
        let m = genus0_domain(&tri(), 8.0, &MeshOptions::new(0.2)).unwrap();
        assert!(m.pairing.is_empty());
        assert!(m.boundary.iter().all(|e| !matches!(e.tag, Tag::CutPlus | Tag::CutMinus | Tag::Puncture)));
        let sq = FluxPolygon::from_edge_vectors(&[
            V2::new(1.0, 0.0),
            V2::new(0.0, 1.0),
            V2::new(-1.0, 0.0),
            V2::new(0.0, -1.0),
        ])
        .unwrap();
        let m = genus0_domain(&sq, 8.0, &MeshOptions::new(0.25)).unwrap();
        let sides = (0..4).filter(|&i| !m.chain(Tag::StripPlus(i)).is_empty()).count()
            + (0..4).filter(|&i| !m.chain(Tag::StripMinus(i)).is_empty()).count();
        assert_eq!(sides, 8);
    }

    #[test]
    fn sector_rays_match_under_rotation() {
        let spec = StarSpec::new(5, 2).unwrap();
        let d = CutDomain::star(spec, 8.0 * FluxPolygon::star(spec).max_edge()).unwrap();
        assert!((d.sector_angle() - 4.0 * PI / 5.0).abs() < 1e-15);
        assert!((d.cone_angle() - 4.0 * PI).abs() < 1e-15);
        let m = triangulate(&d, &MeshOptions::new(0.3)).unwrap();
        assert!(!m.pairing.is_empty());
        for &(p, q) in &m.pairing {
            assert!((m.nodes[p].rotate(m.pair_rotation) - m.nodes[q]).norm() < 1e-12);
        }
    }

    #[test]
    fn dump_round_trip() {
        let d = CutDomain::new(&tri(), barycenter(), 8.0).unwrap();
        let m = triangulate(&d, &MeshOptions::new(0.3)).unwrap();
        let text = write_mesh(&m, "test");
        let rec = read_mesh(&text).unwrap();
        assert_eq!(rec.nodes, m.nodes);
        assert_eq!(rec.tris, m.tris);
        assert_eq!(rec.boundary, m.boundary);
        assert_eq!(rec.pairing, m.pairing);
    }

    #[test]
    fn deterministic() {
        let d = CutDomain::new(&tri(), barycenter(), 8.0).unwrap();
        let a = triangulate(&d, &MeshOptions::new(0.2)).unwrap();
        let b = triangulate(&d, &MeshOptions::new(0.2)).unwrap();
        assert_eq!(write_mesh(&a, ""), write_mesh(&b, ""));
    }
}
