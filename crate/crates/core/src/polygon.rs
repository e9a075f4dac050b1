//! Flux polygons: closed chains of edge vectors, their vertices and a few
//! geometric predicates used by the domain builder and the period map.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, V2};

const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FluxPolygon {
    edges: Vec<V2>,
    vertices: Vec<V2>,
}

/// Regular star polygon `{r/q}` with vertices `exp(2 i (k-1) q pi / r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StarSpec {
    r: usize,
    q: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl StarSpec {
    pub fn new(r: usize, q: usize) -> Result<Self> {
        if r < 3 || q == 0 || gcd(q, r) != 1 || 2 * q >= r {
            return Err(Error::InvalidStar { r, q });
        }
        Ok(StarSpec { r, q })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Angle of the rotation mapping `P_i` to `P_{i+1}`.
    pub fn step_angle(&self) -> f64 {
        2.0 * PI * self.q as f64 / self.r as f64
    }
}

impl FluxPolygon {
    /// Build from edge vectors with `P_1` at the origin.
    pub fn from_edge_vectors(edges: &[V2]) -> Result<Self> {
        Self::from_edge_vectors_at(edges, V2::ZERO)
    }

    pub fn from_edge_vectors_at(edges: &[V2], anchor: V2) -> Result<Self> {
        let r = edges.len();
        if r < 3 {
            return Err(Error::TooFewEdges(r));
        }
        let mut max_len: f64 = 0.0;
        for (i, e) in edges.iter().enumerate() {
            let l = e.norm();
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::DegenerateEdge(i + 1));
            }
            max_len = max_len.max(l);
        }
        let sum = edges.iter().fold(V2::ZERO, |s, &e| s + e);
        if sum.norm() > CLOSURE_TOL * max_len {
            return Err(Error::ClosureViolation(sum.norm()));
        }
        for i in 0..r {
            let prev = edges[(i + r - 1) % r];
            let cur = edges[i];
            // anti-parallel consecutive edges collapse the vertex between them
            if prev.cross(cur).abs() <= 1e-14 * prev.norm() * cur.norm() && prev.dot(cur) < 0.0 {
                return Err(Error::DegenerateEdge(i + 1));
            }
        }
        let mut vertices = Vec::with_capacity(r);
        let mut p = anchor;
        for e in edges {
            vertices.push(p);
            p += *e;
        }
        Ok(FluxPolygon { edges: edges.to_vec(), vertices })
    }

    pub fn star(spec: StarSpec) -> Self {
        let step = spec.step_angle();
        let vertices: Vec<V2> = (0..spec.r).map(|k| V2::polar(1.0, step * k as f64)).collect();
        let r = spec.r;
        let edges = (0..r).map(|k| vertices[(k + 1) % r] - vertices[k]).collect();
        FluxPolygon { edges, vertices }
    }

    pub fn r(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[V2] {
        &self.edges
    }

    /// Edge `i` (0-based), from `P_i` to `P_{i+1}`.
    pub fn edge(&self, i: usize) -> V2 {
        self.edges[i % self.r()]
    }

    pub fn vertices(&self) -> &[V2] {
        &self.vertices
    }

    /// Vertex `i` (0-based, cyclic).
    pub fn vertex(&self, i: usize) -> V2 {
        self.vertices[i % self.r()]
    }

    pub fn scaled(&self, s: f64) -> Self {
        FluxPolygon {
            edges: self.edges.iter().map(|&e| e * s).collect(),
            vertices: self.vertices.iter().map(|&p| p * s).collect(),
        }
    }

    pub fn translated(&self, t: V2) -> Self {
        FluxPolygon {
            edges: self.edges.clone(),
            vertices: self.vertices.iter().map(|&p| p + t).collect(),
        }
    }

    /// Signed turning angle at vertex `i`, from `v_{i-1}` to `v_i`.
    pub fn turning(&self, i: usize) -> f64 {
        let r = self.r();
        let prev = self.edges[(i + r - 1) % r];
        let cur = self.edges[i % r];
        wrap_angle(cur.angle() - prev.angle())
    }

    pub fn interior_angles(&self) -> Vec<f64> {
        (0..self.r()).map(|i| PI - self.turning(i)).collect()
    }

    /// Total turning divided by 2 pi: 1 for a counterclockwise convex polygon,
    /// q for the star `{r/q}`.
    pub fn turning_number(&self) -> i64 {
        let t: f64 = (0..self.r()).map(|i| self.turning(i)).sum();
        (t / (2.0 * PI)).round() as i64
    }

    /// Counterclockwise and strictly convex.
    pub fn is_convex(&self) -> bool {
        self.first_nonconvex().is_none()
    }

    fn first_nonconvex(&self) -> Option<usize> {
        if self.turning_number() != 1 {
            return Some(0);
        }
        (0..self.r()).find(|&i| self.turning(i) <= 1e-12)
    }

    pub fn require_convex(&self) -> Result<()> {
        match self.first_nonconvex() {
            None => Ok(()),
            Some(i) => Err(Error::NotConvex(i + 1)),
        }
    }

    /// Unit normal to edge `i` on its right, which points out of the disk
    /// for a counterclockwise boundary.
    pub fn outward_normal(&self, i: usize) -> V2 {
        let e = self.edge(i).unit();
        V2::new(e.y, -e.x)
    }

    /// Interior test and signed distance to the nearest edge line
    /// (positive inside). Meaningful for convex polygons.
    pub fn contains(&self, a: V2) -> (bool, f64) {
        let d = (0..self.r())
            .map(|i| self.edge(i).unit().cross(a - self.vertex(i)))
            .fold(f64::INFINITY, f64::min);
        (d > 0.0, d)
    }

    pub fn max_edge(&self) -> f64 {
        self.edges.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn min_edge(&self) -> f64 {
        self.edges.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    pub fn centroid(&self) -> V2 {
        let n = self.r() as f64;
        self.vertices.iter().fold(V2::ZERO, |s, &p| s + p) * (1.0 / n)
    }

    /// Radius of the largest inscribed disk of a convex polygon, found by a
    /// coarse grid scan followed by pattern search.
    pub fn inradius(&self) -> f64 {
        let (lo, hi) = self.bbox();
        let n = 32;
        let mut best = (f64::NEG_INFINITY, self.centroid());
        for i in 0..=n {
            for j in 0..=n {
                let p = V2::new(
                    lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / n as f64,
                );
                let d = self.contains(p).1;
                if d > best.0 {
                    best = (d, p);
                }
            }
        }
        let mut step = (hi - lo).norm() / n as f64;
        while step > 1e-12 * (hi - lo).norm() {
            let mut moved = false;
            for dir in [V2::new(1.0, 0.0), V2::new(-1.0, 0.0), V2::new(0.0, 1.0), V2::new(0.0, -1.0)] {
                let p = best.1 + dir * step;
                let d = self.contains(p).1;
                if d > best.0 {
                    best = (d, p);
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best.0
    }

    pub fn bbox(&self) -> (V2, V2) {
        let mut lo = V2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = V2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = V2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = V2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Stable 64-bit fingerprint of the exact edge and vertex bits.
    pub fn fingerprint(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in self.edges.iter().chain(self.vertices.iter()) {
            h.update(p.x.to_bits().to_le_bytes());
            h.update(p.y.to_bits().to_le_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}
