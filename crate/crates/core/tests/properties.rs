use std::f64::consts::TAU;

use proptest::prelude::*;
use rnoid::app::RunConfig;
use rnoid::period::{boundary_loop, renormalize, subdivide, triangle_winding, winding_number};
use rnoid::{FluxPolygon, Result, V2};

/// `(z - z0)^k` for integer `k`, as a plane map.
fn power(z0: V2, k: i32) -> impl Fn(V2) -> Result<V2> {
    move |z: V2| {
        let d = z - z0;
        Ok(V2::polar(d.norm().powi(k), d.angle() * k as f64))
    }
}

fn inside(t: &[V2; 3], p: V2) -> f64 {
    // smallest signed distance to the three edge lines
    (0..3)
        .map(|k| {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            (b - a).cross(p - a) / (b - a).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn circle_winding_counts_turns(k in -3i32..=3, start in 0usize..64, scale in 0.01f64..100.0, phase in 0.0f64..TAU) {
        let n = 64;
        let f = power(V2::ZERO, k);
        let mut pts: Vec<V2> = (0..n).map(|j| f(V2::polar(1.0, phase + TAU * j as f64 / n as f64)).unwrap() * scale).collect();
        pts.rotate_left(start);
        prop_assert_eq!(winding_number(&pts).unwrap(), k as i64);
        pts.reverse();
        prop_assert_eq!(winding_number(&pts).unwrap(), -k as i64);
    }

    // Simple zeros and poles only: a cell edge facing singularities of net
    // index two or more can turn by nearly 2 pi between two samples, which
    // no gap test can tell from a small turn.
    #[test]
    fn triangle_winding_sees_enclosed_zeros(
        k in -1i32..=1,
        x in -0.5f64..1.5,
        y in -0.5f64..1.5,
    ) {
        let t = [V2::new(0.0, 0.0), V2::new(1.0, 0.0), V2::new(0.2, 1.0)];
        let z0 = V2::new(x, y);
        let d = inside(&t, z0);
        prop_assume!(d.abs() > 0.02);
        let w = triangle_winding(&power(z0, k), t).unwrap();
        prop_assert_eq!(w, if d > 0.0 { k as i64 } else { 0 });
    }

    #[test]
    fn windings_add_over_quadtree_children(k in prop::sample::select(vec![-1, 1]), x in -0.2f64..1.2, y in -0.2f64..1.1) {
        let t = [V2::new(0.0, 0.0), V2::new(1.0, 0.0), V2::new(0.5, 1.0)];
        let m = [t[0].lerp(t[1], 0.5), t[1].lerp(t[2], 0.5), t[2].lerp(t[0], 0.5)];
        let kids = [[t[0], m[0], m[2]], [m[0], t[1], m[1]], [m[2], m[1], t[2]], [m[1], m[2], m[0]]];
        let z0 = V2::new(x, y);
        for c in &kids {
            prop_assume!(inside(c, z0).abs() > 0.02);
        }
        let f = power(z0, k);
        let whole = triangle_winding(&f, t).unwrap();
        let parts: i64 = kids.iter().map(|c| triangle_winding(&f, *c).unwrap()).sum();
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn subdivision_closes_in_on_a_simple_zero(x in 0.1f64..0.9, y in 0.05f64..0.4) {
        let t = [V2::new(0.0, 0.0), V2::new(1.0, 0.0), V2::new(0.5, 1.0)];
        let z0 = V2::new(x, y);
        prop_assume!(inside(&t, z0) > 0.02);
        let f = power(z0, 1);
        let s = subdivide(&f, &[t], 0.05, &|| false).unwrap();
        prop_assert_eq!(s.root_winding, 1);
        let mut cell = s.cell.unwrap();
        if (cell[1] - cell[0]).cross(cell[2] - cell[0]) < 0.0 {
            cell.swap(1, 2);
        }
        // inside the final cell, or close enough to its edge to stop the search
        prop_assert!(inside(&cell, z0) > -0.01, "{:?} {:?}", cell, z0);
    }

    #[test]
    fn renormalization_is_a_retraction(x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let v = V2::new(x, y);
        let r = renormalize(v);
        prop_assert!(r.norm() <= 1.0 + 1e-15);
        prop_assert!(renormalize(r).dist(r) < 1e-15);
        prop_assert!(r.cross(v).abs() <= 1e-12 * v.norm().max(1.0));
        prop_assert!(r.dot(v) >= 0.0);
    }

    #[test]
    fn inset_loop_stays_inside(a in 0.3f64..0.7, b in 0.5f64..1.2, delta in 0.01f64..0.04) {
        let p = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(a - 1.0, b), V2::new(-a, -b)]).unwrap();
        let pts = boundary_loop(&p, delta, 48).unwrap();
        let mut area = 0.0;
        for k in 0..pts.len() {
            let (inside, d) = p.contains(pts[k]);
            prop_assert!(inside && d > 0.4 * delta, "{:?} {}", pts[k], d);
            area += pts[k].cross(pts[(k + 1) % pts.len()]);
        }
        prop_assert!(area > 0.0);
    }

    #[test]
    fn config_hash_survives_a_round_trip(h in 0.01f64..0.5, m in 1.0f64..50.0, samples in 8usize..200) {
        let text = format!(
            "[polygon]\nstar = [5, 2]\n[solver]\nh = {h:?}\nm = {m:?}\n[period]\nsamples = {samples}\n"
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        let again = RunConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.hash(), cfg.hash());
    }
}
