//! Winding number of the period map along an inset loop of the triangle.
use rnoid::period::{degree, PeriodCache, PeriodMap, PeriodOptions};
use rnoid::{FluxPolygon, V2};

fn main() -> rnoid::Result<()> {
    let s = 3f64.sqrt() / 2.0;
    let t = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)])?;
    let mut opts = PeriodOptions::for_polygon(&t);
    opts.levels[0].h = 0.15;
    let cache = PeriodCache::in_memory();
    let map = PeriodMap { poly: &t, opts: &opts, cache: &cache, jobs: 0 };
    let rep = degree(&map, 0.05 * t.diameter(), 48, 2)?;
    for (p, s) in rep.params.iter().zip(&rep.samples).step_by(4) {
        println!("s {p:.3}  A ({:.3}, {:.3})  Per ({:+.3}, {:+.3})", s.a.x, s.a.y, s.renormalized.x, s.renormalized.y);
    }
    println!("winding {} over {} samples (r - 1 = {})", rep.winding, rep.samples.len(), t.r() - 1);
    Ok(())
}
