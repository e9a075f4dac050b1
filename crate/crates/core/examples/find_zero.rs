//! Locate a zero of the period map on a scalene triangle. Takes about a
//! minute in release mode.
use rnoid::period::{find_zero, PeriodCache, PeriodMap, PeriodOptions};
use rnoid::{FluxPolygon, V2};

fn main() -> rnoid::Result<()> {
    let t = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.3, 0.8), V2::new(-0.7, -0.8)])?;
    let opts = PeriodOptions::for_polygon(&t);
    let cache = PeriodCache::in_memory();
    let map = PeriodMap { poly: &t, opts: &opts, cache: &cache, jobs: 0 };
    let z = find_zero(&map, 0.05 * t.diameter())?;
    println!("A* = ({:.6}, {:.6}), |Per| = {:.2e}", z.a.x, z.a.y, z.sample.raw.norm());
    println!(
        "root winding {}, {} cells, {} evaluations, {} polish steps",
        z.search.root_winding,
        z.search.cells.len(),
        z.evaluations,
        z.polish_steps
    );
    Ok(())
}
