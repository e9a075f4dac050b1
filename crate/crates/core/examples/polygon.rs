//! Flux polygons: closure, convexity, star polygons.
use rnoid::{FluxPolygon, StarSpec, V2};

fn main() -> rnoid::Result<()> {
    let t = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.3, 0.8), V2::new(-0.7, -0.8)])?;
    println!("scalene: r = {}, convex = {}, diameter = {:.4}", t.r(), t.is_convex(), t.diameter());
    for (i, a) in t.interior_angles().iter().enumerate() {
        println!("  P{} = {:?}, interior angle {:.4}", i + 1, t.vertex(i), a);
    }
    let star = FluxPolygon::star(StarSpec::new(5, 2)?);
    println!("pentagram: turning number {}, convex = {}", star.turning_number(), star.is_convex());
    match FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(0.0, 1.0)]) {
        Err(e) => println!("two edges: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
