//! Conjugate surface of the triangle graph: third coordinate, period
//! vector and the half surface.
use rnoid::conjugate::{conjugate_surface, gradient_frame, period_vector, psi_field, surface_area};
use rnoid::domain::{triangulate, CutDomain, MeshOptions};
use rnoid::solver::{solve, BoundaryData, SolveOptions};
use rnoid::{FluxPolygon, V2};

fn main() -> rnoid::Result<()> {
    let s = 3f64.sqrt() / 2.0;
    let t = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)])?;
    let a = V2::new(0.45, 0.25);
    let mesh = triangulate(&CutDomain::new(&t, a, 8.0)?, &MeshOptions::new(0.15))?;
    let field = solve(&mesh, &BoundaryData::new(10.0), &SolveOptions::default())?;
    let frame = gradient_frame(&mesh, &field)?;
    let psi = psi_field(&mesh, &frame, None)?;
    let per = period_vector(&mesh, &frame, &psi)?;
    println!("puncture {a:?}: horizontal period {:?}, third {:.1e}", per.horizontal, per.third);
    let half = conjugate_surface(&mesh, &frame, &psi, None)?;
    println!("half surface: {} vertices, area {:.3} (graph {:.3})", half.pos.len(), surface_area(&half), field.area);
    Ok(())
}
