//! Mesh the punctured triangle with its strips and print the boundary tags.
use std::collections::BTreeMap;

use rnoid::domain::{triangulate, CutDomain, MeshOptions};
use rnoid::{FluxPolygon, V2};

fn main() -> rnoid::Result<()> {
    let s = 3f64.sqrt() / 2.0;
    let t = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)])?;
    let domain = CutDomain::new(&t, t.centroid(), 8.0)?;
    let mesh = triangulate(&domain, &MeshOptions::new(0.2))?;
    println!(
        "{} nodes, {} triangles, euler {}, min angle {:.1} deg",
        mesh.num_nodes(),
        mesh.tris.len(),
        mesh.euler_characteristic(),
        mesh.min_angle_deg()
    );
    let mut tags: BTreeMap<String, usize> = BTreeMap::new();
    for b in &mesh.boundary {
        *tags.entry(b.tag.to_string()).or_default() += 1;
    }
    for (tag, n) in tags {
        println!("  {tag}: {n} edges");
    }
    Ok(())
}
