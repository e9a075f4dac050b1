//! Solve the Jenkins-Serrin problem on the punctured triangle along a
//! short continuation schedule.
use rnoid::domain::{CutDomain, MeshOptions};
use rnoid::solver::{continuation_solve, BoundaryData, Level, SolveOptions};
use rnoid::{FluxPolygon, V2};

fn main() -> rnoid::Result<()> {
    let s = 3f64.sqrt() / 2.0;
    let t = FluxPolygon::from_edge_vectors(&[V2::new(1.0, 0.0), V2::new(-0.5, s), V2::new(-0.5, -s)])?;
    let a = t.centroid();
    let schedule = [
        Level { m: 4.0, l: 8.0, h: 0.2 },
        Level { m: 10.0, l: 8.0, h: 0.2 },
        Level { m: 10.0, l: 8.0, h: 0.1 },
    ];
    let (_, field, rows) = continuation_solve(
        &|l| CutDomain::new(&t, a, l),
        &schedule,
        &MeshOptions::new(0.2),
        &BoundaryData::new(10.0),
        &SolveOptions::default(),
        None,
    )?;
    for r in &rows {
        println!("M {:>4} h {:.2}: {:>6} nodes, {:>2} Newton steps, c = {:.6}", r.level.m, r.level.h, r.nodes, r.newton_iters, r.c);
    }
    println!("residual {:.2e}, graph area {:.4}", field.residual_norm, field.area);
    Ok(())
}
