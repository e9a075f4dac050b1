//! Surface checks on the trinoid: end fluxes, total curvature, closure.
use std::f64::consts::PI;

use rnoid::conjugate::{conjugate_surface, gradient_frame};
use rnoid::period::{symmetric_zero, unit_star, PeriodOptions};
use rnoid::validate::{closure_check, end_flux, total_curvature};
use rnoid::StarSpec;

fn main() -> rnoid::Result<()> {
    let spec = StarSpec::new(3, 1)?;
    let poly = unit_star(spec);
    let mut opts = PeriodOptions::for_polygon(&poly);
    opts.levels[0].h = 0.05;
    opts.vertex_slope = 0.1;
    let z = symmetric_zero(spec, &opts)?;
    for (e, end) in z.surface.ends.iter().enumerate() {
        let f = end_flux(&z.surface, e)?;
        println!(
            "end {e}: flux ({:+.4}, {:+.4}, {:+.1e}), expected 2 v = {:?}",
            f.horizontal.x,
            f.horizontal.y,
            f.vertical,
            poly.edge(end.edge) * 2.0
        );
    }
    let k = total_curvature(&z.surface, 0.4 * poly.min_edge())?;
    println!("total curvature {:.3} pi (expected 12 pi), euler {}", k.total / PI, k.euler);
    let frame = gradient_frame(&z.mesh, &z.field)?;
    let half = conjugate_surface(&z.mesh, &frame, &z.psi, None)?;
    println!("closure gap {:.1e}", closure_check(&half));
    Ok(())
}
