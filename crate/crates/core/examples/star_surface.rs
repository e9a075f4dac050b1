//! Symmetric r-noids from star polygons; writes the trinoid as an OBJ-like
//! text file when a path is given.
use rnoid::conjugate::write_surface;
use rnoid::period::{symmetric_zero, unit_star, PeriodOptions};
use rnoid::StarSpec;

fn main() -> rnoid::Result<()> {
    for (r, q) in [(3, 1), (4, 1), (5, 2)] {
        let spec = StarSpec::new(r, q)?;
        let mut opts = PeriodOptions::for_polygon(&unit_star(spec));
        opts.levels[0].h = 0.15;
        let z = symmetric_zero(spec, &opts)?;
        println!(
            "({r},{q}): |Per| {:.1e}, c {:.4}, {} vertices, {} ends",
            z.sample.raw.norm(),
            z.sample.c,
            z.surface.pos.len(),
            z.surface.ends.len()
        );
        if r == 3 {
            if let Some(path) = std::env::args().nth(1) {
                std::fs::write(&path, write_surface(&z.surface, "trinoid"))?;
                println!("  wrote {path}");
            }
        }
    }
    Ok(())
}
