//! Genus-one minimal r-noids with horizontal ends.
//!
//! A flux polygon fixes the ends. For a puncture `A` inside the polygon the
//! minimal surface equation is solved on the polygon disk with half-strips
//! glued to its edges (values `+inf`/`-inf` on the strip sides, a jump across
//! a cut from `A` to `P_1`). The conjugate of that graph is one half of the
//! candidate surface; its period around `A` must vanish for the surface to
//! close up. The period map, its degree on the boundary and a root finder
//! live in [`period`]; symmetric star polygons close up by construction.

pub mod error;
pub mod geom;
pub mod polygon;
pub mod domain;
pub mod sparse;
pub mod solver;
pub mod conjugate;
pub mod period;
pub mod validate;
pub mod app;

pub use error::{Error, Result};
pub use geom::V2;
pub use polygon::{FluxPolygon, StarSpec};
