//! H-polytope machinery for set-membership estimation: a dense simplex LP
//! solver, redundancy pruning, membership, low-dimensional vertex enumeration,
//! support functions and diameters.

pub mod diameter;
pub mod error;
pub mod lp;
pub mod polytope;
pub mod tolerance;
pub mod vertex;

pub use diameter::{diameter, support, unit_direction, width, Diameter};
pub use error::{GeometryError, Result};
pub use lp::{lp_maximize, LpResult, LpStatus};
pub use polytope::{HPolytope, Halfspace};
pub use vertex::{polygon_area, sort_ccw, vertices, vertices_2d, Point2};
