//! Numerical tolerances shared by every geometry routine.

/// Slack allowed when testing `a·x <= b`.
pub const FEASIBILITY: f64 = 1e-9;

/// Vertices closer than this (Euclidean) are merged.
pub const DEDUP_RADIUS: f64 = 1e-8;

/// A constraint is dropped only if the remaining set keeps `a·x` below `b` by this margin.
pub const PRUNE_MARGIN: f64 = 1e-9;

/// Pivot magnitudes and reduced costs below this are treated as zero inside the simplex.
pub const PIVOT: f64 = 1e-11;

/// Hard cap on simplex pivots before the solver reports a stall.
pub const MAX_PIVOTS: usize = 1_000_000;

/// Determinant threshold (on unit normals) below which a constraint subset is
/// considered parallel and yields no vertex.
pub const SINGULAR: f64 = 1e-12;
