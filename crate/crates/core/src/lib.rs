//! Constant-curvature metrics admitting orthogonal separation of variables.

#![allow(clippy::needless_range_loop)]

pub mod equivalence;
pub mod flat_coords;
pub mod forest;
pub mod geometry;
pub mod jets;
pub mod killing_stackel;
pub mod linalg;
pub mod metric;
pub mod poly;
pub mod random;
pub mod scalar;
