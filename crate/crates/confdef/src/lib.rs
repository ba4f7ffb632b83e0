//! Numerical conformal geometry of hypersurfaces with a principal curvature of
//! multiplicity n−2 and their codimension-two conformal deformations.

pub mod congruence;
pub mod cs;
pub mod deform;
pub mod error;
pub mod grid;
pub mod hypersurface;
pub mod io;
pub mod lorentz;
pub mod pipeline;
pub mod surface;
pub mod triple;

pub use error::{GeomError, Result};
