//! Generalized hyperbolic circle packings on closed triangulated surfaces.

pub mod hypgeom;
pub mod nerve;
pub mod flow;
pub mod polytope;
pub mod quad;
pub mod solver;
pub mod layout;
pub mod verify;
