//! Analysis of nonconvex semi-infinite programs.
//!
//! The crate checks constraint qualifications at a candidate point, builds
//! finite representations of the normal cone to the feasible set and verifies
//! or refutes KKT-type stationarity with explicit multiplier certificates.

pub mod cones;
pub mod cq;
pub mod expr;
pub mod linsolve;
pub mod model;
pub mod optimality;
pub mod solver;
