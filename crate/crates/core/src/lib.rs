//! Lagrangian solver for the Kimura replicator-diffusion equation of random
//! genetic drift. The unknown is the pseudo-inverse CDF of the allele
//! frequency density on a uniform grid in the mass coordinate.

pub mod diagnostics;
pub mod experiment;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod tridiag;
