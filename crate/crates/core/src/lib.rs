//! Occupation-time statistics of planar Brownian excursions and loops.
//!
//! The library estimates integral functionals of Brownian paths in the unit
//! disc three independent ways and checks that they agree:
//!
//! * Monte Carlo samplers for boundary excursions and conditioned loops,
//!   weighted so that path functionals estimate integrals against the
//!   corresponding infinite path measures;
//! * deterministic quadrature of the closed-form kernels (Green's function,
//!   Poisson kernel, and their products) that those measures integrate to;
//! * an exact random-walk computation on a discretized disc, where the
//!   analogous identities hold combinatorially.
//!
//! The `excloop` binary drives preconfigured experiments and emits one CSV
//! row per verified quantity.

pub mod analytic;
pub mod clouds;
pub mod diagnostics;
pub mod estimators;
pub mod geom;
pub mod lattice;
pub mod parallel;
pub mod rng;
pub mod sampler;

pub use analytic::AnalyticError;
pub use geom::{Density, GeomError, MoebiusMap, Point, Region};
pub use rng::RngStream;
pub use sampler::{Path, SampleError};
