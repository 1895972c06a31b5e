//! Explicitly solvable zero-energy radial Schrödinger potentials.
//!
//! Starting from potentials whose regular solution `φ'' = Vφ, φ(0) = 0` is
//! known in closed form, the composition engines in [`transform`] build new
//! potentials together with their solutions through monotone changes of
//! variable. Every construction can be checked numerically with [`verify`].
//!
//! Module map:
//!
//! * [`special`]: Bessel functions of order 0 and 1.
//! * [`quadrature`]: adaptive integration, tail integrals, integrability tests.
//! * [`interp`]: monotone cubic and piecewise Chebyshev interpolation.
//! * [`potential`]: the [`RadialPotential`] type and its classification.
//! * [`ode`]: regular and second solutions, asymptotics, nodes, Bargmann bound.
//! * [`catalog`]: closed-form seed potentials.
//! * [`transform`]: the composition engines and iteration.
//! * [`verify`]: residuals and the aggregated verification report.
//! * [`recipe`]: JSON recipes and the pipeline behind the CLI.

use std::sync::Arc;

pub mod catalog;
pub mod interp;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod recipe;
pub mod special;
pub mod transform;
pub mod verify;

/// A shareable real function of one variable.
pub type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A shareable function returning `(value, derivative)`.
pub type DiffFunc = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

pub use catalog::{CatalogEntry, CatalogName};
pub use ode::SolutionPair;
pub use potential::{InfinityClass, OriginClass, RadialPotential};
pub use transform::{CompositionRecord, Engine, MonotoneMap};
pub use verify::VerificationReport;
