//! Simulation of a rigid axisymmetric body propelled through a viscous
//! incompressible liquid by a zero-mean, time-periodic internal force.
//!
//! The crate covers the whole pipeline on the meridian half-plane:
//!
//! * [`geometry`] and [`meshgen`] describe the body and triangulate the
//!   truncated fluid domain around it,
//! * [`fem`] provides the axisymmetric Taylor–Hood (or stabilized equal-order)
//!   discretization, boundary regimes and the force functional,
//! * [`linsolve`] wraps sparse LU, GMRES and a Newton driver,
//! * [`auxstokes`] computes the steady drag field and the resistance,
//! * [`forcing`], [`timeloop`], [`thrust`] and [`nonlinear`] implement the
//!   time-periodic linear problem, the second-order thrust and the direct
//!   nonlinear integration,
//! * [`report`] compares run summaries with published reference values.

pub mod auxstokes;
pub mod config;
pub mod fem;
pub mod forcing;
pub mod geometry;
pub mod linsolve;
pub mod meshgen;
pub mod nonlinear;
pub mod output;
pub mod pipeline;
pub mod report;
pub mod thrust;
pub mod timeloop;

pub use config::SimConfig;
pub use geometry::{BodyKind, BodyShape, DomainSpec};
pub use meshgen::{AxiMesh, BoundaryTag};
