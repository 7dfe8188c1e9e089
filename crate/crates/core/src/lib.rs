//! Billiards in tables bounded by circular arcs: lemons and moons together
//! with their umbrella deformations.
//!
//! * [`tables`] builds tables from `(R, B, B1)` or tangent-angle parameters.
//! * [`dynamics`] iterates the billiard map and its derivative.
//! * [`periodic`] refines and classifies periodic orbits.
//! * [`chaos`] computes Lyapunov indicators and locates the parameters
//!   where elliptic islands disappear.
//! * [`export`] writes the text and image formats used by the CLI.

pub mod chaos;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod geometry;
pub mod periodic;
pub mod tables;

pub use dynamics::{
    billiard_map, iterate, measure_density, portrait, tangent_map, CollisionEvent, Orbit, PhasePoint,
    TangentMatrix, Termination,
};
pub use error::{Error, Result};
pub use periodic::{classify, refine_periodic, PeriodicOrbit, StabilityClass};
pub use geometry::{Mat2, Vec2};

pub use tables::{
    build_table, max_offset, table_of_theta, theta_of_table, ArcSegment, BilliardTable, Family,
    Orientation, TableSpec, ThetaPair,
};
