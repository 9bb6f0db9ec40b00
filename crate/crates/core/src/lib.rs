//! Relativistic quantum trajectory ensembles in 1+1 dimensions.
//!
//! A state is a family of non-crossing timelike worldlines x^α(T, C),
//! labelled by C and advanced in the ensemble proper time T by the method of
//! lines: finite-difference stencils in C, fixed-step RK4 in T.

pub mod analytic;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod io;
pub mod nonrel;
pub mod numerics;
pub mod quantum;

pub use ensemble::{make_grid, EnsembleState, LogWeightJet, SimConfig, SpatialGrid, Tolerances, WeightFunction};
pub use error::{Error, Result};
pub use numerics::{StencilOrder, StencilPlan};
pub use quantum::{integrate, Dynamics, Snapshot, SnapshotSeries};
