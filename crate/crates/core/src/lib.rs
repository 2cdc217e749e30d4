//! Semidefinite relaxation of hydro-thermal coordination.

pub mod analysis;
pub mod case;
pub mod ccp;
pub mod cuts;
pub mod model;
pub mod report;
pub mod shor;

pub use case::{CaseError, CaseStudy, Horizon, ValidationIssue};
pub use model::{Definiteness, HydroPlant, ModelError, Period, ProductionQuadratic, ThermalPlant};
