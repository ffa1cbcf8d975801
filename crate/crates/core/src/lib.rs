//! Language-driven UAV mission generation from georeferenced satellite
//! imagery, and the trajectory metrics used to compare generated plans with
//! human-made ones.

pub mod cli;
pub mod eval;
pub mod geo;
pub mod mission;
pub mod models;
pub mod pipeline;
