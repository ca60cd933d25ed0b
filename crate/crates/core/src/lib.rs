//! Multilayer optical transport network planning: candidate-lightpath
//! enumeration with optical feasibility filtering, threshold-based grooming
//! virtual topology design, demand routing, spectrum allocation with fiber
//! overbuild, and bill-of-material generation.

pub mod allocate;
pub mod bom;
pub mod clp;
pub mod grooming;
pub mod impairment;
pub mod ingest;
pub mod model;
pub mod paths;
pub mod pipeline;
pub mod plan;
pub mod spectrum;
