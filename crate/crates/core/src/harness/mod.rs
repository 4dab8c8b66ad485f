//! Data generation, ingestion, experiment running and statistics.

pub mod experiment;
pub mod ingest;
pub mod simulation;
pub mod stats;
pub mod synthetic;
pub mod tidy;
