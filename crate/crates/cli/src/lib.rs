//! Experiment generation, configuration and artifact emission for the
//! disc-to-ellipse flow benchmark.

pub mod config;
pub mod experiment;
pub mod pipeline;
pub mod rng;
pub mod svg;
