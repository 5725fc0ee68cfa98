//! End-to-end pipeline for the multimodal neural motion planner: scene and
//! dataset generation, training, benchmarking, and SVG visualization, driven
//! by one run-configuration file.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod hash;
pub mod stages;
pub mod viz;
