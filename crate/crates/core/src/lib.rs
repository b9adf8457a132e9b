//! Fragment-based molecular stories with a geometry-aware autoregressive
//! generator.

pub mod molgraph;
pub mod canon;
pub mod fragmenter;
pub mod io;
pub mod story;
pub mod engine;
pub mod geometry;
pub mod model;
pub mod cli;
