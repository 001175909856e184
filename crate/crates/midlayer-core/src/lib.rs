//! Exact computation engine for proper q-colorings of the middle two
//! layers of the Hamming cube: graph structure, flaw decompositions,
//! polymer models with exact rational weights, cluster-expansion series,
//! container checks, and an auxiliary sampling measure.
//!
//! All weights, series terms and partition functions are exact rationals;
//! the only real-number computations (exp, ln) are directed-rounding
//! enclosures, so every emitted bound is rigorous.

pub mod cluster;
pub mod coloring;
pub mod containers;
pub mod error;
pub mod graph;
pub mod interval;
pub mod polymer;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::{build_graph, MidLayerGraph};
