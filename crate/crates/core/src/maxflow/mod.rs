//! Exact s-t maximum flow / minimum cut.

mod bk;
pub mod dimacs;
mod graph;

pub use bk::solve;
pub use dimacs::parse_dimacs;
pub use graph::{CutResult, FlowArc, FlowGraph, Side};
