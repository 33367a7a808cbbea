//! Labeling energy, alpha-expansion and the end-to-end refinement pipeline.

mod energy;
mod expansion;
mod pipeline;

pub use energy::{build_energy, EnergyModel, EnergyParams, DEFAULT_EPS_GRAD, DEFAULT_LAMBDA};
pub use expansion::{alpha_expansion, expansion_move, ml_estimate, Expansion, ExpansionConfig, DEFAULT_MAX_SWEEPS};
pub use pipeline::*;
