//! Alpha-expansion over the weighted Potts energy.
//!
//! Each move offers every pixel the choice between keeping its label and
//! switching to one candidate label `α`. The binary move energy is
//! submodular for Potts pairwise terms and is minimized exactly with one
//! min-cut: source side = switch to `α`, sink side = keep.

use super::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grids::LabelField;
use crate::maxflow::{self, FlowGraph};
use crate::scoring::DiscretePdf;

pub const DEFAULT_MAX_SWEEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionConfig {
    pub max_sweeps: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub labels: LabelField,
    pub energy: f64,
    /// Energy after every accepted move, starting with the initial energy.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    /// `true` when the last sweep changed nothing.
    pub converged: bool,
}

/// Minimizes the model energy starting from `init`, visiting labels in
/// ascending order each sweep.
pub fn alpha_expansion(
    model: &EnergyModel,
    init: &LabelField,
    cfg: &ExpansionConfig,
) -> Result<Expansion> {
    let mut energy = model.energy(init)?;
    if init.bins() != model.bins() {
        return Err(Error::DimensionMismatch(format!(
            "label field has {} bins, model has {}",
            init.bins(),
            model.bins()
        )));
    }
    let mut labels = init.clone();
    let mut trace = vec![energy];
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for alpha in 1..=model.bins() as u32 {
            let candidate = expansion_move(model, labels.data(), alpha)?;
            let candidate_energy = model.energy_unchecked(&candidate);
            if candidate_energy < energy {
                labels.data_mut().copy_from_slice(&candidate);
                energy = candidate_energy;
                trace.push(energy);
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    debug_assert!(trace.windows(2).all(|w| w[1] <= w[0]));

    Ok(Expansion {
        labels,
        energy,
        trace,
        sweeps,
        converged,
    })
}

/// Optimal `α`-expansion of `current`, as a new labeling.
pub fn expansion_move(model: &EnergyModel, current: &[u32], alpha: u32) -> Result<Vec<u32>> {
    let n = model.pixel_count();
    let (source, sink) = (n, n + 1);
    // cost of keeping (paid on s → p) and of switching (paid on p → t)
    let mut keep_cost = vec![0.0f64; n];
    let mut switch_cost = vec![0.0f64; n];
    for p in 0..n {
        keep_cost[p] = model.unary_cost(p, current[p]);
        switch_cost[p] = model.unary_cost(p, alpha);
    }

    let mut graph = FlowGraph::with_capacity(n + 2, source, sink, 4 * n);
    if model.lambda() > 0.0 {
        for (p, q) in model.edges() {
            let w = model.edge_weight(p, q);
            if w == 0.0 {
                continue;
            }
            let (xp, xq) = (current[p], current[q]);
            // E(keep, keep), E(keep, switch), E(switch, keep); E(switch, switch) = 0
            let a = if xp != xq { w } else { 0.0 };
            let b = if xp != alpha { w } else { 0.0 };
            let c = if alpha != xq { w } else { 0.0 };
            // B on p's keep side, B - A on q, and B + C - A (>= 0, Potts is
            // a metric) when p switches but q keeps
            keep_cost[p] += b;
            if b >= a {
                switch_cost[q] += b - a;
            } else {
                keep_cost[q] += a - b;
            }
            let pair = b + c - a;
            if pair > 0.0 {
                graph.add_arc(p, q, pair);
            }
        }
    }
    for p in 0..n {
        if keep_cost[p] > 0.0 {
            graph.add_arc(source, p, keep_cost[p]);
        }
        if switch_cost[p] > 0.0 {
            graph.add_arc(p, sink, switch_cost[p]);
        }
    }

    let cut = maxflow::solve(&graph)?;
    Ok((0..n)
        .map(|p| if cut.is_source_side(p) { alpha } else { current[p] })
        .collect())
}

/// Per-pixel argmax of `pdfs` (lowest label on ties). Equivalent to
/// minimizing the energy with `λ = 0`.
pub fn ml_estimate(pdfs: &[DiscretePdf], height: usize, width: usize) -> Result<LabelField> {
    if pdfs.len() != height * width {
        return Err(Error::DimensionMismatch(format!(
            "{} pdfs for a {height}x{width} grid",
            pdfs.len()
        )));
    }
    let bins = pdfs.first().map(DiscretePdf::bins).unwrap_or(1);
    LabelField::new(height, width, bins, pdfs.iter().map(DiscretePdf::argmax).collect())
}
