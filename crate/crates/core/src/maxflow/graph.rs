use crate::error::{Error, Result};

/// A directed arc. `reverse_capacity` is the capacity of the paired arc in
/// the opposite direction (0 for a plain directed arc).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub reverse_capacity: f64,
}

/// An s-t flow network over nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    node_count: usize,
    source: usize,
    sink: usize,
    arcs: Vec<FlowArc>,
}

impl FlowGraph {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        Self {
            node_count,
            source,
            sink,
            arcs: Vec::new(),
        }
    }

    pub fn with_capacity(node_count: usize, source: usize, sink: usize, arcs: usize) -> Self {
        Self {
            node_count,
            source,
            sink,
            arcs: Vec::with_capacity(arcs),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    /// Adds `from → to` and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: f64) -> usize {
        self.add_edge(from, to, capacity, 0.0)
    }

    /// Adds a pair of opposite arcs sharing one index.
    pub fn add_edge(&mut self, from: usize, to: usize, capacity: f64, reverse_capacity: f64) -> usize {
        self.arcs.push(FlowArc {
            from,
            to,
            capacity,
            reverse_capacity,
        });
        self.arcs.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.source == self.sink {
            return Err(Error::InvalidInput("source and sink are the same node".into()));
        }
        if self.source >= self.node_count || self.sink >= self.node_count {
            return Err(Error::InvalidInput(format!(
                "terminal out of range for {} nodes",
                self.node_count
            )));
        }
        for (i, a) in self.arcs.iter().enumerate() {
            if a.from >= self.node_count || a.to >= self.node_count {
                return Err(Error::InvalidInput(format!("arc {i} references a missing node")));
            }
            for c in [a.capacity, a.reverse_capacity] {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "arc {i} has invalid capacity {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total capacity of arcs leaving the set `in_source` (`true` = source
    /// side), counting both directions of paired arcs.
    pub fn cut_capacity(&self, in_source: &[bool]) -> f64 {
        self.arcs
            .iter()
            .map(|a| match (in_source[a.from], in_source[a.to]) {
                (true, false) => a.capacity,
                (false, true) => a.reverse_capacity,
                _ => 0.0,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    SourceSide,
    SinkSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub flow: f64,
    /// Minimum cut: nodes reachable from the source in the final residual
    /// graph are `SourceSide`, all others `SinkSide`.
    pub sides: Vec<Side>,
    /// Net flow on each input arc, in its `from → to` direction (negative
    /// values run along the reverse arc).
    pub arc_flows: Vec<f64>,
}

impl CutResult {
    pub fn is_source_side(&self, node: usize) -> bool {
        self.sides[node] == Side::SourceSide
    }

    pub fn source_mask(&self) -> Vec<bool> {
        self.sides.iter().map(|&s| s == Side::SourceSide).collect()
    }
}
