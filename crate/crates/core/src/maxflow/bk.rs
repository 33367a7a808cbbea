//! Boykov–Kolmogorov augmenting-path max-flow.
//!
//! Two search trees grow from the terminals; when they touch, flow is pushed
//! along the connecting path and the orphaned subtrees are re-attached or
//! freed. Terminal arcs are folded into one signed residual per node
//! (positive = residual from the source, negative = residual to the sink).

use std::collections::VecDeque;

use super::graph::{CutResult, FlowGraph, Side};
use crate::error::Result;

const FREE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const INF_DIST: u32 = u32::MAX;

/// Where an input arc ended up in the internal representation.
#[derive(Clone, Copy)]
enum ArcRole {
    /// Internal arc pair `2k` / `2k + 1`.
    Inner(u32),
    /// Contributes `from → to` capacity from the source into `node`.
    FromSource { node: u32, reversed: bool },
    /// Contributes capacity from `node` into the sink.
    ToSink { node: u32, reversed: bool },
    /// Direct source → sink arc.
    Direct { reversed: bool },
    /// Carries no flow (self loops, arcs into the source or out of the sink).
    Idle,
}

struct Solver {
    adj_start: Vec<u32>,
    adj: Vec<u32>,
    head: Vec<u32>,
    r_cap: Vec<f64>,
    tr_cap: Vec<f64>,
    parent: Vec<u32>,
    is_sink: Vec<bool>,
    ts: Vec<u64>,
    dist: Vec<u32>,
    in_active: Vec<bool>,
    active: VecDeque<u32>,
    orphans: VecDeque<u32>,
    time: u64,
    flow: f64,
}

impl Solver {
    #[inline]
    fn arcs_of(&self, i: u32) -> std::ops::Range<usize> {
        self.adj_start[i as usize] as usize..self.adj_start[i as usize + 1] as usize
    }

    fn set_active(&mut self, i: u32) {
        if !self.in_active[i as usize] {
            self.in_active[i as usize] = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<u32> {
        while let Some(i) = self.active.pop_front() {
            self.in_active[i as usize] = false;
            if self.parent[i as usize] != FREE {
                return Some(i);
            }
        }
        None
    }

    fn run(&mut self) {
        let n = self.tr_cap.len();
        for i in 0..n {
            let c = self.tr_cap[i];
            if c != 0.0 {
                self.is_sink[i] = c < 0.0;
                self.parent[i] = TERMINAL;
                self.ts[i] = 0;
                self.dist[i] = 1;
                self.set_active(i as u32);
            }
        }

        let mut current: Option<u32> = None;
        loop {
            let i = match current.take().filter(|&i| self.parent[i as usize] != FREE) {
                Some(i) => i,
                None => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };
            let bridge = self.grow(i);
            self.time += 1;
            if let Some(a) = bridge {
                current = Some(i);
                self.augment(a);
                self.adopt_orphans();
            }
        }
    }

    /// Expands the tree containing `i` by one node's worth of arcs. Returns
    /// an arc from the source tree to the sink tree if the trees meet.
    fn grow(&mut self, i: u32) -> Option<u32> {
        let iu = i as usize;
        let sink_tree = self.is_sink[iu];
        for k in self.arcs_of(i) {
            let a = self.adj[k];
            let residual = if sink_tree {
                self.r_cap[(a ^ 1) as usize]
            } else {
                self.r_cap[a as usize]
            };
            if residual <= 0.0 {
                continue;
            }
            let j = self.head[a as usize] as usize;
            if self.parent[j] == FREE {
                self.is_sink[j] = sink_tree;
                self.parent[j] = a ^ 1;
                self.ts[j] = self.ts[iu];
                self.dist[j] = self.dist[iu] + 1;
                self.set_active(j as u32);
            } else if self.is_sink[j] != sink_tree {
                return Some(if sink_tree { a ^ 1 } else { a });
            } else if self.ts[j] <= self.ts[iu] && self.dist[j] > self.dist[iu] {
                // shorter route to the terminal
                self.parent[j] = a ^ 1;
                self.ts[j] = self.ts[iu];
                self.dist[j] = self.dist[iu] + 1;
            }
        }
        None
    }

    fn set_orphan_front(&mut self, i: u32) {
        self.parent[i as usize] = ORPHAN;
        self.orphans.push_front(i);
    }

    fn set_orphan_rear(&mut self, i: u32) {
        self.parent[i as usize] = ORPHAN;
        self.orphans.push_back(i);
    }

    fn augment(&mut self, bridge: u32) {
        let b_idx = bridge as usize;
        let mut bottleneck = self.r_cap[b_idx];

        let mut i = self.head[(bridge ^ 1) as usize] as usize;
        loop {
            let p = self.parent[i];
            if p == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[(p ^ 1) as usize]);
            i = self.head[p as usize] as usize;
        }
        bottleneck = bottleneck.min(self.tr_cap[i]);

        let mut i = self.head[b_idx] as usize;
        loop {
            let p = self.parent[i];
            if p == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[p as usize]);
            i = self.head[p as usize] as usize;
        }
        bottleneck = bottleneck.min(-self.tr_cap[i]);

        self.r_cap[(bridge ^ 1) as usize] += bottleneck;
        self.r_cap[b_idx] -= bottleneck;

        let mut i = self.head[(bridge ^ 1) as usize] as usize;
        loop {
            let p = self.parent[i];
            if p == TERMINAL {
                self.tr_cap[i] -= bottleneck;
                if self.tr_cap[i] <= 0.0 {
                    self.set_orphan_front(i as u32);
                }
                break;
            }
            self.r_cap[p as usize] += bottleneck;
            self.r_cap[(p ^ 1) as usize] -= bottleneck;
            if self.r_cap[(p ^ 1) as usize] <= 0.0 {
                self.set_orphan_front(i as u32);
            }
            i = self.head[p as usize] as usize;
        }

        let mut i = self.head[b_idx] as usize;
        loop {
            let p = self.parent[i];
            if p == TERMINAL {
                self.tr_cap[i] += bottleneck;
                if self.tr_cap[i] >= 0.0 {
                    self.set_orphan_front(i as u32);
                }
                break;
            }
            self.r_cap[(p ^ 1) as usize] += bottleneck;
            self.r_cap[p as usize] -= bottleneck;
            if self.r_cap[p as usize] <= 0.0 {
                self.set_orphan_front(i as u32);
            }
            i = self.head[p as usize] as usize;
        }

        self.flow += bottleneck;
    }

    fn adopt_orphans(&mut self) {
        while let Some(i) = self.orphans.pop_front() {
            self.adopt(i);
        }
    }

    /// Distance from `j` to its terminal through valid parents, or
    /// `INF_DIST` if the path runs into an orphan. Caches results by stamp.
    fn origin_distance(&mut self, j: usize) -> u32 {
        let mut d: u32 = 0;
        let mut k = j;
        loop {
            if self.ts[k] == self.time {
                d = d.saturating_add(self.dist[k]);
                break;
            }
            let a = self.parent[k];
            d += 1;
            if a == TERMINAL {
                self.ts[k] = self.time;
                self.dist[k] = 1;
                break;
            }
            if a == ORPHAN {
                return INF_DIST;
            }
            k = self.head[a as usize] as usize;
        }
        let mut k = j;
        let mut dd = d;
        while self.ts[k] != self.time {
            self.ts[k] = self.time;
            self.dist[k] = dd;
            dd -= 1;
            k = self.head[self.parent[k] as usize] as usize;
        }
        d
    }

    fn adopt(&mut self, i: u32) {
        let iu = i as usize;
        let sink_tree = self.is_sink[iu];
        let mut best_arc = FREE;
        let mut best_dist = INF_DIST;

        for k in self.arcs_of(i) {
            let a0 = self.adj[k];
            let residual = if sink_tree {
                self.r_cap[a0 as usize]
            } else {
                self.r_cap[(a0 ^ 1) as usize]
            };
            if residual <= 0.0 {
                continue;
            }
            let j = self.head[a0 as usize] as usize;
            if self.is_sink[j] != sink_tree || self.parent[j] == FREE {
                continue;
            }
            let d = self.origin_distance(j);
            if d < best_dist {
                best_dist = d;
                best_arc = a0;
            }
        }

        if best_arc != FREE {
            self.parent[iu] = best_arc;
            self.ts[iu] = self.time;
            self.dist[iu] = best_dist + 1;
            return;
        }

        self.parent[iu] = FREE;
        for k in self.arcs_of(i) {
            let a0 = self.adj[k];
            let j = self.head[a0 as usize] as usize;
            let pj = self.parent[j];
            if self.is_sink[j] != sink_tree || pj == FREE {
                continue;
            }
            let residual = if sink_tree {
                self.r_cap[a0 as usize]
            } else {
                self.r_cap[(a0 ^ 1) as usize]
            };
            if residual > 0.0 {
                self.set_active(j as u32);
            }
            if pj != TERMINAL && pj != ORPHAN && self.head[pj as usize] as usize == iu {
                self.set_orphan_rear(j as u32);
            }
        }
    }
}

/// Computes a maximum flow and the canonical minimum cut of `graph`.
pub fn solve(graph: &FlowGraph) -> Result<CutResult> {
    graph.validate()?;
    let n = graph.node_count();
    let (s, t) = (graph.source(), graph.sink());

    let mut roles = Vec::with_capacity(graph.arcs().len());
    let mut head: Vec<u32> = Vec::new();
    let mut tail: Vec<u32> = Vec::new();
    let mut r_cap: Vec<f64> = Vec::new();
    let mut source_cap = vec![0.0f64; n];
    let mut sink_cap = vec![0.0f64; n];
    let mut direct = 0.0f64;

    for arc in graph.arcs() {
        let (u, v) = (arc.from, arc.to);
        let role = if u == v {
            ArcRole::Idle
        } else if u == s && v == t {
            direct += arc.capacity;
            ArcRole::Direct { reversed: false }
        } else if u == t && v == s {
            direct += arc.reverse_capacity;
            ArcRole::Direct { reversed: true }
        } else if u == s {
            source_cap[v] += arc.capacity;
            ArcRole::FromSource { node: v as u32, reversed: false }
        } else if v == s {
            if u == t {
                ArcRole::Idle
            } else {
                source_cap[u] += arc.reverse_capacity;
                ArcRole::FromSource { node: u as u32, reversed: true }
            }
        } else if v == t {
            sink_cap[u] += arc.capacity;
            ArcRole::ToSink { node: u as u32, reversed: false }
        } else if u == t {
            sink_cap[v] += arc.reverse_capacity;
            ArcRole::ToSink { node: v as u32, reversed: true }
        } else {
            let k = (head.len() / 2) as u32;
            tail.push(u as u32);
            head.push(v as u32);
            r_cap.push(arc.capacity);
            tail.push(v as u32);
            head.push(u as u32);
            r_cap.push(arc.reverse_capacity);
            ArcRole::Inner(k)
        };
        roles.push(role);
    }

    // CSR adjacency keyed by tail, preserving insertion order
    let mut adj_start = vec![0u32; n + 1];
    for &u in &tail {
        adj_start[u as usize + 1] += 1;
    }
    for i in 0..n {
        adj_start[i + 1] += adj_start[i];
    }
    let mut fill = adj_start.clone();
    let mut adj = vec![0u32; tail.len()];
    for (a, &u) in tail.iter().enumerate() {
        adj[fill[u as usize] as usize] = a as u32;
        fill[u as usize] += 1;
    }

    // push flow straight through s → i → t where both arcs exist
    let mut prepush = 0.0;
    let tr_cap: Vec<f64> = (0..n)
        .map(|i| {
            prepush += source_cap[i].min(sink_cap[i]);
            source_cap[i] - sink_cap[i]
        })
        .collect();

    let mut solver = Solver {
        adj_start,
        adj,
        head,
        r_cap,
        tr_cap,
        parent: vec![FREE; n],
        is_sink: vec![false; n],
        ts: vec![0; n],
        dist: vec![0; n],
        in_active: vec![false; n],
        active: VecDeque::new(),
        orphans: VecDeque::new(),
        time: 0,
        flow: 0.0,
    };
    solver.run();

    // canonical cut: residual reachability from the source
    let mut reach = vec![false; n];
    let mut queue = VecDeque::new();
    reach[s] = true;
    for i in 0..n {
        if i != s && i != t && solver.tr_cap[i] > 0.0 {
            reach[i] = true;
            queue.push_back(i as u32);
        }
    }
    while let Some(i) = queue.pop_front() {
        for k in solver.arcs_of(i) {
            let a = solver.adj[k] as usize;
            let j = solver.head[a] as usize;
            if solver.r_cap[a] > 0.0 && !reach[j] {
                reach[j] = true;
                queue.push_back(j as u32);
            }
        }
    }
    debug_assert!(!reach[t]);

    // per-node terminal flows, then spread over the contributing arcs
    let mut source_flow = vec![0.0f64; n];
    let mut sink_flow = vec![0.0f64; n];
    for i in 0..n {
        let (cs, ct, tr) = (source_cap[i], sink_cap[i], solver.tr_cap[i]);
        if cs >= ct {
            source_flow[i] = cs - tr;
            sink_flow[i] = ct;
        } else {
            source_flow[i] = cs;
            sink_flow[i] = ct + tr;
        }
    }
    let mut arc_flows = Vec::with_capacity(roles.len());
    for (arc, role) in graph.arcs().iter().zip(&roles) {
        let f = match *role {
            ArcRole::Inner(k) => arc.capacity - solver.r_cap[2 * k as usize],
            ArcRole::FromSource { node, reversed } => {
                let cap = if reversed { arc.reverse_capacity } else { arc.capacity };
                let take = cap.min(source_flow[node as usize]);
                source_flow[node as usize] -= take;
                if reversed { -take } else { take }
            }
            ArcRole::ToSink { node, reversed } => {
                let cap = if reversed { arc.reverse_capacity } else { arc.capacity };
                let take = cap.min(sink_flow[node as usize]);
                sink_flow[node as usize] -= take;
                if reversed { -take } else { take }
            }
            ArcRole::Direct { reversed } => {
                if reversed {
                    -arc.reverse_capacity
                } else {
                    arc.capacity
                }
            }
            ArcRole::Idle => 0.0,
        };
        arc_flows.push(f);
    }

    Ok(CutResult {
        flow: solver.flow + prepush + direct,
        sides: reach
            .into_iter()
            .map(|r| if r { Side::SourceSide } else { Side::SinkSide })
            .collect(),
        arc_flows,
    })
}
