//! Exact must-pass shortest walk by Dijkstra over `(node, visited subset)`
//! states. Cost grows as `2^k` in the number of must-pass nodes, hence the
//! hard limit.

use std::collections::{BinaryHeap, HashMap};

use super::dijkstra::{dijkstra, HeapItem};
use super::{Leg, LegSource, Route};
use crate::error::{Error, Result};
use crate::graph::Rag;

pub const EXACT_MUST_PASS_LIMIT: usize = 20;

/// Dense tables are used up to this many states.
const DENSE_STATE_LIMIT: usize = 1 << 24;

enum StateTable {
    Dense { cost: Vec<f64>, pred: Vec<u64> },
    Sparse(HashMap<u64, (f64, u64)>),
}

const NO_PRED: u64 = u64::MAX;

impl StateTable {
    fn new(states: usize) -> Self {
        if states <= DENSE_STATE_LIMIT {
            StateTable::Dense {
                cost: vec![f64::INFINITY; states],
                pred: vec![NO_PRED; states],
            }
        } else {
            StateTable::Sparse(HashMap::new())
        }
    }

    fn cost(&self, s: u64) -> f64 {
        match self {
            StateTable::Dense { cost, .. } => cost[s as usize],
            StateTable::Sparse(m) => m.get(&s).map_or(f64::INFINITY, |e| e.0),
        }
    }

    fn pred(&self, s: u64) -> u64 {
        match self {
            StateTable::Dense { pred, .. } => pred[s as usize],
            StateTable::Sparse(m) => m.get(&s).map_or(NO_PRED, |e| e.1),
        }
    }

    fn set(&mut self, s: u64, c: f64, p: u64) {
        match self {
            StateTable::Dense { cost, pred } => {
                cost[s as usize] = c;
                pred[s as usize] = p;
            }
            StateTable::Sparse(m) => {
                m.insert(s, (c, p));
            }
        }
    }
}

/// Minimum-cost walk from `start` to `end` visiting every node in
/// `must_pass`; nodes and edges may repeat.
pub fn constrained_dijkstra_exact(rag: &Rag, start: usize, end: usize, must_pass: &[usize]) -> Result<Route> {
    let n = rag.node_count();
    for &v in [start, end].iter().chain(must_pass) {
        if v >= n {
            return Err(Error::InvalidNode(v));
        }
    }
    let mut targets: Vec<usize> = must_pass.to_vec();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() > EXACT_MUST_PASS_LIMIT {
        return Err(Error::TooManyMustPass {
            count: targets.len(),
            limit: EXACT_MUST_PASS_LIMIT,
        });
    }
    let from_start = dijkstra(rag, start)?;
    if let Some(&bad) = targets.iter().chain([&end]).find(|&&t| !from_start.reachable(t)) {
        return Err(Error::Unreachable { from: start, to: bad });
    }

    let k = targets.len();
    let masks = 1u64 << k;
    let full = masks - 1;
    let mut bit = vec![0u64; n];
    for (i, &t) in targets.iter().enumerate() {
        bit[t] = 1 << i;
    }
    let state = |node: usize, mask: u64| node as u64 * masks + mask;

    let mut table = StateTable::new(n * masks as usize);
    let s0 = state(start, bit[start]);
    let goal = state(end, full);
    table.set(s0, 0.0, NO_PRED);
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem { cost: 0.0, key: s0 });
    while let Some(HeapItem { cost: c, key: s }) = heap.pop() {
        if c > table.cost(s) {
            continue;
        }
        if s == goal {
            break;
        }
        let u = (s / masks) as usize;
        let mask = s % masks;
        for &(v, w) in rag.neighbors(u) {
            let t = state(v, mask | bit[v]);
            let nc = c + w;
            if nc < table.cost(t) {
                table.set(t, nc, s);
                heap.push(HeapItem { cost: nc, key: t });
            }
        }
    }
    let total = table.cost(goal);
    if !total.is_finite() {
        return Err(Error::Unreachable { from: start, to: end });
    }

    let mut walk = Vec::new();
    let mut s = goal;
    loop {
        walk.push((s / masks) as usize);
        let p = table.pred(s);
        if p == NO_PRED {
            break;
        }
        s = p;
    }
    walk.reverse();
    let leg = Leg::graph(start, end, LegSource::Direct, total, rag, &walk);
    Route::from_walk(rag, walk, total, vec![leg])
}
