use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::Rag;
use crate::polyline::dist;

/// Min-heap entry ordered by cost, then by smaller key.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HeapItem<K> {
    pub cost: f64,
    pub key: K,
}

impl<K: Ord> PartialEq for HeapItem<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<K: Ord> Eq for HeapItem<K> {}

impl<K: Ord> PartialOrd for HeapItem<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Ord> Ord for HeapItem<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.key.cmp(&self.key))
    }
}

/// `f64` ordered by `total_cmp`, for use inside heap keys.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Total(pub f64);

impl PartialEq for Total {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Total {}

impl PartialOrd for Total {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Total {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-source shortest path tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub source: usize,
    /// `f64::INFINITY` for unreachable nodes.
    pub cost: Vec<f64>,
    /// Centroid arc length (mm) of the chosen path.
    pub length: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl ShortestPaths {
    pub fn reachable(&self, target: usize) -> bool {
        self.cost[target].is_finite()
    }

    /// Node sequence from the source to `target`.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.reachable(target) {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// Dijkstra over non-negative edge costs. Equal-cost paths are ranked by
/// centroid arc length, so zero-cost plateaus yield geometrically short
/// paths; remaining ties go to the smaller predecessor id among settled
/// nodes, which keeps the tree acyclic.
pub fn dijkstra(rag: &Rag, source: usize) -> Result<ShortestPaths> {
    let n = rag.node_count();
    if source >= n {
        return Err(Error::InvalidNode(source));
    }
    let mut cost = vec![f64::INFINITY; n];
    let mut length = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[source] = 0.0;
    length[source] = 0.0;
    heap.push(HeapItem {
        cost: 0.0,
        key: (Total(0.0), source),
    });
    while let Some(HeapItem { cost: c, key: (Total(l), u) }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        let cu = rag.centroid(u);
        for &(v, w) in rag.neighbors(u) {
            if settled[v] {
                continue;
            }
            let nc = c + w;
            let nl = l + dist(cu, rag.centroid(v));
            let order = nc.total_cmp(&cost[v]).then(nl.total_cmp(&length[v]));
            if order == Ordering::Less {
                cost[v] = nc;
                length[v] = nl;
                pred[v] = Some(u);
                heap.push(HeapItem {
                    cost: nc,
                    key: (Total(nl), v),
                });
            } else if order == Ordering::Equal && pred[v].is_some_and(|p| u < p) {
                pred[v] = Some(u);
            }
        }
    }
    Ok(ShortestPaths {
        source,
        cost,
        length,
        pred,
    })
}
